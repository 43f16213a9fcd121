//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p eatsense-core --test acceptance`. Every oracle
//! here is computed independently of the library code it checks.

use std::time::{Duration, Instant};

use eatsense::anchor::{build_event_set, check_nonoverlap, derive_eating_anchor};
use eatsense::eval::metrics::{auroc, macro_f1};
use eatsense::eval::report::{per_user_csv, summary_csv};
use eatsense::eval::{
    audit_fold, grid, run_grid, run_protocol, EvalConfig, FeaturePreset, Protocol,
};
use eatsense::features::{is_binary, Modality, FEATURE_NAMES, N_FEATURES};
use eatsense::featurize::{featurize_all, AppManifest, FeatureTable};
use eatsense::ingest::{timezone_offsets, IntakeCase, RecencyBucket, SelfReport};
use eatsense::learn::boost::{log_loss, log_loss_gradient};
use eatsense::learn::pipeline::{Objective, PipelineSpec};
use eatsense::learn::sfs::{score_subset, sfs, SfsConfig};
use eatsense::learn::{smote, Matrix, ModelKind, ModelParams, RfParams};
use eatsense::stats::{cohens_d_ci, two_sample_t};
use eatsense::synth::{generate_cohort, generate_reports, CohortSpec};
use eatsense::{seed, Execution, MS_PER_MINUTE};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table_for(spec: &CohortSpec, seed: u64) -> FeatureTable {
    let c = generate_cohort(spec, seed).expect("cohort");
    let (events, _) = build_event_set(&c.reports, 30, seed, Execution::Parallel);
    let manifest = AppManifest::from_bundles(c.bundles.values());
    let tz = timezone_offsets(&c.reports);
    featurize_all(&c.bundles, &events, &manifest, &tz, Execution::Parallel)
}

/// Midpoint from the bucket label alone: lower bound snapped to the half-hour grid plus 15.
fn midpoint_oracle(label: &str) -> i64 {
    let lo: i64 = label.split('-').next().unwrap().parse().unwrap();
    (lo / 30) * 30 + 15
}

fn c1_anchoring() -> Outcome {
    let t0 = Instant::now();
    let mut rng = seed::rng(1);
    for _ in 0..1000 {
        let bucket = RecencyBucket::ALL[rng.gen_range(0..8)];
        let case = if rng.gen_bool(0.5) {
            IntakeCase::OneIntake
        } else {
            IntakeCase::MultiIntake
        };
        let r = SelfReport {
            user_id: "u".into(),
            ts: rng.gen_range(1_500_000_000_000i64..1_700_000_000_000),
            case,
            bucket: Some(bucket),
            tz_offset_min: -360,
        };
        let want = r.ts - midpoint_oracle(bucket.as_str()) * MS_PER_MINUTE;
        ensure(derive_eating_anchor(&r) == Some(want), || {
            format!("anchor mismatch for {bucket}")
        })?;
    }
    // 8:00 pm local, "31-60" -> 7:15 pm local.
    let day = 18170 * 86_400_000i64;
    let r = SelfReport {
        user_id: "u".into(),
        ts: day + 20 * 3_600_000 + 360 * MS_PER_MINUTE,
        case: IntakeCase::OneIntake,
        bucket: Some(RecencyBucket::M31To60),
        tz_offset_min: -360,
    };
    let local = r.local_ts(derive_eating_anchor(&r).unwrap()) - day;
    ensure(local == (19 * 60 + 15) * MS_PER_MINUTE, || {
        format!("8 pm + 31-60 gave {} min", local / MS_PER_MINUTE)
    })?;

    let spec = CohortSpec {
        n_users: 10,
        ..Default::default()
    };
    let mut n_events = 0;
    for s in 0..20 {
        let (reports, _, _) = generate_reports(&spec, s).map_err(|e| e.to_string())?;
        for x in [10, 30, 90] {
            let (set, _) = build_event_set(&reports, x, s, Execution::Parallel);
            n_events += set.events.len();
            let v = check_nonoverlap(&set);
            ensure(v.is_empty(), || {
                format!("seed {s}, X={x}: {} overlaps", v.len())
            })?;
        }
    }
    let el = t0.elapsed();
    ensure(el < Duration::from_secs(5), || format!("took {el:.2?}"))?;
    Ok(format!("1000 anchors exact, 7:15 pm example, 0 overlaps in {n_events} events over 20 seeds x 3 X, {el:.2?}"))
}

fn c2_manifest() -> Outcome {
    let spec = CohortSpec {
        n_users: 8,
        ..Default::default()
    };
    let c = generate_cohort(&spec, 4).map_err(|e| e.to_string())?;
    let (events, _) = build_event_set(&c.reports, 30, 4, Execution::Parallel);
    let manifest = AppManifest::from_bundles(c.bundles.values());
    let tz = timezone_offsets(&c.reports);
    let t0 = Instant::now();
    let table = featurize_all(&c.bundles, &events, &manifest, &tz, Execution::Parallel);
    let el = t0.elapsed();
    let per_10k = el.as_secs_f64() * 10_000.0 / table.len() as f64;

    let sizes: Vec<usize> = [
        Modality::Loc,
        Modality::Acc,
        Modality::App,
        Modality::Bat,
        Modality::Scr,
        Modality::Time,
    ]
    .iter()
    .map(|m| m.range().len())
    .collect();
    ensure(sizes == [1, 18, 10, 6, 2, 3], || {
        format!("group sizes {sizes:?}")
    })?;
    ensure(FEATURE_NAMES.len() == 40, || "manifest size".into())?;
    for r in &table.rows {
        ensure(
            r.values.len() == N_FEATURES && r.present.len() == N_FEATURES,
            || "row width".into(),
        )?;
        for j in (0..N_FEATURES).filter(|&j| is_binary(j)) {
            ensure(r.values[j] == 0.0 || r.values[j] == 1.0, || {
                format!("{} = {}", FEATURE_NAMES[j], r.values[j])
            })?;
        }
    }
    ensure(per_10k < 1.0, || format!("{per_10k:.2} s per 10k events"))?;
    Ok(format!(
        "{} events x 40 features, groups 1/18/10/6/2/3, binaries ok, {per_10k:.3} s per 10k events",
        table.len()
    ))
}

fn pairwise_auroc(y: &[u8], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn f1_oracle(y: &[u8], p: &[u8], c: u8) -> f64 {
    let tp = y
        .iter()
        .zip(p)
        .filter(|(a, b)| **a == c && **b == c)
        .count() as f64;
    let pred = p.iter().filter(|b| **b == c).count() as f64;
    let actual = y.iter().filter(|a| **a == c).count() as f64;
    let precision = if pred > 0.0 { tp / pred } else { 0.0 };
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn c3_metrics() -> Outcome {
    let mut rng = seed::rng(3);
    let mut worst_auc: f64 = 0.0;
    let mut worst_f1: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(4..=200);
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        y[0] = 0;
        y[1] = 1;
        // Coarse scores force ties.
        let s: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0..12) as f64) / 11.0)
            .collect();
        let p: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        let a = auroc(&y, &s).map_err(|e| e.to_string())?;
        worst_auc = worst_auc.max((a - pairwise_auroc(&y, &s)).abs());
        let f = macro_f1(&y, &p).map_err(|e| e.to_string())?;
        worst_f1 = worst_f1.max((f - (f1_oracle(&y, &p, 0) + f1_oracle(&y, &p, 1)) / 2.0).abs());
    }
    ensure(worst_auc <= 1e-9, || format!("AUROC off by {worst_auc:e}"))?;
    ensure(worst_f1 <= 1e-12, || {
        format!("macro-F1 off by {worst_f1:e}")
    })?;
    let y = [0u8, 0, 0, 1, 0, 1, 0, 0];
    let majority = auroc(&y, &[0.0; 8]).map_err(|e| e.to_string())?;
    ensure(majority == 0.5, || format!("majority AUROC {majority}"))?;
    Ok(format!(
        "AUROC max err {worst_auc:.1e}, macro-F1 max err {worst_f1:.1e} over 100 vectors, majority AUROC 0.50"
    ))
}

/// Sums with Neumaier compensation.
fn ksum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() {
            (s - t) + x
        } else {
            (x - t) + s
        };
        s = t;
    }
    s + c
}

fn t_oracle(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = ksum(a.iter().copied()) / na;
    let mb = ksum(b.iter().copied()) / nb;
    let ssa = ksum(a.iter().map(|x| (x - ma) * (x - ma)));
    let ssb = ksum(b.iter().map(|x| (x - mb) * (x - mb)));
    let df = na + nb - 2.0;
    let sp = ((ssa + ssb) / df).sqrt();
    let t = (ma - mb) / (sp * (1.0 / na + 1.0 / nb).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    let p = 2.0 * dist.cdf(-t.abs());
    (t, p, (ma - mb).abs() / sp)
}

fn c4_stats() -> Outcome {
    let mut rng = seed::rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let na = rng.gen_range(2..60);
        let nb = rng.gen_range(2..60);
        let shift = rng.gen_range(-2.0..2.0);
        let scale = rng.gen_range(0.1..10.0);
        let a: Vec<f64> = (0..na)
            .map(|_| scale * rng.gen_range(-1.0..1.0) + shift)
            .collect();
        let b: Vec<f64> = (0..nb).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let t = two_sample_t(&a, &b).map_err(|e| e.to_string())?;
        let d = cohens_d_ci(&a, &b).map_err(|e| e.to_string())?;
        let (to, po, dor) = t_oracle(&a, &b);
        worst = worst.max((t.t - to).abs() / to.abs().max(1.0));
        worst = worst.max((t.p - po).abs());
        worst = worst.max((d.d - dor).abs());

        let back = cohens_d_ci(&b, &a).map_err(|e| e.to_string())?;
        ensure((back.d - d.d).abs() < 1e-12, || "d is not symmetric".into())?;
        let (alpha, beta) = (rng.gen_range(0.01..50.0), rng.gen_range(-100.0..100.0));
        let aa: Vec<f64> = a.iter().map(|x| alpha * x + beta).collect();
        let bb: Vec<f64> = b.iter().map(|x| alpha * x + beta).collect();
        let scaled = cohens_d_ci(&aa, &bb).map_err(|e| e.to_string())?;
        ensure((scaled.d - d.d).abs() < 1e-9, || {
            format!("affine rescale moved d by {}", scaled.d - d.d)
        })?;
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("t, p, d within {worst:.1e} of the oracle on 100 pairs; symmetry and affine invariance hold"))
}

fn c5_smote() -> Outcome {
    let mut rng = seed::rng(5);
    let (minority, majority, d) = (1837usize, 10179usize, 40usize);
    let mut rows = Vec::with_capacity(minority + majority);
    let mut y = Vec::with_capacity(minority + majority);
    for i in 0..minority + majority {
        let label = u8::from(i < minority);
        let row: Vec<f64> = (0..d)
            .map(|j| {
                if is_binary(j) {
                    f64::from(u8::from(rng.gen_bool(0.3)))
                } else {
                    rng.gen_range(-3.0..3.0) + f64::from(label)
                }
            })
            .collect();
        rows.push(row);
        y.push(label);
    }
    let x = Matrix::from_rows(&rows);
    let bin: Vec<bool> = (0..d).map(is_binary).collect();
    let out = smote(&x, &y, 5, &bin, &mut seed::rng(50)).map_err(|e| e.to_string())?;
    let pos = out.y.iter().filter(|&&l| l == 1).count();
    let neg = out.y.len() - pos;
    ensure(pos == majority && neg == majority, || {
        format!("classes {neg}/{pos}")
    })?;
    for (k, &(a, b)) in out.parents.iter().enumerate() {
        let s = out.x.row(x.n_rows() + k);
        for (j, &v) in s.iter().enumerate() {
            let (lo, hi) = (x.get(a, j).min(x.get(b, j)), x.get(a, j).max(x.get(b, j)));
            ensure(v >= lo && v <= hi, || {
                format!("synthetic {k} col {j} outside parents")
            })?;
        }
    }
    Ok(format!(
        "{minority}/{majority} -> {pos}/{neg}, all {} synthetic rows inside parent bounds",
        out.parents.len()
    ))
}

fn c6_sfs() -> Outcome {
    let spec = PipelineSpec::new(
        ModelKind::RandomForest,
        ModelParams {
            rf: RfParams {
                n_estimators: 50,
                ..Default::default()
            },
            ..Default::default()
        },
    );
    let cfg = SfsConfig::default();
    let mut worst: f64 = 0.0;
    for p in 0..20u64 {
        let mut rng = seed::rng(600 + p);
        let d = rng.gen_range(2..=4);
        let n = 400;
        let mut weights: Vec<f64> = (0..d)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(0.5..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        let k = rng.gen_range(0..d);
        weights[k] = weights[k].max(0.5);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let label = u8::from(rng.gen_bool(0.35));
            let row: Vec<f64> = weights
                .iter()
                .map(|w| rng.gen_range(-1.5..1.5) + w * f64::from(label))
                .collect();
            rows.push(row);
            y.push(label);
        }
        let x = Matrix::from_rows(&rows);
        let bin = vec![false; d];
        let r =
            sfs(&x, &y, &bin, &spec, &cfg, p, Execution::Parallel).map_err(|e| e.to_string())?;
        ensure(!r.selected.is_empty(), || "empty selection".into())?;
        let got =
            score_subset(&x, &y, &bin, &r.selected, &spec, &cfg, p).map_err(|e| e.to_string())?;
        let mut best = f64::NEG_INFINITY;
        for mask in 1u32..(1 << d) {
            let cols: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
            best = best
                .max(score_subset(&x, &y, &bin, &cols, &spec, &cfg, p).map_err(|e| e.to_string())?);
        }
        worst = worst.max(best - got);
    }
    ensure(worst <= 0.02, || {
        format!("SFS fell {worst:.4} below the exhaustive best")
    })?;
    Ok(format!(
        "20 problems, largest gap to exhaustive best {worst:.4}"
    ))
}

fn c7_gradient() -> Outcome {
    let mut rng = seed::rng(7);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f: f64 = rng.gen_range(-8.0..8.0);
        let y = f64::from(u8::from(rng.gen_bool(0.5)));
        let fd = (log_loss(y, f + h) - log_loss(y, f - h)) / (2.0 * h);
        let g = log_loss_gradient(y, f);
        let rel = (fd - g).abs() / g.abs().max(1e-300);
        worst = worst.max(rel);
    }
    ensure(worst < 1e-6, || format!("relative error {worst:e}"))?;
    Ok(format!(
        "max relative error {worst:.1e} over 1000 random logits"
    ))
}

fn small_params() -> ModelParams {
    let mut p = ModelParams::default();
    p.rf.n_estimators = 10;
    p.gb.n_estimators = 10;
    p.ab.n_estimators = 10;
    p
}

fn c8_leakage() -> Outcome {
    let spec = CohortSpec {
        n_users: 5,
        days_min: 6,
        days_max: 7,
        ..Default::default()
    };
    let mut folds = 0;
    for s in 0..20 {
        let table = table_for(&spec, s);
        let cfg = EvalConfig {
            seed: s,
            params: small_params(),
            ..Default::default()
        };
        for p in Protocol::ALL {
            let r =
                run_protocol(p, &table, &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
            for a in &r.audit {
                folds += 1;
                ensure(a.overlap == 0, || {
                    format!("seed {s} {p} {}: overlap", a.user)
                })?;
                if p == Protocol::Base {
                    ensure(a.target_rows_in_train == 0, || {
                        format!("seed {s} BASE {}: target in train", a.user)
                    })?;
                }
            }
        }
        if s == 0 {
            // The check itself must fire on a leaky fold.
            let rows = table.rows_by_user();
            let (user, own) = rows.iter().next().unwrap();
            let leaky: Vec<usize> = (0..table.len()).collect();
            ensure(
                audit_fold(Protocol::Base, &table, user, &leaky, own).is_err(),
                || "leak not caught".into(),
            )?;
            ensure(
                audit_fold(Protocol::Pers1, &table, user, &own[..2], &own[1..]).is_err(),
                || "overlap not caught".into(),
            )?;
        }
    }
    Ok(format!(
        "{folds} folds over 20 seeds x 3 protocols, no leakage; injected leaks are rejected"
    ))
}

fn c9_personalization() -> Outcome {
    let t0 = Instant::now();
    let spec = CohortSpec {
        n_users: 20,
        ..Default::default()
    };
    let (mut base, mut p1, mut p2) = (0.0, 0.0, 0.0);
    let mut events = 0;
    for s in 0..5 {
        let table = table_for(&spec, s);
        events += table.len();
        let cfg = EvalConfig {
            seed: s,
            ..Default::default()
        };
        let run = |p| run_protocol(p, &table, &cfg, Execution::Parallel).map(|r| r.mean_auroc);
        base += run(Protocol::Base).map_err(|e| e.to_string())? / 5.0;
        p1 += run(Protocol::Pers1).map_err(|e| e.to_string())? / 5.0;
        p2 += run(Protocol::Pers2).map_err(|e| e.to_string())? / 5.0;
    }
    let null_spec = CohortSpec {
        effect: 0.0,
        ..spec
    };
    let mut null = Vec::new();
    for s in 0..20 {
        let table = table_for(&null_spec, 1000 + s);
        let cfg = EvalConfig {
            seed: s,
            ..Default::default()
        };
        null.push(
            run_protocol(Protocol::Base, &table, &cfg, Execution::Parallel)
                .map_err(|e| e.to_string())?
                .mean_auroc,
        );
    }
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    let el = t0.elapsed();
    let msg = format!(
        "AUROC BASE {base:.3}, PERS1 {p1:.3}, PERS2 {p2:.3} ({} events/seed); null BASE mean {null_mean:.3} (range {:.3}..{:.3}); {el:.0?}",
        events / 5,
        null.iter().cloned().fold(f64::INFINITY, f64::min),
        null.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );
    ensure(base <= p1 + 0.01, || format!("BASE above PERS1: {msg}"))?;
    ensure(p2 - base >= 0.05, || format!("PERS2 gain too small: {msg}"))?;
    ensure((0.45..=0.55).contains(&null_mean), || {
        format!("null out of range: {msg}")
    })?;
    ensure(el < Duration::from_secs(600), || format!("too slow: {msg}"))?;
    Ok(msg)
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_n: usize, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    Ok(f())
}

fn c10_determinism() -> Outcome {
    let spec = CohortSpec {
        n_users: 4,
        days_min: 8,
        days_max: 8,
        ..Default::default()
    };
    let table = table_for(&spec, 10);
    let cfg = EvalConfig {
        seed: 10,
        params: small_params(),
        sfs: SfsConfig {
            max_features: Some(2),
            objective: Objective::Auroc,
            ..Default::default()
        },
        pca_components: vec![2, 4],
        ..Default::default()
    };
    let cells = grid(&Protocol::ALL, &ModelKind::ALL, &FeaturePreset::GRID);
    let render = |exec: Execution, threads: usize| -> Result<(String, String), String> {
        let reports = with_threads(threads, || run_grid(&table, &cfg, &cells, exec))?
            .map_err(|e| e.to_string())?;
        Ok((summary_csv(&reports), per_user_csv(&reports)))
    };
    let a = render(Execution::Sequential, 1)?;
    let b = render(Execution::Parallel, 4)?;
    let c = render(Execution::Parallel, 2)?;
    ensure(a.0.lines().count() == 109, || {
        format!("{} summary lines", a.0.lines().count())
    })?;
    ensure(a == b && b == c, || {
        "report CSVs differ between runs".into()
    })?;
    Ok("108 cells, summary and per-user CSVs bit-identical across 1, 2 and 4 workers".into())
}

fn main() {
    // Plain `cargo test` passes harness flags such as `--quiet`; `--list` asks for test names.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("1 anchoring exactness", c1_anchoring),
        ("2 feature manifest", c2_manifest),
        ("3 metric oracles", c3_metrics),
        ("4 statistics oracles", c4_stats),
        ("5 SMOTE contract", c5_smote),
        ("6 SFS oracle", c6_sfs),
        ("7 GB gradient check", c7_gradient),
        ("8 leakage freedom", c8_leakage),
        ("9 personalization gain", c9_personalization),
        ("10 determinism", c10_determinism),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if filter.as_ref().is_some_and(|p| !name.contains(p.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        match f() {
            Ok(msg) => println!("criterion {name}: PASS ({msg}) [{:.1?}]", t0.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({msg}) [{:.1?}]", t0.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
