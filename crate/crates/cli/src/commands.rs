use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eatsense::anchor::{build_event_set, check_nonoverlap, read_events, write_events};
use eatsense::eval::report::{bump_csv, per_user_csv, per_user_jsonl, summary_csv, to_markdown};
use eatsense::eval::{bump_report, grid, run_grid, EvalReport};
use eatsense::featurize::{featurize_all, AppManifest, FeatureTable};
use eatsense::ingest::{parse_dataset, timezone_offsets, validate_bundle_with, SensorBundle};
use eatsense::learn::ARTIFACT_VERSION;
use eatsense::stats::feature_significance;
use eatsense::synth::{generate_cohort_with, write_cohort};
use eatsense::{Execution, MS_PER_MINUTE};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, Config};
use crate::{Cli, CliError, Command};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORTS_JSON: &str = "reports.json";

struct Run {
    cfg: Config,
    seed: u64,
    out: PathBuf,
    exec: Execution,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Run {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(path.display(), e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(eatsense::Error::from)?;
        text.push('\n');
        self.write(name, text)
    }

    fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }
}

/// Apply flag overrides to the config; flags win over config keys.
fn effective_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(x) = cli.x_half {
        cfg.events.x_half = x;
    }
    if !cli.protocol.is_empty() {
        cfg.evaluate.protocols = cli.protocol.clone();
    }
    if !cli.model.is_empty() {
        cfg.evaluate.models = cli.model.clone();
    }
    if !cli.features.is_empty() {
        cfg.evaluate.features = cli.features.clone();
    }
    cfg.resolve_seed()?;
    cfg.validate()?;
    Ok(cfg)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    let out = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Validation("--out is required".into()))?;
    let inputs: Vec<PathBuf> = match &cli.command {
        Command::Synth => vec![],
        Command::Ingest { input } | Command::Events { input } | Command::Report { input } => {
            vec![input.clone()]
        }
        Command::Featurize { input, events } => vec![input.clone(), events.clone()],
        Command::Stats { table } | Command::Evaluate { table, .. } => vec![table.clone()],
    };
    for i in &inputs {
        if !i.exists() {
            return Err(CliError::Validation(format!(
                "input {} does not exist",
                i.display()
            )));
        }
        if same_dir(i, &out) {
            return Err(CliError::Validation(format!(
                "--out {} must differ from the input directory",
                out.display()
            )));
        }
    }
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(out.display(), e))?;

    let exec = match cfg.workers {
        Some(1) => Execution::Sequential,
        Some(n) => {
            // Fails only if a global pool already exists, which is harmless.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
            Execution::Parallel
        }
        None => Execution::Parallel,
    }
    .available();

    let mut run = Run {
        seed: cfg.seed.expect("resolved"),
        cfg,
        out,
        exec,
        inputs,
        outputs: Vec::new(),
    };
    let name = match &cli.command {
        Command::Synth => {
            synth(&mut run)?;
            "synth"
        }
        Command::Ingest { input } => {
            ingest(&mut run, input)?;
            "ingest"
        }
        Command::Events { input } => {
            events(&mut run, input)?;
            "events"
        }
        Command::Featurize { input, events } => {
            featurize(&mut run, input, events)?;
            "featurize"
        }
        Command::Stats { table } => {
            stats(&mut run, table)?;
            "stats"
        }
        Command::Evaluate { table, save_models } => {
            evaluate(&mut run, table, *save_models)?;
            "evaluate"
        }
        Command::Report { input } => {
            report(&mut run, input)?;
            "report"
        }
    };
    write_manifest(&mut run, name)
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: Option<String>,
}

/// Digest of a file, or of a directory's top-level files by name.
fn input_sha256(path: &Path) -> Option<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut names: Vec<PathBuf> = std::fs::read_dir(path)
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            h.update(p.file_name()?.to_string_lossy().as_bytes());
            h.update(input_sha256(&p)?.as_bytes());
        }
    } else {
        let mut f = std::fs::File::open(path).ok()?;
        std::io::copy(&mut f, &mut h).ok()?;
    }
    Some(hex::encode(h.finalize()))
}

fn write_manifest(run: &mut Run, command: &str) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        command: &'a str,
        config_sha256: String,
        seed: u64,
        workers: Option<usize>,
        versions: BTreeMap<&'a str, String>,
        inputs: Vec<InputDigest>,
        outputs: Vec<String>,
        config: &'a Config,
    }
    let inputs = run
        .inputs
        .iter()
        .map(|p| InputDigest {
            path: p.display().to_string(),
            sha256: input_sha256(p),
        })
        .collect();
    let mut versions = BTreeMap::new();
    versions.insert("eatsense", env!("CARGO_PKG_VERSION").to_string());
    versions.insert("model_artifact_format", ARTIFACT_VERSION.to_string());
    let mut outputs = run.outputs.clone();
    outputs.sort();
    let cfg = run.cfg.clone();
    let m = Manifest {
        command,
        config_sha256: cfg.sha256(),
        seed: run.seed,
        workers: cfg.workers,
        versions,
        inputs,
        outputs,
        config: &cfg,
    };
    run.json(MANIFEST_FILE, &m)
}

fn synth(run: &mut Run) -> Result<(), CliError> {
    let cohort = generate_cohort_with(&run.cfg.synth, run.seed, run.exec)?;
    write_cohort(&run.out, &cohort)?;
    for f in [
        "accel.csv",
        "location.csv",
        "apps.csv",
        "screen.csv",
        "battery.csv",
        "reports.csv",
        "ground_truth.csv",
        "routines.json",
    ] {
        run.record(f);
    }
    log::info!(
        "{} users, {} reports",
        cohort.bundles.len(),
        cohort.reports.len()
    );
    Ok(())
}

fn load_dataset(
    dir: &Path,
) -> Result<
    (
        BTreeMap<String, SensorBundle>,
        Vec<eatsense::ingest::SelfReport>,
    ),
    CliError,
> {
    let (bundles, reports, ingest_report) = parse_dataset(dir)?;
    if ingest_report.error_count() > 0 {
        log::warn!(
            "{} rows rejected while reading {}",
            ingest_report.error_count(),
            dir.display()
        );
    }
    Ok((bundles, reports))
}

fn ingest(run: &mut Run, input: &Path) -> Result<(), CliError> {
    let (bundles, reports, ingest_report) = parse_dataset(input)?;
    run.json("ingest_report.json", &ingest_report)?;
    let gap = run.cfg.ingest.gap_threshold_min * MS_PER_MINUTE;
    let mut csv =
        String::from("user_id,stream,count,first_ms,last_ms,coverage_ms,largest_gap_ms,n_gaps\n");
    let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in bundles.values() {
        let v = validate_bundle_with(b, gap);
        for (stream, c) in &v.streams {
            let _ = writeln!(
                csv,
                "{},{stream},{},{},{},{},{},{}",
                b.user_id,
                c.count,
                opt(c.first),
                opt(c.last),
                c.coverage_ms,
                c.largest_gap_ms,
                c.gaps.len()
            );
        }
    }
    run.write("coverage.csv", csv)?;
    #[derive(Serialize)]
    struct Summary {
        users_with_sensors: usize,
        users_with_reports: usize,
        reports: usize,
        rejected_rows: usize,
    }
    let reporting: std::collections::BTreeSet<&str> =
        reports.iter().map(|r| r.user_id.as_str()).collect();
    run.json(
        "ingest_summary.json",
        &Summary {
            users_with_sensors: bundles.len(),
            users_with_reports: reporting.len(),
            reports: reports.len(),
            rejected_rows: ingest_report.error_count(),
        },
    )
}

fn events(run: &mut Run, input: &Path) -> Result<(), CliError> {
    let (bundles, reports) = load_dataset(input)?;
    let x_half = run.cfg.events.x_half;
    let (mut set, warnings) = build_event_set(&reports, x_half, run.seed, run.exec);
    let spans: BTreeMap<String, (i64, i64)> = bundles
        .iter()
        .filter_map(|(u, b)| b.span().map(|s| (u.clone(), s)))
        .collect();
    let dropped = set.retain_within_spans(&spans);
    let violations = check_nonoverlap(&set);
    if !violations.is_empty() {
        return Err(eatsense::Error::Invalid(format!(
            "{} overlapping event windows",
            violations.len()
        ))
        .into());
    }
    write_events(&run.out.join("events.csv"), &set)?;
    run.record("events.csv");
    #[derive(Serialize)]
    struct Summary {
        x_half_min: u32,
        events: usize,
        eating: usize,
        non_eating: usize,
        dropped_outside_span: usize,
        warnings: Vec<String>,
    }
    run.json(
        "events_summary.json",
        &Summary {
            x_half_min: x_half,
            events: set.events.len(),
            eating: set.count(eatsense::anchor::Label::Eating),
            non_eating: set.count(eatsense::anchor::Label::NonEating),
            dropped_outside_span: dropped,
            warnings,
        },
    )
}

fn featurize(run: &mut Run, input: &Path, events_path: &Path) -> Result<(), CliError> {
    let (bundles, reports) = load_dataset(input)?;
    let set = read_events(events_path)?;
    let manifest = AppManifest::from_bundles(bundles.values());
    let tz = timezone_offsets(&reports);
    let table = featurize_all(&bundles, &set, &manifest, &tz, run.exec);
    table.write_csv(&run.out.join("features.csv"))?;
    run.record("features.csv");
    run.json("app_manifest.json", &manifest)
}

fn stats(run: &mut Run, table_path: &Path) -> Result<(), CliError> {
    let table = FeatureTable::read_csv(table_path)?;
    let sig = feature_significance(&table, run.cfg.stats.top_k)?;
    run.write("significance.csv", sig.to_csv())?;
    run.write("significance.md", sig.to_markdown())
}

fn render_reports(run: &mut Run, reports: &[EvalReport]) -> Result<(), CliError> {
    run.write("summary.csv", summary_csv(reports))?;
    run.write("per_user.csv", per_user_csv(reports))?;
    run.write("per_user.jsonl", per_user_jsonl(reports)?)?;
    let mut md = to_markdown(reports);
    let skipped: BTreeMap<&str, &str> = reports
        .iter()
        .flat_map(|r| {
            r.skipped
                .iter()
                .map(|s| (s.user.as_str(), s.reason.as_str()))
        })
        .collect();
    if !skipped.is_empty() {
        md.push_str("\nSkipped users:\n\n");
        for (u, why) in skipped {
            let _ = writeln!(md, "- {u}: {why}");
        }
    }
    run.write("report.md", md)?;
    // One bump chart per (model, features) with all three protocols.
    let mut keys: Vec<(String, String)> = reports
        .iter()
        .map(|r| (r.model.to_string(), r.features.to_string()))
        .collect();
    keys.sort();
    keys.dedup();
    for (model, features) in keys {
        let find = |p: eatsense::eval::Protocol| {
            reports.iter().find(|r| {
                r.protocol == p
                    && r.model.to_string() == model
                    && r.features.to_string() == features
            })
        };
        use eatsense::eval::Protocol::*;
        if let (Some(b), Some(p1), Some(p2)) = (find(Base), find(Pers1), find(Pers2)) {
            let bumps = bump_report(b, p1, p2)?;
            run.write(&format!("bump_{model}_{features}.csv"), bump_csv(&bumps))?;
        }
    }
    Ok(())
}

fn evaluate(run: &mut Run, table_path: &Path, save_models: bool) -> Result<(), CliError> {
    let table = FeatureTable::read_csv(table_path)?;
    let e = &run.cfg.evaluate;
    let base = e.eval_config(run.seed);
    let cells = grid(&e.protocols, &e.models, &e.features);
    log::info!("{} cells over {} events", cells.len(), table.len());
    let reports = run_grid(&table, &base, &cells, run.exec)?;
    run.json(REPORTS_JSON, &reports)?;
    render_reports(run, &reports)?;
    if save_models {
        let e = run.cfg.evaluate.clone();
        for &model in &e.models {
            for &features in &e.features {
                let cfg = eatsense::eval::EvalConfig {
                    model,
                    features,
                    ..base.clone()
                };
                let artifact = eatsense::eval::protocol::fit_all_rows(&table, &cfg)?;
                let name = format!("model_{model}_{features}.json");
                artifact.save(&run.out.join(&name))?;
                run.record(&name);
            }
        }
    }
    Ok(())
}

fn report(run: &mut Run, input: &Path) -> Result<(), CliError> {
    let path = input.join(REPORTS_JSON);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(path.display(), e))?;
    let reports: Vec<EvalReport> = serde_json::from_str(&text).map_err(eatsense::Error::from)?;
    render_reports(run, &reports)
}
