//! Personalization sweep on a synthetic cohort.
//!
//! `cargo run --release -p eatsense-core --example cohort_eval -- <effect> <seeds>`

use eatsense::anchor::build_event_set;
use eatsense::eval::{run_protocol, EvalConfig, Protocol};
use eatsense::featurize::{featurize_all, AppManifest};
use eatsense::ingest::timezone_offsets;
use eatsense::synth::{generate_cohort, CohortSpec};
use eatsense::Execution;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let effect: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    for seed in 0..seeds {
        let t0 = std::time::Instant::now();
        let spec = CohortSpec {
            n_users: 20,
            effect,
            ..Default::default()
        };
        let c = generate_cohort(&spec, seed).unwrap();
        let (events, _) = build_event_set(&c.reports, 30, seed, Execution::Parallel);
        let manifest = AppManifest::from_bundles(c.bundles.values());
        let tz = timezone_offsets(&c.reports);
        let table = featurize_all(&c.bundles, &events, &manifest, &tz, Execution::Parallel);
        let eat = table.labels().iter().filter(|&&l| l == 1).count();
        let t1 = t0.elapsed();
        let cfg = EvalConfig {
            seed,
            ..Default::default()
        };
        let mut line = format!("seed {seed} n={} eat={eat} gen={:.1?}", table.len(), t1);
        for p in Protocol::ALL {
            let r = run_protocol(p, &table, &cfg, Execution::Parallel).unwrap();
            line += &format!(
                " {p}: f1 {:.3} auc {:.3} ({} users)",
                r.mean_f1,
                r.mean_auroc,
                r.per_user.len()
            );
        }
        println!("{line} total={:.1?}", t0.elapsed());
    }
}
