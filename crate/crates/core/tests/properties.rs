use eatsense::eval::metrics::{auroc, macro_f1};
use eatsense::learn::{train, Matrix, ModelKind, ModelParams};
use eatsense::stats::cohens_d_ci;
use eatsense::{seed, Execution};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn labelled(n: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (
        prop::collection::vec(0u8..2, n),
        prop::collection::vec(0u8..20, n),
    )
        .prop_map(|(mut y, s)| {
            y[0] = 0;
            y[1] = 1;
            (y, s.into_iter().map(f64::from).collect())
        })
}

fn small_params() -> ModelParams {
    let mut p = ModelParams::default();
    p.rf.n_estimators = 15;
    p.gb.n_estimators = 15;
    p.ab.n_estimators = 15;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_row_order((y, s) in labelled(40), shuffle in any::<u64>()) {
        let mut idx: Vec<usize> = (0..y.len()).collect();
        idx.shuffle(&mut seed::rng(shuffle));
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        prop_assert_eq!(auroc(&y, &s).unwrap(), auroc(&y2, &s2).unwrap());
        let p: Vec<u8> = s.iter().map(|&v| u8::from(v >= 10.0)).collect();
        let p2: Vec<u8> = idx.iter().map(|&i| p[i]).collect();
        prop_assert!((macro_f1(&y, &p).unwrap() - macro_f1(&y2, &p2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn auroc_flips_with_score_sign((y, s) in labelled(30)) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auroc(&y, &s).unwrap() + auroc(&y, &neg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_is_nonnegative(a in prop::collection::vec(-1e3f64..1e3, 2..30), b in prop::collection::vec(-1e3f64..1e3, 2..30)) {
        if let Ok(d) = cohens_d_ci(&a, &b) {
            prop_assert!(d.d >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trees_ignore_monotone_transforms(cells in prop::collection::vec(-40i32..40, 3 * 60), labels in prop::collection::vec(0u8..2, 60), s in any::<u64>()) {
        let mut y = labels;
        y[..2].copy_from_slice(&[0, 0]);
        y[2..4].copy_from_slice(&[1, 1]);
        let raw: Vec<[f64; 3]> = cells.chunks(3).map(|c| [c[0] as f64 / 8.0, c[1] as f64 / 8.0, c[2] as f64 / 8.0]).collect();
        let warped: Vec<[f64; 3]> = raw.iter().map(|r| [r[0].powi(3) + r[0], r[1].exp(), 3.0 * r[2] + 1.0]).collect();
        let (a, b) = (Matrix::from_rows(&raw), Matrix::from_rows(&warped));
        for kind in [ModelKind::RandomForest, ModelKind::GradientBoosting, ModelKind::AdaBoost] {
            let ma = train(kind, &a, &y, &small_params(), s, Execution::Sequential).unwrap();
            let mb = train(kind, &b, &y, &small_params(), s, Execution::Sequential).unwrap();
            prop_assert_eq!(ma.predict_scores(&a).unwrap(), mb.predict_scores(&b).unwrap());
        }
    }
}
