//! Eating vs non-eating comparison per feature: pooled two-sample t-test,
//! Cohen's d with a normal-approximation 95% interval, and ranked tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::features::FEATURE_NAMES;
use crate::featurize::FeatureTable;
use crate::{Error, Result};

const Z_975: f64 = 1.959_963_984_540_054;

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn pooled_sd(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Invalid(format!(
            "each group needs at least 2 samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0);
    let sd = pooled.sqrt();
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(sd)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Student's two-sample t-test with pooled variance.
///
/// `t > 0` iff `mean(a) > mean(b)`.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    let sd = pooled_sd(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se = sd * (1.0 / na + 1.0 / nb).sqrt();
    let t = (mean(a) - mean(b)) / se;
    let df = na + nb - 2.0;
    Ok(TTest {
        t,
        p: student_t_two_sided_p(t, df),
        df,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Cohen's d (absolute, pooled sd) with a normal-approximation 95% interval.
pub fn cohens_d_ci(a: &[f64], b: &[f64]) -> Result<EffectSize> {
    let sd = pooled_sd(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let d = (mean(a) - mean(b)).abs() / sd;
    let se = ((na + nb) / (na * nb) + d * d / (2.0 * (na + nb))).sqrt();
    Ok(EffectSize {
        d,
        lo: d - Z_975 * se,
        hi: d + Z_975 * se,
    })
}

/// Significance stars: `****` for p <= 1e-4, `***` for 1e-3, `**` for 1e-2.
pub fn stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else {
        ""
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub feature: String,
    pub n_eating: usize,
    pub n_non_eating: usize,
    pub eating_mean: f64,
    pub eating_std: f64,
    pub non_eating_mean: f64,
    pub non_eating_std: f64,
    pub t: f64,
    pub p: f64,
    pub d: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl FeatureComparison {
    pub fn stars(&self) -> &'static str {
        stars(self.p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTable {
    pub rows: Vec<FeatureComparison>,
    /// Features that could not be tested, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub fn compare(feature: &str, eating: &[f64], non_eating: &[f64]) -> Result<FeatureComparison> {
    let tt = two_sample_t(eating, non_eating)?;
    let es = cohens_d_ci(eating, non_eating)?;
    Ok(FeatureComparison {
        feature: feature.to_string(),
        n_eating: eating.len(),
        n_non_eating: non_eating.len(),
        eating_mean: mean(eating),
        eating_std: variance(eating).sqrt(),
        non_eating_mean: mean(non_eating),
        non_eating_std: variance(non_eating).sqrt(),
        t: tt.t,
        p: tt.p,
        d: es.d,
        ci_lo: es.lo,
        ci_hi: es.hi,
    })
}

/// Compare every feature between classes using present values only.
///
/// Rows are sorted by descending `|t|` (manifest order on ties) and cut to
/// `top_k` when given. Constant features land in `skipped`.
pub fn feature_significance(
    table: &FeatureTable,
    top_k: Option<usize>,
) -> Result<SignificanceTable> {
    let labels = table.labels();
    let n_eat = labels.iter().filter(|&&l| l == 1).count();
    if n_eat < 2 || labels.len() - n_eat < 2 {
        return Err(Error::SingleClass(format!(
            "{n_eat} eating and {} non-eating events",
            labels.len() - n_eat
        )));
    }
    let mut out = SignificanceTable::default();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let (mut eat, mut non) = (Vec::new(), Vec::new());
        for (row, &l) in table.rows.iter().zip(&labels) {
            if row.present[j] {
                if l == 1 {
                    eat.push(row.values[j]);
                } else {
                    non.push(row.values[j]);
                }
            }
        }
        match compare(name, &eat, &non) {
            Ok(c) => out.rows.push(c),
            Err(e) => out.skipped.push((name.to_string(), e.to_string())),
        }
    }
    out.rows.sort_by(|a, b| {
        b.t.abs()
            .partial_cmp(&a.t.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some(k) = top_k {
        out.rows.truncate(k);
    }
    Ok(out)
}

impl SignificanceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "feature,n_eating,n_non_eating,eating_mean,eating_std,non_eating_mean,non_eating_std,t,p,stars,cohens_d,ci_lo,ci_hi\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{},{:.6},{:.6},{:.6}",
                r.feature,
                r.n_eating,
                r.n_non_eating,
                r.eating_mean,
                r.eating_std,
                r.non_eating_mean,
                r.non_eating_std,
                r.t,
                r.p,
                r.stars(),
                r.d,
                r.ci_lo,
                r.ci_hi
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| Feature | Eating mean (std) | Non-eating mean (std) | t-statistic | p | Cohen's d [95% CI] |\n|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let sign = if r.t >= 0.0 { "(+)" } else { "(-)" };
            let _ = writeln!(
                s,
                "| {} | {:.2} ({:.2}) | {:.2} ({:.2}) | {}{:.4} {} | {:.2e} | {:.4} [{:.2}, {:.2}] |",
                r.feature,
                r.eating_mean,
                r.eating_std,
                r.non_eating_mean,
                r.non_eating_std,
                sign,
                r.t.abs(),
                r.stars(),
                r.p,
                r.d,
                r.ci_lo,
                r.ci_hi
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_groups() {
        let a = [1.0, 2.0, 3.0];
        let t = two_sample_t(&a, &a).unwrap();
        assert_eq!(t.t, 0.0);
        assert_eq!(t.p, 1.0);
        assert_eq!(cohens_d_ci(&a, &a).unwrap().d, 0.0);
    }

    #[test]
    fn shifted_groups() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        let t = two_sample_t(&a, &b).unwrap();
        assert_relative_eq!(t.t, -1.095_445_115_010_332_2, epsilon = 1e-12);
        assert_eq!(t.df, 6.0);
        let d = cohens_d_ci(&a, &b).unwrap();
        assert_relative_eq!(d.d, 0.774_596_669_241_483_4, epsilon = 1e-12);
        assert!(d.lo <= d.d && d.d <= d.hi);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(
            two_sample_t(&[2.0, 2.0], &[2.0, 2.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(cohens_d_ci(&[2.0, 2.0], &[2.0, 2.0]).is_err());
        assert!(two_sample_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a.
        assert_relative_eq!(
            regularized_incomplete_beta(1.0, 1.0, 0.3),
            0.3,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            regularized_incomplete_beta(3.0, 1.0, 0.5),
            0.125,
            epsilon = 1e-14
        );
        // t with 1 df is Cauchy: P(|T| > 1) = 0.5.
        assert_relative_eq!(student_t_two_sided_p(1.0, 1.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(1e-5), "****");
        assert_eq!(stars(1e-4), "****");
        assert_eq!(stars(5e-4), "***");
        assert_eq!(stars(5e-3), "**");
        assert_eq!(stars(0.04), "");
    }
}
