//! Evaluation reports and their CSV, markdown and JSON-lines renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::protocol::{FeaturePreset, FoldAudit, Protocol};
use crate::learn::ModelKind;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user: String,
    pub f1: f64,
    pub auroc: f64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_components: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUser {
    pub user: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub model: ModelKind,
    pub features: FeaturePreset,
    pub per_user: Vec<UserResult>,
    /// Unweighted means over `per_user`.
    pub mean_f1: f64,
    pub mean_auroc: f64,
    pub skipped: Vec<SkippedUser>,
    pub audit: Vec<FoldAudit>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalReport {
    pub fn new(
        protocol: Protocol,
        model: ModelKind,
        features: FeaturePreset,
        per_user: Vec<UserResult>,
        skipped: Vec<SkippedUser>,
        audit: Vec<FoldAudit>,
    ) -> Self {
        EvalReport {
            protocol,
            model,
            features,
            mean_f1: mean(per_user.iter().map(|u| u.f1)),
            mean_auroc: mean(per_user.iter().map(|u| u.auroc)),
            per_user,
            skipped,
            audit,
        }
    }

    pub fn user(&self, user: &str) -> Option<&UserResult> {
        self.per_user.iter().find(|u| u.user == user)
    }

    /// Number of distinct selected feature sets across users.
    pub fn distinct_selections(&self) -> usize {
        let sets: std::collections::BTreeSet<Vec<String>> = self
            .per_user
            .iter()
            .filter_map(|u| {
                u.selected.clone().map(|mut s| {
                    s.sort();
                    s
                })
            })
            .collect();
        sets.len()
    }
}

/// Per-user F1 split into the BASE level and the PERS1 and PERS2 increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub user: String,
    pub base_f1: f64,
    /// PERS1 minus BASE.
    pub delta_pers1: f64,
    /// PERS2 minus PERS1.
    pub delta_pers2: f64,
}

impl Bump {
    /// Bar segments for display, negative increments clipped to 0.
    pub fn segments(&self) -> [f64; 3] {
        [
            self.base_f1,
            self.delta_pers1.max(0.0),
            self.delta_pers2.max(0.0),
        ]
    }
}

pub fn bump_report(base: &EvalReport, pers1: &EvalReport, pers2: &EvalReport) -> Result<Vec<Bump>> {
    let users = |r: &EvalReport| -> Vec<String> {
        let mut u: Vec<String> = r.per_user.iter().map(|x| x.user.clone()).collect();
        u.sort();
        u
    };
    let (ub, u1, u2) = (users(base), users(pers1), users(pers2));
    if ub != u1 || ub != u2 {
        let all: std::collections::BTreeSet<&String> = ub.iter().chain(&u1).chain(&u2).collect();
        let odd: Vec<&str> = all
            .into_iter()
            .filter(|u| !(ub.contains(u) && u1.contains(u) && u2.contains(u)))
            .map(String::as_str)
            .collect();
        return Err(Error::UserMismatch(odd.join(", ")));
    }
    Ok(base
        .per_user
        .iter()
        .map(|b| {
            let p1 = pers1.user(&b.user).expect("checked").f1;
            let p2 = pers2.user(&b.user).expect("checked").f1;
            Bump {
                user: b.user.clone(),
                base_f1: b.f1,
                delta_pers1: p1 - b.f1,
                delta_pers2: p2 - p1,
            }
        })
        .collect())
}

/// One row per report.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("protocol,model,features,n_users,n_skipped,mean_f1,mean_auroc\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.protocol,
            r.model,
            r.features,
            r.per_user.len(),
            r.skipped.len(),
            r.mean_f1,
            r.mean_auroc
        );
    }
    s
}

/// One row per (report, user).
pub fn per_user_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(
        "protocol,model,features,user,f1,auroc,n_train,n_test,pca_components,selected\n",
    );
    for r in reports {
        for u in &r.per_user {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.protocol,
                r.model,
                r.features,
                u.user,
                u.f1,
                u.auroc,
                u.n_train,
                u.n_test,
                u.pca_components.map(|c| c.to_string()).unwrap_or_default(),
                u.selected.as_ref().map(|v| v.join(";")).unwrap_or_default()
            );
        }
    }
    s
}

/// One JSON object per (report, user).
pub fn per_user_jsonl(reports: &[EvalReport]) -> Result<String> {
    #[derive(Serialize)]
    struct Line<'a> {
        protocol: Protocol,
        model: ModelKind,
        features: FeaturePreset,
        #[serde(flatten)]
        result: &'a UserResult,
    }
    let mut s = String::new();
    for r in reports {
        for u in &r.per_user {
            s.push_str(&serde_json::to_string(&Line {
                protocol: r.protocol,
                model: r.model,
                features: r.features,
                result: u,
            })?);
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn bump_csv(bumps: &[Bump]) -> String {
    let mut s = String::from(
        "user,base_f1,delta_pers1,delta_pers2,segment_base,segment_pers1,segment_pers2\n",
    );
    for b in bumps {
        let [s0, s1, s2] = b.segments();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            b.user, b.base_f1, b.delta_pers1, b.delta_pers2, s0, s1, s2
        );
    }
    s
}

/// Feature preset rows by (protocol, model) columns, each cell "F1 / AUROC".
pub fn to_markdown(reports: &[EvalReport]) -> String {
    let mut cols: Vec<(Protocol, ModelKind)> = Vec::new();
    let mut rows: Vec<FeaturePreset> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for r in reports {
        let c = match cols.iter().position(|&k| k == (r.protocol, r.model)) {
            Some(i) => i,
            None => {
                cols.push((r.protocol, r.model));
                cols.len() - 1
            }
        };
        let f = match rows.iter().position(|&k| k == r.features) {
            Some(i) => i,
            None => {
                rows.push(r.features);
                rows.len() - 1
            }
        };
        cells.insert((f, c), (r.mean_f1, r.mean_auroc));
    }
    let mut s = String::from("| Features |");
    for (p, m) in &cols {
        let _ = write!(s, " {p} {m} (F1 / AUROC) |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(cols.len()));
    s.push('\n');
    for (fi, f) in rows.iter().enumerate() {
        let _ = write!(s, "| {f} |");
        for ci in 0..cols.len() {
            match cells.get(&(fi, ci)) {
                Some((f1, au)) => {
                    let _ = write!(s, " {f1:.2} / {au:.2} |");
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureGroupPreset;

    fn report(protocol: Protocol, f1s: &[(&str, f64)]) -> EvalReport {
        let per_user = f1s
            .iter()
            .map(|(u, f)| UserResult {
                user: u.to_string(),
                f1: *f,
                auroc: 0.5,
                n_train: 1,
                n_test: 1,
                selected: None,
                pca_components: None,
            })
            .collect();
        EvalReport::new(
            protocol,
            ModelKind::RandomForest,
            FeaturePreset::Group(FeatureGroupPreset::All),
            per_user,
            vec![],
            vec![],
        )
    }

    #[test]
    fn bump_values() {
        let b = report(Protocol::Base, &[("u1", 0.66)]);
        let p1 = report(Protocol::Pers1, &[("u1", 0.74)]);
        let p2 = report(Protocol::Pers2, &[("u1", 0.753)]);
        let bump = &bump_report(&b, &p1, &p2).unwrap()[0];
        assert!((bump.base_f1 - 0.66).abs() < 1e-12);
        assert!((bump.delta_pers1 - 0.08).abs() < 1e-12);
        assert!((bump.delta_pers2 - 0.013).abs() < 1e-12);
        assert!((bump.segments().iter().sum::<f64>() - 0.753).abs() < 1e-12);

        let same = bump_report(&b, &b, &b).unwrap();
        assert_eq!((same[0].delta_pers1, same[0].delta_pers2), (0.0, 0.0));
    }

    #[test]
    fn bump_user_mismatch() {
        let b = report(Protocol::Base, &[("u1", 0.5), ("u2", 0.5)]);
        let p = report(Protocol::Pers1, &[("u1", 0.5)]);
        assert!(matches!(
            bump_report(&b, &p, &p),
            Err(Error::UserMismatch(_))
        ));
    }

    #[test]
    fn means_are_unweighted() {
        let r = report(Protocol::Base, &[("a", 0.2), ("b", 0.6)]);
        assert!((r.mean_f1 - 0.4).abs() < 1e-15);
        assert!(summary_csv(std::slice::from_ref(&r))
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("BASE,RF,ALL,2,0,"));
        assert!(to_markdown(&[r]).contains("| ALL | 0.40 / 0.50 |"));
    }
}
