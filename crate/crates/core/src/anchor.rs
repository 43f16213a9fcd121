//! Labeled event anchors derived from self-reports.
//!
//! An event is the window `[t_anc - X, t_anc + X)` around an anchor. Eating
//! anchors come straight from the reported recency bucket; non-eating anchors
//! are sampled from the part of the four-hour recall period that is known to
//! be intake-free. Within one user no two windows overlap.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::ingest::{IntakeCase, SelfReport};
use crate::seed::{self, Rng};
use crate::{Error, Result, Timestamp, MS_PER_MINUTE};

pub const DEFAULT_X_HALF_MIN: u32 = 30;

/// Non-eating anchors must leave room for a half-hour window inside the recall period.
pub const NON_EATING_LATEST_MIN: i64 = 30;
pub const NON_EATING_EARLIEST_MIN: i64 = 210;

pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonEating,
    Eating,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Eating => "eating",
            Label::NonEating => "non_eating",
        }
    }

    /// 1 for eating, 0 otherwise.
    pub fn as_class(self) -> u8 {
        match self {
            Label::Eating => 1,
            Label::NonEating => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "eating" => Ok(Label::Eating),
            "non_eating" => Ok(Label::NonEating),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub user_id: String,
    pub t_anc: Timestamp,
    pub label: Label,
    pub x_half_min: u32,
    /// Timestamp of the self-report that produced the event, if known.
    pub source_report: Option<Timestamp>,
}

impl EventRecord {
    pub fn window(&self) -> (Timestamp, Timestamp) {
        let half = i64::from(self.x_half_min) * MS_PER_MINUTE;
        (self.t_anc - half, self.t_anc + half)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSet {
    pub events: Vec<EventRecord>,
    pub x_half_min: u32,
}

impl EventSet {
    pub fn count(&self, label: Label) -> usize {
        self.events.iter().filter(|e| e.label == label).count()
    }

    /// Drop events whose window is not fully inside the user's data span.
    ///
    /// Returns the number of removed events. Users without a span lose all events.
    pub fn retain_within_spans(
        &mut self,
        spans: &BTreeMap<String, (Timestamp, Timestamp)>,
    ) -> usize {
        let before = self.events.len();
        self.events.retain(|e| {
            let (lo, hi) = e.window();
            spans
                .get(&e.user_id)
                .is_some_and(|&(a, b)| lo >= a && hi <= b)
        });
        before - self.events.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub user_id: String,
    pub first: Timestamp,
    pub second: Timestamp,
    pub separation_ms: i64,
}

fn min_separation_ms(x_half_min: u32) -> i64 {
    2 * i64::from(x_half_min) * MS_PER_MINUTE
}

/// `T_sr` minus the bucket midpoint; `None` for reports without an intake.
pub fn derive_eating_anchor(report: &SelfReport) -> Option<Timestamp> {
    if report.case == IntakeCase::NoIntake {
        return None;
    }
    let bucket = report.bucket?;
    Some(report.ts - bucket.midpoint_minutes() * MS_PER_MINUTE)
}

fn max_non_eating(case: IntakeCase) -> usize {
    match case {
        IntakeCase::NoIntake => 3,
        IntakeCase::OneIntake => 2,
        // Earlier unreported intakes may hide in the recall period.
        IntakeCase::MultiIntake => 0,
    }
}

/// Sample non-eating anchors for one report, keeping clear of the eating anchor.
pub fn sample_noneating_anchors(
    report: &SelfReport,
    x_half_min: u32,
    eating_anchor: Option<Timestamp>,
    rng: &mut Rng,
) -> Vec<Timestamp> {
    let blocked: Vec<Timestamp> = eating_anchor.into_iter().collect();
    sample_noneating_anchors_avoiding(report, x_half_min, &blocked, rng)
}

/// Rejection sampler behind [`sample_noneating_anchors`].
///
/// Candidates are uniform over `[T_sr - 210, T_sr - 30]` minutes and must be
/// at least `2X` from every anchor in `blocked` and from each other. At most
/// [`MAX_SAMPLING_ATTEMPTS`] candidates are drawn.
pub fn sample_noneating_anchors_avoiding(
    report: &SelfReport,
    x_half_min: u32,
    blocked: &[Timestamp],
    rng: &mut Rng,
) -> Vec<Timestamp> {
    let want = max_non_eating(report.case);
    let mut out: Vec<Timestamp> = Vec::with_capacity(want);
    if want == 0 {
        return out;
    }
    let lo = report.ts - NON_EATING_EARLIEST_MIN * MS_PER_MINUTE;
    let hi = report.ts - NON_EATING_LATEST_MIN * MS_PER_MINUTE;
    let sep = min_separation_ms(x_half_min);
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        if out.len() == want {
            break;
        }
        let cand = rng.gen_range(lo..=hi);
        let clear = blocked
            .iter()
            .chain(out.iter())
            .all(|&t| (cand - t).abs() >= sep);
        if clear {
            out.push(cand);
        }
    }
    out
}

fn build_user_events(
    reports: &[&SelfReport],
    x_half_min: u32,
    seed: u64,
) -> (Vec<EventRecord>, Vec<String>) {
    let mut warnings = Vec::new();
    let sep = min_separation_ms(x_half_min);
    let Some(first) = reports.first() else {
        return (Vec::new(), warnings);
    };
    let user = first.user_id.clone();
    let mut rng = seed::rng_for(seed, &["events", &user]);

    let mut events = Vec::new();
    let mut taken: Vec<Timestamp> = Vec::new();
    let mut eating_of_report: Vec<Option<Timestamp>> = Vec::with_capacity(reports.len());
    for r in reports {
        let anchor = derive_eating_anchor(r).filter(|&t| {
            let clash = taken.iter().find(|&&u| (t - u).abs() < sep);
            if let Some(&u) = clash {
                warnings.push(format!(
                    "user {user}: eating anchor {t} dropped, within {} min of {u}",
                    2 * x_half_min
                ));
            }
            clash.is_none()
        });
        if let Some(t) = anchor {
            taken.push(t);
            events.push(EventRecord {
                user_id: user.clone(),
                t_anc: t,
                label: Label::Eating,
                x_half_min,
                source_report: Some(r.ts),
            });
        }
        eating_of_report.push(anchor);
    }
    for r in reports {
        let sampled = sample_noneating_anchors_avoiding(r, x_half_min, &taken, &mut rng);
        for t in sampled {
            taken.push(t);
            events.push(EventRecord {
                user_id: user.clone(),
                t_anc: t,
                label: Label::NonEating,
                x_half_min,
                source_report: Some(r.ts),
            });
        }
    }
    events.sort_by_key(|e| e.t_anc);
    (events, warnings)
}

/// Build the labeled, non-overlapping event set for all users.
///
/// Each user draws from its own rng stream derived from `seed` and the user
/// id, so the result does not depend on user order or thread count.
pub fn build_event_set(
    reports: &[SelfReport],
    x_half_min: u32,
    seed: u64,
    exec: Execution,
) -> (EventSet, Vec<String>) {
    let mut by_user: BTreeMap<&str, Vec<&SelfReport>> = BTreeMap::new();
    for r in reports {
        by_user.entry(r.user_id.as_str()).or_default().push(r);
    }
    let groups: Vec<Vec<&SelfReport>> = by_user
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|r| r.ts);
            v
        })
        .collect();
    let built = exec.map(&groups, |g| build_user_events(g, x_half_min, seed));
    let mut set = EventSet {
        events: Vec::new(),
        x_half_min,
    };
    let mut warnings = Vec::new();
    for (ev, w) in built {
        set.events.extend(ev);
        warnings.extend(w);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    (set, warnings)
}

/// Pairs of same-user anchors closer than `2X`. Exactly `2X` apart is allowed.
pub fn check_nonoverlap(set: &EventSet) -> Vec<Violation> {
    let sep = min_separation_ms(set.x_half_min);
    let mut by_user: BTreeMap<&str, Vec<Timestamp>> = BTreeMap::new();
    for e in &set.events {
        by_user.entry(e.user_id.as_str()).or_default().push(e.t_anc);
    }
    let mut out = Vec::new();
    for (user, mut ts) in by_user {
        ts.sort_unstable();
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                let d = ts[j] - ts[i];
                if d >= sep {
                    break;
                }
                out.push(Violation {
                    user_id: user.to_string(),
                    first: ts[i],
                    second: ts[j],
                    separation_ms: d,
                });
            }
        }
    }
    out
}

const EVENTS_HEADER: &[&str] = &["user_id", "t_anc_ms", "label", "x_half_min"];

pub fn write_events(path: &Path, set: &EventSet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e| Error::csv(path, e);
    w.write_record(EVENTS_HEADER).map_err(err)?;
    for e in &set.events {
        w.write_record([
            e.user_id.as_str(),
            &e.t_anc.to_string(),
            e.label.as_str(),
            &e.x_half_min.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<EventSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != EVENTS_HEADER {
        return Err(Error::Header {
            path: path.to_path_buf(),
            found: header,
            expected: EVENTS_HEADER.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut set = EventSet {
        events: Vec::new(),
        x_half_min: DEFAULT_X_HALF_MIN,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |what: &str| Error::Invalid(format!("{}: bad {what} in {rec:?}", path.display()));
        let t_anc: Timestamp = rec[1].parse().map_err(|_| bad("t_anc_ms"))?;
        let label: Label = rec[2].parse().map_err(|_| bad("label"))?;
        let x_half_min: u32 = rec[3].parse().map_err(|_| bad("x_half_min"))?;
        set.x_half_min = x_half_min;
        set.events.push(EventRecord {
            user_id: rec[0].to_string(),
            t_anc,
            label,
            x_half_min,
            source_report: None,
        });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RecencyBucket;

    const HOUR: i64 = 60 * MS_PER_MINUTE;

    fn report(case: IntakeCase, bucket: Option<RecencyBucket>, ts: Timestamp) -> SelfReport {
        SelfReport {
            user_id: "u1".into(),
            ts,
            case,
            bucket,
            tz_offset_min: 0,
        }
    }

    #[test]
    fn eating_anchor_is_report_minus_midpoint() {
        let r = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M31To60),
            20 * HOUR,
        );
        assert_eq!(
            derive_eating_anchor(&r),
            Some(19 * HOUR + 15 * MS_PER_MINUTE)
        );
        let r = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M0To30),
            12 * HOUR,
        );
        assert_eq!(
            derive_eating_anchor(&r),
            Some(11 * HOUR + 45 * MS_PER_MINUTE)
        );
        let r = report(IntakeCase::NoIntake, None, 12 * HOUR);
        assert_eq!(derive_eating_anchor(&r), None);
    }

    #[test]
    fn non_eating_anchors_stay_in_recall_range() {
        let r = report(IntakeCase::NoIntake, None, 20 * HOUR);
        for s in 0..200 {
            let mut rng = seed::rng(s);
            let got = sample_noneating_anchors(&r, 30, None, &mut rng);
            assert!(!got.is_empty() && got.len() <= 3);
            for t in got {
                assert!(t >= 16 * HOUR + 30 * MS_PER_MINUTE);
                assert!(t <= 19 * HOUR + 30 * MS_PER_MINUTE);
            }
        }
    }

    #[test]
    fn case_two_avoids_eating_window() {
        let r = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M31To60),
            20 * HOUR,
        );
        let eat = derive_eating_anchor(&r).unwrap();
        for s in 0..200 {
            let mut rng = seed::rng(s);
            let got = sample_noneating_anchors(&r, 30, Some(eat), &mut rng);
            assert!(got.len() <= 2);
            for t in got {
                assert!(
                    !(t > 18 * HOUR + 15 * MS_PER_MINUTE && t < 20 * HOUR + 15 * MS_PER_MINUTE)
                );
            }
        }
    }

    #[test]
    fn wide_window_fits_one_anchor() {
        let r = report(IntakeCase::NoIntake, None, 20 * HOUR);
        for s in 0..50 {
            let mut rng = seed::rng(s);
            assert_eq!(sample_noneating_anchors(&r, 105, None, &mut rng).len(), 1);
        }
    }

    #[test]
    fn case_three_contributes_no_negatives() {
        let r = report(
            IntakeCase::MultiIntake,
            Some(RecencyBucket::M90To120),
            20 * HOUR,
        );
        let (set, _) = build_event_set(&[r], 30, 1, Execution::Sequential);
        assert_eq!(set.count(Label::Eating), 1);
        assert_eq!(set.count(Label::NonEating), 0);
    }

    #[test]
    fn one_case_two_report_gives_one_eating_and_at_most_two_others() {
        let r = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M120To150),
            20 * HOUR,
        );
        let (set, _) = build_event_set(&[r], 30, 9, Execution::Sequential);
        assert_eq!(set.count(Label::Eating), 1);
        assert!(set.count(Label::NonEating) <= 2);
        assert!(check_nonoverlap(&set).is_empty());
    }

    #[test]
    fn conflicting_eating_anchor_is_dropped() {
        let a = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M210To240),
            20 * HOUR,
        );
        let b = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M0To30),
            16 * HOUR + 20 * MS_PER_MINUTE,
        );
        let (set, warnings) = build_event_set(&[a, b.clone()], 30, 3, Execution::Sequential);
        assert_eq!(set.count(Label::Eating), 1);
        assert_eq!(warnings.len(), 1);
        let eat = set
            .events
            .iter()
            .find(|e| e.label == Label::Eating)
            .unwrap();
        assert_eq!(eat.source_report, Some(b.ts));
    }

    #[test]
    fn empty_reports_give_empty_set() {
        let (set, w) = build_event_set(&[], 30, 0, Execution::Parallel);
        assert!(set.events.is_empty() && w.is_empty());
    }

    #[test]
    fn nonoverlap_boundary() {
        let mk = |ts| EventRecord {
            user_id: "u".into(),
            t_anc: ts,
            label: Label::NonEating,
            x_half_min: 30,
            source_report: None,
        };
        let set = EventSet {
            events: vec![mk(0), mk(45 * MS_PER_MINUTE)],
            x_half_min: 30,
        };
        assert_eq!(check_nonoverlap(&set).len(), 1);
        let set = EventSet {
            events: vec![mk(0), mk(60 * MS_PER_MINUTE)],
            x_half_min: 30,
        };
        assert!(check_nonoverlap(&set).is_empty());
    }

    #[test]
    fn events_roundtrip_through_csv() {
        let r = report(
            IntakeCase::OneIntake,
            Some(RecencyBucket::M60To90),
            20 * HOUR,
        );
        let (set, _) = build_event_set(&[r], 30, 5, Execution::Sequential);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("events.csv");
        write_events(&p, &set).unwrap();
        let back = read_events(&p).unwrap();
        assert_eq!(back.events.len(), set.events.len());
        for (a, b) in back.events.iter().zip(&set.events) {
            assert_eq!(
                (a.t_anc, a.label, &a.user_id),
                (b.t_anc, b.label, &b.user_id)
            );
        }
    }
}
