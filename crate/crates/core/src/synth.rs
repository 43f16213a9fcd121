//! Seeded synthetic cohort: raw sensor streams, self-reports and ground truth.
//!
//! Every user gets a routine drawn once from its own rng stream. With
//! `effect > 0` a few modalities per user react to true eating episodes,
//! and the direction of the reaction differs between users, so a model fit
//! on one user transfers only partly to another. With `effect == 0` no
//! stream depends on the intake times.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::features::Modality;
use crate::ingest::{
    write_self_reports, write_sensor_streams, AccelSample, AppEvent, BatteryReading, IntakeCase,
    LocationFix, PowerSource, RecencyBucket, ScreenEvent, ScreenState, SelfReport, SensorBundle,
    REPORTS_FILE,
};
use crate::seed::{self, Rng};
use crate::{Error, Result, Timestamp, MS_PER_MINUTE};

const HOUR_MS: i64 = 60 * MS_PER_MINUTE;
const DAY_MS: i64 = 24 * HOUR_MS;
const KM_PER_DEG: f64 = 111.195;
pub const MIN_REPORT_GAP_HOURS: f64 = 4.0;
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const ROUTINES_FILE: &str = "routines.json";

/// Packages of the ten APP columns, then background apps.
const APPS: [&str; 10] = [
    "com.facebook.katana",
    "com.whatsapp",
    "com.instagram.android",
    "com.google.android.youtube",
    "com.android.chrome",
    "com.spotify.music",
    "com.google.android.dialer",
    "com.google.android.apps.youtube.music",
    "com.google.android.googlequicksearchbox",
    "com.microsoft.launcher",
];
const RARE_APPS: [&str; 3] = [
    "com.android.settings",
    "com.google.android.gm",
    "com.android.vending",
];

/// Modalities that can carry a planted eating signal.
pub const PLANTABLE: [Modality; 5] = [
    Modality::Time,
    Modality::App,
    Modality::Acc,
    Modality::Loc,
    Modality::Scr,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_users: usize,
    /// Days per user are drawn uniformly from `days_min..=days_max`.
    pub days_min: u32,
    pub days_max: u32,
    /// First local day, in days since 1970-01-01.
    pub start_day: i64,
    pub tz_offset_min: i32,
    /// Local report slot centres in hours, ascending.
    pub slot_hours: Vec<f64>,
    /// Reports fall uniformly within this many hours of their slot centre.
    pub slot_jitter_hours: f64,
    /// Largest per-user weekend delay of all slots, in hours.
    pub weekend_shift_max_hours: f64,
    /// Probability that a report follows an intake.
    pub p_intake: f64,
    /// Probability that an intake report covers several intakes.
    pub p_multi: f64,
    /// Minutes between the last intake and the report.
    pub recall_minutes: (f64, f64),
    /// Eating episode around the true intake time, minutes before and after.
    pub episode_minutes: (f64, f64),
    /// Strength of every planted signal, 0 (none) to 1.
    pub effect: f64,
    /// Users draw their own informative modalities and signs; otherwise all share one routine.
    pub heterogeneous: bool,
    pub informative_per_user: usize,
    pub accel_interval_s: u32,
    pub location_interval_min: u32,
    pub location_dropout: f64,
    pub battery_interval_min: u32,
    pub app_rate_per_hour: (f64, f64),
    pub apps_per_user: (usize, usize),
    pub habit_apps: usize,
    /// Extra habit-app launches per hour during an episode at full effect.
    pub habit_boost_per_hour: f64,
    pub screen_rate_per_hour: f64,
    pub excursions_per_day: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_users: 58,
            days_min: 27,
            days_max: 29,
            start_day: 18170,
            tz_offset_min: -360,
            slot_hours: vec![10.0, 16.0, 22.0],
            slot_jitter_hours: 1.0,
            weekend_shift_max_hours: 1.5,
            p_intake: 0.4,
            p_multi: 0.5,
            recall_minutes: (30.0, 210.0),
            episode_minutes: (10.0, 20.0),
            effect: 1.0,
            heterogeneous: true,
            informative_per_user: 2,
            accel_interval_s: 120,
            location_interval_min: 10,
            location_dropout: 0.1,
            battery_interval_min: 15,
            app_rate_per_hour: (0.1, 0.35),
            apps_per_user: (5, 8),
            habit_apps: 2,
            habit_boost_per_hour: 6.0,
            screen_rate_per_hour: 2.0,
            excursions_per_day: 0.5,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.n_users == 0 || self.days_min == 0 || self.days_max < self.days_min {
            return bad(format!(
                "need n_users >= 1 and 1 <= days_min <= days_max, got {} users, days {}..={}",
                self.n_users, self.days_min, self.days_max
            ));
        }
        if self.slot_hours.is_empty() {
            return bad("slot_hours is empty".into());
        }
        if self.slot_hours.iter().any(|h| !(0.0..24.0).contains(h)) {
            return bad("slot hours must lie in [0, 24)".into());
        }
        if self.slot_jitter_hours < 0.0 || self.weekend_shift_max_hours < 0.0 {
            return bad("jitter and weekend shift must be non-negative".into());
        }
        let j = 2.0 * self.slot_jitter_hours;
        for w in self.slot_hours.windows(2) {
            if w[1] - w[0] - j < MIN_REPORT_GAP_HOURS {
                return bad(format!(
                    "slots at {} h and {} h with jitter {} h can be closer than {MIN_REPORT_GAP_HOURS} h",
                    w[0], w[1], self.slot_jitter_hours
                ));
            }
        }
        let first = self.slot_hours[0];
        let last = *self.slot_hours.last().expect("non-empty");
        if 24.0 + first - last - j - self.weekend_shift_max_hours < MIN_REPORT_GAP_HOURS {
            return bad(format!(
                "last slot at {last} h and next day's first at {first} h can be closer than {MIN_REPORT_GAP_HOURS} h"
            ));
        }
        for (name, p) in [
            ("p_intake", self.p_intake),
            ("p_multi", self.p_multi),
            ("effect", self.effect),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let (lo, hi) = self.recall_minutes;
        if !(0.0 <= lo && lo < hi && hi <= 240.0) {
            return bad(format!(
                "recall_minutes must satisfy 0 <= lo < hi <= 240, got ({lo}, {hi})"
            ));
        }
        if self.informative_per_user > PLANTABLE.len() {
            return bad(format!(
                "informative_per_user must be at most {}",
                PLANTABLE.len()
            ));
        }
        if self.apps_per_user.0 < self.habit_apps.max(1)
            || self.apps_per_user.1 < self.apps_per_user.0
            || self.apps_per_user.1 > APPS.len()
        {
            return bad("apps_per_user must satisfy habit_apps <= lo <= hi <= 10".into());
        }
        if self.accel_interval_s == 0
            || self.location_interval_min == 0
            || self.battery_interval_min == 0
        {
            return bad("sampling intervals must be positive".into());
        }
        Ok(())
    }
}

/// Per-user behaviour, drawn once per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Routine {
    pub user_id: String,
    pub days: u32,
    pub informative: Vec<Modality>,
    /// Intake probability per report slot.
    pub slot_intake: Vec<f64>,
    pub weekend_shift_hours: f64,
    pub home: (f64, f64),
    pub accel_mean: [f64; 3],
    pub accel_sd: f64,
    /// Activity multiplier during eating at full effect.
    pub eating_activity: f64,
    /// Accelerometer mean shift during eating at full effect.
    pub eating_accel_shift: [f64; 3],
    pub apps: Vec<String>,
    pub app_rates: Vec<f64>,
    pub habit_apps: Vec<String>,
    pub excursion_km: f64,
    /// Screen session rate multiplier during eating at full effect.
    pub eating_screen: f64,
}

/// One self-report with the intake times behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub user_id: String,
    pub report_ts: Timestamp,
    pub case: IntakeCase,
    pub bucket: Option<RecencyBucket>,
    pub intake_ts: Option<Timestamp>,
    pub earlier_intake_ts: Option<Timestamp>,
}

impl TruthRow {
    /// Derived anchor minus true intake time, in minutes.
    pub fn anchor_error_minutes(&self) -> Option<f64> {
        let bucket = self.bucket?;
        let anchor = self.report_ts - bucket.midpoint_minutes() * MS_PER_MINUTE;
        Some((anchor - self.intake_ts?) as f64 / MS_PER_MINUTE as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub bundles: BTreeMap<String, SensorBundle>,
    pub reports: Vec<SelfReport>,
    pub truth: Vec<TruthRow>,
    pub routines: Vec<Routine>,
}

fn user_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("u{i:0width$}")).collect()
}

fn draw_routine(spec: &CohortSpec, user: &str, seed: u64) -> Routine {
    // The shared routine uses one stream for every user.
    let key = if spec.heterogeneous { user } else { "shared" };
    let mut rng = seed::rng_for(seed, &["routine", key]);
    let mut own = seed::rng_for(seed, &["profile", user]);
    let e = spec.effect;

    let mut plantable = PLANTABLE.to_vec();
    plantable.shuffle(&mut rng);
    let mut informative: Vec<Modality> = plantable
        .into_iter()
        .take(spec.informative_per_user)
        .collect();
    informative.sort();

    let n_slots = spec.slot_hours.len();
    let favourite = rng.gen_range(0..n_slots);
    let slot_intake = (0..n_slots)
        .map(|s| {
            if !informative.contains(&Modality::Time) || n_slots < 2 {
                return spec.p_intake;
            }
            // Mean-preserving tilt toward the favourite slot.
            let w = if s == favourite {
                0.8
            } else {
                -0.8 / (n_slots - 1) as f64
            };
            (spec.p_intake * (1.0 + e * w)).clamp(0.0, 1.0)
        })
        .collect();

    let sign = |rng: &mut Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let eating_activity = if rng.gen_bool(0.5) {
        rng.gen_range(1.8..2.6)
    } else {
        rng.gen_range(0.3..0.55)
    };
    let eating_accel_shift = [
        sign(&mut rng) * rng.gen_range(0.3..0.6),
        sign(&mut rng) * rng.gen_range(0.3..0.6),
        sign(&mut rng) * rng.gen_range(0.3..0.6),
    ];
    let eating_screen = if rng.gen_bool(0.5) {
        rng.gen_range(2.5..4.0)
    } else {
        rng.gen_range(0.05..0.25)
    };

    let n_apps = rng.gen_range(spec.apps_per_user.0..=spec.apps_per_user.1);
    let mut pool: Vec<&str> = APPS.to_vec();
    pool.shuffle(&mut rng);
    let apps: Vec<String> = pool[..n_apps].iter().map(|s| s.to_string()).collect();
    let app_rates = (0..n_apps)
        .map(|_| rng.gen_range(spec.app_rate_per_hour.0..=spec.app_rate_per_hour.1))
        .collect();
    let habit_apps = apps[..spec.habit_apps].to_vec();
    let excursion_km = rng.gen_range(2.0..8.0);

    Routine {
        user_id: user.to_string(),
        days: own.gen_range(spec.days_min..=spec.days_max),
        informative,
        slot_intake,
        weekend_shift_hours: own.gen_range(0.0..=spec.weekend_shift_max_hours),
        home: (
            41.55 + own.gen_range(-0.1..0.1),
            -93.65 + own.gen_range(-0.1..0.1),
        ),
        accel_mean: [
            own.gen_range(-0.5..0.5),
            own.gen_range(-0.5..0.5),
            9.6 + own.gen_range(-0.3..0.3),
        ],
        accel_sd: own.gen_range(0.4..0.9),
        eating_activity,
        eating_accel_shift,
        apps,
        app_rates,
        habit_apps,
        excursion_km,
        eating_screen,
    }
}

fn is_weekend(local_day: i64) -> bool {
    (local_day + 3).rem_euclid(7) >= 5
}

/// Reports and ground truth of one user, sorted by time.
fn user_reports(spec: &CohortSpec, r: &Routine, seed: u64) -> (Vec<SelfReport>, Vec<TruthRow>) {
    let mut rng = seed::rng_for(seed, &["reports", &r.user_id]);
    let tz_ms = i64::from(spec.tz_offset_min) * MS_PER_MINUTE;
    let mut reports = Vec::new();
    let mut truth = Vec::new();
    for d in 0..i64::from(r.days) {
        let day = spec.start_day + d;
        let shift = if is_weekend(day) {
            r.weekend_shift_hours
        } else {
            0.0
        };
        for (s, &h) in spec.slot_hours.iter().enumerate() {
            let jitter = if spec.slot_jitter_hours > 0.0 {
                rng.gen_range(-spec.slot_jitter_hours..spec.slot_jitter_hours)
            } else {
                0.0
            };
            let local = day * DAY_MS + ((h + shift + jitter) * HOUR_MS as f64) as i64;
            let ts = local - tz_ms;
            let intake = rng.gen_bool(r.slot_intake[s]);
            let multi = rng.gen_bool(spec.p_multi);
            let u = rng.gen_range(spec.recall_minutes.0..spec.recall_minutes.1);
            let (case, bucket, intake_ts, earlier) = if intake {
                let t = ts - (u * MS_PER_MINUTE as f64) as i64;
                let bucket = RecencyBucket::containing(u);
                if multi {
                    let room = 240.0 - u;
                    let v = rng.gen_range(0.3 * room..0.95 * room);
                    let e = t - (v * MS_PER_MINUTE as f64) as i64;
                    (IntakeCase::MultiIntake, bucket, Some(t), Some(e))
                } else {
                    (IntakeCase::OneIntake, bucket, Some(t), None)
                }
            } else {
                (IntakeCase::NoIntake, None, None, None)
            };
            reports.push(SelfReport {
                user_id: r.user_id.clone(),
                ts,
                case,
                bucket,
                tz_offset_min: spec.tz_offset_min,
            });
            truth.push(TruthRow {
                user_id: r.user_id.clone(),
                report_ts: ts,
                case,
                bucket,
                intake_ts,
                earlier_intake_ts: earlier,
            });
        }
    }
    (reports, truth)
}

/// Self-reports and ground truth only, without sensor streams.
pub fn generate_reports(
    spec: &CohortSpec,
    seed: u64,
) -> Result<(Vec<SelfReport>, Vec<TruthRow>, Vec<Routine>)> {
    spec.validate()?;
    let routines: Vec<Routine> = user_ids(spec.n_users)
        .iter()
        .map(|u| draw_routine(spec, u, seed))
        .collect();
    let mut reports = Vec::new();
    let mut truth = Vec::new();
    for r in &routines {
        let (rep, tr) = user_reports(spec, r, seed);
        check_gaps(&rep)?;
        reports.extend(rep);
        truth.extend(tr);
    }
    Ok((reports, truth, routines))
}

fn check_gaps(reports: &[SelfReport]) -> Result<()> {
    let min_gap = (MIN_REPORT_GAP_HOURS * HOUR_MS as f64) as i64;
    for w in reports.windows(2) {
        if w[1].ts - w[0].ts < min_gap {
            return Err(Error::InfeasibleSpec(format!(
                "reports of {} at {} and {} are closer than {MIN_REPORT_GAP_HOURS} h",
                w[0].user_id, w[0].ts, w[1].ts
            )));
        }
    }
    Ok(())
}

/// Generate the whole cohort. Same `(spec, seed)` gives identical output.
pub fn generate_cohort(spec: &CohortSpec, seed: u64) -> Result<Cohort> {
    generate_cohort_with(spec, seed, Execution::default())
}

pub fn generate_cohort_with(spec: &CohortSpec, seed: u64, exec: Execution) -> Result<Cohort> {
    let (reports, truth, routines) = generate_reports(spec, seed)?;
    let mut truth_by_user: BTreeMap<&str, Vec<&TruthRow>> = BTreeMap::new();
    for t in &truth {
        truth_by_user.entry(t.user_id.as_str()).or_default().push(t);
    }
    let bundles = exec.map(&routines, |r| {
        let rows = truth_by_user
            .get(r.user_id.as_str())
            .cloned()
            .unwrap_or_default();
        user_streams(spec, r, &rows, seed)
    });
    Ok(Cohort {
        bundles: bundles
            .into_iter()
            .map(|b| (b.user_id.clone(), b))
            .collect(),
        reports,
        truth,
        routines,
    })
}

/// `[start, end)` of every true eating episode.
fn episodes(spec: &CohortSpec, truth: &[&TruthRow]) -> Vec<(Timestamp, Timestamp)> {
    let (before, after) = spec.episode_minutes;
    let mut out: Vec<(Timestamp, Timestamp)> = truth
        .iter()
        .flat_map(|t| t.intake_ts.into_iter().chain(t.earlier_intake_ts))
        .map(|t| {
            (
                t - (before * MS_PER_MINUTE as f64) as i64,
                t + (after * MS_PER_MINUTE as f64) as i64,
            )
        })
        .collect();
    out.sort_unstable();
    out
}

fn in_any(spans: &[(Timestamp, Timestamp)], t: Timestamp) -> bool {
    let i = spans.partition_point(|s| s.0 <= t);
    i > 0 && t < spans[i - 1].1
}

fn offset_km(origin: (f64, f64), km: f64, bearing: f64) -> (f64, f64) {
    let dlat = km * bearing.cos() / KM_PER_DEG;
    let dlon = km * bearing.sin() / (KM_PER_DEG * origin.0.to_radians().cos());
    (origin.0 + dlat, origin.1 + dlon)
}

/// Poisson event times over `[from, to)` at `rate` per hour.
fn poisson_times(
    rng: &mut Rng,
    from: Timestamp,
    to: Timestamp,
    rate_per_hour: f64,
) -> Vec<Timestamp> {
    if rate_per_hour <= 0.0 || to <= from {
        return Vec::new();
    }
    let lambda = rate_per_hour * (to - from) as f64 / HOUR_MS as f64;
    let n = Poisson::new(lambda)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0);
    let mut out: Vec<Timestamp> = (0..n).map(|_| rng.gen_range(from..to)).collect();
    out.sort_unstable();
    out
}

fn user_streams(spec: &CohortSpec, r: &Routine, truth: &[&TruthRow], seed: u64) -> SensorBundle {
    let tz_ms = i64::from(spec.tz_offset_min) * MS_PER_MINUTE;
    let start = spec.start_day * DAY_MS - tz_ms;
    let end = start + i64::from(r.days) * DAY_MS;
    let eps = episodes(spec, truth);
    let e = spec.effect;
    let planted = |m: Modality| e > 0.0 && r.informative.contains(&m);
    let local_hour = |t: Timestamp| ((t + tz_ms).rem_euclid(DAY_MS)) as f64 / HOUR_MS as f64;
    let weekend = |t: Timestamp| is_weekend((t + tz_ms).div_euclid(DAY_MS));
    let awake = |t: Timestamp| {
        let h = local_hour(t)
            - if weekend(t) {
                r.weekend_shift_hours
            } else {
                0.0
            };
        (7.0..23.5).contains(&h.rem_euclid(24.0))
    };
    let mut b = SensorBundle::new(r.user_id.clone());

    // Random trips unrelated to eating: (start, end, place).
    let mut trips_rng = seed::rng_for(seed, &["trips", &r.user_id]);
    let mut trips: Vec<(Timestamp, Timestamp, (f64, f64))> = Vec::new();
    for t in poisson_times(&mut trips_rng, start, end, spec.excursions_per_day / 24.0) {
        let dur = trips_rng.gen_range(30..120) * MS_PER_MINUTE;
        let km = trips_rng.gen_range(0.5..6.0);
        let place = offset_km(r.home, km, trips_rng.gen_range(0.0..std::f64::consts::TAU));
        trips.push((t, t + dur, place));
    }
    // Eating outings of LOC-informative users.
    let mut outings: Vec<(Timestamp, Timestamp, (f64, f64))> = Vec::new();
    if planted(Modality::Loc) {
        let mut rng = seed::rng_for(seed, &["outings", &r.user_id]);
        for &(s, t) in &eps {
            if rng.gen_bool((0.85 * e).min(1.0)) {
                let place = offset_km(
                    r.home,
                    r.excursion_km * rng.gen_range(0.8..1.2),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                );
                outings.push((s - 10 * MS_PER_MINUTE, t + 10 * MS_PER_MINUTE, place));
            }
        }
    }

    // Accelerometer.
    {
        let mut rng = seed::rng_for(seed, &["accel", &r.user_id]);
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let block = Normal::new(0.0, 0.5).expect("block spread");
        let step = i64::from(spec.accel_interval_s) * 1000;
        let block_ms = 10 * MS_PER_MINUTE;
        let mut block_id = i64::MIN;
        let mut block_level = 1.0;
        let mut t = start;
        while t < end {
            if t.div_euclid(block_ms) != block_id {
                block_id = t.div_euclid(block_ms);
                block_level = f64::exp(block.sample(&mut rng));
            }
            let mut act = r.accel_sd * block_level * if awake(t) { 1.0 } else { 0.15 };
            let mut mean = r.accel_mean;
            if planted(Modality::Acc) && in_any(&eps, t) {
                act *= 1.0 + e * (r.eating_activity - 1.0);
                for (m, d) in mean.iter_mut().zip(r.eating_accel_shift) {
                    *m += e * d;
                }
            }
            b.accel.push(AccelSample {
                ts: t,
                x: mean[0] + act * noise.sample(&mut rng),
                y: mean[1] + act * noise.sample(&mut rng),
                z: mean[2] + act * noise.sample(&mut rng),
            });
            t += step;
        }
    }

    // Location.
    {
        let mut rng = seed::rng_for(seed, &["location", &r.user_id]);
        let jitter = Normal::<f64>::new(0.0, 0.03).expect("jitter");
        let step = i64::from(spec.location_interval_min) * MS_PER_MINUTE;
        let mut t = start;
        while t < end {
            if !rng.gen_bool(spec.location_dropout.clamp(0.0, 1.0)) {
                let at = |v: &[(Timestamp, Timestamp, (f64, f64))]| {
                    v.iter().find(|(s, e, _)| *s <= t && t < *e).map(|x| x.2)
                };
                let base = at(&outings).or_else(|| at(&trips)).unwrap_or(r.home);
                let p = offset_km(
                    base,
                    jitter.sample(&mut rng).abs(),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                );
                b.locations.push(LocationFix {
                    ts: t,
                    lat: p.0,
                    lon: p.1,
                });
            }
            t += step;
        }
    }

    // Apps.
    {
        let mut rng = seed::rng_for(seed, &["apps", &r.user_id]);
        let mut events: Vec<AppEvent> = Vec::new();
        let push_awake = |rng: &mut Rng, pkg: &str, rate: f64, events: &mut Vec<AppEvent>| {
            for t in poisson_times(rng, start, end, rate) {
                if awake(t) {
                    events.push(AppEvent {
                        ts: t,
                        package: pkg.to_string(),
                    });
                }
            }
        };
        for (pkg, &rate) in r.apps.iter().zip(&r.app_rates) {
            push_awake(&mut rng, pkg, rate, &mut events);
        }
        for pkg in RARE_APPS {
            push_awake(&mut rng, pkg, 0.01, &mut events);
        }
        if planted(Modality::App) {
            for &(s, t) in &eps {
                for pkg in &r.habit_apps {
                    for ts in poisson_times(&mut rng, s, t, e * spec.habit_boost_per_hour) {
                        events.push(AppEvent {
                            ts,
                            package: pkg.clone(),
                        });
                    }
                }
            }
        }
        events.sort_by(|a, b| (a.ts, &a.package).cmp(&(b.ts, &b.package)));
        events.dedup_by_key(|a| a.ts);
        b.app_events = events;
    }

    // Screen sessions.
    {
        let mut rng = seed::rng_for(seed, &["screen", &r.user_id]);
        let dur = Exp::new(1.0 / 3.0).expect("session length");
        let mult = if planted(Modality::Scr) {
            1.0 + e * (r.eating_screen - 1.0)
        } else {
            1.0
        };
        let mut starts: Vec<Timestamp> = Vec::new();
        for t in poisson_times(&mut rng, start, end, spec.screen_rate_per_hour) {
            let rate = if awake(t) { 1.0 } else { 0.1 };
            let keep = if mult < 1.0 && in_any(&eps, t) {
                rate * mult
            } else {
                rate
            };
            if rng.gen_bool(keep.clamp(0.0, 1.0)) {
                starts.push(t);
            }
        }
        if mult > 1.0 {
            for &(s, t) in &eps {
                starts.extend(poisson_times(
                    &mut rng,
                    s,
                    t,
                    spec.screen_rate_per_hour * (mult - 1.0),
                ));
            }
        }
        starts.sort_unstable();
        starts.dedup();
        let mut events = Vec::with_capacity(2 * starts.len());
        for (i, &s) in starts.iter().enumerate() {
            let len = ((dur.sample(&mut rng) + 0.2) * MS_PER_MINUTE as f64) as i64;
            let off = (s + len)
                .min(starts.get(i + 1).map_or(end, |n| n - 1))
                .max(s + 1);
            events.push(ScreenEvent {
                ts: s,
                state: ScreenState::On,
            });
            events.push(ScreenEvent {
                ts: off,
                state: ScreenState::Off,
            });
        }
        b.screen_events = events;
    }

    // Battery.
    {
        let mut rng = seed::rng_for(seed, &["battery", &r.user_id]);
        let step = i64::from(spec.battery_interval_min) * MS_PER_MINUTE;
        let hours = step as f64 / HOUR_MS as f64;
        let mut level: f64 = rng.gen_range(60.0..100.0);
        let mut usb_until = i64::MIN;
        let mut t = start;
        while t < end {
            let night = !awake(t);
            if !night && t >= usb_until && rng.gen_bool((0.25 * hours / 16.0).min(1.0)) {
                usb_until = t + rng.gen_range(30..90) * MS_PER_MINUTE;
            }
            let source = if night {
                PowerSource::Ac
            } else if t < usb_until {
                PowerSource::Usb
            } else {
                PowerSource::None
            };
            let charging = source != PowerSource::None;
            level += if charging {
                25.0 * hours
            } else {
                -rng.gen_range(3.0..7.0) * hours
            };
            level = level.clamp(5.0, 100.0);
            let reported_source = if charging && rng.gen_bool(0.05) {
                PowerSource::Unknown
            } else {
                source
            };
            b.battery.push(BatteryReading {
                ts: t,
                level: level.round(),
                charging,
                source: reported_source,
            });
            t += step;
        }
    }
    b
}

/// Write the cohort in the ingest schema plus `ground_truth.csv` and `routines.json`.
pub fn write_cohort(dir: &Path, cohort: &Cohort) -> Result<()> {
    write_sensor_streams(dir, cohort.bundles.values())?;
    write_self_reports(&dir.join(REPORTS_FILE), &cohort.reports)?;
    write_ground_truth(&dir.join(GROUND_TRUTH_FILE), &cohort.truth)?;
    let path = dir.join(ROUTINES_FILE);
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &cohort.routines)?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn write_ground_truth(path: &Path, truth: &[TruthRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e| Error::csv(path, e);
    w.write_record([
        "user_id",
        "report_ts_ms",
        "case",
        "bucket",
        "intake_ts_ms",
        "earlier_intake_ts_ms",
        "anchor_error_min",
    ])
    .map_err(err)?;
    let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in truth {
        w.write_record([
            t.user_id.clone(),
            t.report_ts.to_string(),
            t.case.code().to_string(),
            t.bucket.map(|b| b.as_str().to_string()).unwrap_or_default(),
            opt(t.intake_ts),
            opt(t.earlier_intake_ts),
            t.anchor_error_minutes()
                .map(|e| e.to_string())
                .unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CohortSpec {
        CohortSpec {
            n_users: 3,
            days_min: 3,
            days_max: 4,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_order_free() {
        let a = generate_cohort_with(&small(), 5, Execution::Sequential).unwrap();
        let b = generate_cohort_with(&small(), 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = generate_cohort(&small(), 6).unwrap();
        assert_ne!(a.reports, c.reports);
    }

    #[test]
    fn reports_are_spaced_and_consistent() {
        let c = generate_cohort(&small(), 1).unwrap();
        for r in &c.reports {
            r.validate().unwrap();
        }
        for t in &c.truth {
            if let Some(err) = t.anchor_error_minutes() {
                assert!(err.abs() <= 15.0 + 1e-9, "anchor error {err}");
            }
        }
        for b in c.bundles.values() {
            assert!(b.accel.windows(2).all(|w| w[0].ts < w[1].ts));
            assert!(b.app_events.windows(2).all(|w| w[0].ts < w[1].ts));
            assert!(b.screen_events.windows(2).all(|w| w[0].ts <= w[1].ts));
        }
    }

    #[test]
    fn infeasible_slots_rejected() {
        let spec = CohortSpec {
            slot_hours: vec![10.0, 13.0, 20.0],
            ..Default::default()
        };
        assert!(matches!(
            generate_reports(&spec, 0),
            Err(Error::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn intake_rate_matches_config() {
        let spec = CohortSpec {
            n_users: 150,
            ..Default::default()
        };
        let (reports, _, _) = generate_reports(&spec, 11).unwrap();
        assert!(reports.len() >= 10_000);
        let rate = reports
            .iter()
            .filter(|r| r.case != IntakeCase::NoIntake)
            .count() as f64
            / reports.len() as f64;
        assert!((rate - spec.p_intake).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn null_cohort_streams_ignore_intakes() {
        let spec = CohortSpec {
            effect: 0.0,
            ..small()
        };
        let c = generate_cohort(&spec, 3).unwrap();
        // Same streams whatever the intake times are.
        let mut other = spec.clone();
        other.p_intake = 0.9;
        let d = generate_cohort(&other, 3).unwrap();
        for (u, b) in &c.bundles {
            assert_eq!(b.accel, d.bundles[u].accel);
            assert_eq!(b.screen_events, d.bundles[u].screen_events);
            assert_eq!(b.locations, d.bundles[u].locations);
        }
    }
}
