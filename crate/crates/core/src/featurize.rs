//! Per-event feature extraction.
//!
//! Every feature is computed over the event window `[t_anc - X, t_anc + X)`.
//! Accelerometer features go through ten-minute bins of local time first;
//! a window that does not start on a bin boundary weights each bin by its
//! overlap with the window.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchor::{EventRecord, EventSet, Label};
use crate::exec::Execution;
use crate::features::{is_binary, Modality, FEATURE_NAMES, N_FEATURES};
use crate::ingest::{
    AppEvent, BatteryReading, LocationFix, PowerSource, ScreenEvent, ScreenState, SensorBundle,
};
use crate::{Error, Result, Timestamp, MS_PER_MINUTE};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const BIN_MINUTES: i64 = 10;
pub const BINS_PER_DAY: usize = 144;
const BIN_MS: i64 = BIN_MINUTES * MS_PER_MINUTE;
const DAY_MS: i64 = 1440 * MS_PER_MINUTE;

pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Root-mean-square haversine distance (km) of the fixes from their centroid.
///
/// The centroid is the arithmetic mean of latitude and longitude. Each fix
/// counts once per occurrence. `None` for an empty slice.
pub fn radius_of_gyration(fixes: &[(f64, f64)]) -> Option<f64> {
    if fixes.is_empty() {
        return None;
    }
    let n = fixes.len() as f64;
    let lat = fixes.iter().map(|p| p.0).sum::<f64>() / n;
    let lon = fixes.iter().map(|p| p.1).sum::<f64>() / n;
    let ms = fixes
        .iter()
        .map(|&p| haversine_km(p, (lat, lon)).powi(2))
        .sum::<f64>()
        / n;
    Some(ms.sqrt())
}

/// Means of one ten-minute accelerometer bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelBin {
    pub mean: [f64; 3],
    pub mean_abs: [f64; 3],
    pub count: usize,
}

impl AccelBin {
    /// `(mean_x, mean_y, mean_z, mean_|x|, mean_|y|, mean_|z|)`.
    pub fn values(&self) -> [f64; 6] {
        [
            self.mean[0],
            self.mean[1],
            self.mean[2],
            self.mean_abs[0],
            self.mean_abs[1],
            self.mean_abs[2],
        ]
    }
}

/// Ten-minute accelerometer bins keyed by local-time bin index since the epoch.
#[derive(Clone, Debug, Default)]
pub struct AccelBins {
    bins: HashMap<i64, AccelBin>,
    tz_offset_min: i32,
}

impl AccelBins {
    pub fn build(bundle: &SensorBundle, tz_offset_min: i32) -> Self {
        let offset = i64::from(tz_offset_min) * MS_PER_MINUTE;
        let mut acc: HashMap<i64, ([f64; 6], usize)> = HashMap::new();
        for s in &bundle.accel {
            let key = (s.ts + offset).div_euclid(BIN_MS);
            let e = acc.entry(key).or_insert(([0.0; 6], 0));
            let v = [s.x, s.y, s.z, s.x.abs(), s.y.abs(), s.z.abs()];
            for (a, b) in e.0.iter_mut().zip(v) {
                *a += b;
            }
            e.1 += 1;
        }
        let bins = acc
            .into_iter()
            .map(|(k, (sum, n))| {
                let m = n as f64;
                (
                    k,
                    AccelBin {
                        mean: [sum[0] / m, sum[1] / m, sum[2] / m],
                        mean_abs: [sum[3] / m, sum[4] / m, sum[5] / m],
                        count: n,
                    },
                )
            })
            .collect();
        AccelBins {
            bins,
            tz_offset_min,
        }
    }

    pub fn get(&self, bin_index: i64) -> Option<&AccelBin> {
        self.bins.get(&bin_index)
    }

    /// The 144 bins of local day `day` (days since the epoch); `None` marks an empty bin.
    pub fn day(&self, day: i64) -> Vec<Option<AccelBin>> {
        let first = day * BINS_PER_DAY as i64;
        (0..BINS_PER_DAY as i64)
            .map(|b| self.bins.get(&(first + b)).copied())
            .collect()
    }

    /// Overlap-weighted mean of the six bin values over a UTC interval `[from, to)`.
    pub fn weighted_mean(&self, from: Timestamp, to: Timestamp) -> Option<[f64; 6]> {
        let offset = i64::from(self.tz_offset_min) * MS_PER_MINUTE;
        let (a, b) = (from + offset, to + offset);
        if b <= a {
            return None;
        }
        let mut sum = [0.0; 6];
        let mut wsum = 0.0;
        for k in a.div_euclid(BIN_MS)..=(b - 1).div_euclid(BIN_MS) {
            let Some(bin) = self.bins.get(&k) else {
                continue;
            };
            let overlap = b.min((k + 1) * BIN_MS) - a.max(k * BIN_MS);
            let w = overlap as f64 / BIN_MS as f64;
            for (s, v) in sum.iter_mut().zip(bin.values()) {
                *s += w * v;
            }
            wsum += w;
        }
        (wsum > 0.0).then(|| sum.map(|s| s / wsum))
    }
}

/// The 144 bins of one local day, built straight from a bundle.
pub fn accel_bins(bundle: &SensorBundle, tz_offset_min: i32, day: i64) -> Vec<Option<AccelBin>> {
    AccelBins::build(bundle, tz_offset_min).day(day)
}

/// Window, before and after values: 6 + 6 + 6 features in manifest order.
pub fn accel_features(bins: &AccelBins, t_anc: Timestamp, x_half_min: u32) -> [Option<f64>; 18] {
    let half = i64::from(x_half_min) * MS_PER_MINUTE;
    let parts = [
        bins.weighted_mean(t_anc - half, t_anc + half),
        bins.weighted_mean(t_anc - half, t_anc),
        bins.weighted_mean(t_anc, t_anc + half),
    ];
    let mut out = [None; 18];
    for (p, part) in parts.iter().enumerate() {
        if let Some(v) = part {
            for (i, x) in v.iter().enumerate() {
                out[6 * p + i] = Some(*x);
            }
        }
    }
    out
}

/// Package ids of the apps behind the ten APP columns.
const KNOWN_APPS: &[(&str, &[&str])] = &[
    ("facebook", &["com.facebook.katana"]),
    ("whatsapp", &["com.whatsapp"]),
    ("instagram", &["com.instagram.android"]),
    ("youtube", &["com.google.android.youtube"]),
    ("chrome", &["com.android.chrome"]),
    ("spotify", &["com.spotify.music"]),
    (
        "android_dialer",
        &["com.google.android.dialer", "com.android.dialer"],
    ),
    ("youtube_music", &["com.google.android.apps.youtube.music"]),
    (
        "googlequicksearchbox",
        &["com.google.android.googlequicksearchbox"],
    ),
    ("microsoft_launcher", &["com.microsoft.launcher"]),
];

/// Column name an app package maps to, if it is one of the ten known apps.
pub fn canonical_app_name(package: &str) -> Option<&'static str> {
    KNOWN_APPS
        .iter()
        .find(|(name, ids)| *name == package || ids.contains(&package))
        .map(|(name, _)| *name)
}

/// The most used app packages, most frequent first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppManifest {
    pub packages: Vec<String>,
}

impl AppManifest {
    pub const SIZE: usize = 10;

    /// `k` packages by descending event count, ties broken lexicographically.
    pub fn top_apps<'a>(events: impl IntoIterator<Item = &'a AppEvent>, k: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in events {
            *counts.entry(e.package.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        AppManifest {
            packages: ranked
                .into_iter()
                .take(k)
                .map(|(p, _)| p.to_string())
                .collect(),
        }
    }

    pub fn from_bundles<'a>(bundles: impl IntoIterator<Item = &'a SensorBundle>) -> Self {
        Self::top_apps(
            bundles.into_iter().flat_map(|b| b.app_events.iter()),
            Self::SIZE,
        )
    }

    /// Package feeding each APP column.
    ///
    /// Packages that map to a known column name take that column; the rest
    /// fill the remaining columns in manifest order. Unfilled columns stay 0.
    pub fn column_packages(&self) -> [Option<&str>; AppManifest::SIZE] {
        let mut cols: [Option<&str>; AppManifest::SIZE] = [None; AppManifest::SIZE];
        let names = &FEATURE_NAMES[Modality::App.range()];
        let mut leftovers = Vec::new();
        for p in self.packages.iter().take(Self::SIZE) {
            let slot = canonical_app_name(p).and_then(|n| names.iter().position(|c| *c == n));
            match slot {
                Some(i) if cols[i].is_none() => cols[i] = Some(p.as_str()),
                _ => leftovers.push(p.as_str()),
            }
        }
        let mut free = (0..Self::SIZE)
            .filter(|i| cols[*i].is_none())
            .collect::<Vec<_>>()
            .into_iter();
        for p in leftovers {
            if let Some(i) = free.next() {
                cols[i] = Some(p);
            }
        }
        cols
    }
}

fn window_slice<T>(
    items: &[T],
    ts: impl Fn(&T) -> Timestamp,
    from: Timestamp,
    to: Timestamp,
) -> &[T] {
    let lo = items.partition_point(|x| ts(x) < from);
    let hi = items.partition_point(|x| ts(x) < to);
    &items[lo..hi.max(lo)]
}

/// 1 if the column's package was used at least once in `[from, to)`.
pub fn app_features(
    events: &[AppEvent],
    from: Timestamp,
    to: Timestamp,
    manifest: &AppManifest,
) -> [f64; AppManifest::SIZE] {
    let window = window_slice(events, |e| e.ts, from, to);
    manifest.column_packages().map(|p| match p {
        Some(p) if window.iter().any(|e| e.package == p) => 1.0,
        _ => 0.0,
    })
}

/// Mean level, charging true/false counts, ac/usb/unknown source counts.
pub fn bat_features(
    readings: &[BatteryReading],
    from: Timestamp,
    to: Timestamp,
) -> Option<[f64; 6]> {
    let window = window_slice(readings, |r| r.ts, from, to);
    if window.is_empty() {
        return None;
    }
    let count = |f: &dyn Fn(&BatteryReading) -> bool| window.iter().filter(|r| f(r)).count() as f64;
    let level = window.iter().map(|r| r.level).sum::<f64>() / window.len() as f64;
    Some([
        level,
        count(&|r| r.charging),
        count(&|r| !r.charging),
        count(&|r| r.source == PowerSource::Ac),
        count(&|r| r.source == PowerSource::Usb),
        count(&|r| r.source == PowerSource::Unknown),
    ])
}

pub fn scr_features(events: &[ScreenEvent], from: Timestamp, to: Timestamp) -> [f64; 2] {
    let window = window_slice(events, |e| e.ts, from, to);
    let on = window.iter().filter(|e| e.state == ScreenState::On).count();
    [on as f64, (window.len() - on) as f64]
}

/// Local hour of day, local minute of day, weekend flag.
pub fn time_features(t_anc: Timestamp, tz_offset_min: i32) -> [f64; 3] {
    let local = t_anc + i64::from(tz_offset_min) * MS_PER_MINUTE;
    let minute_of_day = local.rem_euclid(DAY_MS) / MS_PER_MINUTE;
    let days = local.div_euclid(DAY_MS);
    // 1970-01-01 was a Thursday; 0 = Monday.
    let weekday = (days + 3).rem_euclid(7);
    let weekend = if weekday >= 5 { 1.0 } else { 0.0 };
    [(minute_of_day / 60) as f64, minute_of_day as f64, weekend]
}

/// The 40 features of one event plus a presence mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: String,
    pub t_anc: Timestamp,
    pub label: Label,
    pub values: Vec<f64>,
    pub present: Vec<bool>,
}

impl FeatureVector {
    fn empty(event: &EventRecord) -> Self {
        FeatureVector {
            user_id: event.user_id.clone(),
            t_anc: event.t_anc,
            label: event.label,
            values: vec![f64::NAN; N_FEATURES],
            present: vec![false; N_FEATURES],
        }
    }

    fn set(&mut self, i: usize, v: Option<f64>) {
        if let Some(v) = v {
            self.values[i] = v;
            self.present[i] = true;
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        let i = crate::features::index_of(name)?;
        self.present[i].then(|| self.values[i])
    }
}

/// Per-user precomputation shared by all of that user's events.
pub struct UserFeaturizer<'a> {
    bundle: &'a SensorBundle,
    bins: AccelBins,
    tz_offset_min: i32,
    locations: Vec<LocationFix>,
}

impl<'a> UserFeaturizer<'a> {
    pub fn new(bundle: &'a SensorBundle, tz_offset_min: i32) -> Self {
        UserFeaturizer {
            bundle,
            bins: AccelBins::build(bundle, tz_offset_min),
            tz_offset_min,
            locations: bundle.locations.clone(),
        }
    }

    pub fn featurize(&self, event: &EventRecord, manifest: &AppManifest) -> FeatureVector {
        let mut fv = FeatureVector::empty(event);
        let (from, to) = event.window();

        let fixes: Vec<(f64, f64)> = window_slice(&self.locations, |f| f.ts, from, to)
            .iter()
            .map(|f| (f.lat, f.lon))
            .collect();
        fv.set(0, radius_of_gyration(&fixes));

        let acc = accel_features(&self.bins, event.t_anc, event.x_half_min);
        for (i, v) in acc.into_iter().enumerate() {
            fv.set(Modality::Acc.range().start + i, v);
        }

        let apps = app_features(&self.bundle.app_events, from, to, manifest);
        for (i, v) in apps.into_iter().enumerate() {
            fv.set(Modality::App.range().start + i, Some(v));
        }

        if let Some(bat) = bat_features(&self.bundle.battery, from, to) {
            for (i, v) in bat.into_iter().enumerate() {
                fv.set(Modality::Bat.range().start + i, Some(v));
            }
        }

        let scr = scr_features(&self.bundle.screen_events, from, to);
        for (i, v) in scr.into_iter().enumerate() {
            fv.set(Modality::Scr.range().start + i, Some(v));
        }

        let time = time_features(event.t_anc, self.tz_offset_min);
        for (i, v) in time.into_iter().enumerate() {
            fv.set(Modality::Time.range().start + i, Some(v));
        }
        fv
    }
}

pub fn featurize_event(
    bundle: &SensorBundle,
    event: &EventRecord,
    manifest: &AppManifest,
    tz_offset_min: i32,
) -> FeatureVector {
    UserFeaturizer::new(bundle, tz_offset_min).featurize(event, manifest)
}

/// Feature rows for a whole event set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label.as_class()).collect()
    }

    /// Distinct users in first-appearance order.
    pub fn users(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            if seen.insert(r.user_id.as_str()) {
                out.push(r.user_id.clone());
            }
        }
        out
    }

    /// Row indices per user.
    pub fn rows_by_user(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            out.entry(r.user_id.clone()).or_default().push(i);
        }
        out
    }

    /// Per-feature mean over present entries of `rows`; 0 when a feature is never present.
    pub fn present_means(&self, rows: &[usize]) -> Vec<f64> {
        let mut sum = vec![0.0; N_FEATURES];
        let mut n = vec![0usize; N_FEATURES];
        for &r in rows {
            let row = &self.rows[r];
            for j in 0..N_FEATURES {
                if row.present[j] {
                    sum[j] += row.values[j];
                    n[j] += 1;
                }
            }
        }
        sum.iter()
            .zip(&n)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect()
    }

    /// Replace missing values by `means`.
    pub fn impute_with(&mut self, means: &[f64]) {
        for row in &mut self.rows {
            for ((v, &p), &m) in row.values.iter_mut().zip(&row.present).zip(means) {
                if !p {
                    *v = m;
                }
            }
        }
    }

    /// Value at `(row, col)` with missing entries replaced by `means`.
    pub fn imputed(&self, row: usize, col: usize, means: &[f64]) -> f64 {
        let r = &self.rows[row];
        if r.present[col] {
            r.values[col]
        } else {
            means[col]
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e| Error::csv(path, e);
        let mut header = vec!["user_id".to_string(), "t_anc_ms".into(), "label".into()];
        header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
        header.extend(FEATURE_NAMES.iter().map(|s| format!("present_{s}")));
        w.write_record(&header).map_err(err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.user_id.clone(),
                r.t_anc.to_string(),
                r.label.as_str().to_string(),
            ];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.extend(
                r.present
                    .iter()
                    .map(|p| if *p { "1" } else { "0" }.to_string()),
            );
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut expected = vec!["user_id".to_string(), "t_anc_ms".into(), "label".into()];
        expected.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
        expected.extend(FEATURE_NAMES.iter().map(|s| format!("present_{s}")));
        if header != expected {
            return Err(Error::Header {
                path: path.to_path_buf(),
                found: header,
                expected,
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = |what: String| Error::Invalid(format!("{}: {what}", path.display()));
            let t_anc = rec[1]
                .parse()
                .map_err(|_| bad(format!("bad t_anc_ms {:?}", &rec[1])))?;
            let label = rec[2].parse::<Label>().map_err(bad)?;
            let mut values = Vec::with_capacity(N_FEATURES);
            let mut present = Vec::with_capacity(N_FEATURES);
            for j in 0..N_FEATURES {
                let v: f64 = rec[3 + j].parse().map_err(|_| {
                    bad(format!(
                        "bad value {:?} for {}",
                        &rec[3 + j],
                        FEATURE_NAMES[j]
                    ))
                })?;
                values.push(v);
                present.push(&rec[3 + N_FEATURES + j] == "1");
            }
            rows.push(FeatureVector {
                user_id: rec[0].to_string(),
                t_anc,
                label,
                values,
                present,
            });
        }
        Ok(FeatureTable { rows })
    }
}

/// Featurize every event and impute missing values with the table-wide present mean.
///
/// Rows come back in event-set order. Users without a bundle get all
/// sensor features marked missing.
pub fn featurize_all(
    bundles: &BTreeMap<String, SensorBundle>,
    events: &EventSet,
    manifest: &AppManifest,
    tz_offsets: &BTreeMap<String, i32>,
    exec: Execution,
) -> FeatureTable {
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in events.events.iter().enumerate() {
        by_user.entry(e.user_id.as_str()).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = by_user.into_iter().collect();
    let empty = SensorBundle::default();
    let per_user = exec.map(&groups, |(user, idx)| {
        let bundle = bundles.get(*user).unwrap_or(&empty);
        let tz = tz_offsets.get(*user).copied().unwrap_or(0);
        let f = UserFeaturizer::new(bundle, tz);
        idx.iter()
            .map(|&i| (i, f.featurize(&events.events[i], manifest)))
            .collect::<Vec<_>>()
    });
    let mut slots: Vec<Option<FeatureVector>> = vec![None; events.events.len()];
    for (i, fv) in per_user.into_iter().flatten() {
        slots[i] = Some(fv);
    }
    let mut table = FeatureTable {
        rows: slots
            .into_iter()
            .map(|s| s.expect("every event featurized"))
            .collect(),
    };
    let all: Vec<usize> = (0..table.len()).collect();
    let means = table.present_means(&all);
    table.impute_with(&means);
    debug_assert!(table.rows.iter().all(|r| (0..N_FEATURES)
        .filter(|&j| is_binary(j))
        .all(|j| !r.present[j] || r.values[j] == 0.0 || r.values[j] == 1.0)));
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AccelSample;
    use approx::assert_relative_eq;

    const MIN: i64 = MS_PER_MINUTE;

    fn event(t_anc: Timestamp) -> EventRecord {
        EventRecord {
            user_id: "u".into(),
            t_anc,
            label: Label::Eating,
            x_half_min: 30,
            source_report: None,
        }
    }

    #[test]
    fn rg_of_identical_fixes_is_zero() {
        assert_eq!(radius_of_gyration(&[(46.5, 6.6); 5]), Some(0.0));
        assert_eq!(radius_of_gyration(&[]), None);
    }

    #[test]
    fn rg_of_equatorial_pair_is_half_distance() {
        let d = haversine_km((0.0, 0.0), (0.0, 0.01));
        assert_relative_eq!(d, 1.11196, epsilon = 1e-4);
        let rg = radius_of_gyration(&[(0.0, 0.0), (0.0, 0.01)]).unwrap();
        assert_relative_eq!(rg, 0.556, epsilon = 1e-3);
        assert_relative_eq!(rg, d / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn rg_uses_multiset_semantics() {
        let a = radius_of_gyration(&[(0.0, 0.0), (0.0, 0.01)]).unwrap();
        let b = radius_of_gyration(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.01)]).unwrap();
        assert!((a - b).abs() > 1e-6);
    }

    fn bundle_with(samples: &[(i64, f64, f64, f64)]) -> SensorBundle {
        let mut b = SensorBundle::new("u");
        b.accel = samples
            .iter()
            .map(|&(ts, x, y, z)| AccelSample { ts, x, y, z })
            .collect();
        b
    }

    #[test]
    fn constant_bin() {
        let b = bundle_with(&[(0, 1.0, -2.0, 3.0), (MIN, 1.0, -2.0, 3.0)]);
        let day = accel_bins(&b, 0, 0);
        assert_eq!(day.len(), BINS_PER_DAY);
        assert_eq!(day[0].unwrap().values(), [1.0, -2.0, 3.0, 1.0, 2.0, 3.0]);
        assert!(day[1].is_none());
    }

    #[test]
    fn signed_and_absolute_means_differ() {
        let b = bundle_with(&[(0, -1.0, 0.0, 0.0), (MIN, 1.0, 0.0, 0.0)]);
        let bin = accel_bins(&b, 0, 0)[0].unwrap();
        assert_eq!(bin.mean[0], 0.0);
        assert_eq!(bin.mean_abs[0], 1.0);
    }

    #[test]
    fn before_after_split() {
        let mut s = Vec::new();
        for m in 0..30 {
            s.push((m * MIN, 1.0, 1.0, 1.0));
        }
        for m in 30..60 {
            s.push((m * MIN, 3.0, 3.0, 3.0));
        }
        let bins = AccelBins::build(&bundle_with(&s), 0);
        let f = accel_features(&bins, 30 * MIN, 30);
        assert_eq!(f[0], Some(2.0));
        assert_eq!(f[6], Some(1.0));
        assert_eq!(f[12], Some(3.0));
        assert_eq!(f[3], Some(2.0));
    }

    #[test]
    fn all_bins_missing_gives_all_missing() {
        let bins = AccelBins::build(&bundle_with(&[(500 * MIN, 1.0, 1.0, 1.0)]), 0);
        assert!(accel_features(&bins, 30 * MIN, 30)
            .iter()
            .all(Option::is_none));
    }

    #[test]
    fn timezone_shifts_bins() {
        let b = bundle_with(&[(0, 5.0, 5.0, 5.0)]);
        // UTC midnight is 18:00 local at -360 minutes: bin 108 of the previous day.
        let day = accel_bins(&b, -360, -1);
        assert!(day[108].is_some());
    }

    #[test]
    fn top_apps_ranks_and_breaks_ties() {
        let ev = |p: &str| AppEvent {
            ts: 0,
            package: p.into(),
        };
        let events: Vec<AppEvent> = ["a", "a", "a", "a", "a", "b", "b", "b", "c"]
            .iter()
            .map(|p| ev(p))
            .collect();
        assert_eq!(AppManifest::top_apps(&events, 2).packages, ["a", "b"]);
        let events = vec![ev("b"), ev("a"), ev("b"), ev("a")];
        assert_eq!(AppManifest::top_apps(&events, 1).packages, ["a"]);
        assert_eq!(AppManifest::top_apps(&events, 10).packages.len(), 2);
    }

    #[test]
    fn known_packages_land_in_their_columns() {
        let m = AppManifest {
            packages: vec![
                "com.whatsapp".into(),
                "org.other".into(),
                "com.facebook.katana".into(),
            ],
        };
        let cols = m.column_packages();
        assert_eq!(cols[0], Some("com.facebook.katana"));
        assert_eq!(cols[1], Some("com.whatsapp"));
        assert_eq!(cols[2], Some("org.other"));
        assert_eq!(cols[3], None);
    }

    #[test]
    fn app_binary_window() {
        let m = AppManifest {
            packages: vec!["com.facebook.katana".into(), "com.whatsapp".into()],
        };
        let events = vec![AppEvent {
            ts: 65 * MIN,
            package: "com.whatsapp".into(),
        }];
        let f = app_features(&events, 30 * MIN, 90 * MIN, &m);
        assert_eq!(f[1], 1.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn battery_counts() {
        let r = |ts| BatteryReading {
            ts,
            level: 80.0,
            charging: true,
            source: PowerSource::Ac,
        };
        let f = bat_features(&[r(0), r(10 * MIN), r(20 * MIN)], 0, 60 * MIN).unwrap();
        assert_eq!(f, [80.0, 3.0, 0.0, 3.0, 0.0, 0.0]);
        assert!(bat_features(&[], 0, 60 * MIN).is_none());
    }

    #[test]
    fn screen_counts() {
        let e = |ts, state| ScreenEvent { ts, state };
        let ev = [
            e(0, ScreenState::On),
            e(5, ScreenState::Off),
            e(6, ScreenState::On),
            e(100, ScreenState::Off),
        ];
        assert_eq!(scr_features(&ev, 0, 50), [2.0, 1.0]);
    }

    #[test]
    fn time_of_tuesday_evening() {
        // 2019-10-01 was a Tuesday; 19:15 local at UTC-6 is 01:15 UTC the next day.
        let local = (18_170 * 1440 + 19 * 60 + 15) * MIN;
        let utc = local + 360 * MIN;
        assert_eq!(time_features(utc, -360), [19.0, 1155.0, 0.0]);
        // Saturday 2019-10-05.
        let sat = (18_174 * 1440 + 60) * MIN;
        assert_eq!(time_features(sat, 0)[2], 1.0);
    }

    #[test]
    fn event_without_fixes_misses_rg() {
        let b = bundle_with(&[(0, 1.0, 1.0, 1.0)]);
        let fv = featurize_event(&b, &event(10 * MIN), &AppManifest::default(), 0);
        assert_eq!(fv.values.len(), N_FEATURES);
        assert!(!fv.present[0]);
        assert!(fv.present[1]);
        assert!(fv.present[37] && fv.present[38] && fv.present[39]);
    }

    #[test]
    fn imputation_uses_present_mean() {
        let mk = |v: Option<f64>| {
            let mut fv = FeatureVector::empty(&event(0));
            for j in 0..N_FEATURES {
                fv.set(j, Some(1.0));
            }
            fv.values[0] = v.unwrap_or(f64::NAN);
            fv.present[0] = v.is_some();
            fv
        };
        let mut t = FeatureTable {
            rows: vec![mk(Some(2.0)), mk(Some(4.0)), mk(None)],
        };
        let means = t.present_means(&[0, 1, 2]);
        t.impute_with(&means);
        assert_eq!(t.rows[2].values[0], 3.0);
        assert!(!t.rows[2].present[0]);
    }
}
