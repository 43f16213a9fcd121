//! Raw sensor streams and self-reports: parsing, validation, serialization.
//!
//! Every file is a UTF-8 CSV with a header row. Malformed rows are skipped
//! and collected into an [`IngestReport`]; only unreadable files or a wrong
//! header abort parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Timestamp, MS_PER_MINUTE};

pub const ACCEL_FILE: &str = "accel.csv";
pub const LOCATION_FILE: &str = "location.csv";
pub const APPS_FILE: &str = "apps.csv";
pub const SCREEN_FILE: &str = "screen.csv";
pub const BATTERY_FILE: &str = "battery.csv";
pub const REPORTS_FILE: &str = "reports.csv";

const ACCEL_HEADER: &[&str] = &["user_id", "ts_ms", "x", "y", "z"];
const LOCATION_HEADER: &[&str] = &["user_id", "ts_ms", "lat", "lon"];
const APPS_HEADER: &[&str] = &["user_id", "ts_ms", "package"];
const SCREEN_HEADER: &[&str] = &["user_id", "ts_ms", "state"];
const BATTERY_HEADER: &[&str] = &["user_id", "ts_ms", "level", "charging", "source"];
const REPORTS_HEADER: &[&str] = &["user_id", "ts_ms", "case", "bucket", "tz_offset_min"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub ts: Timestamp,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationFix {
    pub ts: Timestamp,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppEvent {
    pub ts: Timestamp,
    pub package: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenState {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenEvent {
    pub ts: Timestamp,
    pub state: ScreenState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerSource {
    Ac,
    Usb,
    Unknown,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReading {
    pub ts: Timestamp,
    pub level: f64,
    pub charging: bool,
    pub source: PowerSource,
}

/// All raw streams of one user, each sorted by timestamp.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorBundle {
    pub user_id: String,
    pub accel: Vec<AccelSample>,
    pub locations: Vec<LocationFix>,
    pub app_events: Vec<AppEvent>,
    pub screen_events: Vec<ScreenEvent>,
    pub battery: Vec<BatteryReading>,
}

impl SensorBundle {
    pub fn new(user_id: impl Into<String>) -> Self {
        SensorBundle {
            user_id: user_id.into(),
            ..Default::default()
        }
    }

    /// Earliest and latest timestamp over all streams.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        let firsts = [
            self.accel.first().map(|s| s.ts),
            self.locations.first().map(|s| s.ts),
            self.app_events.first().map(|s| s.ts),
            self.screen_events.first().map(|s| s.ts),
            self.battery.first().map(|s| s.ts),
        ];
        let lasts = [
            self.accel.last().map(|s| s.ts),
            self.locations.last().map(|s| s.ts),
            self.app_events.last().map(|s| s.ts),
            self.screen_events.last().map(|s| s.ts),
            self.battery.last().map(|s| s.ts),
        ];
        let lo = firsts.iter().flatten().min()?;
        let hi = lasts.iter().flatten().max()?;
        Some((*lo, *hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntakeCase {
    /// No food intake within the last four hours.
    NoIntake,
    OneIntake,
    MultiIntake,
}

impl IntakeCase {
    pub fn code(self) -> u8 {
        match self {
            IntakeCase::NoIntake => 1,
            IntakeCase::OneIntake => 2,
            IntakeCase::MultiIntake => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(IntakeCase::NoIntake),
            2 => Some(IntakeCase::OneIntake),
            3 => Some(IntakeCase::MultiIntake),
            _ => None,
        }
    }
}

/// How long ago the last intake happened, in half-hour steps up to four hours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecencyBucket {
    M0To30,
    M31To60,
    M60To90,
    M90To120,
    M120To150,
    M150To180,
    M180To210,
    M210To240,
}

impl RecencyBucket {
    pub const ALL: [RecencyBucket; 8] = [
        RecencyBucket::M0To30,
        RecencyBucket::M31To60,
        RecencyBucket::M60To90,
        RecencyBucket::M90To120,
        RecencyBucket::M120To150,
        RecencyBucket::M150To180,
        RecencyBucket::M180To210,
        RecencyBucket::M210To240,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecencyBucket::M0To30 => "0-30",
            RecencyBucket::M31To60 => "31-60",
            RecencyBucket::M60To90 => "60-90",
            RecencyBucket::M90To120 => "90-120",
            RecencyBucket::M120To150 => "120-150",
            RecencyBucket::M150To180 => "150-180",
            RecencyBucket::M180To210 => "180-210",
            RecencyBucket::M210To240 => "210-240",
        }
    }

    /// Bucket bounds in minutes on the half-hour grid: "31-60" spans 30..60.
    pub fn bounds_minutes(self) -> (i64, i64) {
        let lo = 30 * self.index() as i64;
        (lo, lo + 30)
    }

    pub fn midpoint_minutes(self) -> i64 {
        let (lo, hi) = self.bounds_minutes();
        (lo + hi) / 2
    }

    /// Bucket containing an intake `minutes` before the report.
    pub fn containing(minutes: f64) -> Option<Self> {
        if !(0.0..240.0).contains(&minutes) {
            return None;
        }
        Some(Self::ALL[(minutes / 30.0).floor() as usize])
    }
}

impl fmt::Display for RecencyBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecencyBucket {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| format!("unknown recency bucket {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfReport {
    pub user_id: String,
    pub ts: Timestamp,
    pub case: IntakeCase,
    pub bucket: Option<RecencyBucket>,
    pub tz_offset_min: i32,
}

impl SelfReport {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match (self.case, self.bucket) {
            (IntakeCase::NoIntake, Some(b)) => {
                Err(format!("case 1 report must not carry a bucket, got {b}"))
            }
            (IntakeCase::NoIntake, None) => Ok(()),
            (_, None) => Err("case 2/3 report requires a recency bucket".into()),
            (_, Some(_)) => Ok(()),
        }
    }

    pub fn local_ts(&self, ts: Timestamp) -> Timestamp {
        ts + i64::from(self.tz_offset_min) * MS_PER_MINUTE
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub file: String,
    /// 1-based line number, header is line 1.
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileTally {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Accepted rows later dropped as same-timestamp duplicates.
    pub duplicates: usize,
    pub missing: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: BTreeMap<String, FileTally>,
    pub errors: Vec<RowError>,
}

impl IngestReport {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }

    fn merge(&mut self, other: IngestReport) {
        self.files.extend(other.files);
        self.errors.extend(other.errors);
    }
}

type RowResult<T> = std::result::Result<T, String>;

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_num<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> RowResult<T> {
    let raw = field(rec, i);
    raw.parse()
        .map_err(|_| format!("{name}: cannot parse {raw:?}"))
}

fn parse_finite(rec: &csv::StringRecord, i: usize, name: &str) -> RowResult<f64> {
    let v: f64 = parse_num(rec, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name}: non-finite value"))
    }
}

/// Parse a coordinate keeping only its first four decimals (truncation, not rounding).
///
/// Truncation happens on the decimal text so values like `0.0003` survive exactly.
pub fn parse_truncated_coordinate(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    let v: f64 = raw.parse().ok()?;
    if !v.is_finite() {
        return None;
    }
    if raw.contains(['e', 'E']) {
        return Some(truncate_coordinate(v));
    }
    let cut = match raw.find('.') {
        Some(dot) => &raw[..raw.len().min(dot + 5)],
        None => raw,
    };
    cut.parse().ok()
}

/// Numeric fallback of [`parse_truncated_coordinate`].
pub fn truncate_coordinate(v: f64) -> f64 {
    let text = format!("{v:.12}");
    parse_truncated_coordinate(&text).unwrap_or(v)
}

struct CsvRows {
    path: PathBuf,
    name: String,
    missing: bool,
    records: Vec<(u64, csv::StringRecord)>,
}

fn read_csv(path: &Path, header: &[&str], allow_missing: bool) -> Result<CsvRows> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if allow_missing && !path.exists() {
        return Ok(CsvRows {
            path: path.to_path_buf(),
            name,
            missing: true,
            records: Vec::new(),
        });
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != header {
        return Err(Error::Header {
            path: path.to_path_buf(),
            found,
            expected: header.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        records.push((line, rec));
    }
    Ok(CsvRows {
        path: path.to_path_buf(),
        name,
        missing: false,
        records,
    })
}

/// Parse every record, grouping accepted rows per user; returns rows in file order.
fn parse_rows<T>(
    rows: CsvRows,
    width: usize,
    report: &mut IngestReport,
    parse: impl Fn(&csv::StringRecord) -> RowResult<T>,
) -> BTreeMap<String, Vec<(Timestamp, T)>> {
    let mut tally = FileTally {
        rows: rows.records.len(),
        missing: rows.missing,
        ..Default::default()
    };
    let mut out: BTreeMap<String, Vec<(Timestamp, T)>> = BTreeMap::new();
    for (line, rec) in rows.records {
        let parsed = if rec.len() != width {
            Err(format!("expected {width} fields, found {}", rec.len()))
        } else {
            let user = field(&rec, 0);
            if user.is_empty() {
                Err("empty user_id".to_string())
            } else {
                parse_num::<Timestamp>(&rec, 1, "ts_ms")
                    .and_then(|ts| parse(&rec).map(|v| (user.to_string(), ts, v)))
            }
        };
        match parsed {
            Ok((user, ts, v)) => {
                tally.accepted += 1;
                out.entry(user).or_default().push((ts, v));
            }
            Err(message) => {
                tally.rejected += 1;
                report.errors.push(RowError {
                    file: rows.name.clone(),
                    line,
                    message,
                });
            }
        }
    }
    for stream in out.values_mut() {
        let before = stream.len();
        sort_dedup(stream);
        tally.duplicates += before - stream.len();
    }
    log::debug!("{}: {:?}", rows.path.display(), tally);
    report.files.insert(rows.name, tally);
    out
}

/// Stable sort by timestamp, then keep the first row of each timestamp.
fn sort_dedup<T>(stream: &mut Vec<(Timestamp, T)>) {
    stream.sort_by_key(|(ts, _)| *ts);
    stream.dedup_by_key(|(ts, _)| *ts);
}

fn parse_state(raw: &str) -> RowResult<ScreenState> {
    match raw.to_ascii_lowercase().as_str() {
        "on" => Ok(ScreenState::On),
        "off" => Ok(ScreenState::Off),
        _ => Err(format!("state: unknown screen state {raw:?}")),
    }
}

fn parse_bool(raw: &str) -> RowResult<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(format!("charging: cannot parse {raw:?}")),
    }
}

fn parse_source(raw: &str) -> RowResult<PowerSource> {
    match raw.to_ascii_lowercase().as_str() {
        "ac" => Ok(PowerSource::Ac),
        "usb" => Ok(PowerSource::Usb),
        "unknown" => Ok(PowerSource::Unknown),
        "none" | "" => Ok(PowerSource::None),
        _ => Err(format!("source: unknown power source {raw:?}")),
    }
}

impl PowerSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerSource::Ac => "ac",
            PowerSource::Usb => "usb",
            PowerSource::Unknown => "unknown",
            PowerSource::None => "none",
        }
    }
}

impl ScreenState {
    pub fn as_str(self) -> &'static str {
        match self {
            ScreenState::On => "on",
            ScreenState::Off => "off",
        }
    }
}

/// Parse the five sensor files of a directory into one bundle per user.
///
/// A missing sensor file yields empty streams and is flagged in the report.
pub fn parse_sensor_streams(dir: &Path) -> Result<(BTreeMap<String, SensorBundle>, IngestReport)> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut report = IngestReport::default();
    let mut bundles: BTreeMap<String, SensorBundle> = BTreeMap::new();

    let accel = parse_rows(
        read_csv(&dir.join(ACCEL_FILE), ACCEL_HEADER, true)?,
        ACCEL_HEADER.len(),
        &mut report,
        |r| {
            Ok((
                parse_finite(r, 2, "x")?,
                parse_finite(r, 3, "y")?,
                parse_finite(r, 4, "z")?,
            ))
        },
    );
    for (user, rows) in accel {
        bundles
            .entry(user.clone())
            .or_insert_with(|| SensorBundle::new(&user))
            .accel = rows
            .into_iter()
            .map(|(ts, (x, y, z))| AccelSample { ts, x, y, z })
            .collect();
    }

    let locations = parse_rows(
        read_csv(&dir.join(LOCATION_FILE), LOCATION_HEADER, true)?,
        LOCATION_HEADER.len(),
        &mut report,
        |r| {
            let lat = parse_truncated_coordinate(field(r, 2))
                .ok_or_else(|| format!("lat: cannot parse {:?}", field(r, 2)))?;
            let lon = parse_truncated_coordinate(field(r, 3))
                .ok_or_else(|| format!("lon: cannot parse {:?}", field(r, 3)))?;
            if !(-90.0..=90.0).contains(&lat) {
                return Err(format!("lat {lat} outside [-90, 90]"));
            }
            if !(-180.0..=180.0).contains(&lon) {
                return Err(format!("lon {lon} outside [-180, 180]"));
            }
            Ok((lat, lon))
        },
    );
    for (user, rows) in locations {
        bundles
            .entry(user.clone())
            .or_insert_with(|| SensorBundle::new(&user))
            .locations = rows
            .into_iter()
            .map(|(ts, (lat, lon))| LocationFix { ts, lat, lon })
            .collect();
    }

    let apps = parse_rows(
        read_csv(&dir.join(APPS_FILE), APPS_HEADER, true)?,
        APPS_HEADER.len(),
        &mut report,
        |r| {
            let package = field(r, 2);
            if package.is_empty() {
                Err("package: empty".to_string())
            } else {
                Ok(package.to_string())
            }
        },
    );
    for (user, rows) in apps {
        bundles
            .entry(user.clone())
            .or_insert_with(|| SensorBundle::new(&user))
            .app_events = rows
            .into_iter()
            .map(|(ts, package)| AppEvent { ts, package })
            .collect();
    }

    let screen = parse_rows(
        read_csv(&dir.join(SCREEN_FILE), SCREEN_HEADER, true)?,
        SCREEN_HEADER.len(),
        &mut report,
        |r| parse_state(field(r, 2)),
    );
    for (user, rows) in screen {
        bundles
            .entry(user.clone())
            .or_insert_with(|| SensorBundle::new(&user))
            .screen_events = rows
            .into_iter()
            .map(|(ts, state)| ScreenEvent { ts, state })
            .collect();
    }

    let battery = parse_rows(
        read_csv(&dir.join(BATTERY_FILE), BATTERY_HEADER, true)?,
        BATTERY_HEADER.len(),
        &mut report,
        |r| {
            let level = parse_finite(r, 2, "level")?;
            if !(0.0..=100.0).contains(&level) {
                return Err(format!("level {level} outside [0, 100]"));
            }
            Ok((level, parse_bool(field(r, 3))?, parse_source(field(r, 4))?))
        },
    );
    for (user, rows) in battery {
        bundles
            .entry(user.clone())
            .or_insert_with(|| SensorBundle::new(&user))
            .battery = rows
            .into_iter()
            .map(|(ts, (level, charging, source))| BatteryReading {
                ts,
                level,
                charging,
                source,
            })
            .collect();
    }

    Ok((bundles, report))
}

/// Parse `reports.csv` (or any file with the same schema).
///
/// Reports come back sorted by `(user_id, ts)`.
pub fn parse_self_reports(path: &Path) -> Result<(Vec<SelfReport>, IngestReport)> {
    let rows = read_csv(path, REPORTS_HEADER, false)?;
    let mut report = IngestReport::default();
    let parsed = parse_rows(rows, REPORTS_HEADER.len(), &mut report, |r| {
        let code: u8 = parse_num(r, 2, "case")?;
        let case =
            IntakeCase::from_code(code).ok_or_else(|| format!("case: unknown code {code}"))?;
        let raw_bucket = field(r, 3);
        let bucket = if raw_bucket.is_empty() {
            None
        } else {
            Some(raw_bucket.parse::<RecencyBucket>()?)
        };
        let tz_offset_min: i32 = parse_num(r, 4, "tz_offset_min")?;
        let probe = SelfReport {
            user_id: String::new(),
            ts: 0,
            case,
            bucket,
            tz_offset_min,
        };
        probe.validate()?;
        Ok((case, bucket, tz_offset_min))
    });
    let mut reports: Vec<SelfReport> = parsed
        .into_iter()
        .flat_map(|(user, rows)| {
            rows.into_iter()
                .map(move |(ts, (case, bucket, tz_offset_min))| SelfReport {
                    user_id: user.clone(),
                    ts,
                    case,
                    bucket,
                    tz_offset_min,
                })
        })
        .collect();
    reports.sort_by(|a, b| (&a.user_id, a.ts).cmp(&(&b.user_id, b.ts)));
    Ok((reports, report))
}

/// Parse sensors and reports of one data directory.
pub fn parse_dataset(
    dir: &Path,
) -> Result<(
    BTreeMap<String, SensorBundle>,
    Vec<SelfReport>,
    IngestReport,
)> {
    let (bundles, mut report) = parse_sensor_streams(dir)?;
    let (reports, rep2) = parse_self_reports(&dir.join(REPORTS_FILE))?;
    report.merge(rep2);
    Ok((bundles, reports, report))
}

/// Per-user timezone offsets taken from each user's first report.
pub fn timezone_offsets(reports: &[SelfReport]) -> BTreeMap<String, i32> {
    let mut out = BTreeMap::new();
    for r in reports {
        out.entry(r.user_id.clone()).or_insert(r.tz_offset_min);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub from: Timestamp,
    pub to: Timestamp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCoverage {
    pub count: usize,
    pub first: Option<Timestamp>,
    pub last: Option<Timestamp>,
    /// `last - first` in ms; 0 for streams with fewer than two rows.
    pub coverage_ms: i64,
    pub largest_gap_ms: i64,
    /// Gaps longer than the threshold passed to [`validate_bundle_with`].
    pub gaps: Vec<Gap>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub user_id: String,
    pub streams: BTreeMap<String, StreamCoverage>,
}

impl ValidationReport {
    pub fn stream(&self, name: &str) -> &StreamCoverage {
        &self.streams[name]
    }
}

pub const DEFAULT_GAP_THRESHOLD_MS: i64 = 60 * MS_PER_MINUTE;

fn coverage(ts: impl Iterator<Item = Timestamp>, gap_threshold: i64) -> StreamCoverage {
    let mut cov = StreamCoverage::default();
    let mut prev: Option<Timestamp> = None;
    for t in ts {
        cov.count += 1;
        cov.first.get_or_insert(t);
        cov.last = Some(t);
        if let Some(p) = prev {
            let gap = t - p;
            cov.largest_gap_ms = cov.largest_gap_ms.max(gap);
            if gap > gap_threshold {
                cov.gaps.push(Gap { from: p, to: t });
            }
        }
        prev = Some(t);
    }
    if let (Some(a), Some(b)) = (cov.first, cov.last) {
        cov.coverage_ms = b - a;
    }
    cov
}

pub fn validate_bundle(bundle: &SensorBundle) -> ValidationReport {
    validate_bundle_with(bundle, DEFAULT_GAP_THRESHOLD_MS)
}

pub fn validate_bundle_with(bundle: &SensorBundle, gap_threshold_ms: i64) -> ValidationReport {
    let mut streams = BTreeMap::new();
    let g = gap_threshold_ms;
    streams.insert(
        "accel".into(),
        coverage(bundle.accel.iter().map(|s| s.ts), g),
    );
    streams.insert(
        "location".into(),
        coverage(bundle.locations.iter().map(|s| s.ts), g),
    );
    streams.insert(
        "apps".into(),
        coverage(bundle.app_events.iter().map(|s| s.ts), g),
    );
    streams.insert(
        "screen".into(),
        coverage(bundle.screen_events.iter().map(|s| s.ts), g),
    );
    streams.insert(
        "battery".into(),
        coverage(bundle.battery.iter().map(|s| s.ts), g),
    );
    ValidationReport {
        user_id: bundle.user_id.clone(),
        streams,
    }
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    Ok(w)
}

/// Write bundles in the ingest CSV schema; users in map order, rows in stream order.
pub fn write_sensor_streams<'a>(
    dir: &Path,
    bundles: impl IntoIterator<Item = &'a SensorBundle> + Clone,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let wrap = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| Error::csv(&p, e)
    };

    let path = dir.join(ACCEL_FILE);
    let mut w = writer(&path, ACCEL_HEADER)?;
    for b in bundles.clone() {
        for s in &b.accel {
            w.write_record([
                &b.user_id,
                &s.ts.to_string(),
                &s.x.to_string(),
                &s.y.to_string(),
                &s.z.to_string(),
            ])
            .map_err(wrap(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(LOCATION_FILE);
    let mut w = writer(&path, LOCATION_HEADER)?;
    for b in bundles.clone() {
        for s in &b.locations {
            w.write_record([
                &b.user_id,
                &s.ts.to_string(),
                &s.lat.to_string(),
                &s.lon.to_string(),
            ])
            .map_err(wrap(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(APPS_FILE);
    let mut w = writer(&path, APPS_HEADER)?;
    for b in bundles.clone() {
        for s in &b.app_events {
            w.write_record([&b.user_id, &s.ts.to_string(), &s.package])
                .map_err(wrap(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SCREEN_FILE);
    let mut w = writer(&path, SCREEN_HEADER)?;
    for b in bundles.clone() {
        for s in &b.screen_events {
            w.write_record([b.user_id.as_str(), &s.ts.to_string(), s.state.as_str()])
                .map_err(wrap(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(BATTERY_FILE);
    let mut w = writer(&path, BATTERY_HEADER)?;
    for b in bundles {
        for s in &b.battery {
            w.write_record([
                b.user_id.as_str(),
                &s.ts.to_string(),
                &s.level.to_string(),
                if s.charging { "true" } else { "false" },
                s.source.as_str(),
            ])
            .map_err(wrap(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn write_self_reports(path: &Path, reports: &[SelfReport]) -> Result<()> {
    let mut w = writer(path, REPORTS_HEADER)?;
    for r in reports {
        w.write_record([
            r.user_id.as_str(),
            &r.ts.to_string(),
            &r.case.code().to_string(),
            r.bucket.map(|b| b.as_str()).unwrap_or(""),
            &r.tz_offset_min.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
