//! Cohort-directory extraction: read the per-participant stream files
//! named by `manifest.json`, align and segment them into trips, detect
//! events, and assemble DBI records grouped by calendar quarter.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dbi::{build_records, DbiRecord, RecordContext, TimeWindows};
use crate::events::detect_events;
use crate::imu::{ImuRecord, VoltageRecord};
use crate::nmea::{GpsFix, NmeaError};
use crate::obd::{ObdError, ObdReading};
use crate::synth::CohortManifest;
use crate::trip::{segment_trips, trip_kinematics, Trip};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse manifest {path}: {source}")]
    Manifest {
        path: String,
        source: serde_json::Error,
    },
    #[error("no trips extracted")]
    NoTrips,
}

/// Skipped-line counts per stream kind, summed over all files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseQuality {
    pub nmea_lines: u64,
    pub nmea_ok: u64,
    pub nmea_checksum_errors: u64,
    pub nmea_unsupported: u64,
    pub nmea_field_errors: u64,
    pub obd_lines: u64,
    pub obd_ok: u64,
    pub obd_frame_errors: u64,
    pub obd_unsupported_pids: u64,
    pub imu_lines: u64,
    pub imu_ok: u64,
    pub imu_field_errors: u64,
    pub singleton_trips_dropped: u64,
}

impl ParseQuality {
    pub fn skipped(&self) -> u64 {
        self.nmea_checksum_errors
            + self.nmea_unsupported
            + self.nmea_field_errors
            + self.obd_frame_errors
            + self.obd_unsupported_pids
            + self.imu_field_errors
    }

    fn absorb(&mut self, other: &ParseQuality) {
        self.nmea_lines += other.nmea_lines;
        self.nmea_ok += other.nmea_ok;
        self.nmea_checksum_errors += other.nmea_checksum_errors;
        self.nmea_unsupported += other.nmea_unsupported;
        self.nmea_field_errors += other.nmea_field_errors;
        self.obd_lines += other.obd_lines;
        self.obd_ok += other.obd_ok;
        self.obd_frame_errors += other.obd_frame_errors;
        self.obd_unsupported_pids += other.obd_unsupported_pids;
        self.imu_lines += other.imu_lines;
        self.imu_ok += other.imu_ok;
        self.imu_field_errors += other.imu_field_errors;
        self.singleton_trips_dropped += other.singleton_trips_dropped;
    }
}

/// Read a `.nmea` file. GGA sentences inherit the date of the most recent
/// RMC sentence (rolling over midnight when the clock wraps); fixes come
/// back time-sorted.
pub fn read_nmea_file(path: &Path, quality: &mut ParseQuality) -> Result<Vec<GpsFix>, ExtractError> {
    let text = read_text(path)?;
    let mut fixes = Vec::new();
    let mut date_hint: Option<NaiveDate> = None;
    let mut last_rmc_time: Option<chrono::NaiveTime> = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        quality.nmea_lines += 1;
        match crate::nmea::parse_nmea_dated(line, effective_date(date_hint, last_rmc_time, line)) {
            Ok(fix) => {
                if fix.speed_kmh.is_some() {
                    // RMC carries the date; remember it for following GGA
                    date_hint = Some(fix.timestamp.date_naive());
                    last_rmc_time = Some(fix.timestamp.time());
                }
                quality.nmea_ok += 1;
                fixes.push(fix);
            }
            Err(NmeaError::Checksum { .. }) => quality.nmea_checksum_errors += 1,
            Err(NmeaError::Unsupported(_)) => quality.nmea_unsupported += 1,
            Err(NmeaError::Field { .. }) => quality.nmea_field_errors += 1,
        }
    }
    fixes.sort_by_key(|f| f.timestamp);
    Ok(fixes)
}

/// A GGA sentence whose time is far earlier than the last RMC time most
/// likely crossed midnight; advance the date hint by one day.
fn effective_date(
    date_hint: Option<NaiveDate>,
    last_rmc_time: Option<chrono::NaiveTime>,
    line: &str,
) -> Option<NaiveDate> {
    let date = date_hint?;
    let talker = line.split(',').next()?;
    if !talker.ends_with("GGA") {
        return Some(date);
    }
    let time_field = line.split(',').nth(1)?;
    let hour: u32 = time_field.get(0..2)?.parse().ok()?;
    if let Some(last) = last_rmc_time {
        if (last.hour() as i32 - hour as i32) > 12 {
            return Some(date + Duration::days(1));
        }
    }
    Some(date)
}

pub fn read_obd_file(path: &Path, quality: &mut ParseQuality) -> Result<Vec<ObdReading>, ExtractError> {
    let text = read_text(path)?;
    let mut readings = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        quality.obd_lines += 1;
        match crate::obd::parse_obd(line) {
            Ok(r) => {
                quality.obd_ok += 1;
                readings.push(r);
            }
            Err(ObdError::Frame(_)) => quality.obd_frame_errors += 1,
            Err(ObdError::UnsupportedPid(_)) => quality.obd_unsupported_pids += 1,
        }
    }
    readings.sort_by_key(|r| r.timestamp);
    Ok(readings)
}

pub fn read_imu_file(path: &Path, quality: &mut ParseQuality) -> Result<Vec<ImuRecord>, ExtractError> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("timestamp_ms") {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        quality.imu_lines += 1;
        match crate::imu::parse_imu_line(line) {
            Ok(r) => {
                quality.imu_ok += 1;
                records.push(r);
            }
            Err(_) => quality.imu_field_errors += 1,
        }
    }
    records.sort_by_key(|r| r.timestamp);
    Ok(records)
}

fn read_text(path: &Path) -> Result<String, ExtractError> {
    std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub gap_s: f64,
    pub harsh_threshold_ms2: f64,
    pub urban_limit_km: f64,
    /// None: use the cohort's own offset from the manifest.
    pub utc_offset_hours: Option<i32>,
    pub windows: TimeWindows,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            gap_s: crate::trip::DEFAULT_TRIP_GAP_S,
            harsh_threshold_ms2: crate::events::HARSH_THRESHOLD_MS2,
            urban_limit_km: crate::dbi::URBAN_LIMIT_KM,
            utc_offset_hours: None,
            windows: TimeWindows::default(),
        }
    }
}

/// Per-trip summary emitted as one JSON object per line (`trips.jsonl`)
/// for inspection and for the report stage, which needs start times the
/// feature rows do not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripMeta {
    pub trip_id: String,
    pub participant_id: String,
    pub start_utc: DateTime<Utc>,
    /// Minute of the cohort-local day at trip start.
    pub start_local_minute: u32,
    pub quarter: String,
    pub duration_s: f64,
    pub distance_km: Option<f64>,
    pub mean_speed_kmh: Option<f64>,
    pub mean_rpm: Option<f64>,
    pub n_samples: usize,
    pub n_harsh_accel: u32,
    pub n_hard_brake: u32,
    pub n_hard_turn: u32,
}

#[derive(Debug)]
pub struct ExtractOutput {
    pub records: Vec<DbiRecord>,
    pub trips: Vec<TripMeta>,
    pub quality: ParseQuality,
}

fn quarter_of(start: DateTime<Utc>, utc_offset_hours: i32) -> String {
    let local = start + Duration::hours(utc_offset_hours as i64);
    format!("{}Q{}", local.year(), (local.month() - 1) / 3 + 1)
}

/// Run the full extraction over a cohort directory containing
/// `manifest.json` and the stream files it names.
pub fn extract_cohort(data_dir: &Path, config: &ExtractConfig) -> Result<ExtractOutput, ExtractError> {
    let manifest_path = data_dir.join("manifest.json");
    let manifest: CohortManifest =
        serde_json::from_str(&read_text(&manifest_path)?).map_err(|source| ExtractError::Manifest {
            path: manifest_path.display().to_string(),
            source,
        })?;
    let offset = config.utc_offset_hours.unwrap_or(manifest.spec.utc_offset_hours);
    let ctx = RecordContext {
        windows: config.windows.clone(),
        utc_offset_hours: offset,
        urban_limit_km: config.urban_limit_km,
    };

    let mut quality = ParseQuality::default();
    let mut records = Vec::new();
    let mut metas = Vec::new();
    for p in &manifest.participants {
        let mut q = ParseQuality::default();
        let gps = read_nmea_file(&data_dir.join(&p.files.nmea), &mut q)?;
        let obd = read_obd_file(&data_dir.join(&p.files.obd), &mut q)?;
        let imu = read_imu_file(&data_dir.join(&p.files.imu), &mut q)?;
        let samples = crate::trip::align_streams(gps, obd, imu, Vec::<VoltageRecord>::new());
        let segmentation = segment_trips(&p.id, samples, config.gap_s);
        q.singleton_trips_dropped = segmentation.singletons_dropped as u64;
        quality.absorb(&q);

        let mut trips: Vec<Trip> = segmentation.trips;
        for trip in trips.iter_mut() {
            trip_kinematics(trip);
            let series: Vec<(DateTime<Utc>, [f64; 3])> = trip
                .samples
                .iter()
                .filter_map(|s| s.accel.map(|a| (s.timestamp, a)))
                .collect();
            trip.events = detect_events(&series, config.harsh_threshold_ms2);
        }

        // group by quarter of the local start time
        let mut by_quarter: BTreeMap<String, Vec<Trip>> = BTreeMap::new();
        for trip in trips {
            by_quarter.entry(quarter_of(trip.start, offset)).or_default().push(trip);
        }
        for (quarter, group) in by_quarter {
            records.extend(build_records(&group, &p.demographics, &quarter, &ctx));
            for t in &group {
                metas.push(TripMeta {
                    trip_id: t.trip_id.clone(),
                    participant_id: t.participant_id.clone(),
                    start_utc: t.start,
                    start_local_minute: ctx.local_minute(t.start),
                    quarter: quarter.clone(),
                    duration_s: t.duration_s,
                    distance_km: t.distance_km,
                    mean_speed_kmh: t.mean_speed_kmh,
                    mean_rpm: t.mean_rpm,
                    n_samples: t.samples.len(),
                    n_harsh_accel: t.events.iter().filter(|e| e.kind == crate::events::EventKind::HarshAcceleration).count() as u32,
                    n_hard_brake: t.events.iter().filter(|e| e.kind == crate::events::EventKind::HardBraking).count() as u32,
                    n_hard_turn: t.events.iter().filter(|e| e.kind == crate::events::EventKind::HardTurn).count() as u32,
                });
            }
        }
    }
    if records.is_empty() {
        return Err(ExtractError::NoTrips);
    }
    metas.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    Ok(ExtractOutput {
        records,
        trips: metas,
        quality,
    })
}
