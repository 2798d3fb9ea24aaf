//! Driver Behavior Indexes: trip classification by wall-clock window and
//! distance, and assembly of the 19-column feature rows.
//!
//! Row unit: one row per trip. Trip-count features (total/night/peak/
//! urban/suburb) are participant-period aggregates repeated on every row
//! of that participant-period; per-trip features come from the trip
//! itself; demographics are broadcast; the label is the participant's
//! MCI status.

use chrono::{NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trip::Trip;

/// The seven demographic ("driver") feature columns, in matrix order.
pub const DRIVER_COLUMNS: [&str; 7] = [
    "age",
    "gender",
    "race",
    "ethnicity",
    "education",
    "retired",
    "bmi_obese",
];

/// The twelve behavioral ("driving") feature columns, in matrix order.
pub const DRIVING_COLUMNS: [&str; 12] = [
    "total_trips",
    "night_trips",
    "peak_trips",
    "duration_s",
    "distance_km",
    "speed_kmh",
    "rpm",
    "n_harsh_accel",
    "n_hard_brake",
    "n_hard_turn",
    "urban_trips",
    "suburb_trips",
];

pub const N_FEATURES: usize = 19;

/// All 19 feature columns: driver block then driving block.
pub fn feature_columns() -> Vec<&'static str> {
    DRIVER_COLUMNS.iter().chain(DRIVING_COLUMNS.iter()).copied().collect()
}

/// Trips below this distance are urban, at or above it suburban.
pub const URBAN_LIMIT_KM: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeOfDay {
    Morning,
    Afternoon,
    Evening,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripClass {
    Urban,
    Suburb,
}

/// Wall-clock windows as minutes of day. Defaults: morning [05:00,12:00),
/// afternoon [12:00,17:00), evening [17:00,21:00), night [21:00,05:00)
/// wrapping midnight; peak [07:00,09:00) and [16:00,18:00). All intervals
/// are half-open so the four classes partition the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindows {
    pub morning_start_min: u32,
    pub afternoon_start_min: u32,
    pub evening_start_min: u32,
    pub night_start_min: u32,
    pub peak_windows_min: [(u32, u32); 2],
}

impl Default for TimeWindows {
    fn default() -> Self {
        TimeWindows {
            morning_start_min: 5 * 60,
            afternoon_start_min: 12 * 60,
            evening_start_min: 17 * 60,
            night_start_min: 21 * 60,
            peak_windows_min: [(7 * 60, 9 * 60), (16 * 60, 18 * 60)],
        }
    }
}

impl TimeWindows {
    pub fn validate(&self) -> Result<(), DbiError> {
        let ok = self.morning_start_min < self.afternoon_start_min
            && self.afternoon_start_min < self.evening_start_min
            && self.evening_start_min < self.night_start_min
            && self.night_start_min < 1440
            && self.peak_windows_min.iter().all(|(a, b)| a < b && *b <= 1440);
        if ok {
            Ok(())
        } else {
            Err(DbiError::InvalidWindows)
        }
    }

    pub fn classify_minute(&self, minute: u32) -> TimeOfDay {
        debug_assert!(minute < 1440);
        if minute < self.morning_start_min || minute >= self.night_start_min {
            TimeOfDay::Night
        } else if minute < self.afternoon_start_min {
            TimeOfDay::Morning
        } else if minute < self.evening_start_min {
            TimeOfDay::Afternoon
        } else {
            TimeOfDay::Evening
        }
    }

    pub fn is_peak_minute(&self, minute: u32) -> bool {
        self.peak_windows_min.iter().any(|&(a, b)| minute >= a && minute < b)
    }
}

/// Classify a local wall-clock time. Trips are keyed on their start time.
pub fn time_of_day(t: NaiveTime, windows: &TimeWindows) -> TimeOfDay {
    windows.classify_minute(t.hour() * 60 + t.minute())
}

/// Peak-hour test for a local wall-clock time, keyed on trip start.
pub fn is_peak(t: NaiveTime, windows: &TimeWindows) -> bool {
    windows.is_peak_minute(t.hour() * 60 + t.minute())
}

/// Urban below the limit, suburban at or above it.
pub fn distance_class(distance_km: f64) -> TripClass {
    distance_class_with(distance_km, URBAN_LIMIT_KM)
}

pub fn distance_class_with(distance_km: f64, limit_km: f64) -> TripClass {
    if distance_km < limit_km {
        TripClass::Urban
    } else {
        TripClass::Suburb
    }
}

/// Participant demographics and MCI label. Codes follow the cohort
/// intake form: race and ethnicity 1-6, education 1-10 (grade school up
/// to doctoral degree), gender 1 male / 2 female.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: u32,
    pub gender: u8,
    pub race: u8,
    pub ethnicity: u8,
    pub education: u8,
    pub retired: u8,
    pub bmi_obese: u8,
    pub mci: u8,
}

impl Demographics {
    pub fn validate(&self) -> Result<(), DbiError> {
        let ok = self.age >= 65
            && (1..=2).contains(&self.gender)
            && (1..=6).contains(&self.race)
            && (1..=6).contains(&self.ethnicity)
            && (1..=10).contains(&self.education)
            && self.retired <= 1
            && self.bmi_obese <= 1
            && self.mci <= 1;
        if ok {
            Ok(())
        } else {
            Err(DbiError::InvalidDemographics)
        }
    }
}

/// One row of the feature matrix: 7 driver indexes, 12 driving indexes,
/// and the MCI label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbiRecord {
    pub participant_id: String,
    pub period_id: String,
    pub trip_id: String,
    // driver block
    pub age: u32,
    pub gender: u8,
    pub race: u8,
    pub ethnicity: u8,
    pub education: u8,
    pub retired: u8,
    pub bmi_obese: u8,
    // driving block: participant-period counts...
    pub total_trips: u32,
    pub night_trips: u32,
    pub peak_trips: u32,
    // ...then per-trip values
    pub duration_s: f64,
    pub distance_km: f64,
    pub speed_kmh: f64,
    pub rpm: f64,
    pub n_harsh_accel: u32,
    pub n_hard_brake: u32,
    pub n_hard_turn: u32,
    pub urban_trips: u32,
    pub suburb_trips: u32,
    pub mci: u8,
}

impl DbiRecord {
    /// The 19 features in matrix column order.
    pub fn feature_row(&self) -> [f64; N_FEATURES] {
        [
            self.age as f64,
            self.gender as f64,
            self.race as f64,
            self.ethnicity as f64,
            self.education as f64,
            self.retired as f64,
            self.bmi_obese as f64,
            self.total_trips as f64,
            self.night_trips as f64,
            self.peak_trips as f64,
            self.duration_s,
            self.distance_km,
            self.speed_kmh,
            self.rpm,
            self.n_harsh_accel as f64,
            self.n_hard_brake as f64,
            self.n_hard_turn as f64,
            self.urban_trips as f64,
            self.suburb_trips as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DbiError {
    #[error("empty dataset: no records to assemble")]
    EmptyDataset,
    #[error("demographics outside the cohort ranges")]
    InvalidDemographics,
    #[error("time windows do not form a partition of the day")]
    InvalidWindows,
}

/// Everything `build_records` needs besides the trips themselves.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub windows: TimeWindows,
    /// Fixed cohort-local offset from UTC, hours (default -5).
    pub utc_offset_hours: i32,
    pub urban_limit_km: f64,
}

impl Default for RecordContext {
    fn default() -> Self {
        RecordContext {
            windows: TimeWindows::default(),
            utc_offset_hours: -5,
            urban_limit_km: URBAN_LIMIT_KM,
        }
    }
}

impl RecordContext {
    pub fn local_minute(&self, t: chrono::DateTime<chrono::Utc>) -> u32 {
        let local = t + chrono::Duration::hours(self.utc_offset_hours as i64);
        local.time().hour() * 60 + local.time().minute()
    }
}

/// Build one record per trip for a single participant-period. Counts are
/// aggregated over the supplied trips and broadcast onto every row; rows
/// are ordered by trip id so the output is independent of input order.
pub fn build_records(
    trips: &[Trip],
    demo: &Demographics,
    period_id: &str,
    ctx: &RecordContext,
) -> Vec<DbiRecord> {
    use crate::events::EventKind;

    let mut sorted: Vec<&Trip> = trips.iter().collect();
    sorted.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));

    let total = sorted.len() as u32;
    let mut night = 0u32;
    let mut peak = 0u32;
    let mut urban = 0u32;
    for t in &sorted {
        let minute = ctx.local_minute(t.start);
        if ctx.windows.classify_minute(minute) == TimeOfDay::Night {
            night += 1;
        }
        if ctx.windows.is_peak_minute(minute) {
            peak += 1;
        }
        // absent kinematics still count, as urban (distance 0)
        if distance_class_with(t.distance_km.unwrap_or(0.0), ctx.urban_limit_km) == TripClass::Urban {
            urban += 1;
        }
    }
    let suburb = total - urban;
    debug_assert!(night <= total && peak <= total);

    sorted
        .into_iter()
        .map(|t| {
            let count = |kind: EventKind| t.events.iter().filter(|e| e.kind == kind).count() as u32;
            DbiRecord {
                participant_id: t.participant_id.clone(),
                period_id: period_id.to_string(),
                trip_id: t.trip_id.clone(),
                age: demo.age,
                gender: demo.gender,
                race: demo.race,
                ethnicity: demo.ethnicity,
                education: demo.education,
                retired: demo.retired,
                bmi_obese: demo.bmi_obese,
                total_trips: total,
                night_trips: night,
                peak_trips: peak,
                duration_s: t.duration_s,
                distance_km: t.distance_km.unwrap_or(0.0),
                speed_kmh: t.mean_speed_kmh.unwrap_or(0.0),
                rpm: t.mean_rpm.unwrap_or(0.0),
                n_harsh_accel: count(EventKind::HarshAcceleration),
                n_hard_brake: count(EventKind::HardBraking),
                n_hard_turn: count(EventKind::HardTurn),
                urban_trips: urban,
                suburb_trips: suburb,
                mci: demo.mci,
            }
        })
        .collect()
}

/// Row identity carried alongside the matrix so splits can be grouped by
/// participant and outputs can name their rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowKey {
    pub participant_id: String,
    pub period_id: String,
    pub trip_id: String,
}

/// X in R^{m x n} with the label vector and the column-name manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub keys: Vec<RowKey>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// New matrix restricted to the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> FeatureMatrix {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).unwrap_or_else(|| panic!("unknown column {n}")))
            .collect();
        FeatureMatrix {
            column_names: names.iter().map(|s| s.to_string()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            labels: self.labels.clone(),
            keys: self.keys.clone(),
        }
    }
}

/// Assemble the matrix from records, in record order.
pub fn build_matrix(records: &[DbiRecord]) -> Result<FeatureMatrix, DbiError> {
    if records.is_empty() {
        return Err(DbiError::EmptyDataset);
    }
    Ok(FeatureMatrix {
        column_names: feature_columns().iter().map(|s| s.to_string()).collect(),
        rows: records.iter().map(|r| r.feature_row().to_vec()).collect(),
        labels: records.iter().map(|r| r.mci).collect(),
        keys: records
            .iter()
            .map(|r| RowKey {
                participant_id: r.participant_id.clone(),
                period_id: r.period_id.clone(),
                trip_id: r.trip_id.clone(),
            })
            .collect(),
    })
}
