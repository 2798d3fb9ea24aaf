//! Synthetic cohort generator: demographics plus raw GPS/OBD/IMU stream
//! files in the exact wire formats the parsers consume, with a ground-
//! truth ledger written alongside so pipeline output can be checked
//! against what was actually injected.
//!
//! Trips are straight-line constant-heading paths with per-second speeds
//! from a truncated normal; the bar is exercising the parsers and the
//! index arithmetic, not traffic realism. All draws come from SplitMix64
//! streams derived from the cohort seed, so output is reproducible and
//! per-participant generation can be reordered freely.

mod emit;
mod generate;

pub use emit::{format_imu_row, format_obd_rpm, format_obd_speed, format_rmc, quantize_coord, quantize_4dp};
pub use generate::{generate_cohort, generate_truth, ledger_records, CohortData};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dbi::Demographics;

/// Behavioral parameters for one diagnosis group: group-level means for
/// trip volume, night-trip propensity, and the harsh-event rate, plus
/// mean/std for the speed and engine-speed draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorProfile {
    /// Mean trips per week; ignored when the spec pins
    /// `trips_per_participant`.
    pub trips_per_week: f64,
    /// Probability that a trip starts in the night window.
    pub night_propensity: f64,
    /// Harsh events (all three kinds together) per 100 km driven.
    pub harsh_per_100km: f64,
    /// Per-trip target speed distribution, km/h.
    pub speed_mean_kmh: f64,
    pub speed_sd_kmh: f64,
    /// Per-trip target engine speed distribution, rev/min.
    pub rpm_mean: f64,
    pub rpm_sd: f64,
}

impl Default for BehaviorProfile {
    fn default() -> Self {
        BehaviorProfile {
            trips_per_week: 3.0,
            night_propensity: 0.05,
            harsh_per_100km: 28.0,
            speed_mean_kmh: 26.75,
            speed_sd_kmh: 10.5,
            rpm_mean: 1118.7,
            rpm_sd: 190.0,
        }
    }
}

/// One weighted duration range, seconds. Durations are drawn by picking a
/// bucket by weight and then a uniform integer within it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationBucket {
    pub min_s: u32,
    pub max_s: u32,
    pub weight: f64,
}

/// Relative weights of the three daylight windows for non-night trips.
/// Defaults reproduce the reported trip distribution: with the default
/// night propensity 0.05 the cohort lands on 34.9% morning, 50%
/// afternoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaylightShares {
    pub morning: f64,
    pub afternoon: f64,
    pub evening: f64,
}

impl Default for DaylightShares {
    fn default() -> Self {
        DaylightShares {
            morning: 0.349,
            afternoon: 0.500,
            evening: 0.101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_participants: u32,
    pub mci_fraction: f64,
    pub weeks: u32,
    pub seed: u64,
    /// Exact trips per participant; None derives the count from the
    /// group's `trips_per_week`.
    pub trips_per_participant: Option<u32>,
    /// First day of the observation horizon, cohort-local.
    pub start_date: NaiveDate,
    /// Fixed cohort-local offset from UTC, hours.
    pub utc_offset_hours: i32,
    pub gps_period_s: u32,
    /// IMU rows per second; must divide 1000 ms evenly.
    pub imu_rate_hz: u32,
    pub daylight_shares: DaylightShares,
    pub duration_buckets: Vec<DurationBucket>,
    pub non_mci: BehaviorProfile,
    pub mci: BehaviorProfile,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_participants: 12,
            mci_fraction: 0.5,
            weeks: 26,
            seed: 20240101,
            trips_per_participant: None,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            utc_offset_hours: -5,
            gps_period_s: 1,
            imu_rate_hz: 2,
            daylight_shares: DaylightShares::default(),
            duration_buckets: vec![
                DurationBucket { min_s: 45, max_s: 120, weight: 0.70 },
                DurationBucket { min_s: 120, max_s: 300, weight: 0.25 },
                DurationBucket { min_s: 300, max_s: 900, weight: 0.05 },
            ],
            non_mci: BehaviorProfile::default(),
            mci: BehaviorProfile::default(),
        }
    }
}

impl CohortSpec {
    /// Trips each participant of the given group makes over the horizon.
    pub fn trips_for(&self, profile: &BehaviorProfile) -> u32 {
        match self.trips_per_participant {
            Some(n) => n,
            None => (profile.trips_per_week * self.weeks as f64).round().max(1.0) as u32,
        }
    }

    /// Calendar quarters the horizon spans, at least 1.
    pub fn quarters(&self) -> u32 {
        ((self.weeks as f64) / 13.0).round().max(1.0) as u32
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_participants == 0 || self.weeks == 0 {
            return Err(SynthError::InvalidSpec("participants and weeks must be positive".into()));
        }
        if self.trips_per_participant == Some(0)
            || (self.trips_per_participant.is_none()
                && (self.non_mci.trips_per_week <= 0.0 || self.mci.trips_per_week <= 0.0))
        {
            return Err(SynthError::InvalidSpec("trip volume must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mci_fraction) {
            return Err(SynthError::InvalidSpec("mci_fraction outside [0, 1]".into()));
        }
        if self.gps_period_s == 0 || self.imu_rate_hz == 0 || 1000 % self.imu_rate_hz != 0 {
            return Err(SynthError::InvalidSpec("gps_period_s must be positive and imu_rate_hz must divide 1000".into()));
        }
        if self.duration_buckets.is_empty()
            || self.duration_buckets.iter().any(|b| b.min_s == 0 || b.max_s <= b.min_s || b.weight < 0.0)
        {
            return Err(SynthError::InvalidSpec("duration buckets must be non-empty ranges with non-negative weights".into()));
        }
        for p in [&self.non_mci, &self.mci] {
            if p.night_propensity < 0.0
                || p.night_propensity > 1.0
                || p.harsh_per_100km < 0.0
                || p.speed_mean_kmh < 0.0
                || p.rpm_mean < 0.0
            {
                return Err(SynthError::InvalidSpec("profile rates must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Expected trip distance under the non-MCI profile, km: mean bucket
    /// duration times the mean speed. Used to express event-rate effect
    /// sizes in per-trip count units.
    pub fn expected_trip_distance_km(&self) -> f64 {
        let total_w: f64 = self.duration_buckets.iter().map(|b| b.weight).sum();
        let mean_duration: f64 = self
            .duration_buckets
            .iter()
            .map(|b| (b.min_s + b.max_s) as f64 / 2.0 * b.weight)
            .sum::<f64>()
            / total_w.max(1e-12);
        self.non_mci.speed_mean_kmh * mean_duration / 3600.0
    }
}

/// Named behavioral contrasts between the MCI and non-MCI groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedEffect {
    None,
    NightTripDeficit,
    EventRateShift,
}

impl std::str::FromStr for PlantedEffect {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PlantedEffect::None),
            "night_trip_deficit" => Ok(PlantedEffect::NightTripDeficit),
            "event_rate_shift" => Ok(PlantedEffect::EventRateShift),
            other => Err(SynthError::UnknownEffect(other.to_string())),
        }
    }
}

/// Return a spec whose MCI group differs from the non-MCI group only in
/// the named behavioral parameter, shifted downward by `strength`
/// standard deviations (MCI drivers come out smoother and quieter, never
/// the reverse).
///
/// The standard deviation is the sampling noise of the observable the
/// parameter drives: for the night deficit, the binomial sd of a
/// participant's per-quarter night-trip count; for the event shift, the
/// Poisson sd of a trip's event count. Both are expressed back in
/// parameter units and clamped at zero.
pub fn inject_planted_signal(
    spec: &CohortSpec,
    effect: PlantedEffect,
    strength: f64,
) -> CohortSpec {
    let mut out = spec.clone();
    out.mci = out.non_mci;
    match effect {
        PlantedEffect::None => {}
        PlantedEffect::NightTripDeficit => {
            let p = out.non_mci.night_propensity;
            let trips_per_quarter =
                (spec.trips_for(&spec.non_mci) as f64 / spec.quarters() as f64).max(1.0);
            let sd = (p * (1.0 - p) / trips_per_quarter).sqrt();
            out.mci.night_propensity = (p - strength * sd).max(0.0);
        }
        PlantedEffect::EventRateShift => {
            let rate = out.non_mci.harsh_per_100km;
            let mean_distance_km = spec.expected_trip_distance_km();
            let lambda = rate * mean_distance_km / 100.0;
            let sd_rate = lambda.sqrt() * 100.0 / mean_distance_km;
            out.mci.harsh_per_100km = (rate - strength * sd_rate).max(0.0);
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("unknown planted effect {0:?} (expected none, night_trip_deficit, or event_rate_shift)")]
    UnknownEffect(String),
    #[error("could not schedule trip {trip} for participant {participant}: horizon too dense")]
    ScheduleFull { participant: String, trip: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ground truth for one generated trip, written to `ledger.json`. The
/// night/peak/urban flags and the distance here are computed by the
/// generator's own arithmetic, independently of the extraction pipeline,
/// so they can serve as its oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripTruth {
    pub participant_id: String,
    /// 1-based position in the participant's time-ordered trip sequence.
    pub trip_seq: u32,
    pub start_utc_ms: i64,
    /// Minute of the cohort-local day at trip start.
    pub start_local_minute: u32,
    /// Calendar quarter of the cohort-local start date, e.g. "2024Q1".
    pub quarter: String,
    pub duration_s: u32,
    pub distance_km: f64,
    pub night: bool,
    pub peak: bool,
    pub urban: bool,
    pub n_harsh_accel: u32,
    pub n_hard_brake: u32,
    pub n_hard_turn: u32,
    pub mean_speed_kmh: f64,
    pub mean_rpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub id: String,
    pub demographics: Demographics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortLedger {
    pub seed: u64,
    pub participants: Vec<ParticipantTruth>,
    pub trips: Vec<TripTruth>,
}

/// Stream file paths for one participant, relative to the cohort root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantFiles {
    pub nmea: String,
    pub obd: String,
    pub imu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub demographics: Demographics,
    pub files: ParticipantFiles,
}

/// `manifest.json`: spec echo plus per-participant demographics and file
/// paths. Extraction reads this to know what to parse and whom it
/// belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub spec: CohortSpec,
    pub participants: Vec<ManifestEntry>,
}
