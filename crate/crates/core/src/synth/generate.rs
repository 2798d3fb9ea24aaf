//! Cohort planning and realization.
//!
//! Per participant: draw demographics and behavioral parameters, schedule
//! non-overlapping trips across the horizon, then realize each trip as a
//! straight-line path with per-second speeds, inject harsh-event
//! excursions on the IMU grid, and serialize the three stream files.
//! Every stream gets its own SplitMix64 derived from (seed, tag,
//! participant, trip), so schedules and realizations never share draws
//! and participants can be generated in parallel.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, TimeZone, Utc};
use rayon::prelude::*;

use super::emit::{
    format_imu_row, format_obd_rpm, format_obd_speed, format_rmc, obd_reading_rpm,
    obd_reading_speed, quantize_4dp, quantize_coord, quantize_speed_kmh,
};
use super::{
    BehaviorProfile, CohortLedger, CohortManifest, CohortSpec, ManifestEntry, ParticipantFiles,
    ParticipantTruth, SynthError, TripTruth,
};
use crate::dbi::{DbiRecord, Demographics};
use crate::imu::{ImuRecord, IMU_HEADER};
use crate::nmea::GpsFix;
use crate::rng::SplitMix64;

const KM_PER_DEG_LAT: f64 = crate::trip::EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Minimum clearance around a scheduled trip, seconds. Keeps every
/// inter-trip gap well past the 300 s segmentation threshold.
const SCHEDULE_BUFFER_S: i64 = 900;

/// Share of the harsh rate assigned to acceleration, braking, turns.
const KIND_WEIGHTS: [f64; 3] = [0.40, 0.35, 0.25];

// day-window boundaries in minutes, mirroring the reporting windows but
// written out independently so the ledger can act as an oracle
const NIGHT_START_MIN: u32 = 21 * 60;
const NIGHT_END_MIN: u32 = 5 * 60;
const MORNING: (u32, u32) = (5 * 60, 12 * 60);
const AFTERNOON: (u32, u32) = (12 * 60, 17 * 60);
const EVENING: (u32, u32) = (17 * 60, 21 * 60);
const PEAK_1: (u32, u32) = (7 * 60, 9 * 60);
const PEAK_2: (u32, u32) = (16 * 60, 18 * 60);

const TAG_MCI: u64 = 1;
const TAG_DEMOGRAPHICS: u64 = 2;
const TAG_PROFILE: u64 = 3;
const TAG_SCHEDULE: u64 = 4;
const TAG_TRIP: u64 = 5;

fn stream(seed: u64, tag: u64, participant: u64, trip: u64) -> SplitMix64 {
    SplitMix64::derive(seed, tag | ((participant + 1) << 8) | ((trip + 1) << 28))
}

/// Everything the generator knows about a cohort before (or without)
/// writing stream files.
#[derive(Debug, Clone)]
pub struct CohortData {
    pub ledger: CohortLedger,
}

struct TripPlan {
    seq: u32,
    start_local_s: i64,
    duration_s: u32,
}

struct RealizedTrip {
    truth: TripTruth,
    nmea: String,
    obd: String,
    imu: String,
}

/// Independent great-circle distance (Vincenty sphere form, stable at
/// short range). The extraction pipeline uses the haversine form; keeping
/// the formulas distinct lets the ledger act as an oracle for it.
fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, l1) = (a.0.to_radians(), a.1.to_radians());
    let (p2, l2) = (b.0.to_radians(), b.1.to_radians());
    let dl = l2 - l1;
    let num = ((p2.cos() * dl.sin()).powi(2)
        + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
    .sqrt();
    let den = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    crate::trip::EARTH_RADIUS_KM * num.atan2(den)
}

fn is_night_minute(minute: u32) -> bool {
    minute >= NIGHT_START_MIN || minute < NIGHT_END_MIN
}

fn is_peak_minute(minute: u32) -> bool {
    (minute >= PEAK_1.0 && minute < PEAK_1.1) || (minute >= PEAK_2.0 && minute < PEAK_2.1)
}

fn draw_demographics(rng: &mut SplitMix64, mci: u8) -> Demographics {
    Demographics {
        age: 65 + rng.below(25) as u32,
        gender: 1 + rng.below(2) as u8,
        race: 1 + rng.below(6) as u8,
        ethnicity: 1 + rng.below(6) as u8,
        education: 1 + rng.below(10) as u8,
        retired: rng.below(2) as u8,
        bmi_obese: rng.below(2) as u8,
        mci,
    }
}

/// Per-participant state that is not part of the group profile.
struct ParticipantParams {
    origin: (f64, f64),
}

fn draw_params(rng: &mut SplitMix64) -> ParticipantParams {
    ParticipantParams {
        origin: (25.5 + rng.unit() * 1.5, -80.9 + rng.unit()),
    }
}

fn draw_minute(rng: &mut SplitMix64, spec: &CohortSpec, night_propensity: f64) -> u32 {
    if rng.unit() < night_propensity {
        (NIGHT_START_MIN + rng.below(480) as u32) % 1440
    } else {
        let s = spec.daylight_shares;
        let total = s.morning + s.afternoon + s.evening;
        let v = rng.unit() * total;
        let (lo, hi) = if v < s.morning {
            MORNING
        } else if v < s.morning + s.afternoon {
            AFTERNOON
        } else {
            EVENING
        };
        lo + rng.below((hi - lo) as u64) as u32
    }
}

fn draw_duration(rng: &mut SplitMix64, spec: &CohortSpec) -> u32 {
    let total: f64 = spec.duration_buckets.iter().map(|b| b.weight).sum();
    let mut v = rng.unit() * total;
    for b in &spec.duration_buckets {
        if v < b.weight || std::ptr::eq(b, spec.duration_buckets.last().unwrap()) {
            return b.min_s + rng.below((b.max_s - b.min_s) as u64) as u32;
        }
        v -= b.weight;
    }
    unreachable!("bucket weights exhausted");
}

fn overlaps(accepted: &[(i64, u32)], start: i64, duration: u32) -> bool {
    let lo = start - SCHEDULE_BUFFER_S;
    let hi = start + duration as i64 + SCHEDULE_BUFFER_S;
    accepted.iter().any(|&(s, d)| s < hi && lo < s + d as i64)
}

fn schedule_trips(
    rng: &mut SplitMix64,
    spec: &CohortSpec,
    n_trips: u32,
    night_propensity: f64,
    participant_id: &str,
) -> Result<Vec<TripPlan>, SynthError> {
    let days = (spec.weeks * 7) as u64;
    let mut accepted: Vec<(i64, u32)> = Vec::with_capacity(n_trips as usize);
    for t in 0..n_trips {
        let duration = draw_duration(rng, spec);
        let mut placed = None;
        for _ in 0..200 {
            let day = rng.below(days) as i64;
            let minute = draw_minute(rng, spec, night_propensity) as i64;
            let second = rng.below(60) as i64;
            let start = day * 86_400 + minute * 60 + second;
            if !overlaps(&accepted, start, duration) {
                placed = Some(start);
                break;
            }
        }
        if placed.is_none() {
            // deterministic fallback: keep the wall-clock slot, walk days
            let minute = draw_minute(rng, spec, night_propensity) as i64;
            let second = rng.below(60) as i64;
            for day in 0..days as i64 {
                let start = day * 86_400 + minute * 60 + second;
                if !overlaps(&accepted, start, duration) {
                    placed = Some(start);
                    break;
                }
            }
        }
        let Some(start) = placed else {
            return Err(SynthError::ScheduleFull {
                participant: participant_id.to_string(),
                trip: t + 1,
            });
        };
        accepted.push((start, duration));
    }
    accepted.sort_unstable();
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(i, (start_local_s, duration_s))| TripPlan {
            seq: (i + 1) as u32,
            start_local_s,
            duration_s,
        })
        .collect())
}

struct EventRun {
    start_idx: usize,
    len: usize,
    /// signed peak on the relevant axis
    peak: f64,
}

/// Place `count` runs of 1..=3 samples on the IMU grid, keeping at least
/// one clear sample around each run on its axis track. Returns the runs
/// actually placed.
fn place_runs(
    rng: &mut SplitMix64,
    n_imu: usize,
    count: u32,
    sign: f64,
    occupied: &mut Vec<(usize, usize)>,
) -> Vec<EventRun> {
    let mut runs = Vec::new();
    for _ in 0..count {
        for _ in 0..100 {
            let len = 1 + rng.below(3) as usize;
            if n_imu < len + 2 {
                break;
            }
            let start = rng.below((n_imu - len) as u64) as usize;
            let lo = start.saturating_sub(1);
            let hi = (start + len + 1).min(n_imu);
            if occupied.iter().any(|&(s, e)| s < hi && lo < e) {
                continue;
            }
            occupied.push((lo, hi));
            let peak = sign * (4.2 + rng.unit() * 3.0);
            runs.push(EventRun { start_idx: start, len, peak });
            break;
        }
    }
    runs
}

fn realize_trip(
    spec: &CohortSpec,
    profile: &BehaviorProfile,
    params: &ParticipantParams,
    participant_id: &str,
    plan: &TripPlan,
    emit_streams: bool,
) -> RealizedTrip {
    let mut rng = stream(
        spec.seed,
        TAG_TRIP,
        participant_index(participant_id),
        plan.seq as u64,
    );
    let d = plan.duration_s as usize;
    let start_utc_ms = local_to_utc_ms(spec, plan.start_local_s);

    let heading = (rng.below(360) as f64 + rng.unit()).to_radians();
    let speed_target = rng.normal_clamped(profile.speed_mean_kmh, profile.speed_sd_kmh, 3.0, 130.0);
    let rpm_target = rng.normal_clamped(profile.rpm_mean, profile.rpm_sd, 500.0, 4500.0);
    let speeds: Vec<f64> = (0..=d).map(|_| rng.normal_clamped(speed_target, 2.0, 0.0, 158.0)).collect();
    let rpms: Vec<f64> = (0..d.max(1)).map(|_| rng.normal_clamped(rpm_target, 40.0, 0.0, 5698.0)).collect();

    // integrate the path, then quantize to the wire resolution; both the
    // ledger distance and the emitted sentences use the quantized points
    let mut positions: Vec<(f64, f64)> = Vec::with_capacity(d + 1);
    let (mut lat, mut lon) = params.origin;
    for t in 0..=d {
        positions.push((quantize_coord(lat), quantize_coord(lon)));
        if t < d {
            let step_km = speeds[t] / 3600.0;
            lat += step_km * heading.cos() / KM_PER_DEG_LAT;
            lon += step_km * heading.sin() / (KM_PER_DEG_LAT * lat.to_radians().cos());
        }
    }
    let distance_km: f64 = positions.windows(2).map(|w| great_circle_km(w[0], w[1])).sum();

    // harsh-event injection on the IMU grid
    let rate = spec.imu_rate_hz as usize;
    let n_imu = d * rate + 1;
    let lam = profile.harsh_per_100km * distance_km / 100.0;
    let mut counts = [0u32; 3];
    for (k, c) in counts.iter_mut().enumerate() {
        let lk = lam * KIND_WEIGHTS[k];
        *c = lk.floor() as u32 + u32::from(rng.unit() < lk.fract());
    }
    let mut occupied_x: Vec<(usize, usize)> = Vec::new();
    let mut occupied_y: Vec<(usize, usize)> = Vec::new();
    let accel_runs = place_runs(&mut rng, n_imu, counts[0], 1.0, &mut occupied_x);
    let brake_runs = place_runs(&mut rng, n_imu, counts[1], -1.0, &mut occupied_x);
    let turn_sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
    let turn_runs = place_runs(&mut rng, n_imu, counts[2], turn_sign, &mut occupied_y);

    let mut x_vals = vec![f64::NAN; n_imu];
    let mut y_vals = vec![f64::NAN; n_imu];
    for run in accel_runs.iter().chain(brake_runs.iter()) {
        fill_run(&mut rng, &mut x_vals, run);
    }
    for run in &turn_runs {
        fill_run(&mut rng, &mut y_vals, run);
    }

    let minute = ((plan.start_local_s % 86_400) / 60) as u32;
    let local_date = spec.start_date + chrono::Duration::days(plan.start_local_s / 86_400);
    let truth = TripTruth {
        participant_id: participant_id.to_string(),
        trip_seq: plan.seq,
        start_utc_ms,
        start_local_minute: minute,
        quarter: format!("{}Q{}", local_date.year(), (local_date.month() - 1) / 3 + 1),
        duration_s: plan.duration_s,
        distance_km,
        night: is_night_minute(minute),
        peak: is_peak_minute(minute),
        urban: distance_km < 32.0,
        n_harsh_accel: accel_runs.len() as u32,
        n_hard_brake: brake_runs.len() as u32,
        n_hard_turn: turn_runs.len() as u32,
        mean_speed_kmh: speeds.iter().sum::<f64>() / speeds.len() as f64,
        mean_rpm: rpms.iter().sum::<f64>() / rpms.len() as f64,
    };

    if !emit_streams {
        return RealizedTrip {
            truth,
            nmea: String::new(),
            obd: String::new(),
            imu: String::new(),
        };
    }

    // GPS sentences at the configured period, always including second D
    let mut nmea = String::new();
    let mut t = 0usize;
    loop {
        let ts = Utc.timestamp_millis_opt(start_utc_ms + (t as i64) * 1000).unwrap();
        let fix = GpsFix {
            timestamp: ts,
            latitude: positions[t].0,
            longitude: positions[t].1,
            speed_kmh: Some(quantize_speed_kmh(speeds[t])),
            valid: true,
        };
        nmea.push_str(&format_rmc(&fix, heading.to_degrees() % 360.0));
        nmea.push('\n');
        if t == d {
            break;
        }
        t = (t + spec.gps_period_s as usize).min(d);
    }

    // one OBD response per second at +200 ms, alternating RPM and speed
    let mut obd = String::new();
    for t in 0..d {
        let ts = Utc.timestamp_millis_opt(start_utc_ms + (t as i64) * 1000 + 200).unwrap();
        if t % 2 == 0 {
            let reading = obd_reading_rpm(ts, rpms[t]);
            obd.push_str(&format_obd_rpm(ts, reading.rpm.unwrap()));
        } else {
            let reading = obd_reading_speed(ts, speeds[t]);
            obd.push_str(&format_obd_speed(ts, reading.speed_kmh.unwrap()));
        }
        obd.push('\n');
    }

    // IMU rows on the grid, with injected excursions overriding the noise
    let step_ms = (1000 / spec.imu_rate_hz) as i64;
    let mut imu = String::new();
    for k in 0..n_imu {
        let ts = Utc.timestamp_millis_opt(start_utc_ms + k as i64 * step_ms).unwrap();
        let nx = rng.normal_clamped(0.0, 0.8, -3.0, 3.0);
        let ny = rng.normal_clamped(0.0, 0.8, -3.0, 3.0);
        let nz = 9.81 + rng.normal_clamped(0.0, 0.3, -1.0, 1.0);
        let gx = rng.normal_clamped(0.0, 2.0, -20.0, 20.0);
        let gy = rng.normal_clamped(0.0, 2.0, -20.0, 20.0);
        let gz = rng.normal_clamped(0.0, 2.0, -20.0, 20.0);
        let rec = ImuRecord {
            timestamp: ts,
            accel: [
                quantize_4dp(if x_vals[k].is_nan() { nx } else { x_vals[k] }),
                quantize_4dp(if y_vals[k].is_nan() { ny } else { y_vals[k] }),
                quantize_4dp(nz),
            ],
            gyro: [quantize_4dp(gx), quantize_4dp(gy), quantize_4dp(gz)],
        };
        imu.push_str(&format_imu_row(&rec));
        imu.push('\n');
    }

    RealizedTrip { truth, nmea, obd, imu }
}

fn fill_run(rng: &mut SplitMix64, vals: &mut [f64], run: &EventRun) {
    for i in 0..run.len {
        vals[run.start_idx + i] = if i == 0 {
            run.peak
        } else {
            run.peak.signum() * (4.0 + rng.unit() * (run.peak.abs() - 4.0))
        };
    }
}

fn participant_index(id: &str) -> u64 {
    id.trim_start_matches(|c: char| !c.is_ascii_digit())
        .parse()
        .unwrap_or(0)
}

fn participant_id(index: u32) -> String {
    format!("p{:04}", index + 1)
}

fn local_to_utc_ms(spec: &CohortSpec, local_s: i64) -> i64 {
    let midnight = spec.start_date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    (midnight + local_s - spec.utc_offset_hours as i64 * 3600) * 1000
}

/// MCI assignment: exactly round(n * fraction) participants, chosen by a
/// seeded shuffle of the index list.
fn assign_mci(spec: &CohortSpec) -> Vec<u8> {
    let n = spec.n_participants as usize;
    let n_mci = ((n as f64) * spec.mci_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    stream(spec.seed, TAG_MCI, 0, 0).shuffle(&mut idx);
    let mut flags = vec![0u8; n];
    for &i in idx.iter().take(n_mci) {
        flags[i] = 1;
    }
    flags
}

struct ParticipantOutput {
    entry: ManifestEntry,
    truth: ParticipantTruth,
    trips: Vec<TripTruth>,
    nmea: String,
    obd: String,
    imu: String,
}

fn generate_participant(
    spec: &CohortSpec,
    index: u32,
    mci: u8,
    emit_streams: bool,
) -> Result<ParticipantOutput, SynthError> {
    let id = participant_id(index);
    let p = index as u64;
    let demographics = draw_demographics(&mut stream(spec.seed, TAG_DEMOGRAPHICS, p, 0), mci);
    let profile = if mci == 1 { &spec.mci } else { &spec.non_mci };
    let params = draw_params(&mut stream(spec.seed, TAG_PROFILE, p, 0));
    let plans = schedule_trips(
        &mut stream(spec.seed, TAG_SCHEDULE, p, 0),
        spec,
        spec.trips_for(profile),
        profile.night_propensity,
        &id,
    )?;

    let mut nmea = String::new();
    let mut obd = String::new();
    let mut imu = String::from(IMU_HEADER);
    imu.push('\n');
    let mut trips = Vec::with_capacity(plans.len());
    for plan in &plans {
        let realized = realize_trip(spec, profile, &params, &id, plan, emit_streams);
        nmea.push_str(&realized.nmea);
        obd.push_str(&realized.obd);
        imu.push_str(&realized.imu);
        trips.push(realized.truth);
    }

    Ok(ParticipantOutput {
        entry: ManifestEntry {
            id: id.clone(),
            demographics,
            files: ParticipantFiles {
                nmea: format!("{id}/{id}.nmea"),
                obd: format!("{id}/{id}.obd"),
                imu: format!("{id}/{id}.imu.csv"),
            },
        },
        truth: ParticipantTruth { id, demographics },
        trips,
        nmea,
        obd,
        imu,
    })
}

fn generate_all(spec: &CohortSpec, emit_streams: bool) -> Result<Vec<ParticipantOutput>, SynthError> {
    spec.validate()?;
    let mci_flags = assign_mci(spec);
    (0..spec.n_participants)
        .into_par_iter()
        .map(|i| generate_participant(spec, i, mci_flags[i as usize], emit_streams))
        .collect()
}

/// Ground truth only: demographics plus the per-trip ledger, no stream
/// files. The trip math (paths, distances, event placement) is identical
/// to the file-emitting path.
pub fn generate_truth(spec: &CohortSpec) -> Result<CohortData, SynthError> {
    let outputs = generate_all(spec, false)?;
    Ok(CohortData {
        ledger: collect_ledger(spec, &outputs),
    })
}

fn collect_ledger(spec: &CohortSpec, outputs: &[ParticipantOutput]) -> CohortLedger {
    CohortLedger {
        seed: spec.seed,
        participants: outputs.iter().map(|o| o.truth.clone()).collect(),
        trips: outputs.iter().flat_map(|o| o.trips.iter().cloned()).collect(),
    }
}

/// Generate the cohort and write stream files, `manifest.json`, and
/// `ledger.json` under `out_dir`.
pub fn generate_cohort(
    spec: &CohortSpec,
    out_dir: &Path,
) -> Result<(CohortManifest, CohortLedger), SynthError> {
    let outputs = generate_all(spec, true)?;
    std::fs::create_dir_all(out_dir)?;
    for o in &outputs {
        let dir = out_dir.join(&o.entry.id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(out_dir.join(&o.entry.files.nmea), &o.nmea)?;
        std::fs::write(out_dir.join(&o.entry.files.obd), &o.obd)?;
        std::fs::write(out_dir.join(&o.entry.files.imu), &o.imu)?;
    }
    let manifest = CohortManifest {
        spec: spec.clone(),
        participants: outputs.iter().map(|o| o.entry.clone()).collect(),
    };
    let ledger = collect_ledger(spec, &outputs);
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    std::fs::write(
        out_dir.join("ledger.json"),
        serde_json::to_string_pretty(&ledger).expect("ledger serializes"),
    )?;
    Ok((manifest, ledger))
}

/// Ground-truth feature rows straight from the ledger: the same
/// aggregation the pipeline performs, but computed from the generator's
/// own records. One row per trip, grouped by participant and quarter.
pub fn ledger_records(ledger: &CohortLedger) -> Vec<DbiRecord> {
    let demo_of: BTreeMap<&str, &Demographics> = ledger
        .participants
        .iter()
        .map(|p| (p.id.as_str(), &p.demographics))
        .collect();
    let mut groups: BTreeMap<(String, String), Vec<&TripTruth>> = BTreeMap::new();
    for t in &ledger.trips {
        groups
            .entry((t.participant_id.clone(), t.quarter.clone()))
            .or_default()
            .push(t);
    }
    let mut records = Vec::new();
    for ((pid, quarter), trips) in groups {
        let demo = demo_of[pid.as_str()];
        let total = trips.len() as u32;
        let night = trips.iter().filter(|t| t.night).count() as u32;
        let peak = trips.iter().filter(|t| t.peak).count() as u32;
        let urban = trips.iter().filter(|t| t.urban).count() as u32;
        let mut sorted = trips;
        sorted.sort_by_key(|t| t.trip_seq);
        for t in sorted {
            records.push(DbiRecord {
                participant_id: pid.clone(),
                period_id: quarter.clone(),
                trip_id: format!("{pid}-t{:04}", t.trip_seq),
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
                duration_s: t.duration_s as f64,
                distance_km: t.distance_km,
                speed_kmh: t.mean_speed_kmh,
                rpm: t.mean_rpm,
                n_harsh_accel: t.n_harsh_accel,
                n_hard_brake: t.n_hard_brake,
                n_hard_turn: t.n_hard_turn,
                urban_trips: urban,
                suburb_trips: total - urban,
                mci: demo.mci,
            });
        }
    }
    records
}
