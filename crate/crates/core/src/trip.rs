//! Stream alignment, trip segmentation, and per-trip kinematics.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::events::DrivingEvent;
use crate::imu::{ImuRecord, VoltageRecord};
use crate::nmea::GpsFix;
use crate::obd::ObdReading;

/// Records closer together than this coalesce into one sample. 100 ms is
/// the largest window that keeps 10 Hz IMU records distinct while still
/// merging 1 Hz GPS/OBD readings with the nearest IMU sample.
pub const COALESCE_WINDOW_MS: i64 = 100;

/// Default inter-sample gap that opens a new trip, mirroring the TMU's
/// five-minute sleep timer.
pub const DEFAULT_TRIP_GAP_S: f64 = 300.0;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// One time-aligned multi-sensor observation. At least one field is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub timestamp: DateTime<Utc>,
    pub gps: Option<GpsFix>,
    pub obd_rpm: Option<f64>,
    pub obd_speed_kmh: Option<f64>,
    pub accel: Option<[f64; 3]>,
    pub volts: Option<f64>,
}

impl TelemetrySample {
    fn empty(timestamp: DateTime<Utc>) -> Self {
        TelemetrySample {
            timestamp,
            gps: None,
            obd_rpm: None,
            obd_speed_kmh: None,
            accel: None,
            volts: None,
        }
    }
}

/// An ordered sample sequence with derived kinematics and detected events.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub participant_id: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(skip)]
    pub samples: Vec<TelemetrySample>,
    pub duration_s: f64,
    /// Sum of great-circle distances over consecutive valid GPS fixes.
    /// Absent when the trip has no valid fix at all.
    pub distance_km: Option<f64>,
    /// Mean over available speed observations; OBD speed is preferred over
    /// GPS speed at the same sample. Absent when no sample carries a speed.
    pub mean_speed_kmh: Option<f64>,
    pub mean_rpm: Option<f64>,
    pub events: Vec<DrivingEvent>,
}

/// Result of segmentation: the retained trips plus how many single-sample
/// groups were dropped (one sample defines neither duration nor distance).
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub trips: Vec<Trip>,
    pub singletons_dropped: usize,
}

enum Record {
    Gps(GpsFix),
    Obd(ObdReading),
    Imu(ImuRecord),
    Volt(VoltageRecord),
}

impl Record {
    fn timestamp(&self) -> DateTime<Utc> {
        match self {
            Record::Gps(g) => g.timestamp,
            Record::Obd(o) => o.timestamp,
            Record::Imu(i) => i.timestamp,
            Record::Volt(v) => v.timestamp,
        }
    }
}

/// Merge the four per-sensor streams into one time-sorted sample sequence.
/// Each stream must already be time-sorted. Records within
/// [`COALESCE_WINDOW_MS`] of the current sample's timestamp join it as long
/// as their slot is still free; the earliest record's timestamp becomes the
/// sample timestamp.
pub fn align_streams(
    gps: Vec<GpsFix>,
    obd: Vec<ObdReading>,
    imu: Vec<ImuRecord>,
    volts: Vec<VoltageRecord>,
) -> Vec<TelemetrySample> {
    let mut records: Vec<Record> = Vec::with_capacity(gps.len() + obd.len() + imu.len() + volts.len());
    records.extend(gps.into_iter().map(Record::Gps));
    records.extend(obd.into_iter().map(Record::Obd));
    records.extend(imu.into_iter().map(Record::Imu));
    records.extend(volts.into_iter().map(Record::Volt));
    // stable sort keeps the gps/obd/imu/volt priority at equal timestamps
    records.sort_by_key(Record::timestamp);

    let mut samples: Vec<TelemetrySample> = Vec::new();
    let mut current: Option<TelemetrySample> = None;
    for rec in records {
        let ts = rec.timestamp();
        let fits = match &current {
            Some(s) => {
                (ts - s.timestamp).num_milliseconds() < COALESCE_WINDOW_MS && slot_free(s, &rec)
            }
            None => false,
        };
        if !fits {
            if let Some(s) = current.take() {
                samples.push(s);
            }
            current = Some(TelemetrySample::empty(ts));
        }
        place(current.as_mut().unwrap(), rec);
    }
    if let Some(s) = current {
        samples.push(s);
    }
    samples
}

fn slot_free(sample: &TelemetrySample, rec: &Record) -> bool {
    match rec {
        Record::Gps(_) => sample.gps.is_none(),
        Record::Obd(o) if o.rpm.is_some() => sample.obd_rpm.is_none(),
        Record::Obd(_) => sample.obd_speed_kmh.is_none(),
        Record::Imu(_) => sample.accel.is_none(),
        Record::Volt(_) => sample.volts.is_none(),
    }
}

fn place(sample: &mut TelemetrySample, rec: Record) {
    match rec {
        Record::Gps(g) => sample.gps = Some(g),
        Record::Obd(o) => {
            if let Some(rpm) = o.rpm {
                sample.obd_rpm = Some(rpm);
            }
            if let Some(speed) = o.speed_kmh {
                sample.obd_speed_kmh = Some(speed);
            }
        }
        Record::Imu(i) => sample.accel = Some(i.accel),
        Record::Volt(v) => sample.volts = Some(v.volts),
    }
}

/// Split a time-sorted sample sequence into trips: a new trip begins at
/// the first sample after any inter-sample gap of at least `gap_s`
/// seconds. Trip ids are `{participant_id}-t{NNNN}` in time order.
pub fn segment_trips(participant_id: &str, samples: Vec<TelemetrySample>, gap_s: f64) -> Segmentation {
    let gap_ms = (gap_s * 1000.0) as i64;
    let mut chunks: Vec<Vec<TelemetrySample>> = Vec::new();
    for sample in samples {
        let open_new = match chunks.last().and_then(|c| c.last()) {
            Some(prev) => (sample.timestamp - prev.timestamp).num_milliseconds() >= gap_ms,
            None => true,
        };
        if open_new {
            chunks.push(Vec::new());
        }
        chunks.last_mut().unwrap().push(sample);
    }

    let mut trips = Vec::new();
    let mut singletons = 0;
    for chunk in chunks {
        if chunk.len() < 2 {
            singletons += 1;
            continue;
        }
        let start = chunk.first().unwrap().timestamp;
        let end = chunk.last().unwrap().timestamp;
        let trip_id = format!("{}-t{:04}", participant_id, trips.len() + 1);
        trips.push(Trip {
            trip_id,
            participant_id: participant_id.to_string(),
            start,
            end,
            duration_s: (end - start).num_milliseconds() as f64 / 1000.0,
            samples: chunk,
            distance_km: None,
            mean_speed_kmh: None,
            mean_rpm: None,
            events: Vec::new(),
        });
    }
    Segmentation {
        trips,
        singletons_dropped: singletons,
    }
}

/// Great-circle distance between two (latitude, longitude) points in
/// degrees, on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let lat1 = a.0.to_radians();
    let lat2 = b.0.to_radians();
    let dlat = (b.0 - a.0).to_radians();
    let dlon = (b.1 - a.1).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Fill the derived kinematic fields of a trip from its samples.
pub fn trip_kinematics(trip: &mut Trip) {
    let valid_fixes: Vec<&GpsFix> = trip
        .samples
        .iter()
        .filter_map(|s| s.gps.as_ref())
        .filter(|g| g.valid)
        .collect();
    trip.distance_km = if valid_fixes.is_empty() {
        None
    } else {
        Some(
            valid_fixes
                .windows(2)
                .map(|w| haversine_km((w[0].latitude, w[0].longitude), (w[1].latitude, w[1].longitude)))
                .sum(),
        )
    };

    let speeds: Vec<f64> = trip
        .samples
        .iter()
        .filter_map(|s| {
            s.obd_speed_kmh
                .or_else(|| s.gps.as_ref().filter(|g| g.valid).and_then(|g| g.speed_kmh))
        })
        .collect();
    trip.mean_speed_kmh = mean(&speeds);

    let rpms: Vec<f64> = trip.samples.iter().filter_map(|s| s.obd_rpm).collect();
    trip.mean_rpm = mean(&rpms);
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use chrono::TimeZone;

    fn ts(ms: i64) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(ms).unwrap()
    }

    fn fix(ms: i64, lat: f64, lon: f64, valid: bool) -> GpsFix {
        GpsFix {
            timestamp: ts(ms),
            latitude: lat,
            longitude: lon,
            speed_kmh: Some(0.0),
            valid,
        }
    }

    fn imu_at(ms: i64) -> ImuRecord {
        ImuRecord {
            timestamp: ts(ms),
            accel: [0.0, 0.0, 9.81],
            gyro: [0.0; 3],
        }
    }

    fn sample_at(s: i64) -> TelemetrySample {
        let mut t = TelemetrySample::empty(ts(s * 1000));
        t.obd_rpm = Some(800.0);
        t
    }

    #[test]
    fn close_records_coalesce() {
        let out = align_streams(vec![fix(1000, 0.0, 0.0, true)], vec![], vec![imu_at(1050)], vec![]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].timestamp, ts(1000), "earliest timestamp wins");
        assert!(out[0].gps.is_some() && out[0].accel.is_some());
    }

    #[test]
    fn distant_records_stay_separate() {
        let out = align_streams(vec![fix(1000, 0.0, 0.0, true)], vec![], vec![imu_at(2000)], vec![]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn empty_inputs_empty_output() {
        assert!(align_streams(vec![], vec![], vec![], vec![]).is_empty());
    }

    #[test]
    fn imu_at_exact_window_spacing_stays_distinct() {
        // 10 Hz IMU: consecutive records 100 ms apart must not merge
        let imu: Vec<ImuRecord> = (0..10).map(|i| imu_at(i * 100)).collect();
        let out = align_streams(vec![], vec![], imu, vec![]);
        assert_eq!(out.len(), 10);
    }

    #[test]
    fn occupied_slot_opens_new_sample() {
        let out = align_streams(
            vec![fix(1000, 0.0, 0.0, true), fix(1050, 0.1, 0.1, true)],
            vec![],
            vec![],
            vec![],
        );
        assert_eq!(out.len(), 2, "two fixes cannot share one sample");
    }

    #[test]
    fn segmentation_splits_on_gap() {
        let samples: Vec<TelemetrySample> = (0..=60).chain(400..=460).map(sample_at).collect();
        let seg = segment_trips("p1", samples, 300.0);
        assert_eq!(seg.trips.len(), 2);
        assert_eq!(seg.singletons_dropped, 0);
        assert_eq!(seg.trips[0].duration_s, 60.0);
    }

    #[test]
    fn short_gap_keeps_one_trip() {
        let samples: Vec<TelemetrySample> = (0..=60).chain(200..=260).map(sample_at).collect();
        let seg = segment_trips("p1", samples, 300.0);
        assert_eq!(seg.trips.len(), 1);
    }

    #[test]
    fn trip_count_matches_brute_force_over_random_gaps() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..1000 {
            let n = 2 + rng.below(40) as usize;
            let mut t = 0i64;
            let mut times = Vec::with_capacity(n);
            for _ in 0..n {
                t += 1 + rng.below(600) as i64;
                times.push(t);
            }
            let samples: Vec<TelemetrySample> = times.iter().map(|&s| sample_at(s)).collect();
            let seg = segment_trips("p", samples, 300.0);

            // brute force: count boundaries, then drop singleton groups
            let mut groups = vec![1usize];
            for w in times.windows(2) {
                if w[1] - w[0] >= 300 {
                    groups.push(1);
                } else {
                    *groups.last_mut().unwrap() += 1;
                }
            }
            let expected = groups.iter().filter(|&&g| g >= 2).count();
            let expected_singletons = groups.iter().filter(|&&g| g < 2).count();
            assert_eq!(seg.trips.len(), expected);
            assert_eq!(seg.singletons_dropped, expected_singletons);
        }
    }

    #[test]
    fn segmentation_is_a_partition() {
        let mut rng = SplitMix64::new(77);
        let mut t = 0i64;
        let mut times = Vec::new();
        for _ in 0..500 {
            t += 1 + rng.below(500) as i64;
            times.push(t);
        }
        let samples: Vec<TelemetrySample> = times.iter().map(|&s| sample_at(s)).collect();
        let seg = segment_trips("p", samples.clone(), 300.0);
        let rejoined: Vec<i64> = seg
            .trips
            .iter()
            .flat_map(|t| t.samples.iter().map(|s| s.timestamp.timestamp()))
            .collect();
        // every retained sample appears exactly once, in the original order
        let mut retained: Vec<i64> = Vec::new();
        let mut groups = vec![vec![times[0]]];
        for w in times.windows(2) {
            if w[1] - w[0] >= 300 {
                groups.push(vec![w[1]]);
            } else {
                groups.last_mut().unwrap().push(w[1]);
            }
        }
        for g in groups.iter().filter(|g| g.len() >= 2) {
            retained.extend(g.iter().copied());
        }
        assert_eq!(rejoined, retained);
    }

    #[test]
    fn haversine_reference_values() {
        assert_eq!(haversine_km((0.0, 0.0), (0.0, 0.0)), 0.0);
        // one degree of longitude on the equator: R * pi/180
        let expected = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let got = haversine_km((0.0, 0.0), (0.0, 1.0));
        assert!((got - expected).abs() < 1e-9);
        assert!((got - 111.195).abs() < 1e-3);
    }

    #[test]
    fn haversine_is_symmetric() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..1000 {
            let a = (rng.unit() * 180.0 - 90.0, rng.unit() * 360.0 - 180.0);
            let b = (rng.unit() * 180.0 - 90.0, rng.unit() * 360.0 - 180.0);
            assert_eq!(haversine_km(a, b), haversine_km(b, a));
        }
    }

    fn trip_from_samples(samples: Vec<TelemetrySample>) -> Trip {
        let start = samples.first().unwrap().timestamp;
        let end = samples.last().unwrap().timestamp;
        Trip {
            trip_id: "p-t0001".into(),
            participant_id: "p".into(),
            start,
            end,
            duration_s: (end - start).num_milliseconds() as f64 / 1000.0,
            samples,
            distance_km: None,
            mean_speed_kmh: None,
            mean_rpm: None,
            events: Vec::new(),
        }
    }

    #[test]
    fn kinematics_distance_and_duration() {
        let mut s1 = TelemetrySample::empty(ts(0));
        s1.gps = Some(fix(0, 0.0, 0.0, true));
        let mut s2 = TelemetrySample::empty(ts(3_600_000));
        s2.gps = Some(fix(3_600_000, 0.0, 1.0, true));
        let mut trip = trip_from_samples(vec![s1, s2]);
        trip_kinematics(&mut trip);
        assert_eq!(trip.duration_s, 3600.0);
        assert!((trip.distance_km.unwrap() - 111.195).abs() < 1e-3);
    }

    #[test]
    fn all_invalid_fixes_leave_distance_absent() {
        let mut s1 = TelemetrySample::empty(ts(0));
        s1.gps = Some(fix(0, 0.0, 0.0, false));
        let mut s2 = TelemetrySample::empty(ts(1000));
        s2.gps = Some(fix(1000, 0.5, 0.5, false));
        let mut trip = trip_from_samples(vec![s1, s2]);
        trip_kinematics(&mut trip);
        assert_eq!(trip.distance_km, None);
        assert_eq!(trip.mean_speed_kmh, None, "invalid GPS speed is not used");
    }

    #[test]
    fn distance_ignores_interleaved_invalid_fixes() {
        let make = |with_noise: bool| {
            let mut samples = Vec::new();
            for i in 0..5 {
                let mut s = TelemetrySample::empty(ts(i * 1000));
                s.gps = Some(fix(i * 1000, 0.0, i as f64 * 0.01, true));
                samples.push(s);
                if with_noise && i == 2 {
                    let mut bad = TelemetrySample::empty(ts(i * 1000 + 500));
                    bad.gps = Some(fix(i * 1000 + 500, 45.0, 45.0, false));
                    samples.push(bad);
                }
            }
            let mut trip = trip_from_samples(samples);
            trip_kinematics(&mut trip);
            trip.distance_km.unwrap()
        };
        assert_eq!(make(false), make(true));
    }

    #[test]
    fn constant_obd_speed_means_that_speed() {
        let samples: Vec<TelemetrySample> = (0..10)
            .map(|i| {
                let mut s = TelemetrySample::empty(ts(i * 1000));
                s.obd_speed_kmh = Some(60.0);
                s
            })
            .collect();
        let mut trip = trip_from_samples(samples);
        trip_kinematics(&mut trip);
        assert_eq!(trip.mean_speed_kmh, Some(60.0));
    }

    #[test]
    fn obd_speed_preferred_over_gps_speed() {
        let mut s = TelemetrySample::empty(ts(0));
        let mut g = fix(0, 0.0, 0.0, true);
        g.speed_kmh = Some(10.0);
        s.gps = Some(g);
        s.obd_speed_kmh = Some(50.0);
        let mut s2 = TelemetrySample::empty(ts(1000));
        let mut g2 = fix(1000, 0.0, 0.0, true);
        g2.speed_kmh = Some(30.0);
        s2.gps = Some(g2);
        let mut trip = trip_from_samples(vec![s, s2]);
        trip_kinematics(&mut trip);
        // (50 + 30) / 2: OBD wins where present, GPS fills the gap
        assert_eq!(trip.mean_speed_kmh, Some(40.0));
    }

    #[test]
    fn straight_line_constant_speed_distance_matches_speed_times_time() {
        // 60 km/h due east at 1 Hz for 600 s
        let speed_kmh = 60.0;
        let step_km = speed_kmh / 3600.0;
        let mut lon = 0.0;
        let mut samples = Vec::new();
        for i in 0..=600i64 {
            let mut s = TelemetrySample::empty(ts(i * 1000));
            s.gps = Some(fix(i * 1000, 10.0, lon, true));
            samples.push(s);
            lon += step_km / (EARTH_RADIUS_KM * std::f64::consts::PI / 180.0 * (10.0f64).to_radians().cos());
        }
        let mut trip = trip_from_samples(samples);
        trip_kinematics(&mut trip);
        let expected = speed_kmh * trip.duration_s / 3600.0;
        let got = trip.distance_km.unwrap();
        assert!(
            ((got - expected) / expected).abs() <= 1e-3,
            "distance {got} vs speed*time {expected}"
        );
    }
}
