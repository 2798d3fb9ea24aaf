//! Harsh-driving event detection on acceleration time series.
//!
//! An event is one maximal contiguous run of samples past the threshold,
//! not a per-sample count: counting samples would scale with the IMU rate.
//! Three detectors run over the same series:
//!   - harsh acceleration: longitudinal (x) above `+threshold`
//!   - hard braking:       longitudinal (x) below `-threshold`
//!   - hard turn:          |lateral (y)| above `threshold`, both directions

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Threshold from the index definitions: 3.943 m/s².
pub const HARSH_THRESHOLD_MS2: f64 = 3.943;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    HarshAcceleration,
    HardBraking,
    HardTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingEvent {
    pub kind: EventKind,
    /// Onset: timestamp of the first sample of the excursion.
    pub timestamp: DateTime<Utc>,
    /// Largest acceleration magnitude within the excursion, m/s². Always
    /// greater than the detection threshold.
    pub peak: f64,
}

/// One timestamped acceleration observation, m/s².
pub type AccelSample = (DateTime<Utc>, [f64; 3]);

/// Detect all events in a time-sorted series. Events are returned sorted
/// by onset time, ties broken by kind in declaration order.
pub fn detect_events(series: &[AccelSample], threshold: f64) -> Vec<DrivingEvent> {
    let mut events = Vec::new();
    scan_runs(series, |a| a[0] > threshold, EventKind::HarshAcceleration, &mut events);
    scan_runs(series, |a| a[0] < -threshold, EventKind::HardBraking, &mut events);
    scan_runs(series, |a| a[1].abs() > threshold, EventKind::HardTurn, &mut events);
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(kind_order(a.kind).cmp(&kind_order(b.kind))));
    events
}

fn kind_order(k: EventKind) -> u8 {
    match k {
        EventKind::HarshAcceleration => 0,
        EventKind::HardBraking => 1,
        EventKind::HardTurn => 2,
    }
}

fn scan_runs(
    series: &[AccelSample],
    pred: impl Fn(&[f64; 3]) -> bool,
    kind: EventKind,
    out: &mut Vec<DrivingEvent>,
) {
    let mut run: Option<(DateTime<Utc>, f64)> = None;
    for (ts, accel) in series {
        if pred(accel) {
            let mag = if kind == EventKind::HardTurn {
                accel[1].abs()
            } else {
                accel[0].abs()
            };
            run = match run {
                None => Some((*ts, mag)),
                Some((onset, peak)) => Some((onset, peak.max(mag))),
            };
        } else if let Some((onset, peak)) = run.take() {
            out.push(DrivingEvent { kind, timestamp: onset, peak });
        }
    }
    if let Some((onset, peak)) = run {
        out.push(DrivingEvent { kind, timestamp: onset, peak });
    }
}
