//! End-to-end analysis pipeline for in-vehicle telematics data: parse the
//! raw GPS/OBD/IMU streams a telematics unit logs, align and segment them
//! into trips, compute the 19 driver behavior indexes, preprocess the
//! feature matrix, and train random-forest models that screen for mild
//! cognitive impairment. A calibrated synthetic cohort generator stands in
//! for clinical data so the whole pipeline can be exercised end to end.

pub mod dbi;
pub mod events;
pub mod extract;
pub mod files;
pub mod forest;
pub mod imu;
pub mod nmea;
pub mod obd;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod synth;
pub mod trip;

pub use dbi::{build_matrix, build_records, DbiRecord, Demographics, FeatureMatrix};
pub use events::{detect_events, DrivingEvent, EventKind, HARSH_THRESHOLD_MS2};
pub use imu::{parse_imu_line, ImuRecord, VoltageRecord};
pub use nmea::{parse_nmea, GpsFix};
pub use obd::{parse_obd, ObdReading};
pub use trip::{align_streams, haversine_km, segment_trips, trip_kinematics, TelemetrySample, Trip};
