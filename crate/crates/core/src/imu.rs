//! IMU record parsing and the supply-voltage record type.
//!
//! IMU files are plain CSV with the header
//! `timestamp_ms,ax,ay,az,gx,gy,gz`: epoch milliseconds, accelerations in
//! m/s² (x longitudinal, y lateral, z vertical), angular rates in deg/s.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMU_HEADER: &str = "timestamp_ms,ax,ay,az,gx,gy,gz";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuRecord {
    pub timestamp: DateTime<Utc>,
    /// m/s², [x, y, z]. All components finite.
    pub accel: [f64; 3],
    /// deg/s, [x, y, z]. All components finite.
    pub gyro: [f64; 3],
}

/// Supply-voltage observation from the OBD port. The TMU sleeps when the
/// voltage drops, which is what creates the inter-trip gaps the segmenter
/// keys on; there is no on-disk voltage stream in this artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageRecord {
    pub timestamp: DateTime<Utc>,
    pub volts: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImuError {
    #[error("expected 7 columns, got {found}")]
    ColumnCount { found: usize },
    #[error("column {column}: {reason}")]
    Field { column: usize, reason: String },
}

/// Parse one data row. Columns are reported 1-based in errors.
pub fn parse_imu_line(line: &str) -> Result<ImuRecord, ImuError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 7 {
        return Err(ImuError::ColumnCount { found: cols.len() });
    }
    let ms: i64 = cols[0].parse().map_err(|_| ImuError::Field {
        column: 1,
        reason: format!("bad epoch milliseconds {:?}", cols[0]),
    })?;
    let timestamp = DateTime::from_timestamp_millis(ms).ok_or_else(|| ImuError::Field {
        column: 1,
        reason: format!("timestamp {ms} out of range"),
    })?;
    let mut vals = [0.0f64; 6];
    for (i, v) in vals.iter_mut().enumerate() {
        let col = i + 2;
        let parsed: f64 = cols[i + 1].parse().map_err(|_| ImuError::Field {
            column: col,
            reason: format!("bad number {:?}", cols[i + 1]),
        })?;
        if !parsed.is_finite() {
            return Err(ImuError::Field {
                column: col,
                reason: format!("non-finite value {:?}", cols[i + 1]),
            });
        }
        *v = parsed;
    }
    Ok(ImuRecord {
        timestamp,
        accel: [vals[0], vals[1], vals[2]],
        gyro: [vals[3], vals[4], vals[5]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_row() {
        let r = parse_imu_line("1704463402100,0.1,-0.2,9.81,0.0,0.0,0.5").unwrap();
        assert_eq!(r.accel, [0.1, -0.2, 9.81]);
        assert_eq!(r.gyro, [0.0, 0.0, 0.5]);
        assert_eq!(r.timestamp.timestamp_millis(), 1704463402100);
    }

    #[test]
    fn wrong_column_count() {
        assert_eq!(
            parse_imu_line("1704463402100,0.1,-0.2"),
            Err(ImuError::ColumnCount { found: 3 })
        );
    }

    #[test]
    fn non_finite_field_is_rejected() {
        match parse_imu_line("1704463402100,nan,0,0,0,0,0") {
            Err(ImuError::Field { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected field error, got {other:?}"),
        }
        match parse_imu_line("1704463402100,0,0,0,0,0,inf") {
            Err(ImuError::Field { column, .. }) => assert_eq!(column, 7),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn parser_is_pure() {
        let line = "1704463402100,0.1,-0.2,9.81,0.0,0.0,0.5";
        assert_eq!(parse_imu_line(line), parse_imu_line(line));
    }
}
