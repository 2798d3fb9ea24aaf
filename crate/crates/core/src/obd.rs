//! OBD-II mode-01 response decoding.
//!
//! The logger timestamps each response frame and writes it as one ASCII
//! line: `<ISO-8601 UTC timestamp> 41 <PID> <B0> [B1]`. Only engine RPM
//! (PID 0x0C) and vehicle speed (PID 0x0D) are decoded.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PID_ENGINE_RPM: u8 = 0x0C;
pub const PID_VEHICLE_SPEED: u8 = 0x0D;

/// Arithmetic bound of the two-byte RPM encoding: (256*255 + 255) / 4.
pub const RPM_MAX: f64 = 16383.75;

/// One decoded mode-01 reading. Exactly one of `rpm` / `speed_kmh` is
/// present, matching the PID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObdReading {
    pub timestamp: DateTime<Utc>,
    pub pid: u8,
    pub rpm: Option<f64>,
    pub speed_kmh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObdError {
    #[error("frame error: {0}")]
    Frame(String),
    #[error("unsupported PID 0x{0:02X}")]
    UnsupportedPid(u8),
}

pub fn parse_obd(line: &str) -> Result<ObdReading, ObdError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let (ts, hex) = line
        .split_once(' ')
        .ok_or_else(|| ObdError::Frame("missing timestamp prefix".into()))?;
    let timestamp = DateTime::parse_from_rfc3339(ts)
        .map_err(|e| ObdError::Frame(format!("bad timestamp {ts:?}: {e}")))?
        .with_timezone(&Utc);

    let bytes: Vec<u8> = hex
        .split_whitespace()
        .map(|tok| u8::from_str_radix(tok, 16).map_err(|_| ObdError::Frame(format!("bad hex byte {tok:?}"))))
        .collect::<Result<_, _>>()?;
    if bytes.len() < 2 {
        return Err(ObdError::Frame(format!("frame too short: {} bytes", bytes.len())));
    }
    if bytes[0] != 0x41 {
        return Err(ObdError::Frame(format!("expected mode-01 response 0x41, got 0x{:02X}", bytes[0])));
    }
    let pid = bytes[1];
    match pid {
        PID_ENGINE_RPM => {
            if bytes.len() != 4 {
                return Err(ObdError::Frame(format!("PID 0C expects 2 data bytes, got {}", bytes.len() - 2)));
            }
            let rpm = (256.0 * bytes[2] as f64 + bytes[3] as f64) / 4.0;
            Ok(ObdReading {
                timestamp,
                pid,
                rpm: Some(rpm),
                speed_kmh: None,
            })
        }
        PID_VEHICLE_SPEED => {
            if bytes.len() != 3 {
                return Err(ObdError::Frame(format!("PID 0D expects 1 data byte, got {}", bytes.len() - 2)));
            }
            Ok(ObdReading {
                timestamp,
                pid,
                rpm: None,
                speed_kmh: Some(bytes[2] as f64),
            })
        }
        other => Err(ObdError::UnsupportedPid(other)),
    }
}
