//! NMEA 0183 sentence parsing for the GPS stream.
//!
//! Only the two sentence types a TMU logger actually produces are decoded:
//! RMC (position, speed over ground, date and time) and GGA (position and
//! time). Everything else is reported as unsupported so callers can count
//! and skip it.

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// International nautical mile: exactly 1.852 km per knot.
pub const KNOTS_TO_KMH: f64 = 1.852;

/// One decoded GPS fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    /// UTC timestamp, millisecond precision. GGA sentences carry no date;
    /// see [`parse_nmea_dated`] for how the date is supplied.
    pub timestamp: DateTime<Utc>,
    /// Decimal degrees, south negative. Always within [-90, 90].
    pub latitude: f64,
    /// Decimal degrees, west negative. Always within [-180, 180].
    pub longitude: f64,
    /// Speed over ground. RMC only; GGA sentences carry no speed.
    pub speed_kmh: Option<f64>,
    /// Receiver validity flag: RMC status `A`, or GGA fix quality > 0.
    /// Invalid fixes are never used for distance computation downstream.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NmeaError {
    #[error("checksum mismatch: sentence declares {declared:02X}, computed {computed:02X}")]
    Checksum { declared: u8, computed: u8 },
    #[error("unsupported sentence type {0}")]
    Unsupported(String),
    #[error("field {index} ({name}): {reason}")]
    Field {
        index: usize,
        name: &'static str,
        reason: String,
    },
}

/// XOR of all bytes between `$` and `*`, the NMEA 0183 checksum.
pub fn xor_checksum(body: &str) -> u8 {
    body.bytes().fold(0, |acc, b| acc ^ b)
}

fn field_err(index: usize, name: &'static str, reason: impl Into<String>) -> NmeaError {
    NmeaError::Field {
        index,
        name,
        reason: reason.into(),
    }
}

/// Parse one sentence. GGA fixes get the Unix epoch date (1970-01-01)
/// because the sentence itself has none; stream readers that know the
/// current date should call [`parse_nmea_dated`] instead.
pub fn parse_nmea(line: &str) -> Result<GpsFix, NmeaError> {
    parse_nmea_dated(line, None)
}

/// Parse one sentence, using `date_hint` for sentence types that carry a
/// time of day but no date (GGA). RMC sentences always use their own date.
pub fn parse_nmea_dated(line: &str, date_hint: Option<NaiveDate>) -> Result<GpsFix, NmeaError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let rest = line
        .strip_prefix('$')
        .ok_or_else(|| field_err(0, "start", "sentence does not begin with '$'"))?;

    // Split off and verify the optional *HH checksum before looking at fields.
    let body = match rest.rsplit_once('*') {
        Some((body, given)) => {
            let declared = u8::from_str_radix(given.trim(), 16)
                .map_err(|_| field_err(0, "checksum", format!("bad checksum digits {given:?}")))?;
            let computed = xor_checksum(body);
            if declared != computed {
                return Err(NmeaError::Checksum { declared, computed });
            }
            body
        }
        None => rest,
    };

    let fields: Vec<&str> = body.split(',').collect();
    let talker = fields[0];
    if talker.len() < 5 {
        return Err(NmeaError::Unsupported(talker.to_string()));
    }
    match &talker[talker.len() - 3..] {
        "RMC" => parse_rmc(&fields),
        "GGA" => parse_gga(&fields, date_hint),
        _ => Err(NmeaError::Unsupported(talker.to_string())),
    }
}

fn parse_rmc(fields: &[&str]) -> Result<GpsFix, NmeaError> {
    if fields.len() < 10 {
        return Err(field_err(fields.len(), "rmc", "too few fields"));
    }
    let time = parse_hms(fields[1]).map_err(|r| field_err(1, "time", r))?;
    let valid = match fields[2] {
        "A" => true,
        "V" => false,
        other => return Err(field_err(2, "status", format!("expected A or V, got {other:?}"))),
    };
    let latitude = parse_coord(fields[3], fields[4], 90.0).map_err(|r| field_err(3, "latitude", r))?;
    let longitude =
        parse_coord(fields[5], fields[6], 180.0).map_err(|r| field_err(5, "longitude", r))?;
    let knots: f64 = fields[7]
        .parse()
        .map_err(|_| field_err(7, "speed", format!("bad number {:?}", fields[7])))?;
    if !knots.is_finite() || knots < 0.0 {
        return Err(field_err(7, "speed", "speed must be finite and non-negative"));
    }
    let date = parse_ddmmyy(fields[9]).map_err(|r| field_err(9, "date", r))?;
    Ok(GpsFix {
        timestamp: DateTime::from_naive_utc_and_offset(date.and_time(time), Utc),
        latitude,
        longitude,
        speed_kmh: Some(knots * KNOTS_TO_KMH),
        valid,
    })
}

fn parse_gga(fields: &[&str], date_hint: Option<NaiveDate>) -> Result<GpsFix, NmeaError> {
    if fields.len() < 7 {
        return Err(field_err(fields.len(), "gga", "too few fields"));
    }
    let time = parse_hms(fields[1]).map_err(|r| field_err(1, "time", r))?;
    let latitude = parse_coord(fields[2], fields[3], 90.0).map_err(|r| field_err(2, "latitude", r))?;
    let longitude =
        parse_coord(fields[4], fields[5], 180.0).map_err(|r| field_err(4, "longitude", r))?;
    let quality: u32 = fields[6]
        .parse()
        .map_err(|_| field_err(6, "quality", format!("bad fix quality {:?}", fields[6])))?;
    let date = date_hint.unwrap_or(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
    Ok(GpsFix {
        timestamp: DateTime::from_naive_utc_and_offset(date.and_time(time), Utc),
        latitude,
        longitude,
        speed_kmh: None,
        valid: quality > 0,
    })
}

/// `HHMMSS` or `HHMMSS.sss`.
fn parse_hms(s: &str) -> Result<NaiveTime, String> {
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if whole.len() != 6 || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected HHMMSS[.sss], got {s:?}"));
    }
    let h: u32 = whole[0..2].parse().unwrap();
    let m: u32 = whole[2..4].parse().unwrap();
    let sec: u32 = whole[4..6].parse().unwrap();
    let millis = match frac {
        "" => 0,
        f if f.len() <= 3 && f.bytes().all(|b| b.is_ascii_digit()) => {
            let v: u32 = f.parse().unwrap();
            v * 10u32.pow(3 - f.len() as u32)
        }
        _ => return Err(format!("bad fractional seconds {frac:?}")),
    };
    NaiveTime::from_hms_milli_opt(h, m, sec, millis).ok_or_else(|| format!("out-of-range time {s:?}"))
}

/// `ddmmyy` with the GPS century pivot: years 80-99 map to 19xx.
fn parse_ddmmyy(s: &str) -> Result<NaiveDate, String> {
    if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected DDMMYY, got {s:?}"));
    }
    let d: u32 = s[0..2].parse().unwrap();
    let m: u32 = s[2..4].parse().unwrap();
    let y: i32 = s[4..6].parse().unwrap();
    let year = if y >= 80 { 1900 + y } else { 2000 + y };
    NaiveDate::from_ymd_opt(year, m, d).ok_or_else(|| format!("out-of-range date {s:?}"))
}

/// `ddmm.mmmm` / `dddmm.mmmm` plus hemisphere letter, to signed decimal
/// degrees. S and W are negative.
fn parse_coord(value: &str, hemi: &str, max_deg: f64) -> Result<f64, String> {
    let v: f64 = value
        .parse()
        .map_err(|_| format!("bad coordinate {value:?}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("coordinate must be finite and non-negative, got {value:?}"));
    }
    let degrees = (v / 100.0).trunc();
    let minutes = v - degrees * 100.0;
    if minutes >= 60.0 {
        return Err(format!("minutes out of range in {value:?}"));
    }
    let unsigned = degrees + minutes / 60.0;
    if unsigned > max_deg {
        return Err(format!("coordinate {value:?} exceeds {max_deg} degrees"));
    }
    let sign = match hemi {
        "N" | "E" => 1.0,
        "S" | "W" => -1.0,
        other => return Err(format!("bad hemisphere {other:?}")),
    };
    Ok(sign * unsigned)
}
