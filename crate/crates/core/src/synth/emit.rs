//! Wire-format serializers. Values are quantized to the format's own
//! resolution *before* the record is considered emitted, so a formatted
//! line parses back to exactly the record the generator reports.

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::imu::ImuRecord;
use crate::nmea::{GpsFix, KNOTS_TO_KMH};
use crate::obd::ObdReading;

/// Quantize a decimal-degree coordinate to the NMEA ddmm.mmmmm wire
/// resolution (1e-5 arc minutes).
pub fn quantize_coord(deg: f64) -> f64 {
    let sign = if deg < 0.0 { -1.0 } else { 1.0 };
    let abs = deg.abs();
    let whole = abs.trunc();
    let minutes = ((abs - whole) * 60.0 * 1e5).round() / 1e5;
    sign * (whole + minutes / 60.0)
}

/// Quantize to 4 decimal places, matching the IMU CSV format.
pub fn quantize_4dp(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Quantize a speed to the RMC wire resolution of 0.1 knot, returning
/// km/h.
pub fn quantize_speed_kmh(speed_kmh: f64) -> f64 {
    let knots = (speed_kmh / KNOTS_TO_KMH * 10.0).round() / 10.0;
    knots * KNOTS_TO_KMH
}

/// Quantize an engine speed to the OBD encoding resolution of 0.25 rpm.
pub fn quantize_rpm(rpm: f64) -> f64 {
    (rpm * 4.0).round() / 4.0
}

fn coord_fields(deg: f64, is_lat: bool) -> (String, char) {
    let hemi = if is_lat {
        if deg < 0.0 { 'S' } else { 'N' }
    } else if deg < 0.0 {
        'W'
    } else {
        'E'
    };
    let abs = deg.abs();
    let whole = abs.trunc();
    let minutes = (abs - whole) * 60.0;
    let text = if is_lat {
        format!("{:02}{:08.5}", whole as u32, minutes)
    } else {
        format!("{:03}{:08.5}", whole as u32, minutes)
    };
    (text, hemi)
}

/// One RMC sentence with checksum. The fix must already be quantized via
/// [`quantize_coord`] / [`quantize_speed_kmh`].
pub fn format_rmc(fix: &GpsFix, track_deg: f64) -> String {
    let t = fix.timestamp;
    let time = format!(
        "{:02}{:02}{:02}.{:03}",
        t.hour(),
        t.minute(),
        t.second(),
        t.timestamp_subsec_millis()
    );
    let date = format!("{:02}{:02}{:02}", t.day(), t.month(), t.year() % 100);
    let (lat, ns) = coord_fields(fix.latitude, true);
    let (lon, ew) = coord_fields(fix.longitude, false);
    let knots = fix.speed_kmh.unwrap_or(0.0) / KNOTS_TO_KMH;
    let status = if fix.valid { 'A' } else { 'V' };
    let body = format!(
        "GPRMC,{time},{status},{lat},{ns},{lon},{ew},{knots:05.1},{track_deg:05.1},{date},,"
    );
    let checksum = crate::nmea::xor_checksum(&body);
    format!("${body}*{checksum:02X}")
}

fn iso_ms(t: DateTime<Utc>) -> String {
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z",
        t.year(),
        t.month(),
        t.day(),
        t.hour(),
        t.minute(),
        t.second(),
        t.timestamp_subsec_millis()
    )
}

/// One RPM response line. `rpm` must already be quantized to 0.25.
pub fn format_obd_rpm(timestamp: DateTime<Utc>, rpm: f64) -> String {
    let v = (rpm * 4.0).round() as u32;
    let v = v.min(0xFFFF);
    format!("{} 41 0C {:02X} {:02X}", iso_ms(timestamp), v >> 8, v & 0xFF)
}

/// One vehicle-speed response line. Speed saturates at the one-byte limit.
pub fn format_obd_speed(timestamp: DateTime<Utc>, speed_kmh: f64) -> String {
    let v = speed_kmh.round().clamp(0.0, 255.0) as u32;
    format!("{} 41 0D {:02X}", iso_ms(timestamp), v)
}

/// One IMU CSV row. Values must already be quantized via [`quantize_4dp`].
pub fn format_imu_row(rec: &ImuRecord) -> String {
    format!(
        "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
        rec.timestamp.timestamp_millis(),
        rec.accel[0],
        rec.accel[1],
        rec.accel[2],
        rec.gyro[0],
        rec.gyro[1],
        rec.gyro[2]
    )
}

/// Parse-back used by the generator to define emitted OBD readings.
pub fn obd_reading_rpm(timestamp: DateTime<Utc>, rpm: f64) -> ObdReading {
    ObdReading {
        timestamp,
        pid: crate::obd::PID_ENGINE_RPM,
        rpm: Some(quantize_rpm(rpm).clamp(0.0, crate::obd::RPM_MAX)),
        speed_kmh: None,
    }
}

pub fn obd_reading_speed(timestamp: DateTime<Utc>, speed_kmh: f64) -> ObdReading {
    ObdReading {
        timestamp,
        pid: crate::obd::PID_VEHICLE_SPEED,
        rpm: None,
        speed_kmh: Some(speed_kmh.round().clamp(0.0, 255.0)),
    }
}
