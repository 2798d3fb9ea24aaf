//! On-disk formats for pipeline artifacts: `features.csv` (one row per
//! trip, documented column order), `trips.jsonl` (one JSON object per
//! trip), and `parse_quality.json`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! read-back reproduces the in-memory values bit for bit and identical
//! pipelines produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dbi::DbiRecord;
use crate::extract::TripMeta;

pub const FEATURES_HEADER: &str = "participant_id,period_id,trip_id,age,gender,race,ethnicity,education,retired,bmi_obese,total_trips,night_trips,peak_trips,duration_s,distance_km,speed_kmh,rpm,n_harsh_accel,n_hard_brake,n_hard_turn,urban_trips,suburb_trips,mci";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
}

pub fn features_to_csv(records: &[DbiRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96 + FEATURES_HEADER.len() + 1);
    out.push_str(FEATURES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.participant_id,
            r.period_id,
            r.trip_id,
            r.age,
            r.gender,
            r.race,
            r.ethnicity,
            r.education,
            r.retired,
            r.bmi_obese,
            r.total_trips,
            r.night_trips,
            r.peak_trips,
            r.duration_s,
            r.distance_km,
            r.speed_kmh,
            r.rpm,
            r.n_harsh_accel,
            r.n_hard_brake,
            r.n_hard_turn,
            r.urban_trips,
            r.suburb_trips,
            r.mci
        );
    }
    out
}

pub fn write_features_csv(path: &Path, records: &[DbiRecord]) -> Result<(), FileError> {
    write_text(path, &features_to_csv(records))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<DbiRecord>, FileError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == FEATURES_HEADER => {}
        _ => {
            return Err(FileError::Format {
                path: path.display().to_string(),
                line: 1,
                reason: "missing or unexpected header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_row(line).map_err(|reason| FileError::Format {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        })?);
    }
    Ok(records)
}

fn parse_row(line: &str) -> Result<DbiRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 23 {
        return Err(format!("expected 23 fields, got {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
        s.parse().map_err(|_| format!("bad {what}: {s:?}"))
    }
    Ok(DbiRecord {
        participant_id: f[0].to_string(),
        period_id: f[1].to_string(),
        trip_id: f[2].to_string(),
        age: num(f[3], "age")?,
        gender: num(f[4], "gender")?,
        race: num(f[5], "race")?,
        ethnicity: num(f[6], "ethnicity")?,
        education: num(f[7], "education")?,
        retired: num(f[8], "retired")?,
        bmi_obese: num(f[9], "bmi_obese")?,
        total_trips: num(f[10], "total_trips")?,
        night_trips: num(f[11], "night_trips")?,
        peak_trips: num(f[12], "peak_trips")?,
        duration_s: num(f[13], "duration_s")?,
        distance_km: num(f[14], "distance_km")?,
        speed_kmh: num(f[15], "speed_kmh")?,
        rpm: num(f[16], "rpm")?,
        n_harsh_accel: num(f[17], "n_harsh_accel")?,
        n_hard_brake: num(f[18], "n_hard_brake")?,
        n_hard_turn: num(f[19], "n_hard_turn")?,
        urban_trips: num(f[20], "urban_trips")?,
        suburb_trips: num(f[21], "suburb_trips")?,
        mci: num(f[22], "mci")?,
    })
}

pub fn write_trips_jsonl(path: &Path, trips: &[TripMeta]) -> Result<(), FileError> {
    let mut out = String::new();
    for t in trips {
        out.push_str(&serde_json::to_string(t).expect("trip meta serializes"));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_trips_jsonl(path: &Path) -> Result<Vec<TripMeta>, FileError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FileError::Format {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_truth, ledger_records, CohortSpec};

    #[test]
    fn features_csv_round_trips() {
        let spec = CohortSpec {
            n_participants: 3,
            trips_per_participant: 8,
            weeks: 5,
            seed: 11,
            ..Default::default()
        };
        let records = ledger_records(&generate_truth(&spec).unwrap().ledger);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_features_csv(&path, &records).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, records, "shortest-round-trip floats read back exactly");
    }

    #[test]
    fn header_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(matches!(
            read_features_csv(&path),
            Err(FileError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn header_matches_the_documented_column_order() {
        let cols: Vec<&str> = FEATURES_HEADER.split(',').collect();
        assert_eq!(cols.len(), 23);
        assert_eq!(&cols[3..22], crate::dbi::feature_columns().as_slice());
        assert_eq!(cols[22], "mci");
    }
}
