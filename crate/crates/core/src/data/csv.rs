//! CSV interchange for power and weather series.
//!
//! Power: `timestamp,power_mw`, one row per 5 minutes. Weather:
//! `timestamp,lead_hours,pressure_pa,ground_temp_k,temp2m_k,rel_humidity_pct,gust_ms`,
//! one row per (hour, lead) pair with leads 1 then 2. Timestamps are
//! ISO-8601 UTC.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::data::{PowerSeries, WeatherSeries, FORECAST_LEADS, WEATHER_DIM, WEATHER_PARAMS};
use crate::error::{Error, Result};

pub const POWER_HEADER: &str = "timestamp,power_mw";
pub const WEATHER_HEADER: &str =
    "timestamp,lead_hours,pressure_pa,ground_temp_k,temp2m_k,rel_humidity_pct,gust_ms";

/// RFC 3339 UTC rendering used by every timestamped export.
pub fn format_ts(secs: i64) -> String {
    match DateTime::<Utc>::from_timestamp(secs, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => format!("epoch+{secs}s"),
    }
}

fn parse_ts(s: &str) -> std::result::Result<i64, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc).timestamp())
        .map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn csv_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| csv_err(path, line, format!("bad {field} value {raw:?}")))?;
    if !v.is_finite() {
        return Err(csv_err(path, line, format!("non-finite {field} value {raw:?}")));
    }
    Ok(v)
}

pub fn load_power_csv(path: impl AsRef<Path>, capacity: f64) -> Result<PowerSeries> {
    let path = path.as_ref();
    if capacity <= 0.0 || !capacity.is_finite() {
        return Err(Error::BadCapacity(capacity));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(path, 1, "empty file"))?;
    if header.trim_end() != POWER_HEADER {
        return Err(csv_err(path, 1, format!("expected header {POWER_HEADER:?}")));
    }
    let mut timestamps = Vec::new();
    let mut power = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 2 {
            return Err(csv_err(path, line, format!("expected 2 fields, got {}", fields.len())));
        }
        let ts = parse_ts(fields[0].trim()).map_err(|m| csv_err(path, line, m))?;
        let p = parse_f64(path, line, "power_mw", fields[1])?;
        if !(0.0..=capacity).contains(&p) {
            return Err(csv_err(path, line, format!("power {p} outside [0, {capacity}]")));
        }
        timestamps.push(ts);
        power.push(p);
    }
    PowerSeries::new(timestamps, power, capacity)
}

pub fn load_weather_csv(path: impl AsRef<Path>) -> Result<WeatherSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(path, 1, "empty file"))?;
    if header.trim_end() != WEATHER_HEADER {
        return Err(csv_err(path, 1, format!("expected header {WEATHER_HEADER:?}")));
    }

    let per_lead = WEATHER_PARAMS.len();
    let mut timestamps: Vec<i64> = Vec::new();
    let mut features: Vec<[f64; WEATHER_DIM]> = Vec::new();
    // which lead the next row must carry for the hour being assembled
    let mut lead_cursor = 0usize;
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 2 + per_lead {
            return Err(csv_err(
                path,
                line,
                format!("expected {} fields, got {}", 2 + per_lead, fields.len()),
            ));
        }
        let ts = parse_ts(fields[0].trim()).map_err(|m| csv_err(path, line, m))?;
        let lead: i64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| csv_err(path, line, format!("bad lead_hours {:?}", fields[1])))?;
        let expected_lead = FORECAST_LEADS[lead_cursor];
        if lead != expected_lead {
            return Err(csv_err(
                path,
                line,
                format!("expected lead_hours {expected_lead} here (rows run lead 1 then 2 per hour), got {lead}"),
            ));
        }
        if lead_cursor == 0 {
            timestamps.push(ts);
            features.push([0.0; WEATHER_DIM]);
        } else if *timestamps.last().expect("pushed on lead 1") != ts {
            return Err(csv_err(
                path,
                line,
                format!(
                    "lead-2 row timestamp {} does not match its lead-1 row {}",
                    format_ts(ts),
                    format_ts(*timestamps.last().expect("pushed on lead 1"))
                ),
            ));
        }
        let row = features.last_mut().expect("pushed on lead 1");
        for (j, name) in WEATHER_PARAMS.iter().enumerate() {
            let v = parse_f64(path, line, name, fields[2 + j])?;
            if *name == "rel_humidity_pct" && !(0.0..=100.0).contains(&v) {
                return Err(csv_err(path, line, format!("relative humidity {v} outside [0, 100]")));
            }
            row[lead_cursor * per_lead + j] = v;
        }
        lead_cursor = (lead_cursor + 1) % FORECAST_LEADS.len();
    }
    if lead_cursor != 0 {
        return Err(csv_err(path, text.lines().count(), "file ends mid-hour (missing lead-2 row)"));
    }
    WeatherSeries::new(timestamps, features)
}

pub fn write_power_csv(series: &PowerSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(series.len() * 32);
    out.push_str(POWER_HEADER);
    out.push('\n');
    for (ts, p) in series.timestamps.iter().zip(&series.power) {
        out.push_str(&format_ts(*ts));
        out.push(',');
        out.push_str(&p.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_weather_csv(series: &WeatherSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let per_lead = WEATHER_PARAMS.len();
    let mut out = String::with_capacity(series.len() * 160);
    out.push_str(WEATHER_HEADER);
    out.push('\n');
    for (ts, row) in series.timestamps.iter().zip(&series.features) {
        for (lead_idx, lead) in FORECAST_LEADS.iter().enumerate() {
            out.push_str(&format_ts(*ts));
            out.push_str(&format!(",{lead}"));
            for j in 0..per_lead {
                out.push(',');
                out.push_str(&row[lead_idx * per_lead + j].to_string());
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_generate;

    #[test]
    fn timestamp_round_trip() {
        for secs in [0i64, 1577836800, 1577836800 + 300, 2000000000] {
            let s = format_ts(secs);
            assert!(s.ends_with('Z'));
            assert_eq!(parse_ts(&s).unwrap(), secs);
        }
        assert!(parse_ts("not-a-time").is_err());
    }

    #[test]
    fn power_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (power, _) = synth_generate(5, 48).unwrap();
        let path = dir.path().join("power.csv");
        write_power_csv(&power, &path).unwrap();
        let loaded = load_power_csv(&path, power.capacity).unwrap();
        assert_eq!(power, loaded);
    }

    #[test]
    fn weather_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (_, weather) = synth_generate(5, 48).unwrap();
        let path = dir.path().join("weather.csv");
        write_weather_csv(&weather, &path).unwrap();
        let loaded = load_weather_csv(&path).unwrap();
        assert_eq!(weather, loaded);
    }

    #[test]
    fn power_range_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("power.csv");
        std::fs::write(
            &path,
            "timestamp,power_mw\n2020-01-01T00:00:00Z,3.0\n2020-01-01T00:05:00Z,17.0\n",
        )
        .unwrap();
        match load_power_csv(&path, 16.0).unwrap_err() {
            Error::Csv { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("17"), "{msg}");
            }
            other => panic!("expected csv error, got {other}"),
        }
    }

    #[test]
    fn power_shuffled_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("power.csv");
        std::fs::write(
            &path,
            "timestamp,power_mw\n2020-01-01T00:05:00Z,3.0\n2020-01-01T00:00:00Z,4.0\n",
        )
        .unwrap();
        let err = load_power_csv(&path, 16.0).unwrap_err().to_string();
        assert!(err.contains("increase"), "{err}");
    }

    #[test]
    fn power_bad_header_and_missing_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("power.csv");
        std::fs::write(&path, "time,mw\n").unwrap();
        assert!(matches!(load_power_csv(&path, 16.0), Err(Error::Csv { line: 1, .. })));
        std::fs::write(&path, "timestamp,power_mw\n2020-01-01T00:00:00Z\n").unwrap();
        assert!(matches!(load_power_csv(&path, 16.0), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn weather_humidity_range_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        std::fs::write(
            &path,
            format!("{WEATHER_HEADER}\n2020-01-01T00:00:00Z,1,101000,285,284,140,10\n"),
        )
        .unwrap();
        match load_weather_csv(&path).unwrap_err() {
            Error::Csv { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("humidity"), "{msg}");
            }
            other => panic!("expected csv error, got {other}"),
        }
    }

    #[test]
    fn weather_lead_order_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        std::fs::write(
            &path,
            format!("{WEATHER_HEADER}\n2020-01-01T00:00:00Z,2,101000,285,284,60,10\n"),
        )
        .unwrap();
        assert!(load_weather_csv(&path).is_err());
        // missing lead-2 partner
        std::fs::write(
            &path,
            format!("{WEATHER_HEADER}\n2020-01-01T00:00:00Z,1,101000,285,284,60,10\n"),
        )
        .unwrap();
        assert!(load_weather_csv(&path).is_err());
    }

    #[test]
    fn fixture_arithmetic_48_hours() {
        // 48 hours of synthetic data: 576 power rows, 48 weather hours
        let (power, weather) = synth_generate(42, 576).unwrap();
        assert_eq!(power.len(), 576);
        assert_eq!(weather.len(), 48);
    }
}
