//! Seeded synthetic data for desk-scale experiments.
//!
//! An hourly AR(1) weather driver sets the power level for each hour.
//! Five-minute power wanders around that level with slightly anti-persistent
//! turbulence (gusts overshoot and correct), so the best next-step forecast
//! pulls the current reading back toward the level instead of copying it.
//! Each weather row holds the latest model run's forecasts: the lead-1
//! fields are valid for the stamped hour, the lead-2 fields for the hour
//! after, and forecast error grows with lead. The temperature channels also
//! carry the deterministic daily cycle.

use crate::data::{PowerSeries, WeatherSeries, BLOCK_ROWS, FORECAST_LEADS, POWER_STEP_SECS, WEATHER_DIM, WEATHER_PARAMS, WEATHER_STEP_SECS};
use crate::error::{Error, Result};
use crate::linalg::Rng;

pub const SYNTH_CAPACITY_MW: f64 = 16.0;
/// 2020-01-01T00:00:00Z.
const EPOCH_START: i64 = 1_577_836_800;
/// AR(1) coefficient of the hourly driver; innovations keep unit variance.
const AR_COEF: f64 = 0.9;
/// Weight of the driver in the normalized power level. Kept small enough
/// that the level rarely pins at the rails, where clamping would hide the
/// turbulence from the model.
const DRIVER_GAIN: f64 = 0.2;
/// Lag-1 coefficient of the five-minute turbulence around the level. The
/// negative sign makes the series anti-persistent at this scale, so copying
/// the last reading is strictly worse than pulling toward the level.
const DEV_RHO: f64 = -0.45;
/// Innovation scale of the turbulence, in capacity fractions.
const NOISE_SD: f64 = 0.04;
/// Forecast error per hour of lead, in driver standard deviations. Short
/// leads must pin the hourly level more sharply than the power reading
/// itself does, or weather adds nothing over the last reading.
const FC_ERROR_SD: f64 = 0.02;
/// Daily cycle period in 5-minute steps.
const DIURNAL_STEPS: f64 = 288.0;

/// Generates `n_points` five-minute power readings (a multiple of 12) plus
/// the covering hourly forecasts. Deterministic per seed.
pub fn synth_generate(seed: u64, n_points: usize) -> Result<(PowerSeries, WeatherSeries)> {
    if n_points == 0 || n_points % BLOCK_ROWS != 0 {
        return Err(Error::Invalid(format!(
            "n_points must be a positive multiple of {BLOCK_ROWS}, got {n_points}"
        )));
    }
    let n_hours = n_points / BLOCK_ROWS;

    // Independent streams so adding draws to one channel never shifts another.
    let mut driver_rng = Rng::new(Rng::derive(seed, &[1]));
    let mut power_rng = Rng::new(Rng::derive(seed, &[2]));
    let mut weather_rng = Rng::new(Rng::derive(seed, &[3]));

    // One extra hour so the lead-2 forecast of the last row stays in range.
    let mut driver = Vec::with_capacity(n_hours + 1);
    driver.push(driver_rng.normal(0.0, 1.0));
    let innovation_sd = (1.0 - AR_COEF * AR_COEF).sqrt();
    for _ in 1..n_hours + 1 {
        let prev = *driver.last().expect("seeded above");
        driver.push(AR_COEF * prev + driver_rng.normal(0.0, innovation_sd));
    }

    let mut timestamps = Vec::with_capacity(n_points);
    let mut power = Vec::with_capacity(n_points);
    let mut dev = power_rng.normal(0.0, NOISE_SD / (1.0 - DEV_RHO * DEV_RHO).sqrt());
    for t in 0..n_points {
        let frac = 0.5 + DRIVER_GAIN * driver[t / BLOCK_ROWS] + dev;
        timestamps.push(EPOCH_START + t as i64 * POWER_STEP_SECS);
        power.push(SYNTH_CAPACITY_MW * frac.clamp(0.0, 1.0));
        dev = DEV_RHO * dev + power_rng.normal(0.0, NOISE_SD);
    }

    let mut hour_ts = Vec::with_capacity(n_hours);
    let mut features = Vec::with_capacity(n_hours);
    for h in 0..n_hours {
        hour_ts.push(EPOCH_START + h as i64 * WEATHER_STEP_SECS);
        // the daily cycle is a function of the clock, so forecasts carry it
        // exactly; mid-hour phase stands in for the whole held hour
        let mid = 12.0 * h as f64 + 5.5;
        let phase = (2.0 * std::f64::consts::PI * mid / DIURNAL_STEPS).sin();
        let mut row = [0.0; WEATHER_DIM];
        for (lead_idx, lead) in FORECAST_LEADS.iter().enumerate() {
            // the run issued at h-1: its lead-1 fields are valid at h, its
            // lead-2 fields at h+1, with one shared error per lead
            let d = driver[h + lead_idx] + weather_rng.normal(0.0, FC_ERROR_SD * *lead as f64);
            let base = lead_idx * WEATHER_PARAMS.len();
            row[base] = 101_000.0 + 600.0 * d + weather_rng.normal(0.0, 10.0);
            row[base + 1] = 285.0 + 5.0 * d + 3.0 * phase + weather_rng.normal(0.0, 0.5);
            row[base + 2] = 284.0 + 4.0 * d + 2.5 * phase + weather_rng.normal(0.0, 0.5);
            row[base + 3] = (60.0 + 15.0 * d + weather_rng.normal(0.0, 1.0)).clamp(0.0, 100.0);
            row[base + 4] = (10.0 + 4.0 * d + weather_rng.normal(0.0, 0.1)).max(0.0);
        }
        features.push(row);
    }

    Ok((
        PowerSeries::new(timestamps, power, SYNTH_CAPACITY_MW)?,
        WeatherSeries::new(hour_ts, features)?,
    ))
}
