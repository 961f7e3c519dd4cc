//! Data pipeline: power and weather ingestion, block-hold alignment,
//! min-max normalization, PCA compression, partitioning, and a synthetic
//! generator for desk-scale experiments.
//!
//! Alignment joins each 5-minute power reading to the forecast vector of the
//! hour containing it, so one hourly weather vector repeats across 12
//! consecutive rows. The prediction target of every row is the next row's
//! power value.

mod csv;
mod pca;
mod synth;

pub use csv::{format_ts, load_power_csv, load_weather_csv, write_power_csv, write_weather_csv};
pub use pca::{pca_fit, pca_project, PCAModel};
pub use synth::{synth_generate, SYNTH_CAPACITY_MW};

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};

pub const POWER_STEP_SECS: i64 = 300;
pub const WEATHER_STEP_SECS: i64 = 3600;
/// Power rows covered by one weather row.
pub const BLOCK_ROWS: usize = (WEATHER_STEP_SECS / POWER_STEP_SECS) as usize;
/// Forecast leads in hours; each hour carries one forecast vector per lead.
pub const FORECAST_LEADS: [i64; 2] = [1, 2];
pub const WEATHER_PARAMS: [&str; 5] =
    ["pressure_pa", "ground_temp_k", "temp2m_k", "rel_humidity_pct", "gust_ms"];
/// Weather features per aligned row: parameters times leads.
pub const WEATHER_DIM: usize = WEATHER_PARAMS.len() * FORECAST_LEADS.len();

/// 5-minute power production series.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub timestamps: Vec<i64>,
    pub power: Vec<f64>,
    pub capacity: f64,
}

impl PowerSeries {
    pub fn new(timestamps: Vec<i64>, power: Vec<f64>, capacity: f64) -> Result<PowerSeries> {
        if capacity <= 0.0 || !capacity.is_finite() {
            return Err(Error::BadCapacity(capacity));
        }
        if timestamps.len() != power.len() {
            return Err(Error::DimensionMismatch {
                op: "PowerSeries::new",
                expected: format!("{} power values", timestamps.len()),
                got: format!("{}", power.len()),
            });
        }
        if timestamps.len() < 2 {
            return Err(Error::TooSmall { what: "power series length", min: 2, got: timestamps.len() });
        }
        for (k, pair) in timestamps.windows(2).enumerate() {
            if pair[1] - pair[0] != POWER_STEP_SECS {
                return Err(Error::Invalid(format!(
                    "power timestamps must increase by {POWER_STEP_SECS} s: row {} ({}) to row {} ({})",
                    k,
                    csv::format_ts(pair[0]),
                    k + 1,
                    csv::format_ts(pair[1])
                )));
            }
        }
        for (k, &p) in power.iter().enumerate() {
            if !p.is_finite() || !(0.0..=capacity).contains(&p) {
                return Err(Error::Invalid(format!(
                    "power value {p} at row {k} outside [0, {capacity}]"
                )));
            }
        }
        Ok(PowerSeries { timestamps, power, capacity })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }
}

/// Hourly forecast series: one row per hour holding the five parameters for
/// each lead, flattened as `[lead-1 params ‖ lead-2 params]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub timestamps: Vec<i64>,
    pub features: Vec<[f64; WEATHER_DIM]>,
}

impl WeatherSeries {
    pub fn new(timestamps: Vec<i64>, features: Vec<[f64; WEATHER_DIM]>) -> Result<WeatherSeries> {
        if timestamps.len() != features.len() {
            return Err(Error::DimensionMismatch {
                op: "WeatherSeries::new",
                expected: format!("{} feature rows", timestamps.len()),
                got: format!("{}", features.len()),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::TooSmall { what: "weather series length", min: 1, got: 0 });
        }
        for (k, pair) in timestamps.windows(2).enumerate() {
            if pair[1] - pair[0] != WEATHER_STEP_SECS {
                return Err(Error::Invalid(format!(
                    "weather timestamps must increase by {WEATHER_STEP_SECS} s: row {} ({}) to row {} ({})",
                    k,
                    csv::format_ts(pair[0]),
                    k + 1,
                    csv::format_ts(pair[1])
                )));
            }
        }
        for (k, row) in features.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("non-finite weather value at hour row {k}")));
            }
            for (lead_idx, _) in FORECAST_LEADS.iter().enumerate() {
                let rh = row[lead_idx * WEATHER_PARAMS.len() + 3];
                if !(0.0..=100.0).contains(&rh) {
                    return Err(Error::Invalid(format!(
                        "relative humidity {rh} at hour row {k} outside [0, 100]"
                    )));
                }
            }
        }
        Ok(WeatherSeries { timestamps, features })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Joined per-step rows: `[power ‖ 10 weather features]` with next-step
/// power targets. Feature storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub timestamps: Vec<i64>,
    features: Vec<f64>,
    width: usize,
    pub targets: Vec<f64>,
    pub capacity: f64,
    pub feature_names: Vec<String>,
    /// `(min, max)` of the power channel once normalized; `None` while raw.
    pub power_scale: Option<(f64, f64)>,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.features[r * self.width..(r + 1) * self.width]
    }

    /// Maps a normalized power value back to megawatts. Identity on a raw
    /// dataset.
    pub fn denormalize_power(&self, v: f64) -> f64 {
        match self.power_scale {
            Some((lo, hi)) => v * (hi - lo) + lo,
            None => v,
        }
    }

    pub fn view(&self, range: Range<usize>) -> Result<DatasetView<'_>> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Invalid(format!(
                "view {range:?} outside dataset of {} rows",
                self.len()
            )));
        }
        Ok(DatasetView { ds: self, range })
    }

    /// Keeps only the power channel (width 1); targets and scaling carry over.
    pub fn power_only(&self) -> AlignedDataset {
        let features: Vec<f64> = (0..self.len()).map(|r| self.row(r)[0]).collect();
        AlignedDataset {
            timestamps: self.timestamps.clone(),
            features,
            width: 1,
            targets: self.targets.clone(),
            capacity: self.capacity,
            feature_names: vec![self.feature_names[0].clone()],
            power_scale: self.power_scale,
        }
    }

    /// Replaces the weather block with its leading-component projection
    /// (width 2: power plus one scalar).
    pub fn project_weather(&self, model: &PCAModel) -> Result<AlignedDataset> {
        if self.width != 1 + WEATHER_DIM {
            return Err(Error::DimensionMismatch {
                op: "project_weather",
                expected: format!("rows of width {}", 1 + WEATHER_DIM),
                got: format!("{}", self.width),
            });
        }
        let mut features = Vec::with_capacity(self.len() * 2);
        for r in 0..self.len() {
            let row = self.row(r);
            features.push(row[0]);
            features.push(pca_project(model, &row[1..])?);
        }
        Ok(AlignedDataset {
            timestamps: self.timestamps.clone(),
            features,
            width: 2,
            targets: self.targets.clone(),
            capacity: self.capacity,
            feature_names: vec![self.feature_names[0].clone(), "weather_pc1".into()],
            power_scale: self.power_scale,
        })
    }

    /// Borrowed weather sub-rows for a row range, as PCA fitting input.
    pub fn weather_rows(&self, range: Range<usize>) -> Result<Vec<&[f64]>> {
        if self.width != 1 + WEATHER_DIM {
            return Err(Error::DimensionMismatch {
                op: "weather_rows",
                expected: format!("rows of width {}", 1 + WEATHER_DIM),
                got: format!("{}", self.width),
            });
        }
        if range.end > self.len() {
            return Err(Error::Invalid(format!(
                "row range {range:?} outside dataset of {} rows",
                self.len()
            )));
        }
        Ok(range.map(|r| &self.row(r)[1..]).collect())
    }
}

/// Read-only window over a contiguous row range of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    ds: &'a AlignedDataset,
    range: Range<usize>,
}

impl<'a> DatasetView<'a> {
    pub fn len(&self) -> usize {
        self.range.end - self.range.start
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn width(&self) -> usize {
        self.ds.width()
    }

    pub fn row(&self, k: usize) -> &'a [f64] {
        self.ds.row(self.range.start + k)
    }

    pub fn target(&self, k: usize) -> f64 {
        self.ds.targets[self.range.start + k]
    }

    pub fn timestamp(&self, k: usize) -> i64 {
        self.ds.timestamps[self.range.start + k]
    }

    pub fn dataset(&self) -> &'a AlignedDataset {
        self.ds
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }
}

/// Joins power to the weather vector of the containing hour. Power rows
/// outside the weather range are trimmed; the final retained row is dropped
/// because it has no next-step target.
pub fn align(power: &PowerSeries, weather: &WeatherSeries) -> Result<AlignedDataset> {
    let hour_of = |ts: i64| ts.div_euclid(WEATHER_STEP_SECS) * WEATHER_STEP_SECS;
    let mut hour_index = HashMap::with_capacity(weather.len());
    for (k, &h) in weather.timestamps.iter().enumerate() {
        hour_index.insert(h, k);
    }
    let first_hour = *weather.timestamps.first().expect("validated non-empty");
    let last_hour = *weather.timestamps.last().expect("validated non-empty");

    let retained: Vec<usize> = (0..power.len())
        .filter(|&r| {
            let h = hour_of(power.timestamps[r]);
            (first_hour..=last_hour).contains(&h)
        })
        .collect();
    if retained.len() < 2 {
        return Err(Error::TooSmall {
            what: "power rows overlapping the weather range",
            min: 2,
            got: retained.len(),
        });
    }

    let mut missing: Vec<i64> = retained
        .iter()
        .map(|&r| hour_of(power.timestamps[r]))
        .filter(|h| !hour_index.contains_key(h))
        .collect();
    missing.dedup();
    if !missing.is_empty() {
        let hours: Vec<String> = missing.iter().map(|&h| csv::format_ts(h)).collect();
        return Err(Error::CoverageGap(hours.join(", ")));
    }

    let width = 1 + WEATHER_DIM;
    let n_out = retained.len() - 1;
    let mut timestamps = Vec::with_capacity(n_out);
    let mut features = Vec::with_capacity(n_out * width);
    let mut targets = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let r = retained[k];
        timestamps.push(power.timestamps[r]);
        features.push(power.power[r]);
        let w = &weather.features[hour_index[&hour_of(power.timestamps[r])]];
        features.extend_from_slice(w);
        targets.push(power.power[retained[k + 1]]);
    }

    let mut feature_names = vec!["power_mw".to_string()];
    for lead in FORECAST_LEADS {
        for p in WEATHER_PARAMS {
            feature_names.push(format!("{p}_lead{lead}"));
        }
    }

    Ok(AlignedDataset {
        timestamps,
        features,
        width,
        targets,
        capacity: power.capacity,
        feature_names,
        power_scale: None,
    })
}

/// Per-column min-max statistics, fitted on the training partition only.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(ds: &AlignedDataset, train: Range<usize>) -> Result<Normalizer> {
        if train.start >= train.end || train.end > ds.len() {
            return Err(Error::Invalid(format!(
                "training range {train:?} outside dataset of {} rows",
                ds.len()
            )));
        }
        let mut mins = vec![f64::INFINITY; ds.width()];
        let mut maxs = vec![f64::NEG_INFINITY; ds.width()];
        for r in train {
            for (col, &v) in ds.row(r).iter().enumerate() {
                mins[col] = mins[col].min(v);
                maxs[col] = maxs[col].max(v);
            }
        }
        for col in 0..ds.width() {
            if maxs[col] <= mins[col] {
                return Err(Error::ConstantFeature {
                    index: col,
                    name: ds.feature_names[col].clone(),
                });
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    /// Maps every feature (and the power targets) through the fitted affine
    /// transform. Values outside the training range map outside [0,1]; no
    /// clipping.
    pub fn apply(&self, ds: &AlignedDataset) -> Result<AlignedDataset> {
        if ds.power_scale.is_some() {
            return Err(Error::Invalid("dataset is already normalized".into()));
        }
        if self.mins.len() != ds.width() {
            return Err(Error::DimensionMismatch {
                op: "Normalizer::apply",
                expected: format!("width {}", self.mins.len()),
                got: format!("{}", ds.width()),
            });
        }
        let mut out = ds.clone();
        for r in 0..ds.len() {
            for col in 0..ds.width() {
                let v = ds.row(r)[col];
                out.features[r * ds.width() + col] =
                    (v - self.mins[col]) / (self.maxs[col] - self.mins[col]);
            }
        }
        for (t, &raw) in out.targets.iter_mut().zip(&ds.targets) {
            *t = (raw - self.mins[0]) / (self.maxs[0] - self.mins[0]);
        }
        out.power_scale = Some((self.mins[0], self.maxs[0]));
        Ok(out)
    }
}

/// Contiguous, disjoint row partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

/// First `train_frac` of rows train, the last `test_len` rows test, and
/// whatever lies between validates. The validation slice must be non-empty.
pub fn split(n_rows: usize, train_frac: f64, test_len: usize) -> Result<Partition> {
    if !(0.0..1.0).contains(&train_frac) || train_frac == 0.0 {
        return Err(Error::Invalid(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if test_len == 0 {
        return Err(Error::TooSmall { what: "test length", min: 1, got: 0 });
    }
    let train_end = (n_rows as f64 * train_frac).floor() as usize;
    let fits = |n: usize| {
        let te = (n as f64 * train_frac).floor() as usize;
        te >= 1 && n >= test_len && te < n - test_len
    };
    if !fits(n_rows) {
        let mut min_n = (((test_len + 1) as f64) / (1.0 - train_frac)).ceil() as usize;
        while !fits(min_n) {
            min_n += 1;
        }
        return Err(Error::TooSmall {
            what: "dataset rows for the requested split",
            min: min_n,
            got: n_rows,
        });
    }
    let test_start = n_rows - test_len;
    Ok(Partition {
        train: 0..train_end,
        validation: train_end..test_start,
        test: test_start..n_rows,
    })
}
