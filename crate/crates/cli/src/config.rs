//! Run configuration: a UTF-8 `key = value` file, `#` for comment lines.
//!
//! Every key is checked against the schema up front and all violations are
//! reported together, so a bad file fails once with the complete list
//! instead of one error per rerun. Which keys are required depends on the
//! command; those checks live with the commands and also report in bulk.

use std::collections::BTreeSet;
use std::path::PathBuf;

use gustcast_core::cells::CellFamily;

/// Typed view of the config file. Every field optional: commands decide what
/// they require and what defaults to apply.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub power_csv: Option<PathBuf>,
    pub weather_csv: Option<PathBuf>,
    pub synth_seed: Option<u64>,
    pub synth_points: Option<usize>,
    pub capacity_mw: Option<f64>,
    pub family: Option<CellFamily>,
    pub cifg: Option<bool>,
    pub peephole: Option<bool>,
    pub compression: Option<bool>,
    pub pca: Option<bool>,
    pub power_only: Option<bool>,
    pub learning_rate: Option<f64>,
    pub cell_dim: Option<usize>,
    pub block_len: Option<usize>,
    pub epochs: Option<usize>,
    pub train_seed: Option<u64>,
    pub replicates: Option<usize>,
    pub grad_clip: Option<f64>,
    pub train_frac: Option<f64>,
    pub test_len: Option<usize>,
    pub ga_population: Option<usize>,
    pub ga_partial_epochs: Option<usize>,
    pub ga_elite: Option<usize>,
    pub ga_generations: Option<usize>,
    pub ga_mutation_rate: Option<f64>,
    pub ga_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Parses a config file body. On any violation the full list comes back
/// instead of a partial config.
pub fn parse(text: &str) -> Result<RunConfig, Vec<String>> {
    let mut cfg = RunConfig::default();
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            violations.push(format!("line {line}: expected `key = value`, got {trimmed:?}"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            violations.push(format!("line {line}: key `{key}` has an empty value"));
            continue;
        }
        if !seen.insert(key.to_string()) {
            violations.push(format!("line {line}: duplicate key `{key}`"));
            continue;
        }
        set_key(&mut cfg, key, value, line, &mut violations);
    }
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(violations)
    }
}

fn set_key(cfg: &mut RunConfig, key: &str, value: &str, line: usize, out: &mut Vec<String>) {
    fn typed<T: std::str::FromStr>(
        value: &str,
        line: usize,
        key: &str,
        what: &str,
        out: &mut Vec<String>,
    ) -> Option<T> {
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                out.push(format!("line {line}: key `{key}` expects {what}, got {value:?}"));
                None
            }
        }
    }
    let f = |v: &str, k: &str, out: &mut Vec<String>| typed::<f64>(v, line, k, "a number", out);
    let n = |v: &str, k: &str, out: &mut Vec<String>| typed::<usize>(v, line, k, "a non-negative integer", out);
    let u = |v: &str, k: &str, out: &mut Vec<String>| typed::<u64>(v, line, k, "a non-negative integer", out);
    let b = |v: &str, k: &str, out: &mut Vec<String>| typed::<bool>(v, line, k, "`true` or `false`", out);

    match key {
        "data.power_csv" => cfg.power_csv = Some(PathBuf::from(value)),
        "data.weather_csv" => cfg.weather_csv = Some(PathBuf::from(value)),
        "synth.seed" => cfg.synth_seed = u(value, key, out),
        "synth.points" => cfg.synth_points = n(value, key, out),
        "capacity_mw" => cfg.capacity_mw = f(value, key, out),
        "variant.family" => match value {
            "generic" => cfg.family = Some(CellFamily::Generic),
            "mlstm" => cfg.family = Some(CellFamily::Mlstm),
            _ => out.push(format!(
                "line {line}: key `variant.family` expects `generic` or `mlstm`, got {value:?}"
            )),
        },
        "variant.cifg" => cfg.cifg = b(value, key, out),
        "variant.peephole" => cfg.peephole = b(value, key, out),
        "variant.compression" => cfg.compression = b(value, key, out),
        "variant.pca" => cfg.pca = b(value, key, out),
        "variant.power_only" => cfg.power_only = b(value, key, out),
        "hyper.learning_rate" => cfg.learning_rate = f(value, key, out),
        "hyper.cell_dim" => cfg.cell_dim = n(value, key, out),
        "hyper.block_len" => cfg.block_len = n(value, key, out),
        "train.epochs" => cfg.epochs = n(value, key, out),
        "train.seed" => cfg.train_seed = u(value, key, out),
        "train.replicates" => cfg.replicates = n(value, key, out),
        "train.grad_clip" => cfg.grad_clip = f(value, key, out),
        "split.train_frac" => cfg.train_frac = f(value, key, out),
        "split.test_len" => cfg.test_len = n(value, key, out),
        "ga.population" => cfg.ga_population = n(value, key, out),
        "ga.partial_epochs" => cfg.ga_partial_epochs = n(value, key, out),
        "ga.elite" => cfg.ga_elite = n(value, key, out),
        "ga.generations" => cfg.ga_generations = n(value, key, out),
        "ga.mutation_rate" => cfg.ga_mutation_rate = f(value, key, out),
        "ga.seed" => cfg.ga_seed = u(value, key, out),
        "out.dir" => cfg.out_dir = Some(PathBuf::from(value)),
        _ => out.push(format!("line {line}: unknown key `{key}`")),
    }
}
