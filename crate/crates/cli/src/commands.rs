//! The four pipeline commands plus the shared data preparation they sit on.
//!
//! Exit-code contract: usage and configuration problems are [`Failure::Usage`]
//! (exit 2), everything discovered while doing the work (I/O, bad data files,
//! divergence) is [`Failure::Runtime`] (exit 1).

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gustcast_core::cells::{
    load_checkpoint, persistence_predict, save_checkpoint, CellFamily, CellParams, VariantConfig,
};
use gustcast_core::data::{
    align, format_ts, load_power_csv, load_weather_csv, pca_fit, split, synth_generate,
    write_power_csv, write_weather_csv, AlignedDataset, Partition, PowerSeries, WeatherSeries,
    BLOCK_ROWS, POWER_STEP_SECS, SYNTH_CAPACITY_MW,
};
use gustcast_core::data::Normalizer;
use gustcast_core::hyperopt::{run_ga, GAConfig, Genome, TrainFitness};
use gustcast_core::linalg::Rng;
use gustcast_core::metrics::{eval_csv_row, EvalReport, EVAL_CSV_HEADER};
use gustcast_core::trainer::{
    predict_view, run_replicates, train_hybrid, view_truth_mw, Hyperparams, TrainConfig,
};

use crate::config::RunConfig;

pub enum Failure {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// I/O or computation failure on valid inputs; exit code 1.
    Runtime(anyhow::Error),
}

impl From<gustcast_core::Error> for Failure {
    fn from(e: gustcast_core::Error) -> Failure {
        Failure::Runtime(anyhow::Error::new(e))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Joins collected violations into one usage failure.
fn usage_list(header: &str, violations: Vec<String>) -> Failure {
    let mut msg = String::from(header);
    for v in &violations {
        let _ = write!(msg, "\n  - {v}");
    }
    usage(msg)
}

/// Collects a resolver's violations instead of stopping at the first, so a
/// bad config reports everything wrong with it in one pass.
fn gather<T>(res: Result<T, Vec<String>>, violations: &mut Vec<String>) -> Option<T> {
    match res {
        Ok(v) => Some(v),
        Err(mut v) => {
            violations.append(&mut v);
            None
        }
    }
}

fn failure_to_list(f: Failure) -> Vec<String> {
    match f {
        Failure::Usage(m) => vec![m],
        Failure::Runtime(e) => vec![format!("{e:#}")],
    }
}

/// Flags shared by every command, already merged over the config file.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Ctx {
    fn out_dir(&self) -> Result<PathBuf, Failure> {
        self.out
            .clone()
            .or_else(|| self.cfg.out_dir.clone())
            .ok_or_else(|| usage("no output directory: pass --out or set `out.dir`"))
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    crate::config::parse(&text)
        .map_err(|v| usage_list(&format!("invalid config {}:", path.display()), v))
}

/// Where the rows come from. The synth source generates in memory, so a
/// config can drive the whole pipeline without intermediate files.
enum Source {
    Synth { seed: u64, points: usize },
    Csv { power: PathBuf, weather: PathBuf, capacity: f64 },
}

fn resolve_source(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<Source, Vec<String>> {
    let mut violations = Vec::new();
    let synth_keys = cfg.synth_seed.is_some() || cfg.synth_points.is_some();
    let csv_keys =
        cfg.power_csv.is_some() || cfg.weather_csv.is_some() || cfg.capacity_mw.is_some();
    if synth_keys && csv_keys {
        violations.push(
            "both synth.* and data.*/capacity_mw present; configure exactly one data source"
                .into(),
        );
        return Err(violations);
    }
    if csv_keys {
        if cfg.power_csv.is_none() {
            violations.push("data.power_csv is required with the CSV source".into());
        }
        if cfg.weather_csv.is_none() {
            violations.push("data.weather_csv is required with the CSV source".into());
        }
        match cfg.capacity_mw {
            None => violations.push("capacity_mw is required with the CSV source".into()),
            Some(c) if !(c.is_finite() && c > 0.0) => {
                violations.push(format!("capacity_mw must be a positive number, got {c}"))
            }
            Some(_) => {}
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        return Ok(Source::Csv {
            power: cfg.power_csv.clone().expect("checked above"),
            weather: cfg.weather_csv.clone().expect("checked above"),
            capacity: cfg.capacity_mw.expect("checked above"),
        });
    }
    let Some(points) = cfg.synth_points else {
        violations.push(
            "no data source: set synth.points (+ synth.seed) or data.power_csv + data.weather_csv + capacity_mw"
                .into(),
        );
        return Err(violations);
    };
    if let Err(e) = check_points(points) {
        violations.push(e);
        return Err(violations);
    }
    Ok(Source::Synth { seed: seed_flag.or(cfg.synth_seed).unwrap_or(1), points })
}

fn check_points(points: usize) -> Result<(), String> {
    if points == 0 || points % BLOCK_ROWS != 0 {
        return Err(format!(
            "synth points must be a positive multiple of {BLOCK_ROWS}, got {points}"
        ));
    }
    Ok(())
}

fn load_source(source: &Source) -> Result<(PowerSeries, WeatherSeries), Failure> {
    match source {
        Source::Synth { seed, points } => Ok(synth_generate(*seed, *points)?),
        Source::Csv { power, weather, capacity } => {
            Ok((load_power_csv(power, *capacity)?, load_weather_csv(weather)?))
        }
    }
}

/// Feature-space switches. PCA and power-only both shrink the row, so they
/// are mutually exclusive; compression needs weather columns to compress.
struct VariantFlags {
    family: CellFamily,
    cifg: bool,
    peephole: bool,
    compression: bool,
    pca: bool,
    power_only: bool,
}

fn resolve_variant(cfg: &RunConfig) -> Result<VariantFlags, Vec<String>> {
    let flags = VariantFlags {
        family: cfg.family.unwrap_or(CellFamily::Mlstm),
        cifg: cfg.cifg.unwrap_or(false),
        peephole: cfg.peephole.unwrap_or(false),
        compression: cfg.compression.unwrap_or(false),
        pca: cfg.pca.unwrap_or(false),
        power_only: cfg.power_only.unwrap_or(false),
    };
    let mut violations = Vec::new();
    if flags.family == CellFamily::Generic
        && (flags.cifg || flags.peephole || flags.compression)
    {
        violations
            .push("variant.family = generic takes no cifg/peephole/compression switches".into());
    }
    if flags.pca && flags.power_only {
        violations.push("variant.pca and variant.power_only are mutually exclusive".into());
    }
    if flags.compression && flags.power_only {
        violations.push("variant.compression needs weather inputs; disable variant.power_only".into());
    }
    if violations.is_empty() {
        Ok(flags)
    } else {
        Err(violations)
    }
}

fn resolve_split(cfg: &RunConfig) -> Result<(f64, usize), Vec<String>> {
    let frac = cfg.train_frac.unwrap_or(0.8);
    let mut violations = Vec::new();
    if !(frac.is_finite() && 0.0 < frac && frac < 1.0) {
        violations.push(format!("split.train_frac must lie in (0, 1), got {frac}"));
    }
    match cfg.test_len {
        Some(len) if len < 2 => {
            violations.push(format!("split.test_len must be at least 2, got {len}"))
        }
        Some(_) => {}
        None => violations.push("split.test_len is required".into()),
    }
    if violations.is_empty() {
        Ok((frac, cfg.test_len.expect("checked above")))
    } else {
        Err(violations)
    }
}

fn resolve_hyper(cfg: &RunConfig) -> Result<Hyperparams, Vec<String>> {
    let hyper = Hyperparams {
        learning_rate: cfg.learning_rate.unwrap_or(0.05),
        cell_dim: cfg.cell_dim.unwrap_or(12),
        block_len: cfg.block_len.unwrap_or(16),
    };
    hyper.validate().map_err(|e| vec![e.to_string()])?;
    Ok(hyper)
}

fn resolve_train(cfg: &RunConfig, hyper: Hyperparams, seed_flag: Option<u64>) -> Result<TrainConfig, Vec<String>> {
    let mut tc = TrainConfig::new(hyper);
    if let Some(epochs) = cfg.epochs {
        tc.epochs = epochs;
    }
    tc.seed = seed_flag.or(cfg.train_seed).unwrap_or(tc.seed);
    if let Some(reps) = cfg.replicates {
        tc.replicates = reps;
    }
    tc.grad_clip = cfg.grad_clip;
    let mut violations = Vec::new();
    if tc.epochs == 0 {
        violations.push("train.epochs must be at least 1".into());
    }
    if tc.replicates == 0 {
        violations.push("train.replicates must be at least 1".into());
    }
    if let Some(clip) = tc.grad_clip {
        if !(clip.is_finite() && clip > 0.0) {
            violations.push(format!("train.grad_clip must be a positive number, got {clip}"));
        }
    }
    if violations.is_empty() {
        Ok(tc)
    } else {
        Err(violations)
    }
}

fn resolve_ga(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<GAConfig, Vec<String>> {
    let mut ga = GAConfig::new(seed_flag.or(cfg.ga_seed).unwrap_or(1));
    if let Some(v) = cfg.ga_population {
        ga.population = v;
    }
    if let Some(v) = cfg.ga_partial_epochs {
        ga.partial_epochs = v;
    }
    if let Some(v) = cfg.ga_elite {
        ga.elite = v;
    }
    if let Some(v) = cfg.ga_generations {
        ga.generations = v;
    }
    if let Some(v) = cfg.ga_mutation_rate {
        ga.mutation_rate = v;
    }
    ga.validate().map_err(|e| vec![e.to_string()])?;
    Ok(ga)
}

/// Everything the model-facing commands share: normalized (and possibly
/// projected) rows plus the train/validation/test partition. Normalization
/// and PCA fit on the train range only, so re-deriving this at eval time
/// reproduces the exact training-time feature space.
struct Prepared {
    ds: AlignedDataset,
    part: Partition,
}

fn prepare(source: &Source, flags: &VariantFlags, frac: f64, test_len: usize) -> Result<Prepared, Failure> {
    let (power, weather) = load_source(source)?;
    let raw = align(&power, &weather)?;
    let part = split(raw.len(), frac, test_len)
        .map_err(|e| usage(format!("split does not fit the data: {e}")))?;
    let norm = Normalizer::fit(&raw, part.train.clone())?;
    let mut ds = norm.apply(&raw)?;
    if flags.power_only {
        ds = ds.power_only();
    } else if flags.pca {
        let rows = ds.weather_rows(part.train.clone())?;
        let model = pca_fit(&rows)?;
        ds = ds.project_weather(&model)?;
    }
    Ok(Prepared { ds, part })
}

/// Human-readable variant tag used as the model name in eval exports.
fn variant_label(v: &VariantConfig) -> String {
    let mut s = match v.family() {
        CellFamily::Generic => "generic",
        CellFamily::Mlstm => "mlstm",
    }
    .to_string();
    if v.cifg() {
        s.push_str("+cifg");
    }
    if v.peephole() {
        s.push_str("+peephole");
    }
    if v.compression() {
        s.push_str("+compression");
    }
    s
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn eval_report_row(name: &str, rep: &EvalReport, moe95: Option<f64>) -> String {
    eval_csv_row(name, rep.nmae, moe95, rep.naive_ratio, rep.mae, rep.n_points)
}

fn persistence_report(truth: &[f64], capacity: f64) -> Result<EvalReport, Failure> {
    let naive = persistence_predict(truth)?;
    Ok(EvalReport::build(&naive, truth, capacity)?)
}

pub fn cmd_synth(ctx: &Ctx, points_flag: Option<usize>) -> Result<(), Failure> {
    let out = ctx.out_dir()?;
    let points = points_flag
        .or(ctx.cfg.synth_points)
        .ok_or_else(|| usage("no point count: pass --points or set `synth.points`"))?;
    check_points(points).map_err(usage)?;
    let seed = ctx.seed.or(ctx.cfg.synth_seed).unwrap_or(1);

    let (power, weather) = synth_generate(seed, points)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_power_csv(&power, out.join("power.csv"))?;
    write_weather_csv(&weather, out.join("weather.csv"))?;
    if !ctx.quiet {
        println!(
            "wrote {} power rows and {} weather rows (seed {seed}) to {}",
            power.len(),
            weather.len() * gustcast_core::data::FORECAST_LEADS.len(),
            out.display()
        );
    }
    Ok(())
}

pub fn cmd_train(ctx: &Ctx) -> Result<(), Failure> {
    let mut violations = Vec::new();
    let source = gather(resolve_source(&ctx.cfg, None), &mut violations);
    let flags = gather(resolve_variant(&ctx.cfg), &mut violations);
    let split_cfg = gather(resolve_split(&ctx.cfg), &mut violations);
    let hyper = gather(resolve_hyper(&ctx.cfg), &mut violations);
    let tcfg = hyper
        .and_then(|h| gather(resolve_train(&ctx.cfg, h, ctx.seed), &mut violations));
    let out = gather(ctx.out_dir().map_err(failure_to_list), &mut violations);
    if !violations.is_empty() {
        return Err(usage_list("configuration errors:", violations));
    }
    let (source, flags, split_cfg, hyper, tcfg, out) = (
        source.expect("no violations"),
        flags.expect("no violations"),
        split_cfg.expect("no violations"),
        hyper.expect("no violations"),
        tcfg.expect("no violations"),
        out.expect("no violations"),
    );

    let prep = prepare(&source, &flags, split_cfg.0, split_cfg.1)?;
    let variant = VariantConfig::new(
        flags.family,
        flags.cifg,
        flags.peephole,
        flags.compression,
        prep.ds.width(),
        hyper.cell_dim,
    )
    .map_err(|e| usage(e.to_string()))?;
    let train = prep.ds.view(prep.part.train.clone())?;
    let validation = prep.ds.view(prep.part.validation.clone())?;
    let test = prep.ds.view(prep.part.test.clone())?;
    let capacity = prep.ds.capacity;
    let label = variant_label(&variant);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut eval = String::from(EVAL_CSV_HEADER);
    eval.push('\n');

    if tcfg.replicates == 1 {
        let params = CellParams::init(variant, &mut Rng::new(tcfg.seed))?;
        let (trained, history) = train_hybrid(params, &train, &validation, &tcfg)?;
        let pred = predict_view(&trained, &test)?;
        let truth = view_truth_mw(&test);
        let report = EvalReport::build(&pred, &truth, capacity)?;
        save_checkpoint(&trained, &out.join("replicate_0.ckpt"))?;
        history.write_csv(out.join("history_0.csv"))?;
        eval.push_str(&eval_report_row("replicate_0", &report, None));
        eval.push('\n');
        // a single replicate has no variance to report
        eval.push_str(&eval_report_row(&label, &report, None));
        eval.push('\n');
        if !ctx.quiet {
            println!("replicate 0: test NMAE {:.3}%, naive ratio {:.3}", report.nmae, report.naive_ratio);
        }
        let naive = persistence_report(&truth, capacity)?;
        eval.push_str(&eval_report_row("persistence", &naive, None));
        eval.push('\n');
    } else {
        let summary = run_replicates(variant, &train, &validation, &test, &tcfg)?;
        for (r, outcome) in summary.outcomes.iter().enumerate() {
            save_checkpoint(&outcome.params, &out.join(format!("replicate_{r}.ckpt")))?;
            outcome.history.write_csv(out.join(format!("history_{r}.csv")))?;
            eval.push_str(&eval_report_row(&format!("replicate_{r}"), &outcome.report, None));
            eval.push('\n');
            if !ctx.quiet {
                println!(
                    "replicate {r}: test NMAE {:.3}%, naive ratio {:.3}",
                    outcome.report.nmae, outcome.report.naive_ratio
                );
            }
        }
        let n = summary.outcomes.len() as f64;
        let mean_nr =
            summary.outcomes.iter().map(|o| o.report.naive_ratio).sum::<f64>() / n;
        let mean_mae = summary.outcomes.iter().map(|o| o.report.mae).sum::<f64>() / n;
        let n_points = summary.outcomes[0].report.n_points;
        eval.push_str(&eval_csv_row(
            &label,
            summary.nmae_stats.mean,
            Some(summary.nmae_stats.moe95),
            mean_nr,
            mean_mae,
            n_points,
        ));
        eval.push('\n');
        if !ctx.quiet {
            println!(
                "{label}: test NMAE {:.3}% +/- {:.3} over {} replicates",
                summary.nmae_stats.mean,
                summary.nmae_stats.moe95,
                tcfg.replicates
            );
        }
        let truth = view_truth_mw(&test);
        let naive = persistence_report(&truth, capacity)?;
        eval.push_str(&eval_report_row("persistence", &naive, None));
        eval.push('\n');
    }

    write_file(&out.join("eval.csv"), &eval)?;
    if !ctx.quiet {
        println!("wrote eval.csv and per-replicate artifacts to {}", out.display());
    }
    Ok(())
}

pub fn cmd_hyperopt(ctx: &Ctx) -> Result<(), Failure> {
    let mut violations = Vec::new();
    let source = gather(resolve_source(&ctx.cfg, None), &mut violations);
    let flags = gather(resolve_variant(&ctx.cfg), &mut violations);
    let split_cfg = gather(resolve_split(&ctx.cfg), &mut violations);
    let ga = gather(resolve_ga(&ctx.cfg, ctx.seed), &mut violations);
    let out = gather(ctx.out_dir().map_err(failure_to_list), &mut violations);
    if let Some(clip) = ctx.cfg.grad_clip {
        if !(clip.is_finite() && clip > 0.0) {
            violations.push(format!("train.grad_clip must be a positive number, got {clip}"));
        }
    }
    if !violations.is_empty() {
        return Err(usage_list("configuration errors:", violations));
    }
    let (source, flags, split_cfg, ga, out) = (
        source.expect("no violations"),
        flags.expect("no violations"),
        split_cfg.expect("no violations"),
        ga.expect("no violations"),
        out.expect("no violations"),
    );

    let prep = prepare(&source, &flags, split_cfg.0, split_cfg.1)?;
    let fitness = TrainFitness {
        family: flags.family,
        cifg: flags.cifg,
        peephole: flags.peephole,
        compression: flags.compression,
        train: prep.ds.view(prep.part.train.clone())?,
        validation: prep.ds.view(prep.part.validation.clone())?,
        partial_epochs: ga.partial_epochs,
        grad_clip: ctx.cfg.grad_clip,
    };
    let (best, log) = run_ga(&ga, &fitness)?;
    let best_fitness = log.best().map(|(_, f)| f).unwrap_or(f64::INFINITY);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    log.write_csv(out.join("ga_log.csv"))?;
    write_file(&out.join("best.cfg"), &genome_fragment(&best, best_fitness))?;
    if !ctx.quiet {
        println!(
            "best genome: learning_rate {}, cell_dim {}, block_len {} (validation NMAE {best_fitness:.3}%)",
            best.learning_rate, best.cell_dim, best.block_len
        );
        println!("wrote ga_log.csv and best.cfg to {}", out.display());
    }
    Ok(())
}

/// The winning genome in config syntax, ready to paste into a run config.
fn genome_fragment(best: &Genome, fitness: f64) -> String {
    format!(
        "# hyperopt winner, validation NMAE {fitness}%\n\
         hyper.learning_rate = {}\n\
         hyper.cell_dim = {}\n\
         hyper.block_len = {}\n",
        best.learning_rate, best.cell_dim, best.block_len
    )
}

fn parse_range(raw: &str) -> Result<Range<usize>, String> {
    let Some((a, b)) = raw.split_once("..") else {
        return Err(format!("expected `start..end`, got {raw:?}"));
    };
    let start: usize = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let end: usize = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if start >= end {
        return Err(format!("empty range {start}..{end}"));
    }
    Ok(start..end)
}

pub fn cmd_eval(
    ctx: &Ctx,
    checkpoint: &Path,
    data: Option<&Path>,
    range: Option<&str>,
) -> Result<(), Failure> {
    let mut violations = Vec::new();
    let source = if let Some(dir) = data {
        // the directory layout cmd_synth writes; capacity_mw may still
        // override the synthetic farm size
        Some(Source::Csv {
            power: dir.join("power.csv"),
            weather: dir.join("weather.csv"),
            capacity: ctx.cfg.capacity_mw.unwrap_or(SYNTH_CAPACITY_MW),
        })
    } else {
        gather(resolve_source(&ctx.cfg, None), &mut violations)
    };
    let flags = gather(resolve_variant(&ctx.cfg), &mut violations);
    let split_cfg = gather(resolve_split(&ctx.cfg), &mut violations);
    let out = gather(ctx.out_dir().map_err(failure_to_list), &mut violations);
    if !violations.is_empty() {
        return Err(usage_list("configuration errors:", violations));
    }
    let (source, flags, split_cfg, out) = (
        source.expect("no violations"),
        flags.expect("no violations"),
        split_cfg.expect("no violations"),
        out.expect("no violations"),
    );

    let params = load_checkpoint(checkpoint)?;
    let prep = prepare(&source, &flags, split_cfg.0, split_cfg.1)?;
    if params.variant.input_dim() != prep.ds.width() {
        return Err(usage(format!(
            "checkpoint expects {} input columns but the prepared data has {}; \
             check variant.power_only / variant.pca against the training config",
            params.variant.input_dim(),
            prep.ds.width()
        )));
    }

    let test = prep.part.test.clone();
    let range = match range {
        Some(raw) => {
            let r = parse_range(raw).map_err(usage)?;
            if r.start < test.start || r.end > test.end {
                return Err(usage(format!(
                    "range {}..{} is outside the test view {}..{}; \
                     evaluation is restricted to held-out rows",
                    r.start, r.end, test.start, test.end
                )));
            }
            r
        }
        None => test,
    };

    let view = prep.ds.view(range.clone())?;
    let pred = predict_view(&params, &view)?;
    let truth = view_truth_mw(&view);
    let capacity = prep.ds.capacity;
    let report = EvalReport::build(&pred, &truth, capacity)?;
    let naive = persistence_report(&truth, capacity)?;

    let label = variant_label(&params.variant);
    let mut eval = String::from(EVAL_CSV_HEADER);
    eval.push('\n');
    eval.push_str(&eval_report_row(&label, &report, None));
    eval.push('\n');
    eval.push_str(&eval_report_row("persistence", &naive, None));
    eval.push('\n');

    // each row is stamped with the time the prediction is for
    let mut plot = String::from("timestamp,truth_mw,prediction_mw");
    plot.push('\n');
    for k in 0..view.len() {
        let _ = writeln!(
            plot,
            "{},{},{}",
            format_ts(view.timestamp(k) + POWER_STEP_SECS),
            truth[k],
            pred[k]
        );
    }

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_file(&out.join("eval.csv"), &eval)?;
    write_file(&out.join("stepplot.csv"), &plot)?;
    if !ctx.quiet {
        println!(
            "{label} over rows {}..{}: NMAE {:.3}%, naive ratio {:.3}",
            range.start, range.end, report.nmae, report.naive_ratio
        );
        println!("wrote eval.csv and stepplot.csv to {}", out.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_rules() {
        let mut cfg = RunConfig::default();
        let errs = resolve_source(&cfg, None).err().unwrap();
        assert!(errs[0].contains("no data source"));

        cfg.synth_points = Some(24);
        assert!(matches!(
            resolve_source(&cfg, None).unwrap(),
            Source::Synth { seed: 1, points: 24 }
        ));
        assert!(matches!(
            resolve_source(&cfg, Some(9)).unwrap(),
            Source::Synth { seed: 9, .. }
        ));

        cfg.synth_points = Some(13);
        let errs = resolve_source(&cfg, None).err().unwrap();
        assert!(errs[0].contains("multiple of 12"));

        cfg.synth_points = Some(24);
        cfg.capacity_mw = Some(10.0);
        let errs = resolve_source(&cfg, None).err().unwrap();
        assert!(errs[0].contains("exactly one data source"));

        let csv = RunConfig {
            power_csv: Some("p.csv".into()),
            ..RunConfig::default()
        };
        let errs = resolve_source(&csv, None).err().unwrap();
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert!(errs[0].contains("data.weather_csv"));
        assert!(errs[1].contains("capacity_mw"));
    }

    #[test]
    fn variant_rules() {
        let mut cfg = RunConfig::default();
        cfg.family = Some(CellFamily::Generic);
        cfg.cifg = Some(true);
        cfg.pca = Some(true);
        cfg.power_only = Some(true);
        let errs = resolve_variant(&cfg).err().unwrap();
        assert_eq!(errs.len(), 2, "{errs:?}");

        cfg.cifg = None;
        cfg.pca = None;
        cfg.compression = Some(true);
        let errs = resolve_variant(&cfg).err().unwrap();
        assert!(errs.iter().any(|e| e.contains("compression")));
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("3..9").unwrap(), 3..9);
        assert_eq!(parse_range(" 10 .. 12 ").unwrap(), 10..12);
        assert!(parse_range("9..3").is_err());
        assert!(parse_range("5..5").is_err());
        assert!(parse_range("abc").is_err());
        assert!(parse_range("1..x").is_err());
    }

    #[test]
    fn genome_fragment_reparses() {
        let g = Genome { learning_rate: 0.031622776601683794, cell_dim: 24, block_len: 12 };
        let cfg = crate::config::parse(&genome_fragment(&g, 4.25)).unwrap();
        assert_eq!(cfg.learning_rate, Some(g.learning_rate));
        assert_eq!(cfg.cell_dim, Some(24));
        assert_eq!(cfg.block_len, Some(12));
    }

    #[test]
    fn variant_labels() {
        let v = VariantConfig::new(CellFamily::Mlstm, true, false, true, 11, 4).unwrap();
        assert_eq!(variant_label(&v), "mlstm+cifg+compression");
        let v = VariantConfig::new(CellFamily::Generic, false, false, false, 1, 4).unwrap();
        assert_eq!(variant_label(&v), "generic");
    }
}
