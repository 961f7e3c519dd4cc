//! Hybrid backpropagation: block-truncated BPTT with cross-block state
//! carryover, plus the replicate experiment protocol.
//!
//! One iteration consumes one block of consecutive rows. The cell and hidden
//! states left by a block seed the next block as constants; gradients never
//! cross a block boundary. A sequential cursor wraps to the start of the
//! training view when fewer than a full block remains.

use crate::cells::{
    backward_step, forward_step, CellGrads, CellParams, CellState, StateGrad, VariantConfig,
};
use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::metrics::{margin_of_error_95, nmae, EvalReport, ReplicateStats};

/// History record cadence, in iterations.
pub const HISTORY_EVERY: usize = 100;

/// The three tuned hyperparameters: SGD step size, state width, and the
/// number of rows unrolled per iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub cell_dim: usize,
    pub block_len: usize,
}

impl Hyperparams {
    /// Full validity as demanded of configured experiments. The trainer
    /// itself additionally tolerates a zero learning rate (a null step),
    /// which is useful for dissecting training behavior.
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Invalid(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if self.cell_dim < 1 {
            return Err(Error::TooSmall { what: "cell_dim", min: 1, got: self.cell_dim });
        }
        if self.block_len < 2 {
            return Err(Error::TooSmall { what: "block_len", min: 2, got: self.block_len });
        }
        Ok(())
    }
}

/// Training objective. MSE is the only implemented loss; the enum keeps the
/// config surface explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hyper: Hyperparams,
    /// Total iterations; one parameter update each.
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub replicates: usize,
    /// Optional global-norm gradient clip. Off by default: divergence is a
    /// reportable finding, not something to mask.
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    pub fn new(hyper: Hyperparams) -> TrainConfig {
        TrainConfig {
            hyper,
            epochs: 160_000,
            seed: 1,
            loss: LossKind::Mse,
            replicates: 5,
            grad_clip: None,
        }
    }
}

/// Mean squared error and its gradient `2*(pred - truth)/N`.
pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            op: "mse_loss",
            expected: format!("two non-empty series of equal length (truth has {})", truth.len()),
            got: format!("prediction of length {}", pred.len()),
        });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut d = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(truth) {
        let e = p - t;
        loss += e * e / n;
        d.push(2.0 * e / n);
    }
    Ok((loss, d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_nmae: f64,
}

/// Training progression, recorded every [`HISTORY_EVERY`] iterations and at
/// the final one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

pub const HISTORY_HEADER: &str = "iteration,train_loss,val_nmae";

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.train_loss, r.val_nmae));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Stateful training loop over one view. [`Trainer::step`] runs exactly one
/// block iteration and one SGD update; callers inspect the carried state
/// between steps.
pub struct Trainer<'a> {
    params: CellParams,
    view: DatasetView<'a>,
    lr: f64,
    block_len: usize,
    grad_clip: Option<f64>,
    state: CellState,
    grads: CellGrads,
    cursor: usize,
    iteration: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        params: CellParams,
        view: DatasetView<'a>,
        hyper: &Hyperparams,
        grad_clip: Option<f64>,
    ) -> Result<Trainer<'a>> {
        params.validate()?;
        if view.width() != params.variant.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "Trainer::new",
                expected: format!("rows of width {}", params.variant.input_dim()),
                got: format!("{}", view.width()),
            });
        }
        if hyper.block_len < 2 {
            return Err(Error::TooSmall { what: "block_len", min: 2, got: hyper.block_len });
        }
        if view.len() < hyper.block_len {
            return Err(Error::TooSmall {
                what: "training rows (need one full block)",
                min: hyper.block_len,
                got: view.len(),
            });
        }
        if !hyper.learning_rate.is_finite() || hyper.learning_rate < 0.0 {
            return Err(Error::Invalid(format!(
                "learning_rate must be finite and non-negative, got {}",
                hyper.learning_rate
            )));
        }
        if hyper.cell_dim != params.variant.cell_dim() {
            return Err(Error::InvalidVariant(format!(
                "hyperparameter cell_dim {} disagrees with the model's {}",
                hyper.cell_dim,
                params.variant.cell_dim()
            )));
        }
        let n = params.variant.cell_dim();
        Ok(Trainer {
            grads: CellGrads::zeros(params.variant),
            params,
            view,
            lr: hyper.learning_rate,
            block_len: hyper.block_len,
            grad_clip,
            state: CellState::zeros(n),
            cursor: 0,
            iteration: 0,
        })
    }

    /// One iteration: unroll a block, backpropagate inside it, update once.
    /// Returns the block's training loss.
    pub fn step(&mut self) -> Result<f64> {
        let b = self.block_len;
        let mut caches = Vec::with_capacity(b);
        let mut preds = Vec::with_capacity(b);
        let mut truths = Vec::with_capacity(b);
        let mut state = self.state.clone();
        for k in 0..b {
            let (next, pred, cache) = forward_step(&self.params, &state, self.view.row(self.cursor + k))?;
            caches.push(cache);
            preds.push(pred);
            truths.push(self.view.target(self.cursor + k));
            state = next;
        }
        let (loss, d_pred) = mse_loss(&preds, &truths)?;
        self.iteration += 1;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: self.iteration });
        }

        self.grads.zero();
        let mut sg = StateGrad::zeros(self.params.variant.cell_dim());
        for k in (0..b).rev() {
            let (prev, _dx) = backward_step(&self.params, &caches[k], d_pred[k], &sg, &mut self.grads)?;
            sg = prev;
        }
        // sg now holds the gradient w.r.t. the carried-in state; dropping it
        // is what truncates backpropagation at the block boundary.
        if let Some(limit) = self.grad_clip {
            let norm = self.grads.l2_norm();
            if norm > limit {
                self.grads.scale(limit / norm);
            }
        }
        self.params.sgd_step(&self.grads, self.lr);

        self.state = state;
        self.cursor += b;
        if self.cursor + b > self.view.len() {
            self.cursor = 0;
        }
        Ok(loss)
    }

    pub fn params(&self) -> &CellParams {
        &self.params
    }

    /// State that will seed the next block, exactly as the last step left it.
    pub fn state(&self) -> &CellState {
        &self.state
    }

    /// Start of the block the next [`Trainer::step`] will consume. Already
    /// wrapped: a partial block never straddles the view's end.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn into_params(self) -> CellParams {
        self.params
    }
}

/// Runs the model over a view from a zero state, returning predictions in
/// megawatts (denormalized through the view's power scale).
pub fn predict_view(params: &CellParams, view: &DatasetView<'_>) -> Result<Vec<f64>> {
    let ds = view.dataset();
    let mut state = CellState::zeros(params.variant.cell_dim());
    let mut out = Vec::with_capacity(view.len());
    for k in 0..view.len() {
        let (next, pred, _) = forward_step(params, &state, view.row(k))?;
        out.push(ds.denormalize_power(pred));
        state = next;
    }
    Ok(out)
}

/// Targets of a view in megawatts.
pub fn view_truth_mw(view: &DatasetView<'_>) -> Vec<f64> {
    (0..view.len())
        .map(|k| view.dataset().denormalize_power(view.target(k)))
        .collect()
}

/// Capacity-normalized MAE of the model over a view, in percent.
pub fn validation_nmae(params: &CellParams, view: &DatasetView<'_>) -> Result<f64> {
    let pred = predict_view(params, view)?;
    let truth = view_truth_mw(view);
    nmae(&pred, &truth, view.dataset().capacity)
}

/// Trains `params` on the training view, recording loss and validation NMAE
/// every [`HISTORY_EVERY`] iterations and at the end.
pub fn train_hybrid(
    params: CellParams,
    train: &DatasetView<'_>,
    validation: &DatasetView<'_>,
    cfg: &TrainConfig,
) -> Result<(CellParams, TrainHistory)> {
    if cfg.epochs == 0 {
        return Err(Error::TooSmall { what: "epochs", min: 1, got: 0 });
    }
    let mut trainer = Trainer::new(params, train.clone(), &cfg.hyper, cfg.grad_clip)?;
    let mut history = TrainHistory::default();
    for it in 1..=cfg.epochs {
        let loss = trainer.step()?;
        if it % HISTORY_EVERY == 0 || it == cfg.epochs {
            history.records.push(HistoryRecord {
                iteration: it,
                train_loss: loss,
                val_nmae: validation_nmae(trainer.params(), validation)?,
            });
        }
    }
    Ok((trainer.into_params(), history))
}

/// One trained replicate and its test-view evaluation.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub params: CellParams,
    pub history: TrainHistory,
    pub report: EvalReport,
}

/// All replicates plus the NMAE aggregate.
#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    pub outcomes: Vec<ReplicateOutcome>,
    pub nmae_stats: ReplicateStats,
}

/// Trains `cfg.replicates` models from seeds `seed, seed+1, ...` (each its
/// own thread), evaluates each on the shared test view, and aggregates the
/// NMAEs. Results are ordered by replicate index, independent of scheduling.
pub fn run_replicates(
    variant: VariantConfig,
    train: &DatasetView<'_>,
    validation: &DatasetView<'_>,
    test: &DatasetView<'_>,
    cfg: &TrainConfig,
) -> Result<ReplicateSummary> {
    if cfg.replicates < 2 {
        return Err(Error::TooSmall { what: "replicates", min: 2, got: cfg.replicates });
    }
    let results: Vec<Result<ReplicateOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.replicates)
            .map(|r| {
                scope.spawn(move || {
                    let seed = cfg.seed + r as u64;
                    let params = CellParams::init(variant, &mut Rng::new(seed))?;
                    let mut rep_cfg = *cfg;
                    rep_cfg.seed = seed;
                    let (params, history) = train_hybrid(params, train, validation, &rep_cfg)?;
                    let pred = predict_view(&params, test)?;
                    let truth = view_truth_mw(test);
                    let report = EvalReport::build(&pred, &truth, test.dataset().capacity)?;
                    Ok(ReplicateOutcome { seed, params, history, report })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    });
    let mut outcomes = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        outcomes.push(res.map_err(|e| Error::Replicate { replicate: r, source: Box::new(e) })?);
    }
    let values: Vec<f64> = outcomes.iter().map(|o| o.report.nmae).collect();
    Ok(ReplicateSummary { outcomes, nmae_stats: margin_of_error_95(&values)? })
}
