//! Recurrent cell variants for the forecasting model.
//!
//! Two families share one implementation:
//!
//! * `generic`: the textbook LSTM. Unbounded cell state, `h = o * tanh(c)`,
//!   and a bias-free linear output head.
//! * `mlstm`: the modified cell. The cell state itself is squashed,
//!   `c = tanh(f*c_prev + i*g)`, the hidden state is `h = o * c`, and the
//!   head is affine with a ReLU so power predictions cannot go negative.
//!
//! Three orthogonal switches apply only to `mlstm`:
//!
//! * `cifg`: couples input and forget gates (`f = 1 - i`); forget-gate
//!   weights are not allocated at all.
//! * `peephole`: diagonal connections from the cell state into the gates.
//!   Input and forget peepholes read the previous cell state, the output
//!   peephole reads the freshly computed one.
//! * `compression`: a ReLU bottleneck that squeezes the weather portion of
//!   the input to a single scalar before the gates see it. The power input
//!   bypasses the bottleneck.

mod checkpoint;
mod step;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use step::{
    backward_step, compress_input, forward_step, CellGrads, CellParams, CellState, CompParams,
    GateParams, Peepholes, StateGrad, StepCache,
};

use crate::error::{Error, Result};

/// Which cell family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFamily {
    Generic,
    Mlstm,
}

impl CellFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellFamily::Generic => "generic",
            CellFamily::Mlstm => "mlstm",
        }
    }
}

impl std::str::FromStr for CellFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<CellFamily> {
        match s {
            "generic" => Ok(CellFamily::Generic),
            "mlstm" => Ok(CellFamily::Mlstm),
            other => Err(Error::InvalidVariant(format!(
                "unknown cell family {other:?}, expected \"generic\" or \"mlstm\""
            ))),
        }
    }
}

/// Validated description of a cell variant.
///
/// Construct through [`VariantConfig::new`], which rejects inconsistent
/// combinations (the generic family takes no switches, compression needs at
/// least one weather input).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantConfig {
    family: CellFamily,
    cifg: bool,
    peephole: bool,
    compression: bool,
    input_dim: usize,
    cell_dim: usize,
}

impl VariantConfig {
    pub fn new(
        family: CellFamily,
        cifg: bool,
        peephole: bool,
        compression: bool,
        input_dim: usize,
        cell_dim: usize,
    ) -> Result<VariantConfig> {
        if family == CellFamily::Generic && (cifg || peephole || compression) {
            return Err(Error::InvalidVariant(
                "the generic family takes no cifg/peephole/compression switches".into(),
            ));
        }
        if input_dim == 0 {
            return Err(Error::InvalidVariant("input_dim must be at least 1".into()));
        }
        if cell_dim == 0 {
            return Err(Error::InvalidVariant("cell_dim must be at least 1".into()));
        }
        if compression && input_dim < 2 {
            return Err(Error::InvalidVariant(
                "compression needs at least one weather input beside power".into(),
            ));
        }
        Ok(VariantConfig {
            family,
            cifg,
            peephole,
            compression,
            input_dim,
            cell_dim,
        })
    }

    pub fn family(&self) -> CellFamily {
        self.family
    }

    pub fn cifg(&self) -> bool {
        self.cifg
    }

    pub fn peephole(&self) -> bool {
        self.peephole
    }

    pub fn compression(&self) -> bool {
        self.compression
    }

    /// Width of the raw input vector (power plus weather features).
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn cell_dim(&self) -> usize {
        self.cell_dim
    }

    /// Width of the vector the gates actually consume. With compression the
    /// weather block collapses to one scalar next to the power input.
    pub fn effective_input_dim(&self) -> usize {
        if self.compression {
            2
        } else {
            self.input_dim
        }
    }

    /// Number of weather features in the raw input.
    pub fn weather_dim(&self) -> usize {
        self.input_dim - 1
    }
}

/// Persistence baseline: predict the previous observation.
///
/// The first output repeats the first observation so the series keeps its
/// length; its error term is zero by construction.
pub fn persistence_predict(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::TooSmall {
            what: "persistence input length",
            min: 2,
            got: series.len(),
        });
    }
    let mut out = Vec::with_capacity(series.len());
    out.push(series[0]);
    out.extend_from_slice(&series[..series.len() - 1]);
    Ok(out)
}
