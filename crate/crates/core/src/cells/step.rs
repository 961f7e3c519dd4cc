//! Forward and backward passes of one recurrent step, shared by all variants.
//!
//! Both passes are pure functions of their arguments. The backward pass
//! accumulates into a caller-owned gradient structure so block-truncated
//! unrolls do not allocate per step.

use crate::cells::{CellFamily, VariantConfig};
use crate::error::{Error, Result};
use crate::linalg::{add_inplace, dot, elementwise, glorot_init, hadamard, Activation, Matrix, Rng};

/// Weights of a single gate: input projection, recurrent projection, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(cell_dim: usize, in_dim: usize) -> GateParams {
        GateParams {
            w: Matrix::zeros(cell_dim, in_dim),
            u: Matrix::zeros(cell_dim, cell_dim),
            b: vec![0.0; cell_dim],
        }
    }

    fn glorot(cell_dim: usize, in_dim: usize, rng: &mut Rng) -> Result<GateParams> {
        Ok(GateParams {
            w: glorot_init(cell_dim, in_dim, rng)?,
            u: glorot_init(cell_dim, cell_dim, rng)?,
            b: vec![0.0; cell_dim],
        })
    }

    fn shape_ok(&self, cell_dim: usize, in_dim: usize) -> bool {
        self.w.rows() == cell_dim
            && self.w.cols() == in_dim
            && self.u.rows() == cell_dim
            && self.u.cols() == cell_dim
            && self.b.len() == cell_dim
    }

    /// Pre-activation `w*x + u*h + b`.
    fn affine(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.w.matvec(x)?;
        add_inplace(&mut z, &self.u.matvec(h)?);
        add_inplace(&mut z, &self.b);
        Ok(z)
    }
}

/// Diagonal peephole weights. `p_i` and `p_f` read the previous cell state,
/// `p_o` reads the one computed in the current step. `p_f` is absent under
/// CIFG because the forget gate then has no parameters of its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Peepholes {
    pub p_i: Vec<f64>,
    pub p_f: Option<Vec<f64>>,
    pub p_o: Vec<f64>,
}

/// Weather bottleneck `relu(w*weather + b)`, squeezing to one scalar that
/// rides next to the untouched power input.
#[derive(Debug, Clone, PartialEq)]
pub struct CompParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// All weights of one cell variant. The embedded [`VariantConfig`] pins the
/// shapes; [`CellParams::validate`] checks structural agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub variant: VariantConfig,
    pub input: GateParams,
    /// Absent under CIFG, where `f = 1 - i` is derived, never parameterized.
    pub forget: Option<GateParams>,
    pub candidate: GateParams,
    pub output: GateParams,
    pub peephole: Option<Peepholes>,
    pub head_w: Matrix,
    /// Present only for the mlstm family; the generic head is bias-free.
    pub head_b: Option<f64>,
    pub comp: Option<CompParams>,
}

/// Gradients use the parameter structure verbatim, so the SGD update is a
/// single paired traversal.
pub type CellGrads = CellParams;

impl CellParams {
    /// All-zero parameters with the shapes the variant demands.
    pub fn zeros(variant: VariantConfig) -> CellParams {
        let n = variant.cell_dim();
        let e = variant.effective_input_dim();
        CellParams {
            variant,
            input: GateParams::zeros(n, e),
            forget: (!variant.cifg()).then(|| GateParams::zeros(n, e)),
            candidate: GateParams::zeros(n, e),
            output: GateParams::zeros(n, e),
            peephole: variant.peephole().then(|| Peepholes {
                p_i: vec![0.0; n],
                p_f: (!variant.cifg()).then(|| vec![0.0; n]),
                p_o: vec![0.0; n],
            }),
            head_w: Matrix::zeros(1, n),
            head_b: (variant.family() == CellFamily::Mlstm).then_some(0.0),
            comp: variant.compression().then(|| CompParams {
                w: Matrix::zeros(1, variant.weather_dim()),
                b: vec![0.0; 1],
            }),
        }
    }

    /// Glorot-uniform weights, zero biases and peepholes. The head bias
    /// starts at mid-range: with normalized targets around 0.5, a zero bias
    /// leaves the ReLU head dead on most inputs and training stalls until it
    /// happens to revive.
    ///
    /// The draw order (input, forget, candidate, output gates, then the
    /// bottleneck, then the head) is part of the seeded-reproducibility
    /// contract; changing it changes every seeded run.
    pub fn init(variant: VariantConfig, rng: &mut Rng) -> Result<CellParams> {
        let n = variant.cell_dim();
        let e = variant.effective_input_dim();
        let input = GateParams::glorot(n, e, rng)?;
        let forget = if variant.cifg() {
            None
        } else {
            Some(GateParams::glorot(n, e, rng)?)
        };
        let candidate = GateParams::glorot(n, e, rng)?;
        let output = GateParams::glorot(n, e, rng)?;
        let comp = if variant.compression() {
            Some(CompParams {
                w: glorot_init(1, variant.weather_dim(), rng)?,
                b: vec![0.0; 1],
            })
        } else {
            None
        };
        let head_w = glorot_init(1, n, rng)?;
        Ok(CellParams {
            variant,
            input,
            forget,
            candidate,
            output,
            peephole: variant.peephole().then(|| Peepholes {
                p_i: vec![0.0; n],
                p_f: (!variant.cifg()).then(|| vec![0.0; n]),
                p_o: vec![0.0; n],
            }),
            head_w,
            head_b: (variant.family() == CellFamily::Mlstm).then_some(0.5),
            comp,
        })
    }

    /// Checks that optional blocks and tensor shapes agree with the variant.
    pub fn validate(&self) -> Result<()> {
        let v = self.variant;
        let n = v.cell_dim();
        let e = v.effective_input_dim();
        let fail = |what: &str| Err(Error::InvalidVariant(format!("{what} (family {})", v.family().as_str())));
        if !self.input.shape_ok(n, e) || !self.candidate.shape_ok(n, e) || !self.output.shape_ok(n, e) {
            return fail("gate tensor shapes disagree with the config");
        }
        if v.cifg() != self.forget.is_none() {
            return fail("forget gate must be absent exactly when cifg is set");
        }
        if let Some(g) = &self.forget {
            if !g.shape_ok(n, e) {
                return fail("forget gate shapes disagree with the config");
            }
        }
        if v.peephole() != self.peephole.is_some() {
            return fail("peephole block present/absent against the flag");
        }
        if let Some(p) = &self.peephole {
            if p.p_i.len() != n || p.p_o.len() != n {
                return fail("peephole vector length disagrees with cell_dim");
            }
            if v.cifg() != p.p_f.is_none() {
                return fail("forget peephole must be absent exactly when cifg is set");
            }
            if p.p_f.as_ref().is_some_and(|pf| pf.len() != n) {
                return fail("forget peephole length disagrees with cell_dim");
            }
        }
        if self.head_w.rows() != 1 || self.head_w.cols() != n {
            return fail("head must be a 1 x cell_dim map");
        }
        if (v.family() == CellFamily::Mlstm) != self.head_b.is_some() {
            return fail("head bias present/absent against the family");
        }
        if v.compression() != self.comp.is_some() {
            return fail("compression block present/absent against the flag");
        }
        if let Some(c) = &self.comp {
            if c.w.rows() != 1 || c.w.cols() != v.weather_dim() || c.b.len() != 1 {
                return fail("compression shapes disagree with weather_dim");
            }
        }
        Ok(())
    }

    /// Tensor names and shapes in canonical (checkpoint) order. Vectors are
    /// column-shaped, the head bias is 1x1.
    pub(crate) fn tensor_specs(&self) -> Vec<(&'static str, usize, usize)> {
        let v = self.variant;
        let n = v.cell_dim();
        let e = v.effective_input_dim();
        let mut out = vec![("w_i", n, e), ("u_i", n, n), ("b_i", n, 1)];
        if !v.cifg() {
            out.extend([("w_f", n, e), ("u_f", n, n), ("b_f", n, 1)]);
        }
        out.extend([("w_g", n, e), ("u_g", n, n), ("b_g", n, 1)]);
        out.extend([("w_o", n, e), ("u_o", n, n), ("b_o", n, 1)]);
        if v.peephole() {
            out.push(("p_i", n, 1));
            if !v.cifg() {
                out.push(("p_f", n, 1));
            }
            out.push(("p_o", n, 1));
        }
        out.push(("head_w", 1, n));
        if v.family() == CellFamily::Mlstm {
            out.push(("head_b", 1, 1));
        }
        if v.compression() {
            out.extend([("comp_w", 1, v.weather_dim()), ("comp_b", 1, 1)]);
        }
        out
    }

    /// Read-only views over every tensor, in the order of [`tensor_specs`].
    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        push_gate(&mut out, &self.input);
        if let Some(g) = &self.forget {
            push_gate(&mut out, g);
        }
        push_gate(&mut out, &self.candidate);
        push_gate(&mut out, &self.output);
        if let Some(p) = &self.peephole {
            out.push(&p.p_i);
            if let Some(pf) = &p.p_f {
                out.push(pf);
            }
            out.push(&p.p_o);
        }
        out.push(self.head_w.data());
        if let Some(b) = &self.head_b {
            out.push(std::slice::from_ref(b));
        }
        if let Some(c) = &self.comp {
            out.push(c.w.data());
            out.push(&c.b);
        }
        out
    }

    /// Mutable views over every tensor, in the order of [`tensor_specs`].
    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let CellParams {
            variant: _,
            input,
            forget,
            candidate,
            output,
            peephole,
            head_w,
            head_b,
            comp,
        } = self;
        let mut out: Vec<&mut [f64]> = Vec::new();
        push_gate_mut(&mut out, input);
        if let Some(g) = forget {
            push_gate_mut(&mut out, g);
        }
        push_gate_mut(&mut out, candidate);
        push_gate_mut(&mut out, output);
        if let Some(p) = peephole {
            out.push(&mut p.p_i);
            if let Some(pf) = &mut p.p_f {
                out.push(pf);
            }
            out.push(&mut p.p_o);
        }
        out.push(head_w.data_mut());
        if let Some(b) = head_b {
            out.push(std::slice::from_mut(b));
        }
        if let Some(c) = comp {
            out.push(c.w.data_mut());
            out.push(&mut c.b);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Every scalar parameter in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in self.slices() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Overwrites every parameter from a flat vector in canonical order.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                op: "set_from_flat",
                expected: format!("{} parameters", self.param_count()),
                got: format!("{}", flat.len()),
            });
        }
        let mut k = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[k..k + s.len()]);
            k += s.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            for v in s {
                *v *= k;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// One SGD update, `self -= lr * grads`. Shapes must agree.
    pub fn sgd_step(&mut self, grads: &CellGrads, lr: f64) {
        let src = grads.slices();
        for (dst, s) in self.slices_mut().into_iter().zip(src) {
            for (a, b) in dst.iter_mut().zip(s) {
                *a -= lr * b;
            }
        }
    }
}

fn push_gate<'a>(out: &mut Vec<&'a [f64]>, g: &'a GateParams) {
    out.push(g.w.data());
    out.push(g.u.data());
    out.push(&g.b);
}

fn push_gate_mut<'a>(out: &mut Vec<&'a mut [f64]>, g: &'a mut GateParams) {
    out.push(g.w.data_mut());
    out.push(g.u.data_mut());
    out.push(&mut g.b);
}

/// Recurrent state: cell values and the hidden (output-gated) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellState {
    pub fn zeros(cell_dim: usize) -> CellState {
        CellState {
            c: vec![0.0; cell_dim],
            h: vec![0.0; cell_dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().chain(&self.h).all(|v| v.is_finite())
    }
}

/// Gradient of the loss w.r.t. a [`CellState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrad {
    pub dc: Vec<f64>,
    pub dh: Vec<f64>,
}

impl StateGrad {
    pub fn zeros(cell_dim: usize) -> StateGrad {
        StateGrad {
            dc: vec![0.0; cell_dim],
            dh: vec![0.0; cell_dim],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache {
    /// Raw input, before any compression.
    pub x: Vec<f64>,
    /// The vector the gates consumed.
    pub x_tilde: Vec<f64>,
    /// Bottleneck pre-activation, kept for the ReLU mask.
    pub comp_z: Option<Vec<f64>>,
    pub c_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    /// `tanh(c)` for the generic family, which squashes at the output; the
    /// mlstm cell is already bounded so this stays `None`.
    pub tanh_c: Option<Vec<f64>>,
    pub h: Vec<f64>,
    /// Head pre-activation, kept for the ReLU mask.
    pub head_z: f64,
    pub prediction: f64,
}

/// Bottleneck forward: `relu(w*weather + b)`.
pub fn compress_input(params: &CellParams, weather: &[f64]) -> Result<Vec<f64>> {
    let comp = params.comp.as_ref().ok_or_else(|| {
        Error::InvalidVariant("compress_input called on a variant without compression".into())
    })?;
    let mut z = comp.w.matvec(weather)?;
    add_inplace(&mut z, &comp.b);
    Ok(elementwise(Activation::Relu, &z))
}

/// One forward step. Returns the next state, the scalar prediction, and the
/// cache the backward pass consumes.
pub fn forward_step(params: &CellParams, state: &CellState, x: &[f64]) -> Result<(CellState, f64, StepCache)> {
    params.validate()?;
    let v = params.variant;
    let n = v.cell_dim();
    if x.len() != v.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "forward_step",
            expected: format!("input of length {}", v.input_dim()),
            got: format!("{}", x.len()),
        });
    }
    if state.c.len() != n || state.h.len() != n {
        return Err(Error::DimensionMismatch {
            op: "forward_step",
            expected: format!("state of width {n}"),
            got: format!("c {}, h {}", state.c.len(), state.h.len()),
        });
    }
    if !x.iter().all(|a| a.is_finite()) {
        return Err(Error::NonFinite("forward_step input"));
    }

    // Weather bottleneck first; the power channel passes through untouched.
    let (x_tilde, comp_z) = match &params.comp {
        Some(comp) => {
            let mut z = comp.w.matvec(&x[1..])?;
            add_inplace(&mut z, &comp.b);
            let a = elementwise(Activation::Relu, &z);
            let mut xt = Vec::with_capacity(1 + a.len());
            xt.push(x[0]);
            xt.extend_from_slice(&a);
            (xt, Some(z))
        }
        None => (x.to_vec(), None),
    };

    let mut zi = params.input.affine(&x_tilde, &state.h)?;
    if let Some(p) = &params.peephole {
        for k in 0..n {
            zi[k] += p.p_i[k] * state.c[k];
        }
    }
    let i = elementwise(Activation::Sigmoid, &zi);

    let f = match &params.forget {
        None => elementwise(Activation::OneMinus, &i),
        Some(gate) => {
            let mut zf = gate.affine(&x_tilde, &state.h)?;
            if let Some(p) = &params.peephole {
                let pf = p.p_f.as_ref().expect("validated: p_f present when forget gate is");
                for k in 0..n {
                    zf[k] += pf[k] * state.c[k];
                }
            }
            elementwise(Activation::Sigmoid, &zf)
        }
    };

    let g = elementwise(Activation::Tanh, &params.candidate.affine(&x_tilde, &state.h)?);

    let mut c = hadamard(&f, &state.c);
    add_inplace(&mut c, &hadamard(&i, &g));
    if v.family() == CellFamily::Mlstm {
        // |f*c_prev + i*g| < 2, and tanh(2) < 0.965, so the cell stays
        // strictly inside (-1, 1) regardless of history.
        c = elementwise(Activation::Tanh, &c);
    }

    let mut zo = params.output.affine(&x_tilde, &state.h)?;
    if let Some(p) = &params.peephole {
        for k in 0..n {
            zo[k] += p.p_o[k] * c[k];
        }
    }
    let o = elementwise(Activation::Sigmoid, &zo);

    let (h, tanh_c) = match v.family() {
        CellFamily::Mlstm => (hadamard(&o, &c), None),
        CellFamily::Generic => {
            let tc = elementwise(Activation::Tanh, &c);
            (hadamard(&o, &tc), Some(tc))
        }
    };

    let mut head_z = dot(params.head_w.row(0), &h);
    if let Some(b) = params.head_b {
        head_z += b;
    }
    let prediction = match v.family() {
        CellFamily::Mlstm => head_z.max(0.0),
        CellFamily::Generic => head_z,
    };

    let next = CellState { c: c.clone(), h: h.clone() };
    let cache = StepCache {
        x: x.to_vec(),
        x_tilde,
        comp_z,
        c_prev: state.c.clone(),
        h_prev: state.h.clone(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
        head_z,
        prediction,
    };
    Ok((next, prediction, cache))
}

/// Reverse-mode step. Adds this step's parameter gradients into `grads` and
/// returns the gradient w.r.t. the incoming state and the raw input.
///
/// `d_prediction` is the loss gradient at this step's scalar output;
/// `d_state_next` carries the gradient flowing back from the following step.
pub fn backward_step(
    params: &CellParams,
    cache: &StepCache,
    d_prediction: f64,
    d_state_next: &StateGrad,
    grads: &mut CellGrads,
) -> Result<(StateGrad, Vec<f64>)> {
    params.validate()?;
    let v = params.variant;
    let n = v.cell_dim();
    if grads.variant != v {
        return Err(Error::InvalidVariant(
            "gradient accumulator built for a different variant".into(),
        ));
    }
    if cache.c.len() != n || cache.x_tilde.len() != v.effective_input_dim() || cache.x.len() != v.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "backward_step",
            expected: format!("cache for cell_dim {n}, input_dim {}", v.input_dim()),
            got: format!("cache c {}, x {}", cache.c.len(), cache.x.len()),
        });
    }
    if d_state_next.dc.len() != n || d_state_next.dh.len() != n {
        return Err(Error::DimensionMismatch {
            op: "backward_step",
            expected: format!("state gradient of width {n}"),
            got: format!("dc {}, dh {}", d_state_next.dc.len(), d_state_next.dh.len()),
        });
    }

    // Head. The mlstm ReLU kills the gradient at negative pre-activations.
    let d_head_z = match v.family() {
        CellFamily::Mlstm => {
            if cache.head_z > 0.0 {
                d_prediction
            } else {
                0.0
            }
        }
        CellFamily::Generic => d_prediction,
    };
    grads.head_w.add_outer(&[d_head_z], &cache.h)?;
    if let Some(b) = grads.head_b.as_mut() {
        *b += d_head_z;
    }

    let mut dh: Vec<f64> = params.head_w.row(0).iter().map(|w| w * d_head_z).collect();
    add_inplace(&mut dh, &d_state_next.dh);

    // Output gate, and the cell's direct path into h.
    let (d_o, mut dc_total) = match v.family() {
        CellFamily::Mlstm => (hadamard(&dh, &cache.c), hadamard(&dh, &cache.o)),
        CellFamily::Generic => {
            let tc = cache.tanh_c.as_ref().expect("generic cache carries tanh(c)");
            let d_o = hadamard(&dh, tc);
            let mut dc = vec![0.0; n];
            for k in 0..n {
                dc[k] = dh[k] * cache.o[k] * (1.0 - tc[k] * tc[k]);
            }
            (d_o, dc)
        }
    };
    add_inplace(&mut dc_total, &d_state_next.dc);

    let mut dzo = vec![0.0; n];
    for k in 0..n {
        dzo[k] = d_o[k] * cache.o[k] * (1.0 - cache.o[k]);
    }
    if let Some(p) = &params.peephole {
        // zo reads the freshly computed cell through p_o.
        for k in 0..n {
            dc_total[k] += dzo[k] * p.p_o[k];
        }
    }

    // Through the cell nonlinearity; identity for the generic family.
    let mut dc_raw = dc_total;
    if v.family() == CellFamily::Mlstm {
        for k in 0..n {
            dc_raw[k] *= 1.0 - cache.c[k] * cache.c[k];
        }
    }

    let df = hadamard(&dc_raw, &cache.c_prev);
    let mut di = hadamard(&dc_raw, &cache.g);
    if v.cifg() {
        // f = 1 - i routes the forget path back into i with opposite sign.
        for k in 0..n {
            di[k] -= df[k];
        }
    }
    let dg = hadamard(&dc_raw, &cache.i);

    let mut dzi = vec![0.0; n];
    for k in 0..n {
        dzi[k] = di[k] * cache.i[k] * (1.0 - cache.i[k]);
    }
    let mut dzg = vec![0.0; n];
    for k in 0..n {
        dzg[k] = dg[k] * (1.0 - cache.g[k] * cache.g[k]);
    }
    let dzf = params.forget.as_ref().map(|_| {
        let mut z = vec![0.0; n];
        for k in 0..n {
            z[k] = df[k] * cache.f[k] * (1.0 - cache.f[k]);
        }
        z
    });

    accumulate_gate(&mut grads.input, &dzi, &cache.x_tilde, &cache.h_prev)?;
    accumulate_gate(&mut grads.candidate, &dzg, &cache.x_tilde, &cache.h_prev)?;
    accumulate_gate(&mut grads.output, &dzo, &cache.x_tilde, &cache.h_prev)?;
    if let (Some(gf), Some(dzf)) = (grads.forget.as_mut(), dzf.as_ref()) {
        accumulate_gate(gf, dzf, &cache.x_tilde, &cache.h_prev)?;
    }
    if let Some(pg) = grads.peephole.as_mut() {
        for k in 0..n {
            pg.p_i[k] += dzi[k] * cache.c_prev[k];
            pg.p_o[k] += dzo[k] * cache.c[k];
        }
        if let (Some(pf), Some(dzf)) = (pg.p_f.as_mut(), dzf.as_ref()) {
            for k in 0..n {
                pf[k] += dzf[k] * cache.c_prev[k];
            }
        }
    }

    let mut dc_prev = hadamard(&dc_raw, &cache.f);
    if let Some(p) = &params.peephole {
        for k in 0..n {
            dc_prev[k] += dzi[k] * p.p_i[k];
        }
        if let (Some(pf), Some(dzf)) = (p.p_f.as_ref(), dzf.as_ref()) {
            for k in 0..n {
                dc_prev[k] += dzf[k] * pf[k];
            }
        }
    }

    let mut dh_prev = params.input.u.matvec_t(&dzi)?;
    add_inplace(&mut dh_prev, &params.candidate.u.matvec_t(&dzg)?);
    add_inplace(&mut dh_prev, &params.output.u.matvec_t(&dzo)?);
    let mut dx_tilde = params.input.w.matvec_t(&dzi)?;
    add_inplace(&mut dx_tilde, &params.candidate.w.matvec_t(&dzg)?);
    add_inplace(&mut dx_tilde, &params.output.w.matvec_t(&dzo)?);
    if let (Some(gate), Some(dzf)) = (&params.forget, dzf.as_ref()) {
        add_inplace(&mut dh_prev, &gate.u.matvec_t(dzf)?);
        add_inplace(&mut dx_tilde, &gate.w.matvec_t(dzf)?);
    }

    // Back through the weather bottleneck; the power channel is untouched.
    let dx = match &params.comp {
        Some(comp) => {
            let comp_z = cache.comp_z.as_ref().expect("compression cache carries the pre-activation");
            let weather = &cache.x[1..];
            let mut d_comp_z = vec![0.0; comp_z.len()];
            for (k, dz) in d_comp_z.iter_mut().enumerate() {
                if comp_z[k] > 0.0 {
                    *dz = dx_tilde[1 + k];
                }
            }
            let cg = grads.comp.as_mut().expect("grads shaped like params");
            cg.w.add_outer(&d_comp_z, weather)?;
            add_inplace(&mut cg.b, &d_comp_z);
            let mut dx = vec![0.0; cache.x.len()];
            dx[0] = dx_tilde[0];
            dx[1..].copy_from_slice(&comp.w.matvec_t(&d_comp_z)?);
            dx
        }
        None => dx_tilde,
    };

    Ok((StateGrad { dc: dc_prev, dh: dh_prev }, dx))
}

fn accumulate_gate(g: &mut GateParams, dz: &[f64], x: &[f64], h_prev: &[f64]) -> Result<()> {
    g.w.add_outer(dz, x)?;
    g.u.add_outer(dz, h_prev)?;
    add_inplace(&mut g.b, dz);
    Ok(())
}
