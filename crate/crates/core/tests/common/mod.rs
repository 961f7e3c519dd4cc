//! Independent oracles shared by the integration suites: a central
//! finite-difference gradient check and a cyclic Jacobi eigensolver. Both are
//! written from first principles, on purpose, so they share no code with the
//! implementations they judge.

// Each integration target compiles this module separately and uses a subset.
#![allow(dead_code)]

use gustcast_core::cells::{
    backward_step, forward_step, CellGrads, CellParams, CellState, StateGrad, VariantConfig,
};
use gustcast_core::linalg::{dot, Matrix, Rng};

/// One random gradient-check instance: parameters, an initial state, a short
/// input block, and a random linear readout of the predictions and final
/// state. The readout weights make every gradient path contribute to a
/// single scalar that finite differences can probe.
pub struct GradInstance {
    pub params: CellParams,
    pub state0: CellState,
    pub xs: Vec<Vec<f64>>,
    pub w_pred: Vec<f64>,
    pub v_c: Vec<f64>,
    pub u_h: Vec<f64>,
}

const BLOCK: usize = 3;
/// Keep pre-activations of ReLU units this far from the kink so the central
/// difference never straddles it.
const KINK_MARGIN: f64 = 1e-2;

impl GradInstance {
    /// Draws instances until the trajectory clears every ReLU kink.
    pub fn sample(variant: VariantConfig, seed: u64) -> GradInstance {
        let mut rng = Rng::new(Rng::derive(seed, &[0x67726164]));
        loop {
            let params = CellParams::init(variant, &mut rng).unwrap();
            let n = variant.cell_dim();
            let d = variant.input_dim();
            let state0 = CellState {
                c: (0..n).map(|_| rng.uniform(-0.8, 0.8)).collect(),
                h: (0..n).map(|_| rng.uniform(-0.8, 0.8)).collect(),
            };
            let xs: Vec<Vec<f64>> =
                (0..BLOCK).map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
            let inst = GradInstance {
                params,
                state0,
                xs,
                w_pred: (0..BLOCK).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                v_c: (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                u_h: (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            };
            if inst.clears_kinks() {
                return inst;
            }
        }
    }

    fn clears_kinks(&self) -> bool {
        let mut state = self.state0.clone();
        for x in &self.xs {
            let (next, _, cache) = forward_step(&self.params, &state, x).unwrap();
            if cache.head_z.abs() < KINK_MARGIN {
                return false;
            }
            if let Some(z) = &cache.comp_z {
                if z.iter().any(|v| v.abs() < KINK_MARGIN) {
                    return false;
                }
            }
            state = next;
        }
        true
    }

    /// The probed scalar: weighted predictions plus a linear readout of the
    /// carried-out state.
    pub fn loss(&self, params: &CellParams, state0: &CellState, xs: &[Vec<f64>]) -> f64 {
        let mut state = state0.clone();
        let mut acc = 0.0;
        for (k, x) in xs.iter().enumerate() {
            let (next, pred, _) = forward_step(params, &state, x).unwrap();
            acc += self.w_pred[k] * pred;
            state = next;
        }
        acc + dot(&self.v_c, &state.c) + dot(&self.u_h, &state.h)
    }

    /// Analytic gradients of [`GradInstance::loss`] w.r.t. every parameter,
    /// the initial state, and every input component.
    pub fn analytic(&self) -> (Vec<f64>, StateGrad, Vec<Vec<f64>>) {
        let mut state = self.state0.clone();
        let mut caches = Vec::with_capacity(BLOCK);
        for x in &self.xs {
            let (next, _, cache) = forward_step(&self.params, &state, x).unwrap();
            caches.push(cache);
            state = next;
        }
        let mut grads = CellGrads::zeros(self.params.variant);
        let mut sg = StateGrad { dc: self.v_c.clone(), dh: self.u_h.clone() };
        let mut d_xs = vec![Vec::new(); BLOCK];
        for k in (0..BLOCK).rev() {
            let (prev, dx) =
                backward_step(&self.params, &caches[k], self.w_pred[k], &sg, &mut grads).unwrap();
            d_xs[k] = dx;
            sg = prev;
        }
        (grads.flatten(), sg, d_xs)
    }
}

fn central_diff(mut f: impl FnMut(f64) -> f64, at: f64, eps: f64) -> f64 {
    (f(at + eps) - f(at - eps)) / (2.0 * eps)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Runs the full check on one instance and returns the worst relative error
/// across parameters, initial state, and inputs.
pub fn gradcheck(variant: VariantConfig, seed: u64) -> f64 {
    let eps = 1e-5;
    let inst = GradInstance::sample(variant, seed);
    let (d_params, d_state0, d_xs) = inst.analytic();
    let mut worst = 0.0f64;

    let flat = inst.params.flatten();
    for k in 0..flat.len() {
        let fd = central_diff(
            |v| {
                let mut p = inst.params.clone();
                let mut theta = flat.clone();
                theta[k] = v;
                p.set_from_flat(&theta).unwrap();
                inst.loss(&p, &inst.state0, &inst.xs)
            },
            flat[k],
            eps,
        );
        worst = worst.max(rel_err(d_params[k], fd));
    }

    let n = variant.cell_dim();
    for k in 0..n {
        let fd = central_diff(
            |v| {
                let mut s = inst.state0.clone();
                s.c[k] = v;
                inst.loss(&inst.params, &s, &inst.xs)
            },
            inst.state0.c[k],
            eps,
        );
        worst = worst.max(rel_err(d_state0.dc[k], fd));
        let fd = central_diff(
            |v| {
                let mut s = inst.state0.clone();
                s.h[k] = v;
                inst.loss(&inst.params, &s, &inst.xs)
            },
            inst.state0.h[k],
            eps,
        );
        worst = worst.max(rel_err(d_state0.dh[k], fd));
    }

    for step in 0..BLOCK {
        for k in 0..variant.input_dim() {
            let fd = central_diff(
                |v| {
                    let mut xs = inst.xs.clone();
                    xs[step][k] = v;
                    inst.loss(&inst.params, &inst.state0, &xs)
                },
                inst.xs[step][k],
                eps,
            );
            worst = worst.max(rel_err(d_xs[step][k], fd));
        }
    }
    worst
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues alongside a matrix whose columns are the eigenvectors, in
/// matching order.
pub fn jacobi_eigen(mut a: Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi needs a square matrix");
    let mut v = Matrix::identity(n);
    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eigs = (0..n).map(|k| a.get(k, k)).collect();
    (eigs, v)
}

/// Sample covariance (n−1 denominator) computed by direct summation.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                let v = cov.get(i, j) + (r[i] - mean[i]) * (r[j] - mean[j]) / (n as f64 - 1.0);
                cov.set(i, j, v);
            }
        }
    }
    cov
}
