//! Composable linear-operator pipelines on grid fields, and `B(L^2)` operator
//! norms by power iteration on `A* A`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::grid::{random_smooth_field, Field, Grid};
use crate::hermite::HermiteBasis;
use crate::resample::AxisResampler;

pub trait LinearOp: Send + Sync {
    fn apply(&self, f: &Field) -> Field;
    fn apply_adjoint(&self, f: &Field) -> Field;
}

/// Frequency-space multiplier.
pub struct MultiplierOp {
    pub m: Vec<Complex64>,
}

impl LinearOp for MultiplierOp {
    fn apply(&self, f: &Field) -> Field {
        crate::spectral::apply_multiplier(f, &self.m)
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let conj: Vec<Complex64> = self.m.iter().map(|v| v.conj()).collect();
        crate::spectral::apply_multiplier(f, &conj)
    }
}

/// Position-space multiplication.
pub struct PointwiseOp {
    pub w: Vec<Complex64>,
}

impl LinearOp for PointwiseOp {
    fn apply(&self, f: &Field) -> Field {
        f.pointwise(&self.w)
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let conj: Vec<Complex64> = self.w.iter().map(|v| v.conj()).collect();
        f.pointwise(&conj)
    }
}

/// The dilation `D(beta)` (or its inverse) as a pipeline stage with cached
/// resampling matrices.
pub struct DilationOp {
    beta: f64,
    inverse: bool,
    resampler: AxisResampler,
    prefactor: Complex64,
}

impl DilationOp {
    pub fn forward(grid: Arc<Grid>, beta: f64) -> Self {
        let d = grid.dim();
        Self {
            beta,
            inverse: false,
            resampler: AxisResampler::new(grid, 1.0 / beta),
            prefactor: Complex64::new(0.0, beta).powf(-(d as f64) / 2.0),
        }
    }

    pub fn inverse(grid: Arc<Grid>, beta: f64) -> Self {
        let d = grid.dim();
        let pf = Complex64::new(0.0, 1.0).powi(d as i32)
            * Complex64::new(0.0, 1.0 / beta).powf(-(d as f64) / 2.0);
        Self {
            beta,
            inverse: true,
            resampler: AxisResampler::new(grid, beta),
            prefactor: pf,
        }
    }

    pub fn beta(&self) -> f64 {
        if self.inverse {
            1.0 / self.beta
        } else {
            self.beta
        }
    }
}

impl LinearOp for DilationOp {
    fn apply(&self, f: &Field) -> Field {
        let mut out = f.clone();
        for a in 0..f.grid.dim() {
            self.resampler.apply_axis(&mut out.values, a);
        }
        out.scale(self.prefactor)
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let mut out = f.scale(self.prefactor.conj());
        for a in 0..f.grid.dim() {
            self.resampler.apply_axis_adjoint(&mut out.values, a);
        }
        out
    }
}

/// `sum_k d_k |h_k><h_k|` in the Hermite basis (annihilates the complement).
pub struct HermiteDiagOp {
    pub basis: Arc<HermiteBasis>,
    pub diag: Vec<Complex64>,
}

impl LinearOp for HermiteDiagOp {
    fn apply(&self, f: &Field) -> Field {
        self.basis.apply_diagonal(f, &self.diag).0
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let conj: Vec<Complex64> = self.diag.iter().map(|v| v.conj()).collect();
        self.basis.apply_diagonal(f, &conj).0
    }
}

/// Dense matrix stage (operator entries in position space).
pub struct DenseOp {
    pub grid: Arc<Grid>,
    pub m: DMatrix<Complex64>,
}

impl LinearOp for DenseOp {
    fn apply(&self, f: &Field) -> Field {
        let v = nalgebra::DVector::from_column_slice(&f.values);
        let out = &self.m * v;
        let mut g = f.clone();
        g.values.copy_from_slice(out.as_slice());
        g
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let v = nalgebra::DVector::from_column_slice(&f.values);
        let out = self.m.adjoint() * v;
        let mut g = f.clone();
        g.values.copy_from_slice(out.as_slice());
        g
    }
}

/// Stages applied left to right.
pub struct ComposedOp {
    pub stages: Vec<Box<dyn LinearOp>>,
}

impl LinearOp for ComposedOp {
    fn apply(&self, f: &Field) -> Field {
        let mut cur = f.clone();
        for s in &self.stages {
            cur = s.apply(&cur);
        }
        cur
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let mut cur = f.clone();
        for s in self.stages.iter().rev() {
            cur = s.apply_adjoint(&cur);
        }
        cur
    }
}

/// `sum_i c_i T_i`.
pub struct SumOp {
    pub terms: Vec<(Complex64, Box<dyn LinearOp>)>,
}

impl LinearOp for SumOp {
    fn apply(&self, f: &Field) -> Field {
        let mut acc = Field::zeros(f.grid.clone());
        for (c, t) in &self.terms {
            acc.axpy(*c, &t.apply(f));
        }
        acc
    }
    fn apply_adjoint(&self, f: &Field) -> Field {
        let mut acc = Field::zeros(f.grid.clone());
        for (c, t) in &self.terms {
            acc.axpy(c.conj(), &t.apply_adjoint(f));
        }
        acc
    }
}

/// Materialize an operator as a dense matrix by applying it to the canonical
/// basis.
pub fn dense_from_op(grid: &Arc<Grid>, op: &dyn LinearOp) -> DMatrix<Complex64> {
    let n = grid.points();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut e = Field::zeros(grid.clone());
    for k in 0..n {
        e.values[k] = Complex64::new(1.0, 0.0);
        let col = op.apply(&e);
        for (j, v) in col.values.iter().enumerate() {
            m[(j, k)] = *v;
        }
        e.values[k] = Complex64::new(0.0, 0.0);
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `op` in `B(L^2)` by power iteration on `A* A`,
/// deterministic for a fixed seed.
pub fn operator_norm(
    op: &dyn LinearOp,
    grid: &Arc<Grid>,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> NormEstimate {
    let mut v = random_smooth_field(grid, seed, 3.0);
    let mut sigma_prev = -1.0f64;
    for it in 1..=max_iter {
        let av = op.apply(&v);
        let sigma = av.norm_l2() / v.norm_l2().max(1e-300);
        let mut next = op.apply_adjoint(&av);
        let nn = next.norm_l2();
        if nn == 0.0 || !nn.is_finite() {
            return NormEstimate {
                value: if nn == 0.0 { 0.0 } else { f64::NAN },
                iterations: it,
                converged: nn == 0.0,
            };
        }
        next = next.scale(Complex64::new(1.0 / nn, 0.0));
        if (sigma - sigma_prev).abs() <= tol * sigma.max(1e-300) {
            return NormEstimate {
                value: sigma,
                iterations: it,
                converged: true,
            };
        }
        sigma_prev = sigma;
        v = next;
    }
    NormEstimate {
        value: sigma_prev,
        iterations: max_iter,
        converged: false,
    }
}
