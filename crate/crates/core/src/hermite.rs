//! Hermite-function basis on a one-dimensional grid.
//!
//! The harmonic oscillator `p^2 + x^2` is diagonal in this basis with
//! eigenvalues `2k + 1`, which turns its resolvent (and fractional powers of
//! it) into diagonal multipliers on the coefficients.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};

pub struct HermiteBasis {
    grid: Arc<Grid>,
    k: usize,
    /// Column-major samples: `synth[k * n + j] = h_k(x_j) * sqrt(dx)`, so the
    /// columns are orthonormal in the plain inner product on samples.
    synth: Vec<f64>,
}

impl HermiteBasis {
    pub fn new(grid: Arc<Grid>, k: usize) -> Result<Arc<Self>> {
        if grid.dim() != 1 {
            return Err(LabError::UnsupportedDimension(grid.dim()));
        }
        let n = grid.n_per_dim();
        if k == 0 || k > n / 4 {
            return Err(LabError::InvalidParameter(format!(
                "Hermite truncation K = {k} must lie in 1..={}",
                n / 4
            )));
        }
        // the highest function must decay inside the box
        let turning = (2.0 * k as f64 + 1.0).sqrt();
        if turning + 3.0 > grid.half_width() {
            return Err(LabError::InvalidParameter(format!(
                "box half-width {} too small for K = {k} (classical turning point {turning:.1})",
                grid.half_width()
            )));
        }
        let sqrt_dx = grid.dx().sqrt();
        let mut synth = vec![0.0f64; k * n];
        let norm0 = std::f64::consts::PI.powf(-0.25);
        for j in 0..n {
            let x = grid.coord(j);
            let mut hm1 = 0.0f64;
            let mut h = norm0 * (-x * x / 2.0).exp();
            synth[j] = h * sqrt_dx;
            for kk in 1..k {
                let a = (2.0 / kk as f64).sqrt();
                let b = ((kk as f64 - 1.0) / kk as f64).sqrt();
                let next = a * x * h - b * hm1;
                hm1 = h;
                h = next;
                synth[kk * n + j] = h * sqrt_dx;
            }
        }
        Ok(Arc::new(Self { grid, k, synth }))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    /// Oscillator eigenvalue of mode `k`: `2k + 1`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        2.0 * k as f64 + 1.0
    }

    /// `h_k` as a grid field.
    pub fn mode(&self, k: usize) -> Field {
        let n = self.grid.n_per_dim();
        let inv = 1.0 / self.grid.dx().sqrt();
        let values = (0..n)
            .map(|j| Complex64::new(self.synth[k * n + j] * inv, 0.0))
            .collect();
        Field::new(self.grid.clone(), values).expect("length")
    }

    /// Expansion coefficients by grid quadrature.
    pub fn coefficients(&self, f: &Field) -> Vec<Complex64> {
        let n = self.grid.n_per_dim();
        let sqrt_dx = self.grid.dx().sqrt();
        (0..self.k)
            .map(|kk| {
                let col = &self.synth[kk * n..(kk + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, v) in col.iter().zip(&f.values) {
                    acc += c * v;
                }
                acc * sqrt_dx
            })
            .collect()
    }

    pub fn synthesize(&self, coeffs: &[Complex64]) -> Field {
        debug_assert_eq!(coeffs.len(), self.k);
        let n = self.grid.n_per_dim();
        let inv_sqrt_dx = 1.0 / self.grid.dx().sqrt();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (kk, &c) in coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = &self.synth[kk * n..(kk + 1) * n];
            for (v, s) in values.iter_mut().zip(col) {
                *v += c * s * inv_sqrt_dx;
            }
        }
        Field::new(self.grid.clone(), values).expect("length")
    }

    /// Apply `sum_k d_k |h_k><h_k|`, returning the result and the relative
    /// `L^2` mass lost to the truncated complement.
    pub fn apply_diagonal(&self, f: &Field, diag: &[Complex64]) -> (Field, f64) {
        let coeffs = self.coefficients(f);
        let scaled: Vec<Complex64> = coeffs.iter().zip(diag).map(|(c, d)| c * d).collect();
        let out = self.synthesize(&scaled);
        let input = f.norm_l2();
        let loss = if input == 0.0 {
            0.0
        } else {
            let c2: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            ((input * input - c2).max(0.0)).sqrt() / input
        };
        (out, loss)
    }

    /// Max deviation of `S^T S` from the identity over the retained modes.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.grid.n_per_dim();
        let mut worst = 0.0f64;
        for a in 0..self.k {
            for b in a..self.k {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.synth[a * n + j] * self.synth[b * n + j];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}
