//! Band-limited resampling: evaluate the trigonometric interpolant of grid
//! samples at uniformly scaled points. Backs the dilation group `D(beta)` and
//! the coordinate rescalings of the pseudo-conformal transform.
//!
//! Points requested outside the box evaluate to zero (the fields of interest
//! decay well inside it); callers keep scale factors moderate, and the
//! operator pipelines restrict `beta` to `[1/8, 8]`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};

/// Dense evaluation of the interpolant at `scale * x_j` along one axis.
///
/// Stored as the matrix `E` with `samples -> E . FFT(samples)`; the Nyquist
/// coefficient is split symmetrically (cosine convention).
pub struct AxisResampler {
    grid: Arc<Grid>,
    scale: f64,
    /// n x n, row-major: maps unnormalized Fourier coefficients to values at
    /// the scaled points; includes the 1/n normalization.
    eval: Vec<Complex64>,
}

impl AxisResampler {
    pub fn new(grid: Arc<Grid>, scale: f64) -> Self {
        let n = grid.n_per_dim();
        let mut eval = vec![Complex64::new(0.0, 0.0); n * n];
        let inv_n = 1.0 / n as f64;
        let l = grid.half_width();
        for j in 0..n {
            let y = grid.coord(j) * scale;
            // fields are decayed inside the box: outside it the interpolant
            // is clipped to zero instead of wrapping periodically
            if !(-l..l).contains(&y) {
                continue;
            }
            for m in 0..n {
                let xi = grid.freq(m);
                // physical coefficient = (-1)^{signed m} * FFT output
                let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
                let phase = if m == n / 2 {
                    // Nyquist: represent both +/- modes symmetrically
                    Complex64::new((xi * y).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, xi * y)
                };
                eval[j * n + m] = parity * inv_n * phase;
            }
        }
        Self { grid, scale, eval }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Resample every line along `axis` of a full grid array.
    pub fn apply_axis(&self, vals: &mut [Complex64], axis: usize) {
        let n = self.grid.n_per_dim();
        let d = self.grid.dim();
        debug_assert_eq!(vals.len(), self.grid.points());
        // move to coefficients along this axis
        let mut work = vals.to_vec();
        self.grid.fft_axis(&mut work, axis, true);
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut out_line = vec![Complex64::new(0.0, 0.0); n];
        for base in (0..vals.len()).step_by(block) {
            for off in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = work[base + off + t * stride];
                }
                for (j, out) in out_line.iter_mut().enumerate() {
                    let row = &self.eval[j * n..(j + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (e, c) in row.iter().zip(&line) {
                        acc += e * c;
                    }
                    *out = acc;
                }
                for (t, v) in out_line.iter().enumerate() {
                    vals[base + off + t * stride] = *v;
                }
            }
        }
    }

    /// Adjoint of `apply_axis` (conjugate-transpose of the discrete map).
    pub fn apply_axis_adjoint(&self, vals: &mut [Complex64], axis: usize) {
        let n = self.grid.n_per_dim();
        let d = self.grid.dim();
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut out_line = vec![Complex64::new(0.0, 0.0); n];
        let mut work = vec![Complex64::new(0.0, 0.0); vals.len()];
        for base in (0..vals.len()).step_by(block) {
            for off in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = vals[base + off + t * stride];
                }
                // E^dagger
                for (m, out) in out_line.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, g) in line.iter().enumerate() {
                        acc += self.eval[j * n + m].conj() * g;
                    }
                    *out = acc;
                }
                for (t, v) in out_line.iter().enumerate() {
                    work[base + off + t * stride] = *v;
                }
            }
        }
        // F^dagger = unnormalized inverse FFT
        self.grid.fft_axis(&mut work, axis, false);
        vals.copy_from_slice(&work);
    }
}

/// Evaluate the interpolant of `f` at `scale * x` (all axes).
pub fn resample_scaled(f: &Field, scale: f64) -> Field {
    let mut out = f.clone();
    let rs = AxisResampler::new(f.grid.clone(), scale);
    for a in 0..f.grid.dim() {
        rs.apply_axis(&mut out.values, a);
    }
    out
}

/// The dilation group element `D(beta) f = (i beta)^{-d/2} f(x / beta)`.
#[derive(Clone, Copy, Debug)]
pub struct Dilation {
    pub beta: f64,
}

impl Dilation {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "dilation parameter beta = {beta} must be positive"
            )));
        }
        Ok(Self { beta })
    }

    fn prefactor(&self, d: usize) -> Complex64 {
        // (i beta)^{-d/2}, principal branch
        let z = Complex64::new(0.0, self.beta);
        z.powf(-(d as f64) / 2.0)
    }

    pub fn apply(&self, f: &Field) -> Field {
        let d = f.grid.dim();
        let mut out = resample_scaled(f, 1.0 / self.beta);
        let pf = self.prefactor(d);
        for v in out.values.iter_mut() {
            *v *= pf;
        }
        out
    }

    /// `D(beta)^{-1} = i^d D(1/beta)`.
    pub fn apply_inverse(&self, f: &Field) -> Field {
        let d = f.grid.dim();
        let mut out = resample_scaled(f, self.beta);
        let inv = Dilation { beta: 1.0 / self.beta };
        let pf = Complex64::new(0.0, 1.0).powi(d as i32) * inv.prefactor(d);
        for v in out.values.iter_mut() {
            *v *= pf;
        }
        out
    }
}
