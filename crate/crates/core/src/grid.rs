//! Uniform periodic grids on `[-L, L)^d` and complex grid functions.
//!
//! The box stands in for the whole space; fields of interest decay well inside
//! it, which the boundary-leak diagnostic monitors. FFT plans are created once
//! per grid and shared.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default cap on total complex entries per field.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_per_dim: usize,
    pub half_width: f64,
}

pub struct Grid {
    d: usize,
    n: usize,
    half_width: f64,
    dx: f64,
    points: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("d", &self.d)
            .field("n_per_dim", &self.n)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid {
    pub fn new(d: usize, n_per_dim: usize, half_width: f64) -> Result<Arc<Self>> {
        Self::with_budget(d, n_per_dim, half_width, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(
        d: usize,
        n_per_dim: usize,
        half_width: f64,
        budget: usize,
    ) -> Result<Arc<Self>> {
        if !(1..=3).contains(&d) {
            return Err(LabError::UnsupportedDimension(d));
        }
        if !n_per_dim.is_power_of_two() || n_per_dim < 4 {
            return Err(LabError::InvalidParameter(format!(
                "n_per_dim = {n_per_dim} must be a power of two >= 4"
            )));
        }
        if !(half_width > 0.0) {
            return Err(LabError::InvalidParameter("half_width must be positive".into()));
        }
        let points = n_per_dim.pow(d as u32);
        if points > budget {
            return Err(LabError::GridBudget { points, budget });
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            d,
            n: n_per_dim,
            half_width,
            dx: 2.0 * half_width / n_per_dim as f64,
            points,
            fft_fwd: planner.plan_fft_forward(n_per_dim),
            fft_inv: planner.plan_fft_inverse(n_per_dim),
        }))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            d: self.d,
            n_per_dim: self.n,
            half_width: self.half_width,
        }
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Arc<Self>> {
        Self::new(spec.d, spec.n_per_dim, spec.half_width)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Quadrature weight of one cell, `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    /// Coordinate along one axis: `x_j = -L + j dx`.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    /// Wavenumber for unsigned index `k`: `(pi/L) * signed(k)`.
    pub fn freq(&self, k: usize) -> f64 {
        let signed = if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        };
        std::f64::consts::PI / self.half_width * signed as f64
    }

    /// Decompose a flat index into per-axis indices (first axis slowest).
    pub fn axis_indices(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Position vector at a flat index (unused axes zero).
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    /// Frequency vector at a flat index (unused axes zero).
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            xi[a] = self.freq(idx[a]);
        }
        xi
    }

    /// Build a frequency-space multiplier array from `xi -> m(xi)`.
    pub fn multiplier<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.points)
            .map(|i| {
                let xi = self.frequency(i);
                f(&xi[..self.d])
            })
            .collect()
    }

    /// Build a position-space weight array from `x -> w(x)`.
    pub fn weight<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.points)
            .map(|i| {
                let x = self.position(i);
                f(&x[..self.d])
            })
            .collect()
    }

    /// In-place unnormalized transform along a single axis.
    pub fn fft_axis(&self, vals: &mut [Complex64], axis: usize, forward: bool) {
        let plan = if forward { &self.fft_fwd } else { &self.fft_inv };
        let n = self.n;
        if axis == self.d - 1 {
            // contiguous lines; rustfft processes back-to-back chunks
            plan.process(vals);
            return;
        }
        let stride = n.pow((self.d - 1 - axis) as u32);
        let block = stride * n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for base in (0..self.points).step_by(block) {
            for off in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = vals[base + off + t * stride];
                }
                plan.process(&mut line);
                for (t, slot) in line.iter().enumerate() {
                    vals[base + off + t * stride] = *slot;
                }
            }
        }
    }

    /// In-place unnormalized forward FFT over all axes.
    pub fn fft_forward(&self, vals: &mut [Complex64]) {
        debug_assert_eq!(vals.len(), self.points);
        for a in 0..self.d {
            self.fft_axis(vals, a, true);
        }
    }

    /// In-place inverse FFT over all axes, normalized by `1/points`.
    pub fn fft_inverse(&self, vals: &mut [Complex64]) {
        debug_assert_eq!(vals.len(), self.points);
        for a in 0..self.d {
            self.fft_axis(vals, a, false);
        }
        let scale = 1.0 / self.points as f64;
        for v in vals.iter_mut() {
            *v *= scale;
        }
    }
}

/// A complex-valued grid function with an optional time tag.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
    pub time_tag: Option<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(LabError::InvalidParameter(format!(
                "field length {} does not match grid points {}",
                values.len(),
                grid.points()
            )));
        }
        Ok(Self {
            grid,
            values,
            time_tag: None,
        })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.points();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            time_tag: None,
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: Arc<Grid>, f: F) -> Self {
        let values = grid.weight(&f);
        Self {
            grid,
            values,
            time_tag: None,
        }
    }

    /// Centered Gaussian `amp * e^{-|x|^2 / (2 sigma^2)}`.
    pub fn gaussian(grid: Arc<Grid>, amp: f64, sigma: f64) -> Self {
        Self::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|&c| c * c).sum();
            Complex64::new(amp * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
        })
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time_tag = Some(t);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        *self.grid == *other.grid
    }

    pub fn conj(&self) -> Field {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = v.conj();
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Field {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &Field) -> Field {
        debug_assert!(self.same_grid(other));
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        debug_assert!(self.same_grid(other));
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v -= w;
        }
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Field) {
        debug_assert!(self.same_grid(other));
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += c * w;
        }
    }

    /// Pointwise product with a weight array.
    pub fn pointwise(&self, w: &[Complex64]) -> Field {
        debug_assert_eq!(w.len(), self.values.len());
        let mut out = self.clone();
        for (v, m) in out.values.iter_mut().zip(w) {
            *v *= m;
        }
        out
    }

    /// `L^2` inner product `dx^d sum conj(f) g`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        debug_assert!(self.same_grid(other));
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, w) in self.values.iter().zip(&other.values) {
            acc += v.conj() * w;
        }
        acc * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum modulus on the outermost index shell relative to the overall
    /// maximum; a decay diagnostic, not an enforced invariant.
    pub fn boundary_leak(&self) -> f64 {
        let n = self.grid.n_per_dim();
        let mut edge_max = 0.0f64;
        let mut all_max = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.axis_indices(i);
            let m = v.norm();
            all_max = all_max.max(m);
            let on_edge = (0..self.grid.dim()).any(|a| idx[a] == 0 || idx[a] == n - 1);
            if on_edge {
                edge_max = edge_max.max(m);
            }
        }
        if all_max == 0.0 {
            0.0
        } else {
            edge_max / all_max
        }
    }
}

/// A band-limited random field: Gaussian frequency amplitudes damped by
/// `e^{-|xi|^2 / (2 xi_c^2)}`, localized by a spatial envelope of width `L/8`
/// so that weighted operators see a decayed function, normalized to unit
/// `L^2` norm.
pub fn random_smooth_field(grid: &Arc<Grid>, seed: u64, xi_cutoff: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<Complex64> = (0..grid.points())
        .map(|i| {
            let xi = grid.frequency(i);
            let x2: f64 = xi[..grid.dim()].iter().map(|&c| c * c).sum();
            let damp = (-x2 / (2.0 * xi_cutoff * xi_cutoff)).exp();
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp
        })
        .collect();
    grid.fft_inverse(&mut coeffs);
    let sigma = grid.half_width() / 8.0;
    for (i, v) in coeffs.iter_mut().enumerate() {
        let x = grid.position(i);
        let r2: f64 = x[..grid.dim()].iter().map(|&c| c * c).sum();
        *v *= (-r2 / (2.0 * sigma * sigma)).exp();
    }
    let mut f = Field::new(grid.clone(), coeffs).expect("matching length");
    let n = f.norm_l2();
    if n > 0.0 {
        f = f.scale(Complex64::new(1.0 / n, 0.0));
    }
    f
}

#[derive(Serialize, Deserialize)]
struct FieldSidecar {
    grid: GridSpec,
    time_tag: Option<f64>,
}

/// Write a field as raw little-endian `f64` interleaved re/im plus a JSON
/// sidecar; `path` is the stem, producing `path.bin` and `path.json`.
pub fn save_field(field: &Field, path: &Path) -> Result<()> {
    let bin_path = path.with_extension("bin");
    let json_path = path.with_extension("json");
    let mut bytes = Vec::with_capacity(field.values.len() * 16);
    for v in &field.values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    std::fs::File::create(bin_path)?.write_all(&bytes)?;
    let sidecar = FieldSidecar {
        grid: field.grid.spec(),
        time_tag: field.time_tag,
    };
    std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    let sidecar: FieldSidecar =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
    let grid = Grid::from_spec(&sidecar.grid)?;
    let mut bytes = Vec::new();
    std::fs::File::open(path.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != grid.points() * 16 {
        return Err(LabError::InvalidParameter(format!(
            "snapshot has {} bytes, expected {}",
            bytes.len(),
            grid.points() * 16
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    let mut f = Field::new(grid, values)?;
    f.time_tag = sidecar.time_tag;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.coord(0), -4.0);
        assert_eq!(g.coord(7), 3.0);
        assert_eq!(g.freq(0), 0.0);
        assert_eq!(g.freq(1), std::f64::consts::PI / 4.0);
        assert_eq!(g.freq(7), -std::f64::consts::PI / 4.0);
        assert_eq!(g.freq(4), -std::f64::consts::PI); // Nyquist
    }

    #[test]
    fn budget_enforced() {
        assert!(Grid::with_budget(3, 256, 10.0, 1 << 22).is_err());
        assert!(Grid::new(2, 1024, 10.0).is_ok());
    }

    #[test]
    fn fft_round_trip() {
        for d in 1..=3 {
            let g = Grid::new(d, 16, 5.0).unwrap();
            let f = random_smooth_field(&g, 17, 1.5);
            let mut vals = f.values.clone();
            g.fft_forward(&mut vals);
            g.fft_inverse(&mut vals);
            let err: f64 = vals
                .iter()
                .zip(&f.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "d={d} err={err}");
        }
    }

    #[test]
    fn fft_plane_wave_eigenvector() {
        // e^{i xi_1 x} has a single nonzero Fourier coefficient
        let g = Grid::new(1, 32, 8.0).unwrap();
        let xi1 = g.freq(1);
        let f = Field::from_fn(g.clone(), |x| Complex64::from_polar(1.0, xi1 * x[0]));
        let mut vals = f.values.clone();
        g.fft_forward(&mut vals);
        for (k, v) in vals.iter().enumerate() {
            let mag = v.norm();
            if k == 1 {
                assert!((mag - 32.0).abs() < 1e-9);
            } else {
                assert!(mag < 1e-9, "k={k} mag={mag}");
            }
        }
    }

    #[test]
    fn parseval() {
        let g = Grid::new(2, 32, 6.0).unwrap();
        let f = random_smooth_field(&g, 3, 2.0);
        let pos = f.norm_l2();
        let mut vals = f.values.clone();
        g.fft_forward(&mut vals);
        let freq: f64 = vals.iter().map(|v| v.norm_sqr()).sum::<f64>()
            * g.cell_volume()
            / g.points() as f64;
        assert!((pos - freq.sqrt()).abs() < 1e-12 * pos);
    }

    #[test]
    fn boundary_leak_detects_decay() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let narrow = Field::gaussian(g.clone(), 1.0, 1.0);
        assert!(narrow.boundary_leak() < 1e-10);
        let wide = Field::gaussian(g, 1.0, 8.0);
        assert!(wide.boundary_leak() > 1e-2);
    }

    #[test]
    fn snapshot_round_trip_bit_exact() {
        let dir = std::env::temp_dir().join("nls_core_field_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let g = Grid::new(1, 16, 3.0).unwrap();
        let f = random_smooth_field(&g, 5, 1.0).with_time(0.625);
        let stem = dir.join("snap");
        save_field(&f, &stem).unwrap();
        let back = load_field(&stem).unwrap();
        assert_eq!(back.time_tag, Some(0.625));
        assert_eq!(back.grid.spec(), g.spec());
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!(a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
