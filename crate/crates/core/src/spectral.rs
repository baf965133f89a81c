//! Fourier multipliers, the free Schrödinger group, the Galilean vector field
//! `J(t) = x - t p`, weighted norms, conjugation identities, dealiasing and
//! the fractional Hardy sample.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};
use crate::resample::{resample_scaled, Dilation};

/// Apply a precomputed frequency-space multiplier.
pub fn apply_multiplier(f: &Field, m: &[Complex64]) -> Field {
    debug_assert_eq!(m.len(), f.values.len());
    let mut vals = f.values.clone();
    f.grid.fft_forward(&mut vals);
    for (v, mv) in vals.iter_mut().zip(m) {
        *v *= mv;
    }
    f.grid.fft_inverse(&mut vals);
    let mut out = f.clone();
    out.values = vals;
    out
}

/// Apply `xi -> m(xi)` as a Fourier multiplier.
pub fn apply_multiplier_fn<F: Fn(&[f64]) -> Complex64>(f: &Field, m: F) -> Result<Field> {
    let arr = f.grid.multiplier(&m);
    if arr.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LabError::NonFinite("multiplier values".into()));
    }
    Ok(apply_multiplier(f, &arr))
}

/// Multiplier of the free propagator `e^{-i t |xi|^2 / 2}`.
pub fn kinetic_multiplier(grid: &Grid, t: f64) -> Vec<Complex64> {
    grid.multiplier(|xi| {
        let x2: f64 = xi.iter().map(|&c| c * c).sum();
        Complex64::from_polar(1.0, -t * x2 / 2.0)
    })
}

/// Free Schrödinger evolution `U(t) = e^{-i t p^2 / 2}`.
pub fn free_propagate(f: &Field, t: f64) -> Field {
    let m = kinetic_multiplier(&f.grid, t);
    let mut out = apply_multiplier(f, &m);
    out.time_tag = f.time_tag.map(|s| s + t);
    out
}

/// One momentum component `p_a = -i d/dx_a`, with the Nyquist mode zeroed so
/// the discrete operator stays self-adjoint.
pub fn apply_p_axis(f: &Field, axis: usize) -> Field {
    let n = f.grid.n_per_dim();
    let m = f.grid.multiplier(|_| Complex64::new(0.0, 0.0));
    let mut m = m;
    for (i, slot) in m.iter_mut().enumerate() {
        let idx = f.grid.axis_indices(i);
        let k = idx[axis];
        let v = if k == n / 2 { 0.0 } else { f.grid.freq(k) };
        *slot = Complex64::new(v, 0.0);
    }
    apply_multiplier(f, &m)
}

/// One position component as a pointwise multiplication.
pub fn apply_x_axis(f: &Field, axis: usize) -> Field {
    let mut out = f.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        *v *= f.grid.position(i)[axis];
    }
    out
}

/// `p^2 = |p|^2` as a multiplier.
pub fn apply_p_squared(f: &Field) -> Field {
    let m = f.grid.multiplier(|xi| {
        let x2: f64 = xi.iter().map(|&c| c * c).sum();
        Complex64::new(x2, 0.0)
    });
    apply_multiplier(f, &m)
}

/// `J(t) = x - t p` on a one-dimensional grid.
pub fn apply_j(f: &Field, t: f64) -> Result<Field> {
    if f.grid.dim() != 1 {
        return Err(LabError::UnsupportedDimension(f.grid.dim()));
    }
    let xf = apply_x_axis(f, 0);
    let pf = apply_p_axis(f, 0);
    Ok(xf.sub(&pf.scale(Complex64::new(t, 0.0))))
}

/// `sum_a ||(x_a - t p_a) f||^2`, valid in any dimension.
pub fn j_norm_sq(f: &Field, t: f64) -> f64 {
    let mut acc = 0.0;
    for a in 0..f.grid.dim() {
        let comp = apply_x_axis(f, a).sub(&apply_p_axis(f, a).scale(Complex64::new(t, 0.0)));
        let n = comp.norm_l2();
        acc += n * n;
    }
    acc
}

pub fn j_norm(f: &Field, t: f64) -> f64 {
    j_norm_sq(f, t).sqrt()
}

/// `J(t)` through its phase-conjugated formula `-e^{i x^2/2t} t p e^{-i x^2/2t}`
/// (defined for `t != 0`); exposed for the identity tests.
pub fn apply_j_phase_form(f: &Field, t: f64) -> Result<Field> {
    if f.grid.dim() != 1 {
        return Err(LabError::UnsupportedDimension(f.grid.dim()));
    }
    if t == 0.0 {
        return Err(LabError::InvalidParameter("phase form needs t != 0".into()));
    }
    let phase_neg = f.grid.weight(|x| Complex64::from_polar(1.0, -x[0] * x[0] / (2.0 * t)));
    let phase_pos = f.grid.weight(|x| Complex64::from_polar(1.0, x[0] * x[0] / (2.0 * t)));
    let inner = f.pointwise(&phase_neg);
    let p_inner = apply_p_axis(&inner, 0);
    Ok(p_inner.pointwise(&phase_pos).scale(Complex64::new(-t, 0.0)))
}

/// Symmetrized scaling generator `A = (x . p + p . x) / 2`.
pub fn apply_scaling_generator(f: &Field) -> Field {
    let mut out = Field::zeros(f.grid.clone());
    for a in 0..f.grid.dim() {
        let xp = apply_x_axis(&apply_p_axis(f, a), a);
        let px = apply_p_axis(&apply_x_axis(f, a), a);
        out.axpy(Complex64::new(0.5, 0.0), &xp);
        out.axpy(Complex64::new(0.5, 0.0), &px);
    }
    out
}

/// `<xi>^s` multiplier applied spectrally.
pub fn apply_bracket_p(f: &Field, s: f64) -> Field {
    let m = f.grid.multiplier(|xi| {
        let x2: f64 = xi.iter().map(|&c| c * c).sum();
        Complex64::new((1.0 + x2).powf(s / 2.0), 0.0)
    });
    apply_multiplier(f, &m)
}

/// `<x>^b` pointwise.
pub fn apply_bracket_x(f: &Field, b: f64) -> Field {
    let mut out = f.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let x = f.grid.position(i);
        let r2: f64 = x[..f.grid.dim()].iter().map(|&c| c * c).sum();
        *v *= (1.0 + r2).powf(b / 2.0);
    }
    out
}

/// `L^r` norm by grid quadrature.
pub fn lr_norm(f: &Field, r: f64) -> Result<f64> {
    if r < 1.0 {
        return Err(LabError::InvalidParameter(format!("L^r needs r >= 1, got {r}")));
    }
    if r.is_infinite() {
        return Ok(f.norm_sup());
    }
    let s: f64 = f.values.iter().map(|v| v.norm().powf(r)).sum();
    Ok((s * f.grid.cell_volume()).powf(1.0 / r))
}

/// Norm selections over the weighted scale used throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec {
    L2,
    Lr(f64),
    /// `||<p> u||_{L^2}`
    H1,
    /// `||<p> u||_{L^r}`
    H1r(f64),
    /// `||<p>^a u||_{L^2} + ||<x>^b u||_{L^2}`
    Hab(f64, f64),
    /// `||u||_{L^2} + ||J(t) u||_{L^2}`
    X1t(f64),
    /// `||<p>^{-1} u||_{L^r}`
    Hm1r(f64),
}

pub fn norm(f: &Field, spec: NormSpec) -> Result<f64> {
    match spec {
        NormSpec::L2 => Ok(f.norm_l2()),
        NormSpec::Lr(r) => lr_norm(f, r),
        NormSpec::H1 => Ok(apply_bracket_p(f, 1.0).norm_l2()),
        NormSpec::H1r(r) => lr_norm(&apply_bracket_p(f, 1.0), r),
        NormSpec::Hab(a, b) => {
            Ok(apply_bracket_p(f, a).norm_l2() + apply_bracket_x(f, b).norm_l2())
        }
        NormSpec::X1t(t) => Ok(f.norm_l2() + j_norm(f, t)),
        NormSpec::Hm1r(r) => lr_norm(&apply_bracket_p(f, -1.0), r),
    }
}

/// The admissible exponent pairs per dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissiblePairs {
    pub d: usize,
    pub q0: f64,
    pub r0: f64,
    pub q1: f64,
    pub r1: f64,
}

impl AdmissiblePairs {
    pub fn for_dim(d: usize, alpha0: f64) -> Result<Self> {
        let (q0, r0) = match d {
            1 => (12.0, 3.0),
            2 => (2.0 / (alpha0 - 1.0), 2.0 / (2.0 - alpha0)),
            3 => (4.0, 3.0),
            _ => return Err(LabError::UnsupportedDimension(d)),
        };
        let (q1, r1) = match d {
            1 => (1.0, 2.0),
            _ => (1.0, r0),
        };
        Ok(Self { d, q0, r0, q1, r1 })
    }
}

/// The conjugation identities of the operator calculus, checked in the
/// relative `L^2` sense on a supplied test field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConjugationIdentity {
    /// `e^{-i a x^2} p e^{i a x^2} = p + 2 a x`
    QuadraticPhaseMomentum,
    /// `e^{-i a p^2} x e^{i a p^2} = x - 2 a p`
    QuadraticKineticPosition,
    /// `e^{i a A} (x, p) e^{-i a A} = (e^a x, e^{-a} p)`
    ScalingConjugation,
    /// `D(a)^{-1} (x, p) D(a) = (a x, p / a)`
    DilationConjugation,
    /// `i[A, p^2] = -2 p^2`
    CommutatorScalingKinetic,
    /// `i[A, x^2] = 2 x^2`
    CommutatorScalingPosition,
    /// `i[p^2, x^2] = 4 A`
    CommutatorKineticPosition,
}

fn rel_residual(lhs: &Field, rhs: &Field) -> f64 {
    let denom = rhs.norm_l2().max(1e-300);
    lhs.sub(rhs).norm_l2() / denom
}

pub fn conjugation_identity_check(
    which: ConjugationIdentity,
    a: f64,
    f: &Field,
) -> Result<f64> {
    use ConjugationIdentity::*;
    let grid = &f.grid;
    match which {
        QuadraticPhaseMomentum => {
            let up = grid.weight(|x| {
                let r2: f64 = x.iter().map(|&c| c * c).sum();
                Complex64::from_polar(1.0, a * r2)
            });
            let dn = grid.weight(|x| {
                let r2: f64 = x.iter().map(|&c| c * c).sum();
                Complex64::from_polar(1.0, -a * r2)
            });
            let mut worst = 0.0f64;
            for axis in 0..grid.dim() {
                let lhs = apply_p_axis(&f.pointwise(&up), axis).pointwise(&dn);
                let rhs = apply_p_axis(f, axis)
                    .add(&apply_x_axis(f, axis).scale(Complex64::new(2.0 * a, 0.0)));
                worst = worst.max(rel_residual(&lhs, &rhs));
            }
            Ok(worst)
        }
        QuadraticKineticPosition => {
            let mut worst = 0.0f64;
            for axis in 0..grid.dim() {
                let up = free_propagate(f, -2.0 * a); // e^{i a p^2}
                let lhs = free_propagate(&apply_x_axis(&up, axis), 2.0 * a);
                let rhs = apply_x_axis(f, axis)
                    .sub(&apply_p_axis(f, axis).scale(Complex64::new(2.0 * a, 0.0)));
                worst = worst.max(rel_residual(&lhs, &rhs));
            }
            Ok(worst)
        }
        ScalingConjugation => {
            if grid.dim() != 1 {
                return Err(LabError::UnsupportedDimension(grid.dim()));
            }
            let exp_gen = |g: &Field, s: f64| -> Field {
                // (e^{i s A} g)(x) = e^{s d / 2} g(e^s x)
                resample_scaled(g, s.exp()).scale(Complex64::new((s / 2.0).exp(), 0.0))
            };
            let inner = exp_gen(f, -a);
            let lhs_x = exp_gen(&apply_x_axis(&inner, 0), a);
            let rhs_x = apply_x_axis(f, 0).scale(Complex64::new(a.exp(), 0.0));
            let lhs_p = exp_gen(&apply_p_axis(&inner, 0), a);
            let rhs_p = apply_p_axis(f, 0).scale(Complex64::new((-a).exp(), 0.0));
            Ok(rel_residual(&lhs_x, &rhs_x).max(rel_residual(&lhs_p, &rhs_p)))
        }
        DilationConjugation => {
            if grid.dim() != 1 {
                return Err(LabError::UnsupportedDimension(grid.dim()));
            }
            let dil = Dilation::new(a)?;
            let inner = dil.apply(f);
            let lhs_x = dil.apply_inverse(&apply_x_axis(&inner, 0));
            let rhs_x = apply_x_axis(f, 0).scale(Complex64::new(a, 0.0));
            let lhs_p = dil.apply_inverse(&apply_p_axis(&inner, 0));
            let rhs_p = apply_p_axis(f, 0).scale(Complex64::new(1.0 / a, 0.0));
            Ok(rel_residual(&lhs_x, &rhs_x).max(rel_residual(&lhs_p, &rhs_p)))
        }
        CommutatorScalingKinetic => {
            let i = Complex64::new(0.0, 1.0);
            let comm = apply_scaling_generator(&apply_p_squared(f))
                .sub(&apply_p_squared(&apply_scaling_generator(f)));
            let lhs = comm.scale(i);
            let rhs = apply_p_squared(f).scale(Complex64::new(-2.0, 0.0));
            Ok(rel_residual(&lhs, &rhs))
        }
        CommutatorScalingPosition => {
            let i = Complex64::new(0.0, 1.0);
            let x2 = |g: &Field| {
                let mut out = g.clone();
                for (idx, v) in out.values.iter_mut().enumerate() {
                    let x = g.grid.position(idx);
                    let r2: f64 = x[..g.grid.dim()].iter().map(|&c| c * c).sum();
                    *v *= r2;
                }
                out
            };
            let comm = apply_scaling_generator(&x2(f)).sub(&x2(&apply_scaling_generator(f)));
            let lhs = comm.scale(i);
            let rhs = x2(f).scale(Complex64::new(2.0, 0.0));
            Ok(rel_residual(&lhs, &rhs))
        }
        CommutatorKineticPosition => {
            let i = Complex64::new(0.0, 1.0);
            let x2 = |g: &Field| {
                let mut out = g.clone();
                for (idx, v) in out.values.iter_mut().enumerate() {
                    let x = g.grid.position(idx);
                    let r2: f64 = x[..g.grid.dim()].iter().map(|&c| c * c).sum();
                    *v *= r2;
                }
                out
            };
            let comm = apply_p_squared(&x2(f)).sub(&x2(&apply_p_squared(f)));
            let lhs = comm.scale(i);
            let rhs = apply_scaling_generator(f).scale(Complex64::new(4.0, 0.0));
            Ok(rel_residual(&lhs, &rhs))
        }
    }
}

/// `|| |x|^{-s} f ||_{L^r} / || |p|^s f ||_{L^r}`, sampling the constant of the
/// fractional Hardy inequality. The singular weight takes its exact cell
/// average on the origin cell (one dimension) or a refined midpoint value.
pub fn fractional_hardy_sample(f: &Field, s: f64, r: f64) -> Result<f64> {
    let d = f.grid.dim() as f64;
    if !(0.0 <= s && s < d / r) {
        return Err(LabError::InvalidParameter(format!(
            "fractional Hardy needs 0 <= s < d/r, got s={s}, d/r={}",
            d / r
        )));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    if r.is_infinite() {
        return Err(LabError::InvalidParameter(
            "Hardy sample needs finite r".into(),
        ));
    }
    let dx = f.grid.dx();
    let d = f.grid.dim();
    // integrate |x|^{-s r} |f|^r with the singular power averaged exactly
    // (or by refined subsampling) per cell; the integrability condition
    // s r < d is exactly the precondition
    let sr = s * r;
    let mut acc = 0.0f64;
    for (i, v) in f.values.iter().enumerate() {
        let x = f.grid.position(i);
        let rr: f64 = x[..d].iter().map(|&c| c * c).sum::<f64>().sqrt();
        let w_avg = if d == 1 {
            let b = rr + dx / 2.0;
            let int = if rr < dx / 2.0 {
                // cell straddles the origin: both half-axes contribute
                ((dx / 2.0 - rr).powf(1.0 - sr) + b.powf(1.0 - sr)) / (1.0 - sr)
            } else {
                (b.powf(1.0 - sr) - (rr - dx / 2.0).powf(1.0 - sr)) / (1.0 - sr)
            };
            int / dx
        } else if rr < 6.0 * dx {
            near_origin_cell_average(d, dx, &x[..d], sr)
        } else {
            rr.powf(-sr)
        };
        acc += w_avg * v.norm().powf(r);
    }
    let num = (acc * f.grid.cell_volume()).powf(1.0 / r);
    let mods = f.grid.multiplier(|xi| {
        let x2: f64 = xi.iter().map(|&c| c * c).sum();
        Complex64::new(x2.sqrt().powf(s), 0.0)
    });
    let den = lr_norm(&apply_multiplier(f, &mods), r)?;
    if den == 0.0 {
        return Err(LabError::InvalidParameter("zero field in Hardy sample".into()));
    }
    Ok(num / den)
}

fn near_origin_cell_average(d: usize, dx: f64, center: &[f64], s: f64) -> f64 {
    // refined midpoint average of |x|^{-s} over the cell at `center`
    let sub = 8usize;
    let h = dx / sub as f64;
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut idx = vec![0usize; d];
    loop {
        let mut r2 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let c = center[a] - dx / 2.0 + (i as f64 + 0.5) * h;
            r2 += c * c;
        }
        acc += r2.sqrt().max(1e-300).powf(-s);
        count += 1;
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < sub {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == d {
                return acc / count as f64;
            }
        }
    }
}

/// Zero all modes above two-thirds of the Nyquist frequency (per axis).
pub fn dealias(f: &Field) -> Field {
    let n = f.grid.n_per_dim();
    let cut = n / 3;
    let mut vals = f.values.clone();
    f.grid.fft_forward(&mut vals);
    for (i, v) in vals.iter_mut().enumerate() {
        let idx = f.grid.axis_indices(i);
        for a in 0..f.grid.dim() {
            let k = idx[a];
            let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            if signed.unsigned_abs() as usize > cut {
                *v = Complex64::new(0.0, 0.0);
                break;
            }
        }
    }
    f.grid.fft_inverse(&mut vals);
    let mut out = f.clone();
    out.values = vals;
    out
}

/// Fraction of `L^2` mass carried by modes above two-thirds Nyquist.
pub fn high_mode_energy_fraction(f: &Field) -> f64 {
    let n = f.grid.n_per_dim();
    let cut = n / 3;
    let mut vals = f.values.clone();
    f.grid.fft_forward(&mut vals);
    let mut high = 0.0;
    let mut total = 0.0;
    for (i, v) in vals.iter().enumerate() {
        let idx = f.grid.axis_indices(i);
        let e = v.norm_sqr();
        total += e;
        let mut is_high = false;
        for a in 0..f.grid.dim() {
            let k = idx[a];
            let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            if signed.unsigned_abs() as usize > cut {
                is_high = true;
                break;
            }
        }
        if is_high {
            high += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_smooth_field;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn grid1() -> Arc<Grid> {
        Grid::new(1, 1024, 20.0).unwrap()
    }

    fn gauss(grid: &Arc<Grid>) -> Field {
        Field::gaussian(grid.clone(), 1.0, 1.0)
    }

    #[test]
    fn identity_multiplier() {
        let g = grid1();
        let f = gauss(&g);
        let out = apply_multiplier_fn(&f, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(out.sub(&f).norm_l2() < 1e-14 * f.norm_l2());
    }

    #[test]
    fn derivative_multiplier_on_sine() {
        let g = grid1();
        let l = g.half_width();
        let k = std::f64::consts::PI / l;
        let f = Field::from_fn(g.clone(), |x| Complex64::new((k * x[0]).sin(), 0.0));
        let df = apply_multiplier_fn(&f, |xi| Complex64::new(0.0, xi[0])).unwrap();
        let expect = Field::from_fn(g, |x| Complex64::new(k * (k * x[0]).cos(), 0.0));
        assert!(df.sub(&expect).norm_l2() < 1e-12 * expect.norm_l2());
    }

    #[test]
    fn bracket_inverse_pair() {
        let g = grid1();
        let f = gauss(&g);
        let out = apply_bracket_p(&apply_bracket_p(&f, -1.0), 1.0);
        assert!(out.sub(&f).norm_l2() < 1e-12 * f.norm_l2());
    }

    #[test]
    fn free_propagation_gaussian_closed_form() {
        let g = grid1();
        let f = gauss(&g);
        for &t in &[0.3, 1.0, 2.5] {
            let u = free_propagate(&f, t);
            let z = Complex64::new(1.0, t);
            let expect = Field::from_fn(g.clone(), |x| {
                z.powf(-0.5) * (-(x[0] * x[0]) / (2.0 * z)).exp()
            });
            let err = u.sub(&expect).norm_l2() / expect.norm_l2();
            assert!(err < 1e-8, "t={t} err={err}");
        }
    }

    #[test]
    fn propagator_unitary_and_group() {
        let g = grid1();
        let f = random_smooth_field(&g, 9, 3.0);
        let u = free_propagate(&f, 1.7);
        assert!((u.norm_l2() - f.norm_l2()).abs() < 1e-13);
        let a = free_propagate(&free_propagate(&f, 0.6), 0.9);
        let b = free_propagate(&f, 1.5);
        assert!(a.sub(&b).norm_l2() < 1e-12 * f.norm_l2());
        let id = free_propagate(&f, 0.0);
        assert!(id.sub(&f).norm_l2() == 0.0 || id.sub(&f).norm_l2() < 1e-15);
    }

    #[test]
    fn j_on_gaussian() {
        let g = grid1();
        let f = gauss(&g);
        let t = 1.3;
        let jf = apply_j(&f, t).unwrap();
        // J(t) e^{-x^2/2} = (1 - i t) x e^{-x^2/2}
        let expect = Field::from_fn(g.clone(), |x| {
            Complex64::new(1.0, -t) * x[0] * (-(x[0] * x[0]) / 2.0).exp()
        });
        assert!(jf.sub(&expect).norm_l2() < 1e-10 * expect.norm_l2());
        let nrm = jf.norm_l2();
        let closed = (1.0 + t * t).sqrt() * std::f64::consts::PI.powf(0.25)
            / std::f64::consts::SQRT_2;
        assert_relative_eq!(nrm, closed, max_relative = 1e-8);
        // J(0) = x
        let j0 = apply_j(&f, 0.0).unwrap();
        let xf = apply_x_axis(&f, 0);
        assert!(j0.sub(&xf).norm_l2() < 1e-14);
    }

    #[test]
    fn j_commutation_with_propagator() {
        let g = Grid::new(1, 1024, 24.0).unwrap();
        for seed in [21u64, 22, 23] {
            let f = random_smooth_field(&g, seed, 1.5);
            let (t1, t2) = (0.7, -0.4);
            let lhs = free_propagate(&apply_j(&f, t2).unwrap(), t1);
            let rhs = apply_j(&free_propagate(&f, t1), t1 + t2).unwrap();
            assert!(lhs.sub(&rhs).norm_l2() < 1e-10 * rhs.norm_l2());
        }
    }

    #[test]
    fn j_phase_formula_agrees() {
        let g = grid1();
        let f = gauss(&g);
        for &t in &[0.5, 1.0, 2.0] {
            let direct = apply_j(&f, t).unwrap();
            let phase = apply_j_phase_form(&f, t).unwrap();
            let err = direct.sub(&phase).norm_l2() / direct.norm_l2();
            assert!(err < 1e-9, "t={t} err={err}");
        }
    }

    #[test]
    fn gaussian_norms() {
        let g = grid1();
        let f = gauss(&g);
        assert_relative_eq!(
            norm(&f, NormSpec::L2).unwrap(),
            std::f64::consts::PI.powf(0.25),
            max_relative = 1e-8
        );
        assert_relative_eq!(
            norm(&f, NormSpec::Hab(0.0, 0.0)).unwrap(),
            2.0 * f.norm_l2(),
            max_relative = 1e-14
        );
        // ||<x> e^{-x^2/2}||_{L^2} = sqrt(3 sqrt(pi) / 2)
        let weighted = apply_bracket_x(&f, 1.0).norm_l2();
        assert_relative_eq!(
            weighted,
            (1.5 * std::f64::consts::PI.sqrt()).sqrt(),
            max_relative = 1e-8
        );
    }

    #[test]
    fn conjugation_identities_on_gaussian() {
        // dilation-type identities resample to arguments ~ a L, so use a box
        // with room to spare
        let g = Grid::new(1, 1024, 30.0).unwrap();
        let f = gauss(&g);
        let r = conjugation_identity_check(
            ConjugationIdentity::QuadraticPhaseMomentum,
            0.7,
            &f,
        )
        .unwrap();
        assert!(r <= 1e-9, "phase-momentum residual {r}");
        let r = conjugation_identity_check(
            ConjugationIdentity::QuadraticKineticPosition,
            0.3,
            &f,
        )
        .unwrap();
        assert!(r <= 1e-8, "kinetic-position residual {r}");
        let r =
            conjugation_identity_check(ConjugationIdentity::ScalingConjugation, 0.4, &f).unwrap();
        assert!(r <= 1e-8, "scaling residual {r}");
        let r =
            conjugation_identity_check(ConjugationIdentity::DilationConjugation, 1.3, &f).unwrap();
        assert!(r <= 1e-8, "dilation residual {r}");
        for which in [
            ConjugationIdentity::CommutatorScalingKinetic,
            ConjugationIdentity::CommutatorScalingPosition,
            ConjugationIdentity::CommutatorKineticPosition,
        ] {
            let r = conjugation_identity_check(which, 0.0, &f).unwrap();
            assert!(r <= 1e-8, "{which:?} residual {r}");
        }
        // a = 0 collapses both sides
        let r = conjugation_identity_check(
            ConjugationIdentity::QuadraticPhaseMomentum,
            0.0,
            &f,
        )
        .unwrap();
        assert!(r <= 1e-14);
    }

    #[test]
    fn hardy_sample_trivial_and_stable() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let f = Field::gaussian(g.clone(), 1.0, 1.0);
        assert_eq!(fractional_hardy_sample(&f, 0.0, 2.0).unwrap(), 1.0);
        let r1 = fractional_hardy_sample(&f, 0.4, 2.0).unwrap();
        assert!(r1.is_finite() && r1 > 0.0);
        let g2 = Grid::new(1, 1024, 20.0).unwrap();
        let f2 = Field::gaussian(g2, 1.0, 1.0);
        let r2 = fractional_hardy_sample(&f2, 0.4, 2.0).unwrap();
        assert!(
            (r1 - r2).abs() <= 0.02 * r2,
            "refinement moved Hardy ratio: {r1} vs {r2}"
        );
        assert!(fractional_hardy_sample(&f, 0.6, 2.0).is_err());
    }

    #[test]
    fn dealias_clears_high_modes() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        // nonlinearity of a band-limited field spills above 2/3 Nyquist
        let f = random_smooth_field(&g, 33, 12.0);
        let cubed = Field::new(
            g.clone(),
            f.values.iter().map(|v| v * v * v.conj()).collect(),
        )
        .unwrap();
        let filtered = dealias(&cubed);
        assert!(high_mode_energy_fraction(&filtered) < 1e-28);
        assert!(high_mode_energy_fraction(&cubed) > 1e-12);
    }

    #[test]
    fn admissible_pairs_table() {
        let p1 = AdmissiblePairs::for_dim(1, 1.5).unwrap();
        assert_eq!((p1.q0, p1.r0, p1.q1, p1.r1), (12.0, 3.0, 1.0, 2.0));
        let p2 = AdmissiblePairs::for_dim(2, 1.5).unwrap();
        assert_relative_eq!(p2.q0, 4.0);
        assert_relative_eq!(p2.r0, 4.0);
        assert_relative_eq!(p2.r1, p2.r0);
        let p3 = AdmissiblePairs::for_dim(3, 1.5).unwrap();
        assert_eq!((p3.q0, p3.r0), (4.0, 3.0));
    }
}
