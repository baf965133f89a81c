//! Pseudo-conformal transform on grids, the norm identities tying the two
//! formulations together, and scattering-profile extraction with
//! convergence-rate measurement.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::evolution::TrajectoryField;
use crate::grid::Field;
use crate::oscillator::log_slope;
use crate::resample::resample_scaled;
use crate::spectral::{apply_j, apply_p_axis, free_propagate, j_norm, norm, NormSpec};

/// Boundary-decay threshold for transform resampling.
const PCT_LEAK_TOL: f64 = 1e-6;

/// Map a snapshot of the original problem at time `t_u >= 0` to the
/// transformed variable at `s = 1/(1+t_u)`:
/// `v(s, x) = s^{-d/2} e^{i|x|^2/(2s)} conj(u(t_u, x/s))`.
pub fn pct_forward(u: &Field, t_u: f64) -> Result<Field> {
    if t_u < 0.0 {
        return Err(LabError::InvalidParameter("transform needs t_u >= 0".into()));
    }
    if t_u > 3.0 {
        return Err(LabError::InvalidParameter(
            "coordinate rescaling beyond t_u = 3 leaves the decayed window".into(),
        ));
    }
    let leak = u.boundary_leak();
    if leak > PCT_LEAK_TOL {
        return Err(LabError::InvalidParameter(format!(
            "field leaks {leak:.3e} at the boundary; transform resampling would clip it"
        )));
    }
    let s = 1.0 / (1.0 + t_u);
    let d = u.grid.dim() as f64;
    let scaled = resample_scaled(u, 1.0 / s);
    let phase = u.grid.weight(|x| {
        let r2: f64 = x.iter().map(|&v| v * v).sum();
        Complex64::from_polar(1.0, r2 / (2.0 * s))
    });
    let mut out = scaled.conj().pointwise(&phase);
    let amp = s.powf(-d / 2.0);
    out = out.scale(Complex64::new(amp, 0.0));
    out.time_tag = Some(s);
    Ok(out)
}

/// Inverse transform: from `v` at `s` in `(0, 1]` back to `u` at
/// `t = (1-s)/s`: `u(t, y) = s^{d/2} e^{i s |y|^2 / 2} conj(v(s, s y))`.
pub fn pct_backward(v: &Field, s: f64) -> Result<Field> {
    if !(0.0 < s && s <= 1.0) {
        return Err(LabError::InvalidParameter(
            "inverse transform needs s in (0, 1]".into(),
        ));
    }
    let d = v.grid.dim() as f64;
    let scaled = resample_scaled(v, s);
    let phase = v.grid.weight(|x| {
        let r2: f64 = x.iter().map(|&c| c * c).sum();
        Complex64::from_polar(1.0, s * r2 / 2.0)
    });
    let mut out = scaled.conj().pointwise(&phase);
    out = out.scale(Complex64::new(s.powf(d / 2.0), 0.0));
    out.time_tag = Some((1.0 - s) / s);
    Ok(out)
}

/// Gaps in the transform norm identities along a trajectory of the original
/// equation: `||u(t)|| = ||v(1/(1+t))||` and
/// `||J(t+1) u(t)|| = ||grad v(1/(1+t))||`.
#[derive(Clone, Copy, Debug)]
pub struct NormIdentityRow {
    pub t: f64,
    pub mass_gap: f64,
    pub jnorm_gap: f64,
}

pub fn norm_identity_check(
    traj: &TrajectoryField,
    t_samples: &[f64],
) -> Result<Vec<NormIdentityRow>> {
    let mut rows = Vec::new();
    for &t in t_samples {
        let snap = traj.at(t);
        let node_t = snap.time_tag.unwrap_or(t);
        let v = pct_forward(snap, node_t)?;
        let mass_gap = (snap.norm_l2() - v.norm_l2()).abs();
        let grad: f64 = (0..v.grid.dim())
            .map(|a| apply_p_axis(&v, a).norm_l2().powi(2))
            .sum::<f64>()
            .sqrt();
        let jnorm_gap = (j_norm(snap, node_t + 1.0) - grad).abs();
        rows.push(NormIdentityRow {
            t: node_t,
            mass_gap,
            jnorm_gap,
        });
    }
    Ok(rows)
}

/// Scattering-profile record: pullback Cauchy norms against the final-time
/// profile, with a power-law fit over the last decade.
#[derive(Clone, Debug)]
pub struct ScatterReport {
    pub times: Vec<f64>,
    pub cauchy_norms: Vec<f64>,
    pub profile: Field,
    pub rate_fit: f64,
    /// Pullback gaps nonincreasing (within 5%) over the last third.
    pub cauchy_ok: bool,
}

/// Pull back along the free flow with parameter `t0` and measure convergence
/// to the final profile in the weighted `H^{0,1}` norm.
pub fn extract_profile(traj: &TrajectoryField, t0: f64) -> Result<ScatterReport> {
    let m = traj.snapshots.len();
    if m < 4 {
        return Err(LabError::InvalidParameter("trajectory too short".into()));
    }
    let pullbacks: Vec<Field> = traj
        .mesh
        .nodes
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, s)| free_propagate(s, -(t + t0)))
        .collect();
    let profile = pullbacks.last().unwrap().clone();
    let mut cauchy = Vec::with_capacity(m);
    for w in &pullbacks {
        cauchy.push(norm(&w.sub(&profile), NormSpec::Hab(0.0, 1.0))?);
    }
    let times = traj.mesh.nodes.clone();
    // monotone decrease over the last third, with 5% slack
    let start = 2 * m / 3;
    let mut ok = true;
    for i in start..m - 1 {
        if cauchy[i + 1] > 1.05 * cauchy[i] + 1e-14 {
            ok = false;
        }
    }
    // power-law fit over the last decade, skipping the vanishing tail
    let t_final = *times.last().unwrap();
    let lo = t_final.abs() / 10.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, g) in times.iter().zip(&cauchy) {
        if t.abs() >= lo && t.abs() <= 0.8 * t_final.abs() && *g > 0.0 {
            xs.push(t.abs());
            ys.push(*g);
        }
    }
    let rate_fit = if xs.len() >= 3 {
        log_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(ScatterReport {
        times,
        cauchy_norms: cauchy,
        profile,
        rate_fit,
        cauchy_ok: ok,
    })
}

/// Both-direction pullback convergence in the `H^{1,1}` norm (pull back along
/// the free flow itself, `t0 = 0`).
pub fn h11_pullback_report(traj: &TrajectoryField) -> Result<ScatterReport> {
    let m = traj.snapshots.len();
    if m < 4 {
        return Err(LabError::InvalidParameter("trajectory too short".into()));
    }
    let pullbacks: Vec<Field> = traj
        .mesh
        .nodes
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, s)| free_propagate(s, -t))
        .collect();
    let profile = pullbacks.last().unwrap().clone();
    let mut cauchy = Vec::with_capacity(m);
    for w in &pullbacks {
        cauchy.push(norm(&w.sub(&profile), NormSpec::Hab(1.0, 1.0))?);
    }
    let start = 2 * m / 3;
    let mut ok = true;
    for i in start..m - 1 {
        if cauchy[i + 1] > 1.05 * cauchy[i] + 1e-14 {
            ok = false;
        }
    }
    Ok(ScatterReport {
        times: traj.mesh.nodes.clone(),
        cauchy_norms: cauchy,
        profile,
        rate_fit: f64::NAN,
        cauchy_ok: ok,
    })
}

/// Evolve small data in both time directions and report the `H^{1,1}`
/// pullback convergence of each; the forward report comes first.
pub fn h11_both_directions(
    u0: &Field,
    seq: &crate::nonlinearity::CoefficientSeq,
    alpha0: f64,
    t_final: f64,
    steps: usize,
) -> Result<(ScatterReport, ScatterReport)> {
    use crate::evolution::{evolve, EvolveOptions, ProblemTag, TimeMesh};
    let mut reports = Vec::with_capacity(2);
    for sign in [1.0f64, -1.0] {
        let mesh = TimeMesh::uniform(0.0, sign * t_final, steps)?;
        let out = evolve(
            u0,
            &mesh,
            seq,
            ProblemTag::UEquation,
            alpha0,
            &EvolveOptions::default(),
        )?;
        if let Some(event) = out.blowup {
            return Err(LabError::BlowUp {
                t_last: event.t_last,
                reason: event.reason,
            });
        }
        reports.push(h11_pullback_report(&out.trajectory)?);
    }
    let backward = reports.pop().expect("two reports");
    let forward = reports.pop().expect("two reports");
    Ok((forward, backward))
}

/// `p = J(1) - J(2)` exactly, and the triangle bound
/// `||p f|| <= 3 ||J(1) f|| + 2 ||J(2) f||` used for the `H^{1,1}` pullback.
pub fn momentum_combination_check(f: &Field) -> Result<(f64, bool)> {
    let j1 = apply_j(f, 1.0)?;
    let j2 = apply_j(f, 2.0)?;
    let p = apply_p_axis(f, 0);
    let identity_residual = j1.sub(&j2).sub(&p).norm_l2() / p.norm_l2().max(1e-300);
    let bound_holds = p.norm_l2() <= 3.0 * j1.norm_l2() + 2.0 * j2.norm_l2() + 1e-14;
    Ok((identity_residual, bound_holds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, EvolveOptions, ProblemTag, TimeMesh};
    use crate::grid::{random_smooth_field, Grid};
    use crate::nonlinearity::CoefficientSeq;

    #[test]
    fn transform_at_zero_time_is_phase_conjugation() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let u0 = Field::gaussian(g.clone(), 0.4, 1.0);
        let v = pct_forward(&u0, 0.0).unwrap();
        let phase = g.weight(|x| Complex64::from_polar(1.0, x[0] * x[0] / 2.0));
        let expect = u0.conj().pointwise(&phase);
        assert!(v.sub(&expect).norm_l2() <= 1e-12 * expect.norm_l2());
        assert_eq!(v.time_tag, Some(1.0));
    }

    #[test]
    fn transform_round_trip() {
        let g = Grid::new(1, 1024, 24.0).unwrap();
        let u = free_propagate(&Field::gaussian(g, 0.4, 1.0), 1.5);
        let v = pct_forward(&u, 1.5).unwrap();
        let back = pct_backward(&v, 1.0 / 2.5).unwrap();
        let err = back.sub(&u).norm_l2() / u.norm_l2();
        assert!(err <= 1e-8, "err={err}");
    }

    #[test]
    fn transform_preserves_mass_along_free_flow() {
        let g = Grid::new(1, 1024, 30.0).unwrap();
        let u0 = Field::gaussian(g, 0.4, 1.0);
        for &t in &[0.5, 1.0, 2.5] {
            let u = free_propagate(&u0, t);
            let v = pct_forward(&u, t).unwrap();
            assert!(
                (u.norm_l2() - v.norm_l2()).abs() <= 1e-6 * u.norm_l2(),
                "t={t}"
            );
        }
    }

    #[test]
    fn transform_rejects_leaky_fields() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let wide = Field::gaussian(g, 1.0, 6.0);
        assert!(pct_forward(&wide, 1.0).is_err());
        let ok = Field::gaussian(Grid::new(1, 256, 10.0).unwrap(), 1.0, 1.0);
        assert!(pct_forward(&ok, 4.0).is_err());
    }

    #[test]
    fn norm_identities_linear_flow() {
        let g = Grid::new(1, 1024, 30.0).unwrap();
        let u0 = Field::gaussian(g, 0.3, 1.0);
        let mesh = TimeMesh::uniform(0.0, 3.0, 48).unwrap();
        let traj = evolve(
            &u0,
            &mesh,
            &CoefficientSeq::zero(4.0).unwrap(),
            ProblemTag::UEquation,
            1.5,
            &EvolveOptions::default(),
        )
        .unwrap()
        .trajectory;
        let rows = norm_identity_check(&traj, &[0.0, 1.0, 3.0]).unwrap();
        for row in &rows {
            assert!(row.mass_gap <= 1e-6, "t={} mass gap {}", row.t, row.mass_gap);
            assert!(row.jnorm_gap <= 1e-6, "t={} j gap {}", row.t, row.jnorm_gap);
        }
        // no evolution at all: the identity is exact up to resampling
        assert!(rows[0].mass_gap <= 1e-10);
        assert!(rows[0].jnorm_gap <= 1e-10);
    }

    #[test]
    fn transformed_evolution_matches_transformed_trajectory() {
        // evolve u forward and v backward from the transformed data; the
        // transform of u(t) must land on v(1/(1+t))
        let g = Grid::new(1, 1024, 30.0).unwrap();
        let seq = CoefficientSeq::finite(4.0, &[(2, Complex64::new(1.0, 0.0))]).unwrap();
        let u0 = Field::gaussian(g.clone(), 0.05, 1.0);
        let u_mesh = TimeMesh::uniform(0.0, 3.0, 192).unwrap();
        let u_run = evolve(&u0, &u_mesh, &seq, ProblemTag::UEquation, 1.5, &EvolveOptions::default())
            .unwrap()
            .trajectory;
        let v1 = pct_forward(&u0, 0.0).unwrap();
        let v_mesh = TimeMesh::uniform(1.0, 0.25, 192).unwrap();
        let v_run = evolve(&v1, &v_mesh, &seq, ProblemTag::VEquation, 1.5, &EvolveOptions::default())
            .unwrap()
            .trajectory;
        for &t in &[1.0f64, 3.0] {
            let s = 1.0 / (1.0 + t);
            let from_u = pct_forward(u_run.at(t), t).unwrap();
            let from_v = v_run.at(s);
            let err = from_u.sub(from_v).norm_l2();
            assert!(err <= 1e-5, "t={t} err={err:.3e}");
        }
    }

    #[test]
    fn free_flow_profile_is_exact() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let u0 = Field::gaussian(g, 0.3, 1.0);
        let mesh = TimeMesh::uniform(0.0, 8.0, 32).unwrap();
        let traj = evolve(
            &u0,
            &mesh,
            &CoefficientSeq::zero(4.0).unwrap(),
            ProblemTag::UEquation,
            1.5,
            &EvolveOptions::default(),
        )
        .unwrap()
        .trajectory;
        let report = extract_profile(&traj, 1.0).unwrap();
        assert!(report.cauchy_ok);
        for gap in &report.cauchy_norms {
            assert!(*gap <= 1e-12, "gap={gap}");
        }
    }

    #[test]
    fn nonlinear_small_data_pullbacks_decrease() {
        let g = Grid::new(1, 1024, 65.0).unwrap();
        let seq = CoefficientSeq::finite(4.0, &[(2, Complex64::new(1.0, 0.0))]).unwrap();
        let u0 = Field::gaussian(g, 0.05, 1.0);
        let mesh = TimeMesh::uniform(0.0, 10.0, 400).unwrap();
        let traj = evolve(&u0, &mesh, &seq, ProblemTag::UEquation, 1.5, &EvolveOptions::default())
            .unwrap()
            .trajectory;
        let report = extract_profile(&traj, 1.0).unwrap();
        assert!(report.cauchy_ok, "pullback gaps not settling");
        let mid = report.cauchy_norms[report.cauchy_norms.len() / 2];
        let early = report.cauchy_norms[1];
        assert!(mid < early, "no decay: early={early} mid={mid}");
    }

    #[test]
    fn h11_pullback_linear_flow_exact() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let u0 = Field::gaussian(g, 0.2, 1.0);
        let mesh = TimeMesh::uniform(0.0, 5.0, 20).unwrap();
        let traj = evolve(
            &u0,
            &mesh,
            &CoefficientSeq::zero(4.0).unwrap(),
            ProblemTag::UEquation,
            1.5,
            &EvolveOptions::default(),
        )
        .unwrap()
        .trajectory;
        let report = h11_pullback_report(&traj).unwrap();
        for gap in &report.cauchy_norms {
            assert!(*gap <= 1e-11, "gap={gap}");
        }
    }

    #[test]
    fn momentum_combination_identity() {
        let g = Grid::new(1, 1024, 24.0).unwrap();
        for seed in [3u64, 4, 5] {
            let f = random_smooth_field(&g, seed, 1.5);
            let (resid, bound) = momentum_combination_check(&f).unwrap();
            assert!(resid <= 1e-12, "residual {resid}");
            assert!(bound);
        }
    }
}
