//! The resolvent-based reformulation of the transformed integral equation:
//! the n-th Duhamel integral, its five boundary/integral terms obtained by
//! integrating by parts through the resolvent, the fixed-point map over
//! trajectories on `(0, 1]`, trajectory norms, contraction measurement and
//! Picard iteration.
//!
//! Every resolvent application goes through the direct dense solve; the
//! factorized route stays available for cross-check sampling.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::evolution::{ProblemTag, TimeMesh, TrajectoryField};
use crate::grid::{random_smooth_field, Field, Grid};
use crate::nonlinearity::CoefficientSeq;
use crate::opnorm::LinearOp;
use crate::oscillator::{
    chirp_propagator, hamiltonian_op, hamiltonian_time_derivative_op, OscillatorSpace,
    ResolventDirect, ResolventFactorized, ResolventKind, ResolventSpec,
};
use crate::spectral::{
    apply_bracket_p, apply_p_squared, free_propagate, lr_norm, AdmissiblePairs,
};

/// Discrete trajectory norms: `x_value` is the sup-node `H^1` norm plus the
/// weighted `L^{q0}` time norm of `H^1_{r0}`; `y_value` is the `L^{q1}` time
/// norm of the `H^{-1}_{r1}` norm of the mesh time derivative.
#[derive(Clone, Copy, Debug)]
pub struct XYNorms {
    pub pairs: AdmissiblePairs,
    pub x_value: f64,
    pub y_value: f64,
}

/// Shared context for the fixed-point machinery on one mesh/grid/sequence.
pub struct PicardWorkspace {
    pub grid: Arc<Grid>,
    pub mesh: TimeMesh,
    pub seq: CoefficientSeq,
    pub alpha0: f64,
    pub pairs: AdmissiblePairs,
    pub n_max: i64,
    space: OscillatorSpace,
}

impl PicardWorkspace {
    pub fn new(
        grid: Arc<Grid>,
        mesh: TimeMesh,
        seq: CoefficientSeq,
        alpha0: f64,
    ) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(LabError::UnsupportedDimension(grid.dim()));
        }
        if (mesh.nodes[0] - 1.0).abs() > 1e-12 || mesh.nodes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::InvalidParameter(
                "fixed-point mesh must descend from t = 1".into(),
            ));
        }
        let pairs = AdmissiblePairs::for_dim(1, alpha0)?;
        let n_max = seq.truncation_index(1e-8);
        // largest Hermite truncation the box supports, capped at n/4
        let l = grid.half_width();
        let k_box = (((l - 3.0) * (l - 3.0) - 1.0) / 2.0).floor() as usize;
        let k = k_box.min(grid.n_per_dim() / 4).max(8);
        let space = OscillatorSpace::new(grid.clone(), k)?;
        Ok(Self {
            grid,
            mesh,
            seq,
            alpha0,
            pairs,
            n_max,
            space,
        })
    }

    pub fn oscillator_space(&self) -> &OscillatorSpace {
        &self.space
    }

    /// Transformed initial data `e^{i |x|^2 / 2} conj(u0)`.
    pub fn transformed_data(u0: &Field) -> Field {
        let phase = u0.grid.weight(|x| {
            let r2: f64 = x.iter().map(|&v| v * v).sum();
            Complex64::from_polar(1.0, r2 / 2.0)
        });
        u0.conj().pointwise(&phase).with_time(1.0)
    }

    /// Free trajectory `U(t - 1) v1` on the mesh (the standard initial guess).
    pub fn linear_trajectory(&self, v1_data: &Field) -> TrajectoryField {
        let snapshots = self
            .mesh
            .nodes
            .iter()
            .map(|&t| free_propagate(v1_data, t - 1.0).with_time(t))
            .collect();
        TrajectoryField {
            mesh: self.mesh.clone(),
            snapshots,
            problem: ProblemTag::VEquation,
        }
    }
}

/// `F_n(w) = |w|^{alpha - n} w^n` applied pointwise.
pub fn pointwise_term(f: &Field, n: i64, alpha: f64) -> Field {
    let mut out = f.clone();
    for w in out.values.iter_mut() {
        let r = w.norm();
        *w = if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let unit = *w / r;
            r.powf(alpha) * unit_power(unit, n)
        };
    }
    out
}

/// Wirtinger derivatives of the single term: `dF_n/dz = (alpha+n)/2 |w|^{alpha-1} w_u^{n-1}`
/// and `dF_n/dzbar = (alpha-n)/2 |w|^{alpha-1} w_u^{n+1}`.
pub fn pointwise_term_wirtinger(f: &Field, n: i64, alpha: f64) -> (Field, Field) {
    let mut dz = f.clone();
    let mut dzb = f.clone();
    let nf = n as f64;
    for (a, b) in dz.values.iter_mut().zip(dzb.values.iter_mut()) {
        let w = *a;
        let r = w.norm();
        if r == 0.0 {
            *a = Complex64::new(0.0, 0.0);
            *b = Complex64::new(0.0, 0.0);
        } else {
            let unit = w / r;
            let ra = r.powf(alpha - 1.0);
            *a = 0.5 * (alpha + nf) * ra * unit_power(unit, n - 1);
            *b = 0.5 * (alpha - nf) * ra * unit_power(unit, n + 1);
        }
    }
    (dz, dzb)
}

fn unit_power(w: Complex64, n: i64) -> Complex64 {
    if n >= 0 {
        w.powi(n as i32)
    } else {
        w.conj().powi((-n) as i32)
    }
}

/// Endpoint weights making the interval rule exact for `s^c * (linear g)`:
/// `int_a^b s^c g(s) ds ~ wa g(a) + wb g(b)` (signed, `b < a` allowed).
fn power_weights(a: f64, b: f64, c: f64) -> (f64, f64) {
    let m0 = (b.powf(c + 1.0) - a.powf(c + 1.0)) / (c + 1.0);
    let m1 = (b.powf(c + 2.0) - a.powf(c + 2.0)) / (c + 2.0);
    let wa = (b * m0 - m1) / (b - a);
    let wb = (m1 - a * m0) / (b - a);
    (wa, wb)
}

/// Running integrals `int_1^{t_k} s^c g(s) ds` over the mesh from samples of `g`.
fn weighted_prefix(nodes: &[f64], samples: &[Field], c: f64) -> Vec<Field> {
    let grid = samples[0].grid.clone();
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = Field::zeros(grid);
    out.push(acc.clone());
    for i in 0..nodes.len() - 1 {
        let (wa, wb) = power_weights(nodes[i], nodes[i + 1], c);
        acc.axpy(Complex64::new(wa, 0.0), &samples[i]);
        acc.axpy(Complex64::new(wb, 0.0), &samples[i + 1]);
        out.push(acc.clone());
    }
    out
}

/// Per-trajectory precomputation shared by all `n`.
pub struct PhiEvaluation<'a> {
    ws: &'a PicardWorkspace,
    v: &'a TrajectoryField,
    p2v: Vec<Field>,
    ftilde: Vec<Field>,
}

impl<'a> PhiEvaluation<'a> {
    pub fn new(ws: &'a PicardWorkspace, v: &'a TrajectoryField) -> Result<Self> {
        if v.mesh.nodes.len() != ws.mesh.nodes.len()
            || v.snapshots.iter().any(|s| *s.grid != *ws.grid)
        {
            return Err(LabError::GridMismatch);
        }
        let p2v = v.snapshots.iter().map(apply_p_squared).collect();
        let alpha = ws.seq.alpha();
        let support = ws.seq.support(ws.n_max);
        let ftilde = ws
            .mesh
            .nodes
            .iter()
            .zip(&v.snapshots)
            .map(|(&t, snap)| {
                let mut acc = Field::zeros(ws.grid.clone());
                for &m in &support {
                    let lm = ws.seq.coeff(m).conj();
                    if lm == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let chirp = crate::oscillator::chirp_weight(&ws.grid, m, t);
                    let fm = pointwise_term(snap, m, alpha).pointwise(&chirp);
                    acc.axpy(lm, &fm);
                }
                acc
            })
            .collect();
        Ok(Self { ws, v, p2v, ftilde })
    }

    /// `I_n(t) = int_1^t s^{alpha0-2} U(t-s) e^{-i(n-1)x^2/2s} F_n(v(s)) ds`
    /// at every node, using `U(t-s) = U(t) U(-s)` to keep the running
    /// integral independent of the outer time.
    pub fn duhamel_integral(&self, n: i64) -> Result<TrajectoryField> {
        let ws = self.ws;
        let alpha = ws.seq.alpha();
        let samples: Vec<Field> = ws
            .mesh
            .nodes
            .iter()
            .zip(&self.v.snapshots)
            .map(|(&s, snap)| {
                let fnv = pointwise_term(snap, n, alpha);
                chirp_propagator(&ws.grid, n, s).map(|vn| vn.apply(&fnv))
            })
            .collect::<Result<_>>()?;
        let prefix = weighted_prefix(&ws.mesh.nodes, &samples, ws.alpha0 - 2.0);
        let snapshots = ws
            .mesh
            .nodes
            .iter()
            .zip(prefix)
            .map(|(&t, p)| free_propagate(&p, t).with_time(t))
            .collect();
        Ok(TrajectoryField {
            mesh: ws.mesh.clone(),
            snapshots,
            problem: ProblemTag::VEquation,
        })
    }

    /// All five partial-integration terms for one `n >= 2`. The boundary-data
    /// term uses `v1_override` when given (the fixed-point map pins it to the
    /// initial data), else the trajectory value at `t = 1`.
    pub fn parts_bundle(&self, n: i64, v1_override: Option<&Field>) -> Result<[TrajectoryField; 5]> {
        let ws = self.ws;
        if n < 2 {
            return Err(LabError::InvalidParameter(format!(
                "partial-integration terms need n >= 2, got {n}"
            )));
        }
        let alpha = ws.seq.alpha();
        let nodes = &ws.mesh.nodes;
        let m = nodes.len();

        // boundary profile at t = 1
        let f_at_one = v1_override.unwrap_or(&self.v.snapshots[0]);
        let spec1 = ResolventSpec::new(n, ws.alpha0, 1.0, ResolventKind::Plain, 1.0)?;
        let r1 = ResolventDirect::new(&ws.grid, spec1)?;
        let c1 = r1.solve(
            &chirp_propagator(&ws.grid, n, 1.0)?.apply(&pointwise_term(f_at_one, n, alpha)),
        )?;

        let mut a2_nodes = Vec::with_capacity(m);
        let mut h3 = Vec::with_capacity(m);
        let mut h4 = Vec::with_capacity(m);
        let mut h5 = Vec::with_capacity(m);
        for (i, (&t, snap)) in nodes.iter().zip(&self.v.snapshots).enumerate() {
            let vn = chirp_propagator(&ws.grid, n, t)?;
            let spec = ResolventSpec::new(n, ws.alpha0, t, ResolventKind::Plain, 1.0)?;
            let r = ResolventDirect::new(&ws.grid, spec)?;
            let fnv = pointwise_term(snap, n, alpha);
            let g2 = r.solve(&vn.apply(&fnv))?;
            a2_nodes.push(g2.clone());
            // resolvent derivative applied to the same chirped term:
            // dR/ds (V F) = -R (iH + i s H') R (V F) = -R (iH + i s H') g2
            let mid = {
                let mut acc = hamiltonian_op(&ws.grid, n, t)
                    .apply(&g2)
                    .scale(Complex64::new(0.0, 1.0));
                acc.axpy(
                    Complex64::new(0.0, t),
                    &hamiltonian_time_derivative_op(&ws.grid, n, t).apply(&g2),
                );
                acc
            };
            h3.push(r.solve(&mid)?.scale(Complex64::new(-1.0, 0.0)));
            // kinetic commutator integrand
            let (dz, dzb) = pointwise_term_wirtinger(snap, n, alpha);
            let mut w4 = Field::zeros(ws.grid.clone());
            for ((o, z), (p2, zb)) in w4
                .values
                .iter_mut()
                .zip(&dz.values)
                .zip(self.p2v[i].values.iter().zip(&dzb.values))
            {
                *o = z * p2 - zb * p2.conj();
            }
            h4.push(r.solve(&vn.apply(&w4))?);
            // self-interaction integrand
            let mut w5 = Field::zeros(ws.grid.clone());
            for ((o, z), (ft, zb)) in w5
                .values
                .iter_mut()
                .zip(&dz.values)
                .zip(self.ftilde[i].values.iter().zip(&dzb.values))
            {
                *o = z * ft - zb * ft.conj();
            }
            h5.push(r.solve(&vn.apply(&w5))?);
        }

        let p3 = weighted_prefix(nodes, &h3, ws.alpha0 - 1.0);
        let p4 = weighted_prefix(nodes, &h4, ws.alpha0 - 1.0);
        let p5 = weighted_prefix(nodes, &h5, 2.0 * ws.alpha0 - 3.0);

        let mut a = [(); 5].map(|_| Vec::with_capacity(m));
        for (i, &t) in nodes.iter().enumerate() {
            a[0].push(
                free_propagate(&c1, t)
                    .scale(Complex64::new(-1.0, 0.0))
                    .with_time(t),
            );
            a[1].push(
                free_propagate(&a2_nodes[i], t)
                    .scale(Complex64::new(t.powf(ws.alpha0 - 1.0), 0.0))
                    .with_time(t),
            );
            a[2].push(
                free_propagate(&p3[i], t)
                    .scale(Complex64::new(-1.0, 0.0))
                    .with_time(t),
            );
            a[3].push(
                free_propagate(&p4[i], t)
                    .scale(Complex64::new(0.0, 0.5))
                    .with_time(t),
            );
            a[4].push(
                free_propagate(&p5[i], t)
                    .scale(Complex64::new(0.0, 1.0))
                    .with_time(t),
            );
        }
        Ok(a.map(|snapshots| TrajectoryField {
            mesh: ws.mesh.clone(),
            snapshots,
            problem: ProblemTag::VEquation,
        }))
    }
}

/// Relative `L^2` gap between the Duhamel integral and the sum of its five
/// partial-integration terms, at the nodes closest to the requested times.
pub fn duhamel_parts_identity_gap(
    ws: &PicardWorkspace,
    v: &TrajectoryField,
    n: i64,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let eval = PhiEvaluation::new(ws, v)?;
    let duhamel = eval.duhamel_integral(n)?;
    let parts = eval.parts_bundle(n, None)?;
    let mut out = Vec::new();
    for &t in times {
        let i = nearest_node(&ws.mesh.nodes, t);
        let mut sum = Field::zeros(ws.grid.clone());
        for term in &parts {
            sum = sum.add(&term.snapshots[i]);
        }
        let denom = duhamel.snapshots[i].norm_l2().max(1e-300);
        out.push((
            ws.mesh.nodes[i],
            duhamel.snapshots[i].sub(&sum).norm_l2() / denom,
        ));
    }
    Ok(out)
}

fn nearest_node(nodes: &[f64], t: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, &node) in nodes.iter().enumerate() {
        if (node - t).abs() < dist {
            dist = (node - t).abs();
            best = i;
        }
    }
    best
}

/// One application of the fixed-point map.
pub fn apply_phi(
    ws: &PicardWorkspace,
    v: &TrajectoryField,
    v1_data: &Field,
) -> Result<TrajectoryField> {
    let eval = PhiEvaluation::new(ws, v)?;
    let minus_i = Complex64::new(0.0, -1.0);
    // linear part
    let mut snapshots: Vec<Field> = ws
        .mesh
        .nodes
        .iter()
        .map(|&t| free_propagate(v1_data, t - 1.0).with_time(t))
        .collect();
    // gauge part through the plain Duhamel integral
    let l1 = ws.seq.coeff(1);
    if l1 != Complex64::new(0.0, 0.0) {
        let i1 = eval.duhamel_integral(1)?;
        for (s, term) in snapshots.iter_mut().zip(&i1.snapshots) {
            s.axpy(minus_i * l1.conj(), term);
        }
    }
    // non-gauge terms in ascending n for a deterministic reduction
    for &n in ws.seq.support(ws.n_max).iter().filter(|&&n| n >= 2) {
        let ln = ws.seq.coeff(n);
        if ln == Complex64::new(0.0, 0.0) {
            continue;
        }
        let parts = eval.parts_bundle(n, Some(v1_data))?;
        for term in &parts {
            for (s, p) in snapshots.iter_mut().zip(&term.snapshots) {
                s.axpy(minus_i * ln.conj(), p);
            }
        }
    }
    Ok(TrajectoryField {
        mesh: ws.mesh.clone(),
        snapshots,
        problem: ProblemTag::VEquation,
    })
}

/// Discrete X norm: node sup of `H^1` plus the weighted `L^{q0}` norm of
/// `H^1_{r0}` over the mesh.
pub fn x_norm(traj: &TrajectoryField, pairs: &AdmissiblePairs) -> Result<f64> {
    let mut sup = 0.0f64;
    let mut acc = 0.0f64;
    for (snap, w) in traj.snapshots.iter().zip(&traj.mesh.weights) {
        let h1 = apply_bracket_p(snap, 1.0).norm_l2();
        sup = sup.max(h1);
        let h1r = lr_norm(&apply_bracket_p(snap, 1.0), pairs.r0)?;
        acc += w * h1r.powf(pairs.q0);
    }
    Ok(sup + acc.powf(1.0 / pairs.q0))
}

/// Mesh time derivative: three-point nonuniform centered differences,
/// one-sided at the ends.
pub fn time_derivative(traj: &TrajectoryField) -> Vec<Field> {
    let nodes = &traj.mesh.nodes;
    let m = nodes.len();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let d = if i == 0 {
            let h = nodes[1] - nodes[0];
            traj.snapshots[1]
                .sub(&traj.snapshots[0])
                .scale(Complex64::new(1.0 / h, 0.0))
        } else if i == m - 1 {
            let h = nodes[m - 1] - nodes[m - 2];
            traj.snapshots[m - 1]
                .sub(&traj.snapshots[m - 2])
                .scale(Complex64::new(1.0 / h, 0.0))
        } else {
            let hm = nodes[i] - nodes[i - 1];
            let hp = nodes[i + 1] - nodes[i];
            let mut acc = traj.snapshots[i - 1]
                .scale(Complex64::new(-hp / (hm * (hm + hp)), 0.0));
            acc.axpy(
                Complex64::new((hp - hm) / (hm * hp), 0.0),
                &traj.snapshots[i],
            );
            acc.axpy(
                Complex64::new(hm / (hp * (hm + hp)), 0.0),
                &traj.snapshots[i + 1],
            );
            acc
        };
        out.push(d);
    }
    out
}

/// Discrete Y norm: `L^{q1}` in time of the `H^{-1}_{r1}` norms of the mesh
/// time derivative (`q1 = 1`).
pub fn y_norm(traj: &TrajectoryField, pairs: &AdmissiblePairs) -> Result<f64> {
    let dv = time_derivative(traj);
    let mut acc = 0.0;
    for (d, w) in dv.iter().zip(&traj.mesh.weights) {
        acc += w * lr_norm(&apply_bracket_p(d, -1.0), pairs.r1)?;
    }
    Ok(acc)
}

pub fn xy_norms(traj: &TrajectoryField, pairs: &AdmissiblePairs) -> Result<XYNorms> {
    Ok(XYNorms {
        pairs: *pairs,
        x_value: x_norm(traj, pairs)?,
        y_value: y_norm(traj, pairs)?,
    })
}

/// Discrete residual of the transformed equation in the Y norm:
/// `i dv/dt - p^2 v / 2 - t^{alpha0-2} F~(t, v)`.
pub fn error_functional(ws: &PicardWorkspace, v: &TrajectoryField) -> Result<f64> {
    let eval = PhiEvaluation::new(ws, v)?;
    let dv = time_derivative(v);
    let mut acc = 0.0;
    for (i, (&t, w)) in ws.mesh.nodes.iter().zip(&ws.mesh.weights).enumerate() {
        let mut e = dv[i].scale(Complex64::new(0.0, 1.0));
        e.axpy(Complex64::new(-0.5, 0.0), &apply_p_squared(&v.snapshots[i]));
        e.axpy(Complex64::new(-t.powf(ws.alpha0 - 2.0), 0.0), &eval.ftilde[i]);
        acc += w * lr_norm(&apply_bracket_p(&e, -1.0), ws.pairs.r1)?;
    }
    Ok(acc)
}

/// `||Phi(v1) - Phi(v2)||_X / ||v1 - v2||_X`.
pub fn contraction_ratio(
    ws: &PicardWorkspace,
    v1: &TrajectoryField,
    v2: &TrajectoryField,
    v1_data: &Field,
) -> Result<f64> {
    let diff = trajectory_sub(v1, v2);
    let denom = x_norm(&diff, &ws.pairs)?;
    if denom < 1e-14 {
        return Err(LabError::InvalidParameter(
            "contraction ratio needs distinct trajectories".into(),
        ));
    }
    let p1 = apply_phi(ws, v1, v1_data)?;
    let p2 = apply_phi(ws, v2, v1_data)?;
    Ok(x_norm(&trajectory_sub(&p1, &p2), &ws.pairs)? / denom)
}

pub fn trajectory_sub(a: &TrajectoryField, b: &TrajectoryField) -> TrajectoryField {
    TrajectoryField {
        mesh: a.mesh.clone(),
        snapshots: a
            .snapshots
            .iter()
            .zip(&b.snapshots)
            .map(|(x, y)| x.sub(y))
            .collect(),
        problem: a.problem,
    }
}

pub fn trajectory_add(a: &TrajectoryField, b: &TrajectoryField) -> TrajectoryField {
    TrajectoryField {
        mesh: a.mesh.clone(),
        snapshots: a
            .snapshots
            .iter()
            .zip(&b.snapshots)
            .map(|(x, y)| x.add(y))
            .collect(),
        problem: a.problem,
    }
}

pub fn trajectory_scale(a: &TrajectoryField, c: Complex64) -> TrajectoryField {
    TrajectoryField {
        mesh: a.mesh.clone(),
        snapshots: a.snapshots.iter().map(|s| s.scale(c)).collect(),
        problem: a.problem,
    }
}

/// One step of the fixed-point iteration: the X-norm increment and the
/// discrete equation residual of the new iterate.
#[derive(Clone, Copy, Debug)]
pub struct PicardStep {
    pub increment_x: f64,
    pub residual_y: f64,
}

/// Iterate `v <- Phi(v)` until the X-norm increment drops below `tol`.
/// Returns the fixed point and the per-iteration history.
pub fn picard_iterate(
    ws: &PicardWorkspace,
    v0: &TrajectoryField,
    v1_data: &Field,
    max_iter: usize,
    tol: f64,
) -> Result<(TrajectoryField, Vec<PicardStep>)> {
    let mut cur = v0.clone();
    let mut history: Vec<PicardStep> = Vec::new();
    let mut slow_streak = 0usize;
    for _ in 0..max_iter {
        let next = apply_phi(ws, &cur, v1_data)?;
        let inc = x_norm(&trajectory_sub(&next, &cur), &ws.pairs)?;
        if let Some(prev) = history.last() {
            if inc > 0.9 * prev.increment_x && inc > tol {
                slow_streak += 1;
                if slow_streak >= 3 {
                    return Err(LabError::NotContracting {
                        ratio: inc / prev.increment_x,
                        count: history.len() + 1,
                    });
                }
            } else {
                slow_streak = 0;
            }
        }
        history.push(PicardStep {
            increment_x: inc,
            residual_y: error_functional(ws, &next)?,
        });
        cur = next;
        if inc <= tol {
            return Ok((cur, history));
        }
    }
    Err(LabError::NotContracting {
        ratio: history
            .last()
            .map(|s| s.increment_x)
            .unwrap_or(f64::INFINITY),
        count: max_iter,
    })
}

/// A smooth random trajectory with `||.||_X + ||.||_Y` close to `amplitude`,
/// vanishing at `t = 1` so the data term stays pinned.
pub fn random_ball_perturbation(
    ws: &PicardWorkspace,
    seed: u64,
    amplitude: f64,
) -> Result<TrajectoryField> {
    let modes = 3usize;
    let profiles: Vec<Field> = (0..modes)
        .map(|k| random_smooth_field(&ws.grid, seed.wrapping_mul(97).wrapping_add(k as u64), 2.0))
        .collect();
    let snapshots: Vec<Field> = ws
        .mesh
        .nodes
        .iter()
        .map(|&t| {
            let mut acc = Field::zeros(ws.grid.clone());
            for (k, phi) in profiles.iter().enumerate() {
                // polynomial profiles vanishing at t = 1, smooth down to 0
                let p = (1.0 - t).powi(k as i32 + 1);
                acc.axpy(Complex64::new(p, 0.0), phi);
            }
            acc.with_time(t)
        })
        .collect();
    let mut traj = TrajectoryField {
        mesh: ws.mesh.clone(),
        snapshots,
        problem: ProblemTag::VEquation,
    };
    let norms = xy_norms(&traj, &ws.pairs)?;
    let scale = amplitude / (norms.x_value + norms.y_value).max(1e-300);
    for s in traj.snapshots.iter_mut() {
        *s = s.scale(Complex64::new(scale, 0.0));
    }
    Ok(traj)
}

/// Sample the factorized route against the direct solves used by the map, on
/// the chirped term at a few nodes; returns the worst relative gap.
pub fn factorized_crosscheck(
    ws: &PicardWorkspace,
    v: &TrajectoryField,
    n: i64,
    node_stride: usize,
) -> Result<f64> {
    let alpha = ws.seq.alpha();
    let mut worst = 0.0f64;
    for (i, (&t, snap)) in ws
        .mesh
        .nodes
        .iter()
        .zip(&v.snapshots)
        .enumerate()
        .step_by(node_stride.max(1))
    {
        let _ = i;
        let spec = ResolventSpec::new(n, ws.alpha0, t, ResolventKind::Plain, 1.0)?;
        if !(0.125..=8.0).contains(&spec.beta()) {
            continue;
        }
        let rhs = chirp_propagator(&ws.grid, n, t)?.apply(&pointwise_term(snap, n, alpha));
        let direct = ResolventDirect::new(&ws.grid, spec)?.solve(&rhs)?;
        let fact = ResolventFactorized::new(&ws.space, spec)?.apply(&rhs);
        let denom = direct.norm_l2().max(1e-300);
        worst = worst.max(direct.sub(&fact).norm_l2() / denom);
    }
    Ok(worst)
}
