//! Split-step time integration: the original equation on `[0, T]` and its
//! pseudo-conformally transformed version on `(0, 1]`, with conservation and
//! mass-growth diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Field;
use crate::nonlinearity::CoefficientSeq;
use crate::spectral::{dealias, free_propagate, j_norm, norm, NormSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshKind {
    Uniform { dt: f64 },
    Geometric { ratio: f64, t_min: f64 },
}

/// Strictly monotone time nodes with trapezoid quadrature weights.
#[derive(Clone, Debug)]
pub struct TimeMesh {
    pub nodes: Vec<f64>,
    pub kind: MeshKind,
    pub weights: Vec<f64>,
}

impl TimeMesh {
    pub fn uniform(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || t_start == t_end {
            return Err(LabError::InvalidParameter("empty time mesh".into()));
        }
        let dt = (t_end - t_start) / steps as f64;
        let nodes: Vec<f64> = (0..=steps).map(|i| t_start + dt * i as f64).collect();
        let weights = trapezoid_weights(&nodes);
        Ok(Self {
            nodes,
            kind: MeshKind::Uniform { dt },
            weights,
        })
    }

    /// Nodes `1, ratio, ratio^2, ...` down to (and including) `t_min`.
    pub fn geometric_down(ratio: f64, t_min: f64) -> Result<Self> {
        if !(0.0 < ratio && ratio < 1.0) || !(0.0 < t_min && t_min < 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "geometric mesh needs 0 < ratio < 1 and 0 < t_min < 1, got {ratio}, {t_min}"
            )));
        }
        let mut nodes = vec![1.0];
        loop {
            let next = nodes.last().unwrap() * ratio;
            if next <= t_min * (1.0 + 1e-12) {
                nodes.push(t_min);
                break;
            }
            nodes.push(next);
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self {
            nodes,
            kind: MeshKind::Geometric { ratio, t_min },
            weights,
        })
    }

    /// Insert `factor - 1` geometric intermediate nodes in every interval.
    pub fn refined(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let mut nodes = Vec::with_capacity(self.nodes.len() * factor);
        for w in self.nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            nodes.push(a);
            if a > 0.0 && b > 0.0 {
                let r = (b / a).powf(1.0 / factor as f64);
                for j in 1..factor {
                    nodes.push(a * r.powi(j as i32));
                }
            } else {
                for j in 1..factor {
                    nodes.push(a + (b - a) * j as f64 / factor as f64);
                }
            }
        }
        nodes.push(*self.nodes.last().unwrap());
        let weights = trapezoid_weights(&nodes);
        Self {
            nodes,
            kind: self.kind,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn span(&self) -> f64 {
        (self.nodes.last().unwrap() - self.nodes.first().unwrap()).abs()
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = (nodes[i + 1] - nodes[i]).abs();
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemTag {
    UEquation,
    VEquation,
}

/// A field snapshot per mesh node.
#[derive(Clone, Debug)]
pub struct TrajectoryField {
    pub mesh: TimeMesh,
    pub snapshots: Vec<Field>,
    pub problem: ProblemTag,
}

impl TrajectoryField {
    /// Snapshot at the node closest to `t` (nodes are the only values held).
    pub fn at(&self, t: f64) -> &Field {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &node) in self.mesh.nodes.iter().enumerate() {
            if (node - t).abs() < dist {
                dist = (node - t).abs();
                best = i;
            }
        }
        &self.snapshots[best]
    }
}

#[derive(Clone, Debug)]
pub struct BlowupEvent {
    pub t_last: f64,
    pub reason: String,
}

#[derive(Debug)]
pub struct EvolveOutcome {
    pub trajectory: TrajectoryField,
    /// Set when the run stopped early; the trajectory holds the nodes
    /// reached up to that point.
    pub blowup: Option<BlowupEvent>,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    /// Uniform substeps inside each mesh interval.
    pub substeps: usize,
    pub dealias: bool,
    /// Stop when the sup norm grows by this factor over the initial one.
    pub blowup_factor: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            substeps: 1,
            dealias: true,
            blowup_factor: 1e6,
        }
    }
}

/// Fourth-order substeps for the pointwise ODE `i w_t = G(w)`; `omega` is a
/// bound on the local rotation rate `|G'|`, and the interval splits so each
/// step stays well inside the accuracy budget.
fn nonlinear_substep<G: Fn(Complex64, usize) -> Complex64>(
    f: &mut Field,
    dt: f64,
    g: &G,
    omega: f64,
) {
    let amp = f.norm_sup();
    if amp == 0.0 || dt == 0.0 {
        return;
    }
    let m = ((dt.abs() * omega / 0.04).ceil() as usize).max(1);
    let h = dt / m as f64;
    let minus_i_h = Complex64::new(0.0, -h);
    for _ in 0..m {
        for (i, w) in f.values.iter_mut().enumerate() {
            let k1 = minus_i_h * g(*w, i);
            let k2 = minus_i_h * g(*w + 0.5 * k1, i);
            let k3 = minus_i_h * g(*w + 0.5 * k2, i);
            let k4 = minus_i_h * g(*w + k3, i);
            *w += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
    }
}

/// Rough scale of `|F'|` per unit `|u|^{alpha-1}`, used to pick substep counts.
fn derivative_rate_scale(seq: &CoefficientSeq) -> f64 {
    let alpha = seq.alpha();
    let n_max = seq.truncation_index(1e-10);
    seq.support(n_max)
        .iter()
        .map(|&n| seq.coeff(n).norm() * (alpha + n.abs() as f64))
        .sum::<f64>()
        .max(1e-300)
}

/// One Strang step of `i u_t = p^2 u / 2 + F(u)`.
pub fn step_u(f: &Field, dt: f64, seq: &CoefficientSeq, use_dealias: bool) -> Result<Field> {
    let mut cur = free_propagate(f, dt / 2.0);
    let g = |w: Complex64, _i: usize| seq.eval_f(w);
    let amp = cur.norm_sup().max(1e-300);
    let omega = derivative_rate_scale(seq) * amp.powf(seq.alpha() - 1.0);
    nonlinear_substep(&mut cur, dt, &g, omega);
    if use_dealias {
        cur = dealias(&cur);
    }
    let mut out = free_propagate(&cur, dt / 2.0);
    if !out.is_finite() {
        return Err(LabError::NonFinite("split step".into()));
    }
    out.time_tag = f.time_tag.map(|t| t + dt);
    Ok(out)
}

/// One Strang step of the transformed equation
/// `i v_t = p^2 v / 2 + t^{alpha0-2} \sum_n conj(lambda_n) e^{-i(n-1)x^2/2t} F_n(v)`,
/// integrating the singular coefficient exactly within the substep and
/// freezing the chirp phases at the interval midpoint.
pub fn step_v(
    f: &Field,
    t_from: f64,
    t_to: f64,
    seq: &CoefficientSeq,
    alpha0: f64,
    use_dealias: bool,
) -> Result<Field> {
    if t_from <= 0.0 || t_to <= 0.0 {
        return Err(LabError::InvalidParameter(
            "transformed evolution needs positive times".into(),
        ));
    }
    let dt = t_to - t_from;
    let mut cur = free_propagate(f, dt / 2.0);
    // exact integral of s^{alpha0-2} across the substep
    let a1 = alpha0 - 1.0;
    let dtau = (t_to.powf(a1) - t_from.powf(a1)) / a1;
    let t_mid = 0.5 * (t_from + t_to);
    let n_max = seq.truncation_index(1e-10);
    let support = seq.support(n_max);
    let terms: Vec<(i64, Complex64)> = support
        .iter()
        .map(|&n| (n, seq.coeff(n).conj()))
        .collect();
    let grid = cur.grid.clone();
    let alpha = seq.alpha();
    let phases: Vec<(i64, Vec<Complex64>)> = terms
        .iter()
        .map(|&(n, _)| {
            let c = (n as f64 - 1.0) / (2.0 * t_mid);
            let w = grid.weight(|x| {
                let r2: f64 = x.iter().map(|&v| v * v).sum();
                Complex64::from_polar(1.0, -c * r2)
            });
            (n, w)
        })
        .collect();
    let g = |w: Complex64, i: usize| {
        let r = w.norm();
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let unit = w / r;
        let ra = r.powf(alpha);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&(n, l), (_, phase)) in terms.iter().zip(&phases) {
            let mut p = if n >= 0 {
                unit.powi(n as i32)
            } else {
                unit.conj().powi((-n) as i32)
            };
            p *= phase[i];
            acc += l * ra * p;
        }
        acc
    };
    let amp = cur.norm_sup().max(1e-300);
    let omega = derivative_rate_scale(seq) * amp.powf(alpha - 1.0);
    nonlinear_substep(&mut cur, dtau, &g, omega);
    if use_dealias {
        cur = dealias(&cur);
    }
    let mut out = free_propagate(&cur, dt / 2.0);
    if !out.is_finite() {
        return Err(LabError::NonFinite("split step".into()));
    }
    out.time_tag = Some(t_to);
    Ok(out)
}

/// `2 Im \int conj(f) F(f) dx`: the instantaneous rate of mass change.
pub fn mass_derivative(f: &Field, seq: &CoefficientSeq) -> f64 {
    let mut acc = 0.0;
    for v in &f.values {
        acc += (v.conj() * seq.eval_f(*v)).im;
    }
    2.0 * acc * f.grid.cell_volume()
}

/// March the initial field across the mesh, recording a snapshot per node.
pub fn evolve(
    data: &Field,
    mesh: &TimeMesh,
    seq: &CoefficientSeq,
    tag: ProblemTag,
    alpha0: f64,
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    if mesh.nodes.len() < 2 {
        return Err(LabError::InvalidParameter("mesh needs at least two nodes".into()));
    }
    let sup0 = data.norm_sup().max(1e-300);
    let mut cur = data.clone().with_time(mesh.nodes[0]);
    let mut snapshots = vec![cur.clone()];
    for w in mesh.nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut inner = cur.clone();
        let m = opts.substeps.max(1);
        for j in 0..m {
            let ta = a + (b - a) * j as f64 / m as f64;
            let tb = a + (b - a) * (j + 1) as f64 / m as f64;
            let stepped = match tag {
                ProblemTag::UEquation => step_u(&inner, tb - ta, seq, opts.dealias),
                ProblemTag::VEquation => step_v(&inner, ta, tb, seq, alpha0, opts.dealias),
            };
            match stepped {
                Ok(next) => inner = next,
                Err(e) => {
                    return Ok(EvolveOutcome {
                        trajectory: TrajectoryField {
                            mesh: TimeMesh {
                                nodes: mesh.nodes[..snapshots.len()].to_vec(),
                                kind: mesh.kind,
                                weights: trapezoid_weights(&mesh.nodes[..snapshots.len()]),
                            },
                            snapshots,
                            problem: tag,
                        },
                        blowup: Some(BlowupEvent {
                            t_last: ta,
                            reason: e.to_string(),
                        }),
                    });
                }
            }
        }
        if !inner.is_finite() || inner.norm_sup() > opts.blowup_factor * sup0 {
            return Ok(EvolveOutcome {
                trajectory: TrajectoryField {
                    mesh: TimeMesh {
                        nodes: mesh.nodes[..snapshots.len()].to_vec(),
                        kind: mesh.kind,
                        weights: trapezoid_weights(&mesh.nodes[..snapshots.len()]),
                    },
                    snapshots,
                    problem: tag,
                },
                blowup: Some(BlowupEvent {
                    t_last: a,
                    reason: "sup-norm growth beyond the blow-up threshold".into(),
                }),
            });
        }
        cur = inner.with_time(b);
        snapshots.push(cur.clone());
    }
    Ok(EvolveOutcome {
        trajectory: TrajectoryField {
            mesh: mesh.clone(),
            snapshots,
            problem: tag,
        },
        blowup: None,
    })
}

/// Per-node diagnostics for a trajectory of the original equation.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub h1: f64,
    pub h01_pullback: f64,
    pub j_norm: f64,
    pub boundary_leak: f64,
}

pub fn trajectory_diagnostics(traj: &TrajectoryField, t0: f64) -> Result<Vec<DiagnosticsRow>> {
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    for (node, snap) in traj.mesh.nodes.iter().zip(&traj.snapshots) {
        let pullback = free_propagate(snap, -(node + t0));
        rows.push(DiagnosticsRow {
            t: *node,
            mass: snap.norm_l2(),
            h1: norm(snap, NormSpec::H1)?,
            h01_pullback: norm(&pullback, NormSpec::Hab(0.0, 1.0))?,
            j_norm: j_norm(snap, node + t0),
            boundary_leak: snap.boundary_leak(),
        });
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryManifest {
    problem: ProblemTag,
    kind: MeshKind,
    nodes: Vec<f64>,
    snapshots: Vec<String>,
}

/// Write a trajectory as a JSON manifest plus one binary field per node
/// under `dir` (stems `snap_00000`, ...).
pub fn save_trajectory(traj: &TrajectoryField, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut stems = Vec::with_capacity(traj.snapshots.len());
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let stem = format!("snap_{i:05}");
        crate::grid::save_field(snap, &dir.join(&stem))?;
        stems.push(stem);
    }
    let manifest = TrajectoryManifest {
        problem: traj.problem,
        kind: traj.mesh.kind,
        nodes: traj.mesh.nodes.clone(),
        snapshots: stems,
    };
    std::fs::write(
        dir.join("trajectory.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_trajectory(dir: &std::path::Path) -> Result<TrajectoryField> {
    let manifest: TrajectoryManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("trajectory.json"))?)?;
    let snapshots: Vec<Field> = manifest
        .snapshots
        .iter()
        .map(|stem| crate::grid::load_field(&dir.join(stem)))
        .collect::<Result<_>>()?;
    let weights = trapezoid_weights(&manifest.nodes);
    Ok(TrajectoryField {
        mesh: TimeMesh {
            nodes: manifest.nodes,
            kind: manifest.kind,
            weights,
        },
        snapshots,
        problem: manifest.problem,
    })
}
