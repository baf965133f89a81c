//! Subcommand implementations: each consumes the shared config, runs its
//! experiment deterministically, and writes `summary.json`, `records.csv`
//! and any subcommand-specific artifacts under the output directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;

use nls_core::evolution::{
    evolve, trajectory_diagnostics, EvolveOptions, ProblemTag, TimeMesh,
};
use nls_core::grid::{save_field, Field, Grid};
use nls_core::nonlinearity::coefficients_from_phase;
use nls_core::oscillator::{
    composite_bound_rows, derivative_bound_rows, growth_per_decade, resolvent_norm_scaling,
    OscComposite, OscillatorSpace, ScalingRow, TimeComposite,
};
use nls_core::picard::{
    contraction_ratio, error_functional, picard_iterate, random_ball_perturbation,
    trajectory_add, trajectory_scale, xy_norms, PicardWorkspace,
};
use nls_core::report::{config_hash, ReportRecord, Summary};
use nls_core::scattering::{extract_profile, norm_identity_check};
use nls_core::spectral::{conjugation_identity_check, ConjugationIdentity};

use crate::config::ExperimentConfig;

pub struct RunContext {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub hash: String,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, out_dir: &Path, workers: usize) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir.join("fields"))?;
        let hash = config_hash(&config.canonical());
        Ok(Self {
            config,
            out_dir: out_dir.to_path_buf(),
            workers: workers.max(1),
            hash,
        })
    }

    fn record(&self, metric: &str, value: f64, tol: f64, pass: bool) -> ReportRecord {
        ReportRecord::new(&self.config.id, &self.hash, metric, value, tol, pass)
    }

    fn bounded(&self, metric: &str, value: f64, tol: f64) -> ReportRecord {
        self.record(metric, value, tol, value <= tol)
    }

    pub fn finish(&self, records: Vec<ReportRecord>) -> anyhow::Result<bool> {
        let summary = Summary::new(&self.config.id, &self.hash, records.clone());
        summary.write_json(&self.out_dir.join("summary.json"))?;
        nls_core::report::write_records_csv(&self.out_dir.join("records.csv"), &records)?;
        Ok(summary.pass)
    }

    fn grid(&self) -> anyhow::Result<std::sync::Arc<Grid>> {
        Ok(Grid::new(
            self.config.grid.dim,
            self.config.grid.n_per_dim,
            self.config.grid.half_width,
        )?)
    }

    fn mesh(&self) -> anyhow::Result<TimeMesh> {
        let t = &self.config.time;
        Ok(match t.kind.as_str() {
            "geometric" => TimeMesh::geometric_down(t.ratio, t.t_min)?,
            _ => TimeMesh::uniform(t.t_start, t.t_end, t.steps)?,
        })
    }

    fn data(&self, grid: &std::sync::Arc<Grid>) -> Field {
        Field::gaussian(grid.clone(), self.config.run.epsilon, self.config.run.sigma)
    }
}

pub fn run_coeffs(ctx: &RunContext) -> anyhow::Result<Vec<ReportRecord>> {
    let seq = ctx.config.sequence()?;
    let report = seq.check_assumptions();
    let n_show = ctx.config.run.n_show;
    let mut csv = String::from("n,re,im,abs\n");
    for n in -n_show..=n_show {
        let l = seq.coeff(n);
        csv.push_str(&format!("{},{},{},{}\n", n, l.re, l.im, l.norm()));
    }
    std::fs::write(ctx.out_dir.join("coeffs.csv"), csv)?;

    // quadrature round trip on the truncated sequence
    let truncated = seq.truncated(n_show);
    let recovered = coefficients_from_phase(
        |t| truncated.eval_f(Complex64::from_polar(1.0, t)),
        seq.alpha(),
        n_show,
        (8 * n_show).max(64) as usize,
    )?;
    let mut round_trip = 0.0f64;
    for n in -n_show..=n_show {
        round_trip = round_trip.max((truncated.coeff(n) - recovered.coeff(n)).norm());
    }

    let mut records = vec![
        ctx.record(
            "a1_weighted_sum",
            report.a1_sum.unwrap_or(f64::INFINITY),
            f64::INFINITY,
            report.a1_pass,
        ),
        ctx.record(
            "a2_support",
            if report.a2_pass { 1.0 } else { 0.0 },
            1.0,
            report.a2_pass,
        ),
        ctx.bounded("coefficient_round_trip", round_trip, 1e-10),
    ];
    records.push(ctx.record(
        "alpha",
        seq.alpha(),
        f64::INFINITY,
        true,
    ));
    Ok(records)
}

pub fn run_simulate(ctx: &RunContext) -> anyhow::Result<Vec<ReportRecord>> {
    let grid = ctx.grid()?;
    let seq = ctx.config.sequence()?;
    let mesh = ctx.mesh()?;
    let tag = if ctx.config.run.problem == "v" {
        ProblemTag::VEquation
    } else {
        ProblemTag::UEquation
    };
    let data = if tag == ProblemTag::VEquation {
        PicardWorkspace::transformed_data(&ctx.data(&grid))
    } else {
        ctx.data(&grid)
    };
    let out = evolve(
        &data,
        &mesh,
        &seq,
        tag,
        ctx.config.alpha0(),
        &EvolveOptions {
            substeps: ctx.config.time.substeps,
            dealias: ctx.config.run.dealias,
            ..Default::default()
        },
    )?;
    if let Some(event) = &out.blowup {
        anyhow::bail!("numerical failure: {} at t = {}", event.reason, event.t_last);
    }
    let traj = out.trajectory;
    let rows = trajectory_diagnostics(&traj, ctx.config.run.t0)?;
    let mut csv = String::from("t,mass,h1,h01_pullback,j_norm,boundary_leak\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t, r.mass, r.h1, r.h01_pullback, r.j_norm, r.boundary_leak
        ));
    }
    std::fs::write(ctx.out_dir.join("diagnostics.csv"), csv)?;
    save_field(&traj.snapshots[traj.snapshots.len() - 1], &ctx.out_dir.join("fields/final"))?;

    if ctx.config.run.save_trajectory {
        nls_core::evolution::save_trajectory(&traj, &ctx.out_dir.join("fields/trajectory"))?;
    }

    let m0 = traj.snapshots[0].norm_l2().powi(2);
    let drift = traj
        .snapshots
        .iter()
        .map(|s| ((s.norm_l2().powi(2) - m0) / m0.max(1e-300)).abs())
        .fold(0.0, f64::max);
    let leak = traj
        .snapshots
        .iter()
        .map(|s| s.boundary_leak())
        .fold(0.0, f64::max);
    Ok(vec![
        ctx.record("relative_mass_drift", drift, f64::INFINITY, true),
        ctx.bounded("boundary_leak", leak, 1e-4),
    ])
}

pub fn run_scatter(ctx: &RunContext) -> anyhow::Result<Vec<ReportRecord>> {
    let grid = ctx.grid()?;
    let seq = ctx.config.sequence()?;
    let mesh = ctx.mesh()?;
    let data = ctx.data(&grid);
    let out = evolve(
        &data,
        &mesh,
        &seq,
        ProblemTag::UEquation,
        ctx.config.alpha0(),
        &EvolveOptions {
            substeps: ctx.config.time.substeps,
            dealias: ctx.config.run.dealias,
            ..Default::default()
        },
    )?;
    if let Some(event) = &out.blowup {
        anyhow::bail!("numerical failure: {} at t = {}", event.reason, event.t_last);
    }
    let traj = out.trajectory;
    let report = extract_profile(&traj, ctx.config.run.t0)?;
    let mut csv = String::from("t,cauchy_norm,mass,h01_pullback\n");
    let diag = trajectory_diagnostics(&traj, ctx.config.run.t0)?;
    for (i, t) in report.times.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            t, report.cauchy_norms[i], diag[i].mass, diag[i].h01_pullback
        ));
    }
    std::fs::write(ctx.out_dir.join("scatter.csv"), csv)?;
    save_field(&report.profile, &ctx.out_dir.join("fields/profile"))?;
    let report_json = serde_json::json!({
        "config_hash": ctx.hash,
        "times": report.times,
        "cauchy_norms": report.cauchy_norms,
        "rate_fit": report.rate_fit,
        "cauchy_ok": report.cauchy_ok,
    });
    std::fs::write(
        ctx.out_dir.join("scatter.json"),
        serde_json::to_string_pretty(&report_json)?,
    )?;

    let mut records = vec![
        ctx.record(
            "pullback_settled",
            if report.cauchy_ok { 1.0 } else { 0.0 },
            1.0,
            report.cauchy_ok,
        ),
        ctx.record("rate_fit", report.rate_fit, f64::INFINITY, true),
    ];
    let mid_gap = report.cauchy_norms[report.cauchy_norms.len() / 2];
    records.push(ctx.record("half_time_gap", mid_gap, f64::INFINITY, true));
    if grid.dim() == 1 {
        let samples: Vec<f64> = [0.0, 1.0, 3.0]
            .iter()
            .copied()
            .filter(|t| t <= traj.mesh.nodes.last().unwrap())
            .collect();
        let rows = norm_identity_check(&traj, &samples)?;
        let worst = rows
            .iter()
            .map(|r| r.mass_gap.max(r.jnorm_gap))
            .fold(0.0, f64::max);
        records.push(ctx.bounded("transform_identity_gap", worst, 1e-4));
    }
    Ok(records)
}

pub fn run_contraction(ctx: &RunContext) -> anyhow::Result<Vec<ReportRecord>> {
    let grid = ctx.grid()?;
    let seq = ctx.config.sequence()?;
    let t = &ctx.config.time;
    let mesh = TimeMesh::geometric_down(t.ratio, t.t_min)?;
    let ws = PicardWorkspace::new(grid.clone(), mesh, seq, ctx.config.alpha0())?;
    let u0 = ctx.data(&grid);
    let data = PicardWorkspace::transformed_data(&u0);
    let base = ws.linear_trajectory(&data);
    let sizes = xy_norms(&base, &ws.pairs)?;
    let base_size = (sizes.x_value + sizes.y_value).max(1e-300);
    let m_ball = ctx.config.run.m_ball;
    let seed = ctx.config.rng_seed;

    let mut csv = String::from("epsilon,m_ball,pair_id,ratio\n");
    let mut worst = 0.0f64;
    for pair in 0..ctx.config.run.pairs as u64 {
        let s = Complex64::new(0.6 * m_ball / base_size, 0.0);
        let p1 = random_ball_perturbation(&ws, seed.wrapping_add(100 + pair), 0.2 * m_ball)?;
        let p2 = random_ball_perturbation(&ws, seed.wrapping_add(200 + pair), 0.2 * m_ball)?;
        let v1 = trajectory_add(&trajectory_scale(&base, s), &p1);
        let v2 = trajectory_add(&trajectory_scale(&base, s), &p2);
        let ratio = contraction_ratio(&ws, &v1, &v2, &data)?;
        worst = worst.max(ratio);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            ctx.config.run.epsilon, m_ball, pair, ratio
        ));
    }
    std::fs::write(ctx.out_dir.join("contraction.csv"), csv)?;

    let (vstar, history) = picard_iterate(
        &ws,
        &base,
        &data,
        ctx.config.run.max_iter,
        ctx.config.run.tol,
    )?;
    let residual = error_functional(&ws, &vstar)?;
    let mut csv = String::from("iter,increment_x,residual_y\n");
    for (i, step) in history.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, step.increment_x, step.residual_y));
    }
    std::fs::write(ctx.out_dir.join("picard.csv"), csv)?;

    Ok(vec![
        ctx.bounded("worst_contraction_ratio", worst, 0.5),
        ctx.bounded("picard_iterations", history.len() as f64, ctx.config.run.max_iter as f64),
        ctx.bounded("fixed_point_residual_y", residual, 1e-3 * m_ball),
    ])
}

/// Spread a sweep across a bounded pool of threads, keeping row order (and
/// therefore artifacts) identical to the sequential run.
fn parallel_rows<F>(workers: usize, n_list: &[i64], f: F) -> anyhow::Result<Vec<ScalingRow>>
where
    F: Fn(&[i64]) -> nls_core::Result<Vec<ScalingRow>> + Sync,
{
    if workers <= 1 || n_list.len() <= 1 {
        return Ok(f(n_list)?);
    }
    let chunk = n_list.len().div_ceil(workers);
    let results: Vec<nls_core::Result<Vec<ScalingRow>>> = std::thread::scope(|s| {
        let handles: Vec<_> = n_list
            .chunks(chunk)
            .map(|c| s.spawn(|| f(c)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

fn write_scaling_rows(path: &Path, rows: &[ScalingRow], pass: bool) -> anyhow::Result<()> {
    let mut csv = String::from("lemma_id,n,t,power,measured,compensated,pass\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.bound, r.n, r.t, r.power, r.measured, r.compensated, pass
        ));
    }
    std::fs::write(path, csv).context("writing lemma table")?;
    Ok(())
}

pub fn run_lemma_check(ctx: &RunContext, lemma_override: Option<&str>) -> anyhow::Result<Vec<ReportRecord>> {
    let space = OscillatorSpace::compact()?;
    let alpha0 = ctx.config.alpha0();
    let run = &ctx.config.run;
    let lemma = lemma_override.unwrap_or(&run.lemma).to_uppercase();
    let n_list = &run.n_list;
    let t_list = &run.t_list;
    let mut all_rows: Vec<ScalingRow> = Vec::new();
    let mut records = Vec::new();
    let mut groups: Vec<(String, Vec<ScalingRow>)> = Vec::new();

    let workers = ctx.workers;
    match lemma.as_str() {
        "K2_16_1" => {
            let rows = parallel_rows(workers, n_list, |ns| {
                resolvent_norm_scaling(&space, ns, alpha0, 1.0, OscComposite::Resolvent)
            })?;
            groups.push(("resolvent".into(), rows));
        }
        "K2_17_1" => {
            let rows = parallel_rows(workers, n_list, |ns| {
                resolvent_norm_scaling(&space, ns, alpha0, run.theta, OscComposite::Resolvent)
            })?;
            groups.push((format!("resolvent_theta_{}", run.theta), rows));
        }
        "K2_15_2" => {
            for comp in [
                OscComposite::KineticLeft,
                OscComposite::KineticRight,
                OscComposite::PositionLeft,
                OscComposite::PositionRight,
                OscComposite::SymmetrizerLeft,
                OscComposite::SymmetrizerRight,
            ] {
                let rows = parallel_rows(workers, n_list, |ns| {
                    resolvent_norm_scaling(&space, ns, alpha0, 1.0, comp)
                })?;
                groups.push((rows[0].bound.clone(), rows));
            }
        }
        "10_30_1" => {
            for comp in [
                OscComposite::KineticLeft,
                OscComposite::PositionLeft,
                OscComposite::PositionRight,
                OscComposite::ShiftedRight,
            ] {
                let rows = parallel_rows(workers, n_list, |ns| {
                    resolvent_norm_scaling(&space, ns, alpha0, run.theta, comp)
                })?;
                groups.push((rows[0].bound.clone(), rows));
            }
        }
        "L_REST2" => {
            for comp in [
                TimeComposite::PullbackKinetic,
                TimeComposite::ChirpPosition,
                TimeComposite::ChirpPlain,
                TimeComposite::ChirpPositionRight,
                TimeComposite::ChirpKineticRight,
            ] {
                for &t in t_list {
                    let rows = parallel_rows(workers, n_list, |ns| {
                        composite_bound_rows(&space, ns, &[t], run.gamma, comp, alpha0)
                    })?;
                    groups.push((format!("{}_t_{t}", comp.label()), rows));
                }
            }
        }
        "K2_18_3" => {
            for comp in [
                TimeComposite::DisplayPositionChirp,
                TimeComposite::DisplayKineticChirp,
            ] {
                for &t in t_list {
                    let rows = parallel_rows(workers, n_list, |ns| {
                        composite_bound_rows(&space, ns, &[t], 1.0, comp, alpha0)
                    })?;
                    groups.push((format!("{}_t_{t}", comp.label()), rows));
                }
            }
        }
        "L_K5_4_1" => {
            for &t in t_list {
                let rows = parallel_rows(workers, n_list, |ns| {
                    derivative_bound_rows(&space, ns, &[t], 0.0, 0.0, alpha0)
                })?;
                groups.push((format!("resolvent_derivative_t_{t}"), rows));
            }
        }
        other => anyhow::bail!("unknown lemma table {other}"),
    }

    for (label, rows) in groups {
        let growth = growth_per_decade(&rows);
        records.push(ctx.bounded(&format!("growth_per_decade_{label}"), growth, 1.25));
        all_rows.extend(rows);
    }
    // Monte-Carlo lower bounds for r != 2 (exact norms are L^2 only)
    if run.lr_samples > 0 {
        for &n in n_list {
            let spec = nls_core::oscillator::ResolventSpec::new(
                n,
                alpha0,
                1.0,
                nls_core::oscillator::ResolventKind::Oscillator,
                1.0,
            )?;
            let op = nls_core::oscillator::ResolventFactorized::new(&space, spec)?;
            let lower = nls_core::oscillator::lr_norm_lower_bound(
                &op,
                &space.grid,
                run.lr,
                run.lr_samples,
                ctx.config.rng_seed.wrapping_add(n as u64),
            )?;
            records.push(ctx.record(
                &format!("lr_lower_bound_r{}_n{n}", run.lr),
                lower * (n as f64).sqrt(),
                f64::INFINITY,
                true,
            ));
        }
    }
    let pass = records.iter().all(|r| r.pass);
    write_scaling_rows(&ctx.out_dir.join("lemma.csv"), &all_rows, pass)?;
    Ok(records)
}

pub fn run_identity_check(ctx: &RunContext) -> anyhow::Result<Vec<ReportRecord>> {
    let mut records = Vec::new();
    // conjugation identities on a Gaussian test field
    let g = Grid::new(1, 1024, 30.0)?;
    let f = Field::gaussian(g, 1.0, 1.0);
    for (name, which, a) in [
        ("quadratic_phase_momentum", ConjugationIdentity::QuadraticPhaseMomentum, 0.7),
        ("quadratic_kinetic_position", ConjugationIdentity::QuadraticKineticPosition, 0.3),
        ("scaling_conjugation", ConjugationIdentity::ScalingConjugation, 0.4),
        ("dilation_conjugation", ConjugationIdentity::DilationConjugation, 1.3),
        ("commutator_scaling_kinetic", ConjugationIdentity::CommutatorScalingKinetic, 0.0),
        ("commutator_scaling_position", ConjugationIdentity::CommutatorScalingPosition, 0.0),
        ("commutator_kinetic_position", ConjugationIdentity::CommutatorKineticPosition, 0.0),
    ] {
        let residual = conjugation_identity_check(which, a, &f)?;
        records.push(ctx.bounded(&format!("conjugation_{name}"), residual, 1e-8));
    }

    // integration-by-parts identity on a solver-manufactured trajectory
    let seq = ctx.config.sequence()?;
    let grid = Grid::new(1, 256, 15.0)?;
    let mesh = TimeMesh::geometric_down(0.97, 0.25)?.refined(2);
    let u0 = Field::gaussian(grid.clone(), ctx.config.run.epsilon, ctx.config.run.sigma);
    let v1 = PicardWorkspace::transformed_data(&u0);
    let run = evolve(
        &v1,
        &mesh,
        &seq,
        ProblemTag::VEquation,
        ctx.config.alpha0(),
        &EvolveOptions {
            substeps: 6,
            ..Default::default()
        },
    )?;
    if run.blowup.is_some() {
        anyhow::bail!("numerical failure while manufacturing the trajectory");
    }
    let ws = PicardWorkspace::new(grid, mesh, seq, ctx.config.alpha0())?;
    for &n in &ctx.config.run.identity_ns {
        let gaps = nls_core::picard::duhamel_parts_identity_gap(
            &ws,
            &run.trajectory,
            n,
            &ctx.config.run.identity_times,
        )?;
        for (t, gap) in gaps {
            records.push(ctx.bounded(
                &format!("parts_identity_n{n}_t{t:.3}"),
                gap,
                ctx.config.run.identity_tol,
            ));
        }
    }
    Ok(records)
}
