//! Property suites: randomized invariants of the coefficient calculus plus
//! the stability and scaling properties of the solvers and the fixed-point
//! machinery.

use num_complex::Complex64;
use proptest::prelude::*;

use nls_core::evolution::{evolve, EvolveOptions, ProblemTag, TimeMesh};
use nls_core::grid::{Field, Grid};
use nls_core::nonlinearity::{coefficients_from_phase, CoefficientSeq};
use nls_core::oscillator::log_slope;
use nls_core::picard::{
    apply_phi, contraction_ratio, picard_iterate, random_ball_perturbation, trajectory_add,
    trajectory_sub, x_norm, PicardWorkspace,
};
use nls_core::spectral::{free_propagate, norm, NormSpec};

fn arb_coeff() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn arb_finite_seq() -> impl Strategy<Value = CoefficientSeq> {
    (
        3.6..4.9f64,
        proptest::collection::vec((-3i64..6, arb_coeff()), 1..5),
    )
        .prop_map(|(alpha, entries)| CoefficientSeq::finite(alpha, &entries).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homogeneity_of_degree_alpha(
        seq in arb_finite_seq(),
        re in -3.0..3.0f64,
        im in -3.0..3.0f64,
        r in 0.05..20.0f64,
    ) {
        let u = Complex64::new(re, im);
        prop_assume!(u.norm() > 1e-3);
        let lhs = seq.eval_f(r * u);
        let rhs = r.powf(seq.alpha()) * seq.eval_f(u);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-300));
    }

    #[test]
    fn phase_quadrature_round_trip(seq in arb_finite_seq()) {
        let rec = coefficients_from_phase(
            |t| seq.eval_f(Complex64::from_polar(1.0, t)),
            seq.alpha(),
            6,
            512,
        )
        .unwrap();
        for n in -6..=6 {
            prop_assert!((seq.coeff(n) - rec.coeff(n)).norm() <= 1e-10);
        }
    }

    #[test]
    fn wirtinger_matches_finite_differences(
        seq in arb_finite_seq(),
        re in 0.1..3.0f64,
        theta in 0.0..6.2f64,
    ) {
        let u = Complex64::from_polar(re, theta);
        let (dz, dzb) = seq.eval_wirtinger(u).unwrap();
        let h = 1e-6;
        let d1 = (seq.eval_f(u + Complex64::new(h, 0.0)) - seq.eval_f(u - Complex64::new(h, 0.0)))
            / (2.0 * h);
        let di = (seq.eval_f(u + Complex64::new(0.0, h)) - seq.eval_f(u - Complex64::new(0.0, h)))
            / (2.0 * h);
        let fz = (d1 - Complex64::new(0.0, 1.0) * di) * 0.5;
        let fzb = (d1 + Complex64::new(0.0, 1.0) * di) * 0.5;
        let scale = dz.norm().max(dzb.norm()).max(1.0);
        prop_assert!((dz - fz).norm() <= 1e-4 * scale);
        prop_assert!((dzb - fzb).norm() <= 1e-4 * scale);
    }

    #[test]
    fn a1_never_flips_under_truncation(
        a in -0.9..0.9f64,
        n_max in 1i64..64,
    ) {
        let seq = CoefficientSeq::geometric(4.0, a).unwrap();
        prop_assert!(seq.check_assumptions().a1_pass);
        prop_assert!(seq.truncated(n_max).check_assumptions().a1_pass);
    }

    #[test]
    fn coefficient_json_round_trip(seq in arb_finite_seq()) {
        let text = seq.to_json();
        let back = CoefficientSeq::from_json(&text).unwrap();
        prop_assert_eq!(seq, back.clone());
        prop_assert_eq!(text, back.to_json());
    }
}

/// The scattering gap closes at the nonlinearity order: the pullback mismatch
/// `U(-T-1) u(T) - U(-1) u0` scales like `eps^alpha`.
#[test]
fn linear_limit_scaling_in_epsilon() {
    let grid = Grid::new(1, 1024, 60.0).unwrap();
    let seq = CoefficientSeq::finite(4.0, &[(2, Complex64::new(1.0, 0.0))]).unwrap();
    let t_final = 8.0;
    let mut eps_list = Vec::new();
    let mut gaps = Vec::new();
    for &eps in &[0.2f64, 0.1, 0.05] {
        let u0 = Field::gaussian(grid.clone(), eps, 1.0);
        let run = evolve(
            &u0,
            &TimeMesh::uniform(0.0, t_final, 400).unwrap(),
            &seq,
            ProblemTag::UEquation,
            1.5,
            &EvolveOptions::default(),
        )
        .unwrap()
        .trajectory;
        let pullback = free_propagate(run.snapshots.last().unwrap(), -(t_final + 1.0));
        let reference = free_propagate(&u0, -1.0);
        gaps.push(norm(&pullback.sub(&reference), NormSpec::Hab(0.0, 1.0)).unwrap());
        eps_list.push(eps);
    }
    let slope = log_slope(&eps_list, &gaps);
    assert!(
        (slope - 4.0).abs() <= 0.8,
        "expected slope ~ alpha = 4 within 20%, got {slope} (gaps {gaps:?})"
    );
    // compensated gaps stay bounded
    let comp: Vec<f64> = eps_list
        .iter()
        .zip(&gaps)
        .map(|(e, g)| g / e.powi(4))
        .collect();
    let spread = comp.iter().fold(0.0f64, |a, &b| a.max(b))
        / comp.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(spread <= 2.0, "compensated spread {spread} ({comp:?})");
}

/// Extending the coefficient-tail truncation must not move the map output.
#[test]
fn phi_truncation_stability() {
    let seq = CoefficientSeq::geometric(4.0, 0.5).unwrap();
    let grid = Grid::new(1, 128, 15.0).unwrap();
    let mesh = TimeMesh::geometric_down(0.8, 0.05).unwrap();
    let ws = PicardWorkspace::new(grid.clone(), mesh.clone(), seq.clone(), 1.5).unwrap();
    assert!(ws.n_max >= 12);
    let u0 = Field::gaussian(grid.clone(), 0.05, 1.0);
    let data = PicardWorkspace::transformed_data(&u0);
    let v = ws.linear_trajectory(&data);
    let phi = apply_phi(&ws, &v, &data).unwrap();

    let mut ws_long = PicardWorkspace::new(grid, mesh, seq, 1.5).unwrap();
    ws_long.n_max = ws.n_max + ws.n_max / 2;
    let phi_long = apply_phi(&ws_long, &v, &data).unwrap();
    let rel = x_norm(&trajectory_sub(&phi, &phi_long), &ws.pairs).unwrap()
        / x_norm(&phi, &ws.pairs).unwrap();
    assert!(rel < 1e-6, "truncation moved the map by {rel:.3e}");
}

/// Halving the geometric mesh step must leave the contraction ratio stable.
#[test]
fn contraction_ratio_mesh_stability() {
    let seq = CoefficientSeq::finite(4.0, &[(2, Complex64::new(1.0, 0.0))]).unwrap();
    let grid = Grid::new(1, 128, 15.0).unwrap();
    let u0 = Field::gaussian(grid.clone(), 0.02, 1.0);
    let data = PicardWorkspace::transformed_data(&u0);
    let mut ratios = Vec::new();
    for refine in [1usize, 2] {
        let mesh = TimeMesh::geometric_down(0.85, 1e-2).unwrap().refined(refine);
        let ws = PicardWorkspace::new(grid.clone(), mesh, seq.clone(), 1.5).unwrap();
        let base = ws.linear_trajectory(&data);
        let p1 = random_ball_perturbation(&ws, 1, 0.02).unwrap();
        let p2 = random_ball_perturbation(&ws, 2, 0.02).unwrap();
        let v1 = trajectory_add(&base, &p1);
        let v2 = trajectory_add(&base, &p2);
        ratios.push(contraction_ratio(&ws, &v1, &v2, &data).unwrap());
    }
    let rel = (ratios[1] - ratios[0]).abs() / ratios[0];
    assert!(rel < 0.10, "ratios {ratios:?} moved by {rel:.3}");
}

/// The singular-weight/derivative-weight ratio stays within the bound seen
/// over a random family of smooth decaying functions.
#[test]
fn hardy_ratio_family_bound() {
    use nls_core::grid::random_smooth_field;
    use nls_core::spectral::fractional_hardy_sample;
    let grid = Grid::new(1, 512, 20.0).unwrap();
    let (s, r) = (0.4, 2.0);
    let mut family_max = 0.0f64;
    for seed in 0..50u64 {
        let f = random_smooth_field(&grid, 1000 + seed, 2.0);
        family_max = family_max.max(fractional_hardy_sample(&f, s, r).unwrap());
    }
    assert!(family_max.is_finite() && family_max > 0.0);
    let odd = Field::from_fn(grid, |x| {
        Complex64::new(x[0] * (-x[0] * x[0] / 2.0).exp(), 0.0)
    });
    let odd_ratio = fractional_hardy_sample(&odd, s, r).unwrap();
    assert!(
        odd_ratio <= family_max,
        "odd-function ratio {odd_ratio} exceeds family max {family_max}"
    );
}

/// Monte-Carlo lower bounds in L^r are genuine lower bounds: at r = 2 they
/// sit below the power-iteration operator norm.
#[test]
fn lr_lower_bound_consistent_at_r2() {
    use nls_core::opnorm::operator_norm;
    use nls_core::oscillator::{
        lr_norm_lower_bound, OscillatorSpace, ResolventFactorized, ResolventKind, ResolventSpec,
    };
    let space = OscillatorSpace::compact().unwrap();
    let spec = ResolventSpec::new(6, 1.5, 1.0, ResolventKind::Oscillator, 1.0).unwrap();
    let op = ResolventFactorized::new(&space, spec).unwrap();
    let exact = operator_norm(&op, &space.grid, 5, 600, 1e-10).value;
    let lower = lr_norm_lower_bound(&op, &space.grid, 2.0, 40, 99).unwrap();
    assert!(lower <= exact * (1.0 + 1e-8), "lower {lower} vs exact {exact}");
    assert!(lower >= 0.3 * exact, "sampling far too weak: {lower} vs {exact}");
    // an r != 2 sample exists and is finite
    let l3 = lr_norm_lower_bound(&op, &space.grid, 3.0, 20, 7).unwrap();
    assert!(l3.is_finite() && l3 > 0.0);
}

/// Fixed-point uniqueness at desk scale: distinct starting trajectories
/// converge to the same fixed point.
#[test]
fn fixed_point_unique_across_starts() {
    let seq = CoefficientSeq::finite(4.0, &[(2, Complex64::new(1.0, 0.0))]).unwrap();
    let grid = Grid::new(1, 256, 15.0).unwrap();
    let mesh = TimeMesh::geometric_down(0.85, 1e-2).unwrap();
    let ws = PicardWorkspace::new(grid.clone(), mesh, seq, 1.5).unwrap();
    let u0 = Field::gaussian(grid, 0.02, 1.0);
    let data = PicardWorkspace::transformed_data(&u0);
    let start_a = ws.linear_trajectory(&data);
    let start_b = trajectory_add(
        &start_a,
        &random_ball_perturbation(&ws, 9, 0.02).unwrap(),
    );
    let (va, _) = picard_iterate(&ws, &start_a, &data, 16, 1e-10).unwrap();
    let (vb, _) = picard_iterate(&ws, &start_b, &data, 16, 1e-10).unwrap();
    let gap = x_norm(&trajectory_sub(&va, &vb), &ws.pairs).unwrap();
    let scale = x_norm(&va, &ws.pairs).unwrap();
    assert!(gap <= 1e-6 * scale.max(1e-6), "fixed points differ by {gap:.3e}");
}
