mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3x2, Vector3};
use platebend::dgspace::VectorField;
use platebend::energy::{CurvatureField, MetricField, PenaltyParams, PlateEnergy};
use platebend::flow::*;
use platebend::hessian::{broken_hessian, BoundarySample};
use platebend::linalg::SymmetricSolver;
use platebend::mesh::{rectangle_mesh, BoundaryLabels, CreaseSet, EdgeTopology, MeshData, Vec2};
use platebend::Discretization;
use proptest::prelude::*;
use std::sync::Arc;

fn clamped(n: usize, left_only: bool) -> Arc<Discretization> {
    let mesh = distorted_square(n);
    let topo = EdgeTopology::build(&mesh).unwrap();
    let dirichlet = BoundaryLabels::dirichlet_where(&topo, |p| !left_only || p.x < 1e-9);
    let labels = BoundaryLabels { dirichlet, mixed: vec![], points: vec![] };
    Arc::new(Discretization::new(MeshData { mesh, labels, creases: CreaseSet::default() }, 2).unwrap())
}

fn identity_bc(disc: &Discretization) -> BoundarySample {
    BoundarySample::sample(
        &disc.space,
        &disc.active,
        &|p| [p.x, p.y, 0.0],
        &|_| Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        &[],
    )
}

fn random_field(n: usize, seed: u64, scale: f64) -> VectorField {
    let mut r = rng(seed);
    VectorField { n, data: rvec(&mut r, 3 * n).into_iter().map(|v| v * scale).collect() }
}

#[test]
fn gram_sigma_rule_and_definiteness() {
    let free_disc = free(distorted_square(2), 2);
    let clamped_disc = clamped(2, true);
    assert_eq!(gram_sigma(&free_disc), 1.0);
    assert_eq!(gram_sigma(&clamped_disc), 0.0);
    for disc in [free_disc, clamped_disc] {
        let g = gram_matrix(&disc);
        assert!(g.asymmetry() < 1e-14);
        let mut s = SymmetricSolver::new();
        s.factor(&g).unwrap();
        assert!(!s.is_indefinite());
        let eig = g.to_dense().symmetric_eigen().eigenvalues.min();
        assert!(eig > 0.0, "smallest eigenvalue {eig}");
    }
}

#[test]
fn gram_form_is_the_sum_of_its_terms() {
    for disc in [free(distorted_square(3), 2), clamped(3, true)] {
        let g = gram_matrix(&disc);
        let mut r = rng(5);
        let v = rvec(&mut r, disc.n_dofs());
        let sigma = gram_sigma(&disc);
        let mass = disc.space.l2_norm(&v).powi(2);
        let nq = disc.space.n_quad();
        let d2: f64 = broken_hessian(&disc.space, &v)
            .iter()
            .enumerate()
            .map(|(i, h)| disc.space.cells[i / nq].w[i % nq] * h.norm_squared())
            .sum();
        // jump terms: S_h with unit penalties and homogeneous data
        let mut e = plate(&disc, 6.0, 8.0);
        e.penalties = PenaltyParams::new(1.0, 1.0, 1.0).unwrap();
        let y = VectorField::from_components([v.clone(), vec![0.0; v.len()], vec![0.0; v.len()]]);
        let jumps = 2.0 * e.stabilization(&y);
        let expected = sigma * mass + d2 + jumps;
        assert!(rel_err(g.quad_form(&v), expected) < 1e-12);
    }
}

#[test]
fn acceleration_sequence() {
    let mut a = AccelState::default();
    assert_eq!(a.t, 1.0);
    let eta1 = a.advance();
    assert_eq!(eta1, 0.0);
    assert!((a.t - (1.25f64.sqrt() + 0.5)).abs() < 1e-15);
    assert!((a.t - 1.6180340).abs() < 1e-7);
    let mut prev = a.t;
    for n in 2..=10_000usize {
        let eta = a.advance();
        assert!(a.t > prev && eta > 0.0 && eta < 1.0);
        assert!(a.t >= 1.0 + n as f64 / 2.0);
        prev = a.t;
    }
}

#[test]
fn flat_plate_is_stationary() {
    let disc = free(distorted_square(3), 2);
    let y0 = disc.space.interpolate_vector(identity_map);
    for objective in [Objective::Preasymptotic { s2: 0.1 }, Objective::SimplifiedStretching, Objective::Prestrain] {
        let problem = FlowProblem::new(plate(&disc, 6.0, 8.0), objective);
        let mut scheme = LinearizedScheme::default();
        let out = scheme.step(&problem, 0.01, &y0).unwrap();
        assert!(out.y.max_abs_diff(&y0) < 1e-10);
        let report = run_flow(&problem, &mut scheme, &FlowConfig { tau: 0.01, ..Default::default() }, y0.clone(), None).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(report.stopped_by, StopReason::Tolerance);
    }
    // bilayer without spontaneous curvature
    let mut e = plate(&disc, 6.0, 0.0);
    e.set_curvature(CurvatureField::constant(&disc, Matrix2::zeros()));
    let problem = FlowProblem::new(e, Objective::Bilayer { constant_term: true });
    let mut scheme = TangentScheme::new(ConstraintMode::Bary);
    let out = scheme.step(&problem, 0.1, &y0).unwrap();
    assert!(out.y.max_abs_diff(&y0) < 1e-10);
}

#[test]
fn bc_preprocess_recovers_clamped_identity() {
    let disc = clamped(3, false);
    let y = bc_preprocess(disc.clone(), PenaltyParams::default(), &identity_bc(&disc), None).unwrap();
    let id = disc.space.interpolate_vector(identity_map);
    assert!(y.max_abs_diff(&id) < 1e-8, "{}", y.max_abs_diff(&id));
    // zero increments give a zero correction
    let bc = identity_bc(&disc);
    let again = bc_preprocess_increment(disc.clone(), PenaltyParams::default(), &bc, &bc, &y).unwrap();
    assert!(again.max_abs_diff(&y) < 1e-14);
}

#[test]
fn fictitious_force_bends_a_free_plate() {
    let disc = free(distorted_square(3), 2);
    let bc = BoundarySample::sample(&disc.space, &disc.active, &|_| [0.0; 3], &|_| Matrix3x2::zeros(), &[]);
    let force = |_: Vec2| Vector3::new(0.0, 0.0, 1.0);
    let y = bc_preprocess(disc.clone(), PenaltyParams::default(), &bc, Some(&force)).unwrap();
    assert!(y.component(2).iter().any(|v| v.abs() > 1e-3));
    assert!(y.component(0).iter().all(|v| v.abs() < 1e-12));
}

/// A non-flat state on a plate clamped along its left side.
fn bent_state(disc: &Discretization) -> VectorField {
    disc.space.interpolate_vector(|p| Vector3::new(p.x - 0.05 * p.x * p.y, p.y + 0.02 * p.x * p.x, 0.3 * p.x * p.x))
}

fn prestrain_problem(disc: &Arc<Discretization>) -> FlowProblem {
    let mut e = plate(disc, 6.0, 8.0);
    e.metric = MetricField::sample(disc, &|p| Matrix2::new(1.0 + 0.2 * p.x, 0.05, 0.05, 1.0)).unwrap();
    e.set_boundary(identity_bc(disc));
    FlowProblem::new(e, Objective::Prestrain)
}

#[test]
fn tangent_steps_satisfy_the_linearized_constraint() {
    let disc = clamped(3, true);
    for mode in [ConstraintMode::Aver, ConstraintMode::Bary] {
        let problem = prestrain_problem(&disc);
        let y0 = bent_state(&disc);
        let mut scheme = TangentScheme::new(mode);
        let config = FlowConfig { tau: 0.05, tol: 1e-12, max_iter: 15, constraint: mode, ..Default::default() };
        let report = run_flow(&problem, &mut scheme, &config, y0, None).unwrap();
        assert!(report.max_constraint_residual <= 1e-8, "{mode:?}: {}", report.max_constraint_residual);
        for row in &report.log.rows {
            assert!(row.constraint_residual.unwrap() <= 1e-8);
        }
    }
}

#[test]
fn constrained_energy_decreases_with_metric_term() {
    let disc = clamped(3, true);
    let problem = prestrain_problem(&disc);
    let mut scheme = TangentScheme::new(ConstraintMode::Aver);
    for tau in [0.01, 1.0, 100.0] {
        let mut y = bent_state(&disc);
        let mut e = problem.total(&y);
        for _ in 0..5 {
            let next = scheme.step(&problem, tau, &y).unwrap().y;
            let en = problem.total(&next);
            let d = next.sub(&y);
            assert!(en + gram_norm_squared(&problem.gram, &d) / tau <= e + 1e-12 * e.abs().max(1.0), "tau {tau}: {en} vs {e}");
            y = next;
            e = en;
        }
    }
}

#[test]
fn tangent_step_matches_dense_kkt_solve() {
    let disc = clamped(2, true);
    let problem = prestrain_problem(&disc);
    let tau = 0.1;
    let y = bent_state(&disc);
    let out = TangentScheme::new(ConstraintMode::Aver).step(&problem, tau, &y).unwrap();
    let nb = disc.space.nb;
    let n = disc.n_dofs();
    let nc = disc.space.n_cells;
    let q = problem.bending.matrix.to_dense() + problem.stabilization.matrix.to_dense();
    let a = problem.gram.to_dense() / tau + &q;
    // dense KKT in component-blocked ordering
    let dim = 3 * n + 3 * nc;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for m in 0..3 {
        kkt.view_mut((m * n, m * n), (n, n)).copy_from(&a);
        let qy = &q * DVector::from_column_slice(y.component(m));
        for i in 0..n {
            rhs[m * n + i] = problem.bending.rhs[m][i] + problem.stabilization.rhs[m][i] + problem.energy.force[m][i] - qy[i];
        }
    }
    for c in 0..nc {
        let b = constraint_rows(&disc, ConstraintMode::Aver, &y, c);
        for r in 0..3 {
            for m in 0..3 {
                for k in 0..nb {
                    let col = m * n + c * nb + k;
                    kkt[(3 * n + 3 * c + r, col)] = b[(r, m * nb + k)];
                    kkt[(col, 3 * n + 3 * c + r)] = b[(r, m * nb + k)];
                }
            }
        }
    }
    let sol = kkt.lu().solve(&rhs).unwrap();
    let delta = out.y.sub(&y);
    let err = (0..3 * n).map(|i| (sol[i] - delta.data[i]).abs()).fold(0.0, f64::max);
    let scale = delta.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(err <= 1e-9 * scale.max(1e-12), "increment {err} (scale {scale})");
    let mult = out.multipliers.unwrap();
    for c in 0..nc {
        for r in 0..3 {
            let v = sol[3 * n + 3 * c + r];
            assert!((v - mult.values[c][r]).abs() <= 1e-8 * v.abs().max(1e-6), "cell {c}: {v} vs {}", mult.values[c][r]);
        }
    }
}

#[test]
fn rank_deficient_constraint_names_the_cell() {
    let disc = clamped(2, true);
    let problem = prestrain_problem(&disc);
    let mut y = bent_state(&disc);
    let nb = disc.space.nb;
    for m in 0..3 {
        for a in 0..nb {
            y.component_mut(m)[2 * nb + a] = 0.5;
        }
    }
    match TangentScheme::new(ConstraintMode::Aver).step(&problem, 0.1, &y) {
        Err(platebend::Error::RankDeficientConstraint { cell }) => assert_eq!(cell, 2),
        other => panic!("expected rank deficiency, got {:?}", other.err()),
    }
}

#[test]
fn linearized_step_satisfies_galerkin_identity() {
    let disc = clamped(3, true);
    let mut e = plate(&disc, 6.0, 8.0);
    e.set_boundary(identity_bc(&disc));
    e.metric = MetricField::sample(&disc, &|p| Matrix2::new(1.1, 0.0, 0.0, 1.0 + 0.1 * p.y)).unwrap();
    let s2 = 0.1;
    let problem = FlowProblem::new(e, Objective::Preasymptotic { s2 });
    let tau = 0.01;
    let y = bent_state(&disc);
    let next = LinearizedScheme::default().step(&problem, tau, &y).unwrap().y;
    let d = next.sub(&y);
    let gram_term = gram_norm_squared(&problem.gram, &d) / tau;
    let lin = problem.energy.stretching_first_variation(&y, &next, &d);
    let quad = problem.bending.gradient(&next).data.iter().chain(&[]).zip(&d.data).map(|(a, b)| a * b).sum::<f64>()
        + problem.stabilization.gradient(&next).data.iter().zip(&d.data).map(|(a, b)| a * b).sum::<f64>()
        - problem.energy.forcing(&d);
    let residual = gram_term + lin + s2 * quad;
    assert!(residual.abs() <= 1e-10 * gram_term.abs().max(1.0), "residual {residual} ({gram_term})");
}

#[test]
fn planar_configurations_stay_planar() {
    let disc = free(distorted_square(3), 2);
    let mut e = plate(&disc, 6.0, 8.0);
    e.metric = MetricField::sample(&disc, &|p| Matrix2::new(1.0 + 0.3 * p.x * p.y, 0.0, 0.0, 1.0)).unwrap();
    let problem = FlowProblem::new(e, Objective::Preasymptotic { s2: 0.01 });
    let y0 = disc.space.interpolate_vector(|p| Vector3::new(1.1 * p.x, p.y + 0.1 * p.x, 0.0));
    let config = FlowConfig { tau: 0.01, max_iter: 10, ..Default::default() };
    let report = run_flow(&problem, &mut LinearizedScheme::default(), &config, y0, None).unwrap();
    assert!(report.y.component(2).iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn metric_preprocess_reduces_the_defect() {
    let disc = free(distorted_square(4), 2);
    let metric = MetricField::sample(&disc, &|p| Matrix2::new(1.0 + 0.2 * p.x, 0.0, 0.0, 1.0)).unwrap();
    let y0 = disc.space.interpolate_vector(|p| Vector3::new(p.x, p.y, 0.1 * p.x * p.y));
    let config = PreprocessConfig { tau: 0.01, tol: 1e-8, eps0: 0.0, max_iter: 40, accelerate: true };
    let report = metric_preprocess(disc.clone(), metric.clone(), DefectKind::Aver, &config, y0.clone()).unwrap();
    assert!(report.last.defect < 0.5 * report.initial.defect, "{} -> {}", report.initial.defect, report.last.defect);
    assert!(report.last.total < report.initial.total);
    let target = 0.9 * report.initial.defect;
    let config = PreprocessConfig { eps0: target, ..config };
    let early = metric_preprocess(disc, metric, DefectKind::Aver, &config, y0).unwrap();
    assert_eq!(early.stopped_by, StopReason::DefectTarget);
    assert!(early.iterations < report.iterations);
}

#[test]
fn config_validation() {
    assert!(FlowConfig { tau: 0.0, ..Default::default() }.validate().is_err());
    assert!(FlowConfig { accelerate: true, constraint: ConstraintMode::Bary, ..Default::default() }.validate().is_err());
    assert!(FlowConfig::default().validate().is_ok());
    assert!(matches!(ConstraintMode::parse("aver"), Ok(ConstraintMode::Aver)));
    assert!(ConstraintMode::parse("both").is_err());
    let reg = scheme_registry();
    assert_eq!(reg.names(), vec!["linearized", "tangent-aver", "tangent-bary"]);
    for mode in [ConstraintMode::None, ConstraintMode::Aver, ConstraintMode::Bary] {
        assert_eq!(scheme_for(mode).constraint(), mode);
    }
}

#[test]
fn log_has_one_row_per_iteration() {
    let disc = free(rectangle_mesh([0.0, 1.0], [0.0, 1.0], 2, 2).unwrap(), 2);
    let mut e: PlateEnergy = plate(&disc, 6.0, 8.0);
    e.metric = MetricField::sample(&disc, &|_| Matrix2::new(1.2, 0.0, 0.0, 1.0)).unwrap();
    let problem = FlowProblem::new(e, Objective::SimplifiedStretching);
    let y0 = disc.space.interpolate_vector(|p| Vector3::new(p.x, p.y, 0.2 * p.x * (1.0 - p.x)));
    let config = FlowConfig { tau: 0.01, tol: 1e-14, max_iter: 7, ..Default::default() };
    let report = run_flow(&problem, &mut LinearizedScheme::default(), &config, y0, None).unwrap();
    assert_eq!(report.stopped_by, StopReason::MaxIter);
    let mut buf = Vec::new();
    report.log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), report.iterations + 1);
    assert_eq!(text.lines().next().unwrap(), EnergyLog::HEADER);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn multipliers_are_finite_and_step_is_tangent(seed in 0u64..1000, amp in 0.0..0.2f64) {
        let disc = clamped(2, true);
        let problem = prestrain_problem(&disc);
        let y = bent_state(&disc).axpy(1.0, &random_field(disc.n_dofs(), seed, amp * 0.1));
        let out = TangentScheme::new(ConstraintMode::Bary).step(&problem, 0.1, &y).unwrap();
        prop_assert!(out.constraint_residual.unwrap() <= 1e-8);
        prop_assert!(out.multipliers.unwrap().values.iter().flatten().all(|v| v.is_finite()));
    }
}
