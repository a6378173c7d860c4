use cadlag_rough::cadlag::{CadlagPath, PathFunction};
use cadlag_rough::lift::marcus_lift;
use cadlag_rough::rde::{
    flow_map, marcus_jump, solve_canonical_rde, solve_marcus_sde, FieldSpec, LinearFields, SolverOptions, ZeroFields,
};
use cadlag_rough::stochastic::{
    approximate, bracket, jump_truncate, simulate, simulate_stream, uniform_partition, JumpLaw, ModelError, ModelKind,
    Scheme, SemimartingaleModel, StepLaw,
};
use nalgebra::{DMatrix, DVector};

fn opts() -> SolverOptions {
    SolverOptions { substeps: 16, ..SolverOptions::default() }
}

fn jumpy() -> CadlagPath<Vec<f64>> {
    CadlagPath::new(
        vec![0.0, 0.3, 0.3, 0.6, 0.6, 1.0],
        vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![0.9, -0.3], vec![0.7, 0.2], vec![0.1, 0.6], vec![0.3, 0.2]],
        1.0,
    )
    .unwrap()
}

fn linear_fields() -> (LinearFields, [DMatrix<f64>; 2]) {
    let m = [vec![0.0, -0.5, 0.5, 0.0], vec![0.5, 0.0, 0.0, -0.5]];
    let f = LinearFields::new(2, m.to_vec()).unwrap();
    (f, [DMatrix::from_row_slice(2, 2, &m[0]), DMatrix::from_row_slice(2, 2, &m[1])])
}

#[test]
fn zero_fields_keep_the_state() {
    let sol = solve_canonical_rde(&marcus_lift(&jumpy()), &PathFunction::log_linear(), &ZeroFields { e: 3, d: 2 }, &[1.0, -2.0, 0.5], &opts())
        .unwrap();
    assert!(sol.states.iter().all(|y| y == &[1.0, -2.0, 0.5]));
}

#[test]
fn single_jump_of_linear_fields_is_a_matrix_exponential() {
    let (f, a) = linear_fields();
    let jump = [0.8, -1.3];
    let y = marcus_jump(&f, &[1.0, 0.5], &jump, &opts()).unwrap();
    let expect = (&a[0] * jump[0] + &a[1] * jump[1]).exp() * DVector::from_column_slice(&[1.0, 0.5]);
    assert!((y[0] - expect[0]).abs() < 1e-9 && (y[1] - expect[1]).abs() < 1e-9);
}

#[test]
fn canonical_and_marcus_solutions_agree_on_skeletons() {
    let (f, _) = linear_fields();
    let x = jumpy();
    let canonical = solve_canonical_rde(&marcus_lift(&x), &PathFunction::log_linear(), &f, &[1.0, 0.5], &opts()).unwrap();
    let marcus = solve_marcus_sde(&x, &f, &[1.0, 0.5], &opts()).unwrap();
    assert!(canonical.sup_gap(&marcus) < 1e-8, "{}", canonical.sup_gap(&marcus));
}

#[test]
fn flow_map_matches_individual_solves() {
    let (f, _) = linear_fields();
    let x = marcus_lift(&jumpy());
    let y0s = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.4, 2.0]];
    let flows = flow_map(&x, &PathFunction::linear(), &f, &y0s, &opts()).unwrap();
    for (y0, sol) in y0s.iter().zip(&flows) {
        let single = solve_canonical_rde(&x, &PathFunction::linear(), &f, y0, &opts()).unwrap();
        assert_eq!(single.final_state(), sol.final_state());
    }
    // Linear fields give a linear flow.
    let sum: Vec<f64> = flows[0].final_state().iter().zip(flows[1].final_state()).map(|(a, b)| -0.4 * a + 2.0 * b).collect();
    assert!(sum.iter().zip(flows[2].final_state()).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn dimension_mismatch_is_an_error() {
    let (f, _) = linear_fields();
    assert!(solve_canonical_rde(&marcus_lift(&jumpy()), &PathFunction::linear(), &f, &[1.0], &opts()).is_err());
    assert!(FieldSpec::builtin("nonexistent").is_none());
    for name in ["rotation", "linear", "polynomial"] {
        assert!(FieldSpec::builtin(name).unwrap().build().is_ok());
    }
}

#[test]
fn simulation_is_deterministic_per_seed_and_stream() {
    let m = SemimartingaleModel::brownian(2, 1.0, 1.0);
    assert_eq!(simulate(&m, 64, 7).unwrap().path, simulate(&m, 64, 7).unwrap().path);
    assert_ne!(simulate_stream(&m, 64, 7, 0).unwrap().path, simulate_stream(&m, 64, 7, 1).unwrap().path);
    assert_ne!(simulate(&m, 64, 7).unwrap().path, simulate(&m, 64, 8).unwrap().path);
}

#[test]
fn brownian_bracket_grows_like_time() {
    let m = SemimartingaleModel::brownian(2, 1.0, 2.0);
    let x = simulate(&m, 8193, 3).unwrap().path;
    let q = bracket(&x);
    let end = q.last();
    // Each diagonal entry has standard deviation 2·(2/8192)^{1/2} ≈ 0.03.
    assert!((end[0] - 2.0).abs() < 0.15 && (end[3] - 2.0).abs() < 0.15, "{end:?}");
    assert!(end[1].abs() < 0.15);
}

#[test]
fn compound_poisson_counts_have_mean_intensity_times_horizon() {
    let kind = ModelKind::LevyFinite {
        drift: vec![0.0],
        covariance: vec![0.0],
        intensity: 3.0,
        jump: JumpLaw::Constant { value: vec![1.0] },
        compensated: false,
    };
    let m = SemimartingaleModel::new(2.0, kind).unwrap();
    let samples = 2000;
    let total: usize = (0..samples).map(|s| simulate_stream(&m, 16, 11, s).unwrap().path.jump_indices().len()).sum();
    let mean = total as f64 / samples as f64;
    let se = (6.0 / samples as f64).sqrt();
    assert!((mean - 6.0).abs() < 5.0 * se, "mean jump count {mean}");
}

#[test]
fn compensated_poisson_has_mean_zero_endpoint() {
    let kind = ModelKind::LevyFinite {
        drift: vec![0.0],
        covariance: vec![0.0],
        intensity: 4.0,
        jump: JumpLaw::Constant { value: vec![0.5] },
        compensated: true,
    };
    let m = SemimartingaleModel::new(1.0, kind).unwrap();
    let samples = 4000;
    let ends: Vec<f64> = (0..samples).map(|s| simulate_stream(&m, 8, 5, s).unwrap().path.last()[0]).collect();
    let mean = ends.iter().sum::<f64>() / samples as f64;
    // Var = λ·E[J²] = 1.
    assert!(mean.abs() < 5.0 / (samples as f64).sqrt(), "{mean}");
}

#[test]
fn discrete_models_are_step_paths_with_unit_bracket() {
    for kind in [
        ModelKind::RandomWalk { dim: 2, law: StepLaw::Rademacher, scale: 1.0 },
        ModelKind::MartingaleClt { dim: 2 },
    ] {
        let m = SemimartingaleModel::new(1.0, kind).unwrap();
        let x = simulate(&m, 4097, 1).unwrap().path;
        assert!(x.has_jumps());
        let end = bracket(&x).last().clone();
        assert!((end[0] - 1.0).abs() < 0.05 && (end[3] - 1.0).abs() < 0.05, "{end:?}");
    }
}

#[test]
fn null_array_jump_probabilities_shrink_with_the_row() {
    let kind = ModelKind::NullArray { sigma: 0.0, jump: vec![1.0], intensity: 2.0 };
    let m = SemimartingaleModel::new(1.0, kind).unwrap();
    for n in [64, 1024] {
        let samples = 1000;
        let total: f64 = (0..samples).map(|s| simulate_stream(&m, n, 2, s).unwrap().path.last()[0]).sum();
        let mean = total / samples as f64;
        // The row sum is Binomial(n, 2/n) with mean 2.
        assert!((mean - 2.0).abs() < 0.25, "n = {n}: {mean}");
    }
}

#[test]
fn invalid_models_are_rejected() {
    assert!(SemimartingaleModel::new(-1.0, ModelKind::BrownianMotion { dim: 1, sigma: 1.0 }).is_err());
    let bad_cov = ModelKind::LevyFinite {
        drift: vec![0.0, 0.0],
        covariance: vec![1.0, 2.0, 2.0, 1.0],
        intensity: 1.0,
        jump: JumpLaw::Constant { value: vec![1.0, 0.0] },
        compensated: false,
    };
    assert!(SemimartingaleModel::new(1.0, bad_cov).is_err());
}

#[test]
fn model_config_round_trips() {
    let m = SemimartingaleModel::new(
        1.5,
        ModelKind::LevyFinite {
            drift: vec![0.1],
            covariance: vec![1.0],
            intensity: 2.0,
            jump: JumpLaw::Normal { mean: vec![0.0], std: 0.5 },
            compensated: true,
        },
    )
    .unwrap();
    let text = toml::to_string(&m).unwrap();
    assert!(text.contains("kind = \"levy_finite\""));
    assert_eq!(toml::from_str::<SemimartingaleModel>(&text).unwrap(), m);
}

#[test]
fn approximations_live_on_the_partition() {
    let x = simulate(&SemimartingaleModel::brownian(2, 1.0, 1.0), 65, 9).unwrap().path;
    let part = uniform_partition(&x, 8);
    assert_eq!(part.len(), 9);
    let pc = approximate(&x, &Scheme::PiecewiseConstant, &part).unwrap();
    for &t in &part {
        assert_eq!(pc.value_at(t), x.value_at(t));
    }
    let lin = approximate(&x, &Scheme::PhiInterp(PathFunction::linear()), &part).unwrap();
    assert!(!lin.has_jumps());
    assert_eq!(lin.last(), x.last());
    assert!(matches!(approximate(&x, &Scheme::PiecewiseConstant, &[0.0, 0.123, 1.0]), Err(ModelError::NotRefinable(_))));
}

#[test]
fn truncation_caps_jump_lengths() {
    let x = jumpy();
    let y = jump_truncate(&x, 0.75).unwrap();
    let sizes: Vec<f64> = y
        .jump_indices()
        .iter()
        .map(|&i| y.values()[i].iter().zip(&y.values()[i - 1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    // The first jump has length 0.806 and is cut to 0.75; the second (0.721) is kept.
    assert!((sizes[0] - 0.75).abs() < 1e-12 && (sizes[1] - 0.52f64.sqrt()).abs() < 1e-12, "{sizes:?}");
    assert_eq!(y.values()[..2], x.values()[..2]);
    assert!(jump_truncate(&x, 0.0).is_err());
}
