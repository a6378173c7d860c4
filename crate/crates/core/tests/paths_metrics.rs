use cadlag_rough::algebra::hom_dist;
use cadlag_rough::cadlag::{interpolate, CadlagPath, InterpOptions, PathFunction, Point};
use cadlag_rough::lift::{lift_piecewise_linear, marcus_lift, young_pair};
use cadlag_rough::metrics::{osc_count_bound, pvar, pvar_path, rho_pvar, Norm, SigmaOptions, sigma_estimate};
use proptest::prelude::*;

fn scalar(values: &[f64]) -> CadlagPath<Vec<f64>> {
    let times = (0..values.len()).map(|k| k as f64).collect();
    CadlagPath::polyline(times, values.iter().map(|v| vec![*v]).collect()).unwrap()
}

fn jump_path(times: Vec<f64>, values: Vec<Vec<f64>>, horizon: f64) -> CadlagPath<Vec<f64>> {
    CadlagPath::new(times, values, horizon).unwrap()
}

#[test]
fn pvar_of_monotone_path_is_total_increment() {
    let x = scalar(&[0.0, 1.0, 2.5, 3.0, 5.0]);
    assert!((pvar_path(&x, 2.0).unwrap() - 5.0).abs() < 1e-12);
    assert!((pvar_path(&x, 1.0).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn one_variation_of_zigzag_is_total_travel() {
    let x = scalar(&[0.0, 1.0, 0.0, 1.0]);
    assert!((pvar_path(&x, 1.0).unwrap() - 3.0).abs() < 1e-12);
    // For p = 2 the best partition is {0, 1, 2, 3}: (1 + 1 + 1)^{1/2}.
    assert!((pvar_path(&x, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn pvar_rejects_p_below_one() {
    assert!(pvar_path(&scalar(&[0.0, 1.0]), 0.5).is_err());
}

proptest! {
    #[test]
    fn pvar_ignores_the_clock(values in prop::collection::vec(-5.0..5.0f64, 2..20), p in 1.0..4.0f64, seed in 0.1..3.0f64) {
        let x = scalar(&values);
        let times: Vec<f64> = (0..values.len()).map(|k| (k as f64).powf(seed)).collect();
        let y = CadlagPath::polyline(times, x.values().to_vec()).unwrap();
        prop_assert!((pvar_path(&x, p).unwrap() - pvar_path(&y, p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pvar_dominates_every_increment(values in prop::collection::vec(-5.0..5.0f64, 2..20), p in 1.0..4.0f64) {
        let x = scalar(&values);
        let v = pvar_path(&x, p).unwrap();
        for a in &values {
            for b in &values {
                prop_assert!((a - b).abs() <= v + 1e-12);
            }
        }
    }

    #[test]
    fn pvar_decreases_in_p(values in prop::collection::vec(-5.0..5.0f64, 2..20), p in 1.0..3.0f64) {
        let x = scalar(&values);
        prop_assert!(pvar_path(&x, p + 0.5).unwrap() <= pvar_path(&x, p).unwrap() + 1e-12);
    }

    #[test]
    fn osc_bound_dominates_rough_pvar(values in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 2..12), p in 2.0..3.0f64) {
        let x = CadlagPath::polyline((0..values.len()).map(|k| k as f64).collect(), values).unwrap();
        let lift = marcus_lift(&x);
        let v = pvar(lift.points(), p, hom_dist).unwrap();
        prop_assert!(osc_count_bound(&lift, p).unwrap() >= v - 1e-12);
    }
}

#[test]
fn rho_vanishes_on_identical_lifts() {
    let x = jump_path(vec![0.0, 0.5, 0.5, 1.0], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 2.0], vec![0.0, 1.0]], 1.0);
    assert_eq!(rho_pvar(&marcus_lift(&x), &marcus_lift(&x), 2.5).unwrap(), 0.0);
}

#[test]
fn polygon_area_matches_shoelace() {
    let verts = [[0.0, 0.0], [2.0, 0.0], [3.0, 1.5], [1.0, 3.0], [-1.0, 1.0], [0.0, 0.0]];
    let x = CadlagPath::polyline((0..verts.len()).map(|k| k as f64).collect(), verts.iter().map(|v| v.to_vec()).collect())
        .unwrap();
    let shoelace: f64 = verts.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0;
    let area = lift_piecewise_linear(&x).points().last().unwrap().log().area(0, 1);
    assert!((area - shoelace).abs() < 1e-12, "{area} vs {shoelace}");
}

#[test]
fn marcus_area_is_left_point_sum() {
    let x = jump_path(
        vec![0.0, 0.3, 0.3, 0.7, 0.7, 1.0],
        vec![vec![0.0, 0.0], vec![0.5, -0.2], vec![1.5, 0.3], vec![1.0, 1.0], vec![-0.5, 1.2], vec![0.1, 0.4]],
        1.0,
    );
    let v = x.values();
    let sum: f64 = v.windows(2).map(|w| 0.5 * (w[0][0] * (w[1][1] - w[0][1]) - w[0][1] * (w[1][0] - w[0][0]))).sum();
    let area = marcus_lift(&x).points().last().unwrap().log().area(0, 1);
    assert!((area - sum).abs() < 1e-12);
}

#[test]
fn young_pair_cross_integrals_are_riemann_stieltjes() {
    let x = marcus_lift(&CadlagPath::polyline(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]).unwrap());
    let h = CadlagPath::step(vec![0.0, 0.5], vec![vec![0.0], vec![1.0]], 1.0).unwrap();
    let joint = young_pair(&x, &h, 2.5, 1.0).unwrap();
    let end = joint.points().last().unwrap();
    assert_eq!(end.vec(), &[1.0, 1.0]);
    // ∫ x dh = x(½) = ½ and ∫ h dx = ½.
    assert!((end.mat()[1] - 0.5).abs() < 1e-14);
    assert!((end.mat()[2] - 0.5).abs() < 1e-14);
    assert!(young_pair(&x, &h, 2.5, 3.0).is_err());
}

#[test]
fn interpolation_keeps_original_samples() {
    let x = jump_path(vec![0.0, 0.4, 0.4, 0.8, 0.8], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 3.0], vec![0.0, 3.0], vec![2.0, 1.0]], 1.0);
    for phi in [PathFunction::linear(), PathFunction::hoff_default(2)] {
        let it = interpolate(&x, &phi, InterpOptions::default()).unwrap();
        assert!(!it.path.has_jumps());
        for (k, &i) in it.index_map.iter().enumerate() {
            assert_eq!(it.path.values()[i], x.values()[k]);
        }
        assert_eq!(it.windows.len(), 2);
        // The larger jump gets rank 1.
        assert_eq!(it.windows.iter().find(|w| w.rank == 1).unwrap().time, 0.4);
    }
}

#[test]
fn window_ratio_does_not_change_pvar() {
    let x = jump_path(
        vec![0.0, 0.2, 0.2, 0.5, 0.5, 0.9, 0.9],
        vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![1.3, -0.4], vec![1.0, 0.0], vec![0.2, 0.9], vec![0.4, 0.6], vec![1.0, 1.0]],
        1.0,
    );
    let phi = PathFunction::hoff_default(2);
    for p in [1.0, 2.5] {
        let a = interpolate(&x, &phi, InterpOptions { ratio: 0.5, ..InterpOptions::default() }).unwrap();
        let b = interpolate(&x, &phi, InterpOptions { ratio: 1.0 / 3.0, ..InterpOptions::default() }).unwrap();
        let (va, vb) = (pvar_path(&a.path, p).unwrap(), pvar_path(&b.path, p).unwrap());
        assert!((va - vb).abs() < 1e-9, "{va} vs {vb}");
    }
}

#[test]
fn hoff_area_decays_quadratically_with_the_increment() {
    let phi = PathFunction::hoff_default(2);
    for s in [1.0, 0.5, 0.25] {
        let a = phi.psi(&[s, s]).log().area(0, 1);
        assert!((a - 0.5 * s * s).abs() < 1e-14);
    }
    assert_eq!(PathFunction::linear().psi(&[1.0, 2.0]).log().area(0, 1), 0.0);
}

#[test]
fn sigma_of_a_path_with_itself_is_zero() {
    let x = jump_path(vec![0.0, 0.5, 0.5], vec![vec![0.0], vec![0.5], vec![2.0]], 1.0);
    let r = sigma_estimate(&x, &x, Norm::Sup, &SigmaOptions::default()).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(x.values()[0].dist(&x.values()[2]) > 0.0);
}
