//! Level-2 lifts of sampled paths: chord signatures, Marcus lifts, Young
//! pairing with a bounded-variation path, and translation.

use thiserror::Error;

use crate::algebra::{tri_index, G2Element, Lie2Element};
use crate::cadlag::{CadlagPath, PathError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("horizons differ: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("1/p + 1/q must exceed 1 (p = {p}, q = {q})")]
    VariationOrder { p: f64, q: f64 },
    #[error("sample grids differ")]
    GridMismatch,
}

/// Discrete weakly geometric rough path: running signature from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath2 {
    path: CadlagPath<G2Element>,
    marcus_like: bool,
}

const MARCUS_TOL: f64 = 1e-12;

impl RoughPath2 {
    /// Wraps a group-valued path; the Marcus-like flag is computed by
    /// scanning the area of every jump.
    pub fn new(path: CadlagPath<G2Element>) -> Self {
        let marcus_like = path.jump_indices().into_iter().all(|i| {
            let inc = path.values()[i - 1].increment_to(&path.values()[i]);
            let scale = 1.0 + inc.vec().iter().map(|a| a * a).sum::<f64>();
            inc.log().area_norm() <= MARCUS_TOL * scale
        });
        Self { path, marcus_like }
    }

    pub fn path(&self) -> &CadlagPath<G2Element> {
        &self.path
    }

    pub fn into_path(self) -> CadlagPath<G2Element> {
        self.path
    }

    pub fn times(&self) -> &[f64] {
        self.path.times()
    }

    pub fn points(&self) -> &[G2Element] {
        self.path.values()
    }

    pub fn horizon(&self) -> f64 {
        self.path.horizon()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn marcus_like(&self) -> bool {
        self.marcus_like
    }

    /// `𝐱_{t_i, t_k} = points[i]⁻¹ ⊗ points[k]`.
    pub fn increment(&self, i: usize, k: usize) -> G2Element {
        self.points()[i].increment_to(&self.points()[k])
    }

    /// Level-1 projection.
    pub fn level1(&self) -> CadlagPath<Vec<f64>> {
        self.path.map(|g| g.vec().to_vec())
    }

    /// Multiplies every point by `exp(0, B_t)` for an area process `B`
    /// (packed strict upper triangles) sampled on the same grid. `B` is
    /// central at step 2, so this shifts the running area by `B_t`.
    pub fn with_area_correction(&self, area: &CadlagPath<Vec<f64>>) -> Result<Self, LiftError> {
        if area.times() != self.times() {
            return Err(LiftError::GridMismatch);
        }
        let d = self.dim();
        let points = self
            .points()
            .iter()
            .zip(area.values())
            .map(|(g, b)| {
                let corr = Lie2Element::new(vec![0.0; d], b.clone())
                    .map_err(|_| LiftError::DimensionMismatch { left: d * (d - 1) / 2, right: b.len() })?;
                Ok(g * &corr.exp())
            })
            .collect::<Result<Vec<_>, LiftError>>()?;
        Ok(Self::new(CadlagPath::new(self.times().to_vec(), points, self.horizon())?))
    }
}

fn chord_product(x: &CadlagPath<Vec<f64>>) -> Vec<G2Element> {
    let d = x.dim();
    let mut points = Vec::with_capacity(x.len());
    let mut g = G2Element::identity(d);
    points.push(g.clone());
    for w in x.values().windows(2) {
        let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        g = &g * &G2Element::from_increment(&inc);
        points.push(g.clone());
    }
    points
}

/// Signature of the polyline through the samples: the running product of
/// `exp(Δx_k)`.
pub fn lift_piecewise_linear(x: &CadlagPath<Vec<f64>>) -> RoughPath2 {
    let path = CadlagPath::new(x.times().to_vec(), chord_product(x), x.horizon())
        .expect("grid inherited from a valid path");
    RoughPath2 { path, marcus_like: true }
}

/// Marcus lift of a sampled semimartingale skeleton.
///
/// Jumps carry no area and continuous moves are chords, so this coincides
/// with [`lift_piecewise_linear`]; its area is the left-point sum
/// `½ Σ (X_{t_{k−1}} − X_0) ∧ ΔX_k`.
pub fn marcus_lift(x: &CadlagPath<Vec<f64>>) -> RoughPath2 {
    lift_piecewise_linear(x)
}

struct Merged {
    /// Distinct times of the merged grid.
    times: Vec<f64>,
}

fn merge_times(a: &[f64], b: &[f64]) -> Merged {
    let mut times: Vec<f64> = a.iter().chain(b).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    Merged { times }
}

fn joint_log(x: &Lie2Element, h: &[f64]) -> Lie2Element {
    let (d, dh) = (x.dim(), h.len());
    let n = d + dh;
    let mut vec = x.vec().to_vec();
    vec.extend_from_slice(h);
    let mut area = vec![0.0; n * (n - 1) / 2];
    for i in 0..d {
        for j in i + 1..d {
            area[tri_index(n, i, j)] = x.area(i, j);
        }
    }
    Lie2Element::new(vec, area).expect("packed length matches")
}

/// Joint lift of `(𝐱, h)` in `G²(ℝ^{d+d'})`.
///
/// On each cell of the merged grid both components move along their
/// geodesics, whose joint log is `((u, Δh), blockdiag(A, 0))`; jumps at a
/// common time are joined log-linearly. Cross blocks are the left-point
/// Riemann–Stieltjes sums of `∫ x ⊗ dh` and `∫ h ⊗ dx`.
pub fn young_pair(
    x: &RoughPath2,
    h: &CadlagPath<Vec<f64>>,
    p: f64,
    q: f64,
) -> Result<RoughPath2, LiftError> {
    if !(1.0 / p + 1.0 / q > 1.0) {
        return Err(LiftError::VariationOrder { p, q });
    }
    let (tx, th) = (x.horizon(), h.horizon());
    if (tx - th).abs() > 1e-12 * tx.abs().max(1.0) {
        return Err(LiftError::HorizonMismatch { left: tx, right: th });
    }
    let xp = x.path();
    let merged = merge_times(xp.times(), h.times());
    let dim = x.dim() + h.dim();
    let mut times = vec![0.0];
    let mut g = G2Element::identity(dim);
    let mut points = vec![g.clone()];
    let mut x_prev = xp.value_at(0.0);
    let mut h_prev = h.value_at(0.0);
    // Jumps at t = 0 go first.
    let mut push_step = |x_from: &G2Element, x_to: &G2Element, h_from: &[f64], h_to: &[f64], t: f64| {
        let lx = x_from.increment_to(x_to).log();
        let dh: Vec<f64> = h_to.iter().zip(h_from).map(|(a, b)| a - b).collect();
        g = &g * &joint_log(&lx, &dh).exp();
        times.push(t);
        points.push(g.clone());
    };
    let (x0, h0) = (xp.values()[0].clone(), h.values()[0].clone());
    if x_prev != x0 || h_prev != h0 {
        push_step(&x0, &x_prev, &h0, &h_prev, 0.0);
    }
    for &t in merged.times.iter().skip_while(|&&t| t == 0.0) {
        let (x_left, h_left) = (xp.left_limit(t), h.left_limit(t));
        push_step(&x_prev, &x_left, &h_prev, &h_left, t);
        let (x_right, h_right) = (xp.value_at(t), h.value_at(t));
        if x_right != x_left || h_right != h_left {
            push_step(&x_left, &x_right, &h_left, &h_right, t);
        }
        x_prev = x_right;
        h_prev = h_right;
    }
    Ok(RoughPath2::new(CadlagPath::new(times, points, tx)?))
}

/// Translation `T_h(𝐱)`: the image of [`young_pair`] under `(x, h) ↦ x + h`.
pub fn translate(x: &RoughPath2, h: &CadlagPath<Vec<f64>>, p: f64, q: f64) -> Result<RoughPath2, LiftError> {
    if x.dim() != h.dim() {
        return Err(LiftError::DimensionMismatch { left: x.dim(), right: h.dim() });
    }
    let joint = young_pair(x, h, p, q)?;
    let path = joint.path().map(|g| g.plus_blocks());
    Ok(RoughPath2::new(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(times: Vec<f64>, values: Vec<Vec<f64>>) -> CadlagPath<Vec<f64>> {
        CadlagPath::polyline(times, values).unwrap()
    }

    #[test]
    fn straight_chord_has_no_area() {
        let x = poly(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let l = lift_piecewise_linear(&x);
        assert_eq!(l.points()[1], G2Element::from_increment(&[1.0, 0.0]));
    }

    #[test]
    fn l_path_area() {
        let x = poly(vec![0.0, 1.0, 2.0], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let l = lift_piecewise_linear(&x);
        let log = l.points()[2].log();
        assert_eq!(log.vec(), &[1.0, 1.0]);
        assert_eq!(log.area(0, 1), 0.5);
    }

    #[test]
    fn closed_triangle_area_is_shoelace() {
        let x = poly(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
        );
        let end = lift_piecewise_linear(&x).points()[3].log();
        assert!(end.vec().iter().all(|a| a.abs() < 1e-15));
        assert!((end.area(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn young_pair_of_two_lines() {
        let x = lift_piecewise_linear(&poly(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]));
        let h = poly(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]);
        let j = young_pair(&x, &h, 1.0, 1.0).unwrap();
        let end = j.points().last().unwrap();
        assert_eq!(end.area(0, 1), 0.0);
        assert_eq!(end.mat()[1], 0.5);
    }

    #[test]
    fn young_pair_checks_orders_and_horizons() {
        let x = lift_piecewise_linear(&poly(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]));
        let h = poly(vec![0.0, 2.0], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(young_pair(&x, &h, 2.5, 1.0), Err(LiftError::HorizonMismatch { .. })));
        let h = poly(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(young_pair(&x, &h, 2.5, 2.0), Err(LiftError::VariationOrder { .. })));
    }

    #[test]
    fn translation_by_minus_path_is_trivial() {
        let x = poly(vec![0.0, 0.4, 1.0], vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.0, 0.5]]);
        let t = translate(&marcus_lift(&x), &x.scale(-1.0), 2.5, 1.0).unwrap();
        for g in t.points() {
            assert!(g.hom_norm() < 1e-9);
        }
    }

    #[test]
    fn area_jump_is_not_marcus_like() {
        let g = Lie2Element::new(vec![1.0, 0.0], vec![0.2]).unwrap().exp();
        let p = CadlagPath::step(vec![0.0, 0.5], vec![G2Element::identity(2), g], 1.0).unwrap();
        assert!(!RoughPath2::new(p).marcus_like());
    }
}
