//! p-variation and Skorokhod-type distances on sampled paths.
//!
//! [`pvar`] and [`rho_pvar`] are exact over partitions of the sample grid.
//! The infimum over time changes in the Skorokhod-type distances is
//! replaced by a search over monotone alignments of the two sample grids,
//! so [`sigma_estimate`] and [`alpha_estimate`] return upper bounds.
//!
//! An alignment is a lattice path from `(0, 0)` to `(n−1, m−1)` with steps
//! `(1,0)`, `(0,1)` and `(1,1)`. A diagonal step is refused when exactly one
//! of the two paths jumps on it: a jump occupies no time, so it cannot be
//! matched with a continuous move of positive duration. Between matched
//! samples both paths and the induced time change are affine, so for `ℝᵈ`
//! paths the cost of an alignment is the exact cost of the induced
//! reparametrization.

use serde::Serialize;
use thiserror::Error;

use crate::cadlag::{interpolate, CadlagPath, InterpOptions, PathError, PathFunction, Point};
use crate::lift::RoughPath2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("p must be at least 1, got {0}")]
    InvalidP(f64),
    #[error("empty path")]
    Empty,
    #[error("sample grids differ")]
    GridMismatch,
    #[error("horizons differ: {0} vs {1}")]
    HorizonMismatch(f64, f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

fn check_p(p: f64) -> Result<(), MetricError> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(MetricError::InvalidP(p))
    }
}

/// Sum of `cost(i, j)` over the best partition of `0..n` into intervals.
fn partition_dp(n: usize, mut cost: impl FnMut(usize, usize) -> f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        let mut b = f64::NEG_INFINITY;
        for i in 0..j {
            b = b.max(best[i] + cost(i, j));
        }
        best[j] = b;
    }
    best[n - 1]
}

/// p-variation of a sample sequence under `dist`, exact over partitions
/// of the grid.
pub fn pvar<P>(points: &[P], p: f64, dist: impl Fn(&P, &P) -> f64) -> Result<f64, MetricError> {
    check_p(p)?;
    if points.is_empty() {
        return Err(MetricError::Empty);
    }
    let s = partition_dp(points.len(), |i, j| dist(&points[i], &points[j]).powf(p));
    Ok(s.powf(1.0 / p))
}

/// p-variation of a path under its own distance (Euclidean or homogeneous).
pub fn pvar_path<P: Point>(x: &CadlagPath<P>, p: f64) -> Result<f64, MetricError> {
    pvar(x.values(), p, |a, b| a.dist(b))
}

/// Inhomogeneous distance between two sequences sampled on a common index set.
pub fn rho_pvar_points<P: Point>(a: &[P], b: &[P], p: f64) -> Result<f64, MetricError> {
    check_p(p)?;
    if a.len() != b.len() {
        return Err(MetricError::GridMismatch);
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = a.len();
    let l1 = partition_dp(n, |i, j| P::increment_levels(&a[i], &a[j], &b[i], &b[j])[0].powf(p));
    let l2 = partition_dp(n, |i, j| P::increment_levels(&a[i], &a[j], &b[i], &b[j])[1].powf(p / 2.0));
    Ok(l1.powf(1.0 / p).max(l2.powf(2.0 / p)))
}

/// `ρ_{p-var}` between two rough paths on the same grid.
pub fn rho_pvar(x: &RoughPath2, y: &RoughPath2, p: f64) -> Result<f64, MetricError> {
    if x.times() != y.times() {
        return Err(MetricError::GridMismatch);
    }
    rho_pvar_points(x.points(), y.points(), p)
}

/// Homogeneous p-variation distance `d_{p-var}` between aligned sequences.
pub fn hom_pvar_dist<P: Point>(a: &[P], b: &[P], p: f64) -> Result<f64, MetricError> {
    check_p(p)?;
    if a.len() != b.len() {
        return Err(MetricError::GridMismatch);
    }
    let s = partition_dp(a.len(), |i, j| P::increment_dist(&a[i], &a[j], &b[i], &b[j]).powf(p));
    Ok(s.powf(1.0 / p))
}

/// `d_0 = max_{i<j} d(a_{i,j}, b_{i,j})` between aligned sequences.
pub fn d0_dist<P: Point>(a: &[P], b: &[P]) -> f64 {
    let n = a.len().min(b.len());
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            m = m.max(P::increment_dist(&a[i], &a[j], &b[i], &b[j]));
        }
    }
    m
}

/// `d_∞ = max_i d(a_i, b_i)`.
pub fn sup_dist<P: Point>(a: &[P], b: &[P]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(x.dist(y)))
}

/// Path-space distance combined with `|λ|` in the Skorokhod-type metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Norm {
    /// Uniform distance: `σ_∞`, `α_∞`.
    Sup,
    /// Inhomogeneous p-variation distance: `σ_{p-var}`, `α_{p-var}`.
    PVar(f64),
    /// Homogeneous `d_0`: `α_0`.
    Zero,
    /// Homogeneous p-variation distance: `β_{p-var}`.
    HomPVar(f64),
}

impl Norm {
    fn name(&self) -> String {
        match self {
            Norm::Sup => "sup".into(),
            Norm::PVar(p) => format!("rho_{p}-var"),
            Norm::Zero => "d0".into(),
            Norm::HomPVar(p) => format!("d_{p}-var"),
        }
    }

    fn evaluate<P: Point>(&self, a: &[P], b: &[P]) -> Result<f64, MetricError> {
        match *self {
            Norm::Sup => Ok(sup_dist(a, b)),
            Norm::PVar(p) => rho_pvar_points(a, b, p),
            Norm::Zero => Ok(d0_dist(a, b)),
            Norm::HomPVar(p) => hom_pvar_dist(a, b, p),
        }
    }
}

/// Monotone matching of two sample grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    /// `max |t_i − s_j|` over matched pairs.
    pub lambda: f64,
}

impl Alignment {
    fn from_pairs(pairs: Vec<(usize, usize)>, tx: &[f64], ty: &[f64]) -> Self {
        let lambda = pairs.iter().fold(0.0, |m: f64, &(i, j)| m.max((tx[i] - ty[j]).abs()));
        Self { pairs, lambda }
    }

    /// The two aligned sequences.
    pub fn sequences<P: Clone>(&self, x: &[P], y: &[P]) -> (Vec<P>, Vec<P>) {
        self.pairs.iter().map(|&(i, j)| (x[i].clone(), y[j].clone())).unzip()
    }
}

/// Result of a distance estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    /// Estimate; for α metrics the value at the finest `δ`.
    pub value: f64,
    /// `|λ|` of the alignment attaining `value`.
    pub lambda: f64,
    #[serde(skip)]
    pub alignment: Option<Alignment>,
    /// `δ` levels and the per-level estimates (α metrics only).
    pub deltas: Vec<f64>,
    pub sequence: Vec<f64>,
    /// `max(0, 2σ(δ_min) − σ(2δ_min))` (α metrics only).
    pub extrapolated: Option<f64>,
    /// Whether the per-level estimates are non-increasing.
    pub monotone: Option<bool>,
    /// Always true: the search is restricted to grid alignments.
    pub upper_bound: bool,
}

/// Resolution of the alignment search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaOptions {
    /// Continuous segments are split to at most `T / time_divisions` in time.
    pub time_divisions: usize,
    /// and to at most `diam / value_divisions` in distance.
    pub value_divisions: usize,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self { time_divisions: 256, value_divisions: 256 }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Move {
    Start,
    Down,
    Right,
    Diag,
}

struct Grid<'a, P> {
    tx: &'a [f64],
    ty: &'a [f64],
    x: &'a [P],
    y: &'a [P],
}

impl<P: Point> Grid<'_, P> {
    fn jump_x(&self, i: usize) -> bool {
        self.tx[i] == self.tx[i - 1]
    }

    fn jump_y(&self, j: usize) -> bool {
        self.ty[j] == self.ty[j - 1]
    }

    fn diag_ok(&self, i: usize, j: usize) -> bool {
        self.jump_x(i) == self.jump_y(j)
    }

    /// Lattice-path DP. `combine(prev, here)` folds costs along the path;
    /// states compare lexicographically on `(cost, lambda)`.
    fn search(
        &self,
        local: impl Fn(usize, usize) -> f64,
        combine: impl Fn(f64, f64) -> f64,
    ) -> Vec<(usize, usize)> {
        let (n, m) = (self.x.len(), self.y.len());
        let mut moves = vec![Move::Start; n * m];
        let inf = (f64::INFINITY, f64::INFINITY);
        let mut prev = vec![inf; m];
        let mut cur = vec![inf; m];
        let better = |a: (f64, f64), b: (f64, f64)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
        for i in 0..n {
            for j in 0..m {
                let c = local(i, j);
                let lam = (self.tx[i] - self.ty[j]).abs();
                if i == 0 && j == 0 {
                    cur[0] = (combine(0.0, c), lam);
                    continue;
                }
                let mut best = inf;
                let mut mv = Move::Start;
                let mut offer = |from: (f64, f64), step: Move| {
                    let cand = (combine(from.0, c), from.1.max(lam));
                    if better(cand, best) {
                        best = cand;
                        mv = step;
                    }
                };
                if i > 0 && j > 0 && self.diag_ok(i, j) {
                    offer(prev[j - 1], Move::Diag);
                }
                if i > 0 {
                    offer(prev[j], Move::Down);
                }
                if j > 0 {
                    offer(cur[j - 1], Move::Right);
                }
                cur[j] = best;
                moves[i * m + j] = mv;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        let (mut i, mut j) = (n - 1, m - 1);
        let mut pairs = vec![(i, j)];
        while i > 0 || j > 0 {
            match moves[i * m + j] {
                Move::Diag => {
                    i -= 1;
                    j -= 1;
                }
                Move::Down => i -= 1,
                Move::Right => j -= 1,
                Move::Start => unreachable!("lattice path always reaches the origin"),
            }
            pairs.push((i, j));
        }
        pairs.reverse();
        pairs
    }

    fn bottleneck(&self, weight: f64) -> Alignment {
        let pairs = self.search(
            |i, j| (self.tx[i] - self.ty[j]).abs().max(weight * self.x[i].dist(&self.y[j])),
            f64::max,
        );
        Alignment::from_pairs(pairs, self.tx, self.ty)
    }

    fn dtw(&self) -> Alignment {
        let pairs = self.search(
            |i, j| self.x[i].dist(&self.y[j]) + (self.tx[i] - self.ty[j]).abs(),
            |a, b| a + b,
        );
        Alignment::from_pairs(pairs, self.tx, self.ty)
    }

    /// Advances through both grids in time order.
    fn time_matched(&self) -> Alignment {
        let (n, m) = (self.x.len(), self.y.len());
        let (mut i, mut j) = (0, 0);
        let mut pairs = vec![(0, 0)];
        while i + 1 < n || j + 1 < m {
            let step = if i + 1 == n {
                Move::Right
            } else if j + 1 == m {
                Move::Down
            } else {
                let (a, b) = (self.tx[i + 1], self.ty[j + 1]);
                if a < b {
                    Move::Down
                } else if b < a {
                    Move::Right
                } else if self.diag_ok(i + 1, j + 1) {
                    Move::Diag
                } else if self.jump_x(i + 1) {
                    Move::Down
                } else {
                    Move::Right
                }
            };
            match step {
                Move::Down => i += 1,
                Move::Right => j += 1,
                _ => {
                    i += 1;
                    j += 1;
                }
            }
            pairs.push((i, j));
        }
        Alignment::from_pairs(pairs, self.tx, self.ty)
    }
}

fn diameter_bound<P: Point>(x: &CadlagPath<P>, y: &CadlagPath<P>) -> f64 {
    let o = x.first();
    let r = x.values().iter().chain(y.values()).fold(0.0f64, |m, v| m.max(o.dist(v)));
    2.0 * r
}

fn prepare<P: Point>(
    x: &CadlagPath<P>,
    y: &CadlagPath<P>,
    opts: &SigmaOptions,
) -> Result<(CadlagPath<P>, CadlagPath<P>), MetricError> {
    if x.dim() != y.dim() {
        return Err(MetricError::DimensionMismatch(x.dim(), y.dim()));
    }
    let (tx, ty) = (x.horizon(), y.horizon());
    if (tx - ty).abs() > 1e-12 * tx.max(1.0) {
        return Err(MetricError::HorizonMismatch(tx, ty));
    }
    if opts.time_divisions == 0 || opts.value_divisions == 0 {
        return Err(MetricError::InvalidOption("divisions must be positive".into()));
    }
    let time_res = tx / opts.time_divisions as f64;
    let value_res = diameter_bound(x, y) / opts.value_divisions as f64;
    Ok((
        x.extended_to_horizon().densify(time_res, value_res),
        y.extended_to_horizon().densify(time_res, value_res),
    ))
}

/// Skorokhod-type distance `inf_λ max(|λ|, ‖x∘λ − y‖)` restricted to grid
/// alignments of the densified paths.
///
/// For [`Norm::Sup`] the bottleneck alignment is optimal among all grid
/// alignments. For the variation norms the minimum is taken over a family
/// of candidates: bottleneck alignments with several value weights, the
/// time-ordered merge and a dynamic-time-warping alignment.
pub fn sigma_estimate<P: Point>(
    x: &CadlagPath<P>,
    y: &CadlagPath<P>,
    norm: Norm,
    opts: &SigmaOptions,
) -> Result<MetricReport, MetricError> {
    if let Norm::PVar(p) | Norm::HomPVar(p) = norm {
        check_p(p)?;
    }
    let (xd, yd) = prepare(x, y, opts)?;
    let grid = Grid { tx: xd.times(), ty: yd.times(), x: xd.values(), y: yd.values() };
    let sup_best = grid.bottleneck(1.0);
    let (value, best) = if norm == Norm::Sup {
        let (a, b) = sup_best.sequences(grid.x, grid.y);
        (sup_best.lambda.max(sup_dist(&a, &b)), sup_best)
    } else {
        let mut candidates = vec![sup_best, grid.bottleneck(0.25), grid.bottleneck(4.0), grid.time_matched()];
        candidates.push(grid.dtw());
        let mut best: Option<(f64, Alignment)> = None;
        for c in candidates {
            let (a, b) = c.sequences(grid.x, grid.y);
            let v = c.lambda.max(norm.evaluate(&a, &b)?);
            let replace = match &best {
                None => true,
                Some((bv, bc)) => v < *bv || (v == *bv && c.lambda < bc.lambda),
            };
            if replace {
                best = Some((v, c));
            }
        }
        best.expect("non-empty candidate list")
    };
    Ok(MetricReport {
        metric: format!("sigma[{}]", norm.name()),
        value,
        lambda: best.lambda,
        alignment: Some(best),
        deltas: vec![],
        sequence: vec![],
        extrapolated: None,
        monotone: None,
        upper_bound: true,
    })
}

/// Options for [`alpha_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOptions {
    /// Number of dyadic levels `δ = 1, ½, …, 2^{1−levels}`.
    pub levels: usize,
    pub sigma: SigmaOptions,
    /// Samples per jump window; `None` uses each path function's default.
    pub samples: Option<usize>,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self { levels: 4, sigma: SigmaOptions::default(), samples: None }
    }
}

/// `α`-type distance: the Skorokhod-type distance between the interpolants
/// `x^{φ,δ}` and `y^{φ̄,δ}` along a dyadic `δ` ladder.
pub fn alpha_estimate<P: Point>(
    x: &CadlagPath<P>,
    phi: &PathFunction,
    y: &CadlagPath<P>,
    phi_bar: &PathFunction,
    norm: Norm,
    opts: &AlphaOptions,
) -> Result<MetricReport, MetricError> {
    if opts.levels == 0 {
        return Err(MetricError::InvalidOption("at least one delta level".into()));
    }
    let mut deltas = Vec::with_capacity(opts.levels);
    let mut sequence = Vec::with_capacity(opts.levels);
    let mut last = None;
    for k in 0..opts.levels {
        let delta = 0.5f64.powi(k as i32);
        let io = InterpOptions { delta, samples: opts.samples, ..InterpOptions::default() };
        let xi = interpolate(x, phi, io)?;
        let yi = interpolate(y, phi_bar, io)?;
        let r = sigma_estimate(&xi.path, &yi.path, norm, &opts.sigma)?;
        deltas.push(delta);
        sequence.push(r.value);
        last = Some(r);
    }
    let last = last.expect("at least one level");
    let n = sequence.len();
    let extrapolated = (n >= 2).then(|| (2.0 * sequence[n - 1] - sequence[n - 2]).max(0.0));
    let monotone = Some(sequence.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    Ok(MetricReport {
        metric: format!("alpha[{}]", norm.name()),
        value: sequence[n - 1],
        lambda: last.lambda,
        alignment: last.alignment,
        deltas,
        sequence,
        extrapolated,
        monotone,
        upper_bound: true,
    })
}

/// Number of greedy stopping times at which the running window diameter
/// exceeds `delta`.
pub fn oscillation_count<P>(points: &[P], delta: f64, dist: &impl Fn(&P, &P) -> f64) -> usize {
    let mut count = 0;
    let mut start = 0;
    let mut diam: f64 = 0.0;
    let mut k = 1;
    while k < points.len() {
        for u in start..k {
            diam = diam.max(dist(&points[u], &points[k]));
        }
        if diam > delta {
            count += 1;
            start = k;
            diam = 0.0;
        }
        k += 1;
    }
    count
}

/// Oscillation-count bound `(Σ_k 2^{p(k+1)} ν(2^k))^{1/p} ≥ ‖x‖_{p-var}`
/// with a generic distance. Below the smallest positive pairwise distance
/// `ν` is constant and the tail is summed in closed form.
pub fn osc_count_bound_with<P>(points: &[P], p: f64, dist: impl Fn(&P, &P) -> f64) -> Result<f64, MetricError> {
    check_p(p)?;
    let n = points.len();
    let (mut min_pos, mut diam) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&points[i], &points[j]);
            if d > 0.0 {
                min_pos = min_pos.min(d);
            }
            diam = diam.max(d);
        }
    }
    if diam == 0.0 {
        return Ok(0.0);
    }
    // Largest k with 2^k < min_pos; every positive distance exceeds 2^k.
    let mut k0 = min_pos.log2().floor() as i32;
    while 2f64.powi(k0) >= min_pos {
        k0 -= 1;
    }
    let tail_count = oscillation_count(points, 2f64.powi(k0), &dist) as f64;
    let mut total = tail_count * 2f64.powf(p * (k0 + 1) as f64) / (1.0 - 2f64.powf(-p));
    let mut k = k0 + 1;
    while 2f64.powi(k) < diam {
        let nu = oscillation_count(points, 2f64.powi(k), &dist) as f64;
        total += 2f64.powf(p * (k + 1) as f64) * nu;
        k += 1;
    }
    Ok(total.powf(1.0 / p))
}

/// Oscillation-count bound for a rough path under the homogeneous metric.
pub fn osc_count_bound(x: &RoughPath2, p: f64) -> Result<f64, MetricError> {
    osc_count_bound_with(x.points(), p, |a, b| a.hom_dist(b))
}
