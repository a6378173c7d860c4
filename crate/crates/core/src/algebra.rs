//! Step-2 truncated tensor algebra `T²(ℝᵈ)`, the free nilpotent group
//! `G²(ℝᵈ)` and its Lie algebra.
//!
//! A group element stores its level-1 increment `vec` and the full level-2
//! tensor `mat` (row-major `d×d`). Geometricity means `sym(mat) = ½ vec⊗vec`,
//! so all the information beyond the increment lives in the antisymmetric
//! part, the *area*. Lie elements store that area as the strict upper
//! triangle of an antisymmetric matrix.
//!
//! Distances use the homogeneous norm
//! `N(g) = max(|g.vec|, (2·|area(g)|)^{1/2})`, where `|area|` is the
//! Euclidean norm of the strict upper triangle. It is subadditive, symmetric
//! under inversion and homogeneous under dilation, and is equivalent (not
//! equal) to the Carnot–Carathéodory norm.

use std::fmt;
use std::ops::Mul;

use thiserror::Error;

/// Largest supported dimension.
pub const MAX_DIM: usize = 16;

const GEOMETRIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {0} outside the supported range 1..={MAX_DIM}")]
    UnsupportedDimension(usize),
    #[error("component length {got} does not match dimension {dim}")]
    BadLength { dim: usize, got: usize },
    #[error("element is not geometric: symmetric defect {defect:.3e}")]
    NotGeometric { defect: f64 },
}

fn check_dim(dim: usize) -> Result<(), AlgebraError> {
    if dim == 0 || dim > MAX_DIM {
        Err(AlgebraError::UnsupportedDimension(dim))
    } else {
        Ok(())
    }
}

/// Index of `(i, j)`, `i < j`, in a packed strict upper triangle.
#[inline]
pub(crate) fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

#[inline]
fn tri_len(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// General element of `T²(ℝᵈ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub scalar: f64,
    pub vec: Vec<f64>,
    pub mat: Vec<f64>,
}

impl Tensor2 {
    pub fn zero(dim: usize) -> Self {
        Self { scalar: 0.0, vec: vec![0.0; dim], mat: vec![0.0; dim * dim] }
    }

    pub fn one(dim: usize) -> Self {
        Self { scalar: 1.0, ..Self::zero(dim) }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            scalar: self.scalar + other.scalar,
            vec: self.vec.iter().zip(&other.vec).map(|(a, b)| a + b).collect(),
            mat: self.mat.iter().zip(&other.mat).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            scalar: self.scalar * s,
            vec: self.vec.iter().map(|a| a * s).collect(),
            mat: self.mat.iter().map(|a| a * s).collect(),
        }
    }

    /// Truncated tensor product.
    pub fn tensor_mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        let d = self.dim();
        if other.dim() != d {
            return Err(AlgebraError::DimensionMismatch { left: d, right: other.dim() });
        }
        let (a0, b0) = (self.scalar, other.scalar);
        let vec = (0..d).map(|i| a0 * other.vec[i] + b0 * self.vec[i]).collect();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                mat[k] = a0 * other.mat[k] + b0 * self.mat[k] + self.vec[i] * other.vec[j];
            }
        }
        Ok(Self { scalar: a0 * b0, vec, mat })
    }
}

/// Point of `G²(ℝᵈ)`: level-1 increment and full level-2 tensor.
#[derive(Clone, PartialEq)]
pub struct G2Element {
    vec: Vec<f64>,
    mat: Vec<f64>,
}

impl fmt::Debug for G2Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("G2Element").field("vec", &self.vec).field("area", &self.area_upper()).finish()
    }
}

impl G2Element {
    pub fn identity(dim: usize) -> Self {
        Self { vec: vec![0.0; dim], mat: vec![0.0; dim * dim] }
    }

    /// Builds an element from raw components, checking geometricity.
    pub fn new(vec: Vec<f64>, mat: Vec<f64>) -> Result<Self, AlgebraError> {
        let d = vec.len();
        check_dim(d)?;
        if mat.len() != d * d {
            return Err(AlgebraError::BadLength { dim: d, got: mat.len() });
        }
        let defect = symmetric_defect(&vec, &mat);
        if defect > GEOMETRIC_TOL * geometric_scale(&vec, &mat) {
            return Err(AlgebraError::NotGeometric { defect });
        }
        Ok(Self { vec, mat })
    }

    /// `exp(v)` for a pure level-1 vector.
    pub fn from_increment(v: &[f64]) -> Self {
        let d = v.len();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                mat[i * d + j] = 0.5 * v[i] * v[j];
            }
        }
        Self { vec: v.to_vec(), mat }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    /// Full level-2 tensor, row-major.
    pub fn mat(&self) -> &[f64] {
        &self.mat
    }

    pub fn to_tensor(&self) -> Tensor2 {
        Tensor2 { scalar: 1.0, vec: self.vec.clone(), mat: self.mat.clone() }
    }

    /// Antisymmetric part of level 2 at `(i, j)`.
    #[inline]
    pub fn area(&self, i: usize, j: usize) -> f64 {
        let d = self.dim();
        0.5 * (self.mat[i * d + j] - self.mat[j * d + i])
    }

    /// Packed strict upper triangle of the area.
    pub fn area_upper(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(tri_len(d));
        for i in 0..d {
            for j in i + 1..d {
                out.push(self.area(i, j));
            }
        }
        out
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        let d = self.dim();
        if rhs.dim() != d {
            return Err(AlgebraError::DimensionMismatch { left: d, right: rhs.dim() });
        }
        let vec = self.vec.iter().zip(&rhs.vec).map(|(a, b)| a + b).collect();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                mat[k] = self.mat[k] + rhs.mat[k] + self.vec[i] * rhs.vec[j];
            }
        }
        Ok(Self { vec, mat })
    }

    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let vec = self.vec.iter().map(|a| -a).collect();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                mat[k] = self.vec[i] * self.vec[j] - self.mat[k];
            }
        }
        Self { vec, mat }
    }

    /// `self⁻¹ ⊗ other`.
    pub fn increment_to(&self, other: &Self) -> Self {
        let d = self.dim();
        assert_eq!(d, other.dim(), "dimension mismatch");
        let vec = other.vec.iter().zip(&self.vec).map(|(b, a)| b - a).collect();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                mat[k] = self.vec[i] * self.vec[j] - self.mat[k] + other.mat[k]
                    - self.vec[i] * other.vec[j];
            }
        }
        Self { vec, mat }
    }

    /// Dilation `δ_λ`: level 1 scales by `λ`, level 2 by `λ²`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            vec: self.vec.iter().map(|a| a * lambda).collect(),
            mat: self.mat.iter().map(|a| a * lambda * lambda).collect(),
        }
    }

    pub fn log(&self) -> Lie2Element {
        Lie2Element { vec: self.vec.clone(), area: self.area_upper() }
    }

    /// Checked logarithm: rejects raw tensors violating geometricity.
    pub fn try_log(vec: &[f64], mat: &[f64]) -> Result<Lie2Element, AlgebraError> {
        Ok(Self::new(vec.to_vec(), mat.to_vec())?.log())
    }

    /// Homogeneous norm `N(g)`.
    pub fn hom_norm(&self) -> f64 {
        let d = self.dim();
        let v = norm2(&self.vec);
        let mut a2 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let a = self.area(i, j);
                a2 += a * a;
            }
        }
        v.max((2.0 * a2.sqrt()).sqrt())
    }

    /// `N(self⁻¹ ⊗ other)`, computed without allocating.
    pub fn hom_dist(&self, other: &Self) -> f64 {
        let d = self.dim();
        let mut v2 = 0.0;
        for i in 0..d {
            let dv = other.vec[i] - self.vec[i];
            v2 += dv * dv;
        }
        let mut a2 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let a = other.area(i, j)
                    - self.area(i, j)
                    - 0.5 * (self.vec[i] * other.vec[j] - self.vec[j] * other.vec[i]);
                a2 += a * a;
            }
        }
        v2.sqrt().max((2.0 * a2.sqrt()).sqrt())
    }

    /// Frobenius distance between level-2 tensors, used by the inhomogeneous metric.
    pub fn level2_dist(&self, other: &Self) -> f64 {
        norm2_diff(&self.mat, &other.mat)
    }

    pub fn level1_dist(&self, other: &Self) -> f64 {
        norm2_diff(&self.vec, &other.vec)
    }

    /// Point on the geodesic `self ⊗ exp(s·log(self⁻¹ ⊗ other))`.
    pub fn geodesic(&self, other: &Self, s: f64) -> Self {
        let step = self.increment_to(other).log().scale(s).exp();
        self * &step
    }

    pub fn symmetric_defect(&self) -> f64 {
        symmetric_defect(&self.vec, &self.mat)
    }

    pub fn is_finite(&self) -> bool {
        self.vec.iter().chain(&self.mat).all(|a| a.is_finite())
    }

    /// Linear image under the block-sum map `ℝ^{2d} → ℝ^d`, `(x, h) ↦ x + h`.
    pub(crate) fn plus_blocks(&self) -> Self {
        let d2 = self.dim();
        assert!(d2.is_multiple_of(2), "plus map needs an even dimension");
        let d = d2 / 2;
        let vec = (0..d).map(|i| self.vec[i] + self.vec[i + d]).collect();
        let mut mat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                mat[i * d + j] = self.mat[i * d2 + j]
                    + self.mat[i * d2 + j + d]
                    + self.mat[(i + d) * d2 + j]
                    + self.mat[(i + d) * d2 + j + d];
            }
        }
        Self { vec, mat }
    }
}

impl Mul<&G2Element> for &G2Element {
    type Output = G2Element;

    /// Panics on dimension mismatch; see [`G2Element::checked_mul`].
    fn mul(self, rhs: &G2Element) -> G2Element {
        self.checked_mul(rhs).expect("dimension mismatch in group product")
    }
}

fn symmetric_defect(vec: &[f64], mat: &[f64]) -> f64 {
    let d = vec.len();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let sym = 0.5 * (mat[i * d + j] + mat[j * d + i]);
            worst = worst.max((sym - 0.5 * vec[i] * vec[j]).abs());
        }
    }
    worst
}

fn geometric_scale(vec: &[f64], mat: &[f64]) -> f64 {
    let v = vec.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let m = mat.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    1.0_f64.max(v * v).max(m)
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Element of the step-2 free nilpotent Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Lie2Element {
    vec: Vec<f64>,
    area: Vec<f64>,
}

impl Lie2Element {
    pub fn zero(dim: usize) -> Self {
        Self { vec: vec![0.0; dim], area: vec![0.0; tri_len(dim)] }
    }

    /// `area` is the packed strict upper triangle (row-major over `i < j`).
    pub fn new(vec: Vec<f64>, area: Vec<f64>) -> Result<Self, AlgebraError> {
        let d = vec.len();
        check_dim(d)?;
        if area.len() != tri_len(d) {
            return Err(AlgebraError::BadLength { dim: d, got: area.len() });
        }
        Ok(Self { vec, area })
    }

    pub fn from_vec(vec: Vec<f64>) -> Self {
        let d = vec.len();
        Self { vec, area: vec![0.0; tri_len(d)] }
    }

    /// Builds from a full matrix, keeping only its antisymmetric part.
    pub fn from_area_matrix(vec: Vec<f64>, area: &[f64]) -> Self {
        let d = vec.len();
        let mut packed = Vec::with_capacity(tri_len(d));
        for i in 0..d {
            for j in i + 1..d {
                packed.push(0.5 * (area[i * d + j] - area[j * d + i]));
            }
        }
        Self { vec, area: packed }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn area_upper(&self) -> &[f64] {
        &self.area
    }

    /// Signed area component; `area(j, i) = -area(i, j)`.
    pub fn area(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.area[tri_index(self.dim(), i, j)],
            Greater => -self.area[tri_index(self.dim(), j, i)],
            Equal => 0.0,
        }
    }

    pub fn area_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in i + 1..d {
                let a = self.area[tri_index(d, i, j)];
                m[i * d + j] = a;
                m[j * d + i] = -a;
            }
        }
        m
    }

    pub fn area_norm(&self) -> f64 {
        norm2(&self.area)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            vec: self.vec.iter().zip(&other.vec).map(|(a, b)| a + b).collect(),
            area: self.area.iter().zip(&other.area).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            vec: self.vec.iter().map(|a| a * s).collect(),
            area: self.area.iter().map(|a| a * s).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn exp(&self) -> G2Element {
        let d = self.dim();
        let mut g = G2Element::from_increment(&self.vec);
        for i in 0..d {
            for j in i + 1..d {
                let a = self.area[tri_index(d, i, j)];
                g.mat[i * d + j] += a;
                g.mat[j * d + i] -= a;
            }
        }
        g
    }

    /// Baker–Campbell–Hausdorff product, exact at step 2:
    /// `a + b + ½[a, b]`.
    pub fn cbh(&self, other: &Self) -> Result<Self, AlgebraError> {
        let d = self.dim();
        if other.dim() != d {
            return Err(AlgebraError::DimensionMismatch { left: d, right: other.dim() });
        }
        let mut out = self.add(other);
        for i in 0..d {
            for j in i + 1..d {
                out.area[tri_index(d, i, j)] +=
                    0.5 * (self.vec[i] * other.vec[j] - self.vec[j] * other.vec[i]);
            }
        }
        Ok(out)
    }
}

/// `exp2` as a free function.
pub fn exp2(l: &Lie2Element) -> G2Element {
    l.exp()
}

/// `log2` as a free function.
pub fn log2(g: &G2Element) -> Lie2Element {
    g.log()
}

/// Left-invariant homogeneous distance `N(g⁻¹ ⊗ h)`.
pub fn hom_dist(g: &G2Element, h: &G2Element) -> f64 {
    g.hom_dist(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn product_of_basis_exponentials() {
        let g = G2Element::from_increment(&e(2, 0));
        let h = G2Element::from_increment(&e(2, 1));
        let k = &g * &h;
        assert_eq!(k.vec(), &[1.0, 1.0]);
        // ½e₁⊗e₁ + e₁⊗e₂ + ½e₂⊗e₂
        assert_eq!(k.mat(), &[0.5, 1.0, 0.0, 0.5]);
        let l = k.log();
        assert_eq!(l.area(0, 1), 0.5);
        assert_eq!(l.area(1, 0), -0.5);
    }

    #[test]
    fn identity_and_inverse() {
        let id = G2Element::identity(3);
        assert_eq!(id.inverse(), id);
        let v = [0.3, -1.2, 2.0];
        let g = G2Element::from_increment(&v);
        let minus: Vec<f64> = v.iter().map(|a| -a).collect();
        assert_eq!(g.inverse(), G2Element::from_increment(&minus));
        assert_eq!(&g * &id, g);
    }

    #[test]
    fn log_rejects_non_geometric() {
        let err = G2Element::try_log(&[1.0, 0.0], &[0.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, AlgebraError::NotGeometric { .. }));
        assert!(G2Element::try_log(&[1.0, 0.0], &[0.5, 0.3, -0.3, 0.0]).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let g = G2Element::identity(2);
        let h = G2Element::identity(3);
        assert!(matches!(g.checked_mul(&h), Err(AlgebraError::DimensionMismatch { .. })));
        assert!(Lie2Element::zero(2).cbh(&Lie2Element::zero(3)).is_err());
        assert!(matches!(
            G2Element::new(vec![0.0; 17], vec![0.0; 289]),
            Err(AlgebraError::UnsupportedDimension(17))
        ));
    }

    #[test]
    fn cbh_basis() {
        let a = Lie2Element::from_vec(e(2, 0));
        let b = Lie2Element::from_vec(e(2, 1));
        let c = a.cbh(&b).unwrap();
        assert_eq!(c.vec(), &[1.0, 1.0]);
        assert_eq!(c.area(0, 1), 0.5);
        let z = a.cbh(&a.neg()).unwrap();
        assert_eq!(z, Lie2Element::zero(2));
        assert_eq!(a.cbh(&Lie2Element::zero(2)).unwrap(), a);
    }

    #[test]
    fn norm_normalization() {
        assert_eq!(G2Element::from_increment(&e(2, 0)).hom_norm(), 1.0);
        let pure_area = Lie2Element::new(vec![0.0, 0.0], vec![0.5]).unwrap().exp();
        assert!((pure_area.hom_norm() - 1.0).abs() < 1e-15);
        let g = pure_area;
        assert_eq!(g.hom_dist(&g), 0.0);
        assert_eq!(Lie2Element::zero(4).exp(), G2Element::identity(4));
    }

    #[test]
    fn plus_map_adds_blocks() {
        // (x, h) = (e₁, e₁) in ℝ^{1+1}: plus gives 2e₁ with level 2 = 2.
        let g = G2Element::from_increment(&[1.0, 1.0]);
        let p = g.plus_blocks();
        assert_eq!(p.vec(), &[2.0]);
        assert_eq!(p.mat(), &[2.0]);
    }
}
