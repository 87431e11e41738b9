//! Dense symmetric matrices, the scaled Frobenius geometry and the projection
//! weighting matrices.
//!
//! Every estimator in this crate is linear in the sample covariance, so the
//! quadratic form `vᵀ Ŝ v` of any of them is a Frobenius dot `ν · Σ̂` against a
//! fixed weighting matrix `ν` that depends only on `v` and the thresholds.
//! [`ProjectionWeights`] holds the three weighting matrices (sample, tapered,
//! Toeplitz) and evaluates those dots in `O(d·τ)` for rank-one inputs.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimators::taper_weight;

/// Relative tolerance used when accepting user-supplied matrices as symmetric.
const SYMMETRY_TOL: f64 = 1e-10;

/// Dense symmetric `d×d` matrix.
///
/// Storage is full row-major; every mutator writes both `(i, j)` and `(j, i)`
/// so the two triangles are bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "SymMatrix dimension must be positive");
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = x;
        }
        m
    }

    /// Build from a function of `(i, j)`; only `i <= j` is evaluated.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let x = f(i, j);
                m.data[i * dim + j] = x;
                m.data[j * dim + i] = x;
            }
        }
        m
    }

    /// Build from a Toeplitz profile: entry `(i, j)` is `profile[|i - j|]`.
    pub fn toeplitz(profile: &[f64]) -> Self {
        Self::from_fn(profile.len(), |i, j| profile[j - i])
    }

    /// Build from a full row-major buffer, which must be symmetric up to a
    /// relative `1e-10`. The upper triangle is kept.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(CovError::invalid("matrix dimension must be positive"));
        }
        if data.len() != dim * dim {
            return Err(CovError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CovError::NonFinite("matrix entries"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(CovError::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| data[i * dim + j]))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut flat = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(CovError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(dim, &flat)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Full row-major view.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(CovError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Unscaled Frobenius dot `Σᵢⱼ AᵢⱼBᵢⱼ`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Entrywise l1 norm `Σᵢⱼ |Aᵢⱼ|`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Sum of the `lag`-th subdiagonal, `Σᵢ A[i + lag, i]`.
    pub fn diagonal_sum(&self, lag: usize) -> f64 {
        (0..self.dim.saturating_sub(lag))
            .map(|i| self.data[(i + lag) * self.dim + i])
            .sum()
    }

    /// Multiply every entry by a factor depending on its lag `|i - j|`.
    pub fn scale_by_lag(&self, mut factor: impl FnMut(usize) -> f64) -> SymMatrix {
        let factors: Vec<f64> = (0..self.dim).map(&mut factor).collect();
        SymMatrix::from_fn(self.dim, |i, j| self.get(i, j) * factors[j - i])
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        Ok(SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &SymMatrix) -> Result<()> {
        self.check_dim(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    /// `self += factor * x xᵀ`.
    pub fn add_outer(&mut self, factor: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        for i in 0..d {
            let fi = factor * x[i];
            for j in i..d {
                let v = self.data[i * d + j] + fi * x[j];
                self.data[i * d + j] = v;
                self.data[j * d + i] = v;
            }
        }
    }

    /// Exact Toeplitz predicate: every diagonal is constant.
    pub fn is_toeplitz(&self) -> bool {
        (0..self.dim).all(|lag| {
            let first = self.get(lag, 0);
            (0..self.dim - lag).all(|i| self.get(i + lag, i) == first)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Scaled inner product `⟨A, B⟩_* = A·B / d`.
pub fn scaled_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(a.frobenius_dot(b)? / a.dim() as f64)
}

/// Scaled Frobenius norm `‖A‖_{F*}`; the identity has norm one in every dimension.
pub fn scaled_norm(a: &SymMatrix) -> f64 {
    // dims agree trivially
    scaled_inner(a, a).map(f64::sqrt).unwrap_or(f64::NAN)
}

/// Squared scaled distance `‖A − B‖²_{F*}`.
pub fn scaled_sq_dist(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_dim(b)?;
    let ss: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(ss / a.dim() as f64)
}

/// Projection direction `v` with its cached l1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionVector {
    coords: Vec<f64>,
    l1_norm: f64,
}

impl ProjectionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CovError::invalid("projection vector must be non-empty"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(CovError::NonFinite("projection vector"));
        }
        let l1_norm: f64 = coords.iter().map(|x| x.abs()).sum();
        if l1_norm <= 0.0 {
            return Err(CovError::invalid("projection vector has zero l1 norm"));
        }
        Ok(ProjectionVector { coords, l1_norm })
    }

    /// `e_k` in dimension `dim`.
    pub fn unit(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(CovError::invalid(format!("unit index {k} >= dim {dim}")));
        }
        let mut c = vec![0.0; dim];
        c[k] = 1.0;
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// Rescaled copy with unit l1 norm.
    pub fn normalized_l1(&self) -> Self {
        self.scaled(1.0 / self.l1_norm)
    }

    /// `c · v`; `c` must be nonzero and finite.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c.is_finite() && c != 0.0, "scale factor must be finite and nonzero");
        let coords: Vec<f64> = self.coords.iter().map(|x| x * c).collect();
        let l1_norm = coords.iter().map(|x| x.abs()).sum();
        ProjectionVector { coords, l1_norm }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coords.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Quadratic form `vᵀ A v`.
pub fn quad_form(v: &ProjectionVector, a: &SymMatrix) -> Result<f64> {
    if v.dim() != a.dim() {
        return Err(CovError::DimensionMismatch {
            expected: a.dim(),
            found: v.dim(),
        });
    }
    let c = v.coords();
    Ok((0..a.dim())
        .map(|i| c[i] * a.row(i).iter().zip(c).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

/// The weighting matrices `ν¹, ν², ν³` for a projection `v`.
///
/// `ν¹ = v vᵀ`, `ν²` tapers `ν¹` with threshold `tau_dagger`, and `ν³` averages
/// `ν¹` along each diagonal and tapers with `tau_diamond`, so that for every
/// symmetric `S`
///
/// ```text
/// vᵀ S v = ν¹·S,   vᵀ taper(S) v = ν²·S,   vᵀ toeplitz(S) v = ν³·S.
/// ```
#[derive(Debug, Clone)]
pub struct ProjectionWeights {
    pub nu1: SymMatrix,
    pub nu2: SymMatrix,
    pub nu3: SymMatrix,
    pub tau_dagger: f64,
    pub tau_diamond: f64,
    v: Vec<f64>,
    // ω(m, τ†) for m < d, truncated after the last nonzero lag
    taper: Vec<f64>,
    // Toeplitz profile of ν³, truncated after the last nonzero lag
    toeplitz: Vec<f64>,
}

/// Weighting matrices with one threshold shared by the tapered and Toeplitz parts.
pub fn build_projection_weights(v: &ProjectionVector, tau: f64) -> Result<ProjectionWeights> {
    ProjectionWeights::new(v, tau, tau)
}

impl ProjectionWeights {
    pub fn new(v: &ProjectionVector, tau_dagger: f64, tau_diamond: f64) -> Result<Self> {
        for (name, tau) in [("tau_dagger", tau_dagger), ("tau_diamond", tau_diamond)] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(CovError::OutOfRange {
                    what: name,
                    value: tau,
                    range: "(0, inf)".into(),
                });
            }
        }
        let d = v.dim();
        let c = v.coords();
        let mut taper: Vec<f64> = (0..d).map(|m| taper_weight(m as f64, tau_dagger)).collect();
        let mut toeplitz: Vec<f64> = (0..d)
            .map(|m| {
                let w = taper_weight(m as f64, tau_diamond);
                if w == 0.0 {
                    return 0.0;
                }
                let lag_sum: f64 = (0..d - m).map(|i| c[i + m] * c[i]).sum();
                w * lag_sum / (d - m) as f64
            })
            .collect();
        let nu1 = SymMatrix::from_fn(d, |i, j| c[i] * c[j]);
        let nu2 = SymMatrix::from_fn(d, |i, j| c[i] * c[j] * taper[j - i]);
        let nu3 = SymMatrix::toeplitz(&toeplitz);
        trim_trailing_zeros(&mut taper);
        trim_trailing_zeros(&mut toeplitz);
        Ok(ProjectionWeights {
            nu1,
            nu2,
            nu3,
            tau_dagger,
            tau_diamond,
            v: c.to_vec(),
            taper,
            toeplitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `[ν¹·S, ν²·S, ν³·S]`.
    pub fn dots(&self, s: &SymMatrix) -> Result<[f64; 3]> {
        if s.dim() != self.dim() {
            return Err(CovError::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        let v = &self.v;
        let d = v.len();
        let mut q1 = 0.0;
        let mut q2 = 0.0;
        for i in 0..d {
            let row = s.row(i);
            q1 += v[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            let mut banded = v[i] * row[i] * self.taper[0];
            for (m, &w) in self.taper.iter().enumerate().skip(1) {
                if i + m < d {
                    banded += 2.0 * w * v[i + m] * row[i + m];
                }
            }
            q2 += v[i] * banded;
        }
        let q3 = self
            .toeplitz
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                let mult = if m == 0 { 1.0 } else { 2.0 };
                mult * c * s.diagonal_sum(m)
            })
            .sum();
        Ok([q1, q2, q3])
    }

    /// `[ν^j · x xᵀ]ⱼ` in `O(d·τ)`.
    pub fn dots_outer(&self, x: &[f64]) -> [f64; 3] {
        debug_assert_eq!(x.len(), self.dim());
        let v = &self.v;
        let d = v.len();
        let proj: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
        let mut q2 = 0.0;
        for (m, &w) in self.taper.iter().enumerate() {
            let mult = if m == 0 { 1.0 } else { 2.0 };
            let lag: f64 = (0..d - m).map(|i| v[i + m] * x[i + m] * v[i] * x[i]).sum();
            q2 += mult * w * lag;
        }
        let mut q3 = 0.0;
        for (m, &c) in self.toeplitz.iter().enumerate() {
            let mult = if m == 0 { 1.0 } else { 2.0 };
            let lag: f64 = (0..d - m).map(|i| x[i + m] * x[i]).sum();
            q3 += mult * c * lag;
        }
        [proj * proj, q2, q3]
    }
}

fn trim_trailing_zeros(xs: &mut Vec<f64>) {
    while xs.len() > 1 && xs.last() == Some(&0.0) {
        xs.pop();
    }
}

/// Shrinkage weight on the unit simplex `{w ∈ [0,1]³ : w₁ + w₂ + w₃ = 1}`.
///
/// Serializes as the array `[w1, w2, w3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct Simplex3Weight {
    w: [f64; 3],
}

impl Simplex3Weight {
    /// Sample covariance only.
    pub const SAMPLE: Simplex3Weight = Simplex3Weight { w: [1.0, 0.0, 0.0] };
    pub const TAPERED: Simplex3Weight = Simplex3Weight { w: [0.0, 1.0, 0.0] };
    pub const TOEPLITZ: Simplex3Weight = Simplex3Weight { w: [0.0, 0.0, 1.0] };

    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let w = [w1, w2, w3];
        if w.iter().any(|x| !x.is_finite()) {
            return Err(CovError::NonFinite("shrinkage weight"));
        }
        if w.iter().any(|&x| x < 0.0) {
            return Err(CovError::invalid(format!("negative shrinkage weight {w:?}")));
        }
        if (w1 + w2 + w3 - 1.0).abs() > 1e-12 {
            return Err(CovError::invalid(format!(
                "shrinkage weights {w:?} do not sum to one"
            )));
        }
        Ok(Simplex3Weight { w })
    }

    /// Weight `(1 - w2 - w3, w2, w3)`; used by the optimizer, which already
    /// keeps `(w2, w3)` inside the triangle.
    pub(crate) fn from_tail(w2: f64, w3: f64) -> Self {
        let w2 = w2.clamp(0.0, 1.0);
        let w3 = w3.clamp(0.0, 1.0 - w2);
        Simplex3Weight {
            w: [(1.0 - w2 - w3).max(0.0), w2, w3],
        }
    }

    pub fn w1(&self) -> f64 {
        self.w[0]
    }
    pub fn w2(&self) -> f64 {
        self.w[1]
    }
    pub fn w3(&self) -> f64 {
        self.w[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.w
    }

    pub fn dot(&self, x: &[f64; 3]) -> f64 {
        self.w[0] * x[0] + self.w[1] * x[1] + self.w[2] * x[2]
    }
}

impl From<Simplex3Weight> for [f64; 3] {
    fn from(w: Simplex3Weight) -> Self {
        w.w
    }
}

impl TryFrom<[f64; 3]> for Simplex3Weight {
    type Error = CovError;
    fn try_from(w: [f64; 3]) -> Result<Self> {
        Simplex3Weight::new(w[0], w[1], w[2])
    }
}

/// Regular lattice on the simplex with the given step (`1/step` must be an
/// integer). Step 0.1 gives 66 points.
pub fn simplex_grid(step: f64) -> Result<Vec<Simplex3Weight>> {
    let m = (1.0 / step).round();
    if !(step > 0.0) || m < 1.0 || (m * step - 1.0).abs() > 1e-9 {
        return Err(CovError::invalid(format!(
            "grid step {step} does not divide 1"
        )));
    }
    let m = m as usize;
    let mut grid = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for i in (0..=m).rev() {
        for j in (0..=(m - i)).rev() {
            let k = m - i - j;
            grid.push(Simplex3Weight {
                w: [i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64],
            });
        }
    }
    Ok(grid)
}
