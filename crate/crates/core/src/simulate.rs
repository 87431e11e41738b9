//! Generators for the three simulation models.
//!
//! * Model A: `Xₜ = aΠXₜ₋₁ + bₜεₜ + εₜ₋₁` with symmetrized-Gamma innovations
//!   whose shape `2 + sin(2πt/n)` drifts over time. Second moments are
//!   stationary while higher moments are not.
//! * Models B and C: `Xₜ = aXₜ₋₁ + bₜεₜ + εₜ₋₁` with `εₜ ~ N(0, A)` and
//!   `Aᵢⱼ = γ(tᵢ − tⱼ)`, where `γ` is the fractional Gaussian noise
//!   autocovariance. Model B uses `tᵢ = i` (Toeplitz `A`), Model C uses
//!   `tᵢ = √i`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimators::TimeSeriesSample;
use crate::linalg::{ProjectionVector, SymMatrix};
use crate::rng::{self, SimRng};

const BURN_IN: usize = 200;

/// `γ(h) = |h+1|^{2H} + |h−1|^{2H} − 2|h|^{2H}`, so `γ(0) = 2`.
pub fn fgn_autocov(h: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    let e = 2.0 * hurst;
    Ok((h + 1.0).abs().powf(e) + (h - 1.0).abs().powf(e) - 2.0 * h.abs().powf(e))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(CovError::OutOfRange {
            what: "hurst",
            value: hurst,
            range: "(0, 1)".into(),
        })
    }
}

fn check_ar(a: f64) -> Result<()> {
    if a.abs() < 1.0 {
        Ok(())
    } else {
        Err(CovError::OutOfRange {
            what: "a_coef",
            value: a,
            range: "(-1, 1)".into(),
        })
    }
}

/// Positions `tᵢ` entering the scale matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    /// `tᵢ = i`
    #[default]
    Toeplitz,
    /// `tᵢ = √i`
    Sqrt,
}

impl Spacing {
    fn position(self, i: usize) -> f64 {
        let i = (i + 1) as f64;
        match self {
            Spacing::Toeplitz => i,
            Spacing::Sqrt => i.sqrt(),
        }
    }
}

/// Distribution of `X₀` for Models B and C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Exact stationary draw of `X₀` jointly with `ε₀`.
    #[default]
    Stationary,
    /// `X₀ ~ N(0, A(1+b²)/(1−a²))`, independent of `ε₀`.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAConfig {
    pub n: usize,
    pub d: usize,
    pub a_coef: f64,
    pub b_pre: f64,
    pub b_post: f64,
    /// 1-based time from which `b_post` applies.
    pub change_at: Option<usize>,
    /// `(ΠX)ᵢ = X_{perm[i]}` (0-based). Cyclic shift when `None`.
    pub perm: Option<Vec<usize>>,
    pub seed: u64,
}

impl ModelAConfig {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        ModelAConfig {
            n,
            d,
            a_coef: 0.5,
            b_pre: 0.5,
            b_post: 0.75,
            change_at: None,
            perm: None,
            seed,
        }
    }

    fn permutation(&self) -> Result<Vec<usize>> {
        match &self.perm {
            None => Ok((0..self.d).map(|i| (i + 1) % self.d).collect()),
            Some(p) => {
                if p.len() != self.d {
                    return Err(CovError::DimensionMismatch {
                        expected: self.d,
                        found: p.len(),
                    });
                }
                let mut seen = vec![false; self.d];
                for &j in p {
                    if j >= self.d || std::mem::replace(&mut seen[j], true) {
                        return Err(CovError::invalid("perm is not a permutation of 0..d"));
                    }
                }
                Ok(p.clone())
            }
        }
    }

    fn validate(&self) -> Result<Vec<usize>> {
        if self.n == 0 || self.d == 0 {
            return Err(CovError::invalid("n and d must be positive"));
        }
        check_ar(self.a_coef)?;
        self.permutation()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBCConfig {
    pub n: usize,
    pub d: usize,
    pub a_coef: f64,
    pub b_pre: f64,
    pub b_post: f64,
    pub change_at: Option<usize>,
    pub hurst: f64,
    pub spacing: Spacing,
    #[serde(default)]
    pub init: InitMode,
    pub seed: u64,
}

impl ModelBCConfig {
    pub fn new(n: usize, d: usize, spacing: Spacing, hurst: f64, seed: u64) -> Self {
        ModelBCConfig {
            n,
            d,
            a_coef: 0.5,
            b_pre: 0.5,
            b_post: 0.75,
            change_at: None,
            hurst,
            spacing,
            init: InitMode::Stationary,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(CovError::invalid("n and d must be positive"));
        }
        check_ar(self.a_coef)?;
        check_hurst(self.hurst)
    }
}

/// `Aᵢⱼ = γ(tᵢ − tⱼ)`, verified positive semidefinite.
pub fn build_scale_matrix(d: usize, hurst: f64, spacing: Spacing) -> Result<SymMatrix> {
    check_hurst(hurst)?;
    if d == 0 {
        return Err(CovError::invalid("d must be positive"));
    }
    let a = SymMatrix::from_fn(d, |i, j| {
        let h = spacing.position(i) - spacing.position(j);
        fgn_autocov(h, hurst).expect("hurst checked")
    });
    check_psd(&a)?;
    Ok(a)
}

/// Semidefinite `LDLᵀ` factorization; fails with the most negative pivot.
pub fn check_psd(a: &SymMatrix) -> Result<()> {
    let d = a.dim();
    let scale = (0..d).map(|i| a.get(i, i).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut l = vec![0.0; d * d];
    let mut diag = vec![0.0; d];
    let mut smallest = f64::INFINITY;
    for k in 0..d {
        let mut p = a.get(k, k);
        for j in 0..k {
            p -= l[k * d + j] * l[k * d + j] * diag[j];
        }
        if !p.is_finite() {
            return Err(CovError::NonFinite("scale matrix"));
        }
        smallest = smallest.min(p);
        if p < -tol {
            return Err(CovError::NotPositiveSemidefinite { smallest_pivot: p });
        }
        if p <= tol {
            // A zero pivot forces the rest of the column to vanish.
            for i in k + 1..d {
                let mut c = a.get(i, k);
                for j in 0..k {
                    c -= l[i * d + j] * l[k * d + j] * diag[j];
                }
                if c.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(CovError::NotPositiveSemidefinite {
                        smallest_pivot: smallest.min(-c.abs()),
                    });
                }
            }
            continue;
        }
        diag[k] = p;
        for i in k + 1..d {
            let mut c = a.get(i, k);
            for j in 0..k {
                c -= l[i * d + j] * l[k * d + j] * diag[j];
            }
            l[i * d + k] = c / p;
        }
    }
    Ok(())
}

/// Symmetric PSD square root `R` (row-major, `R = Rᵀ`, `R² = A`).
/// Negative eigenvalues from rounding are clamped to zero.
pub fn psd_sqrt(a: &SymMatrix) -> Vec<f64> {
    let d = a.dim();
    let m = DMatrix::from_row_slice(d, d, a.as_slice());
    let eig = SymmetricEigen::new(m);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let s: f64 = (0..d).map(|k| q[(i, k)] * roots[k] * q[(j, k)]).sum();
            r[i * d + j] = s;
            r[j * d + i] = s;
        }
    }
    r
}

/// Random-sign Gamma(shape, 1) variate scaled to unit variance.
pub fn sym_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("shape must be positive");
    sym_gamma_with(&g, shape, rng)
}

fn sym_gamma_with<R: Rng + ?Sized>(g: &Gamma<f64>, shape: f64, rng: &mut R) -> f64 {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    sign * g.sample(rng) / (shape * (shape + 1.0)).sqrt()
}

fn model_a_shape(t: usize, n: usize) -> f64 {
    2.0 + (2.0 * std::f64::consts::PI * t as f64 / n as f64).sin()
}

fn b_at(t: usize, b_pre: f64, b_post: f64, change_at: Option<usize>) -> f64 {
    match change_at {
        Some(c) if t >= c => b_post,
        _ => b_pre,
    }
}

fn fill_sym_gamma(out: &mut [f64], shape: f64, rng: &mut SimRng) {
    let g = Gamma::new(shape, 1.0).expect("shape in [1, 3]");
    for e in out.iter_mut() {
        *e = sym_gamma_with(&g, shape, rng);
    }
}

/// Model A sample.
pub fn gen_model_a(cfg: &ModelAConfig) -> Result<TimeSeriesSample> {
    Ok(gen_model_a_with_innovations(cfg)?.0)
}

/// Model A sample together with the innovations `ε₀, …, εₙ` (`(n+1)·d` values).
pub fn gen_model_a_with_innovations(cfg: &ModelAConfig) -> Result<(TimeSeriesSample, Vec<f64>)> {
    let perm = cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let mut rng = rng::seeded(cfg.seed);

    let mut x = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut eps_prev = vec![0.0; d];
    let mut eps = vec![0.0; d];
    let burn_shape = model_a_shape(1, n);
    fill_sym_gamma(&mut eps_prev, burn_shape, &mut rng);
    for _ in 0..BURN_IN {
        fill_sym_gamma(&mut eps, burn_shape, &mut rng);
        step_a(&mut next, &x, &perm, cfg.a_coef, cfg.b_pre, &eps, &eps_prev);
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut eps, &mut eps_prev);
    }

    let mut innovations = Vec::with_capacity((n + 1) * d);
    innovations.extend_from_slice(&eps_prev);
    let mut data = Vec::with_capacity(n * d);
    for t in 1..=n {
        fill_sym_gamma(&mut eps, model_a_shape(t, n), &mut rng);
        let b = b_at(t, cfg.b_pre, cfg.b_post, cfg.change_at);
        step_a(&mut next, &x, &perm, cfg.a_coef, b, &eps, &eps_prev);
        std::mem::swap(&mut x, &mut next);
        data.extend_from_slice(&x);
        innovations.extend_from_slice(&eps);
        std::mem::swap(&mut eps, &mut eps_prev);
    }
    Ok((TimeSeriesSample::new(n, d, data)?, innovations))
}

fn step_a(out: &mut [f64], x: &[f64], perm: &[usize], a: f64, b: f64, eps: &[f64], eps_prev: &[f64]) {
    for i in 0..out.len() {
        out[i] = a * x[perm[i]] + b * eps[i] + eps_prev[i];
    }
}

fn gaussian(root: &[f64], d: usize, rng: &mut SimRng, out: &mut [f64]) {
    let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    for i in 0..d {
        out[i] = root[i * d..(i + 1) * d].iter().zip(&xi).map(|(r, z)| r * z).sum();
    }
}

/// Model B (Toeplitz spacing) or Model C (square-root spacing) sample.
pub fn gen_model_bc(cfg: &ModelBCConfig) -> Result<TimeSeriesSample> {
    cfg.validate()?;
    let a_mat = build_scale_matrix(cfg.d, cfg.hurst, cfg.spacing)?;
    let root = psd_sqrt(&a_mat);
    gen_model_bc_with_root(cfg, &root)
}

/// As [`gen_model_bc`] with a precomputed square root of the scale matrix.
pub fn gen_model_bc_with_root(cfg: &ModelBCConfig, root: &[f64]) -> Result<TimeSeriesSample> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    if root.len() != d * d {
        return Err(CovError::DimensionMismatch {
            expected: d * d,
            found: root.len(),
        });
    }
    let (a, b0) = (cfg.a_coef, cfg.b_pre);
    let mut rng = rng::seeded(cfg.seed);

    let mut eps_prev = vec![0.0; d];
    let mut x = vec![0.0; d];
    gaussian(root, d, &mut rng, &mut eps_prev);
    gaussian(root, d, &mut rng, &mut x);
    let stationary_tail = (1.0 + a * b0) / (1.0 - a * a).sqrt();
    match cfg.init {
        InitMode::Stationary => {
            for i in 0..d {
                x[i] = b0 * eps_prev[i] + stationary_tail * x[i];
            }
        }
        InitMode::Printed => {
            let f = ((1.0 + b0 * b0) / (1.0 - a * a)).sqrt();
            x.iter_mut().for_each(|v| *v *= f);
        }
    }

    let mut eps = vec![0.0; d];
    let mut data = Vec::with_capacity(n * d);
    for t in 1..=n {
        gaussian(root, d, &mut rng, &mut eps);
        let b = b_at(t, cfg.b_pre, cfg.b_post, cfg.change_at);
        for i in 0..d {
            x[i] = a * x[i] + b * eps[i] + eps_prev[i];
        }
        data.extend_from_slice(&x);
        std::mem::swap(&mut eps, &mut eps_prev);
    }
    TimeSeriesSample::new(n, d, data)
}

/// `A·(1 + 2ab + b²)/(1 − a²)` with `b = b_pre`.
pub fn true_marginal_cov_bc(cfg: &ModelBCConfig) -> Result<SymMatrix> {
    check_ar(cfg.a_coef)?;
    let a_mat = build_scale_matrix(cfg.d, cfg.hurst, cfg.spacing)?;
    Ok(a_mat.scaled(marginal_factor(cfg.a_coef, cfg.b_pre)))
}

pub fn marginal_factor(a: f64, b: f64) -> f64 {
    (1.0 + 2.0 * a * b + b * b) / (1.0 - a * a)
}

/// `N/‖N‖₁` for a standard Gaussian vector `N`.
pub fn random_projection<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ProjectionVector> {
    if d == 0 {
        return Err(CovError::invalid("d must be positive"));
    }
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    Ok(ProjectionVector::new(v)?.normalized_l1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fgn_values() {
        for h in [0.1, 0.5, 0.9] {
            assert_eq!(fgn_autocov(0.0, h).unwrap(), 2.0);
        }
        assert!(fgn_autocov(1.0, 0.5).unwrap().abs() < 1e-15);
        assert_relative_eq!(fgn_autocov(2.0, 0.7).unwrap(), 0.3775, epsilon = 5e-4);
        let exact = 3f64.powf(1.4) + 1.0 - 2.0 * 2f64.powf(1.4);
        assert_relative_eq!(fgn_autocov(2.0, 0.7).unwrap(), exact, max_relative = 1e-15);
        assert!(fgn_autocov(1.0, 1.0).is_err());
        assert!(fgn_autocov(1.0, 0.0).is_err());
    }

    #[test]
    fn scale_matrix_shapes() {
        let b = build_scale_matrix(6, 0.7, Spacing::Toeplitz).unwrap();
        assert!(b.is_toeplitz());
        let c = build_scale_matrix(6, 0.7, Spacing::Sqrt).unwrap();
        assert!(!c.is_toeplitz());
        let c3 = build_scale_matrix(3, 0.7, Spacing::Sqrt).unwrap();
        assert!((c3.get(0, 1) - c3.get(1, 2)).abs() > 1e-3);
        let one = build_scale_matrix(1, 0.3, Spacing::Sqrt).unwrap();
        assert_eq!(one.as_slice(), &[2.0]);
    }

    #[test]
    fn psd_check_reports_negative_pivot() {
        let bad = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match check_psd(&bad) {
            Err(CovError::NotPositiveSemidefinite { smallest_pivot }) => {
                assert_relative_eq!(smallest_pivot, -3.0, max_relative = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        let singular = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(check_psd(&singular).is_ok());
        let hidden = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 5.0]]).unwrap();
        assert!(check_psd(&hidden).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let a = build_scale_matrix(5, 0.7, Spacing::Sqrt).unwrap();
        let r = psd_sqrt(&a);
        for i in 0..5 {
            for j in 0..5 {
                let s: f64 = (0..5).map(|k| r[i * 5 + k] * r[k * 5 + j]).sum();
                assert_relative_eq!(s, a.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn marginal_factors() {
        assert_relative_eq!(marginal_factor(0.5, 0.5), 7.0 / 3.0, max_relative = 1e-15);
        assert_eq!(marginal_factor(0.0, 0.0), 1.0);
        assert_relative_eq!(marginal_factor(0.5, 0.0), 4.0 / 3.0, max_relative = 1e-15);
        let mut cfg = ModelBCConfig::new(10, 3, Spacing::Toeplitz, 0.7, 0);
        cfg.a_coef = 0.0;
        cfg.b_pre = 0.0;
        assert_eq!(
            true_marginal_cov_bc(&cfg).unwrap(),
            build_scale_matrix(3, 0.7, Spacing::Toeplitz).unwrap()
        );
    }

    #[test]
    fn model_a_collapses_to_lagged_innovation() {
        let mut cfg = ModelAConfig::new(50, 3, 11);
        cfg.a_coef = 0.0;
        cfg.b_pre = 0.0;
        cfg.b_post = 0.0;
        let (x, eps) = gen_model_a_with_innovations(&cfg).unwrap();
        assert_eq!(eps.len(), 51 * 3);
        for t in 0..50 {
            assert_eq!(x.row(t), &eps[t * 3..(t + 1) * 3]);
        }
    }

    #[test]
    fn model_bc_collapses_to_lagged_innovation() {
        let mut cfg = ModelBCConfig::new(20, 2, Spacing::Toeplitz, 0.7, 5);
        cfg.a_coef = 0.0;
        cfg.b_pre = 0.0;
        cfg.b_post = 0.0;
        let x = gen_model_bc(&cfg).unwrap();
        // Consecutive rows must be independent draws, not repeats.
        assert_ne!(x.row(0), x.row(1));
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = ModelAConfig::new(30, 4, 3);
        assert_eq!(gen_model_a(&cfg).unwrap(), gen_model_a(&cfg).unwrap());
        let cfg = ModelBCConfig::new(30, 4, Spacing::Sqrt, 0.7, 3);
        assert_eq!(gen_model_bc(&cfg).unwrap(), gen_model_bc(&cfg).unwrap());
        let other = ModelBCConfig { seed: 4, ..cfg.clone() };
        assert_ne!(gen_model_bc(&cfg).unwrap(), gen_model_bc(&other).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelAConfig::new(10, 3, 0);
        cfg.a_coef = 1.0;
        assert!(gen_model_a(&cfg).is_err());
        cfg.a_coef = 0.5;
        cfg.perm = Some(vec![0, 0, 1]);
        assert!(gen_model_a(&cfg).is_err());
        cfg.perm = Some(vec![2, 0, 1]);
        assert!(gen_model_a(&cfg).is_ok());
        let bc = ModelBCConfig::new(10, 3, Spacing::Sqrt, 1.2, 0);
        assert!(gen_model_bc(&bc).is_err());
    }

    #[test]
    fn projection_has_unit_l1() {
        let mut rng = rng::seeded(1);
        for d in [1, 2, 7, 40] {
            let v = random_projection(d, &mut rng).unwrap();
            assert!((v.l1_norm() - 1.0).abs() < 1e-12);
        }
        let v = random_projection(1, &mut rng).unwrap();
        assert_eq!(v.coords()[0].abs(), 1.0);
        let a = random_projection(5, &mut rng::stream(9, 0)).unwrap();
        let b = random_projection(5, &mut rng::stream(9, 1)).unwrap();
        assert_ne!(a, b);
    }
}
