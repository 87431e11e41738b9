//! Sample, tapered and Toeplitz covariance estimators and their shrinkage
//! combination.
//!
//! All estimators assume centered data (`E Xₜ = 0`); nothing here demeans.
//! The sequential sample covariance is normalized by the full sample size:
//! `Σ̂_{k,n} = (1/n) Σ_{t≤k} Xₜ Xₜᵀ`.
//!
//! The oracle estimators used in simulation studies are the same
//! [`taper_estimator`] / [`toeplitz_estimator`] applied to the true covariance.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::linalg::{Simplex3Weight, SymMatrix};

/// `n × d` sample, rows are time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl TimeSeriesSample {
    /// Row-major `n × d` buffer.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(CovError::invalid("sample needs n >= 1 and d >= 1"));
        }
        if data.len() != n * d {
            return Err(CovError::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CovError::NonFinite("sample data"));
        }
        Ok(TimeSeriesSample { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(CovError::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Row `t` (0-based), i.e. `X_{t+1}`.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.d..(t + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column `j` as an owned series.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Copy with each column's sample mean removed.
    pub fn demeaned(&self) -> Self {
        let mut mean = vec![0.0; self.d];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        let data = self
            .rows()
            .flat_map(|r| r.iter().zip(&mean).map(|(x, m)| x - m))
            .collect();
        TimeSeriesSample {
            n: self.n,
            d: self.d,
            data,
        }
    }
}

/// Which threshold rates [`default_thresholds`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Frobenius-optimal rates, `c = 2`.
    Theorem,
    /// Spectral rates used in the simulation study, `c = 1`.
    #[default]
    Simulation,
}

/// Thresholds and exponents for the structured estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaperSpec {
    /// Banding threshold `τ†` of the tapered estimator.
    pub tau_dagger: f64,
    /// Threshold `τ⋄` of the Toeplitz estimator.
    pub tau_diamond: f64,
    /// Outer threshold `σ† ≥ τ†` for the banding-error estimate.
    pub sigma_dagger: f64,
    /// Assumed decay exponent `α` of the off-diagonals.
    pub alpha: f64,
    pub c_exponent: f64,
    pub s_exponent: f64,
}

impl TaperSpec {
    pub fn new(
        tau_dagger: f64,
        tau_diamond: f64,
        sigma_dagger: f64,
        alpha: f64,
        c_exponent: f64,
        s_exponent: f64,
    ) -> Result<Self> {
        let positive = [
            ("tau_dagger", tau_dagger),
            ("tau_diamond", tau_diamond),
            ("sigma_dagger", sigma_dagger),
            ("alpha", alpha),
            ("s_exponent", s_exponent),
        ];
        for (what, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CovError::OutOfRange {
                    what,
                    value,
                    range: "(0, inf)".into(),
                });
            }
        }
        if c_exponent != 1.0 && c_exponent != 2.0 {
            return Err(CovError::OutOfRange {
                what: "c_exponent",
                value: c_exponent,
                range: "{1, 2}".into(),
            });
        }
        if sigma_dagger < tau_dagger {
            return Err(CovError::invalid(format!(
                "sigma_dagger {sigma_dagger} < tau_dagger {tau_dagger}"
            )));
        }
        let s_max = 2.0 * alpha + c_exponent - 1.0;
        if s_exponent >= s_max {
            return Err(CovError::OutOfRange {
                what: "s_exponent",
                value: s_exponent,
                range: format!("(0, {s_max})"),
            });
        }
        Ok(TaperSpec {
            tau_dagger,
            tau_diamond,
            sigma_dagger,
            alpha,
            c_exponent,
            s_exponent,
        })
    }

    /// Same threshold everywhere; `alpha`/`s` are set to benign placeholders.
    /// Handy for tests of the bilinear machinery.
    pub fn uniform(tau: f64) -> Result<Self> {
        TaperSpec::new(tau, tau, tau, 2.0, 1.0, 1.0)
    }
}

/// Rate-based thresholds for sample size `n` and dimension `d`.
///
/// With `c = 2` (theorem mode) or `c = 1` (simulation mode):
/// `τ† = n^{1/(2α+c)}`, `σ† = n^{(1+s)/(2α+c)}`,
/// `τ⋄ = (nd / ln(nd))^{1/(2α+1)}`.
pub fn default_thresholds(
    n: usize,
    d: usize,
    alpha: f64,
    mode: ThresholdMode,
    s: f64,
) -> Result<TaperSpec> {
    if n < 2 || d < 1 {
        return Err(CovError::invalid(format!(
            "thresholds need n >= 2 and d >= 1, got n={n}, d={d}"
        )));
    }
    let c = match mode {
        ThresholdMode::Theorem => 2.0,
        ThresholdMode::Simulation => 1.0,
    };
    let nf = n as f64;
    let nd = nf * d as f64;
    let rate = 2.0 * alpha + c;
    TaperSpec::new(
        nf.powf(1.0 / rate),
        (nd / nd.ln()).powf(1.0 / (2.0 * alpha + 1.0)),
        nf.powf((1.0 + s) / rate),
        alpha,
        c,
        s,
    )
}

/// Trapezoidal taper: 1 up to `τ/2`, linear down to 0 at `τ`, 0 beyond.
#[inline]
pub fn taper_weight(x: f64, tau: f64) -> f64 {
    if x <= tau / 2.0 {
        1.0
    } else if x <= tau {
        2.0 - 2.0 * x / tau
    } else {
        0.0
    }
}

/// `Σ̂_{k,n} = (1/n) Σ_{t=1}^{k} Xₜ Xₜᵀ` for `1 ≤ k ≤ n`.
pub fn partial_sample_cov(x: &TimeSeriesSample, k: usize) -> Result<SymMatrix> {
    if k < 1 || k > x.n() {
        return Err(CovError::OutOfRange {
            what: "k",
            value: k as f64,
            range: format!("[1, {}]", x.n()),
        });
    }
    let mut s = SymMatrix::zeros(x.d());
    let inv_n = 1.0 / x.n() as f64;
    for row in x.rows().take(k) {
        s.add_outer(inv_n, row);
    }
    Ok(s)
}

/// Full-sample covariance `Σ̂_{n,n}`.
pub fn sample_cov(x: &TimeSeriesSample) -> SymMatrix {
    partial_sample_cov(x, x.n()).expect("k = n is always in range")
}

/// Stream `Σ̂_{k,n}` for `k = 1..=n` in one pass; `visit(k, Σ̂_{k,n})`.
pub fn for_each_partial_cov(x: &TimeSeriesSample, mut visit: impl FnMut(usize, &SymMatrix)) {
    let mut s = SymMatrix::zeros(x.d());
    let inv_n = 1.0 / x.n() as f64;
    for (t, row) in x.rows().enumerate() {
        s.add_outer(inv_n, row);
        visit(t + 1, &s);
    }
}

/// Tapering estimator: `Sᵢⱼ · ω(|i − j|, τ)`.
pub fn taper_estimator(s: &SymMatrix, tau: f64) -> SymMatrix {
    s.scale_by_lag(|m| taper_weight(m as f64, tau))
}

/// Lag averages `σ̂_m = (1/(d − m)) Σ_{i−j=m} Sᵢⱼ` for `m = 0..d`.
pub fn diagonal_means(s: &SymMatrix) -> Vec<f64> {
    let d = s.dim();
    (0..d).map(|m| s.diagonal_sum(m) / (d - m) as f64).collect()
}

/// Tapered Toeplitz estimator: entry `(i, j)` is `σ̂_{|i−j|} · ω(|i − j|, τ)`.
pub fn toeplitz_estimator(s: &SymMatrix, tau: f64) -> SymMatrix {
    let profile: Vec<f64> = diagonal_means(s)
        .into_iter()
        .enumerate()
        .map(|(m, sigma)| sigma * taper_weight(m as f64, tau))
        .collect();
    SymMatrix::toeplitz(&profile)
}

/// `w₁ S + w₂ S† + w₃ S⋄`.
pub fn shrink_combine(
    w: &Simplex3Weight,
    s: &SymMatrix,
    s_dag: &SymMatrix,
    s_dia: &SymMatrix,
) -> Result<SymMatrix> {
    let mut out = s.scaled(w.w1());
    out.add_scaled(w.w2(), s_dag)?;
    out.add_scaled(w.w3(), s_dia)?;
    Ok(out)
}

/// The three full-sample estimators computed together.
#[derive(Debug, Clone)]
pub struct EstimatorSet {
    pub sample: SymMatrix,
    pub tapered: SymMatrix,
    pub toeplitz: SymMatrix,
}

impl EstimatorSet {
    pub fn from_sample_cov(sample: SymMatrix, spec: &TaperSpec) -> Self {
        let tapered = taper_estimator(&sample, spec.tau_dagger);
        let toeplitz = toeplitz_estimator(&sample, spec.tau_diamond);
        EstimatorSet {
            sample,
            tapered,
            toeplitz,
        }
    }

    pub fn from_data(x: &TimeSeriesSample, spec: &TaperSpec) -> Self {
        Self::from_sample_cov(sample_cov(x), spec)
    }

    pub fn combine(&self, w: &Simplex3Weight) -> SymMatrix {
        shrink_combine(w, &self.sample, &self.tapered, &self.toeplitz)
            .expect("estimators share one dimension")
    }
}
