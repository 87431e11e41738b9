//! Data-driven shrinkage weights.
//!
//! The risk of `w₁Σ̂ + w₂Σ† + w₃Σ⋄` reduces to
//!
//! ```text
//! f(w₂, w₃) = (1 − w₂ − w₃)² MSE + w₂² E† + w₃² E⋄ + 2 w₂ w₃ D
//! ```
//!
//! over the triangle `w₂, w₃ ≥ 0, w₂ + w₃ ≤ 1`. `MSE` is estimated from
//! Bartlett-kernel long-run variances of the product series `Xₜᵢ Xₜⱼ`, the
//! approximation errors `E†`, `E⋄` and the cross term `D` by plug-in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimators::{sample_cov, taper_weight, EstimatorSet, TaperSpec, TimeSeriesSample};
use crate::linalg::{scaled_inner, scaled_sq_dist, Simplex3Weight, SymMatrix};

/// Plug-in estimates entering the shrinkage objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskComponents {
    pub mse: f64,
    pub e_dagger: f64,
    pub e_diamond: f64,
    pub d_cross: f64,
}

impl RiskComponents {
    fn check_finite(&self) -> Result<()> {
        let all = [self.mse, self.e_dagger, self.e_diamond, self.d_cross];
        if all.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(CovError::NonFinite("risk components"))
        }
    }
}

/// Bandwidth choice for the long-run variance estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Newey–West plug-in bandwidth, chosen separately per component.
    #[default]
    NeweyWestAuto,
    Fixed(f64),
}

/// Long-run variance configuration. The kernel is always Bartlett,
/// `K(x) = max(1 − x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LrvConfig {
    pub bandwidth: BandwidthRule,
}

impl LrvConfig {
    pub fn fixed(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(CovError::OutOfRange {
                what: "bandwidth",
                value: bandwidth,
                range: "(0, inf)".into(),
            });
        }
        Ok(LrvConfig {
            bandwidth: BandwidthRule::Fixed(bandwidth),
        })
    }
}

#[inline]
fn bartlett(x: f64) -> f64 {
    (1.0 - x).max(0.0)
}

/// `(1/n) Σ_{t=1}^{n−s} uₜ u_{t+s}`.
fn lagged_moment(u: &[f64], s: usize) -> f64 {
    let n = u.len();
    u[..n - s].iter().zip(&u[s..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
}

/// Autocovariance at lag `s` of the centered product series
/// `Xₜᵢ Xₜⱼ − Σ̂ᵢⱼ` (indices 0-based), normalized by `n`.
pub fn product_autocov(x: &TimeSeriesSample, i: usize, j: usize, s: usize) -> Result<f64> {
    let (n, d) = (x.n(), x.d());
    if i >= d || j >= d {
        return Err(CovError::OutOfRange {
            what: "component index",
            value: i.max(j) as f64,
            range: format!("[0, {})", d),
        });
    }
    if s >= n {
        return Err(CovError::OutOfRange {
            what: "lag",
            value: s as f64,
            range: format!("[0, {}]", n - 1),
        });
    }
    Ok(lagged_moment(&centered_product(x, i, j), s))
}

fn centered_product(x: &TimeSeriesSample, i: usize, j: usize) -> Vec<f64> {
    let mut u: Vec<f64> = x.rows().map(|r| r[i] * r[j]).collect();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    u
}

/// Newey–West automatic bandwidth for the Bartlett kernel.
///
/// The series is demeaned first. With `l = ⌊4 (n/100)^{2/9}⌋`,
/// `s₀ = γ̂(0) + 2Σ_{j≤l} γ̂(j)` and `s₁ = 2Σ_{j≤l} j γ̂(j)`, the bandwidth is
/// `1.1447 ((s₁/s₀)² n)^{1/3}` clipped to `[1, n − 1]`; degenerate inputs
/// (`s₀ ≤ 0`, `s₁ = 0`, constant series) give 1.
pub fn newey_west_bandwidth(u: &[f64]) -> Result<f64> {
    let n = u.len();
    if n < 8 {
        return Err(CovError::invalid(format!(
            "Newey-West bandwidth needs at least 8 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = u.iter().sum::<f64>() / nf;
    let raw_scale = u.iter().map(|x| x * x).sum::<f64>() / nf;
    let centered: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let gamma0 = lagged_moment(&centered, 0);
    if gamma0 <= 1e-14 * raw_scale || gamma0 == 0.0 {
        return Ok(1.0);
    }
    let lags = ((4.0 * (nf / 100.0).powf(2.0 / 9.0)).floor() as usize).min(n - 1);
    let mut s0 = gamma0;
    let mut s1 = 0.0;
    for j in 1..=lags {
        let g = lagged_moment(&centered, j);
        s0 += 2.0 * g;
        s1 += 2.0 * j as f64 * g;
    }
    if s0 <= 0.0 || s1 == 0.0 {
        return Ok(1.0);
    }
    let b = 1.1447 * ((s1 / s0).powi(2) * nf).cbrt();
    Ok(b.clamp(1.0, nf - 1.0))
}

/// Bartlett long-run variance of a centered series, floored at zero.
fn long_run_variance(u: &[f64], rule: BandwidthRule) -> Result<f64> {
    let b = match rule {
        BandwidthRule::NeweyWestAuto => newey_west_bandwidth(u)?,
        BandwidthRule::Fixed(b) => b,
    };
    let mut lrv = lagged_moment(u, 0);
    for s in 1..u.len() {
        let k = bartlett(s as f64 / b);
        if k == 0.0 {
            break;
        }
        lrv += 2.0 * k * lagged_moment(u, s);
    }
    Ok(lrv.max(0.0))
}

/// Pairwise summation; result does not depend on how the terms were produced.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `MSE^ = (1/(nd)) Σᵢⱼ Var^(√n Σ̂ᵢⱼ)` with per-component long-run variances.
pub fn mse_hat(x: &TimeSeriesSample, cfg: &LrvConfig) -> Result<f64> {
    let (n, d) = (x.n(), x.d());
    if n < 8 {
        return Err(CovError::invalid(format!(
            "MSE estimate needs n >= 8, got {n}"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let terms = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut u: Vec<f64> = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).collect();
            let mean = u.iter().sum::<f64>() / n as f64;
            u.iter_mut().for_each(|v| *v -= mean);
            let lrv = long_run_variance(&u, cfg.bandwidth)?;
            Ok(if i == j { lrv } else { 2.0 * lrv })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) / (n as f64 * d as f64))
}

/// Estimate of `Σ − Σ†` restricted to lags up to `σ†`:
/// zero for `|i−j| ≤ τ/2`, `(1 − ω)Sᵢⱼ` on `(τ/2, τ]`, `Sᵢⱼ` on `(τ, σ]`, zero beyond.
pub fn delta_dagger_hat(s: &SymMatrix, spec: &TaperSpec) -> SymMatrix {
    let (tau, sigma) = (spec.tau_dagger, spec.sigma_dagger);
    s.scale_by_lag(|m| {
        let m = m as f64;
        if m <= tau / 2.0 {
            0.0
        } else if m <= tau {
            1.0 - taper_weight(m, tau)
        } else if m <= sigma {
            1.0
        } else {
            0.0
        }
    })
}

/// Plug-in `Ê†, Ê⋄, D̂` from precomputed estimators, combined with an MSE estimate.
pub fn plug_in_risk(est: &EstimatorSet, spec: &TaperSpec, mse: f64) -> Result<RiskComponents> {
    let delta = delta_dagger_hat(&est.sample, spec);
    let gap = est.tapered.sub(&est.toeplitz)?;
    Ok(RiskComponents {
        mse,
        e_dagger: scaled_inner(&delta, &delta)?,
        e_diamond: scaled_sq_dist(&est.toeplitz, &est.tapered)?,
        d_cross: scaled_inner(&delta, &gap)?,
    })
}

/// All four plug-in quantities from the full sample.
pub fn risk_components(
    x: &TimeSeriesSample,
    spec: &TaperSpec,
    cfg: &LrvConfig,
) -> Result<RiskComponents> {
    let est = EstimatorSet::from_sample_cov(sample_cov(x), spec);
    plug_in_risk(&est, spec, mse_hat(x, cfg)?)
}

/// Approximation errors of the oracle estimators for a known covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleErrors {
    pub e_dagger: f64,
    pub e_diamond: f64,
    pub d_cross: f64,
}

pub fn oracle_errors(sigma: &SymMatrix, spec: &TaperSpec) -> Result<OracleErrors> {
    let est = EstimatorSet::from_sample_cov(sigma.clone(), spec);
    let dag = est.tapered.sub(sigma)?;
    let dia = est.toeplitz.sub(sigma)?;
    Ok(OracleErrors {
        e_dagger: scaled_inner(&dag, &dag)?,
        e_diamond: scaled_inner(&dia, &dia)?,
        d_cross: scaled_inner(&dag, &dia)?,
    })
}

/// `f(w₂, w₃)`.
pub fn shrinkage_objective(rc: &RiskComponents, w2: f64, w3: f64) -> f64 {
    let w1 = 1.0 - w2 - w3;
    w1 * w1 * rc.mse + w2 * w2 * rc.e_dagger + w3 * w3 * rc.e_diamond + 2.0 * w2 * w3 * rc.d_cross
}

/// Closed-form stationary point `(w₁*, w₂*, w₃*)` when the quadratic is
/// strictly convex; it need not lie in the simplex.
pub fn interior_weights(rc: &RiskComponents) -> Option<[f64; 3]> {
    let RiskComponents {
        mse,
        e_dagger,
        e_diamond,
        d_cross,
    } = *rc;
    let det = e_dagger * e_diamond + mse * (e_dagger + e_diamond - 2.0 * d_cross) - d_cross * d_cross;
    if !(det > 0.0 && mse + e_dagger > 0.0) {
        return None;
    }
    Some([
        (e_dagger * e_diamond - d_cross * d_cross) / det,
        mse * (e_diamond - d_cross) / det,
        mse * (e_dagger - d_cross) / det,
    ])
}

const INTERIOR_MARGIN: f64 = 1e-12;

/// Minimizer of the shrinkage objective over the simplex.
///
/// Returns the closed-form interior solution when it lies strictly inside;
/// otherwise the best of the three edge minimizers and three vertices, with
/// ties going to the larger `w₁`, then the larger `w₂`.
pub fn optimal_weights(rc: &RiskComponents) -> Result<Simplex3Weight> {
    rc.check_finite()?;
    if let Some(w) = interior_weights(rc) {
        if w.iter().all(|&x| x > INTERIOR_MARGIN) {
            return Ok(Simplex3Weight::from_tail(w[1], w[2]));
        }
    }

    // f(p) = M + pᵀQp − 2M(p₂ + p₃) in the (w₂, w₃) plane
    let m = rc.mse;
    let q = [
        [m + rc.e_dagger, m + rc.d_cross],
        [m + rc.d_cross, m + rc.e_diamond],
    ];
    let quad = |a: [f64; 2], b: [f64; 2]| {
        a[0] * (q[0][0] * b[0] + q[0][1] * b[1]) + a[1] * (q[1][0] * b[0] + q[1][1] * b[1])
    };

    let mut candidates: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let edges = [
        ([0.0, 0.0], [1.0, 0.0]),
        ([0.0, 0.0], [0.0, 1.0]),
        ([1.0, 0.0], [-1.0, 1.0]),
    ];
    for (p0, u) in edges {
        let a = quad(u, u);
        let b = 2.0 * quad(u, p0) - 2.0 * m * (u[0] + u[1]);
        if a > 0.0 {
            let t = (-b / (2.0 * a)).clamp(0.0, 1.0);
            candidates.push([p0[0] + t * u[0], p0[1] + t * u[1]]);
        }
    }

    let mut best: Option<(f64, Simplex3Weight)> = None;
    for [w2, w3] in candidates {
        let w = Simplex3Weight::from_tail(w2, w3);
        let f = shrinkage_objective(rc, w.w2(), w.w3());
        best = match best {
            None => Some((f, w)),
            Some((fb, wb)) => {
                let tol = 1e-12 * f.abs().max(fb.abs());
                let better = if (f - fb).abs() <= tol {
                    (w.w1(), w.w2()) > (wb.w1(), wb.w2())
                } else {
                    f < fb
                };
                if better {
                    Some((f, w))
                } else {
                    Some((fb, wb))
                }
            }
        };
    }
    Ok(best.expect("candidate list is non-empty").1)
}

/// Describe violations of the dimension regime under which the plug-in
/// estimates are known to be consistent, if any.
pub fn regime_warning(n: usize, d: usize, spec: &TaperSpec) -> Option<String> {
    let nf = n as f64;
    let lower = nf.powf(1.0 / (2.0 * spec.alpha + spec.c_exponent));
    let upper = nf.powf((2.0 * spec.alpha + 2.0) / (2.0 * spec.alpha + 1.0));
    if (d as f64) < lower {
        Some(format!(
            "d = {d} is below n^(1/(2a+c)) = {lower:.2}; weight estimates may be unreliable"
        ))
    } else if (d as f64) > upper {
        Some(format!(
            "d = {d} exceeds n^((2a+2)/(2a+1)) = {upper:.2}; weight estimates may be inconsistent"
        ))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rc(mse: f64, e_dagger: f64, e_diamond: f64, d_cross: f64) -> RiskComponents {
        RiskComponents {
            mse,
            e_dagger,
            e_diamond,
            d_cross,
        }
    }

    #[test]
    fn product_autocov_vanishes_for_constant_rows() {
        let x = TimeSeriesSample::from_rows(&vec![vec![1.5, -2.0]; 12]).unwrap();
        for s in 0..12 {
            assert!(product_autocov(&x, 0, 1, s).unwrap().abs() < 1e-14);
        }
        assert!(product_autocov(&x, 0, 1, 12).is_err());
        assert!(product_autocov(&x, 2, 0, 0).is_err());
    }

    #[test]
    fn product_autocov_lag_zero_is_variance() {
        let rows: Vec<Vec<f64>> = (0..9).map(|t| vec![t as f64 * 0.3 - 1.0, (t as f64).cos()]).collect();
        let x = TimeSeriesSample::from_rows(&rows).unwrap();
        let prods: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
        let mean = prods.iter().sum::<f64>() / 9.0;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 9.0;
        assert_relative_eq!(product_autocov(&x, 0, 1, 0).unwrap(), var, max_relative = 1e-13);
    }

    #[test]
    fn product_autocov_six_point_two_loop_oracle() {
        let rows = vec![
            vec![0.5, -1.0],
            vec![1.2, 0.3],
            vec![-0.7, 0.8],
            vec![2.0, -0.4],
            vec![-1.1, -1.3],
            vec![0.4, 0.9],
        ];
        let x = TimeSeriesSample::from_rows(&rows).unwrap();
        let n = rows.len();
        let mut s01 = 0.0;
        for r in &rows {
            s01 += r[0] * r[1];
        }
        s01 /= n as f64;
        let mut expect = 0.0;
        for t in 0..n - 1 {
            expect += (rows[t][0] * rows[t][1] - s01) * (rows[t + 1][0] * rows[t + 1][1] - s01);
        }
        expect /= n as f64;
        assert_relative_eq!(product_autocov(&x, 0, 1, 1).unwrap(), expect, max_relative = 1e-13);
        // symmetric in (i, j)
        assert_eq!(
            product_autocov(&x, 0, 1, 1).unwrap(),
            product_autocov(&x, 1, 0, 1).unwrap()
        );
    }

    #[test]
    fn bandwidth_fallbacks() {
        assert_eq!(newey_west_bandwidth(&[3.0; 50]).unwrap(), 1.0);
        assert_eq!(newey_west_bandwidth(&[0.1; 50]).unwrap(), 1.0);
        assert!(newey_west_bandwidth(&[1.0; 7]).is_err());
    }

    #[test]
    fn mse_of_zero_data_is_zero() {
        let x = TimeSeriesSample::new(20, 3, vec![0.0; 60]).unwrap();
        assert_eq!(mse_hat(&x, &LrvConfig::default()).unwrap(), 0.0);
        let rc = risk_components(&x, &TaperSpec::uniform(2.0).unwrap(), &LrvConfig::default()).unwrap();
        assert_eq!(rc, self::rc(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn delta_dagger_examples() {
        let ones = SymMatrix::from_fn(4, |_, _| 1.0);
        // τ = 2, σ = 3: lags 0,1 -> 0; lag 2 -> (1 − ω(2)) = 1; lag 3 -> 1
        let spec = TaperSpec::new(2.0, 2.0, 3.0, 2.0, 1.0, 1.0).unwrap();
        let delta = delta_dagger_hat(&ones, &spec);
        let lag = |i: usize, j: usize| delta.get(i, j);
        assert_eq!(lag(0, 0), 0.0);
        assert_eq!(lag(0, 1), 0.0);
        assert_eq!(lag(0, 2), 1.0);
        assert_eq!(lag(0, 3), 1.0);

        let s = SymMatrix::from_fn(5, |i, j| 1.0 + (i * j) as f64);
        let wide = TaperSpec::uniform(8.0).unwrap();
        assert_eq!(delta_dagger_hat(&s, &wide), SymMatrix::zeros(5));

        // σ = τ: support only on (τ/2, τ]
        let narrow = TaperSpec::new(3.0, 3.0, 3.0, 2.0, 1.0, 1.0).unwrap();
        let d = delta_dagger_hat(&SymMatrix::from_fn(6, |_, _| 1.0), &narrow);
        assert_eq!(d.get(0, 1), 0.0);
        assert_relative_eq!(d.get(0, 2), 1.0 - (2.0 - 4.0 / 3.0), max_relative = 1e-15);
        assert_eq!(d.get(0, 3), 1.0);
        assert_eq!(d.get(0, 4), 0.0);
    }

    #[test]
    fn optimal_weights_symmetric_interior() {
        let w = optimal_weights(&rc(1.0, 1.0, 1.0, 0.0)).unwrap();
        for x in w.as_array() {
            assert_relative_eq!(x, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn optimal_weights_perfect_sample() {
        let w = optimal_weights(&rc(0.0, 0.4, 0.7, 0.1)).unwrap();
        assert_eq!(w, Simplex3Weight::SAMPLE);
    }

    #[test]
    fn optimal_weights_exact_banding() {
        let w = optimal_weights(&rc(1.0, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!(w, Simplex3Weight::TAPERED);
    }

    #[test]
    fn optimal_weights_all_zero_prefers_sample() {
        assert_eq!(optimal_weights(&rc(0.0, 0.0, 0.0, 0.0)).unwrap(), Simplex3Weight::SAMPLE);
    }

    #[test]
    fn optimal_weights_rejects_nan() {
        assert!(optimal_weights(&rc(f64::NAN, 0.0, 0.0, 0.0)).is_err());
        assert!(optimal_weights(&rc(1.0, f64::INFINITY, 0.0, 0.0)).is_err());
    }

    #[test]
    fn optimal_weights_indefinite_plug_in() {
        // D̂² > Ê†Ê⋄ can happen in finite samples; result must still be on the simplex
        let r = rc(0.5, 0.1, 0.2, 0.9);
        let w = optimal_weights(&r).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=(200 - i) {
                best = best.min(shrinkage_objective(&r, i as f64 / 200.0, j as f64 / 200.0));
            }
        }
        assert!(shrinkage_objective(&r, w.w2(), w.w3()) <= best + 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        assert_relative_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>(), max_relative = 1e-12);
    }

    #[test]
    fn oracle_errors_vanish_for_toeplitz_banded_truth() {
        let sigma = SymMatrix::toeplitz(&[2.0, 0.5, 0.0, 0.0, 0.0]);
        let spec = TaperSpec::uniform(3.0).unwrap();
        let o = oracle_errors(&sigma, &spec).unwrap();
        assert_eq!(o.e_dagger, 0.0);
        assert_eq!(o.e_diamond, 0.0);
        assert_eq!(o.d_cross, 0.0);
    }
}
