//! CUSUM test for a break in the marginal covariance along a projection.
//!
//! The statistic is `Tₙ(w) = √n maxₖ |vᵀ(Σ̂ʷ_{k,n} − (k/n)Σ̂ʷ_{n,n})v|`. Because
//! each estimator's quadratic form is a Frobenius dot with one of the
//! weighting matrices `ν¹, ν², ν³`, a single pass over the data yields the
//! three bridged sequences, and `Tₙ(w)` for any number of weights `w` is a
//! maximum over dot products with those 3-vectors.
//!
//! Critical values come from a block multiplier bootstrap: with
//! `χₛ = [νʲ·(XₛXₛᵀ − Σ̂_{n,n})]ⱼ` and block sums `βₜ = Σ_{s=t−b+1}^{t} χₛ`,
//! the Gaussian vectors `ηₜ ~ N(0, βₜβₜᵀ/b)` are drawn exactly as
//! `ηₜ = βₜ Zₜ / √b` with iid standard normal `Zₜ`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimators::{TaperSpec, TimeSeriesSample};
use crate::linalg::{ProjectionVector, ProjectionWeights, Simplex3Weight};
use crate::rng;

/// Block length of the multiplier bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockLength {
    /// `⌈5 n^{0.2}⌉`.
    #[default]
    Auto,
    Fixed(usize),
}

impl BlockLength {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            BlockLength::Auto => default_block_len(n),
            BlockLength::Fixed(b) => b,
        }
    }
}

pub fn default_block_len(n: usize) -> usize {
    (5.0 * (n as f64).powf(0.2)).ceil() as usize
}

/// Offset `δₙ = (ln n)^{−p}` added to the bootstrap quantile.
pub fn delta_offset(n: usize, exponent: f64) -> f64 {
    (n as f64).ln().powf(-exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub block_len: BlockLength,
    /// Number of bootstrap replicates `B`.
    pub n_boot: usize,
    /// Nominal level `α`.
    pub level: f64,
    /// Exponent `p ≥ 1` of the offset `δₙ`.
    pub delta_exponent: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            block_len: BlockLength::Auto,
            n_boot: 1000,
            level: 0.1,
            delta_exponent: 4.0,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self, n: usize) -> Result<usize> {
        if self.n_boot == 0 {
            return Err(CovError::invalid("n_boot must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CovError::OutOfRange {
                what: "level",
                value: self.level,
                range: "(0, 1)".into(),
            });
        }
        if !(self.delta_exponent >= 1.0) {
            return Err(CovError::OutOfRange {
                what: "delta_exponent",
                value: self.delta_exponent,
                range: "[1, inf)".into(),
            });
        }
        let b = self.block_len.resolve(n);
        if b == 0 {
            return Err(CovError::invalid("block length must be at least 1"));
        }
        if n < 2 * b {
            return Err(CovError::invalid(format!(
                "bootstrap needs n >= 2b, got n={n}, b={b}"
            )));
        }
        Ok(b)
    }
}

/// One shrinkage weight or a finite grid for the supremum statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightChoice {
    Single(Simplex3Weight),
    Grid(Vec<Simplex3Weight>),
}

impl WeightChoice {
    fn as_slice(&self) -> &[Simplex3Weight] {
        match self {
            WeightChoice::Single(w) => std::slice::from_ref(w),
            WeightChoice::Grid(g) => g,
        }
    }
}

/// Which weight(s) a test used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightsUsed {
    Single { w: Simplex3Weight },
    Grid { size: usize, argmax_w: Simplex3Weight },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub quantile: f64,
    pub delta: f64,
    pub reject: bool,
    /// 1-based location of the CUSUM maximum.
    pub argmax_k: usize,
    pub weights_used: WeightsUsed,
    pub block_len: usize,
    pub n_boot: usize,
    pub level: f64,
}

/// `[ν^j · XₜXₜᵀ]ⱼ` for every row.
fn projected_outer(x: &TimeSeriesSample, pw: &ProjectionWeights) -> Vec<[f64; 3]> {
    x.rows().map(|r| pw.dots_outer(r)).collect()
}

fn weights_for(x: &TimeSeriesSample, v: &ProjectionVector, spec: &TaperSpec) -> Result<ProjectionWeights> {
    if v.dim() != x.d() {
        return Err(CovError::DimensionMismatch {
            expected: x.d(),
            found: v.dim(),
        });
    }
    ProjectionWeights::new(v, spec.tau_dagger, spec.tau_diamond)
}

/// Bridged quadratic forms `vᵀ(Ŝʲ_{k,n} − (k/n)Ŝʲ_{n,n})v` for `k = 1..=n`,
/// one 3-vector (sample, tapered, Toeplitz) per `k`.
pub fn bridged_forms(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    spec: &TaperSpec,
) -> Result<Vec<[f64; 3]>> {
    let n = x.n();
    if n < 2 {
        return Err(CovError::invalid("CUSUM statistic needs n >= 2"));
    }
    let pw = weights_for(x, v, spec)?;
    let q = projected_outer(x, &pw);
    Ok(bridge(&q, 1, n))
}

/// Bridge of the partial sums `(1/n)Σ_{t≤k} incr_t`, where `incr[0]`
/// belongs to time `first` (1-based) and earlier times contribute zero.
fn bridge(incr: &[[f64; 3]], first: usize, n: usize) -> Vec<[f64; 3]> {
    let inv_n = 1.0 / n as f64;
    let mut cum = Vec::with_capacity(n);
    let mut acc = [0.0; 3];
    for k in 1..=n {
        if k >= first {
            let c = incr[k - first];
            for j in 0..3 {
                acc[j] += c[j] * inv_n;
            }
        }
        cum.push(acc);
    }
    let total = acc;
    for (k, c) in cum.iter_mut().enumerate() {
        let frac = (k + 1) as f64 * inv_n;
        for j in 0..3 {
            c[j] -= frac * total[j];
        }
    }
    cum
}

/// `(maxₖ max_w |w·bridgeₖ|, k (1-based), index of w)`; first maximum wins.
fn sup_bridge(bridge: &[[f64; 3]], grid: &[Simplex3Weight]) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, 1, 0);
    for (gi, w) in grid.iter().enumerate() {
        for (k, b) in bridge.iter().enumerate() {
            let val = w.dot(b).abs();
            if val > best.0 {
                best = (val, k + 1, gi);
            }
        }
    }
    best
}

/// `Tₙ(w)` and the location of the maximum.
pub fn cusum_stat(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    w: &Simplex3Weight,
    spec: &TaperSpec,
) -> Result<(f64, usize)> {
    let b = bridged_forms(x, v, spec)?;
    let (val, k, _) = sup_bridge(&b, std::slice::from_ref(w));
    Ok(((x.n() as f64).sqrt() * val, k))
}

/// `Tₙ*(D) = sup_{w∈D} Tₙ(w)` over a finite grid.
pub fn cusum_sup(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    grid: &[Simplex3Weight],
    spec: &TaperSpec,
) -> Result<(f64, usize, Simplex3Weight)> {
    if grid.is_empty() {
        return Err(CovError::invalid("weight grid is empty"));
    }
    let b = bridged_forms(x, v, spec)?;
    let (val, k, gi) = sup_bridge(&b, grid);
    Ok(((x.n() as f64).sqrt() * val, k, grid[gi]))
}

/// `w·bridgeₖ` for every `k`, for plotting.
pub fn cusum_path(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    w: &Simplex3Weight,
    spec: &TaperSpec,
) -> Result<Vec<f64>> {
    Ok(bridged_forms(x, v, spec)?.iter().map(|b| w.dot(b)).collect())
}

/// Rolling block sums `βₜ` of the centered projected outer products.
#[derive(Debug, Clone)]
pub struct BootstrapBlocks {
    n: usize,
    block_len: usize,
    /// `βₜ` for `t = b..=n`.
    sums: Vec<[f64; 3]>,
}

impl BootstrapBlocks {
    pub fn new(
        x: &TimeSeriesSample,
        v: &ProjectionVector,
        spec: &TaperSpec,
        block_len: usize,
    ) -> Result<Self> {
        let n = x.n();
        if block_len == 0 || block_len > n {
            return Err(CovError::OutOfRange {
                what: "block length",
                value: block_len as f64,
                range: format!("[1, {n}]"),
            });
        }
        let pw = weights_for(x, v, spec)?;
        let q = projected_outer(x, &pw);
        let mut mean = [0.0; 3];
        for qt in &q {
            for j in 0..3 {
                mean[j] += qt[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let chi: Vec<[f64; 3]> = q
            .iter()
            .map(|qt| [qt[0] - mean[0], qt[1] - mean[1], qt[2] - mean[2]])
            .collect();

        let mut sums = Vec::with_capacity(n - block_len + 1);
        let mut acc = [0.0; 3];
        for c in &chi[..block_len] {
            for j in 0..3 {
                acc[j] += c[j];
            }
        }
        sums.push(acc);
        for t in block_len..n {
            for j in 0..3 {
                acc[j] += chi[t][j] - chi[t - block_len][j];
            }
            sums.push(acc);
        }
        Ok(BootstrapBlocks {
            n,
            block_len,
            sums,
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// `βₜ` for 1-based `t`; zero for `t < b`.
    pub fn block_sum(&self, t: usize) -> [f64; 3] {
        if t < self.block_len {
            [0.0; 3]
        } else {
            self.sums[t - self.block_len]
        }
    }

    /// `Aₜ = βₜβₜᵀ / b` (1-based `t`).
    pub fn covariance(&self, t: usize) -> [[f64; 3]; 3] {
        let s = self.block_sum(t);
        let b = self.block_len as f64;
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = s[i] * s[j] / b;
            }
        }
        a
    }

    /// `ηₜ = βₜ z / √b`, a draw from `N(0, Aₜ)` given a standard normal `z`.
    pub fn eta(&self, t: usize, z: f64) -> [f64; 3] {
        let s = self.block_sum(t);
        let scale = z / (self.block_len as f64).sqrt();
        [s[0] * scale, s[1] * scale, s[2] * scale]
    }

    /// One bootstrap replicate of `sup_{w∈grid} Rₙ(w)` from stream `replicate`.
    fn replicate(&self, grid: &[Simplex3Weight], seed: u64, replicate: u64) -> f64 {
        let mut rng = rng::stream(seed, replicate);
        let etas: Vec<[f64; 3]> = (self.block_len..=self.n)
            .map(|t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.eta(t, z)
            })
            .collect();
        let b = bridge(&etas, self.block_len, self.n);
        (self.n as f64).sqrt() * sup_bridge(&b, grid).0
    }
}

/// The block covariances `Aₜ` for `t = 1..=n` (zero before `t = b`).
pub fn bootstrap_blocks(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    spec: &TaperSpec,
    b: usize,
) -> Result<Vec<[[f64; 3]; 3]>> {
    let blocks = BootstrapBlocks::new(x, v, spec, b)?;
    Ok((1..=x.n()).map(|t| blocks.covariance(t)).collect())
}

/// All `B` bootstrap replicates in replicate order. Replicate `r` uses the
/// random stream `(cfg.seed, r)`, so the output is independent of thread count.
pub fn bootstrap_replicates(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    spec: &TaperSpec,
    weights: &WeightChoice,
    cfg: &BootstrapConfig,
) -> Result<Vec<f64>> {
    let b = cfg.validate(x.n())?;
    let grid = weights.as_slice();
    if grid.is_empty() {
        return Err(CovError::invalid("weight grid is empty"));
    }
    let blocks = BootstrapBlocks::new(x, v, spec, b)?;
    Ok((0..cfg.n_boot as u64)
        .into_par_iter()
        .map(|r| blocks.replicate(grid, cfg.seed, r))
        .collect())
}

/// `⌈(1 − α)B⌉`-th order statistic of the replicates.
pub fn upper_quantile(mut replicates: Vec<f64>, level: f64) -> f64 {
    assert!(!replicates.is_empty());
    replicates.sort_by(f64::total_cmp);
    let nb = replicates.len();
    let rank = (((1.0 - level) * nb as f64) - 1e-9).ceil().clamp(1.0, nb as f64) as usize;
    replicates[rank - 1]
}

/// Conditional `(1 − α)` quantile of `Rₙ(w)` (or `Rₙ*(D)` for a grid).
pub fn bootstrap_quantile(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    spec: &TaperSpec,
    weights: &WeightChoice,
    cfg: &BootstrapConfig,
) -> Result<f64> {
    let reps = bootstrap_replicates(x, v, spec, weights, cfg)?;
    Ok(upper_quantile(reps, cfg.level))
}

/// Reject when `T > aₙ + δₙ`.
pub fn changepoint_test(
    x: &TimeSeriesSample,
    v: &ProjectionVector,
    spec: &TaperSpec,
    weights: &WeightChoice,
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    let n = x.n();
    let block_len = cfg.validate(n)?;
    let (statistic, argmax_k, weights_used) = match weights {
        WeightChoice::Single(w) => {
            let (t, k) = cusum_stat(x, v, w, spec)?;
            (t, k, WeightsUsed::Single { w: *w })
        }
        WeightChoice::Grid(grid) => {
            let (t, k, w) = cusum_sup(x, v, grid, spec)?;
            (
                t,
                k,
                WeightsUsed::Grid {
                    size: grid.len(),
                    argmax_w: w,
                },
            )
        }
    };
    let quantile = bootstrap_quantile(x, v, spec, weights, cfg)?;
    let delta = delta_offset(n, cfg.delta_exponent);
    Ok(TestResult {
        statistic,
        quantile,
        delta,
        reject: statistic > quantile + delta,
        argmax_k,
        weights_used,
        block_len,
        n_boot: cfg.n_boot,
        level: cfg.level,
    })
}
