//! Manifest-driven Monte Carlo studies: size and power of the changepoint
//! test (`table1`) and estimation error of the four estimators (`table2`).
//!
//! Every replication draws its data, projection vector and bootstrap
//! multipliers from seeds derived from `(master_seed, cell, replication,
//! tag)`, so results do not depend on the number of worker threads. The CSV
//! output holds no timings and is byte-reproducible; timings and the config
//! hash go to a JSON sidecar next to it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::changepoint::{changepoint_test, BlockLength, BootstrapConfig, WeightChoice};
use crate::error::{CovError, Result};
use crate::estimators::{default_thresholds, EstimatorSet, TaperSpec, ThresholdMode, TimeSeriesSample};
use crate::linalg::{scaled_sq_dist, ProjectionVector, Simplex3Weight};
use crate::rng::{self, derive_seed};
use crate::simulate::{
    build_scale_matrix, gen_model_a, gen_model_bc_with_root, psd_sqrt, random_projection,
    true_marginal_cov_bc, InitMode, ModelAConfig, ModelBCConfig, Spacing,
};
use crate::weights::{optimal_weights, risk_components, LrvConfig};

const TAG_DATA: u64 = 1;
const TAG_PROJECTION: u64 = 2;
const TAG_BOOTSTRAP: u64 = 3;
const FIXED_V_REP: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Table1,
    Table2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    A,
    B,
    C,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::A => "a",
            Model::B => "b",
            Model::C => "c",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// `(1, 0, 0)`
    W1,
    /// `(0.3, 0.3, 0.4)`
    W2,
    /// Data-driven weights from the risk QP.
    Wstar,
}

impl WeightScheme {
    pub fn fixed_weight(self) -> Option<Simplex3Weight> {
        match self {
            WeightScheme::W1 => Some(Simplex3Weight::SAMPLE),
            WeightScheme::W2 => Some(Simplex3Weight::new(0.3, 0.3, 0.4).expect("valid")),
            WeightScheme::Wstar => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            WeightScheme::W1 => "w1",
            WeightScheme::W2 => "w2",
            WeightScheme::Wstar => "wstar",
        }
    }
}

/// Dimension as a function of `n`: `fixed:K` or `pow:C,γ` for `d = ⌈C·n^γ⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DRule {
    Fixed(usize),
    Pow { c: f64, gamma: f64 },
}

impl DRule {
    pub fn dim(&self, n: usize) -> usize {
        match *self {
            DRule::Fixed(k) => k,
            DRule::Pow { c, gamma } => (c * (n as f64).powf(gamma) - 1e-9).ceil() as usize,
        }
    }
}

impl FromStr for DRule {
    type Err = CovError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CovError::Manifest(format!("d_rule `{s}` is not `fixed:K` or `pow:C,gamma`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "fixed" => {
                let k: usize = rest.trim().parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                Ok(DRule::Fixed(k))
            }
            "pow" => {
                let (c, g) = rest.split_once(',').ok_or_else(bad)?;
                let c: f64 = c.trim().parse().map_err(|_| bad())?;
                let gamma: f64 = g.trim().parse().map_err(|_| bad())?;
                if !(c > 0.0 && c.is_finite() && gamma.is_finite()) {
                    return Err(bad());
                }
                Ok(DRule::Pow { c, gamma })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for DRule {
    type Error = CovError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DRule> for String {
    fn from(r: DRule) -> String {
        match r {
            DRule::Fixed(k) => format!("fixed:{k}"),
            DRule::Pow { c, gamma } => format!("pow:{c},{gamma}"),
        }
    }
}

fn default_a() -> f64 {
    0.5
}
fn default_b_pre() -> f64 {
    0.5
}
fn default_b_post() -> f64 {
    0.75
}
fn default_alpha() -> f64 {
    2.0
}
fn default_s() -> f64 {
    1.0
}
fn default_delta_exponent() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchManifest {
    pub experiment: Experiment,
    pub model: Model,
    pub n_list: Vec<usize>,
    pub d_rule: DRule,
    pub weight_scheme: WeightScheme,
    pub mc_reps: usize,
    pub boot_reps: usize,
    pub level: f64,
    pub master_seed: u64,
    pub output_path: String,
    /// Required for models `b` and `c`.
    #[serde(default)]
    pub hurst: Option<f64>,
    /// One projection vector per cell instead of one per replication.
    #[serde(default)]
    pub fixed_v: bool,
    #[serde(default = "default_a")]
    pub a_coef: f64,
    #[serde(default = "default_b_pre")]
    pub b_pre: f64,
    #[serde(default = "default_b_post")]
    pub b_post: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_s")]
    pub s_exponent: f64,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
    #[serde(default = "default_delta_exponent")]
    pub delta_exponent: f64,
    #[serde(default)]
    pub printed_init: bool,
}

impl BenchManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: BenchManifest =
            serde_json::from_str(text).map_err(|e| CovError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CovError::Manifest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CovError::Manifest(msg));
        if self.mc_reps < 1 {
            return fail("mc_reps must be at least 1".into());
        }
        if self.n_list.is_empty() {
            return fail("n_list is empty".into());
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 50) {
            return fail(format!("every n must be at least 50, got {n}"));
        }
        if self.n_list.iter().any(|&n| self.d_rule.dim(n) == 0) {
            return fail("d_rule yields d = 0".into());
        }
        if self.output_path.is_empty() {
            return fail("output_path is empty".into());
        }
        if self.a_coef.abs() >= 1.0 {
            return fail(format!("|a_coef| must be < 1, got {}", self.a_coef));
        }
        match self.experiment {
            Experiment::Table1 => {
                if self.boot_reps < 1 {
                    return fail("boot_reps must be at least 1".into());
                }
                if !(self.level > 0.0 && self.level < 1.0) {
                    return fail(format!("level must lie in (0, 1), got {}", self.level));
                }
                if !(self.delta_exponent >= 1.0) {
                    return fail("delta_exponent must be at least 1".into());
                }
            }
            Experiment::Table2 => {
                if self.model == Model::A {
                    return fail("table2 needs model b or c".into());
                }
            }
        }
        if self.model != Model::A {
            match self.hurst {
                Some(h) if h > 0.0 && h < 1.0 => {}
                Some(h) => return fail(format!("hurst must lie in (0, 1), got {h}")),
                None => return fail(format!("model {} requires `hurst`", self.model)),
            }
        }
        for &n in &self.n_list {
            let d = self.d_rule.dim(n);
            if let Err(e) = self.thresholds(n, d) {
                return fail(format!("thresholds at n={n}, d={d}: {e}"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn thresholds(&self, n: usize, d: usize) -> Result<TaperSpec> {
        default_thresholds(n, d, self.alpha, self.threshold_mode, self.s_exponent)
    }

    fn spacing(&self) -> Spacing {
        match self.model {
            Model::C => Spacing::Sqrt,
            _ => Spacing::Toeplitz,
        }
    }

    fn bc_config(&self, n: usize, d: usize, change_at: Option<usize>, seed: u64) -> ModelBCConfig {
        ModelBCConfig {
            n,
            d,
            a_coef: self.a_coef,
            b_pre: self.b_pre,
            b_post: self.b_post,
            change_at,
            hurst: self.hurst.unwrap_or(0.7),
            spacing: self.spacing(),
            init: if self.printed_init {
                InitMode::Printed
            } else {
                InitMode::Stationary
            },
            seed,
        }
    }
}

/// One cell of the size/power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub model: String,
    pub n: usize,
    pub d: usize,
    pub scheme: String,
    pub size: f64,
    pub size_se: f64,
    pub power: f64,
    pub power_se: f64,
    pub reps: usize,
    pub config_hash: String,
}

/// One cell of the estimation-error table (mean scaled squared Frobenius errors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub model: String,
    pub n: usize,
    pub d: usize,
    pub scheme: String,
    pub sample: f64,
    pub tapered: f64,
    pub toeplitz: f64,
    pub shrinkage: f64,
    pub sample_se: f64,
    pub tapered_se: f64,
    pub toeplitz_se: f64,
    pub shrinkage_se: f64,
    pub reps: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BenchRows {
    Power(Vec<PowerRow>),
    Error(Vec<ErrorRow>),
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub manifest: BenchManifest,
    pub config_hash: String,
    pub rows: BenchRows,
    /// Wall time per row, in row order.
    pub wall_time_sec: Vec<f64>,
    pub total_wall_time_sec: f64,
}

/// Rejection indicators of one replication under the null and the alternative.
#[allow(clippy::too_many_arguments)]
fn power_replicate(
    m: &BenchManifest,
    cell: u64,
    rep: u64,
    n: usize,
    d: usize,
    spec: &TaperSpec,
    root: Option<&[f64]>,
    fixed_v: Option<&ProjectionVector>,
) -> Result<[bool; 2]> {
    let data_seed = derive_seed(m.master_seed, &[cell, rep, TAG_DATA]);
    let v = match fixed_v {
        Some(v) => v.clone(),
        None => random_projection(
            d,
            &mut rng::seeded(derive_seed(m.master_seed, &[cell, rep, TAG_PROJECTION])),
        )?,
    };
    let cfg = BootstrapConfig {
        block_len: BlockLength::Auto,
        n_boot: m.boot_reps,
        level: m.level,
        delta_exponent: m.delta_exponent,
        seed: derive_seed(m.master_seed, &[cell, rep, TAG_BOOTSTRAP]),
    };
    let change = n.div_ceil(2);
    let mut out = [false; 2];
    for (slot, change_at) in [None, Some(change)].into_iter().enumerate() {
        let x = simulate_cell(m, n, d, change_at, data_seed, root)?;
        let w = match m.weight_scheme.fixed_weight() {
            Some(w) => w,
            None => optimal_weights(&risk_components(&x, spec, &LrvConfig::default())?)?,
        };
        out[slot] = changepoint_test(&x, &v, spec, &WeightChoice::Single(w), &cfg)?.reject;
    }
    Ok(out)
}

fn simulate_cell(
    m: &BenchManifest,
    n: usize,
    d: usize,
    change_at: Option<usize>,
    seed: u64,
    root: Option<&[f64]>,
) -> Result<TimeSeriesSample> {
    match m.model {
        Model::A => gen_model_a(&ModelAConfig {
            n,
            d,
            a_coef: m.a_coef,
            b_pre: m.b_pre,
            b_post: m.b_post,
            change_at,
            perm: None,
            seed,
        }),
        Model::B | Model::C => gen_model_bc_with_root(
            &m.bc_config(n, d, change_at, seed),
            root.expect("scale root computed for models b and c"),
        ),
    }
}

fn scale_root(m: &BenchManifest, d: usize) -> Result<Option<Vec<f64>>> {
    match m.model {
        Model::A => Ok(None),
        Model::B | Model::C => {
            let a = build_scale_matrix(d, m.hurst.unwrap_or(0.7), m.spacing())?;
            Ok(Some(psd_sqrt(&a)))
        }
    }
}

fn binomial(hits: usize, reps: usize) -> (f64, f64) {
    let p = hits as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Size and power of the changepoint test for every `n` in the manifest.
pub fn run_power_study(m: &BenchManifest) -> Result<(Vec<PowerRow>, Vec<f64>)> {
    m.validate()?;
    if m.experiment != Experiment::Table1 {
        return Err(CovError::Manifest("run_power_study needs experiment table1".into()));
    }
    let hash = m.config_hash();
    let mut rows = Vec::with_capacity(m.n_list.len());
    let mut times = Vec::with_capacity(m.n_list.len());
    for (cell, &n) in m.n_list.iter().enumerate() {
        let start = Instant::now();
        let cell = cell as u64;
        let d = m.d_rule.dim(n);
        let spec = m.thresholds(n, d)?;
        let root = scale_root(m, d)?;
        let fixed_v = if m.fixed_v {
            let seed = derive_seed(m.master_seed, &[cell, FIXED_V_REP, TAG_PROJECTION]);
            Some(random_projection(d, &mut rng::seeded(seed))?)
        } else {
            None
        };
        let outcomes: Vec<[bool; 2]> = (0..m.mc_reps as u64)
            .into_par_iter()
            .map(|rep| {
                power_replicate(m, cell, rep, n, d, &spec, root.as_deref(), fixed_v.as_ref())
            })
            .collect::<Result<_>>()?;
        let (size, size_se) = binomial(outcomes.iter().filter(|o| o[0]).count(), m.mc_reps);
        let (power, power_se) = binomial(outcomes.iter().filter(|o| o[1]).count(), m.mc_reps);
        log::info!("table1 n={n} d={d}: size {size:.3} power {power:.3}");
        rows.push(PowerRow {
            model: m.model.to_string(),
            n,
            d,
            scheme: m.weight_scheme.name().into(),
            size,
            size_se,
            power,
            power_se,
            reps: m.mc_reps,
            config_hash: hash.clone(),
        });
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((rows, times))
}

/// Errors `‖Ŝ − Σ‖²_{F*}` of the sample, tapered, Toeplitz and data-driven
/// shrinkage estimators for one replication.
pub fn error_replicate(x: &TimeSeriesSample, sigma: &crate::linalg::SymMatrix, spec: &TaperSpec) -> Result<[f64; 4]> {
    let est = EstimatorSet::from_data(x, spec);
    let w = optimal_weights(&risk_components(x, spec, &LrvConfig::default())?)?;
    Ok([
        scaled_sq_dist(&est.sample, sigma)?,
        scaled_sq_dist(&est.tapered, sigma)?,
        scaled_sq_dist(&est.toeplitz, sigma)?,
        scaled_sq_dist(&est.combine(&w), sigma)?,
    ])
}

/// Mean estimation errors under the null for every `n` in the manifest.
pub fn run_error_study(m: &BenchManifest) -> Result<(Vec<ErrorRow>, Vec<f64>)> {
    m.validate()?;
    if m.experiment != Experiment::Table2 {
        return Err(CovError::Manifest("run_error_study needs experiment table2".into()));
    }
    let hash = m.config_hash();
    let mut rows = Vec::with_capacity(m.n_list.len());
    let mut times = Vec::with_capacity(m.n_list.len());
    for (cell, &n) in m.n_list.iter().enumerate() {
        let start = Instant::now();
        let cell = cell as u64;
        let d = m.d_rule.dim(n);
        let spec = m.thresholds(n, d)?;
        let root = scale_root(m, d)?.expect("models b and c");
        let sigma = true_marginal_cov_bc(&m.bc_config(n, d, None, 0))?;
        let errs: Vec<[f64; 4]> = (0..m.mc_reps as u64)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(m.master_seed, &[cell, rep, TAG_DATA]);
                let x = gen_model_bc_with_root(&m.bc_config(n, d, None, seed), &root)?;
                error_replicate(&x, &sigma, &spec)
            })
            .collect::<Result<_>>()?;
        let col = |j: usize| mean_se(&errs.iter().map(|e| e[j]).collect::<Vec<_>>());
        let [(s, s_se), (t, t_se), (z, z_se), (w, w_se)] = [col(0), col(1), col(2), col(3)];
        log::info!("table2 n={n} d={d}: {s:.3} | {t:.3} | {z:.3} | {w:.3}");
        rows.push(ErrorRow {
            model: m.model.to_string(),
            n,
            d,
            scheme: WeightScheme::Wstar.name().into(),
            sample: s,
            tapered: t,
            toeplitz: z,
            shrinkage: w,
            sample_se: s_se,
            tapered_se: t_se,
            toeplitz_se: z_se,
            shrinkage_se: w_se,
            reps: m.mc_reps,
            config_hash: hash.clone(),
        });
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((rows, times))
}

/// Runs the study named by the manifest.
pub fn run(m: &BenchManifest) -> Result<BenchReport> {
    let start = Instant::now();
    let (rows, wall_time_sec) = match m.experiment {
        Experiment::Table1 => {
            let (r, t) = run_power_study(m)?;
            (BenchRows::Power(r), t)
        }
        Experiment::Table2 => {
            let (r, t) = run_error_study(m)?;
            (BenchRows::Error(r), t)
        }
    };
    Ok(BenchReport {
        manifest: m.clone(),
        config_hash: m.config_hash(),
        rows,
        wall_time_sec,
        total_wall_time_sec: start.elapsed().as_secs_f64(),
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sidecar path: the CSV path with `.json` appended.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the CSV rows to `path` and the report (with timings) to the sidecar.
pub fn write_report(report: &BenchReport, path: &Path) -> Result<()> {
    match &report.rows {
        BenchRows::Power(r) => write_csv(path, r)?,
        BenchRows::Error(r) => write_csv(path, r)?,
    }
    let file = std::fs::File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(file, report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> BenchManifest {
        BenchManifest::from_json(
            r#"{"experiment":"table1","model":"a","n_list":[60],"d_rule":"fixed:2",
                "weight_scheme":"w1","mc_reps":3,"boot_reps":20,"level":0.1,
                "master_seed":7,"output_path":"out.csv"}"#,
        )
        .unwrap()
    }

    #[test]
    fn d_rules() {
        assert_eq!("fixed:4".parse::<DRule>().unwrap().dim(1000), 4);
        let p: DRule = "pow:4,0.3".parse().unwrap();
        assert_eq!(p.dim(100), 16);
        assert_eq!(p.dim(500), 26);
        assert_eq!("pow:4,0.5".parse::<DRule>().unwrap().dim(100), 40);
        assert!("fixed:0".parse::<DRule>().is_err());
        assert!("pow:4".parse::<DRule>().is_err());
        assert!("log:2".parse::<DRule>().is_err());
        assert_eq!(String::from(p), "pow:4,0.3");
    }

    #[test]
    fn defaults_fill_in() {
        let m = manifest();
        assert_eq!((m.a_coef, m.b_pre, m.b_post), (0.5, 0.5, 0.75));
        assert!(!m.fixed_v);
        assert_eq!(m.threshold_mode, ThresholdMode::Simulation);
    }

    #[test]
    fn validation_errors_are_manifest_errors() {
        let base = serde_json::to_value(manifest()).unwrap();
        let patch = |k: &str, v: serde_json::Value| {
            let mut m = base.clone();
            m[k] = v;
            BenchManifest::from_json(&m.to_string())
        };
        for (k, v) in [
            ("mc_reps", serde_json::json!(0)),
            ("n_list", serde_json::json!([49])),
            ("n_list", serde_json::json!([])),
            ("level", serde_json::json!(1.5)),
            ("model", serde_json::json!("b")),
            ("d_rule", serde_json::json!("fixed:x")),
            ("experiment", serde_json::json!("table3")),
        ] {
            assert!(matches!(patch(k, v), Err(CovError::Manifest(_))), "{k}");
        }
        assert!(matches!(
            BenchManifest::from_json("{not json"),
            Err(CovError::Manifest(_))
        ));
    }

    #[test]
    fn single_replication_gives_bernoulli_rates() {
        let mut m = manifest();
        m.mc_reps = 1;
        let (rows, times) = run_power_study(&m).unwrap();
        assert_eq!(times.len(), 1);
        for r in [rows[0].size, rows[0].power] {
            assert!(r == 0.0 || r == 1.0);
        }
    }

    #[test]
    fn hash_tracks_content() {
        let m = manifest();
        let mut other = m.clone();
        other.master_seed += 1;
        assert_eq!(m.config_hash(), manifest().config_hash());
        assert_ne!(m.config_hash(), other.config_hash());
        assert_eq!(m.config_hash().len(), 64);
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.json"));
    }
}
