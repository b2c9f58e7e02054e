//! Batch experiments: JSON run configs, the chain driver behind them, the
//! experiment suites, the oracle suites and tidy CSV output.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bkw_coupling::{derive_params, marginal_checks, CouplingParams, HeightSampler};
use crate::error::{ConfigError, ExperimentError, OracleError, ParamError};
use crate::exact_oracle::{
    cb_monotonicity_suite, cb_spin_monotonicity_suite, enumerate_height_functions, enumerate_heights, enumerate_rc,
    fkg_lattice_check, pushforward_equality_check, shift_one_minus, FkgVerdict, IdentityReport,
};
use crate::fk_ising_at::{
    at_joint_check, at_joint_check_exp, find_sigma_bullet_counterexample, fk_ising_checks, sample_tau_given_xi_star,
    sample_xi_given_spins, selfdual_params, sigma_bullet_marginal, AtRegime, FkLayout,
};
use crate::lattice::{build_diamond, build_rectangle, exteriormost_t_circuit, Domain, FaceCoord, Graph, Parity, ParityClass};
use crate::random_cluster::{components, p_critical, p_critical_from_sqrt, PlanarPair, RcConfig, RcParams, UnionFind};
use crate::representations::{
    arrows_to_height, height_to_arrows, height_to_spin, spin_to_height, Boundary, Cb, HeightFunction, ModelParams, WeightMode,
};
use crate::samplers::{
    batch_means, chain_rng, height_site_kernels, initial_heights, integrated_autocorrelation, rc_edge_kernels, ChainSpec,
    EstimateWithError, HeightKernel, InitialState, Observable, RcKernel, SiteWeights, DEFAULT_BATCHES,
};
use crate::scalar::{Scalar, Surd};

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 14] =
    ["experiment", "N", "a", "b", "c", "c_b_or_qb", "J", "U", "seed", "sweeps", "observable", "estimate", "stderr", "tau_int"];

/// Oracle suites known to `icelab oracle`.
pub const ORACLE_SUITES: [&str; 6] = ["coupling", "samplers", "fkg", "monotonicity", "fk_ising", "structural"];

/// One line of experiment output. Exact rows carry `stderr = 0` and no chain fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub c_b_or_qb: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[serde(rename = "U")]
    pub u: Option<f64>,
    pub seed: Option<u64>,
    pub sweeps: Option<usize>,
    pub observable: String,
    pub estimate: f64,
    pub stderr: f64,
    pub tau_int: Option<f64>,
}

impl ResultRow {
    fn new(experiment: &str) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            n: None,
            a: None,
            b: None,
            c: None,
            c_b_or_qb: None,
            j: None,
            u: None,
            seed: None,
            sweeps: None,
            observable: String::new(),
            estimate: f64::NAN,
            stderr: f64::NAN,
            tau_int: None,
        }
    }

    fn chain(mut self, spec: &ChainSpec) -> Self {
        self.seed = Some(spec.seed);
        self.sweeps = Some(spec.sweeps);
        self
    }

    fn abc(mut self, a: f64, b: f64, c: f64) -> Self {
        (self.a, self.b, self.c) = (Some(a), Some(b), Some(c));
        self
    }

    fn size(mut self, n: u32) -> Self {
        self.n = Some(n);
        self
    }

    /// A copy of this row reporting `est` for `observable`.
    fn with(&self, observable: String, est: &EstimateWithError) -> Self {
        let mut r = self.clone();
        r.observable = observable;
        r.estimate = est.mean;
        r.stderr = est.stderr;
        r.tau_int = (est.n_batches > 0).then_some(est.tau_int);
        r
    }

    /// A copy reporting a derived statistic with its standard error.
    fn derived(&self, observable: String, estimate: f64, stderr: f64) -> Self {
        let mut r = self.clone();
        r.observable = observable;
        r.estimate = estimate;
        r.stderr = stderr;
        r.tau_int = None;
        r
    }

    /// An exact value: no chain, zero error.
    fn exact(&self, observable: String, estimate: f64) -> Self {
        let mut r = self.derived(observable, estimate, 0.0);
        r.seed = None;
        r.sweeps = None;
        r
    }
}

/// Writes the header and rows as CSV.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Io(std::io::Error::other(e.to_string()))
}

/// Rows with the given observable name.
pub fn find_rows<'a>(rows: &'a [ResultRow], observable: &str) -> Vec<&'a ResultRow> {
    rows.iter().filter(|r| r.observable == observable).collect()
}

// ---------------------------------------------------------------------------
// configs

/// A run file: one key naming the experiment, holding its settings.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    Chain(ChainConfig),
    VarianceScaling(VarianceScalingConfig),
    HeightGibbsDiagnostics(HeightDiagnosticsConfig),
    AtSelfdual(AtSelfdualConfig),
    QbInterpolation(QbInterpolationConfig),
    ArrowBias(ArrowBiasConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heights,
    Spins,
    Rc,
    Coupling,
    At,
}

/// A boundary weight: a number, or `"inf"`.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CbValue {
    Finite(f64),
    Named(String),
}

impl CbValue {
    fn to_cb(&self) -> Result<Cb<f64>, ConfigError> {
        match self {
            CbValue::Finite(x) if *x >= 0.0 && x.is_finite() => Ok(Cb::Finite(*x)),
            CbValue::Named(s) if s == "inf" || s == "infinity" => Ok(Cb::Infinite),
            other => Err(ConfigError::Invalid(format!("c_b must be a non-negative number or \"inf\", got {other:?}"))),
        }
    }

    fn as_f64(&self) -> f64 {
        match self {
            CbValue::Finite(x) => *x,
            CbValue::Named(_) => f64::INFINITY,
        }
    }
}

/// Model parameters; which fields are required depends on the model.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub c_b: Option<CbValue>,
    pub q: Option<f64>,
    pub q_b: Option<f64>,
    pub p: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[serde(rename = "U")]
    pub u: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainParity {
    Even,
    Odd,
}

/// The diamond `Λ_n(center)`; `parity`, when given, must match the domain.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: u32,
    #[serde(default)]
    pub center: [i32; 2],
    #[serde(default)]
    pub parity: Option<DomainParity>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<Arc<Domain>, ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::Invalid("domain.n must be at least 1".into()));
        }
        let d = build_diamond(self.n, FaceCoord::new(self.center[0], self.center[1]));
        let class = d.parity_class();
        match (self.parity, class) {
            (None, _) | (Some(DomainParity::Even), ParityClass::Even) | (Some(DomainParity::Odd), ParityClass::Odd) => Ok(Arc::new(d)),
            (Some(p), c) => Err(ConfigError::Invalid(format!("domain.parity is {p:?} but the diamond is {c:?}"))),
        }
    }
}

/// Flat boundary heights on even and odd exterior faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub even: i32,
    pub odd: i32,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { even: 0, odd: 1 }
    }
}

impl BoundaryConfig {
    fn to_boundary(self) -> Boundary {
        Boundary::Flat { even: self.even, odd: self.odd }
    }
}

/// A single chain with user-chosen observables.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub model: ModelKind,
    pub params: ParamsConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub chain: ChainSpec,
    pub observables: Vec<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Where to write the final state.
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceScalingConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub c_list: Vec<f64>,
    pub n_list: Vec<u32>,
    pub chain: ChainSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_max_radius() -> usize {
    8
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HeightDiagnosticsConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub c: f64,
    pub n: u32,
    /// Largest excursion radius tabulated.
    #[serde(default = "default_max_radius")]
    pub max_radius: usize,
    /// Diamond radii inside which T-circuits are searched; defaults to powers of two up to `n`.
    #[serde(default)]
    pub circuit_boxes: Option<Vec<u32>>,
    pub chain: ChainSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_distances() -> Vec<i32> {
    (1..=8).map(|k| 2 * k).collect()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AtSelfdualConfig {
    #[serde(rename = "J_list")]
    pub j_list: Vec<f64>,
    pub n: u32,
    /// Even horizontal distances from the face `(0, 0)`.
    #[serde(default = "default_distances")]
    pub distances: Vec<i32>,
    pub chain: ChainSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QbInterpolationConfig {
    pub q: f64,
    /// Defaults to `1, e^{−λ}√q, e^{λ}√q, q` (duplicates dropped).
    #[serde(default)]
    pub q_b_list: Option<Vec<f64>>,
    pub n: u32,
    /// Half-width of the central window, in faces; defaults to `n / 4`.
    #[serde(default)]
    pub window_radius: Option<u32>,
    pub chain: ChainSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_offset() -> [i32; 2] {
    [2, 0]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArrowBiasConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub c: f64,
    pub n: u32,
    /// Translation from the edge `e` to the edge `f`; must preserve parity.
    #[serde(default = "default_offset")]
    pub offset: [i32; 2],
    pub chain: ChainSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Parses a run file, reporting JSON and schema errors with their position.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Json { line: e.line(), column: e.column(), msg: e.to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Chain(_) => "chain",
            RunConfig::VarianceScaling(_) => "variance_scaling",
            RunConfig::HeightGibbsDiagnostics(_) => "height_gibbs_diagnostics",
            RunConfig::AtSelfdual(_) => "at_selfdual",
            RunConfig::QbInterpolation(_) => "qb_interpolation",
            RunConfig::ArrowBias(_) => "arrow_bias",
        }
    }

    pub fn chain_spec_mut(&mut self) -> &mut ChainSpec {
        match self {
            RunConfig::Chain(c) => &mut c.chain,
            RunConfig::VarianceScaling(c) => &mut c.chain,
            RunConfig::HeightGibbsDiagnostics(c) => &mut c.chain,
            RunConfig::AtSelfdual(c) => &mut c.chain,
            RunConfig::QbInterpolation(c) => &mut c.chain,
            RunConfig::ArrowBias(c) => &mut c.chain,
        }
    }

    pub fn output(&self) -> Option<&PathBuf> {
        match self {
            RunConfig::Chain(c) => c.output.as_ref(),
            RunConfig::VarianceScaling(c) => c.output.as_ref(),
            RunConfig::HeightGibbsDiagnostics(c) => c.output.as_ref(),
            RunConfig::AtSelfdual(c) => c.output.as_ref(),
            RunConfig::QbInterpolation(c) => c.output.as_ref(),
            RunConfig::ArrowBias(c) => c.output.as_ref(),
        }
    }

    /// Checks that cannot be expressed in the JSON schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let mut spec = match self {
            RunConfig::Chain(c) => c.chain.clone(),
            RunConfig::VarianceScaling(c) => c.chain.clone(),
            RunConfig::HeightGibbsDiagnostics(c) => c.chain.clone(),
            RunConfig::AtSelfdual(c) => c.chain.clone(),
            RunConfig::QbInterpolation(c) => c.chain.clone(),
            RunConfig::ArrowBias(c) => c.chain.clone(),
        };
        if spec.sweeps == 0 {
            return invalid("chain.sweeps must be positive".into());
        }
        if spec.thinning == 0 {
            spec.thinning = 1;
        }
        if spec.record_updates {
            return invalid("chain.record_updates is only available to the exactness gate".into());
        }
        match self {
            RunConfig::Chain(c) => {
                c.domain.build()?;
                if c.observables.is_empty() {
                    return invalid("observables must not be empty".into());
                }
                for o in &c.observables {
                    parse_observable(c.model, o)?;
                }
            }
            RunConfig::VarianceScaling(c) => {
                if c.c_list.is_empty() || c.n_list.is_empty() {
                    return invalid("c_list and n_list must not be empty".into());
                }
                if c.n_list.windows(2).any(|w| w[0] >= w[1]) || c.n_list[0] == 0 {
                    return invalid("n_list must be positive and increasing".into());
                }
            }
            RunConfig::HeightGibbsDiagnostics(c) => {
                if c.n < 2 {
                    return invalid("n must be at least 2".into());
                }
            }
            RunConfig::AtSelfdual(c) => {
                if c.j_list.is_empty() {
                    return invalid("J_list must not be empty".into());
                }
                if c.distances.iter().any(|x| *x <= 0 || x % 2 != 0 || *x >= c.n as i32) {
                    return invalid("distances must be positive, even and smaller than n".into());
                }
            }
            RunConfig::QbInterpolation(c) => {
                if c.n < 2 {
                    return invalid("n must be at least 2".into());
                }
            }
            RunConfig::ArrowBias(c) => {
                if (c.offset[0] + c.offset[1]).rem_euclid(2) != 0 || c.offset == [0, 0] {
                    return invalid("offset must be a non-zero parity-preserving translation".into());
                }
                if c.n < 2 || c.offset[0].abs() + c.offset[1].abs() + 2 > c.n as i32 {
                    return invalid("the translated edge must lie inside the diamond".into());
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// chains

/// A Markov chain driven by sweeps, with observables read after each recorded sweep.
trait Chain {
    fn sweep(&mut self, rng: &mut ChaCha8Rng);
    fn observe(&mut self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<(), ExperimentError>;
}

type HeightProbe<'a> = Box<dyn FnMut(&HeightFunction, &mut ChaCha8Rng, &mut Vec<f64>) -> Result<(), ExperimentError> + 'a>;
type RcProbe<'a> = Box<dyn FnMut(&RcConfig, &mut ChaCha8Rng, &mut Vec<f64>) -> Result<(), ExperimentError> + 'a>;

struct HeightChain<'a> {
    kernel: HeightKernel,
    weights: SiteWeights<f64>,
    h: HeightFunction,
    probe: HeightProbe<'a>,
}

impl<'a> HeightChain<'a> {
    fn new(
        domain: &Arc<Domain>,
        boundary: &Boundary,
        params: &ModelParams<f64>,
        mode: WeightMode,
        probe: HeightProbe<'a>,
    ) -> Result<Self, ExperimentError> {
        if mode == WeightMode::BoundaryCb && domain.parity_class() == ParityClass::Mixed {
            return Err(crate::error::RepresentationError::MixedDomain.into());
        }
        Ok(HeightChain {
            kernel: HeightKernel::new(domain.clone()),
            weights: SiteWeights::new(params, mode)?,
            h: initial_heights(domain, boundary)?,
            probe,
        })
    }
}

impl Chain for HeightChain<'_> {
    fn sweep(&mut self, rng: &mut ChaCha8Rng) {
        self.kernel.sweep(&mut self.h, &self.weights, rng);
    }

    fn observe(&mut self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<(), ExperimentError> {
        (self.probe)(&self.h, rng, out)
    }
}

struct RcChain<'a> {
    kernel: RcKernel,
    params: RcParams<f64>,
    eta: RcConfig,
    probe: RcProbe<'a>,
}

impl<'a> RcChain<'a> {
    fn new(graph: &Graph, params: RcParams<f64>, initial: &InitialState, probe: RcProbe<'a>) -> Self {
        let eta = match initial {
            InitialState::Flat => RcConfig::all_closed(graph.num_edges()),
            InitialState::AllOpen => RcConfig::all_open(graph.num_edges()),
        };
        RcChain { kernel: RcKernel::new(graph), params, eta, probe }
    }
}

impl Chain for RcChain<'_> {
    fn sweep(&mut self, rng: &mut ChaCha8Rng) {
        self.kernel.sweep(&mut self.eta, &self.params, rng);
    }

    fn observe(&mut self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<(), ExperimentError> {
        (self.probe)(&self.eta, rng, out)
    }
}

/// Runs `chain` for `spec` on RNG stream `stream`; one series per observable.
fn record<C: Chain>(chain: &mut C, spec: &ChainSpec, stream: u64) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let mut rng = chain_rng(spec.seed, stream);
    let thin = spec.thinning.max(1);
    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut buf = Vec::new();
    for t in 0..spec.burn_in + spec.sweeps {
        chain.sweep(&mut rng);
        if t >= spec.burn_in && (t - spec.burn_in) % thin == 0 {
            buf.clear();
            chain.observe(&mut rng, &mut buf)?;
            if series.is_empty() {
                series = vec![Vec::with_capacity(spec.sweeps / thin + 1); buf.len()];
            }
            for (s, x) in series.iter_mut().zip(&buf) {
                s.push(*x);
            }
        }
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// statistics

/// Per-series means of `DEFAULT_BATCHES` consecutive batches; a trailing
/// partial batch is dropped.
pub fn batch_matrix(series: &[Vec<f64>], n_batches: usize) -> Vec<Vec<f64>> {
    series
        .iter()
        .map(|s| {
            let size = s.len() / n_batches.max(1);
            (0..n_batches).map(|b| s[b * size..(b + 1) * size].iter().sum::<f64>() / size.max(1) as f64).collect()
        })
        .collect()
}

/// Delete-one-batch jackknife of a smooth function of the series means:
/// returns the estimate on all batches and its standard error.
pub fn jackknife<F: Fn(&[f64]) -> f64>(batches: &[Vec<f64>], f: F) -> (f64, f64) {
    let nb = batches.first().map_or(0, Vec::len);
    let full: Vec<f64> = batches.iter().map(|b| b.iter().sum::<f64>() / nb.max(1) as f64).collect();
    let theta = f(&full);
    if nb < 2 {
        return (theta, f64::NAN);
    }
    let reps: Vec<f64> = (0..nb)
        .map(|k| {
            let loo: Vec<f64> = batches.iter().map(|b| (b.iter().sum::<f64>() - b[k]) / (nb - 1) as f64).collect();
            f(&loo)
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / nb as f64;
    let var = reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    (theta, var.sqrt())
}

/// Weighted least-squares line `y = α + βx`; returns `(β, se(β))` with the
/// standard error taken from the weights as inverse variances.
pub fn weighted_slope(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64) {
    let sw: f64 = ws.iter().sum();
    let xm = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (x - xm) * (y - ym)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Ordinary least-squares slope.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    weighted_slope(xs, ys, &vec![1.0; xs.len()]).0
}

fn estimate_of(series: &[f64]) -> EstimateWithError {
    batch_means(series, DEFAULT_BATCHES)
}

fn tau_of(series: &[f64]) -> f64 {
    integrated_autocorrelation(series, (series.len() / 100).max(1))
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

// ---------------------------------------------------------------------------
// the chain experiment

/// Output of a run: CSV rows and, for single chains, the final state.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub snapshot: Option<StateSnapshot>,
}

/// Persisted chain state: the domain and the final configuration as text.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StateSnapshot {
    pub model: ModelKind,
    pub seed: u64,
    pub sweeps: usize,
    pub boundary: BoundaryConfig,
    pub domain: String,
    #[serde(default)]
    pub heights: Option<String>,
    /// Edge states on the even corner graph.
    #[serde(default)]
    pub edges: Option<String>,
}

/// What a snapshot file holds, after validation.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSummary {
    pub model: ModelKind,
    pub faces: usize,
    pub vertex_types: Option<[usize; 6]>,
    pub open_edges: Option<(usize, usize)>,
}

impl StateSnapshot {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json { line: e.line(), column: e.column(), msg: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialises")
    }

    /// Rebuilds the domain and the stored configurations, checking each.
    pub fn validate(&self) -> Result<SnapshotSummary, ExperimentError> {
        let domain = Arc::new(Domain::from_snapshot(&self.domain)?);
        let mut summary = SnapshotSummary { model: self.model, faces: domain.num_faces(), vertex_types: None, open_edges: None };
        if let Some(text) = &self.heights {
            let h = HeightFunction::from_snapshot(domain.clone(), text)?;
            let b = self.boundary.to_boundary();
            if domain.halo().iter().any(|u| b.value(*u) != h.get(*u)) {
                return Err(crate::error::RepresentationError::BoundaryMismatch.into());
            }
            summary.vertex_types = Some(h.type_counts());
        }
        if let Some(text) = &self.edges {
            let m = PlanarPair::new(&domain).num_edges();
            let eta = RcConfig::from_snapshot(text, m)?;
            summary.open_edges = Some((eta.num_open(), m));
        }
        if summary.vertex_types.is_none() && summary.open_edges.is_none() {
            return Err(ConfigError::Invalid("snapshot holds neither heights nor edges".into()).into());
        }
        Ok(summary)
    }
}

fn require(x: Option<f64>, name: &str, model: ModelKind) -> Result<f64, ConfigError> {
    x.ok_or_else(|| ConfigError::Invalid(format!("params.{name} is required for model {model:?}")))
}

/// Observables accepted by each model: height and spin probes for
/// `heights`, spin probes for `spins`, edge probes for `rc`, both for
/// `coupling`, and `tau(i,j;k,l)`, `xiconn(i,j;k,l)`, `prod(i,j;k,l)` for `at`.
#[derive(Clone, Debug, PartialEq)]
enum Probe {
    Basic(Observable),
    TauCorr(FaceCoord, FaceCoord),
    XiConn(FaceCoord, FaceCoord),
    ProductCorr(FaceCoord, FaceCoord),
}

fn parse_observable(model: ModelKind, s: &str) -> Result<Probe, ConfigError> {
    let bad = || ConfigError::Invalid(format!("observable `{s}` is not defined for model {model:?}"));
    if model == ModelKind::At {
        let (name, rest) = s.trim().split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let (x, y) = args.split_once(';').ok_or_else(bad)?;
        let face = |t: &str| -> Result<FaceCoord, ConfigError> {
            let v: Vec<i32> = t.split(',').map(|x| x.trim().parse::<i32>().map_err(|_| bad())).collect::<Result<_, _>>()?;
            match v.as_slice() {
                [i, j] if (i + j) % 2 == 0 => Ok(FaceCoord::new(*i, *j)),
                _ => Err(bad()),
            }
        };
        let (u, v) = (face(x)?, face(y)?);
        return match name {
            "tau" => Ok(Probe::TauCorr(u, v)),
            "xiconn" => Ok(Probe::XiConn(u, v)),
            "prod" => Ok(Probe::ProductCorr(u, v)),
            _ => Err(bad()),
        };
    }
    let o = Observable::parse(s).map_err(|_| bad())?;
    let spin = matches!(o, Observable::Spin(_) | Observable::SpinProduct(..));
    let ok = match model {
        ModelKind::Heights => o.is_height_observable(),
        ModelKind::Spins => spin,
        ModelKind::Rc => !o.is_height_observable(),
        ModelKind::Coupling => true,
        ModelKind::At => unreachable!("handled above"),
    };
    if ok {
        Ok(Probe::Basic(o))
    } else {
        Err(bad())
    }
}

fn model_params(p: &ParamsConfig, model: ModelKind) -> Result<ModelParams<f64>, ExperimentError> {
    let c = require(p.c, "c", model)?;
    Ok(ModelParams::new(p.a.unwrap_or(1.0), p.b.unwrap_or(1.0), c)?)
}

fn check_faces(domain: &Domain, probes: &[Probe]) -> Result<(), ConfigError> {
    for pr in probes {
        let faces: Vec<FaceCoord> = match pr {
            Probe::Basic(Observable::Height(u) | Observable::HeightSquared(u) | Observable::Spin(u)) => vec![*u],
            Probe::Basic(Observable::HeightSum(u, v) | Observable::SpinProduct(u, v)) => vec![*u, *v],
            Probe::TauCorr(u, v) | Probe::XiConn(u, v) | Probe::ProductCorr(u, v) => vec![*u, *v],
            Probe::Basic(_) => vec![],
        };
        if let Some(f) = faces.iter().find(|f| !domain.contains(**f)) {
            return Err(ConfigError::Invalid(format!("observable face ({}, {}) is outside the domain", f.i, f.j)));
        }
    }
    Ok(())
}

fn check_edges(graph: &Graph, probes: &[Probe]) -> Result<(), ConfigError> {
    for pr in probes {
        let ok = match pr {
            Probe::Basic(Observable::EdgeOpen(e)) => *e < graph.num_edges(),
            Probe::Basic(Observable::ConnectedToBoundary(v)) => *v < graph.num_vertices,
            Probe::Basic(Observable::EdgeSetDensity(es)) => es.iter().all(|e| *e < graph.num_edges()),
            _ => true,
        };
        if !ok {
            return Err(ConfigError::Invalid(format!("observable {pr:?} refers to a missing edge or vertex")));
        }
    }
    Ok(())
}

/// Runs one chain of the configured model and reports each observable.
pub fn run_chain_config(cfg: &ChainConfig) -> Result<RunOutput, ExperimentError> {
    let domain = cfg.domain.build()?;
    let boundary = cfg.boundary.to_boundary();
    let probes: Vec<Probe> = cfg.observables.iter().map(|o| parse_observable(cfg.model, o)).collect::<Result<_, _>>()?;
    check_faces(&domain, &probes)?;
    let spec = &cfg.chain;
    let p = &cfg.params;
    let mut base = ResultRow::new("chain").chain(spec).size(cfg.domain.n);
    let mut snapshot = StateSnapshot {
        model: cfg.model,
        seed: spec.seed,
        sweeps: spec.sweeps,
        boundary: cfg.boundary,
        domain: domain.to_snapshot(),
        heights: None,
        edges: None,
    };
    let series = match cfg.model {
        ModelKind::Heights | ModelKind::Spins => {
            let mut params = model_params(p, cfg.model)?;
            let mode = match &p.c_b {
                Some(cb) => {
                    params = params.with_cb(cb.to_cb()?);
                    base.c_b_or_qb = Some(cb.as_f64());
                    WeightMode::BoundaryCb
                }
                None => WeightMode::Plain,
            };
            base = base.abc(params.a, params.b, params.c);
            let obs: Vec<Observable> = probes.iter().map(|pr| match pr {
                Probe::Basic(o) => o.clone(),
                _ => unreachable!("parsed for a height model"),
            }).collect();
            let probe: HeightProbe<'_> = Box::new(move |h, _, out| {
                out.extend(obs.iter().map(|o| o.on_heights(h)));
                Ok(())
            });
            let mut chain = HeightChain::new(&domain, &boundary, &params, mode, probe)?;
            let s = record(&mut chain, spec, 0)?;
            snapshot.heights = Some(chain.h.to_snapshot());
            s
        }
        ModelKind::Rc => {
            let pair = PlanarPair::new(&domain);
            let graph = pair.primal.graph().clone();
            check_edges(&graph, &probes)?;
            let q = require(p.q, "q", cfg.model)?;
            let q_b = p.q_b.unwrap_or(1.0);
            let pp = match p.p {
                Some(x) => x,
                None => p_critical(q)?,
            };
            let params = RcParams::new(q, q_b, pp);
            for (name, value) in [("q", q), ("q_b", q_b)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(ParamError::OutOfRange { name, value, why: "must be positive" }.into());
                }
            }
            if !(0.0..=1.0).contains(&pp) {
                return Err(ParamError::OutOfRange { name: "p", value: pp, why: "must lie in [0, 1]" }.into());
            }
            base.c_b_or_qb = Some(q_b);
            let obs: Vec<Observable> = probes.iter().map(|pr| match pr {
                Probe::Basic(o) => o.clone(),
                _ => unreachable!("parsed for the rc model"),
            }).collect();
            let g2 = graph.clone();
            let probe: RcProbe<'_> = Box::new(move |eta, _, out| {
                out.extend(obs.iter().map(|o| o.on_rc(&g2, eta)));
                Ok(())
            });
            let mut chain = RcChain::new(&graph, params, &spec.initial_state, probe);
            let s = record(&mut chain, spec, 0)?;
            snapshot.edges = Some(chain.eta.to_snapshot());
            s
        }
        ModelKind::Coupling => {
            let cp = derive_params(p.a.unwrap_or(1.0), p.b.unwrap_or(1.0), require(p.c, "c", cfg.model)?)?;
            let pair = PlanarPair::new(&domain);
            let graph = pair.primal.graph().clone();
            check_edges(&graph, &probes)?;
            let q_b = p.q_b.unwrap_or(cp.q_b);
            base = base.abc(cp.a, cp.b, cp.c);
            base.c_b_or_qb = Some(q_b);
            let obs: Vec<Observable> = probes.iter().map(|pr| match pr {
                Probe::Basic(o) => o.clone(),
                _ => unreachable!("parsed for the coupling model"),
            }).collect();
            let (d2, g2, pair2, cp2) = (domain.clone(), graph.clone(), pair.clone(), cp.clone());
            let last = std::cell::RefCell::new(None);
            let last_ref = &last;
            let probe: RcProbe<'_> = Box::new(move |eta, rng, out| {
                let h = HeightSampler::new(&pair2, d2.clone(), eta, &cp2)?.draw(rng);
                out.extend(obs.iter().map(|o| if o.is_height_observable() { o.on_heights(&h) } else { o.on_rc(&g2, eta) }));
                *last_ref.borrow_mut() = Some(h);
                Ok(())
            });
            let mut chain = RcChain::new(&graph, cp.rc_params(q_b), &spec.initial_state, probe);
            let s = record(&mut chain, spec, 0)?;
            snapshot.edges = Some(chain.eta.to_snapshot());
            drop(chain);
            snapshot.heights = last.into_inner().map(|h| h.to_snapshot());
            s
        }
        ModelKind::At => {
            if domain.parity_class() != ParityClass::Odd {
                return Err(ConfigError::Invalid("the Ashkin-Teller coupling runs on odd domains".into()).into());
            }
            let at = selfdual_params(require(p.j, "J", cfg.model)?)?;
            if let Some(u) = p.u {
                if (u - at.u).abs() > 1e-9 {
                    return Err(ParamError::OutOfRange { name: "U", value: u, why: "must lie on the self-dual curve" }.into());
                }
            }
            let c = at.c.expect("self-dual");
            let params = ModelParams::symmetric(c)?;
            base = base.abc(1.0, 1.0, c);
            (base.j, base.u) = (Some(at.j), Some(at.u));
            let layout = FkLayout::new(domain.clone());
            let mut chain = HeightChain::new(&domain, &Boundary::zero_one(), &params, WeightMode::Plain, at_probe(&layout, &params, &probes))?;
            let s = record(&mut chain, spec, 0)?;
            snapshot.heights = Some(chain.h.to_snapshot());
            s
        }
    };
    let rows = cfg.observables.iter().zip(&series).map(|(name, s)| base.with(name.clone(), &estimate_of(s))).collect();
    Ok(RunOutput { rows, snapshot: Some(snapshot) })
}

/// Reads the Ashkin–Teller probes from a height sample: spins, then `ξ`, `ξ*` and `τ`.
fn at_probe<'a>(layout: &'a FkLayout, params: &'a ModelParams<f64>, probes: &'a [Probe]) -> HeightProbe<'a> {
    let node = |f: FaceCoord| layout.pair().primal.face_node(f).expect("even face of the domain");
    let pairs: Vec<(usize, usize, &Probe)> = probes
        .iter()
        .map(|pr| match pr {
            Probe::TauCorr(u, v) | Probe::XiConn(u, v) | Probe::ProductCorr(u, v) => (node(*u), node(*v), pr),
            Probe::Basic(_) => unreachable!("parsed for the at model"),
        })
        .collect();
    Box::new(move |h, rng, out| {
        let g = layout.even_graph();
        let sigma = height_to_spin(h);
        let xi = sample_xi_given_spins(&sigma, params, rng)?;
        let star = xi.dual();
        let product = layout.even_node_spins(&sigma);
        let tau = sample_tau_given_xi_star(g, &star, &product, rng)?;
        let comp = components(g, &star.open);
        for (u, v, pr) in &pairs {
            out.push(match pr {
                Probe::TauCorr(..) => (tau.tau[*u] * tau.tau[*v]) as f64,
                Probe::XiConn(..) => f64::from(u8::from(comp.label[*u] == comp.label[*v])),
                Probe::ProductCorr(..) => (product[*u] * product[*v]) as f64,
                Probe::Basic(_) => unreachable!(),
            });
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// experiments

/// `Var(h(0,0))` on `Λ_N` with `0,1` boundary for each `(c, N)`, and per `c`
/// the weighted least-squares slope of the variance against `log N`. Sizes
/// with `N ≤ 3` are enumerated exactly and do not enter the fit.
pub fn experiment_variance_scaling(cfg: &VarianceScalingConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    let u = FaceCoord::new(0, 0);
    let tasks: Vec<(usize, f64, u32)> = cfg
        .c_list
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| cfg.n_list.iter().enumerate().map(move |(ni, n)| (ci * cfg.n_list.len() + ni, *c, *n)))
        .collect();
    for c in &cfg.c_list {
        if cfg.a + cfg.b > *c {
            return Err(ParamError::UnsupportedRegime { a: cfg.a, b: cfg.b, c: *c }.into());
        }
    }
    let results: Vec<Result<Vec<ResultRow>, ExperimentError>> = tasks
        .par_iter()
        .map(|&(stream, c, n)| {
            let params = ModelParams::new(cfg.a, cfg.b, c)?;
            let domain = Arc::new(build_diamond(n, u));
            let base = ResultRow::new("variance_scaling").chain(&cfg.chain).size(n).abc(cfg.a, cfg.b, c);
            if n <= 3 {
                let mu = enumerate_heights(&domain, &Boundary::zero_one(), &params, WeightMode::Plain)?;
                let m1 = mu.expectation(|h| h.at(u) as f64);
                let m2 = mu.expectation(|h| (h.at(u) as f64).powi(2));
                return Ok(vec![base.exact("var_h(0,0)".into(), m2 - m1 * m1), base.exact("mean_h(0,0)".into(), m1)]);
            }
            let probe: HeightProbe<'_> = Box::new(move |h, _, out| {
                let x = h.at(u) as f64;
                out.extend([x, x * x]);
                Ok(())
            });
            let mut chain = HeightChain::new(&domain, &Boundary::zero_one(), &params, WeightMode::Plain, probe)?;
            let series = record(&mut chain, &cfg.chain, stream as u64)?;
            let bm = batch_matrix(&series, DEFAULT_BATCHES);
            let (var, se) = jackknife(&bm, |m| m[1] - m[0] * m[0]);
            let mut row = base.derived("var_h(0,0)".into(), var, se);
            row.tau_int = Some(tau_of(&series[1]));
            Ok(vec![row, base.with("mean_h(0,0)".into(), &estimate_of(&series[0]))])
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    for c in &cfg.c_list {
        let pts: Vec<&ResultRow> = rows.iter().filter(|r| r.c == Some(*c) && r.observable == "var_h(0,0)" && r.stderr > 0.0).collect();
        if pts.len() < 2 {
            continue;
        }
        let xs: Vec<f64> = pts.iter().map(|r| (r.n.unwrap() as f64).ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|r| r.estimate).collect();
        let ws: Vec<f64> = pts.iter().map(|r| 1.0 / (r.stderr * r.stderr)).collect();
        let (slope, se) = weighted_slope(&xs, &ys, &ws);
        let mut row = ResultRow::new("variance_scaling").chain(&cfg.chain).abc(cfg.a, cfg.b, *c);
        row = row.derived("var_slope_vs_log_n".into(), slope, se);
        rows.push(row);
    }
    Ok(rows)
}

/// Faces at Euclidean distance at most 2: the step set of augmented connectivity.
const AUGMENTED_STEPS: [(i32, i32); 12] =
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1), (2, 0), (-2, 0), (0, 2), (0, -2)];

/// For every face in `window`, the largest `ℓ¹` distance from it to a face of
/// its cluster of heights outside `{0, 1}` under augmented connectivity, or
/// `None` when its own height is 0 or 1.
pub fn excursion_radii(h: &HeightFunction, window: &[FaceCoord]) -> Vec<Option<i32>> {
    let domain = h.domain();
    let grid = domain.grid();
    let bad = |f: FaceCoord| h.get(f).is_some_and(|v| v != 0 && v != 1) && domain.contains(f);
    let mut uf = UnionFind::new(grid.len());
    for f in domain.faces() {
        if !bad(*f) {
            continue;
        }
        let a = grid.index(*f).unwrap();
        for (di, dj) in AUGMENTED_STEPS {
            let g = f.offset(di, dj);
            if bad(g) {
                uf.union(a, grid.index(g).unwrap());
            }
        }
    }
    // extremes of i+j and i−j per cluster root; ℓ¹ distance is the larger of the two spreads
    let mut ext: std::collections::HashMap<usize, [i32; 4]> = std::collections::HashMap::new();
    for f in domain.faces() {
        if bad(*f) {
            let r = uf.find(grid.index(*f).unwrap());
            let (s, d) = (f.i + f.j, f.i - f.j);
            let e = ext.entry(r).or_insert([s, s, d, d]);
            e[0] = e[0].min(s);
            e[1] = e[1].max(s);
            e[2] = e[2].min(d);
            e[3] = e[3].max(d);
        }
    }
    window
        .iter()
        .map(|f| {
            if !bad(*f) {
                return None;
            }
            let e = ext[&uf.find(grid.index(*f).unwrap())];
            let (s, d) = (f.i + f.j, f.i - f.j);
            Some((s - e[0]).max(e[1] - s).max(d - e[2]).max(e[3] - d))
        })
        .collect()
}

/// Height diagnostics with `0,1` boundary on the rectangle `[−N+1, N] × [−N, N]`,
/// which the reflection `i ↦ 1 − i` maps to itself while swapping parities:
/// the mean of `h(0,0) + h(1,0)`, tail frequencies of excursion radii, and
/// frequency and inner radius of the outermost T-circuit of even faces at
/// height 0 around the centre within growing diamonds.
pub fn experiment_height_gibbs_diagnostics(cfg: &HeightDiagnosticsConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    let params = ModelParams::new(cfg.a, cfg.b, cfg.c)?;
    if cfg.a + cfg.b >= cfg.c {
        return Err(ParamError::OutOfRange { name: "c", value: cfg.c, why: "the diagnostics need a + b < c" }.into());
    }
    let n = cfg.n as i32;
    let domain = Arc::new(build_rectangle(-n + 1, n, -n, n));
    let window: Vec<FaceCoord> = domain.faces().iter().copied().filter(|f| f.i.abs() + f.j.abs() <= n / 2).collect();
    let boxes: Vec<u32> = match &cfg.circuit_boxes {
        Some(b) => b.clone(),
        None => (1..).map(|k| 1u32 << k).take_while(|k| *k <= cfg.n).collect(),
    };
    let diamonds: Vec<Domain> = boxes.iter().map(|k| build_diamond(*k, FaceCoord::new(0, 0))).collect();
    let rmax = cfg.max_radius;
    let (o, e1) = (FaceCoord::new(0, 0), FaceCoord::new(1, 0));
    let w2 = window.clone();
    let probe: HeightProbe<'_> = Box::new(move |h, _, out| {
        out.push((h.at(o) + h.at(e1)) as f64);
        let radii = excursion_radii(h, &w2);
        for r in 0..=rmax as i32 {
            let hits = radii.iter().filter(|x| x.is_some_and(|x| x >= r)).count();
            out.push(hits as f64 / w2.len() as f64);
        }
        for d in &diamonds {
            match exteriormost_t_circuit(|f| h.get(f) == Some(0), d, o, Parity::Even) {
                Some(circ) => {
                    let inner = circ.faces.iter().map(|f| f.i.abs() + f.j.abs()).min().unwrap_or(0);
                    out.extend([1.0, inner as f64]);
                }
                None => out.extend([0.0, 0.0]),
            }
        }
        Ok(())
    });
    let mut chain = HeightChain::new(&domain, &Boundary::zero_one(), &params, WeightMode::Plain, probe)?;
    let series = record(&mut chain, &cfg.chain, 0)?;
    let base = ResultRow::new("height_gibbs_diagnostics").chain(&cfg.chain).size(cfg.n).abc(cfg.a, cfg.b, cfg.c);
    let mut rows = vec![base.with("mean_h(0,0)+h(1,0)".into(), &estimate_of(&series[0]))];
    let bm = batch_matrix(&series, DEFAULT_BATCHES);
    let tails = &series[1..rmax + 2];
    let mut fit_r = Vec::new();
    for (r, s) in tails.iter().enumerate() {
        rows.push(base.with(format!("excursion_tail(r={r})"), &estimate_of(s)));
        if r >= 1 && bm[1 + r].iter().all(|x| *x > 0.0) {
            fit_r.push(r);
        }
    }
    if fit_r.len() >= 2 {
        let xs: Vec<f64> = fit_r.iter().map(|r| *r as f64).collect();
        let cols: Vec<usize> = fit_r.iter().map(|r| 1 + r).collect();
        let (slope, se) = jackknife(&bm, |m| ols_slope(&xs, &cols.iter().map(|k| m[*k].ln()).collect::<Vec<_>>()));
        rows.push(base.derived("excursion_tail_log_slope".into(), slope, se));
    }
    let off = rmax + 2;
    for (k, b) in boxes.iter().enumerate() {
        let (f, r) = (off + 2 * k, off + 2 * k + 1);
        rows.push(base.with(format!("tcircuit_freq(k={b})"), &estimate_of(&series[f])));
        let (mean_r, se_r) = jackknife(&bm, |m| if m[f] > 0.0 { m[r] / m[f] } else { f64::NAN });
        rows.push(base.derived(format!("tcircuit_inner_radius(k={b})"), mean_r, se_r));
    }
    Ok(rows)
}

/// Ashkin–Teller correlations on the self-dual curve through the coupling
/// with heights on `Λ_N(1,0)`: `τ(0)τ(x)` read directly and through
/// `ξ*`-connectivity, `ττ′(0)ττ′(x)`, and the decay rate of the connectivity
/// estimate fitted over distances where it exceeds three standard errors.
pub fn experiment_at_selfdual(cfg: &AtSelfdualConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    let domain = Arc::new(build_diamond(cfg.n, FaceCoord::new(1, 0)));
    let layout = FkLayout::new(domain.clone());
    let o = FaceCoord::new(0, 0);
    let mut probes = Vec::new();
    for x in &cfg.distances {
        let v = FaceCoord::new(*x, 0);
        probes.extend([Probe::TauCorr(o, v), Probe::XiConn(o, v), Probe::ProductCorr(o, v)]);
    }
    check_faces(&domain, &probes)?;
    let mut rows = Vec::new();
    for (stream, j) in cfg.j_list.iter().enumerate() {
        let at = selfdual_params(*j)?;
        if at.regime != AtRegime::JBelowU {
            return Err(ParamError::OutOfRange { name: "J", value: *j, why: "the decay fit needs J < U on the self-dual curve" }.into());
        }
        let c = at.c.expect("self-dual");
        let params = ModelParams::symmetric(c)?;
        let mut chain = HeightChain::new(&domain, &Boundary::zero_one(), &params, WeightMode::Plain, at_probe(&layout, &params, &probes))?;
        let series = record(&mut chain, &cfg.chain, stream as u64)?;
        let mut base = ResultRow::new("at_selfdual").chain(&cfg.chain).size(cfg.n).abc(1.0, 1.0, c);
        (base.j, base.u) = (Some(at.j), Some(at.u));
        let bm = batch_matrix(&series, DEFAULT_BATCHES);
        let mut fit = Vec::new();
        for (k, x) in cfg.distances.iter().enumerate() {
            let (direct, conn, prod) = (estimate_of(&series[3 * k]), estimate_of(&series[3 * k + 1]), estimate_of(&series[3 * k + 2]));
            rows.push(base.with(format!("tau_corr_direct(x={x})"), &direct));
            rows.push(base.with(format!("tau_corr_xi_conn(x={x})"), &conn));
            rows.push(base.with(format!("product_corr(x={x})"), &prod));
            let diff: Vec<f64> = series[3 * k].iter().zip(&series[3 * k + 1]).map(|(a, b)| a - b).collect();
            rows.push(base.with(format!("tau_estimator_gap(x={x})"), &estimate_of(&diff)));
            if conn.mean > 3.0 * conn.stderr {
                fit.push((*x as f64, 3 * k + 1));
            }
        }
        if fit.len() >= 2 {
            let xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
            let (alpha, se) = jackknife(&bm, |m| -ols_slope(&xs, &fit.iter().map(|p| m[p.1].ln()).collect::<Vec<_>>()));
            rows.push(base.derived("tau_decay_rate".into(), alpha, se));
        } else {
            rows.push(base.derived("tau_decay_rate".into(), f64::NAN, f64::NAN));
        }
    }
    Ok(rows)
}

/// Default boundary-cluster weights: `1, e^{−λ}√q, e^{λ}√q, q` with
/// `cosh λ = √q / 2` (λ = 0 when `q ≤ 4`), duplicates removed.
pub fn default_qb_list(q: f64) -> Vec<f64> {
    let sq = q.sqrt();
    let lambda = (sq / 2.0).max(1.0).acosh();
    let mut out: Vec<f64> = Vec::new();
    for x in [1.0, (-lambda).exp() * sq, lambda.exp() * sq, q] {
        if !out.iter().any(|y| (y - x).abs() < 1e-12) {
            out.push(x);
        }
    }
    out
}

/// Random-cluster observables at `p_c(q)` on the even corner graph of `Λ_N`
/// for several boundary-cluster weights: edge density in the central window
/// of edges at vertices with `|x| + |y| ≤ r`, over the whole graph, and the
/// probability that the centre is connected to the boundary.
pub fn experiment_qb_interpolation(cfg: &QbInterpolationConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    let q = cfg.q;
    let p = p_critical(q)?;
    let domain = build_diamond(cfg.n, FaceCoord::new(0, 0));
    let pair = PlanarPair::new(&domain);
    let graph = pair.primal.graph().clone();
    let r = cfg.window_radius.unwrap_or(cfg.n / 4).max(1) as i32;
    let window: Vec<usize> = (0..pair.num_edges())
        .filter(|z| {
            let v = pair.primal_domain_vertex(*z);
            v.x2.abs() + v.y2.abs() <= 2 * r
        })
        .collect();
    let centre = pair.primal.face_node(FaceCoord::new(0, 0)).expect("centre face is even");
    let qbs = cfg.q_b_list.clone().unwrap_or_else(|| default_qb_list(q));
    let obs = [Observable::EdgeSetDensity(window), Observable::EdgeDensity, Observable::ConnectedToBoundary(centre)];
    let names = ["edge_density_window", "edge_density", "center_connected_to_boundary"];
    let results: Vec<Result<Vec<ResultRow>, ExperimentError>> = qbs
        .par_iter()
        .enumerate()
        .map(|(stream, q_b)| {
            let params = RcParams::new(q, *q_b, p);
            let g2 = &graph;
            let obs = &obs;
            let probe: RcProbe<'_> = Box::new(move |eta, _, out| {
                out.extend(obs.iter().map(|o| o.on_rc(g2, eta)));
                Ok(())
            });
            let mut chain = RcChain::new(&graph, params, &cfg.chain.initial_state, probe);
            let series = record(&mut chain, &cfg.chain, stream as u64)?;
            let mut base = ResultRow::new("qb_interpolation").chain(&cfg.chain).size(cfg.n);
            base.c_b_or_qb = Some(*q_b);
            Ok(names.iter().zip(&series).map(|(nm, s)| base.with(format!("{nm}(q={})", fmt_num(q)), &estimate_of(s))).collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Arrow statistics on `Λ_N` with `0,1` boundary: `P(A(e))` for the edge
/// between faces `(0,0)` and `(1,0)`, where `A(e)` means the even face lies
/// left of the arrow, the same for its translate `f`, and the covariance of
/// the two events.
pub fn experiment_arrow_bias(cfg: &ArrowBiasConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    let params = ModelParams::new(cfg.a, cfg.b, cfg.c)?;
    let domain = Arc::new(build_diamond(cfg.n, FaceCoord::new(0, 0)));
    let (e0, e1) = (FaceCoord::new(0, 0), FaceCoord::new(1, 0));
    let (f0, f1) = (e0.offset(cfg.offset[0], cfg.offset[1]), e1.offset(cfg.offset[0], cfg.offset[1]));
    for f in [f0, f1] {
        if !domain.contains(f) {
            return Err(ConfigError::Invalid("the translated edge leaves the domain".into()).into());
        }
    }
    // A(e): h(odd) − h(even) = +1 across the edge
    let probe: HeightProbe<'_> = Box::new(move |h, _, out| {
        let ae = f64::from(u8::from(h.at(e1) - h.at(e0) == 1));
        let af = f64::from(u8::from(h.at(f1) - h.at(f0) == 1));
        out.extend([ae, af, ae * af]);
        Ok(())
    });
    let mut chain = HeightChain::new(&domain, &Boundary::zero_one(), &params, WeightMode::Plain, probe)?;
    let series = record(&mut chain, &cfg.chain, 0)?;
    let base = ResultRow::new("arrow_bias").chain(&cfg.chain).size(cfg.n).abc(cfg.a, cfg.b, cfg.c);
    let pe = estimate_of(&series[0]);
    let bm = batch_matrix(&series, DEFAULT_BATCHES);
    let (cov, cov_se) = jackknife(&bm, |m| m[2] - m[0] * m[1]);
    let (bias, bias_se) = jackknife(&bm, |m| m[0] - 0.5);
    Ok(vec![
        base.with("P(A(e))".into(), &pe),
        base.with("P(A(f))".into(), &estimate_of(&series[1])),
        base.with("P(A(e)A(f))".into(), &estimate_of(&series[2])),
        base.derived("arrow_bias".into(), bias, bias_se),
        base.derived("arrow_pair_covariance".into(), cov, cov_se),
    ])
}

/// Runs whatever the config describes.
pub fn run_config(cfg: &RunConfig) -> Result<RunOutput, ExperimentError> {
    let rows = match cfg {
        RunConfig::Chain(c) => return run_chain_config(c),
        RunConfig::VarianceScaling(c) => experiment_variance_scaling(c)?,
        RunConfig::HeightGibbsDiagnostics(c) => experiment_height_gibbs_diagnostics(c)?,
        RunConfig::AtSelfdual(c) => experiment_at_selfdual(c)?,
        RunConfig::QbInterpolation(c) => experiment_qb_interpolation(c)?,
        RunConfig::ArrowBias(c) => experiment_arrow_bias(c)?,
    };
    Ok(RunOutput { rows, snapshot: None })
}

// ---------------------------------------------------------------------------
// oracle suites

fn diamond(n: u32, i: i32) -> Arc<Domain> {
    Arc::new(build_diamond(n, FaceCoord::new(i, 0)))
}

fn surd_params(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> Result<CouplingParams<Surd>, ParamError> {
    derive_params(Surd::ratio(a.0, a.1), Surd::ratio(b.0, b.1), Surd::ratio(c.0, c.1))
}

fn verdict_report(identity: &str, domain: &str, params: String, pass: bool, witness: impl FnOnce() -> String) -> IdentityReport {
    let mut r = IdentityReport::new(identity, domain, &params);
    if !pass {
        r.fail(witness());
    }
    r
}

/// Coupling marginals and the cluster-form/edge-form ratio on `Λ_1`, `Λ_2`
/// and the 3×2 rectangle, exact.
pub fn oracle_coupling() -> Result<Vec<IdentityReport>, OracleError> {
    let grid = [
        surd_params((1, 1), (1, 1), (2, 1))?,
        surd_params((1, 1), (1, 1), (5, 2))?,
        surd_params((1, 1), (1, 1), (3, 1))?,
        surd_params((1, 1), (5, 2), (9, 2))?,
    ];
    let domains = [diamond(1, 0), diamond(2, 0), Arc::new(build_rectangle(0, 2, 0, 1))];
    let mut out = Vec::new();
    for d in &domains {
        for p in &grid {
            out.extend(marginal_checks(d, p)?);
        }
    }
    Ok(out)
}

/// Detailed balance and unit row sums of every single-site kernel, exact.
pub fn oracle_samplers() -> Result<Vec<IdentityReport>, OracleError> {
    let mut out = Vec::new();
    for n in [1, 2] {
        let d = diamond(n, 0);
        for c in [Surd::from_i64(2), Surd::from_i64(3), Surd::ratio(5, 2)] {
            let params = ModelParams::symmetric(c.clone())?;
            let (mu, kernels) = height_site_kernels(&d, &Boundary::zero_one(), &params, WeightMode::Plain)?;
            let pi = mu.probabilities();
            let ok = kernels.iter().all(|k| k.row_sums_are_one() && k.detailed_balance(&pi));
            let mut r = verdict_report("height_kernel_detailed_balance", &format!("{}faces", d.num_faces()), format!("c={:.4}", c.to_f64()), ok, || "a kernel fails detailed balance".into());
            r.atoms = mu.len();
            out.push(r);
        }
    }
    let pair = PlanarPair::new(&build_diamond(1, FaceCoord::new(0, 0)));
    let g = pair.primal.graph();
    for (q, qb) in [(Surd::from_i64(2), Surd::one()), (Surd::ratio(9, 2), Surd::one()), (Surd::from_i64(9), Surd::from_i64(3))] {
        let p = p_critical_from_sqrt(q.sqrt().expect("square root in the field"));
        let params = RcParams::new(q.clone(), qb.clone(), p);
        let (mu, kernels) = rc_edge_kernels(g, &params)?;
        let pi = mu.probabilities();
        let ok = kernels.iter().all(|k| k.row_sums_are_one() && k.detailed_balance(&pi));
        let mut r = verdict_report("rc_kernel_detailed_balance", &format!("{}edges", g.num_edges()), format!("q={:.4} q_b={:.4}", q.to_f64(), qb.to_f64()), ok, || "a kernel fails detailed balance".into());
        r.atoms = mu.len();
        out.push(r);
    }
    Ok(out)
}

/// Lattice-condition checks: heights on `Λ_2` over a 5×5×5 grid restricted
/// to `c ≥ max(a,b)`, random-cluster on two graphs with at most 8 edges, the
/// even-face spin marginal with plus boundaries, and the counterexample under
/// a split odd boundary.
pub fn oracle_fkg() -> Result<Vec<IdentityReport>, OracleError> {
    let mut out = Vec::new();
    let d2 = diamond(2, 0);
    let vals = [Surd::one(), Surd::ratio(3, 2), Surd::from_i64(2), Surd::ratio(5, 2), Surd::from_i64(3)];
    for a in &vals {
        for b in &vals {
            for c in &vals {
                if c.total_cmp(a).is_lt() || c.total_cmp(b).is_lt() {
                    continue;
                }
                let params = ModelParams::new(a.clone(), b.clone(), c.clone())?;
                let mu = enumerate_heights(&d2, &Boundary::zero_one(), &params, WeightMode::Plain)?;
                let v = fkg_lattice_check(&mu)?;
                let text = format!("a={:.2} b={:.2} c={:.2}", a.to_f64(), b.to_f64(), c.to_f64());
                out.push(verdict_report("height_fkg", &format!("{}faces", d2.num_faces()), text, v == FkgVerdict::Pass, || format!("{v:?}")));
            }
        }
    }
    let graphs = [
        PlanarPair::new(&build_diamond(1, FaceCoord::new(0, 0))).primal.graph().clone(),
        PlanarPair::new(&build_rectangle(0, 1, 0, 0)).primal.graph().clone(),
    ];
    for g in &graphs {
        if g.num_edges() > 8 {
            return Err(OracleError::TooLarge { what: "edges", size: g.num_edges(), cap: 8 });
        }
        for q in [Surd::one(), Surd::from_i64(2), Surd::ratio(9, 2), Surd::from_i64(9)] {
            let sq = q.sqrt().expect("square root in the field");
            for qb in [Surd::one(), sq.clone(), q.clone()] {
                let params = RcParams::new(q.clone(), qb.clone(), p_critical_from_sqrt(sq.clone()));
                let mu = enumerate_rc(g, &params)?;
                let v = fkg_lattice_check(&mu)?;
                let text = format!("q={:.3} q_b={:.3}", q.to_f64(), qb.to_f64());
                out.push(verdict_report("rc_fkg", &format!("{}edges", g.num_edges()), text, v == FkgVerdict::Pass, || format!("{v:?}")));
            }
        }
    }
    let spin_domains = [diamond(2, 1), Arc::new(build_rectangle(0, 2, 0, 1))];
    for d in &spin_domains {
        for c in [Surd::from_i64(2), Surd::ratio(5, 2), Surd::from_i64(3)] {
            let params = ModelParams::symmetric(c.clone())?;
            let mu = sigma_bullet_marginal(d, &Boundary::zero_one(), &params, WeightMode::Plain)?;
            let v = fkg_lattice_check(&mu)?;
            out.push(verdict_report("sigma_bullet_fkg_plus", &format!("{}faces", d.num_faces()), format!("c={:.2}", c.to_f64()), v == FkgVerdict::Pass, || format!("{v:?}")));
        }
    }
    let rect = Arc::new(build_rectangle(0, 2, 0, 1));
    let split = Boundary::from_fn(&rect, |u: FaceCoord| if u.parity() == Parity::Even { 0 } else if u.i <= 0 { 1 } else { -1 });
    let ce = find_sigma_bullet_counterexample(&rect, &split, &ModelParams::symmetric(Surd::from_i64(2))?)?;
    let mut r = IdentityReport::new("sigma_bullet_split_boundary_counterexample", "6faces", "c=2");
    match ce {
        Some(ce) if ce.p_u_minus > 0.0 && ce.p_v_minus > 0.0 => {
            r.witness = Some(format!(
                "u=({},{}) v=({},{}) P(u-)={:.5} P(v-)={:.5} P(both-)=0",
                ce.u.i, ce.u.j, ce.v.i, ce.v.j, ce.p_u_minus, ce.p_v_minus
            ));
        }
        _ => r.fail("no pair with P(both minus) = 0 and positive singles".into()),
    }
    out.push(r);
    Ok(out)
}

/// `0, e^{−λ/2}, 1, e^{λ/2}, ∞` for `a = b = 1`.
fn cb_ladder(c: i64) -> Result<Vec<Cb<Surd>>, OracleError> {
    let p = derive_params(Surd::one(), Surd::one(), Surd::from_i64(c))?;
    let half = p.exp_lambda.sqrt().ok_or(ParamError::OutOfRange { name: "c", value: c as f64, why: "e^{λ/2} outside the field" })?;
    Ok(vec![Cb::Finite(Surd::zero()), Cb::Finite(Surd::one() / half.clone()), Cb::Finite(Surd::one()), Cb::Finite(half), Cb::Infinite])
}

/// The sandwich and `c_b`-order on `Λ_2`, and the spin version on the odd diamond `Λ_2(1,0)`.
pub fn oracle_monotonicity() -> Result<Vec<IdentityReport>, OracleError> {
    let mut out = Vec::new();
    for c in [2, 3] {
        let params = ModelParams::symmetric(Surd::from_i64(c))?;
        out.extend(cb_monotonicity_suite(&diamond(2, 0), &params, &cb_ladder(c)?)?);
        out.extend(cb_spin_monotonicity_suite(&diamond(2, 1), &params, &cb_ladder(c)?)?);
    }
    Ok(out)
}

/// FK–Ising identities and the Ashkin–Teller joint law on `Λ_2(1,0)` (four even
/// faces) at `J = ¼ log 3` (exact, `c = 2`) and `J = 0.2` (floating point),
/// plus the self-dual parameter algebra.
pub fn oracle_fk_ising() -> Result<Vec<IdentityReport>, OracleError> {
    let d = diamond(2, 1);
    let mut out = fk_ising_checks(&d, &Surd::from_i64(2))?;
    out.extend(at_joint_check(&d, &Surd::from_i64(2))?);
    let p = selfdual_params(0.2)?;
    out.extend(fk_ising_checks(&d, &p.c.expect("self-dual"))?);
    out.extend(at_joint_check_exp(&d, &p)?);
    for j in [0.25 * 3f64.ln(), 0.2] {
        let p = selfdual_params(j)?;
        let (r1, r2) = p.identity_residuals().expect("self-dual");
        let mut r = IdentityReport::new("selfdual_identities", "-", &format!("J={j:.6}"));
        r.max_deviation = r1.max(r2);
        if r.max_deviation > 1e-12 {
            r.fail(format!("residuals {r1:.3e} {r2:.3e}"));
        }
        out.push(r);
    }
    Ok(out)
}

/// Euler's relation `k(η*) − k(η) − 1 = o(η) − |V(D•)|` on `m` random
/// configurations of the corner graph of `Λ_4`, seeded.
pub fn euler_identity_report(m: usize, seed: u64) -> IdentityReport {
    use rand::Rng;
    let pair = PlanarPair::new(&build_diamond(4, FaceCoord::new(0, 0)));
    let g = pair.primal.graph();
    let mut rng = chain_rng(seed, 0);
    let mut r = IdentityReport::new("euler_identity", &format!("{}edges", g.num_edges()), &format!("configs={m}"));
    r.atoms = m;
    for _ in 0..m {
        let open: Vec<bool> = (0..g.num_edges()).map(|_| rng.gen::<bool>()).collect();
        let k = components(g, &open).count as i64;
        let dual: Vec<bool> = open.iter().map(|b| !b).collect();
        let k_star = components(&pair.dual, &dual).count as i64;
        let o = open.iter().filter(|b| **b).count() as i64;
        if k_star - k - 1 != o - g.num_vertices as i64 {
            r.fail(format!("k*={k_star} k={k} o={o}"));
            break;
        }
    }
    r
}

/// Euler's relation on random configurations, every round trip between
/// representations on `Λ_2`, and the shift map `h ↦ 1 − h(· − (1,0))`
/// between the `c_b = e^{λ/2}` measures on `Λ_2(0,0)` and `Λ_2(1,0)`.
pub fn oracle_structural() -> Result<Vec<IdentityReport>, OracleError> {
    let mut out = vec![euler_identity_report(10_000, 2024)];
    let d = diamond(2, 0);
    let hs = enumerate_height_functions(&d, &Boundary::zero_one())?;
    let anchor = d.halo()[0];
    let label = format!("{}faces", d.num_faces());
    let mut spin = IdentityReport::new("roundtrip_height_spin", &label, "all");
    let mut arrow = IdentityReport::new("roundtrip_height_arrows", &label, "all");
    let mut snap = IdentityReport::new("roundtrip_height_snapshot", &label, "all");
    for h in &hs {
        let back = spin_to_height(&height_to_spin(h), anchor, h.at(anchor)).ok();
        if back.as_ref() != Some(h) {
            spin.fail(format!("{h:?}"));
        }
        let back = arrows_to_height(&height_to_arrows(h), anchor, h.at(anchor)).ok();
        if back.as_ref() != Some(h) {
            arrow.fail(format!("{h:?}"));
        }
        if HeightFunction::from_snapshot(d.clone(), &h.to_snapshot()).ok().as_ref() != Some(h) {
            snap.fail(format!("{h:?}"));
        }
    }
    for r in [&mut spin, &mut arrow, &mut snap] {
        r.atoms = hs.len();
    }
    out.extend([spin, arrow, snap]);
    let pair = PlanarPair::new(&d);
    let m = pair.num_edges();
    let mut dual = IdentityReport::new("rc_duality_and_snapshot", &label, "all");
    dual.atoms = 1 << m;
    for mask in 0u64..(1u64 << m) {
        let eta = RcConfig::from_mask(m, mask);
        let snap_ok = RcConfig::from_snapshot(&eta.to_snapshot(), m).ok().as_ref() == Some(&eta);
        if eta.dual().dual() != eta || !snap_ok {
            dual.fail(format!("mask {mask:#x}"));
            break;
        }
    }
    out.push(dual);
    let shifted = Arc::new(d.translate(1, 0));
    for c in [2, 3] {
        let p = derive_params(Surd::one(), Surd::one(), Surd::from_i64(c))?;
        let half = p.exp_lambda.sqrt().ok_or(ParamError::OutOfRange { name: "c", value: c as f64, why: "e^{λ/2} outside the field" })?;
        let params = ModelParams::symmetric(Surd::from_i64(c))?.with_cb(Cb::Finite(half));
        let mu = enumerate_heights(&d, &Boundary::zero_one(), &params, WeightMode::BoundaryCb)?;
        let nu = enumerate_heights(&shifted, &Boundary::zero_one(), &params, WeightMode::BoundaryCb)?;
        let (ok, dev) = pushforward_equality_check(&mu, |h| shift_one_minus(h, &shifted), &nu)?;
        let mut r = verdict_report("shift_one_minus_pushforward", &label, format!("c={c} c_b=e^(lambda/2)"), ok, || format!("deviation {dev:.3e}"));
        r.max_deviation = dev;
        r.atoms = mu.len();
        out.push(r);
    }
    Ok(out)
}

/// Runs a named suite, or every suite for `"all"`.
pub fn oracle_suite(name: &str) -> Result<Vec<IdentityReport>, ExperimentError> {
    let run = |n: &str| -> Result<Vec<IdentityReport>, ExperimentError> {
        Ok(match n {
            "coupling" => oracle_coupling()?,
            "samplers" => oracle_samplers()?,
            "fkg" => oracle_fkg()?,
            "monotonicity" => oracle_monotonicity()?,
            "fk_ising" => oracle_fk_ising()?,
            "structural" => oracle_structural()?,
            other => return Err(ConfigError::Invalid(format!("unknown oracle suite `{other}`; known: all, {}", ORACLE_SUITES.join(", "))).into()),
        })
    };
    if name == "all" {
        let mut out = Vec::new();
        for n in ORACLE_SUITES {
            out.extend(run(n)?);
        }
        Ok(out)
    } else {
        run(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_of_mean_matches_batch_error() {
        let batches = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let (m, se) = jackknife(&batches, |m| m[0]);
        assert!((m - 2.5).abs() < 1e-12);
        // for the mean the jackknife error equals the batch-means error
        let sd = (batches[0].iter().map(|x| (x - 2.5f64).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((se - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_slope_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 + 2.0 * x).collect();
        let (b, _) = weighted_slope(&xs, &ys, &[1.0, 2.0, 1.0, 3.0]);
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn default_qb_lists() {
        let l = default_qb_list(9.0);
        assert_eq!(l.len(), 4);
        assert!((l[1] - (3.0 - 5f64.sqrt()) * 1.5).abs() < 1e-9 || (l[1] * l[2] - 9.0).abs() < 1e-9);
        assert_eq!(default_qb_list(2.0).len(), 3);
    }

    #[test]
    fn excursions_on_flat_and_bumped_heights() {
        let d = Arc::new(build_diamond(3, FaceCoord::new(0, 0)));
        let flat = HeightFunction::flat(d.clone(), 0, 1).unwrap();
        let w = d.faces().to_vec();
        assert!(excursion_radii(&flat, &w).iter().all(Option::is_none));
        let bump = HeightFunction::new(d.clone(), &Boundary::zero_one(), |f| if f == FaceCoord::new(0, 0) { 2 } else { flat.at(f) }).unwrap();
        let radii = excursion_radii(&bump, &[FaceCoord::new(0, 0), FaceCoord::new(1, 0)]);
        assert_eq!(radii, vec![Some(0), None]);
    }

    #[test]
    fn config_errors_carry_positions() {
        let text = "{\"arrow_bias\": {\n  \"c\": 3, \"n\": 8,\n  \"chain\": {\"sweeps\": 10}\n}}";
        match parse_config(text) {
            Err(ConfigError::Json { line, msg, .. }) => {
                assert!(msg.contains("seed"), "{msg}");
                assert!(line >= 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
