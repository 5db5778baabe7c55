//! Experiment specs, scenario presets, sweeps and result emission.
//!
//! A spec is a TOML file; every scenario produces a flat table of
//! `(sweep_value, metric, value, stderr, flags)` rows written as CSV or JSON,
//! plus a JSON manifest sidecar with the fully resolved spec.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::CosGainModel;
use crate::net::{BsRef, CoordinationRule, NetworkConfig, ServingRule, TierParams};
use crate::overhead::{
    cos_probability, cos_time_fraction, cos_time_fraction_mc_seeded, expected_delta, DelayDist, DurationModel,
    LifetimeDist,
};
use crate::sir::{ccdf_lower_bound, ccdf_upper_bound, BoundInputs, CcdfEstimate, SirSimulator};
use crate::throughput::{cos_count_pmf, ergodic_throughput_mc_paired, poisson_binomial_pmf};

pub const VERSION: &str = env!("HETCOMP_VERSION");

pub const DEFAULT_CCDF_TRIALS: u64 = 100_000;
pub const DEFAULT_THROUGHPUT_GEOMETRIES: u64 = 10_000;
pub const DEFAULT_FADING_PER_GEOMETRY: u32 = 10;
pub const DEFAULT_RENEWAL_BLOCKS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TimeFractionSweep,
    ThroughputVsDelayNonadaptive,
    ThroughputVsDelayAdaptive,
    CcdfVsBounds,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::TimeFractionSweep,
        Scenario::ThroughputVsDelayNonadaptive,
        Scenario::ThroughputVsDelayAdaptive,
        Scenario::CcdfVsBounds,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TimeFractionSweep => "time-fraction-sweep",
            Scenario::ThroughputVsDelayNonadaptive => "throughput-vs-delay-nonadaptive",
            Scenario::ThroughputVsDelayAdaptive => "throughput-vs-delay-adaptive",
            Scenario::CcdfVsBounds => "ccdf-vs-bounds",
            Scenario::Custom => "custom",
        }
    }

    fn default_axis(self) -> SweepAxis {
        match self {
            Scenario::TimeFractionSweep => SweepAxis::WindowMs,
            Scenario::ThroughputVsDelayNonadaptive | Scenario::ThroughputVsDelayAdaptive => SweepAxis::MeanDelayMs,
            Scenario::CcdfVsBounds => SweepAxis::Beta,
            Scenario::Custom => SweepAxis::MeanDelayMs,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Waiting window w.
    WindowMs,
    /// Mean overhead delay, realized as D ~ U[0, 2·mean].
    MeanDelayMs,
    /// SIR threshold β (linear).
    Beta,
}

/// Grid of sweep values: explicit `values`, or `start`/`stop` with either
/// `step` or `count` (log-spaced when `log = true`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
}

impl Sweep {
    pub fn explicit(axis: SweepAxis, values: Vec<f64>) -> Self {
        Self { axis, values: Some(values), start: None, stop: None, step: None, count: None, log: false }
    }

    pub fn range(axis: SweepAxis, start: f64, stop: f64, step: f64) -> Self {
        Self { axis, values: None, start: Some(start), stop: Some(stop), step: Some(step), count: None, log: false }
    }

    pub fn log_spaced(axis: SweepAxis, start: f64, stop: f64, count: usize) -> Self {
        Self { axis, values: None, start: Some(start), stop: Some(stop), step: None, count: Some(count), log: true }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match (&self.values, self.start, self.stop, self.step, self.count) {
            (Some(v), None, None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h), None) if !self.log => {
                if !(h > 0.0) || !(b >= a) {
                    return Err(Error::Config("sweep needs step > 0 and stop >= start".into()));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize;
                (0..=n).map(|i| a + i as f64 * h).collect()
            }
            (None, Some(a), Some(b), None, Some(n)) => {
                if n == 0 || !(b >= a) || (self.log && !(a > 0.0)) {
                    return Err(Error::Config("sweep needs count >= 1, stop >= start (and start > 0 for log)".into()));
                }
                let at = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                if self.log {
                    let (la, lb) = (a.ln(), b.ln());
                    (0..n).map(|i| (la + (lb - la) * at(i)).exp()).collect()
                } else {
                    (0..n).map(|i| a + (b - a) * at(i)).collect()
                }
            }
            _ => {
                return Err(Error::Config(
                    "sweep: give either `values`, or `start`+`stop` with `step` or `count`".into(),
                ))
            }
        };
        if pts.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if pts.iter().any(|x| !x.is_finite()) || pts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep grid must be finite and strictly ascending".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub seed: u64,
    /// Geometry draws (throughput), trials (CCDF) or renewal blocks (time fraction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fading_per_geometry: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub cos_gain: CosGainModel,
    /// Mix COS counts with a Poisson-binomial over per-member probabilities.
    #[serde(default)]
    pub per_link_eta: bool,
    pub network: NetworkConfig,
    pub durations: DurationModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// The three-tier network used by the presets: n = (8, 4, 2),
/// α = (4, 3.5, 3), p = (40, 5, 0.5) W, b = 3(n − 1), densities
/// (1e-6, 5e-6, 2e-5) BS/m², |S| = 1, served by the nearest tier-1 BS.
pub fn preset_network() -> NetworkConfig {
    let tier = |id: u32, density: f64, power: f64, antennas: usize, alpha: f64| TierParams {
        tier_id: id,
        density_per_m2: density,
        power_w: power,
        antennas,
        path_loss_exp: alpha,
        feedback_bits: 3 * (antennas as u32 - 1),
    };
    let mut cfg = NetworkConfig::new(
        vec![tier(1, 1e-6, 40.0, 8, 4.0), tier(2, 5e-6, 5.0, 4, 3.5), tier(3, 2e-5, 0.5, 2, 3.0)],
        1,
    );
    cfg.serving = ServingRule::FixedTier(0);
    cfg
}

/// L ~ Exp(80 ms), D ~ U[0, 150 ms], w = 70 ms.
pub fn preset_durations() -> DurationModel {
    DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Uniform { max_ms: 150.0 }, 70.0)
}

impl ExperimentSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let mut spec = Self {
            scenario,
            seed: 1,
            trials: None,
            fading_per_geometry: None,
            output_path: None,
            cos_gain: CosGainModel::default(),
            per_link_eta: false,
            network: preset_network(),
            durations: preset_durations(),
            sweep: None,
        };
        spec.sweep = Some(spec.default_sweep());
        spec
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn default_sweep(&self) -> Sweep {
        match self.scenario.default_axis() {
            SweepAxis::WindowMs => Sweep::range(SweepAxis::WindowMs, 1.0, 150.0, 1.0),
            SweepAxis::MeanDelayMs => Sweep::range(SweepAxis::MeanDelayMs, 0.0, 150.0, 10.0),
            SweepAxis::Beta => Sweep::log_spaced(SweepAxis::Beta, 0.01, 10.0, 20),
        }
    }

    fn is_throughput(&self) -> bool {
        self.axis() != SweepAxis::Beta && self.scenario != Scenario::TimeFractionSweep
    }

    fn axis(&self) -> SweepAxis {
        self.sweep.as_ref().map_or(self.scenario.default_axis(), |s| s.axis)
    }

    pub fn trials_or_default(&self) -> u64 {
        self.trials.unwrap_or(match self.scenario {
            Scenario::TimeFractionSweep => DEFAULT_RENEWAL_BLOCKS,
            _ if self.is_throughput() => DEFAULT_THROUGHPUT_GEOMETRIES,
            _ => DEFAULT_CCDF_TRIALS,
        })
    }

    pub fn fading_or_default(&self) -> u32 {
        self.fading_per_geometry
            .unwrap_or(if self.is_throughput() { DEFAULT_FADING_PER_GEOMETRY } else { 1 })
    }

    /// Copy with every defaulted field made explicit.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        s.trials = Some(self.trials_or_default());
        s.fading_per_geometry = Some(self.fading_or_default());
        if s.sweep.is_none() {
            s.sweep = Some(self.default_sweep());
        }
        if let Some(sw) = &s.sweep {
            if let Ok(points) = sw.points() {
                s.sweep = Some(Sweep::explicit(sw.axis, points));
            }
        }
        s.network.sim_radius_m = Some(self.network.radius());
        s
    }

    /// Configuration errors and warnings; never fails itself.
    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        if self.trials == Some(0) {
            d.error("trials", "must be >= 1");
        }
        if self.fading_per_geometry == Some(0) {
            d.error("fading_per_geometry", "must be >= 1");
        }
        if let Err(e) = self.network.validate() {
            d.error("network", e.to_string());
        }
        if let Err(e) = self.durations.validate() {
            d.error("durations", e.to_string());
        }
        let sweep = self.sweep.clone().unwrap_or_else(|| self.default_sweep());
        match sweep.points() {
            Err(e) => d.error("sweep", e.to_string()),
            Ok(points) => match sweep.axis {
                SweepAxis::WindowMs if points[0] < 0.0 => d.error("sweep", "window values must be >= 0"),
                SweepAxis::MeanDelayMs if points[0] < 0.0 => d.error("sweep", "mean delays must be >= 0"),
                SweepAxis::Beta if points[0] < 0.0 => d.error("sweep", "thresholds must be >= 0"),
                _ => {}
            },
        }
        let expected_axis = match self.scenario {
            Scenario::Custom => None,
            sc => Some(sc.default_axis()),
        };
        if let Some(axis) = expected_axis {
            if sweep.axis != axis {
                d.error("sweep.axis", format!("scenario {} sweeps {:?}", self.scenario, axis));
            }
        }
        if self.per_link_eta && sweep.axis == SweepAxis::Beta {
            d.warning("per_link_eta", "has no effect on CCDF sweeps");
        }
        if sweep.axis == SweepAxis::Beta {
            match self.network.serving {
                ServingRule::FixedTier(k) if k < self.network.tiers.len() => {
                    let alpha = self.network.tiers[k].path_loss_exp;
                    let half = alpha / 2.0;
                    if (half - half.round()).abs() < 1e-12 {
                        d.warning(
                            "network.tiers.path_loss_exp",
                            format!(
                                "serving-tier exponent {alpha} puts the upper bound on a Gamma pole at 1 - alpha/2 = {}; it is reported as invalid",
                                1.0 - half
                            ),
                        );
                    } else if crate::numeric::gamma(1.0 - half) < 0.0 {
                        d.warning(
                            "network.tiers.path_loss_exp",
                            format!("Gamma(1 - {alpha}/2) < 0: the upper bound is not a valid probability"),
                        );
                    }
                }
                ServingRule::FixedTier(_) => {}
                ServingRule::Strongest => {
                    d.error("network.serving", "CCDF bounds need a fixed serving tier (serving = { fixed-tier = k })")
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl Diagnostics {
    fn error(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(Diagnostic { field: field.into(), message: message.into() });
    }

    fn warning(&mut self, field: &str, message: impl Into<String>) {
        self.warnings.push(Diagnostic { field: field.into(), message: message.into() });
    }

    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            let msg = self.errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(Error::Config(msg))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    /// Semicolon-separated flags; empty when the value is unqualified.
    pub flags: String,
}

impl ResultRow {
    fn new(sweep_value: f64, metric: &str, value: f64, stderr: Option<f64>) -> Self {
        Self { sweep_value, metric: metric.into(), value, stderr, flags: String::new() }
    }

    fn flag(mut self, flag: &str) -> Self {
        if !self.flags.is_empty() {
            self.flags.push(';');
        }
        self.flags.push_str(flag);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub manifest: Manifest,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows of one metric, in sweep order.
    pub fn metric(&self, name: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.metric == name).collect()
    }
}

/// Validate and run a spec on the current rayon pool.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    let diagnostics = spec.validate().into_result()?;
    let spec = spec.resolved();
    let sweep = spec.sweep.clone().expect("resolved");
    let points = sweep.points()?;
    let rows = match (spec.scenario, sweep.axis) {
        (Scenario::TimeFractionSweep, _) | (Scenario::Custom, SweepAxis::WindowMs) => time_fraction_rows(&spec, &points)?,
        (_, SweepAxis::Beta) => ccdf_rows(&spec, &points)?,
        (Scenario::ThroughputVsDelayNonadaptive, _) => throughput_rows(&spec, &points, false)?,
        (Scenario::ThroughputVsDelayAdaptive, _) | (Scenario::Custom, SweepAxis::MeanDelayMs) => {
            throughput_rows(&spec, &points, true)?
        }
        (sc, axis) => return Err(Error::Config(format!("scenario {sc} cannot sweep {axis:?}"))),
    };
    Ok(ResultTable {
        manifest: Manifest { tool: "hetcomp".into(), version: VERSION.into(), spec, warnings: diagnostics.warnings },
        rows,
    })
}

/// Build a rayon pool with `workers` threads and run the spec inside it.
pub fn run_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<ResultTable> {
    match workers {
        None => run(spec),
        Some(0) => Err(Error::Config("workers must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numeric(e.to_string()))?
            .install(|| run(spec)),
    }
}

/// Tier whose parameters define the member E[δ] reported in window sweeps.
fn reference_tier(spec: &ExperimentSpec) -> usize {
    match spec.network.serving {
        ServingRule::FixedTier(k) => k,
        ServingRule::Strongest => 0,
    }
}

fn time_fraction_rows(spec: &ExperimentSpec, windows: &[f64]) -> Result<Vec<ResultRow>> {
    let blocks = spec.trials_or_default();
    let tier = &spec.network.tiers[reference_tier(spec)];
    let per_point: Vec<Vec<ResultRow>> = windows
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let model = spec.durations.with_window(w);
            let eta = cos_time_fraction(&model)?;
            let mc = cos_time_fraction_mc_seeded(&model, blocks, spec.seed ^ i as u64)?;
            let delta = expected_delta(&model, tier.feedback_bits, tier.antennas, true)?;
            let objective = if eta > 0.0 {
                ResultRow::new(w, "window_objective", delta / eta, None)
            } else {
                ResultRow::new(w, "window_objective", f64::NAN, None).flag("undefined")
            };
            Ok(vec![
                ResultRow::new(w, "eta", eta, None),
                ResultRow::new(w, "eta_mc", mc.value, Some(mc.stderr)),
                ResultRow::new(w, "cos_probability", cos_probability(&model)?, None),
                ResultRow::new(w, "expected_delta", delta, None),
                objective,
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn mixture_check(spec: &ExperimentSpec, model: &DurationModel) -> Result<f64> {
    let set_size = spec.network.coord_set_size;
    let p = cos_probability(model)?;
    let pmf = if spec.per_link_eta {
        poisson_binomial_pmf(&vec![p; set_size])?
    } else {
        cos_count_pmf(p, set_size)?
    };
    Ok(pmf.iter().sum())
}

fn throughput_rows(spec: &ExperimentSpec, mean_delays: &[f64], adaptive: bool) -> Result<Vec<ResultRow>> {
    let sim = SirSimulator::new(spec.network.clone(), spec.cos_gain)?;
    let window = if adaptive { spec.durations.window_ms } else { f64::INFINITY };
    let with_delay = |mean: f64, w: f64| {
        spec.durations.with_delay(DelayDist::uniform_with_mean(mean)).with_window(w)
    };
    let mut models: Vec<DurationModel> = mean_delays.iter().map(|&m| with_delay(m, window)).collect();
    let paired = adaptive && window.is_finite();
    if paired {
        models.extend(mean_delays.iter().map(|&m| with_delay(m, f64::INFINITY)));
    }
    let out = ergodic_throughput_mc_paired(&sim, &models, spec.trials_or_default(), spec.fading_or_default(), spec.seed)?;
    let n = mean_delays.len();
    let mut rows = Vec::new();
    for (i, &mean) in mean_delays.iter().enumerate() {
        let r = &out.results[i];
        let mut row = ResultRow::new(mean, "throughput", r.value, r.stderr);
        if r.excluded_infinite > 0 {
            row = row.flag(&format!("excluded-infinite={}", r.excluded_infinite));
        }
        rows.push(row);
        rows.push(ResultRow::new(mean, "cos_probability", cos_probability(&models[i])?, None));
        rows.push(ResultRow::new(mean, "eta", cos_time_fraction(&models[i])?, None));
        let total = mixture_check(spec, &models[i])?;
        if (total - 1.0).abs() > 1e-12 {
            rows.push(ResultRow::new(mean, "mixture_total", total, None).flag("unnormalized"));
        }
        if paired {
            let d = out.difference(i, n + i)?;
            rows.push(ResultRow::new(mean, "gain_vs_nonadaptive", d.diff, Some(d.stderr)));
        }
    }
    Ok(rows)
}

/// Members used for the bound comparison: the configured fixed set, or the
/// serving tier's next-nearest BSs.
fn bound_members(network: &NetworkConfig, serving_tier: usize) -> Vec<BsRef> {
    match &network.coordination {
        CoordinationRule::Fixed(m) => m.clone(),
        CoordinationRule::Strongest => {
            (1..=network.coord_set_size).map(|index| BsRef { tier: serving_tier, index }).collect()
        }
    }
}

fn ccdf_rows(spec: &ExperimentSpec, betas: &[f64]) -> Result<Vec<ResultRow>> {
    let ServingRule::FixedTier(ks) = spec.network.serving else {
        return Err(Error::Config("CCDF bounds need a fixed serving tier".into()));
    };
    let members = bound_members(&spec.network, ks);
    let mut network = spec.network.clone();
    network.coordination = CoordinationRule::Fixed(members.clone());
    let sim = SirSimulator::new(network, spec.cos_gain)?;
    let samples = sim.sample_many(std::slice::from_ref(&spec.durations), spec.trials_or_default(), 1, spec.seed)?;
    let ccdf = CcdfEstimate::from_samples(&samples[0], betas)?;
    // COS count m = |S| gives the loosest upper bound, which covers the
    // unconditional CCDF
    let inputs = BoundInputs::new(spec.network.tiers.clone(), ks, members.clone(), &spec.durations, members.len())?;

    let mut rows = Vec::with_capacity(3 * betas.len());
    for (j, &b) in betas.iter().enumerate() {
        let mut emp = ResultRow::new(b, "ccdf_empirical", ccdf.values[j], Some(ccdf.stderr[j]));
        if ccdf.infinite_count > 0 {
            emp = emp.flag(&format!("infinite={}", ccdf.infinite_count));
        }
        rows.push(emp);
        let lo = ccdf_lower_bound(b, &inputs)?;
        let mut row = ResultRow::new(b, "ccdf_lower", lo.value, None);
        if !lo.valid {
            row = row.flag("vacuous");
        }
        rows.push(row);
        rows.push(match ccdf_upper_bound(b, &inputs) {
            Ok(up) if up.valid => ResultRow::new(b, "ccdf_upper", up.value, None),
            Ok(up) => ResultRow::new(b, "ccdf_upper", up.value, None).flag("invalid"),
            Err(Error::GammaPole { .. }) => ResultRow::new(b, "ccdf_upper", f64::NAN, None).flag("gamma-pole"),
            Err(e) => return Err(e),
        });
    }
    Ok(rows)
}

/// `%g`-style formatting with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 5] = ["sweep_value", "metric", "value", "stderr", "flags"];

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_sig9(r.sweep_value),
            r.metric.clone(),
            fmt_sig9(r.value),
            r.stderr.map(fmt_sig9).unwrap_or_default(),
            r.flags.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    sweep_value: String,
    metric: &'a str,
    value: String,
    stderr: Option<String>,
    flags: &'a str,
}

pub fn write_json<W: std::io::Write>(table: &ResultTable, out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        manifest: &'a Manifest,
        rows: Vec<JsonRow<'a>>,
    }
    // numbers as the same 9-significant-digit strings as the CSV, so that
    // NaN and infinities survive
    let rows = table
        .rows
        .iter()
        .map(|r| JsonRow {
            sweep_value: fmt_sig9(r.sweep_value),
            metric: &r.metric,
            value: fmt_sig9(r.value),
            stderr: r.stderr.map(fmt_sig9),
            flags: &r.flags,
        })
        .collect();
    serde_json::to_writer_pretty(out, &Doc { manifest: &table.manifest, rows })?;
    Ok(())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Write the table in `format` to `output` and the manifest next to it.
pub fn write_outputs(table: &ResultTable, output: &Path, format: OutputFormat) -> Result<()> {
    let file = fs::File::create(output).map_err(|e| Error::Io(format!("{}: {e}", output.display())))?;
    let buf = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(&table.rows, buf)?,
        OutputFormat::Json => write_json(table, buf)?,
    }
    let mpath = manifest_path(output);
    let text = serde_json::to_string_pretty(&table.manifest)?;
    fs::write(&mpath, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", mpath.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(62.25), "62.25");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig9(-2.5e12), "-2.5e12");
        assert_eq!(fmt_sig9(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_sig9(f64::INFINITY), "inf");
        assert_eq!(fmt_sig9(f64::NAN), "nan");
    }

    #[test]
    fn sweep_grids() {
        let r = Sweep::range(SweepAxis::MeanDelayMs, 0.0, 150.0, 10.0).points().unwrap();
        assert_eq!(r.len(), 16);
        assert_eq!(r[15], 150.0);
        let l = Sweep::log_spaced(SweepAxis::Beta, 0.01, 10.0, 20).points().unwrap();
        assert_eq!(l.len(), 20);
        assert!((l[0] - 0.01).abs() < 1e-15 && (l[19] - 10.0).abs() < 1e-12);
        assert!(Sweep::explicit(SweepAxis::Beta, vec![]).points().is_err());
        assert!(Sweep::explicit(SweepAxis::Beta, vec![2.0, 1.0]).points().is_err());
    }

    #[test]
    fn presets_validate_and_roundtrip() {
        for sc in Scenario::ALL {
            let spec = ExperimentSpec::preset(sc);
            let d = spec.validate();
            assert!(d.is_ok(), "{sc}: {:?}", d.errors);
            let text = spec.to_toml().unwrap();
            assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
        }
        let ccdf = ExperimentSpec::preset(Scenario::CcdfVsBounds).validate();
        assert!(ccdf.warnings.iter().any(|w| w.message.contains("pole")));
    }

    #[test]
    fn invalid_specs_are_reported() {
        let mut spec = ExperimentSpec::preset(Scenario::ThroughputVsDelayAdaptive);
        spec.network.coord_set_size = 8;
        let d = spec.validate();
        assert!(d.errors.iter().any(|e| e.message.contains("zero-forcing")), "{:?}", d.errors);

        let mut spec = ExperimentSpec::preset(Scenario::TimeFractionSweep);
        spec.network.tiers.clear();
        assert!(!spec.validate().is_ok());

        let mut spec = ExperimentSpec::preset(Scenario::TimeFractionSweep);
        spec.trials = Some(0);
        assert!(!spec.validate().is_ok());

        assert!(ExperimentSpec::from_toml("scenario = \"nope\"\nseed = 1").is_err());
    }

    #[test]
    fn scenario_names_parse() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
    }
}
