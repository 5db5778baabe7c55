//! Ergodic throughput E[log₂(1+SIR)] from CCDF curves or Monte Carlo.
//!
//! A CCDF integrates to throughput through ∫₀^∞ F̄(x)/(ln2·(1+x)) dx. For
//! curves given as functions the integral runs in u = ln(1+x), where it is
//! simply ∫ F̄(eᵘ−1) du / ln2. For empirical CCDFs it is evaluated exactly
//! between order statistics, with a power-law tail past the largest sample.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, integrate};
use crate::overhead::{cos_probability, DurationModel};
use crate::sir::{ccdf_lower_bound, ccdf_upper_bound, lower_bound_slope, BoundInputs, SirSample, SirSimulator};

/// Contributions beyond the integration range must stay below this.
pub const TAIL_TOLERANCE: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-9;

/// P[V = v] for V ~ Binomial(set_size, p), v = 0..=set_size.
pub fn cos_count_pmf(p: f64, set_size: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("COS probability must lie in [0, 1], got {p}")));
    }
    let n = set_size as i32;
    let mut coeff = 1.0;
    let mut pmf = Vec::with_capacity(set_size + 1);
    for v in 0..=n {
        if v > 0 {
            coeff = coeff * (n - v + 1) as f64 / v as f64;
        }
        pmf.push(coeff * p.powi(v) * (1.0 - p).powi(n - v));
    }
    Ok(pmf)
}

/// Distribution of the number of successes among independent trials with
/// individual success probabilities `ps`.
pub fn poisson_binomial_pmf(ps: &[f64]) -> Result<Vec<f64>> {
    let mut pmf = vec![1.0];
    for &p in ps {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("probability must lie in [0, 1], got {p}")));
        }
        let mut next = vec![0.0; pmf.len() + 1];
        for (v, &q) in pmf.iter().enumerate() {
            next[v] += q * (1.0 - p);
            next[v + 1] += q * p;
        }
        pmf = next;
    }
    Ok(pmf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThroughputMethod {
    Mc,
    EmpiricalCcdf,
    BoundLower,
    BoundUpper,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputResult {
    pub value: f64,
    pub method: ThroughputMethod,
    /// (v, P[V = v]) over v = 0..=|S|.
    pub mixture: Vec<(usize, f64)>,
    pub stderr: Option<f64>,
    pub trials: Option<u64>,
    /// Samples with infinite SIR left out of the mean.
    pub excluded_infinite: u64,
    /// Part of `value` that comes from beyond the integration range.
    pub tail_contribution: f64,
    pub quadrature_error: f64,
}

impl ThroughputResult {
    fn with_value(value: f64, method: ThroughputMethod) -> Self {
        Self {
            value,
            method,
            mixture: Vec::new(),
            stderr: None,
            trials: None,
            excluded_infinite: 0,
            tail_contribution: 0.0,
            quadrature_error: 0.0,
        }
    }

    pub fn tail_within_tolerance(&self) -> bool {
        self.tail_contribution < TAIL_TOLERANCE
    }
}

/// Result of integrating one CCDF against 1/(ln2·(1+x)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateIntegral {
    pub value: f64,
    pub tail: f64,
    pub abs_error: f64,
}

/// A CCDF on [0, ∞) that can be integrated into an ergodic rate.
pub trait CcdfCurve {
    fn ccdf(&self, x: f64) -> f64;

    /// Points where the curve has kinks or jumps.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn method(&self) -> ThroughputMethod {
        ThroughputMethod::Quadrature
    }

    fn rate_integral(&self) -> Result<RateIntegral> {
        integrate_function_ccdf(self)
    }
}

/// Any closure `x ↦ P[X ≥ x]`.
pub struct FnCcdf<F> {
    f: F,
    breaks: Vec<f64>,
    method: ThroughputMethod,
}

impl<F: Fn(f64) -> f64> FnCcdf<F> {
    pub fn new(f: F) -> Self {
        Self { f, breaks: Vec::new(), method: ThroughputMethod::Quadrature }
    }

    pub fn with_breakpoints(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn with_method(mut self, method: ThroughputMethod) -> Self {
        self.method = method;
        self
    }
}

impl<F: Fn(f64) -> f64> CcdfCurve for FnCcdf<F> {
    fn ccdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
    fn method(&self) -> ThroughputMethod {
        self.method
    }
}

const MONOTONE_SLACK: f64 = 1e-12;
const MAX_X: f64 = 1e30;

fn integrate_function_ccdf<C: CcdfCurve + ?Sized>(curve: &C) -> Result<RateIntegral> {
    // Grow X until the power-law extrapolation of what lies beyond is small.
    let mut x = 1.0;
    let tail = loop {
        let hi = curve.ccdf(x);
        if !(0.0..=1.0 + MONOTONE_SLACK).contains(&hi) {
            return Err(Error::Numeric(format!("CCDF value {hi} at x = {x} is outside [0, 1]")));
        }
        if hi == 0.0 {
            break 0.0;
        }
        let lo = curve.ccdf(x / 2.0);
        if hi > lo + MONOTONE_SLACK {
            return Err(Error::NonMonotoneCcdf { at: x });
        }
        let slope = (lo / hi).ln() / LN_2;
        if slope > 0.0 {
            // ∫_X^∞ F̄(X)(t/X)^{−κ} / (ln2·t) dt = F̄(X)/(κ ln2) bounds the rest
            let bound = hi / (slope * LN_2);
            if bound < TAIL_TOLERANCE {
                break bound;
            }
        }
        if x >= MAX_X {
            return Err(Error::TailNotIntegrable(format!(
                "CCDF is {hi:e} at x = {x:e} with local decay exponent {slope:.3}"
            )));
        }
        x *= 2.0;
    };
    let u_max = x.ln_1p();

    let grid = 512;
    let mut prev = f64::INFINITY;
    for j in 0..=grid {
        let u = u_max * j as f64 / grid as f64;
        let at = u.exp_m1();
        let v = curve.ccdf(at);
        if v > prev + MONOTONE_SLACK {
            return Err(Error::NonMonotoneCcdf { at });
        }
        prev = v;
    }

    let breaks: Vec<f64> = curve.breakpoints().iter().filter(|&&b| b > 0.0).map(|b| b.ln_1p()).collect();
    let q = integrate(|u: f64| curve.ccdf(u.exp_m1()), 0.0, u_max, &breaks, QUAD_TOL)?;
    Ok(RateIntegral { value: q.value / LN_2 + tail, tail, abs_error: q.abs_error / LN_2 })
}

/// Empirical CCDF P[X ≥ x] of finite, nonnegative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    sorted: Vec<f64>,
    excluded: u64,
    tail_exponent: Option<f64>,
}

impl EmpiricalCcdf {
    /// Infinite values are dropped and counted; NaN or negative values are
    /// rejected.
    pub fn new(values: &[f64]) -> Result<Self> {
        let mut sorted = Vec::with_capacity(values.len());
        let mut excluded = 0;
        for &v in values {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Numeric(format!("invalid SIR sample {v}")));
            }
            if v.is_infinite() {
                excluded += 1;
            } else {
                sorted.push(v);
            }
        }
        if sorted.is_empty() {
            return Err(Error::Config("empirical CCDF needs at least one finite sample".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let tail_exponent = fit_tail_exponent(&sorted);
        Ok(Self { sorted, excluded, tail_exponent })
    }

    pub fn from_samples(samples: &[SirSample]) -> Result<Self> {
        Self::new(&samples.iter().map(|s| s.sir).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn excluded_infinite(&self) -> u64 {
        self.excluded
    }

    /// Decay exponent κ of the power law fitted to the top decile.
    pub fn tail_exponent(&self) -> Option<f64> {
        self.tail_exponent
    }

    /// Contribution of the fitted tail beyond the largest sample:
    /// (1/N)∫_{s_max}^∞ (x/s_max)^{−κ} / (ln2·(1+x)) dx.
    pub fn tail_contribution(&self) -> Result<f64> {
        let s_max = *self.sorted.last().expect("nonempty");
        if s_max == 0.0 {
            return Ok(0.0);
        }
        let kappa = match self.tail_exponent {
            None => return Ok(0.0),
            Some(k) if k > 0.0 => k,
            Some(k) => {
                return Err(Error::TailNotIntegrable(format!(
                    "fitted tail exponent {k:.4} over the top decile is not positive"
                )))
            }
        };
        let level = 1.0 / self.sorted.len() as f64;
        // x = s_max·eᵗ; integrand is level·e^{−κt}·x/(1+x)/ln2
        let t_max = 40.0 / kappa;
        let q = integrate(
            |t: f64| {
                let x = s_max * t.exp();
                (-kappa * t).exp() * x / (1.0 + x)
            },
            0.0,
            t_max,
            &[],
            1e-12,
        )?;
        let beyond = (-kappa * t_max).exp() / kappa;
        Ok(level * (q.value + beyond) / LN_2)
    }
}

/// Least-squares slope of ln F̄ against ln x over the top decile of the
/// positive samples, returned as a decay exponent; `None` with too few points.
fn fit_tail_exponent(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    let k = n / 10;
    if k < 10 {
        return None;
    }
    let mut pts = Vec::with_capacity(k);
    for (j, &s) in sorted.iter().enumerate().skip(n - k) {
        if s > 0.0 {
            pts.push((s.ln(), ((n - j) as f64 / n as f64).ln()));
        }
    }
    if pts.len() < 10 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

impl CcdfCurve for EmpiricalCcdf {
    fn ccdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&s| s < x);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    fn method(&self) -> ThroughputMethod {
        ThroughputMethod::EmpiricalCcdf
    }

    /// Exact integral of the step function: on (s_{j−1}, s_j] the CCDF is
    /// (N−j+1)/N, and ∫ dx/(1+x) over that piece is ln((1+s_j)/(1+s_{j−1})).
    fn rate_integral(&self) -> Result<RateIntegral> {
        let n = self.sorted.len() as f64;
        let mut prev = 0.0;
        let pieces = self.sorted.iter().enumerate().map(|(j, &s)| {
            let piece = ((s - prev) / (1.0 + prev)).ln_1p();
            prev = s;
            (n - j as f64) / n * piece
        });
        let body = compensated_sum(pieces) / LN_2;
        let tail = self.tail_contribution()?;
        Ok(RateIntegral { value: body + tail, tail, abs_error: 0.0 })
    }
}

/// max(0, lower bound) as a function of β.
pub struct LowerBoundCurve {
    slope: f64,
}

impl LowerBoundCurve {
    pub fn new(inputs: &BoundInputs) -> Result<Self> {
        Ok(Self { slope: lower_bound_slope(inputs)? })
    }
}

impl CcdfCurve for LowerBoundCurve {
    fn ccdf(&self, x: f64) -> f64 {
        (1.0 - x * self.slope).max(0.0)
    }
    fn breakpoints(&self) -> Vec<f64> {
        if self.slope > 0.0 {
            vec![1.0 / self.slope]
        } else {
            Vec::new()
        }
    }
    fn method(&self) -> ThroughputMethod {
        ThroughputMethod::BoundLower
    }
}

/// The upper bound as a function of β; only constructed when valid.
pub struct UpperBoundCurve {
    inputs: BoundInputs,
}

impl UpperBoundCurve {
    pub fn new(inputs: &BoundInputs) -> Result<Self> {
        let probe = ccdf_upper_bound(1.0, inputs)?;
        if !probe.valid {
            return Err(Error::Numeric(format!(
                "upper bound is not a valid CCDF for these parameters (value at 1: {})",
                probe.value
            )));
        }
        Ok(Self { inputs: inputs.clone() })
    }
}

impl CcdfCurve for UpperBoundCurve {
    fn ccdf(&self, x: f64) -> f64 {
        ccdf_upper_bound(x, &self.inputs).map_or(f64::NAN, |b| b.value)
    }
    fn method(&self) -> ThroughputMethod {
        ThroughputMethod::BoundUpper
    }
}

/// Σ_v P[V=v]·∫ F̄_v(x)/(ln2(1+x)) dx with `ccdf_per_v[v]` the SIR CCDF given
/// v members in COS and P[V=·] = `pmf`.
pub fn ergodic_throughput_from_ccdf_with_pmf(ccdf_per_v: &[&dyn CcdfCurve], pmf: &[f64]) -> Result<ThroughputResult> {
    if ccdf_per_v.len() != pmf.len() || pmf.is_empty() {
        return Err(Error::Config(format!(
            "need one CCDF per COS count: {} curves for {} probabilities",
            ccdf_per_v.len(),
            pmf.len()
        )));
    }
    let mut terms = Vec::with_capacity(pmf.len());
    let mut tail = 0.0;
    let mut err = 0.0;
    for (curve, &w) in ccdf_per_v.iter().zip(pmf) {
        if w == 0.0 {
            continue;
        }
        let r = curve.rate_integral()?;
        terms.push(w * r.value);
        tail += w * r.tail;
        err += w * r.abs_error;
    }
    let mut result = ThroughputResult::with_value(compensated_sum(terms), ccdf_per_v[0].method());
    result.mixture = pmf.iter().copied().enumerate().collect();
    result.tail_contribution = tail;
    result.quadrature_error = err;
    Ok(result)
}

/// Binomial mixture with COS probability `p` over `set_size` members.
pub fn ergodic_throughput_from_ccdf(ccdf_per_v: &[&dyn CcdfCurve], p: f64, set_size: usize) -> Result<ThroughputResult> {
    ergodic_throughput_from_ccdf_with_pmf(ccdf_per_v, &cos_count_pmf(p, set_size)?)
}

/// Throughput implied by the lower or upper CCDF bound; the per-v curves use
/// `cos_count = v`.
pub fn throughput_from_bounds(inputs: &BoundInputs, p: f64, upper: bool) -> Result<ThroughputResult> {
    let set_size = inputs.members.len();
    let mut curves: Vec<Box<dyn CcdfCurve>> = Vec::with_capacity(set_size + 1);
    for v in 0..=set_size {
        let mut per_v = inputs.clone();
        per_v.cos_count = v;
        if upper {
            curves.push(Box::new(UpperBoundCurve::new(&per_v)?));
        } else {
            curves.push(Box::new(LowerBoundCurve::new(&per_v)?));
        }
    }
    let refs: Vec<&dyn CcdfCurve> = curves.iter().map(|c| c.as_ref()).collect();
    ergodic_throughput_from_ccdf(&refs, p, set_size)
}

/// Mean of log₂(1+SIR) over finite samples, with a standard error that
/// treats each group of `cluster` consecutive samples (one geometry) as one
/// independent unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub excluded_infinite: u64,
}

struct Clusters {
    sums: Vec<f64>,
    counts: Vec<f64>,
    excluded: u64,
}

fn clusters(samples: &[SirSample], cluster: usize) -> Result<Clusters> {
    if cluster == 0 || samples.is_empty() || !samples.len().is_multiple_of(cluster) {
        return Err(Error::Config(format!(
            "{} samples cannot be split into clusters of {cluster}",
            samples.len()
        )));
    }
    let mut c = Clusters { sums: Vec::new(), counts: Vec::new(), excluded: 0 };
    for chunk in samples.chunks(cluster) {
        let (mut s, mut n) = (0.0, 0.0);
        for x in chunk {
            if x.sir.is_finite() {
                s += x.sir.ln_1p() / LN_2;
                n += 1.0;
            } else {
                c.excluded += 1;
            }
        }
        c.sums.push(s);
        c.counts.push(n);
    }
    Ok(c)
}

impl Clusters {
    fn mean(&self) -> f64 {
        let n: f64 = self.counts.iter().sum();
        if n == 0.0 {
            0.0
        } else {
            compensated_sum(self.sums.iter().copied()) / n
        }
    }

    /// Linearized residuals (sum_c − mean·n_c)/n̄ of the ratio estimator.
    fn residuals(&self) -> Vec<f64> {
        let m = self.mean();
        let nbar = self.counts.iter().sum::<f64>() / self.counts.len() as f64;
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(s, n)| if nbar > 0.0 { (s - m * n) / nbar } else { 0.0 })
            .collect()
    }
}

fn stderr_of(residuals: &[f64]) -> f64 {
    let c = residuals.len() as f64;
    if c < 2.0 {
        return f64::NAN;
    }
    let mean = residuals.iter().sum::<f64>() / c;
    (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (c * (c - 1.0))).sqrt()
}

impl RateStats {
    pub fn from_samples(samples: &[SirSample], cluster: usize) -> Result<Self> {
        let c = clusters(samples, cluster)?;
        Ok(Self {
            mean: c.mean(),
            stderr: stderr_of(&c.residuals()),
            samples: c.counts.iter().sum::<f64>() as u64,
            excluded_infinite: c.excluded,
        })
    }
}

/// Difference of mean rates between two sample sets drawn with common
/// random numbers (aligned sample by sample), with its paired standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    /// mean(a) − mean(b).
    pub diff: f64,
    pub stderr: f64,
}

impl PairedDifference {
    pub fn new(a: &[SirSample], b: &[SirSample], cluster: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Config("paired sample sets differ in length".into()));
        }
        let (ca, cb) = (clusters(a, cluster)?, clusters(b, cluster)?);
        let d: Vec<f64> = ca.residuals().iter().zip(cb.residuals()).map(|(x, y)| x - y).collect();
        Ok(Self { diff: ca.mean() - cb.mean(), stderr: stderr_of(&d) })
    }

    /// diff / stderr.
    pub fn z(&self) -> f64 {
        self.diff / self.stderr
    }
}

fn mc_result(samples: &[SirSample], cluster: usize, model: &DurationModel, set_size: usize) -> Result<ThroughputResult> {
    let stats = RateStats::from_samples(samples, cluster)?;
    let mut r = ThroughputResult::with_value(stats.mean, ThroughputMethod::Mc);
    r.stderr = Some(stats.stderr);
    r.trials = Some(samples.len() as u64);
    r.excluded_infinite = stats.excluded_infinite;
    r.mixture = cos_count_pmf(cos_probability(model)?, set_size)?.into_iter().enumerate().collect();
    Ok(r)
}

/// Sample mean of log₂(1+SIR) with geometry, fading and link states all
/// redrawn per sample; `trials` geometries × `fading_per_geometry` draws.
pub fn ergodic_throughput_mc(
    sim: &SirSimulator,
    model: &DurationModel,
    trials: u64,
    fading_per_geometry: u32,
    seed: u64,
) -> Result<ThroughputResult> {
    Ok(ergodic_throughput_mc_paired(sim, std::slice::from_ref(model), trials, fading_per_geometry, seed)?
        .results
        .remove(0))
}

/// Throughput under several duration models sharing every random draw.
#[derive(Debug, Clone)]
pub struct PairedThroughput {
    pub results: Vec<ThroughputResult>,
    pub samples: Vec<Vec<SirSample>>,
    pub cluster: usize,
}

impl PairedThroughput {
    /// results[a] − results[b] with the paired standard error.
    pub fn difference(&self, a: usize, b: usize) -> Result<PairedDifference> {
        PairedDifference::new(&self.samples[a], &self.samples[b], self.cluster)
    }
}

pub fn ergodic_throughput_mc_paired(
    sim: &SirSimulator,
    models: &[DurationModel],
    trials: u64,
    fading_per_geometry: u32,
    seed: u64,
) -> Result<PairedThroughput> {
    let samples = sim.sample_many(models, trials, fading_per_geometry, seed)?;
    let cluster = fading_per_geometry as usize;
    let set_size = sim.network().coord_set_size;
    let results = samples
        .iter()
        .zip(models)
        .map(|(s, m)| mc_result(s, cluster, m, set_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairedThroughput { results, samples, cluster })
}

/// Σ_v P[V=v]·(Monte Carlo rate given exactly v members in COS), with P[V=·]
/// binomial in the per-epoch COS probability. Each v uses its own stream.
pub fn ergodic_throughput_mixture_mc(
    sim: &SirSimulator,
    model: &DurationModel,
    trials: u64,
    fading_per_geometry: u32,
    seed: u64,
) -> Result<ThroughputResult> {
    let set_size = sim.network().coord_set_size;
    let pmf = cos_count_pmf(cos_probability(model)?, set_size)?;
    let cluster = fading_per_geometry as usize;
    let (mut value, mut var, mut excluded, mut total) = (0.0, 0.0, 0, 0);
    for (v, &w) in pmf.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let samples = sim.sample_conditional(model, v, trials, fading_per_geometry, seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(v as u64 + 1)))?;
        let stats = RateStats::from_samples(&samples, cluster)?;
        value += w * stats.mean;
        var += (w * stats.stderr).powi(2);
        excluded += stats.excluded_infinite;
        total += samples.len() as u64;
    }
    let mut r = ThroughputResult::with_value(value, ThroughputMethod::Mc);
    r.stderr = Some(var.sqrt());
    r.trials = Some(total);
    r.excluded_infinite = excluded;
    r.mixture = pmf.into_iter().enumerate().collect();
    Ok(r)
}

/// Lower and upper CCDF bounds at `beta` clamped to [0, 1], for plotting.
pub fn clamped_bounds(beta: f64, inputs: &BoundInputs) -> Result<(f64, f64)> {
    let lo = ccdf_lower_bound(beta, inputs)?.value.clamp(0.0, 1.0);
    let hi = ccdf_upper_bound(beta, inputs)?.value.clamp(0.0, 1.0);
    Ok((lo, hi))
}
