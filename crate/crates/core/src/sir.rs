//! SIR of the reference user under adaptive CoMP ZFBF: Monte Carlo sampling
//! and the analytic CCDF bounds.
//!
//! Each Monte Carlo trial draws one [`TrialDraw`] (geometry, fading and the
//! uniforms behind every coordinated link's lifetime and delay) and then
//! evaluates it under one or more duration models. Evaluating the same draw
//! under different windows or delays gives common-random-number comparisons.
//! Trial `t` uses ChaCha8(seed) stream `t`, so results never depend on how
//! trials are spread over threads.

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{cos_scale, CosGainModel};
use crate::net::{sample_realization, BsRef, NetworkConfig, NetworkRealization, TierParams};
use crate::numeric::{gamma, ln_gamma};
use crate::overhead::{classify, expected_delta, state_probabilities, DurationModel, LinkStateKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirSample {
    /// Linear SIR; `+∞` when every interferer is silent.
    pub sir: f64,
    pub cos_count: usize,
    pub silent_count: usize,
    pub stale_count: usize,
}

/// Everything random about one trial, independent of the duration model.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub realization: NetworkRealization,
    /// p_k·|B_{i,k}|^{−α_k} per tier and distance order.
    pub mean_power: Vec<Vec<f64>>,
    pub serving_gain: f64,
    /// Unit-mean exponential fading per BS (the serving slot is unused).
    pub fading: Vec<Vec<f64>>,
    /// Uniforms behind each coordination-set member's lifetime and delay.
    pub u_lifetime: Vec<f64>,
    pub u_delay: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SirSimulator {
    network: NetworkConfig,
    cos_gain: CosGainModel,
    far_field: f64,
}

impl SirSimulator {
    pub fn new(network: NetworkConfig, cos_gain: CosGainModel) -> Result<Self> {
        network.validate()?;
        let radius = network.radius();
        let far_field = if network.far_field { network.far_field_interference(radius) } else { 0.0 };
        let mut network = network;
        network.sim_radius_m = Some(radius);
        Ok(Self { network, cos_gain, far_field })
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn far_field_interference(&self) -> f64 {
        self.far_field
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialDraw> {
        let realization = sample_realization(&self.network, rng)?;
        let mean_power = self
            .network
            .tiers
            .iter()
            .zip(&realization.distances)
            .map(|(t, d)| d.iter().map(|&r| t.mean_power_at(r)).collect())
            .collect();
        let fading = realization.distances.iter().map(|d| vec![0.0; d.len()]).collect();
        let s = self.network.coord_set_size;
        let mut draw = TrialDraw {
            realization,
            mean_power,
            serving_gain: 0.0,
            fading,
            u_lifetime: vec![0.0; s],
            u_delay: vec![0.0; s],
        };
        self.redraw_fading(&mut draw, rng)?;
        Ok(draw)
    }

    /// Fresh fading and overhead durations on the same geometry.
    pub fn redraw_fading<R: Rng + ?Sized>(&self, draw: &mut TrialDraw, rng: &mut R) -> Result<()> {
        let serving_tier = &self.network.tiers[draw.realization.serving.tier];
        let shape = (serving_tier.antennas - self.network.coord_set_size) as f64;
        draw.serving_gain = Gamma::new(shape, 1.0).map_err(|e| Error::Numeric(e.to_string()))?.sample(rng);
        for tier in draw.fading.iter_mut() {
            for g in tier.iter_mut() {
                *g = Distribution::<f64>::sample(&Exp1, rng);
            }
        }
        for j in 0..draw.u_lifetime.len() {
            draw.u_lifetime[j] = rng.random();
            draw.u_delay[j] = rng.random();
        }
        Ok(())
    }

    /// Link states of the coordination-set members under `model`.
    pub fn member_states(&self, draw: &TrialDraw, model: &DurationModel) -> Vec<LinkStateKind> {
        draw.u_lifetime
            .iter()
            .zip(&draw.u_delay)
            .map(|(&ul, &ud)| classify(model.lifetime.quantile(ul), model.delay.quantile(ud), model.window_ms))
            .collect()
    }

    pub fn evaluate(&self, draw: &TrialDraw, model: &DurationModel) -> Result<SirSample> {
        let states = self.member_states(draw, model);
        self.evaluate_with_states(draw, &states)
    }

    /// SIR for explicit member states (in coordination-set order).
    pub fn evaluate_with_states(&self, draw: &TrialDraw, states: &[LinkStateKind]) -> Result<SirSample> {
        let r = &draw.realization;
        if states.len() != r.coord_set.len() {
            return Err(Error::Config(format!(
                "{} member states given for a coordination set of {}",
                states.len(),
                r.coord_set.len()
            )));
        }
        let serving = r.serving_ref();
        let mut members: Vec<BsRef> = r.coord_set.clone();
        members.sort();

        let mut interference = 0.0;
        for (k, (powers, gains)) in draw.mean_power.iter().zip(&draw.fading).enumerate() {
            for (i, (&p, &g)) in powers.iter().zip(gains).enumerate() {
                let bs = BsRef { tier: k, index: i };
                if bs == serving || members.binary_search(&bs).is_ok() {
                    continue;
                }
                interference += p * g;
            }
        }
        let mut sample = SirSample { sir: 0.0, cos_count: 0, silent_count: 0, stale_count: 0 };
        for (bs, &state) in r.coord_set.iter().zip(states) {
            let p = draw.mean_power[bs.tier][bs.index];
            let g = draw.fading[bs.tier][bs.index];
            let tier = &self.network.tiers[bs.tier];
            match state {
                LinkStateKind::Silent => sample.silent_count += 1,
                LinkStateKind::StaleActive | LinkStateKind::NotCoordinated => {
                    sample.stale_count += 1;
                    interference += p * g;
                }
                LinkStateKind::Cos => {
                    sample.cos_count += 1;
                    let delta = cos_scale(tier.feedback_bits, tier.antennas)?;
                    let leak = match self.cos_gain {
                        CosGainModel::ScaledExponential => g,
                        CosGainModel::Deterministic => 1.0,
                    };
                    interference += delta * p * leak;
                }
            }
        }
        interference += self.far_field;
        let signal = draw.mean_power[r.serving.tier][0] * draw.serving_gain;
        sample.sir = if interference > 0.0 { signal / interference } else { f64::INFINITY };
        Ok(sample)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, model: &DurationModel, rng: &mut R) -> Result<SirSample> {
        let draw = self.draw(rng)?;
        self.evaluate(&draw, model)
    }

    /// SIR samples for each model, sharing every draw across models.
    ///
    /// `trials` geometries are drawn, each with `fading_per_geometry` fading
    /// and duration draws. Output: `[model][sample]`, ordered by trial.
    pub fn sample_many(
        &self,
        models: &[DurationModel],
        trials: u64,
        fading_per_geometry: u32,
        seed: u64,
    ) -> Result<Vec<Vec<SirSample>>> {
        for m in models {
            m.validate()?;
        }
        self.run_trials(trials, fading_per_geometry, seed, |draw, _| {
            models.iter().map(|m| self.evaluate(draw, m)).collect()
        })
    }

    /// Samples conditioned on exactly `cos_count` members being in COS; the
    /// remaining members are silent or stale in proportion to their
    /// probabilities under `model`. Members in COS are a uniform random subset.
    pub fn sample_conditional(
        &self,
        model: &DurationModel,
        cos_count: usize,
        trials: u64,
        fading_per_geometry: u32,
        seed: u64,
    ) -> Result<Vec<SirSample>> {
        let s = self.network.coord_set_size;
        if cos_count > s {
            return Err(Error::Config(format!("cos_count {cos_count} exceeds set size {s}")));
        }
        let probs = state_probabilities(model)?;
        let nos = probs.silent + probs.stale;
        let p_silent = if nos > 0.0 { probs.silent / nos } else { 0.0 };
        let out = self.run_trials(trials, fading_per_geometry, seed, |draw, rng| {
            let chosen = index::sample(rng, s, cos_count);
            let mut states = vec![LinkStateKind::StaleActive; s];
            for j in chosen.iter() {
                states[j] = LinkStateKind::Cos;
            }
            for st in states.iter_mut().filter(|st| **st != LinkStateKind::Cos) {
                if rng.random::<f64>() < p_silent {
                    *st = LinkStateKind::Silent;
                }
            }
            Ok(vec![self.evaluate_with_states(draw, &states)?])
        })?;
        Ok(out.into_iter().next().unwrap_or_default())
    }

    fn run_trials<F>(&self, trials: u64, fading_per_geometry: u32, seed: u64, eval: F) -> Result<Vec<Vec<SirSample>>>
    where
        F: Fn(&TrialDraw, &mut ChaCha8Rng) -> Result<Vec<SirSample>> + Sync,
    {
        if trials == 0 || fading_per_geometry == 0 {
            return Err(Error::Config("trials and fading_per_geometry must be >= 1".into()));
        }
        let per_trial: Vec<Vec<Vec<SirSample>>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, t);
                let mut draw = self.draw(&mut rng)?;
                let mut rows = Vec::with_capacity(fading_per_geometry as usize);
                for f in 0..fading_per_geometry {
                    if f > 0 {
                        self.redraw_fading(&mut draw, &mut rng)?;
                    }
                    rows.push(eval(&draw, &mut rng)?);
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        let width = per_trial.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let mut out = vec![Vec::with_capacity((trials * fading_per_geometry as u64) as usize); width];
        for rows in per_trial {
            for row in rows {
                for (m, s) in row.into_iter().enumerate() {
                    out[m].push(s);
                }
            }
        }
        Ok(out)
    }
}

/// Per-trial random stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One SIR draw with fresh geometry, fading and link states.
pub fn simulate_sir<R: Rng + ?Sized>(
    network: &NetworkConfig,
    model: &DurationModel,
    cos_gain: CosGainModel,
    rng: &mut R,
) -> Result<SirSample> {
    SirSimulator::new(network.clone(), cos_gain)?.simulate(model, rng)
}

/// Empirical CCDF P[SIR ≥ β] with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfEstimate {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: u64,
    /// Samples with zero interference; they exceed every finite threshold.
    pub infinite_count: u64,
    /// Whether isotonic cleanup changed any value.
    pub monotone_adjusted: bool,
}

impl CcdfEstimate {
    pub fn from_samples(samples: &[SirSample], thresholds: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("no samples".into()));
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("thresholds must be ascending".into()));
        }
        let mut sirs: Vec<f64> = samples.iter().map(|s| s.sir).collect();
        sirs.sort_by(f64::total_cmp);
        let n = sirs.len() as f64;
        let mut values = Vec::with_capacity(thresholds.len());
        let mut stderr = Vec::with_capacity(thresholds.len());
        for &b in thresholds {
            let below = sirs.partition_point(|&s| s < b);
            let p = (sirs.len() - below) as f64 / n;
            values.push(p);
            stderr.push((p * (1.0 - p) / n).sqrt());
        }
        // every value comes from one sorted sample set, so it is already
        // nonincreasing; the flag stays for estimates merged from elsewhere
        Ok(Self {
            thresholds: thresholds.to_vec(),
            values,
            stderr,
            trials: samples.len() as u64,
            infinite_count: samples.iter().filter(|s| s.sir.is_infinite()).count() as u64,
            monotone_adjusted: false,
        })
    }
}

pub fn estimate_ccdf(
    sim: &SirSimulator,
    model: &DurationModel,
    thresholds: &[f64],
    trials: u64,
    seed: u64,
) -> Result<CcdfEstimate> {
    let samples = sim.sample_many(std::slice::from_ref(model), trials, 1, seed)?;
    CcdfEstimate::from_samples(&samples[0], thresholds)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("path-loss exponent must exceed 2, got {alpha}")))
    }
}

/// E[(r₁/r_i)^α] for the ordered distances of one PPP:
/// Γ(1+α/2)(i−1)!/Γ(i+α/2).
pub fn distance_ratio_moment(i: usize, alpha: f64) -> Result<f64> {
    if i < 2 {
        return Err(Error::Config("distance ratio moment needs i >= 2".into()));
    }
    check_alpha(alpha)?;
    let h = alpha / 2.0;
    Ok((ln_gamma(1.0 + h) + ln_gamma(i as f64) - ln_gamma(i as f64 + h)).exp())
}

/// Cross-tier moment in the form the lower bound uses:
/// (λ_kπ)^{α_k/2} Γ(1+α_*/2)(i−1)! / [(λ_*π)^{α_*/2} Γ(i+α_k/2)].
///
/// This does not equal E[r_{1,*}^{α_*} r_{i,k}^{−α_k}] for independent PPPs;
/// see [`cross_tier_ratio_moment_exact`].
pub fn cross_tier_ratio_moment(
    i: usize,
    alpha_k: f64,
    alpha_star: f64,
    lambda_k: f64,
    lambda_star: f64,
) -> Result<f64> {
    if i < 1 {
        return Err(Error::Config("cross-tier moment needs i >= 1".into()));
    }
    check_alpha(alpha_k)?;
    check_alpha(alpha_star)?;
    let (hk, hs) = (alpha_k / 2.0, alpha_star / 2.0);
    let ln = hk * (lambda_k * PI).ln() + ln_gamma(1.0 + hs) + ln_gamma(i as f64)
        - hs * (lambda_star * PI).ln()
        - ln_gamma(i as f64 + hk);
    Ok(ln.exp())
}

/// E[r_{1,*}^{α_*} · r_{i,k}^{−α_k}] for two independent PPPs:
/// (λ_kπ)^{α_k/2} Γ(1+α_*/2) Γ(i−α_k/2) / [(λ_*π)^{α_*/2} (i−1)!],
/// infinite when i ≤ α_k/2.
pub fn cross_tier_ratio_moment_exact(
    i: usize,
    alpha_k: f64,
    alpha_star: f64,
    lambda_k: f64,
    lambda_star: f64,
) -> Result<f64> {
    if i < 1 {
        return Err(Error::Config("cross-tier moment needs i >= 1".into()));
    }
    check_alpha(alpha_k)?;
    check_alpha(alpha_star)?;
    let (hk, hs) = (alpha_k / 2.0, alpha_star / 2.0);
    if (i as f64) <= hk {
        return Ok(f64::INFINITY);
    }
    let ln = hk * (lambda_k * PI).ln() + ln_gamma(1.0 + hs) + ln_gamma(i as f64 - hk)
        - hs * (lambda_star * PI).ln()
        - ln_gamma(i as f64);
    Ok(ln.exp())
}

/// λ̃_* = Σ_k λ_k (p_k/p_{k*})^{2/α_k}: density of the single-tier PPP that
/// results from rescaling every tier to the serving tier's power.
pub fn equivalent_density(tiers: &[TierParams], k_star: usize) -> f64 {
    let p_star = tiers[k_star].power_w;
    tiers
        .iter()
        .map(|t| t.density_per_m2 * (t.power_w / p_star).powf(2.0 / t.path_loss_exp))
        .sum()
}

/// Everything the analytic bounds need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub tiers: Vec<TierParams>,
    pub serving_tier: usize,
    /// Coordination-set members by (tier, 0-based distance order).
    pub members: Vec<BsRef>,
    /// E[δ] of each member, aligned with `members`.
    pub member_expected_delta: Vec<f64>,
    /// Number of members in COS (m).
    pub cos_count: usize,
    pub series_tol: f64,
    pub series_max_terms: usize,
}

pub const DEFAULT_SERIES_TOL: f64 = 1e-10;
pub const DEFAULT_SERIES_MAX_TERMS: usize = 10_000;

impl BoundInputs {
    pub fn new(
        tiers: Vec<TierParams>,
        serving_tier: usize,
        members: Vec<BsRef>,
        model: &DurationModel,
        cos_count: usize,
    ) -> Result<Self> {
        let member_expected_delta = members
            .iter()
            .map(|m| {
                let t = tiers.get(m.tier).ok_or_else(|| Error::Config("member tier out of range".into()))?;
                expected_delta(model, t.feedback_bits, t.antennas, true)
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = Self {
            tiers,
            serving_tier,
            members,
            member_expected_delta,
            cos_count,
            series_tol: DEFAULT_SERIES_TOL,
            series_max_terms: DEFAULT_SERIES_MAX_TERMS,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.serving_tier >= self.tiers.len() {
            return Err(Error::Config("serving tier out of range".into()));
        }
        if self.members.len() != self.member_expected_delta.len() {
            return Err(Error::Config("member E[delta] list misaligned".into()));
        }
        if self.members.iter().any(|m| m.tier == self.serving_tier && m.index == 0) {
            return Err(Error::Config("serving BS cannot be a coordination-set member".into()));
        }
        if self.cos_count > self.members.len() {
            return Err(Error::Config("cos_count exceeds coordination set size".into()));
        }
        if !(self.series_tol > 0.0) || self.series_max_terms == 0 {
            return Err(Error::Config("series_tol must be > 0 and series_max_terms >= 1".into()));
        }
        for t in &self.tiers {
            t.validate()?;
        }
        Ok(())
    }

    fn set_size(&self) -> usize {
        self.members.len()
    }

    /// E[δ] at (tier, 1-based order index i).
    fn delta_at(&self, tier: usize, i: usize) -> f64 {
        self.members
            .iter()
            .position(|m| m.tier == tier && m.index + 1 == i)
            .map_or(1.0, |j| self.member_expected_delta[j])
    }

    /// δ_{k*} = min_i E[δ_{i,k*}].
    pub fn min_serving_tier_delta(&self) -> f64 {
        self.members
            .iter()
            .zip(&self.member_expected_delta)
            .filter(|(m, _)| m.tier == self.serving_tier)
            .map(|(_, &d)| d)
            .fold(1.0, f64::min)
    }
}

/// A truncated series with its tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
    pub tail_estimate: f64,
}

/// Σ_{i ≥ start} weight(i)·term(i) where term(i) = C·Γ(i)/Γ(i+h).
///
/// Terms are summed until one falls below `tol`·(partial sum) or `max_terms`
/// is reached; the unit-weight remainder is then added in closed form,
/// Σ_{j>N} C·Γ(j)/Γ(j+h) = term(N+1)·(N+h)/(h−1). Weights differ from 1
/// only at coordination-set members, which sit at small indices.
fn sum_series<W, T>(start: usize, h: f64, tol: f64, max_terms: usize, weight: W, term: T) -> Result<SeriesSum>
where
    W: Fn(usize) -> f64,
    T: Fn(usize) -> f64,
{
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev = f64::INFINITY;
    let mut i = start;
    let mut count = 0;
    loop {
        let t = term(i);
        if !(t <= prev) {
            return Err(Error::SeriesDivergence { terms: count });
        }
        // Kahan step
        let y = weight(i) * t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        count += 1;
        if (t < tol * sum.abs() && count > 1) || count >= max_terms {
            break;
        }
        prev = t;
        i += 1;
    }
    if h <= 1.0 {
        return Err(Error::SeriesDivergence { terms: count });
    }
    let n = i as f64;
    let tail = term(i + 1) * (n + h) / (h - 1.0);
    Ok(SeriesSum { value: sum + tail, terms: count, tail_estimate: tail })
}

/// A bound value with its validity flag (false: vacuous or undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub valid: bool,
}

/// Bracketed interference sum of the lower bound divided by n_{k*} − |S| − 1,
/// i.e. the slope of the (linear in β) lower bound.
pub fn lower_bound_slope(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let ks = inputs.serving_tier;
    let star = &inputs.tiers[ks];
    let dof = star.antennas as i64 - inputs.set_size() as i64 - 1;
    if dof < 1 {
        return Err(Error::Config(format!(
            "lower bound needs n - |S| - 1 >= 1 (n = {}, |S| = {})",
            star.antennas,
            inputs.set_size()
        )));
    }
    let a_star = star.path_loss_exp;
    let same = sum_series(
        2,
        a_star / 2.0,
        inputs.series_tol,
        inputs.series_max_terms,
        |i| inputs.delta_at(ks, i),
        |i| distance_ratio_moment(i, a_star).unwrap_or(f64::NAN),
    )?;
    let mut total = same.value;
    for (k, t) in inputs.tiers.iter().enumerate() {
        if k == ks {
            continue;
        }
        let cross = sum_series(
            1,
            t.path_loss_exp / 2.0,
            inputs.series_tol,
            inputs.series_max_terms,
            |i| inputs.delta_at(k, i),
            |i| {
                cross_tier_ratio_moment(i, t.path_loss_exp, a_star, t.density_per_m2, star.density_per_m2)
                    .unwrap_or(f64::NAN)
            },
        )?;
        total += t.power_w / star.power_w * cross.value;
    }
    Ok(total / dof as f64)
}

/// Markov-inequality lower bound on P[SIR ≥ β]; flagged invalid (vacuous)
/// when negative. The raw value is kept.
pub fn ccdf_lower_bound(beta: f64, inputs: &BoundInputs) -> Result<BoundValue> {
    if beta < 0.0 {
        return Err(Error::Config("beta must be >= 0".into()));
    }
    let slope = lower_bound_slope(inputs)?;
    let value = 1.0 - beta * slope;
    Ok(BoundValue { value, valid: value > 0.0 })
}

/// Upper bound on P[SIR ≥ β], evaluated as the closed form is written.
///
/// The factor Γ(1 − α_{k*}/2) is a reflected Gamma value for α_{k*} > 2; it
/// is negative for α_{k*} ∈ (2, 4) ∪ (6, 8) ∪ … and has poles at even
/// integers. The result is flagged valid only if that factor is positive and
/// the value lands in [0, 1].
pub fn ccdf_upper_bound(beta: f64, inputs: &BoundInputs) -> Result<BoundValue> {
    if beta < 0.0 {
        return Err(Error::Config("beta must be >= 0".into()));
    }
    inputs.validate()?;
    let ks = inputs.serving_tier;
    let star = &inputs.tiers[ks];
    let a_star = star.path_loss_exp;
    let half = a_star / 2.0;
    if (half - half.round()).abs() < 1e-12 && half.round() >= 1.0 {
        return Err(Error::GammaPole { alpha: a_star });
    }
    let g = gamma(1.0 - half);
    let a_max = inputs.tiers.iter().map(|t| t.path_loss_exp).fold(f64::MIN, f64::max);
    let lambda = equivalent_density(&inputs.tiers, ks);
    let d = inputs.min_serving_tier_delta();
    let m = inputs.cos_count as f64;
    let bracket = 3f64.powf(-a_max) * d + (2.0 * m + 3.0).powf(-a_max) * (1.0 - d);
    let zf = (star.antennas - inputs.set_size()) as f64;
    let inner = beta * bracket / (zf * g);
    let value = if inner == 0.0 {
        1.0
    } else {
        let expo = (PI * lambda).powf(1.0 - a_star / a_max) * gamma(1.0 + 2.0 / a_max) * inner.powf(2.0 / a_max);
        (-expo).exp()
    };
    let valid = g > 0.0 && value.is_finite() && (0.0..=1.0).contains(&value);
    Ok(BoundValue { value, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{CoordinationRule, ServingRule};
    use crate::overhead::{DelayDist, LifetimeDist};

    fn tier(density: f64, power: f64, antennas: usize, alpha: f64, bits: u32) -> TierParams {
        TierParams { tier_id: 1, density_per_m2: density, power_w: power, antennas, path_loss_exp: alpha, feedback_bits: bits }
    }

    fn draw_by_hand(distances: Vec<Vec<f64>>, tiers: &[TierParams], coord: Vec<BsRef>, fading: Vec<Vec<f64>>, g1: f64) -> TrialDraw {
        let mean_power = tiers.iter().zip(&distances).map(|(t, d)| d.iter().map(|&r| t.mean_power_at(r)).collect()).collect();
        let s = coord.len();
        TrialDraw {
            realization: NetworkRealization {
                distances,
                serving: crate::net::Serving { tier: 0, distance: 0.0 },
                coord_set: coord,
                radius: 1e4,
                resamples: 0,
            },
            mean_power,
            serving_gain: g1,
            fading,
            u_lifetime: vec![0.5; s],
            u_delay: vec![0.5; s],
        }
    }

    fn plain_sim(tiers: Vec<TierParams>, coord: usize) -> SirSimulator {
        let mut cfg = NetworkConfig::new(tiers, coord);
        cfg.far_field = false;
        cfg.sim_radius_m = Some(1e4);
        SirSimulator::new(cfg, CosGainModel::ScaledExponential).unwrap()
    }

    #[test]
    fn two_bs_sir_reduces_to_ratio() {
        let tiers = vec![tier(1e-5, 10.0, 4, 4.0, 3)];
        let sim = plain_sim(tiers.clone(), 0);
        let mut d = draw_by_hand(vec![vec![50.0, 120.0]], &tiers, vec![], vec![vec![0.0, 0.7]], 2.5);
        d.realization.serving.distance = 50.0;
        let s = sim.evaluate_with_states(&d, &[]).unwrap();
        let expect = 2.5 * 50f64.powf(-4.0) / (0.7 * 120f64.powf(-4.0));
        assert!((s.sir / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_sir_unit_gains() {
        let tiers = vec![tier(1e-5, 40.0, 8, 4.0, 21), tier(1e-5, 5.0, 4, 3.5, 9)];
        let sim = plain_sim(tiers.clone(), 0);
        let d = draw_by_hand(vec![vec![100.0, 200.0], vec![150.0]], &tiers, vec![], vec![vec![1.0, 1.0], vec![1.0]], 1.0);
        let s = sim.evaluate_with_states(&d, &[]).unwrap();
        let signal = 40.0 * 1e-8;
        let interf = 40.0 / 1.6e9 + 5.0 * 150f64.powf(-3.5);
        assert!((s.sir - signal / interf).abs() <= 1e-12 * s.sir);
    }

    #[test]
    fn silent_members_contribute_nothing() {
        let tiers = vec![tier(1e-5, 10.0, 4, 4.0, 3)];
        let sim = plain_sim(tiers.clone(), 1);
        let coord = vec![BsRef { tier: 0, index: 1 }];
        let d = draw_by_hand(vec![vec![50.0, 60.0, 300.0]], &tiers, coord.clone(), vec![vec![0.0, 3.0, 1.0]], 1.0);
        let silent = sim.evaluate_with_states(&d, &[LinkStateKind::Silent]).unwrap();
        let expect = 50f64.powf(-4.0) / 300f64.powf(-4.0);
        assert!((silent.sir / expect - 1.0).abs() < 1e-12);
        assert_eq!(silent.silent_count, 1);

        let cos = sim.evaluate_with_states(&d, &[LinkStateKind::Cos]).unwrap();
        let expect = 50f64.powf(-4.0) / (300f64.powf(-4.0) + 0.5 * 3.0 * 60f64.powf(-4.0));
        assert!((cos.sir / expect - 1.0).abs() < 1e-12);

        // only BS in the disk is the silent member: zero interference
        let lonely = draw_by_hand(vec![vec![50.0, 60.0]], &tiers, coord, vec![vec![0.0, 3.0]], 1.0);
        assert!(sim.evaluate_with_states(&lonely, &[LinkStateKind::Silent]).unwrap().sir.is_infinite());
        assert!(sim.evaluate_with_states(&d, &[]).is_err());
    }

    #[test]
    fn distance_ratio_closed_forms() {
        assert!((distance_ratio_moment(2, 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        // α → 2⁺: Γ(2)(i−1)!/Γ(i+1) = 1/i
        for i in 2..8 {
            assert!((distance_ratio_moment(i, 2.0 + 1e-9).unwrap() - 1.0 / i as f64).abs() < 1e-8);
        }
        let mut prev = 1.0;
        for i in 2..200 {
            let m = distance_ratio_moment(i, 3.5).unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(distance_ratio_moment(10_000, 4.0).unwrap() > 0.0);
        assert!(distance_ratio_moment(1, 4.0).is_err());
        assert!(distance_ratio_moment(3, 2.0).is_err());
    }

    #[test]
    fn cross_tier_reduces_to_same_tier() {
        for i in 2..6 {
            let a = cross_tier_ratio_moment(i, 4.0, 4.0, 1e-5, 1e-5).unwrap();
            let b = distance_ratio_moment(i, 4.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let m = cross_tier_ratio_moment(i, 3.0, 4.0, 2e-5, 1e-6).unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(cross_tier_ratio_moment_exact(2, 4.0, 4.0, 1e-5, 1e-6).unwrap().is_infinite());
        assert!(cross_tier_ratio_moment_exact(3, 4.0, 4.0, 1e-5, 1e-6).unwrap().is_finite());
    }

    #[test]
    fn equivalent_density_values() {
        let single = vec![tier(3e-6, 1.0, 4, 4.0, 0)];
        assert_eq!(equivalent_density(&single, 0), 3e-6);
        let two = vec![tier(1e-6, 5.0, 4, 4.0, 0), tier(2e-6, 5.0, 4, 3.0, 0)];
        assert!((equivalent_density(&two, 0) - 3e-6).abs() < 1e-20);
        let mixed = vec![tier(1e-6, 40.0, 8, 4.0, 0), tier(5e-6, 5.0, 4, 3.5, 0)];
        let expect = 1e-6 + 5e-6 * (5.0f64 / 40.0).powf(2.0 / 3.5);
        assert!((equivalent_density(&mixed, 0) - expect).abs() < 1e-18);
        assert!((equivalent_density(&mixed, 0) - 2.52377e-6).abs() < 1e-11);
    }

    fn single_tier_inputs(alpha: f64, n: usize) -> BoundInputs {
        let model = DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Uniform { max_ms: 150.0 }, 70.0);
        BoundInputs::new(vec![tier(1e-5, 10.0, n, alpha, 3 * (n as u32 - 1))], 0, vec![], &model, 0).unwrap()
    }

    #[test]
    fn series_matches_closed_form_sum() {
        // Σ_{i≥1} Γ(i)/Γ(i+s) = 1/((s−1)Γ(s)); the same-tier series starts at i = 2.
        for alpha in [3.0, 3.5, 4.0, 5.0] {
            let s: f64 = alpha / 2.0;
            let inputs = single_tier_inputs(alpha, 8);
            let closed = gamma(1.0 + s) * (1.0 / ((s - 1.0) * gamma(s)) - 1.0 / gamma(1.0 + s));
            let slope = lower_bound_slope(&inputs).unwrap();
            assert!((slope * 7.0 / closed - 1.0).abs() < 1e-10, "alpha {alpha}: {} vs {closed}", slope * 7.0);
        }
    }

    #[test]
    fn lower_bound_structure() {
        let inputs = single_tier_inputs(4.0, 8);
        assert_eq!(ccdf_lower_bound(0.0, &inputs).unwrap(), BoundValue { value: 1.0, valid: true });
        let slope = lower_bound_slope(&inputs).unwrap();
        // α = 4: Σ_{i≥2} 2/(i(i+1)) = 1, so the slope is 1/(n − 1)
        assert!((slope - 1.0 / 7.0).abs() < 1e-9);
        for b in [0.1, 1.0, 5.0, 10.0] {
            let lb = ccdf_lower_bound(b, &inputs).unwrap();
            assert!((lb.value - (1.0 - b * slope)).abs() < 1e-14);
            assert_eq!(lb.valid, lb.value > 0.0);
        }
    }

    #[test]
    fn lower_bound_needs_spare_antenna() {
        let model = DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Uniform { max_ms: 150.0 }, 70.0);
        let inputs = BoundInputs::new(vec![tier(1e-5, 10.0, 2, 4.0, 3)], 0, vec![BsRef { tier: 0, index: 1 }], &model, 0).unwrap();
        assert!(ccdf_lower_bound(0.5, &inputs).is_err());
    }

    #[test]
    fn upper_bound_structure() {
        assert!(matches!(ccdf_upper_bound(1.0, &single_tier_inputs(4.0, 8)), Err(Error::GammaPole { .. })));
        let neg = single_tier_inputs(3.5, 8);
        let v = ccdf_upper_bound(1.0, &neg).unwrap();
        assert!(!v.valid);
        let inputs = single_tier_inputs(5.0, 8);
        assert_eq!(ccdf_upper_bound(0.0, &inputs).unwrap().value, 1.0);
        let mut prev = 1.0;
        for b in [0.01, 0.1, 1.0, 10.0] {
            let v = ccdf_upper_bound(b, &inputs).unwrap();
            assert!(v.valid);
            assert!(v.value <= prev);
            prev = v.value;
        }
    }

    #[test]
    fn upper_bound_grows_with_cos_count() {
        let model = DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Uniform { max_ms: 150.0 }, 70.0);
        let members = vec![BsRef { tier: 0, index: 1 }, BsRef { tier: 0, index: 2 }, BsRef { tier: 0, index: 3 }];
        let mut prev = 0.0;
        for m in 0..=3 {
            let inputs = BoundInputs::new(vec![tier(1e-5, 10.0, 8, 5.0, 21)], 0, members.clone(), &model, m).unwrap();
            let v = ccdf_upper_bound(2.0, &inputs).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn silent_dominates_stale_pairwise() {
        let tiers = vec![tier(1e-5, 10.0, 4, 4.0, 3), tier(3e-5, 1.0, 4, 3.0, 1)];
        let mut cfg = NetworkConfig::new(tiers, 2);
        cfg.serving = ServingRule::Strongest;
        cfg.coordination = CoordinationRule::Strongest;
        let sim = SirSimulator::new(cfg, CosGainModel::ScaledExponential).unwrap();
        for t in 0..300 {
            let d = sim.draw(&mut trial_rng(5, t)).unwrap();
            let silent = sim.evaluate_with_states(&d, &[LinkStateKind::Silent; 2]).unwrap().sir;
            let stale = sim.evaluate_with_states(&d, &[LinkStateKind::StaleActive; 2]).unwrap().sir;
            assert!(silent >= stale);
        }
    }
}
