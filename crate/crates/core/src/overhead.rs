//! Overhead-message lifetimes, backhaul delays and the adaptive waiting window.
//!
//! A coordinated BS receives each overhead message after a backhaul delay `D`;
//! the message describes a channel that stays valid for a lifetime `L`. With a
//! waiting window `w` the BS classifies itself per message:
//!
//! * `D > w`: silent (it gave up waiting),
//! * `D ≤ min{L, w}`: COS, interference reduced to 2^(−b/(n−1)),
//! * `L < D ≤ w`: stale but active, full interference.
//!
//! All times are milliseconds. `w = ∞` is the non-adaptive scheme.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::fading::cos_scale;
use crate::numeric::{gamma_lr, gamma_ur, golden_section_min, integrate, ln_gamma};

const QUAD_TOL: f64 = 1e-8;
/// Lifetime tail mass ignored when an integral runs to infinity.
const TAIL_MASS: f64 = 1e-12;

/// Gamma lifetime with shape `m` and mean `1/μ`, i.e. Γ(m, 1/(mμ)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeDist {
    pub gamma_shape: f64,
    pub mean_ms: f64,
}

impl LifetimeDist {
    pub fn exponential(mean_ms: f64) -> Self {
        Self { gamma_shape: 1.0, mean_ms }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_shape >= 1.0 && self.gamma_shape.is_finite()) {
            return Err(Error::Config("lifetime gamma_shape must be >= 1".into()));
        }
        if !(self.mean_ms > 0.0 && self.mean_ms.is_finite()) {
            return Err(Error::Config("mean lifetime must be positive".into()));
        }
        Ok(())
    }

    fn rate(&self) -> f64 {
        self.gamma_shape / self.mean_ms
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gamma_lr(self.gamma_shape, x * self.rate())
    }

    pub fn ccdf(&self, x: f64) -> f64 {
        gamma_ur(self.gamma_shape, x * self.rate())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let m = self.gamma_shape;
        let b = self.rate();
        if x == 0.0 {
            return if m == 1.0 { b } else { 0.0 };
        }
        (m * b.ln() + (m - 1.0) * x.ln() - b * x - ln_gamma(m)).exp()
    }

    /// Smallest x with P[L > x] below 1e-12.
    pub fn upper_support(&self) -> f64 {
        let mut hi = self.mean_ms;
        while self.ccdf(hi) > TAIL_MASS {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.ccdf(mid) > TAIL_MASS {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.gamma_shape, 1.0 / self.rate()).expect("validated").sample(rng)
    }

    /// Inverse CDF, for common-random-number sampling.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.gamma_shape == 1.0 {
            return -self.mean_ms * (-u).ln_1p();
        }
        statrs::distribution::Gamma::new(self.gamma_shape, self.rate())
            .expect("validated")
            .inverse_cdf(u)
    }
}

/// Backhaul delay law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayDist {
    Deterministic { value_ms: f64 },
    Uniform { max_ms: f64 },
    Exponential { mean_ms: f64 },
    Gamma { shape: f64, mean_ms: f64 },
}

impl DelayDist {
    /// Uniform on [0, 2·mean]; a zero mean collapses to D ≡ 0.
    pub fn uniform_with_mean(mean_ms: f64) -> Self {
        if mean_ms == 0.0 {
            DelayDist::Deterministic { value_ms: 0.0 }
        } else {
            DelayDist::Uniform { max_ms: 2.0 * mean_ms }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayDist::Deterministic { value_ms } => value_ms >= 0.0 && value_ms.is_finite(),
            DelayDist::Uniform { max_ms } => max_ms >= 0.0 && max_ms.is_finite(),
            DelayDist::Exponential { mean_ms } => mean_ms > 0.0 && mean_ms.is_finite(),
            DelayDist::Gamma { shape, mean_ms } => {
                shape > 0.0 && shape.is_finite() && mean_ms > 0.0 && mean_ms.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid delay distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DelayDist::Deterministic { value_ms } => value_ms,
            DelayDist::Uniform { max_ms } => 0.5 * max_ms,
            DelayDist::Exponential { mean_ms } | DelayDist::Gamma { mean_ms, .. } => mean_ms,
        }
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            DelayDist::Deterministic { value_ms } => (x >= value_ms) as u8 as f64,
            DelayDist::Uniform { max_ms } => {
                if max_ms == 0.0 {
                    1.0
                } else {
                    (x / max_ms).min(1.0)
                }
            }
            DelayDist::Exponential { mean_ms } => -(-x / mean_ms).exp_m1(),
            DelayDist::Gamma { shape, mean_ms } => gamma_lr(shape, x * shape / mean_ms),
        }
    }

    /// Points where the CDF jumps or has a kink; handed to the quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            DelayDist::Deterministic { value_ms } => vec![value_ms],
            DelayDist::Uniform { max_ms } => vec![max_ms],
            _ => vec![],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayDist::Deterministic { value_ms } => value_ms,
            DelayDist::Uniform { max_ms } => max_ms * rng.random::<f64>(),
            DelayDist::Exponential { mean_ms } => Exp::new(1.0 / mean_ms).expect("validated").sample(rng),
            DelayDist::Gamma { shape, mean_ms } => {
                Gamma::new(shape, mean_ms / shape).expect("validated").sample(rng)
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            DelayDist::Deterministic { value_ms } => value_ms,
            DelayDist::Uniform { max_ms } => max_ms * u,
            DelayDist::Exponential { mean_ms } => -mean_ms * (-u).ln_1p(),
            DelayDist::Gamma { shape, mean_ms } => statrs::distribution::Gamma::new(shape, shape / mean_ms)
                .expect("validated")
                .inverse_cdf(u),
        }
    }
}

/// Lifetime and delay laws plus the waiting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub lifetime: LifetimeDist,
    pub delay: DelayDist,
    /// Waiting window in ms; `f64::INFINITY` disables adaptation.
    #[serde(with = "window_serde")]
    pub window_ms: f64,
}

impl DurationModel {
    pub fn new(lifetime: LifetimeDist, delay: DelayDist, window_ms: f64) -> Self {
        Self { lifetime, delay, window_ms }
    }

    pub fn with_window(self, window_ms: f64) -> Self {
        Self { window_ms, ..self }
    }

    pub fn with_delay(self, delay: DelayDist) -> Self {
        Self { delay, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.lifetime.validate()?;
        self.delay.validate()?;
        if self.window_ms.is_nan() || self.window_ms < 0.0 {
            return Err(Error::Config("window_ms must be >= 0 (or inf)".into()));
        }
        Ok(())
    }

    /// Upper integration limit: the window, capped where the lifetime tail vanishes.
    fn horizon(&self) -> f64 {
        self.window_ms.min(self.lifetime.upper_support())
    }
}

mod window_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &f64, s: S) -> Result<S::Ok, S::Error> {
        if w.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*w)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Inf" | "none") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid window '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkStateKind {
    Cos,
    StaleActive,
    Silent,
    NotCoordinated,
}

/// Outcome for one BS together with its interference scaling factor δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub state: LinkStateKind,
    pub delta: f64,
}

impl LinkState {
    pub fn new(state: LinkStateKind, bits: u32, antennas: usize) -> Result<Self> {
        let member = state != LinkStateKind::NotCoordinated;
        Ok(Self { state, delta: delta_factor(member, state, bits, antennas)? })
    }
}

/// State of a coordinated BS for one message. COS wins the boundary
/// `min{L, w} = D`.
pub fn classify(lifetime: f64, delay: f64, window: f64) -> LinkStateKind {
    if lifetime.min(window) >= delay {
        LinkStateKind::Cos
    } else if window >= delay {
        LinkStateKind::StaleActive
    } else {
        LinkStateKind::Silent
    }
}

pub fn delta_factor(member: bool, state: LinkStateKind, bits: u32, antennas: usize) -> Result<f64> {
    if member == (state == LinkStateKind::NotCoordinated) {
        return Err(Error::Config(format!("state {state:?} inconsistent with membership {member}")));
    }
    Ok(match state {
        LinkStateKind::NotCoordinated | LinkStateKind::StaleActive => 1.0,
        LinkStateKind::Silent => 0.0,
        LinkStateKind::Cos => cos_scale(bits, antennas)?,
    })
}

/// Per-message state probabilities of a coordinated BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateProbabilities {
    pub cos: f64,
    pub stale: f64,
    pub silent: f64,
}

/// P[L < D ≤ w] = F_L(w)F_D(w) − ∫₀^w F_D(x) f_L(x) dx (parts on E[F_L(D); D ≤ w]).
fn stale_probability(model: &DurationModel) -> Result<f64> {
    let horizon = model.horizon();
    let l = &model.lifetime;
    let d = &model.delay;
    let q = integrate(|x| d.cdf(x) * l.pdf(x), 0.0, horizon, &d.breakpoints(), QUAD_TOL)?;
    let edge = if model.window_ms.is_infinite() { 1.0 } else { l.cdf(model.window_ms) * d.cdf(model.window_ms) };
    Ok((edge - q.value).max(0.0))
}

pub fn state_probabilities(model: &DurationModel) -> Result<StateProbabilities> {
    model.validate()?;
    let reach = model.delay.cdf(model.window_ms);
    let stale = stale_probability(model)?.min(reach);
    Ok(StateProbabilities { cos: reach - stale, stale, silent: 1.0 - reach })
}

/// P[D ≤ min{L, w}]: the per-message COS probability.
pub fn cos_probability(model: &DurationModel) -> Result<f64> {
    Ok(state_probabilities(model)?.cos)
}

/// E[δ] for a BS: 1 outside the coordination set, otherwise
/// 2^(−b/(n−1))·P[COS] + P[stale].
pub fn expected_delta(model: &DurationModel, bits: u32, antennas: usize, member: bool) -> Result<f64> {
    if !member {
        return Ok(1.0);
    }
    let scale = cos_scale(bits, antennas)?;
    let p = state_probabilities(model)?;
    Ok((scale * p.cos + p.stale).clamp(0.0, 1.0))
}

/// Long-run fraction of time a coordinated BS spends in COS:
/// η = μ·E[(min{L, w} − D)⁺] = μ ∫₀^w F̄_L(x) F_D(x) dx.
pub fn cos_time_fraction(model: &DurationModel) -> Result<f64> {
    model.validate()?;
    let l = &model.lifetime;
    let d = &model.delay;
    let q = integrate(|x| l.ccdf(x) * d.cdf(x), 0.0, model.horizon(), &d.breakpoints(), QUAD_TOL)?;
    Ok((q.value / l.mean_ms).clamp(0.0, 1.0))
}

/// Renewal-average Monte Carlo estimate with its (delta-method) standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Default, Clone, Copy)]
struct RatioSums {
    n: u64,
    y: f64,
    x: f64,
    yy: f64,
    xx: f64,
    xy: f64,
}

impl RatioSums {
    fn push(&mut self, y: f64, x: f64) {
        self.n += 1;
        self.y += y;
        self.x += x;
        self.yy += y * y;
        self.xx += x * x;
        self.xy += x * y;
    }

    fn merge(mut self, o: RatioSums) -> RatioSums {
        self.n += o.n;
        self.y += o.y;
        self.x += o.x;
        self.yy += o.yy;
        self.xx += o.xx;
        self.xy += o.xy;
        self
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        if self.x == 0.0 {
            return McEstimate { value: 0.0, stderr: 0.0, samples: self.n };
        }
        let r = self.y / self.x;
        let xbar = self.x / n;
        // sample variance of Y − rX
        let ss = self.yy - 2.0 * r * self.xy + r * r * self.xx;
        let var = (ss / n).max(0.0) * n / (n - 1.0).max(1.0);
        McEstimate { value: r, stderr: (var / n).sqrt() / xbar, samples: self.n }
    }
}

fn renewal_block<R: Rng + ?Sized>(model: &DurationModel, rng: &mut R) -> (f64, f64) {
    let l = model.lifetime.sample(rng);
    let d = model.delay.sample(rng);
    ((l.min(model.window_ms) - d).max(0.0), l)
}

/// Σ(min{L_j, w} − D_j)⁺ / ΣL_j over `blocks` i.i.d. message blocks.
pub fn cos_time_fraction_mc<R: Rng + ?Sized>(model: &DurationModel, blocks: u64, rng: &mut R) -> Result<McEstimate> {
    model.validate()?;
    if blocks == 0 {
        return Err(Error::Config("blocks must be >= 1".into()));
    }
    let mut sums = RatioSums::default();
    for _ in 0..blocks {
        let (y, x) = renewal_block(model, rng);
        sums.push(y, x);
    }
    Ok(sums.estimate())
}

const MC_CHUNK: u64 = 1 << 16;

/// Parallel variant of [`cos_time_fraction_mc`]: blocks are split into fixed
/// chunks, chunk `c` drawing from ChaCha8(`seed`) stream `c`, and chunk sums
/// are reduced in order, so the result does not depend on the thread count.
pub fn cos_time_fraction_mc_seeded(model: &DurationModel, blocks: u64, seed: u64) -> Result<McEstimate> {
    model.validate()?;
    if blocks == 0 {
        return Err(Error::Config("blocks must be >= 1".into()));
    }
    let chunks = blocks.div_ceil(MC_CHUNK);
    let partial: Vec<RatioSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = MC_CHUNK.min(blocks - c * MC_CHUNK);
            let mut sums = RatioSums::default();
            for _ in 0..len {
                let (y, x) = renewal_block(model, &mut rng);
                sums.push(y, x);
            }
            sums
        })
        .collect();
    Ok(partial.into_iter().fold(RatioSums::default(), RatioSums::merge).estimate())
}

/// Result of a grid-plus-golden-section search over the waiting window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOptimum {
    pub window_ms: f64,
    pub value: f64,
    /// Optimum sits at an end of the searched range.
    pub at_boundary: bool,
}

const GRID_POINTS: usize = 200;

fn grid_then_golden<F>(f: F, lo: f64, hi: f64) -> Option<WindowOptimum>
where
    F: Fn(f64) -> f64,
{
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(GRID_POINTS - 1)];
    let (w, v) = golden_section_min(&f, a, b, 1e-6 * (hi - lo));
    let (w, v) = if v.is_finite() && v <= best_val { (w, v) } else { (grid[best], best_val) };
    let edge = 1e-3 * (hi - lo);
    let at_boundary = (best == 0 && w - lo < edge) || (best == GRID_POINTS - 1 && hi - w < edge);
    Some(WindowOptimum { window_ms: w, value: v, at_boundary })
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!("window range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Minimize E[δ(w)]/η(w) over `[lo, hi]`.
pub fn optimize_window(model: &DurationModel, bits: u32, antennas: usize, lo: f64, hi: f64) -> Result<WindowOptimum> {
    check_range(lo, hi)?;
    model.validate()?;
    cos_scale(bits, antennas)?;
    let objective = |w: f64| -> f64 {
        let m = model.with_window(w);
        let eta = cos_time_fraction(&m).unwrap_or(0.0);
        if eta <= 0.0 {
            return f64::INFINITY;
        }
        expected_delta(&m, bits, antennas, true).map(|d| d / eta).unwrap_or(f64::INFINITY)
    };
    grid_then_golden(objective, lo, hi).ok_or(Error::ObjectiveUndefined { lo, hi })
}

/// Maximize η(w) over `[lo, hi]`.
pub fn maximize_time_fraction(model: &DurationModel, lo: f64, hi: f64) -> Result<WindowOptimum> {
    check_range(lo, hi)?;
    model.validate()?;
    let neg = |w: f64| -cos_time_fraction(&model.with_window(w)).unwrap_or(0.0);
    let opt = grid_then_golden(neg, lo, hi).ok_or(Error::ObjectiveUndefined { lo, hi })?;
    Ok(WindowOptimum { value: -opt.value, ..opt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset_model(w: f64) -> DurationModel {
        DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Uniform { max_ms: 150.0 }, w)
    }

    fn no_delay(w: f64) -> DurationModel {
        DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Deterministic { value_ms: 0.0 }, w)
    }

    #[test]
    fn classify_cases() {
        assert_eq!(classify(80.0, 50.0, 70.0), LinkStateKind::Cos);
        assert_eq!(classify(40.0, 50.0, 70.0), LinkStateKind::StaleActive);
        assert_eq!(classify(80.0, 90.0, 70.0), LinkStateKind::Silent);
        // boundary ties go to COS
        assert_eq!(classify(50.0, 50.0, 70.0), LinkStateKind::Cos);
        assert_eq!(classify(80.0, 70.0, 70.0), LinkStateKind::Cos);
        assert_eq!(classify(80.0, 10.0, f64::INFINITY), LinkStateKind::Cos);
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_factor(false, LinkStateKind::NotCoordinated, 3, 2).unwrap(), 1.0);
        assert_eq!(delta_factor(true, LinkStateKind::Cos, 21, 8).unwrap(), 0.125);
        assert_eq!(delta_factor(true, LinkStateKind::Silent, 21, 8).unwrap(), 0.0);
        assert_eq!(delta_factor(true, LinkStateKind::StaleActive, 21, 8).unwrap(), 1.0);
        assert!(delta_factor(true, LinkStateKind::Cos, 3, 1).is_err());
        assert!(delta_factor(true, LinkStateKind::NotCoordinated, 3, 4).is_err());
        assert!(delta_factor(false, LinkStateKind::Cos, 3, 4).is_err());
    }

    #[test]
    fn zero_window_silences() {
        let m = preset_model(0.0);
        assert_eq!(expected_delta(&m, 9, 4, true).unwrap(), 0.0);
        assert_eq!(cos_time_fraction(&m).unwrap(), 0.0);
        assert_eq!(expected_delta(&m, 9, 4, false).unwrap(), 1.0);
    }

    #[test]
    fn no_delay_infinite_window_is_always_cos() {
        let m = no_delay(f64::INFINITY);
        assert!((expected_delta(&m, 9, 4, true).unwrap() - 0.125).abs() < 1e-10);
        assert!((cos_time_fraction(&m).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_closed_forms() {
        // L ~ Exp(mean a), D ~ U[0, c], w ≥ c: P[stale] = P[L < D] = 1 − a(1 − e^{−c/a})/c,
        // η = (1/a)∫₀^c e^{−x/a} x/c dx + (1/a)∫_c^w e^{−x/a} dx.
        let (a, c, w) = (80.0f64, 150.0f64, 200.0f64);
        let m = DurationModel::new(LifetimeDist::exponential(a), DelayDist::Uniform { max_ms: c }, w);
        let p = state_probabilities(&m).unwrap();
        let stale = 1.0 - a * (1.0 - (-c / a).exp()) / c;
        assert!((p.stale - stale).abs() < 1e-9);
        assert!((p.cos + p.stale - 1.0).abs() < 1e-12);
        let first = (a - (a + c) * (-c / a).exp()) / c;
        let second = (-c / a).exp() - (-w / a).exp();
        assert!((cos_time_fraction(&m).unwrap() - (first + second)).abs() < 1e-9);
    }

    #[test]
    fn time_fraction_optimum_is_at_the_right_edge() {
        let opt = maximize_time_fraction(&preset_model(0.0), 1.0, 150.0).unwrap();
        assert!(opt.at_boundary);
        assert!((opt.window_ms - 150.0).abs() < 0.2);
    }

    #[test]
    fn window_objective_has_interior_minimum() {
        let opt = optimize_window(&preset_model(0.0), 9, 4, 1.0, 150.0).unwrap();
        assert!(!opt.at_boundary);
        assert!(opt.window_ms > 40.0 && opt.window_ms < 90.0, "{opt:?}");
        for dw in [-5.0, 5.0] {
            let m = preset_model(opt.window_ms + dw);
            let other = expected_delta(&m, 9, 4, true).unwrap() / cos_time_fraction(&m).unwrap();
            assert!(opt.value <= other);
        }
    }

    #[test]
    fn window_objective_no_delay_hits_upper_edge() {
        let opt = optimize_window(&no_delay(0.0), 9, 4, 1.0, 150.0).unwrap();
        assert!(opt.at_boundary);
        assert!((opt.window_ms - 150.0).abs() < 0.2);
    }

    #[test]
    fn window_objective_undefined_when_never_cos() {
        let m = DurationModel::new(LifetimeDist::exponential(80.0), DelayDist::Deterministic { value_ms: 500.0 }, 0.0);
        assert!(matches!(optimize_window(&m, 9, 4, 1.0, 150.0), Err(Error::ObjectiveUndefined { .. })));
        assert!(optimize_window(&m, 9, 4, 0.0, 150.0).is_err());
    }

    #[test]
    fn renewal_mc_degenerate_cases() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = cos_time_fraction_mc(&no_delay(f64::INFINITY), 10_000, &mut rng).unwrap();
        assert_eq!(est.value, 1.0);
        let est = cos_time_fraction_mc(&preset_model(0.0), 10_000, &mut rng).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(cos_time_fraction_mc(&preset_model(1.0), 0, &mut rng).is_err());
    }

    #[test]
    fn seeded_mc_is_thread_count_independent() {
        let m = preset_model(62.0);
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| {
            cos_time_fraction_mc_seeded(&m, 300_000, 9).unwrap()
        });
        let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| {
            cos_time_fraction_mc_seeded(&m, 300_000, 9).unwrap()
        });
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_lifetime_pdf_integrates_to_one() {
        let l = LifetimeDist { gamma_shape: 3.0, mean_ms: 80.0 };
        let q = integrate(|x| l.pdf(x), 0.0, l.upper_support(), &[], 1e-10).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9);
        assert!((l.quantile(l.cdf(95.0)) - 95.0).abs() < 1e-6);
    }

    #[test]
    fn window_serde_accepts_inf() {
        #[derive(Deserialize)]
        struct W {
            #[serde(with = "window_serde")]
            w: f64,
        }
        let w: W = toml::from_str("w = inf").unwrap();
        assert!(w.w.is_infinite());
        let w: W = toml::from_str("w = \"inf\"").unwrap();
        assert!(w.w.is_infinite());
        let w: W = serde_json::from_str("{\"w\": 70}").unwrap();
        assert_eq!(w.w, 70.0);
    }
}
