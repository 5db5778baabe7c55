//! K-tier Poisson deployments, max-average-power association and coordination
//! set selection.
//!
//! The reference user sits at the origin. Each tier is a homogeneous PPP that
//! is sampled on a disk of radius `sim_radius`; only distances to the origin
//! are kept, sorted ascending, since every quantity downstream depends on the
//! BS positions through their distances alone.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deployment constants shared by every BS of one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub tier_id: u32,
    /// BS per m².
    pub density_per_m2: f64,
    pub power_w: f64,
    pub antennas: usize,
    pub path_loss_exp: f64,
    pub feedback_bits: u32,
}

impl TierParams {
    pub fn validate(&self) -> Result<()> {
        let id = self.tier_id;
        if !(self.density_per_m2 > 0.0 && self.density_per_m2.is_finite()) {
            return Err(Error::Config(format!("tier {id}: density must be positive")));
        }
        if !(self.power_w > 0.0 && self.power_w.is_finite()) {
            return Err(Error::Config(format!("tier {id}: power must be positive")));
        }
        if self.antennas < 1 {
            return Err(Error::Config(format!("tier {id}: at least one antenna required")));
        }
        if !(self.path_loss_exp > 2.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::Config(format!(
                "tier {id}: path-loss exponent must exceed 2 for finite interference"
            )));
        }
        Ok(())
    }

    /// Long-term average received power at distance `r`.
    #[inline]
    pub fn mean_power_at(&self, r: f64) -> f64 {
        self.power_w * r.powf(-self.path_loss_exp)
    }

    /// Mean distance from the origin to the nearest BS of this tier.
    pub fn mean_nearest_distance(&self) -> f64 {
        0.5 / self.density_per_m2.sqrt()
    }
}

/// How the reference user picks its serving BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ServingRule {
    /// Largest long-term average power over the nearest BS of every tier.
    #[default]
    Strongest,
    /// Nearest BS of the given (0-based) tier, regardless of the others.
    FixedTier(usize),
}

/// How the coordination set of the serving BS is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinationRule {
    /// The `coord_set_size` strongest non-serving BSs by average power.
    #[default]
    Strongest,
    /// Explicit members by (0-based tier, 0-based distance order index).
    Fixed(Vec<BsRef>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsRef {
    pub tier: usize,
    /// 0-based position in the tier's ascending distance order.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub tiers: Vec<TierParams>,
    /// Explicit simulation disk radius in meters; `None` picks the default.
    #[serde(default)]
    pub sim_radius_m: Option<f64>,
    pub coord_set_size: usize,
    #[serde(default)]
    pub serving: ServingRule,
    #[serde(default)]
    pub coordination: CoordinationRule,
    /// Replace interference from beyond the disk by its closed-form mean.
    #[serde(default = "default_true")]
    pub far_field: bool,
}

fn default_true() -> bool {
    true
}

const TRUNCATION_FRACTION: f64 = 1e-3;

impl NetworkConfig {
    pub fn new(tiers: Vec<TierParams>, coord_set_size: usize) -> Self {
        Self {
            tiers,
            sim_radius_m: None,
            coord_set_size,
            serving: ServingRule::Strongest,
            coordination: CoordinationRule::Strongest,
            far_field: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Config("at least one tier is required".into()));
        }
        for t in &self.tiers {
            t.validate()?;
        }
        if let Some(r) = self.sim_radius_m {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("sim_radius_m must be positive".into()));
            }
        }
        if let ServingRule::FixedTier(k) = self.serving {
            if k >= self.tiers.len() {
                return Err(Error::Config(format!("serving tier {k} out of range")));
            }
        }
        if let CoordinationRule::Fixed(members) = &self.coordination {
            if members.len() != self.coord_set_size {
                return Err(Error::Config(format!(
                    "fixed coordination set has {} members but coord_set_size is {}",
                    members.len(),
                    self.coord_set_size
                )));
            }
            if members.iter().any(|m| m.tier >= self.tiers.len()) {
                return Err(Error::Config("fixed coordination member tier out of range".into()));
            }
        }
        for k in self.candidate_serving_tiers() {
            let antennas = self.tiers[k].antennas;
            if self.coord_set_size >= antennas {
                return Err(Error::ZeroForcingInfeasible { set_size: self.coord_set_size, antennas });
            }
        }
        Ok(())
    }

    /// Tiers that may end up serving the user under the configured rule.
    pub fn candidate_serving_tiers(&self) -> Vec<usize> {
        match self.serving {
            ServingRule::FixedTier(k) => vec![k],
            ServingRule::Strongest => (0..self.tiers.len()).collect(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.sim_radius_m.unwrap_or_else(|| default_sim_radius(&self.tiers, self.far_field))
    }

    /// Mean interference (unit-mean fading, no coordination) from beyond `radius`.
    pub fn far_field_interference(&self, radius: f64) -> f64 {
        self.tiers.iter().map(|t| tail_mean(t, radius)).sum()
    }
}

/// E[interference from BSs beyond r] = 2πλp r^{2-α}/(α-2).
fn tail_mean(t: &TierParams, r: f64) -> f64 {
    let a = t.path_loss_exp;
    2.0 * PI * t.density_per_m2 * t.power_w * r.powf(2.0 - a) / (a - 2.0)
}

/// Std. dev. of interference from beyond r with Exp(1) fading (E[G²] = 2).
fn tail_std(t: &TierParams, r: f64) -> f64 {
    let a = t.path_loss_exp;
    let var = 2.0 * PI * t.density_per_m2 * t.power_w * t.power_w * 2.0 * r.powf(2.0 - 2.0 * a) / (2.0 * a - 2.0);
    var.sqrt()
}

/// Default simulation radius.
///
/// The reference level is the expected interference from beyond each tier's
/// mean nearest distance. Without the far-field term, the disk must leave
/// less than 0.1% of that level outside in expectation; with it, only the
/// fluctuation (std. dev.) of the outside interference must stay below 0.1%.
pub fn default_sim_radius(tiers: &[TierParams], far_field: bool) -> f64 {
    let reference: f64 = tiers.iter().map(|t| tail_mean(t, t.mean_nearest_distance())).sum();
    let target = TRUNCATION_FRACTION * reference;
    let outside = |r: f64| -> f64 {
        if far_field {
            tiers.iter().map(|t| tail_std(t, r)).sum()
        } else {
            tiers.iter().map(|t| tail_mean(t, r)).sum()
        }
    };
    let floor = tiers.iter().map(|t| 4.0 * t.mean_nearest_distance()).fold(0.0, f64::max);
    if outside(floor) <= target {
        return floor;
    }
    let (mut lo, mut hi) = (floor, floor * 2.0);
    while outside(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if outside(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Serving {
    pub tier: usize,
    pub distance: f64,
}

/// One sampled deployment seen from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    /// Per tier, ascending distances (m) of every BS in the disk.
    pub distances: Vec<Vec<f64>>,
    pub serving: Serving,
    /// Members ordered by descending average power (or as configured).
    pub coord_set: Vec<BsRef>,
    pub radius: f64,
    /// Draws discarded because no usable serving BS existed.
    pub resamples: u32,
}

impl NetworkRealization {
    pub fn serving_ref(&self) -> BsRef {
        BsRef { tier: self.serving.tier, index: 0 }
    }

    pub fn is_coordinated(&self, bs: BsRef) -> bool {
        self.coord_set.contains(&bs)
    }

    pub fn bs_count(&self) -> usize {
        self.distances.iter().map(Vec::len).sum()
    }
}

/// Ascending distances of a PPP of density `density` in the disk of radius `radius`.
pub fn sample_tier_distances<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R) -> Vec<f64> {
    let mean = density * PI * radius * radius;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut d: Vec<f64> = (0..count).map(|_| radius * rng.random::<f64>().sqrt()).collect();
    d.sort_by(f64::total_cmp);
    d
}

const MAX_RESAMPLES: u32 = 10_000;

/// Draw a realization: per-tier PPP distances, the serving BS, and the
/// coordination set.
pub fn sample_realization<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<NetworkRealization> {
    config.validate()?;
    let radius = config.radius();
    let mut resamples = 0;
    loop {
        let distances: Vec<Vec<f64>> = config
            .tiers
            .iter()
            .map(|t| sample_tier_distances(t.density_per_m2, radius, rng))
            .collect();
        let usable = match config.serving {
            ServingRule::FixedTier(k) => !distances[k].is_empty(),
            ServingRule::Strongest => distances.iter().any(|d| !d.is_empty()),
        };
        let enough = match &config.coordination {
            CoordinationRule::Strongest => {
                distances.iter().map(Vec::len).sum::<usize>() > config.coord_set_size
            }
            CoordinationRule::Fixed(members) => members.iter().all(|m| m.index < distances[m.tier].len()),
        };
        if !(usable && enough) {
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                return Err(Error::Config(
                    "no usable base station after repeated resampling; increase density or radius".into(),
                ));
            }
            continue;
        }
        let mut realization = NetworkRealization {
            distances,
            serving: Serving { tier: 0, distance: 0.0 },
            coord_set: Vec::new(),
            radius,
            resamples,
        };
        realization.serving = match config.serving {
            ServingRule::FixedTier(k) => Serving { tier: k, distance: realization.distances[k][0] },
            ServingRule::Strongest => associate(&realization, &config.tiers)?,
        };
        let serving_antennas = config.tiers[realization.serving.tier].antennas;
        if config.coord_set_size + 1 > serving_antennas {
            return Err(Error::ZeroForcingInfeasible { set_size: config.coord_set_size, antennas: serving_antennas });
        }
        realization.coord_set = match &config.coordination {
            CoordinationRule::Strongest => {
                select_coordination_set(&realization, &config.tiers, config.coord_set_size)?
            }
            CoordinationRule::Fixed(members) => {
                if members.contains(&realization.serving_ref()) {
                    return Err(Error::Config("fixed coordination set contains the serving BS".into()));
                }
                members.clone()
            }
        };
        return Ok(realization);
    }
}

/// Max-average-power association over each tier's nearest BS; ties go to
/// the lower tier index.
pub fn associate(realization: &NetworkRealization, tiers: &[TierParams]) -> Result<Serving> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, (t, d)) in tiers.iter().zip(&realization.distances).enumerate() {
        let Some(&r) = d.first() else { continue };
        let p = t.mean_power_at(r);
        if best.is_none_or(|(_, _, bp)| p > bp) {
            best = Some((k, r, p));
        }
    }
    best.map(|(tier, distance, _)| Serving { tier, distance })
        .ok_or_else(|| Error::Config("no base station in any tier".into()))
}

/// The `size` non-serving BSs with the largest long-term average received
/// power, strongest first. Ties break by tier index, then distance order.
pub fn select_coordination_set(
    realization: &NetworkRealization,
    tiers: &[TierParams],
    size: usize,
) -> Result<Vec<BsRef>> {
    if size == 0 {
        return Ok(Vec::new());
    }
    let available = realization.bs_count().saturating_sub(1);
    if size > available {
        return Err(Error::NotEnoughBaseStations { requested: size, available });
    }
    let serving = realization.serving_ref();
    // Within a tier power falls with distance, so only the first size+1 per
    // tier can make the cut.
    let mut candidates: Vec<(f64, BsRef)> = Vec::new();
    for (k, (t, d)) in tiers.iter().zip(&realization.distances).enumerate() {
        for (i, &r) in d.iter().enumerate().take(size + 1) {
            let bs = BsRef { tier: k, index: i };
            if bs != serving {
                candidates.push((t.mean_power_at(r), bs));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(candidates.into_iter().take(size).map(|(_, bs)| bs).collect())
}
