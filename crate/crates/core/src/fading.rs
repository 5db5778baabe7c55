//! Rayleigh fading gains and RVQ quantization.
//!
//! Gains use the Gamma(ν, 1) normalization throughout: a χ² variable with
//! 2ν degrees of freedom is halved so that a single complex Gaussian tap has
//! unit mean power. Under this convention the serving gain with ZF nulling
//! toward |S| coordinated BSs is Gamma(n − |S|, 1), whose inverse mean is
//! 1/(n − |S| − 1).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CODEBOOK_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainKind {
    Serving,
    CosInterferer,
    NosInterferer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSample {
    pub value: f64,
    pub kind: GainKind,
}

/// How the residual leakage of a BS in COS is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CosGainModel {
    /// 2^(−b/(n−1)) · Exp(1).
    #[default]
    ScaledExponential,
    /// The constant 2^(−b/(n−1)).
    Deterministic,
}

/// RVQ leakage scale 2^(−b/(n−1)).
pub fn cos_scale(bits: u32, antennas: usize) -> Result<f64> {
    if antennas < 2 {
        return Err(Error::Config(format!(
            "COS leakage needs at least 2 antennas (got {antennas}): no quantization dimension"
        )));
    }
    Ok((-(bits as f64) / (antennas as f64 - 1.0)).exp2())
}

pub fn serving_gain<R: Rng + ?Sized>(n_serving: usize, coord_size: usize, rng: &mut R) -> Result<GainSample> {
    if coord_size >= n_serving {
        return Err(Error::ZeroForcingInfeasible { set_size: coord_size, antennas: n_serving });
    }
    let shape = (n_serving - coord_size) as f64;
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(GainSample { value: g.sample(rng), kind: GainKind::Serving })
}

pub fn nos_interferer_gain<R: Rng + ?Sized>(rng: &mut R) -> GainSample {
    let value: f64 = Exp1.sample(rng);
    GainSample { value, kind: GainKind::NosInterferer }
}

/// Effective leakage gain of a COS interferer (scale applied once).
pub fn cos_interferer_gain_shortcut<R: Rng + ?Sized>(
    bits: u32,
    antennas: usize,
    model: CosGainModel,
    rng: &mut R,
) -> Result<GainSample> {
    let scale = cos_scale(bits, antennas)?;
    let value = match model {
        CosGainModel::ScaledExponential => scale * Distribution::<f64>::sample(&Exp1, rng),
        CosGainModel::Deterministic => scale,
    };
    Ok(GainSample { value, kind: GainKind::CosInterferer })
}

/// An `n × 1` channel with i.i.d. CN(0, 1) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ChannelVector(
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                })
                .collect(),
        )
    }

    /// Isotropic unit vector (an RVQ codeword).
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::sample(n, rng).normalized()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        ChannelVector(self.0.iter().map(|z| z / n).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        ChannelVector(self.0.iter().map(|z| z * c).collect())
    }

    /// |a^H b|².
    pub fn inner_sqr(&self, other: &ChannelVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
    }
}

/// Quantize the direction of `h` against an explicit codebook of unit
/// vectors; returns the index maximizing |c^H ĥ| and the residual sin²θ.
pub fn rvq_quantize_with(h: &ChannelVector, codebook: &[ChannelVector]) -> (usize, f64) {
    let dir = h.normalized();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in codebook.iter().enumerate() {
        let g = c.inner_sqr(&dir);
        if g > best.1 {
            best = (i, g);
        }
    }
    (best.0, (1.0 - best.1).clamp(0.0, 1.0))
}

/// Draw a fresh RVQ codebook of 2^b isotropic codewords and quantize `h`.
pub fn rvq_quantize<R: Rng + ?Sized>(h: &ChannelVector, bits: u32, rng: &mut R) -> Result<(usize, f64)> {
    if bits > MAX_CODEBOOK_BITS {
        return Err(Error::CodebookTooLarge(bits));
    }
    let n = h.dim();
    let size = 1usize << bits;
    // Stream codewords instead of materializing the codebook.
    let dir = h.normalized();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..size {
        let g = ChannelVector::random_unit(n, rng).inner_sqr(&dir);
        if g > best.1 {
            best = (i, g);
        }
    }
    Ok((best.0, (1.0 - best.1).clamp(0.0, 1.0)))
}

/// COS leakage with an explicit RVQ codebook: residual sin²θ of a fresh
/// channel times an independent Exp(1) draw.
pub fn cos_interferer_gain_explicit<R: Rng + ?Sized>(bits: u32, antennas: usize, rng: &mut R) -> Result<GainSample> {
    if antennas < 2 {
        return Err(Error::Config("COS leakage needs at least 2 antennas".into()));
    }
    let h = ChannelVector::sample(antennas, rng);
    let (_, residual) = rvq_quantize(&h, bits, rng)?;
    let g: f64 = Exp1.sample(rng);
    Ok(GainSample { value: residual * g, kind: GainKind::CosInterferer })
}
