//! Brute-force Monte Carlo oracles for the closed forms in `hetcomp`, plus
//! the pass/fail bookkeeping used by the acceptance suite.
//!
//! Oracles draw in chunks of 2¹⁶ on ChaCha8 streams (stream = chunk index)
//! and reduce in chunk order, so every estimate is reproducible regardless
//! of thread count.

use std::time::Instant;

use hetcomp::net::sample_tier_distances;
use hetcomp::overhead::{classify, delta_factor, DurationModel};
use hetcomp::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    n: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.n += o.n;
        self
    }

    fn estimate(&self) -> MeanEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        MeanEstimate { mean, stderr: (var / n).sqrt(), samples: self.n }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(total: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let n = total.div_ceil(CHUNK) as usize;
    (0..n).into_par_iter().map(move |c| {
        let c = c as u64;
        (c, CHUNK.min(total - c * CHUNK))
    })
}

/// Average of δ(classify(L, D, w)) for a coordination-set member over
/// independent (L, D) draws.
pub fn expected_delta_mc(model: &DurationModel, bits: u32, antennas: usize, draws: u64, seed: u64) -> Result<MeanEstimate> {
    model.validate()?;
    let per_chunk: Vec<Moments> = chunks(draws)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut m = Moments::default();
            for _ in 0..len {
                let l = model.lifetime.sample(&mut rng);
                let d = model.delay.sample(&mut rng);
                m.push(delta_factor(true, classify(l, d, model.window_ms), bits, antennas)?);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    Ok(per_chunk.into_iter().fold(Moments::default(), Moments::merge).estimate())
}

/// E[(r₁/r_i)^α] for i = 2..=max_i and each α, from independent PPP
/// realizations on a disk holding 40 points on average (realizations with
/// fewer than `max_i` points are redrawn). Output: `[alpha][i − 2]`.
pub fn ordered_distance_moments_mc(alphas: &[f64], max_i: usize, realizations: u64, seed: u64) -> Vec<Vec<MeanEstimate>> {
    let density = 1e-4;
    let radius = (40.0 / (std::f64::consts::PI * density)).sqrt();
    let width = max_i - 1;
    let per_chunk: Vec<Vec<Moments>> = chunks(realizations)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut acc = vec![Moments::default(); alphas.len() * width];
            let mut done = 0;
            while done < len {
                let r = sample_tier_distances(density, radius, &mut rng);
                if r.len() < max_i {
                    continue;
                }
                for (a, &alpha) in alphas.iter().enumerate() {
                    for i in 2..=max_i {
                        acc[a * width + i - 2].push((r[0] / r[i - 1]).powf(alpha));
                    }
                }
                done += 1;
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); alphas.len() * width];
    for chunk in per_chunk {
        for (t, m) in total.iter_mut().zip(chunk) {
            *t = t.merge(m);
        }
    }
    total.chunks(width).map(|row| row.iter().map(Moments::estimate).collect()).collect()
}

/// Collects one PASS/FAIL line per criterion.
#[derive(Debug, Default)]
pub struct Report {
    results: Vec<(String, bool)>,
}

impl Report {
    /// Run `check`, print its verdict with the elapsed time, and remember it.
    /// An `Err` from the check counts as a failure.
    pub fn run<F>(&mut self, id: &str, title: &str, check: F)
    where
        F: FnOnce() -> std::result::Result<(bool, String), String>,
    {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {id}: {title} ({:.1}s)", start.elapsed().as_secs_f64());
        for line in detail.lines() {
            println!("        {line}");
        }
        self.results.push((id.to_string(), pass));
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect()
    }
}
