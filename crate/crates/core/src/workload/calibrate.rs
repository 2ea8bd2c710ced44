use serde::{Deserialize, Serialize};

use super::{gaussian, substream, GeneratorConfig, STREAM_CALIBRATION};
use crate::error::{Error, Result};

/// Stop once the median is this close to the target.
const STOP: f64 = 1e-4;
/// Largest acceptable miss after the iteration budget.
const TOLERANCE: f64 = 0.005;
const MAX_ITERATIONS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub beta: f64,
    pub target: f64,
    pub achieved: f64,
    pub iterations: u32,
}

/// Per-pair scalars from which the query-to-image cosine follows for any
/// beta, so every bisection step reuses the same random draws.
struct Pairs {
    /// q2 . q1, q2 . h, q1 . h, |h|^2
    terms: Vec<[f64; 4]>,
}

impl Pairs {
    fn draw(cfg: &GeneratorConfig, samples: usize, seed: u64) -> Self {
        let terms = (0..samples as u64)
            .map(|j| {
                let mut rng = substream(seed, STREAM_CALIBRATION, j);
                let center = unit(gaussian(&mut rng, cfg.dim));
                let perturb = |g: Vec<f64>| unit(center.iter().zip(g).map(|(c, g)| c + cfg.spread * g).collect());
                let q1 = perturb(gaussian(&mut rng, cfg.dim));
                let q2 = perturb(gaussian(&mut rng, cfg.dim));
                let h = gaussian(&mut rng, cfg.dim);
                [dot(&q2, &q1), dot(&q2, &h), dot(&q1, &h), dot(&h, &h)]
            })
            .collect();
        Pairs { terms }
    }

    fn median(&self, beta: f64) -> f64 {
        let a = 1.0 - beta;
        let mut sims: Vec<f64> = self
            .terms
            .iter()
            .map(|&[qq, qh, ph, hh]| {
                let norm = (beta * beta + 2.0 * beta * a * ph + a * a * hh).sqrt();
                (beta * qq + a * qh) / norm
            })
            .collect();
        sims.sort_by(f64::total_cmp);
        let n = sims.len();
        if n % 2 == 1 {
            sims[n / 2]
        } else {
            0.5 * (sims[n / 2 - 1] + sims[n / 2])
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Monte Carlo median of the cosine between a query and the image generated
/// for another query of the same cluster.
pub fn median_similarity(cfg: &GeneratorConfig, beta: f64, samples: usize, seed: u64) -> f64 {
    Pairs::draw(cfg, samples, seed).median(beta)
}

/// Beta giving cosine `r` between a query and its own image when the noise
/// is orthogonal with unit norm: `r = beta / sqrt(beta^2 + (1 - beta)^2)`.
pub fn closed_form_beta(r: f64) -> f64 {
    r / (r + (1.0 - r * r).sqrt())
}

/// Bisects beta until the median within-cluster query-to-image cosine is
/// within tolerance of `target`.
pub fn calibrate_beta(target: f64, cfg: &GeneratorConfig, samples: usize, seed: u64) -> Result<Calibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!("target {target} outside (0, 1)")));
    }
    if samples == 0 {
        return Err(Error::Calibration("need at least one sample".into()));
    }
    let pairs = Pairs::draw(cfg, samples, seed);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut beta, mut achieved) = (0.5, f64::NAN);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        beta = 0.5 * (lo + hi);
        achieved = pairs.median(beta);
        if (achieved - target).abs() < STOP {
            break;
        }
        if achieved < target {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    if (achieved - target).abs() > TOLERANCE {
        return Err(Error::Calibration(format!(
            "target {target} not reached after {iterations} iterations: \
             best beta {beta:.6} gives {achieved:.4}; achievable range [{:.4}, {:.4}]",
            pairs.median(0.0),
            pairs.median(1.0)
        )));
    }
    Ok(Calibration {
        beta,
        target,
        achieved,
        iterations,
    })
}
