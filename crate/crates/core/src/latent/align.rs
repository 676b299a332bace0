use super::rng::SeededRng;
use super::sum::exact_sum;
use super::tensor::{LatentTensor, Shape};
use crate::error::{Result, RivalError};
use crate::par;

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Mean and population std of a slice. Order independent.
pub(crate) fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = exact_sum(values.iter().copied()) / n;
    let var = exact_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var.sqrt())
}

pub fn stats(x: &LatentTensor) -> Result<LatentStats> {
    if x.is_empty() {
        return Err(RivalError::invalid("statistics of an empty tensor"));
    }
    let per_channel = par::map_indexed(x.channels(), |c| moments(x.channel(c)));
    let (mean, std) = per_channel.into_iter().unzip();
    Ok(LatentStats { mean, std })
}

/// Fisher-Yates permutation of `0..n` drawn from `rng`.
///
/// `perm[p]` is the source index that lands at position `p`.
pub fn shuffle_positions(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        perm.swap(i, j);
    }
    perm
}

/// Permutes spatial positions; each position's channel vector moves as a unit.
pub fn shuffle_spatial(x: &LatentTensor, rng: &mut SeededRng) -> LatentTensor {
    let shape = x.shape();
    let n = shape.spatial();
    let perm = shuffle_positions(n, rng);
    let src = x.data();
    let data = par::map_indexed(shape.len(), |i| {
        let (c, p) = (i / n, i % n);
        src[c * n + perm[p]]
    });
    LatentTensor::from_raw(shape, data)
}

pub fn sample_standard_gaussian(shape: Shape, rng: &mut SeededRng) -> LatentTensor {
    let data = (0..shape.len()).map(|_| rng.standard_normal()).collect();
    LatentTensor::from_raw(shape, data)
}

/// Draws each element of channel `c` from `Normal(mean[c], std[c]^2)`.
pub fn sample_adaptive_gaussian(s: &LatentStats, shape: Shape, rng: &mut SeededRng) -> Result<LatentTensor> {
    if s.channels() != shape.channels {
        return Err(RivalError::invalid(format!(
            "statistics have {} channels, shape {shape} needs {}",
            s.channels(),
            shape.channels
        )));
    }
    let n = shape.spatial();
    let data = (0..shape.len())
        .map(|i| {
            let c = i / n;
            s.mean[c] + s.std[c] * rng.standard_normal()
        })
        .collect();
    Ok(LatentTensor::from_raw(shape, data))
}

/// Renormalizes each channel of `a` to the per-channel mean/std of `b`.
///
/// A channel of `a` with zero spread is shifted to `b`'s mean using divisor 1
/// and logged as degenerate.
pub fn adain(a: &LatentTensor, b: &LatentTensor) -> Result<LatentTensor> {
    if a.channels() != b.channels() {
        return Err(RivalError::invalid(format!("adain channel mismatch: {} vs {}", a.channels(), b.channels())));
    }
    let sa = stats(a)?;
    let sb = stats(b)?;
    let mut data = a.data().to_vec();
    let n = a.shape().spatial();
    let coeffs: Vec<(f64, f64, f64, f64)> = (0..a.channels())
        .map(|c| {
            let mut div = sa.std[c];
            if div == 0.0 {
                log::warn!("adain: channel {c} of the source has zero std; using divisor 1");
                div = 1.0;
            }
            (sa.mean[c], div, sb.mean[c], sb.std[c])
        })
        .collect();
    par::for_each_chunk_mut(&mut data, n, |c, chunk| {
        let (ma, da, mb, db) = coeffs[c];
        for v in chunk.iter_mut() {
            *v = db * (*v - ma) / da + mb;
        }
    });
    Ok(LatentTensor::from_raw(a.shape(), data))
}

/// KL(N_a || N_b) between univariate Gaussians fitted to all elements of each tensor.
pub fn kl_gaussian_fit(a: &LatentTensor, b: &LatentTensor) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(RivalError::invalid("kl of an empty tensor"));
    }
    let (mu_a, sd_a) = moments(a.data());
    let (mu_b, sd_b) = moments(b.data());
    if sd_a == 0.0 || sd_b == 0.0 {
        return Err(RivalError::DegenerateDistribution(format!("fitted std is zero (a: {sd_a}, b: {sd_b})")));
    }
    if mu_a == mu_b && sd_a == sd_b {
        return Ok(0.0);
    }
    let d = mu_a - mu_b;
    Ok((sd_b / sd_a).ln() + (sd_a * sd_a + d * d) / (2.0 * sd_b * sd_b) - 0.5)
}
