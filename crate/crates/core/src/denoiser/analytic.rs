use std::collections::BTreeMap;

use super::{Denoiser, DenoiserCall, DenoiserOutput};
use crate::error::{Result, RivalError};
use crate::latent::{LatentTensor, Shape};
use crate::schedule::NoiseSchedule;

/// Exact noise predictor for data distributed `N(mu0[c], s0^2)` per channel.
///
/// The condition is ignored and there are no attention sites.
#[derive(Debug, Clone)]
pub struct AnalyticGaussianDenoiser {
    mu0: Vec<f64>,
    s0: f64,
    shape: Shape,
    alpha_bar: Vec<f64>,
}

impl AnalyticGaussianDenoiser {
    pub fn new(mu0: Vec<f64>, s0: f64, height: usize, width: usize, schedule: &NoiseSchedule) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(RivalError::invalid(format!("s0 must be positive, got {s0}")));
        }
        if mu0.is_empty() || mu0.iter().any(|m| !m.is_finite()) {
            return Err(RivalError::invalid("mu0 must be a non-empty list of finite values"));
        }
        let shape = Shape::new(mu0.len(), height, width);
        Ok(AnalyticGaussianDenoiser { mu0, s0, shape, alpha_bar: schedule.alpha_bar().to_vec() })
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
}

/// Optimal epsilon at cumulative alpha `a` via the Gaussian posterior mean of `x0`.
pub fn analytic_eps(x: &LatentTensor, a: f64, mu0: &[f64], s0: f64) -> LatentTensor {
    let ra = a.sqrt();
    let gain = ra * s0 * s0 / (a * s0 * s0 + 1.0 - a);
    let rn = (1.0 - a).sqrt();
    let n = x.shape().spatial();
    let data = crate::par::map_indexed(x.len(), |i| {
        let m = mu0[i / n];
        let xv = x.data()[i];
        let post = m + gain * (xv - ra * m);
        (xv - ra * post) / rn
    });
    LatentTensor::from_raw(x.shape(), data)
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn id(&self) -> String {
        let mu: Vec<String> = self.mu0.iter().map(|m| format!("{m:?}")).collect();
        format!("analytic(mu0=[{}],s0={:?},size={}x{})", mu.join(","), self.s0, self.shape.height, self.shape.width)
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn sites(&self) -> Vec<String> {
        Vec::new()
    }

    fn predict(&self, call: &DenoiserCall<'_>) -> Result<DenoiserOutput> {
        call.x.expect_shape(self.shape)?;
        let a = *self
            .alpha_bar
            .get(call.timestep)
            .ok_or_else(|| RivalError::invalid(format!("timestep {} out of range", call.timestep)))?;
        Ok(DenoiserOutput {
            eps: analytic_eps(call.x, a, &self.mu0, self.s0),
            hidden: BTreeMap::new(),
            scores: BTreeMap::new(),
        })
    }
}
