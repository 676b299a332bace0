#![allow(dead_code)]

use std::collections::BTreeMap;

use rival_core::denoiser::{Condition, Denoiser, DenoiserCall, DenoiserOutput};
use rival_core::{LatentTensor, NoiseSchedule, Result, SeededRng, Shape};

/// Predicts the same epsilon everywhere.
pub struct ConstantDenoiser {
    pub shape: Shape,
    pub value: f64,
}

impl Denoiser for ConstantDenoiser {
    fn id(&self) -> String {
        format!("constant({})", self.value)
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn sites(&self) -> Vec<String> {
        Vec::new()
    }

    fn predict(&self, call: &DenoiserCall<'_>) -> Result<DenoiserOutput> {
        call.x.expect_shape(self.shape)?;
        Ok(DenoiserOutput {
            eps: LatentTensor::filled(self.shape, self.value),
            hidden: BTreeMap::new(),
            scores: BTreeMap::new(),
        })
    }
}

/// Textbook DDIM update between two cumulative alphas.
pub fn ddim_update(x: &[f64], eps: &[f64], a_from: f64, a_to: f64) -> Vec<f64> {
    let scale = (a_to / a_from).sqrt();
    let noise = a_to.sqrt() * ((1.0 / a_to - 1.0).sqrt() - (1.0 / a_from - 1.0).sqrt());
    x.iter().zip(eps).map(|(x, e)| scale * x + noise * e).collect()
}

/// Classifier-free guided DDIM from `x_t` down to level 0, no injection.
pub fn cfg_ddim_sampler(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    x_t: LatentTensor,
    cond: &Condition,
    m: f64,
) -> LatentTensor {
    let null = Condition::null(cond.dim());
    let mut x = x_t;
    for t in (1..=schedule.steps()).rev() {
        let ts = schedule.timestep(t).unwrap();
        let c = denoiser.predict(&DenoiserCall::new(&x, ts, cond)).unwrap().eps;
        let u = denoiser.predict(&DenoiserCall::new(&x, ts, &null)).unwrap().eps;
        let eps: Vec<f64> = if m == 1.0 {
            c.data().to_vec()
        } else if m == 0.0 {
            u.data().to_vec()
        } else {
            c.data().iter().zip(u.data()).map(|(c, u)| m * c + (1.0 - m) * u).collect()
        };
        let a_from = schedule.level_alpha_bar(t).unwrap();
        let a_to = schedule.level_alpha_bar(t - 1).unwrap();
        x = LatentTensor::new(x.shape(), ddim_update(x.data(), &eps, a_from, a_to)).unwrap();
    }
    x
}

/// Plain DDIM sampling with the conditional prediction only.
pub fn ddim_sample(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    x_t: LatentTensor,
    cond: &Condition,
) -> LatentTensor {
    cfg_ddim_sampler(denoiser, schedule, x_t, cond, 1.0)
}

pub fn schedule(steps: usize) -> NoiseSchedule {
    NoiseSchedule::build(rival_core::ScheduleParams { inference_steps: steps, ..Default::default() }).unwrap()
}

pub fn uniform_latent(shape: Shape, seed: u64) -> LatentTensor {
    let mut rng = SeededRng::new(seed);
    LatentTensor::new(shape, (0..shape.len()).map(|_| 2.0 * rng.uniform() - 1.0).collect()).unwrap()
}
