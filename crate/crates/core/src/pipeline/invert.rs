use crate::attention::HiddenStateCache;
use crate::denoiser::{Condition, Denoiser, DenoiserCall};
use crate::error::{DivergenceDump, Result, RivalError};
use crate::latent::LatentTensor;
use crate::schedule::{ddim_invert_step, NoiseSchedule, ScheduleParams};

/// The reference inversion chain.
///
/// `latents[t]` is the reference latent at inference level `t`; `latents[0]`
/// is the clean input. `eps[t - 1]` and the cache entries at step `t` come
/// from the plain conditional call on `latents[t]` at level `t`'s timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub latents: Vec<LatentTensor>,
    pub cache: HiddenStateCache,
    pub eps: Option<Vec<LatentTensor>>,
    pub condition: Condition,
    pub schedule: ScheduleParams,
    pub denoiser_id: String,
}

impl ChainRecord {
    pub fn steps(&self) -> usize {
        self.latents.len() - 1
    }

    pub fn latent(&self, t: usize) -> &LatentTensor {
        &self.latents[t]
    }

    /// Recorded epsilon at level `t >= 1`, if the chain keeps them.
    pub fn eps_at(&self, t: usize) -> Option<&LatentTensor> {
        self.eps.as_ref().and_then(|e| e.get(t.checked_sub(1)?))
    }

    pub(crate) fn check_compatible(&self, schedule: &NoiseSchedule, denoiser: &dyn Denoiser) -> Result<()> {
        if self.latents.len() != schedule.steps() + 1 {
            return Err(RivalError::config(format!(
                "chain has {} steps but the schedule has {}",
                self.steps(),
                schedule.steps()
            )));
        }
        if &self.schedule != schedule.params() {
            return Err(RivalError::config("chain was built with different schedule parameters"));
        }
        if self.denoiser_id != denoiser.id() {
            return Err(RivalError::config(format!(
                "chain was built with denoiser `{}`, got `{}`",
                self.denoiser_id,
                denoiser.id()
            )));
        }
        Ok(())
    }
}

/// DDIM inversion from the clean latent up to level `T`, recording latents,
/// hidden states and epsilons along the way.
///
/// The step out of level `j >= 1` uses epsilon evaluated at level `j`; the
/// step out of the clean level reuses level 1's timestep.
pub fn invert(
    x0: &LatentTensor,
    cond: &Condition,
    schedule: &NoiseSchedule,
    denoiser: &dyn Denoiser,
    keep_eps: bool,
) -> Result<ChainRecord> {
    if !x0.is_finite() {
        return Err(RivalError::invalid("input latent is not finite"));
    }
    x0.expect_shape(denoiser.shape())
        .map_err(|e| RivalError::config(format!("input does not fit the denoiser: {e}")))?;
    let steps = schedule.steps();
    let mut latents = Vec::with_capacity(steps + 1);
    latents.push(x0.clone());
    let mut cache = HiddenStateCache::new();
    let mut eps_records = Vec::with_capacity(steps);

    let record = |level: usize, x: &LatentTensor, cache: &mut HiddenStateCache| -> Result<LatentTensor> {
        let call = DenoiserCall::new(x, schedule.timestep(level.max(1))?, cond);
        let out = denoiser.predict(&call)?;
        if level >= 1 {
            for (site, v) in out.hidden {
                cache.capture(&site, level, v)?;
            }
        }
        Ok(out.eps)
    };

    for j in 0..steps {
        let eps = record(j, &latents[j], &mut cache)?;
        let next = ddim_invert_step(&latents[j], &eps, j, j + 1, schedule)?;
        if !next.is_finite() {
            return Err(RivalError::NumericalDivergence(Box::new(DivergenceDump {
                step: j,
                reason: "inversion produced a non-finite latent".into(),
                latent: latents[j].clone(),
                eps,
            })));
        }
        if j >= 1 {
            eps_records.push(eps);
        }
        latents.push(next);
    }
    let eps = record(steps, &latents[steps], &mut cache)?;
    eps_records.push(eps);

    Ok(ChainRecord {
        latents,
        cache,
        eps: keep_eps.then_some(eps_records),
        condition: cond.clone(),
        schedule: *schedule.params(),
        denoiser_id: denoiser.id(),
    })
}
