use std::collections::BTreeMap;

use super::config::{InitMode, RivalConfig};
use super::invert::{invert, ChainRecord};
use crate::attention::{policy_mode, InjectionContext, InjectionMode};
use crate::denoiser::{Condition, Denoiser, DenoiserCall};
use crate::error::{DivergenceDump, Result, RivalError};
use crate::latent::{
    adain, kl_gaussian_fit, sample_adaptive_gaussian, sample_standard_gaussian, shuffle_positions, shuffle_spatial,
    stats, LatentTensor, SeededRng,
};
use crate::par;
use crate::schedule::{ddim_step, NoiseSchedule};

/// Level at which injection starts for structure-preserving edits.
pub const DEFAULT_EDIT_START: usize = 45;

/// Binary spatial mask; `true` marks positions to regenerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpaintSpec {
    height: usize,
    width: usize,
    mask: Vec<bool>,
}

impl InpaintSpec {
    pub fn new(height: usize, width: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width {
            return Err(RivalError::invalid(format!(
                "mask {height}x{width} needs {} entries, got {}",
                height * width,
                mask.len()
            )));
        }
        Ok(InpaintSpec { height, width, mask })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn check(&self, x: &LatentTensor) -> Result<()> {
        if (x.height(), x.width()) != (self.height, self.width) {
            return Err(RivalError::invalid(format!(
                "mask is {}x{} but the latent is {}x{}",
                self.height,
                self.width,
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    /// Generation values inside the mask, reference values outside.
    fn blend(&self, gen: &LatentTensor, reference: &LatentTensor) -> LatentTensor {
        let n = self.mask.len();
        let (g, r) = (gen.data(), reference.data());
        let data = par::map_indexed(gen.len(), |i| if self.mask[i % n] { g[i] } else { r[i] });
        LatentTensor::from_raw(gen.shape(), data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Level the step starts from; the step produces level `t - 1`.
    pub t: usize,
    pub mode: InjectionMode,
    /// Fitted-Gaussian KL between the generation and reference latents at `t`.
    pub kl: Option<f64>,
    /// Reference attention mass per site from the conditional branch.
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationDiagnostics {
    /// Generation latents indexed by level, `0..=T`.
    pub latents: Vec<LatentTensor>,
    /// One record per step, in execution order (`t = T` first).
    pub steps: Vec<StepRecord>,
    pub bottleneck: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub latent: LatentTensor,
    pub diagnostics: GenerationDiagnostics,
}

/// `m * eps_cond + (1 - m) * eps_uncond`.
pub fn cfg_eps(eps_cond: &LatentTensor, eps_uncond: &LatentTensor, m: f64) -> Result<LatentTensor> {
    eps_cond.expect_shape(eps_uncond.shape())?;
    if m == 1.0 {
        return Ok(eps_cond.clone());
    }
    if m == 0.0 {
        return Ok(eps_uncond.clone());
    }
    eps_cond.axpby(m, eps_uncond, 1.0 - m)
}

/// AdaIN of the guided epsilon onto the reference epsilon while `t > t_early`
/// and noise alignment is on; otherwise the guided epsilon unchanged.
pub fn aligned_eps(
    eps_cfg: &LatentTensor,
    eps_ref: &LatentTensor,
    t: usize,
    cfg: &RivalConfig,
) -> Result<LatentTensor> {
    eps_cfg.expect_shape(eps_ref.shape())?;
    if cfg.toggles.na && t > cfg.t_early {
        adain(eps_cfg, eps_ref)
    } else {
        Ok(eps_cfg.clone())
    }
}

pub fn init_generation_latent(chain: &ChainRecord, cfg: &RivalConfig, rng: &mut SeededRng) -> Result<LatentTensor> {
    let top = chain.latent(chain.steps());
    Ok(match cfg.effective_init() {
        InitMode::Shuffle => shuffle_spatial(top, rng),
        InitMode::Adaptive => sample_adaptive_gaussian(&stats(top)?, top.shape(), rng)?,
        InitMode::Standard => sample_standard_gaussian(top.shape(), rng),
        InitMode::Copy => top.clone(),
    })
}

/// Permutes the reference's channel vectors among masked positions only.
fn masked_shuffle(top: &LatentTensor, spec: &InpaintSpec, rng: &mut SeededRng) -> LatentTensor {
    let positions: Vec<usize> = (0..spec.mask.len()).filter(|&p| spec.mask[p]).collect();
    let perm = shuffle_positions(positions.len(), rng);
    let n = spec.mask.len();
    let mut data = top.data().to_vec();
    for c in 0..top.channels() {
        for (dst, &src) in positions.iter().zip(&perm) {
            data[c * n + dst] = top.data()[c * n + positions[src]];
        }
    }
    LatentTensor::from_raw(top.shape(), data)
}

/// A schedule plus a denoiser.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub schedule: &'a NoiseSchedule,
    pub denoiser: &'a dyn Denoiser,
}

impl<'a> Pipeline<'a> {
    pub fn new(schedule: &'a NoiseSchedule, denoiser: &'a dyn Denoiser) -> Self {
        Pipeline { schedule, denoiser }
    }

    pub fn invert(&self, x0: &LatentTensor, cond: &Condition) -> Result<ChainRecord> {
        invert(x0, cond, self.schedule, self.denoiser, true)
    }

    /// Inversion without keeping the per-level epsilons; generation then
    /// recomputes them from the stored latents.
    pub fn invert_without_eps(&self, x0: &LatentTensor, cond: &Condition) -> Result<ChainRecord> {
        invert(x0, cond, self.schedule, self.denoiser, false)
    }

    /// Reference epsilon at level `t`: recorded if available, else recomputed.
    pub fn reference_eps(&self, chain: &ChainRecord, t: usize) -> Result<LatentTensor> {
        if let Some(eps) = chain.eps_at(t) {
            return Ok(eps.clone());
        }
        let call = DenoiserCall::new(chain.latent(t), self.schedule.timestep(t)?, &chain.condition);
        Ok(self.denoiser.predict(&call)?.eps)
    }

    pub fn rival_generate(
        &self,
        chain: &ChainRecord,
        cond: &Condition,
        cfg: &RivalConfig,
        rng: &mut SeededRng,
    ) -> Result<Generation> {
        self.prepare(chain, cfg)?;
        let init = init_generation_latent(chain, cfg, rng)?;
        self.run(chain, cond, cfg, init, None, None)
    }

    /// Regenerates only the masked region; everything else is pinned to the
    /// inversion chain after every step.
    pub fn inpaint_generate(
        &self,
        chain: &ChainRecord,
        spec: &InpaintSpec,
        cond: &Condition,
        cfg: &RivalConfig,
        rng: &mut SeededRng,
    ) -> Result<Generation> {
        self.prepare(chain, cfg)?;
        let top = chain.latent(chain.steps());
        spec.check(top)?;
        let init = masked_shuffle(top, spec, rng);
        self.run(chain, cond, cfg, init, Some(spec), None)
    }

    /// Starts from the inverted latent itself. Attention injection and noise
    /// alignment only run for `t <= interaction_start`.
    pub fn edit_generate(
        &self,
        chain: &ChainRecord,
        new_cond: &Condition,
        cfg: &RivalConfig,
        interaction_start: usize,
    ) -> Result<Generation> {
        let cfg = RivalConfig { init_mode: InitMode::Copy, ..*cfg };
        self.prepare(chain, &cfg)?;
        let init = chain.latent(chain.steps()).clone();
        self.run(chain, new_cond, &cfg, init, None, Some(interaction_start))
    }

    fn prepare(&self, chain: &ChainRecord, cfg: &RivalConfig) -> Result<()> {
        cfg.validate()?;
        chain.check_compatible(self.schedule, self.denoiser)?;
        if cfg.steps != chain.steps() {
            return Err(RivalError::config(format!(
                "config has T = {} but the chain has {} steps",
                cfg.steps,
                chain.steps()
            )));
        }
        Ok(())
    }

    fn run(
        &self,
        chain: &ChainRecord,
        cond: &Condition,
        cfg: &RivalConfig,
        init: LatentTensor,
        mask: Option<&InpaintSpec>,
        injection_start: Option<usize>,
    ) -> Result<Generation> {
        let steps = chain.steps();
        let sites = self.denoiser.sites();
        let null = Condition::null(cond.dim());
        let policy = cfg.injection_policy();

        let mut latents = Vec::with_capacity(steps + 1);
        let mut records = Vec::with_capacity(steps);
        let mut x = init;
        for t in (1..=steps).rev() {
            let interacting = injection_start.is_none_or(|start| t <= start);
            let mode = if interacting { policy_mode(t, &policy) } else { InjectionMode::Off };
            let ctx = InjectionContext::from_cache(&chain.cache, &sites, t, mode)?;
            let timestep = self.schedule.timestep(t)?;
            let cond_call = DenoiserCall::new(&x, timestep, cond).with_injection(&ctx);
            let uncond_call = DenoiserCall::new(&x, timestep, &null).with_injection(&ctx);
            let (cond_out, uncond_out) =
                par::join(|| self.denoiser.predict(&cond_call), || self.denoiser.predict(&uncond_call));
            let (cond_out, uncond_out) = (cond_out?, uncond_out?);

            let guided = cfg_eps(&cond_out.eps, &uncond_out.eps, cfg.guidance_scale)?;
            let eps = if interacting && cfg.toggles.na && t > cfg.t_early {
                aligned_eps(&guided, &self.reference_eps(chain, t)?, t, cfg)?
            } else {
                guided
            };

            let mut next = ddim_step(&x, &eps, t, t - 1, self.schedule)?;
            if let Some(spec) = mask {
                next = spec.blend(&next, chain.latent(t - 1));
            }
            if !next.is_finite() {
                return Err(RivalError::NumericalDivergence(Box::new(DivergenceDump {
                    step: t,
                    reason: "generation produced a non-finite latent".into(),
                    latent: x,
                    eps,
                })));
            }

            records.push(StepRecord {
                t,
                mode,
                kl: kl_gaussian_fit(&x, chain.latent(t)).ok(),
                scores: cond_out.scores,
            });
            latents.push(std::mem::replace(&mut x, next));
        }
        latents.push(x.clone());
        latents.reverse();

        Ok(Generation {
            latent: x,
            diagnostics: GenerationDiagnostics { latents, steps: records, bottleneck: self.denoiser.bottleneck_site() },
        })
    }
}
