//! Noise schedule and the per-step transition maps.
//!
//! Two time axes are used. Train timesteps index the `train_steps`-long
//! variance schedule. Inference levels `t = 0..=T` index the sampling grid:
//! level 0 is the clean latent (`alpha_bar = 1`) and level `t >= 1` sits at
//! train timestep `grid[t - 1]`.

use crate::error::{Result, RivalError};
use crate::latent::{LatentTensor, SeededRng};

/// How the `T` inference timesteps are picked out of the training range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    /// `i * (train_steps / T)`.
    #[default]
    Leading,
    /// `round(i * (train_steps - 1) / (T - 1))`, which always includes the last step.
    Linspace,
}

impl Spacing {
    pub fn as_str(&self) -> &'static str {
        match self {
            Spacing::Leading => "leading",
            Spacing::Linspace => "linspace",
        }
    }
}

impl std::str::FromStr for Spacing {
    type Err = RivalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading" => Ok(Spacing::Leading),
            "linspace" => Ok(Spacing::Linspace),
            other => Err(RivalError::invalid(format!("unknown spacing `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub train_steps: usize,
    pub inference_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub spacing: Spacing,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            train_steps: 1000,
            inference_steps: 50,
            beta_start: 0.00085,
            beta_end: 0.012,
            spacing: Spacing::Leading,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    params: ScheduleParams,
    grid: Vec<usize>,
    k: Vec<f64>,
    alpha_bar: Vec<f64>,
    ddim_beta: Vec<f64>,
}

/// `sqrt(1 / alpha_bar - 1)`.
pub fn ddim_beta(alpha_bar: f64) -> f64 {
    (1.0 / alpha_bar - 1.0).sqrt()
}

impl NoiseSchedule {
    /// Scaled-linear schedule: `k_t` linear in sqrt space between
    /// `sqrt(beta_start)` and `sqrt(beta_end)`, then squared.
    pub fn build(params: ScheduleParams) -> Result<Self> {
        let ScheduleParams { train_steps, inference_steps, beta_start, beta_end, spacing } = params;
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(RivalError::invalid(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        if train_steps < 2 {
            return Err(RivalError::invalid("train_steps must be at least 2"));
        }
        if inference_steps == 0 || inference_steps > train_steps {
            return Err(RivalError::invalid(format!(
                "inference_steps must be in 1..={train_steps}, got {inference_steps}"
            )));
        }

        let (lo, hi) = (beta_start.sqrt(), beta_end.sqrt());
        let last = (train_steps - 1) as f64;
        let k: Vec<f64> = (0..train_steps)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / last;
                s * s
            })
            .collect();
        let mut alpha_bar = Vec::with_capacity(train_steps);
        let mut acc = 1.0;
        for &ki in &k {
            acc *= 1.0 - ki;
            alpha_bar.push(acc);
        }
        let ddim_beta = alpha_bar.iter().map(|&a| ddim_beta(a)).collect();

        let grid: Vec<usize> = match spacing {
            Spacing::Leading => {
                let stride = train_steps / inference_steps;
                (0..inference_steps).map(|i| i * stride).collect()
            }
            Spacing::Linspace if inference_steps == 1 => vec![0],
            Spacing::Linspace => (0..inference_steps)
                .map(|i| (i as f64 * last / (inference_steps - 1) as f64).round() as usize)
                .collect(),
        };
        debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));

        Ok(NoiseSchedule { params, grid, k, alpha_bar, ddim_beta })
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn train_steps(&self) -> usize {
        self.params.train_steps
    }

    /// Number of inference steps `T`.
    pub fn steps(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn ddim_betas(&self) -> &[f64] {
        &self.ddim_beta
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.steps() {
            return Err(RivalError::invalid(format!("level {level} is off the {}-step grid", self.steps())));
        }
        Ok(())
    }

    fn check_train(&self, t: usize) -> Result<()> {
        if t >= self.train_steps() {
            return Err(RivalError::invalid(format!("timestep {t} outside 0..{}", self.train_steps())));
        }
        Ok(())
    }

    /// Train timestep the denoiser is queried at for inference level `level >= 1`.
    pub fn timestep(&self, level: usize) -> Result<usize> {
        self.check_level(level)?;
        if level == 0 {
            return Err(RivalError::invalid("level 0 is the clean latent and has no timestep"));
        }
        Ok(self.grid[level - 1])
    }

    /// Cumulative alpha at an inference level; 1 at the clean level.
    pub fn level_alpha_bar(&self, level: usize) -> Result<f64> {
        self.check_level(level)?;
        Ok(if level == 0 { 1.0 } else { self.alpha_bar[self.grid[level - 1]] })
    }
}

/// One deterministic DDIM transition between two noise levels given by their
/// cumulative alphas. Used in both directions.
pub fn ddim_transition(x: &LatentTensor, eps: &LatentTensor, alpha_from: f64, alpha_to: f64) -> Result<LatentTensor> {
    let scale = (alpha_to / alpha_from).sqrt();
    let noise = alpha_to.sqrt() * (ddim_beta(alpha_to) - ddim_beta(alpha_from));
    x.axpby(scale, eps, noise)
}

/// Denoising step from level `t_from` down to `t_to`.
pub fn ddim_step(
    x: &LatentTensor,
    eps: &LatentTensor,
    t_from: usize,
    t_to: usize,
    s: &NoiseSchedule,
) -> Result<LatentTensor> {
    if t_to >= t_from {
        return Err(RivalError::invalid(format!("ddim_step needs t_to < t_from, got {t_from} -> {t_to}")));
    }
    ddim_transition(x, eps, s.level_alpha_bar(t_from)?, s.level_alpha_bar(t_to)?)
}

/// Inversion step from level `t_from` up to `t_to`.
pub fn ddim_invert_step(
    x: &LatentTensor,
    eps: &LatentTensor,
    t_from: usize,
    t_to: usize,
    s: &NoiseSchedule,
) -> Result<LatentTensor> {
    if t_to <= t_from {
        return Err(RivalError::invalid(format!("ddim_invert_step needs t_to > t_from, got {t_from} -> {t_to}")));
    }
    ddim_transition(x, eps, s.level_alpha_bar(t_from)?, s.level_alpha_bar(t_to)?)
}

/// `sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * w` at train timestep `t`.
pub fn forward_diffuse(x0: &LatentTensor, t: usize, w: &LatentTensor, s: &NoiseSchedule) -> Result<LatentTensor> {
    s.check_train(t)?;
    let a = s.alpha_bar[t];
    x0.axpby(a.sqrt(), w, (1.0 - a).sqrt())
}

/// Posterior mean of the ancestral step.
pub fn ddpm_mean(x: &LatentTensor, eps: &LatentTensor, k_t: f64, alpha_bar_t: f64) -> Result<LatentTensor> {
    let pre = 1.0 / (1.0 - k_t).sqrt();
    let c = k_t / (1.0 - alpha_bar_t).sqrt();
    x.zip_map(eps, |xv, ev| pre * (xv - c * ev))
}

/// Ancestral DDPM step at train timestep `t` with `sigma_t^2 = k_t`.
/// No noise is added at `t = 0`.
pub fn ddpm_step(
    x: &LatentTensor,
    eps: &LatentTensor,
    t: usize,
    rng: &mut SeededRng,
    s: &NoiseSchedule,
) -> Result<LatentTensor> {
    s.check_train(t)?;
    let mean = ddpm_mean(x, eps, s.k[t], s.alpha_bar[t])?;
    if t == 0 {
        return Ok(mean);
    }
    let z = crate::latent::sample_standard_gaussian(x.shape(), rng);
    mean.axpby(1.0, &z, s.k[t].sqrt())
}
