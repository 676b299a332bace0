use std::str::FromStr;

use crate::attention::InjectionPolicy;
use crate::error::{Result, RivalError};

/// How the generation chain's starting latent is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Spatially permuted inverted latent.
    #[default]
    Shuffle,
    /// Per-channel Gaussian matched to the inverted latent's moments.
    Adaptive,
    /// `N(0, I)`.
    Standard,
    /// The inverted latent itself (structure-preserving edits).
    Copy,
}

impl InitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitMode::Shuffle => "shuffle",
            InitMode::Adaptive => "adaptive",
            InitMode::Standard => "standard",
            InitMode::Copy => "copy",
        }
    }
}

impl FromStr for InitMode {
    type Err = RivalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(InitMode::Shuffle),
            "adaptive" => Ok(InitMode::Adaptive),
            "standard" => Ok(InitMode::Standard),
            "copy" => Ok(InitMode::Copy),
            other => Err(RivalError::invalid(format!(
                "unknown init mode `{other}` (expected shuffle, adaptive, standard or copy)"
            ))),
        }
    }
}

/// Condition used while inverting the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionCondition {
    #[default]
    SourcePrompt,
    Empty,
}

impl InversionCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            InversionCondition::SourcePrompt => "source",
            InversionCondition::Empty => "empty",
        }
    }
}

impl FromStr for InversionCondition {
    type Err = RivalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(InversionCondition::SourcePrompt),
            "empty" => Ok(InversionCondition::Empty),
            other => {
                Err(RivalError::invalid(format!("unknown inversion condition `{other}` (expected source or empty)")))
            }
        }
    }
}

/// Module switches: attention injection, attention fusion, latent
/// initialization and noise alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggles {
    pub ai: bool,
    pub af: bool,
    pub li: bool,
    pub na: bool,
}

impl Toggles {
    pub const ALL: Toggles = Toggles { ai: true, af: true, li: true, na: true };
    pub const NONE: Toggles = Toggles { ai: false, af: false, li: false, na: false };
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RivalConfig {
    /// Inference steps `T`.
    pub steps: usize,
    /// Classifier-free guidance scale `m`.
    pub guidance_scale: f64,
    /// Level at and below which attention switches from replacement to fusion.
    pub t_align: usize,
    /// Noise alignment runs while `t > t_early`.
    pub t_early: usize,
    pub init_mode: InitMode,
    pub toggles: Toggles,
    pub inversion_condition: InversionCondition,
    pub seed: u64,
}

impl Default for RivalConfig {
    fn default() -> Self {
        RivalConfig {
            steps: 50,
            guidance_scale: 7.0,
            t_align: 30,
            t_early: 30,
            init_mode: InitMode::Shuffle,
            toggles: Toggles::ALL,
            inversion_condition: InversionCondition::SourcePrompt,
            seed: 0,
        }
    }
}

impl RivalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.guidance_scale >= 0.0 && self.guidance_scale.is_finite()) {
            return Err(RivalError::config(format!("guidance scale m must be >= 0, got {}", self.guidance_scale)));
        }
        if self.steps == 0 {
            return Err(RivalError::config("steps must be positive"));
        }
        if self.t_align > self.steps {
            return Err(RivalError::config(format!(
                "t_align must satisfy 0 <= t_align <= T ({}), got {}",
                self.steps, self.t_align
            )));
        }
        if self.t_early > self.steps {
            return Err(RivalError::config(format!(
                "t_early must satisfy 0 <= t_early <= T ({}), got {}",
                self.steps, self.t_early
            )));
        }
        Ok(())
    }

    pub fn injection_policy(&self) -> InjectionPolicy {
        InjectionPolicy { t_align: self.t_align, enabled: self.toggles.ai, fusion_enabled: self.toggles.af }
    }

    /// Init mode after the LI toggle. Copy is structural and always honored.
    pub fn effective_init(&self) -> InitMode {
        match self.init_mode {
            InitMode::Copy => InitMode::Copy,
            _ if !self.toggles.li => InitMode::Standard,
            mode => mode,
        }
    }
}
