//! Line-oriented `key = value` run configuration. `#` starts a comment.
//! Unknown keys are rejected; every key has a default.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::denoiser::{
    AnalyticGaussianDenoiser, Condition, Denoiser, ToyAttentionDenoiser, ToyConfig, DEFAULT_COND_DIM,
};
use crate::error::{Result, RivalError};
use crate::pipeline::{InitMode, InversionCondition, RivalConfig, Toggles, DEFAULT_EDIT_START};
use crate::schedule::{NoiseSchedule, ScheduleParams, Spacing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenoiserKind {
    Analytic,
    #[default]
    Toy,
}

impl DenoiserKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DenoiserKind::Analytic => "analytic",
            DenoiserKind::Toy => "toy",
        }
    }
}

impl FromStr for DenoiserKind {
    type Err = RivalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(DenoiserKind::Analytic),
            "toy" => Ok(DenoiserKind::Toy),
            other => Err(RivalError::invalid(format!("unknown denoiser kind `{other}` (expected analytic or toy)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    pub seed: u64,
    /// One value per channel, or a single value broadcast to all channels.
    pub mu0: Vec<f64>,
    pub s0: f64,
    pub channels: usize,
    pub size: usize,
    pub sites: usize,
    pub token_dim: usize,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec {
            kind: DenoiserKind::Toy,
            seed: 7,
            mu0: vec![0.0],
            s0: 1.0,
            channels: 3,
            size: 32,
            sites: 2,
            token_dim: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: ScheduleParams,
    pub rival: RivalConfig,
    pub denoiser: DenoiserSpec,
    pub condition_seed: u64,
    pub condition_dim: usize,
    pub edit_condition_seed: u64,
    pub edit_start: usize,
    pub store_eps: bool,
    pub palette_k: usize,
    pub palette_iters: usize,
    pub palette_seed: u64,
    pub image: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedule: ScheduleParams::default(),
            rival: RivalConfig::default(),
            denoiser: DenoiserSpec::default(),
            condition_seed: 1,
            condition_dim: DEFAULT_COND_DIM,
            edit_condition_seed: 2,
            edit_start: DEFAULT_EDIT_START,
            store_eps: true,
            palette_k: 10,
            palette_iters: 50,
            palette_seed: 0,
            image: None,
            chain: None,
            mask: None,
            out: None,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>().map_err(|_| RivalError::Parse { line, message: format!("malformed value `{raw}` for `{key}`") })
}

fn parse_enum<T: FromStr<Err = RivalError>>(line: usize, raw: &str) -> Result<T> {
    raw.parse::<T>().map_err(|e| RivalError::Parse { line, message: e.to_string() })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(RivalError::Parse { line, message: format!("malformed boolean `{raw}` for `{key}`") }),
    }
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').map(|v| parse_value::<f64>(line, key, v.trim())).collect()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| RivalError::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if seen.insert(key.to_string(), line).is_some() {
            return Err(RivalError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        let d = &mut cfg.denoiser;
        let r = &mut cfg.rival;
        match key {
            "train_steps" => cfg.schedule.train_steps = parse_value(line, key, value)?,
            "inference_steps" => cfg.schedule.inference_steps = parse_value(line, key, value)?,
            "beta_start" => cfg.schedule.beta_start = parse_value(line, key, value)?,
            "beta_end" => cfg.schedule.beta_end = parse_value(line, key, value)?,
            "spacing" => cfg.schedule.spacing = parse_enum::<Spacing>(line, value)?,
            "m" => r.guidance_scale = parse_value(line, key, value)?,
            "t_align" => r.t_align = parse_value(line, key, value)?,
            "t_early" => r.t_early = parse_value(line, key, value)?,
            "init_mode" => r.init_mode = parse_enum::<InitMode>(line, value)?,
            "ai" => r.toggles.ai = parse_bool(line, key, value)?,
            "af" => r.toggles.af = parse_bool(line, key, value)?,
            "li" => r.toggles.li = parse_bool(line, key, value)?,
            "na" => r.toggles.na = parse_bool(line, key, value)?,
            "inversion_condition" => r.inversion_condition = parse_enum::<InversionCondition>(line, value)?,
            "seed" => r.seed = parse_value(line, key, value)?,
            "denoiser.kind" => d.kind = parse_enum::<DenoiserKind>(line, value)?,
            "denoiser.seed" => d.seed = parse_value(line, key, value)?,
            "denoiser.mu0" => d.mu0 = parse_list(line, key, value)?,
            "denoiser.s0" => d.s0 = parse_value(line, key, value)?,
            "denoiser.channels" => d.channels = parse_value(line, key, value)?,
            "denoiser.size" => d.size = parse_value(line, key, value)?,
            "denoiser.sites" => d.sites = parse_value(line, key, value)?,
            "denoiser.dim" => d.token_dim = parse_value(line, key, value)?,
            "condition.seed" => cfg.condition_seed = parse_value(line, key, value)?,
            "condition.dim" => cfg.condition_dim = parse_value(line, key, value)?,
            "edit.condition_seed" => cfg.edit_condition_seed = parse_value(line, key, value)?,
            "edit.start_step" => cfg.edit_start = parse_value(line, key, value)?,
            "store_eps" => cfg.store_eps = parse_bool(line, key, value)?,
            "palette.k" => cfg.palette_k = parse_value(line, key, value)?,
            "palette.iters" => cfg.palette_iters = parse_value(line, key, value)?,
            "palette.seed" => cfg.palette_seed = parse_value(line, key, value)?,
            "image" => cfg.image = Some(PathBuf::from(value)),
            "chain" => cfg.chain = Some(PathBuf::from(value)),
            "mask" => cfg.mask = Some(PathBuf::from(value)),
            "out" => cfg.out = Some(PathBuf::from(value)),
            _ => return Err(RivalError::Parse { line, message: format!("unknown key `{key}`") }),
        }
    }
    cfg.rival.steps = cfg.schedule.inference_steps;
    if !seen.contains_key("edit.start_step") {
        cfg.edit_start = cfg.edit_start.min(cfg.schedule.inference_steps);
    }

    let line_of = |key: &str| seen.get(key).copied().unwrap_or(0);
    cfg.validate_with(line_of)?;
    Ok(cfg)
}

impl RunConfig {
    /// Range checks; `line_of` maps a key to the line it was set on (0 = default).
    fn validate_with(&self, line_of: impl Fn(&str) -> usize) -> Result<()> {
        let err = |key: &str, message: String| {
            let line = line_of(key);
            let message =
                if line == 0 { format!("{message} (default value; set `{key}` explicitly)") } else { message };
            Err(RivalError::Parse { line, message })
        };
        let t = self.schedule.inference_steps;
        if NoiseSchedule::build(self.schedule).is_err() {
            let key = if t == 0 || t > self.schedule.train_steps { "inference_steps" } else { "beta_start" };
            return err(
                key,
                format!(
                    "schedule needs 0 < beta_start <= beta_end < 1 and 1 <= inference_steps <= train_steps \
                     (got {}, {}, {t}, {})",
                    self.schedule.beta_start, self.schedule.beta_end, self.schedule.train_steps
                ),
            );
        }
        if self.rival.t_align > t {
            return err("t_align", format!("t_align must satisfy 0 <= t_align <= T = {t}, got {}", self.rival.t_align));
        }
        if self.rival.t_early > t {
            return err("t_early", format!("t_early must satisfy 0 <= t_early <= T = {t}, got {}", self.rival.t_early));
        }
        if self.edit_start > t {
            return err("edit.start_step", format!("edit.start_step must be <= T = {t}, got {}", self.edit_start));
        }
        let m = self.rival.guidance_scale;
        if !(m >= 0.0 && m.is_finite()) {
            return err("m", format!("guidance scale m must be >= 0, got {m}"));
        }
        let d = &self.denoiser;
        if !(d.s0 > 0.0 && d.s0.is_finite()) {
            return err("denoiser.s0", format!("denoiser.s0 must be > 0, got {}", d.s0));
        }
        if d.channels == 0 || d.size == 0 {
            return err("denoiser.size", "denoiser.channels and denoiser.size must be positive".into());
        }
        if d.mu0.len() != 1 && d.mu0.len() != d.channels {
            return err("denoiser.mu0", format!("denoiser.mu0 needs 1 or {} values, got {}", d.channels, d.mu0.len()));
        }
        if d.token_dim < 2 {
            return err("denoiser.dim", "denoiser.dim must be at least 2".into());
        }
        if self.condition_dim == 0 {
            return err("condition.dim", "condition.dim must be positive".into());
        }
        if self.palette_k == 0 || self.palette_iters == 0 {
            return err("palette.k", "palette.k and palette.iters must be positive".into());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    pub fn build_schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::build(self.schedule)
    }

    pub fn build_denoiser(&self, schedule: &NoiseSchedule) -> Result<Box<dyn Denoiser>> {
        let d = &self.denoiser;
        Ok(match d.kind {
            DenoiserKind::Analytic => {
                let mu0 = if d.mu0.len() == 1 { vec![d.mu0[0]; d.channels] } else { d.mu0.clone() };
                Box::new(AnalyticGaussianDenoiser::new(mu0, d.s0, d.size, d.size, schedule)?)
            }
            DenoiserKind::Toy => Box::new(ToyAttentionDenoiser::new(ToyConfig {
                seed: d.seed,
                channels: d.channels,
                size: d.size,
                sites: d.sites,
                token_dim: d.token_dim,
                cond_dim: self.condition_dim,
            })?),
        })
    }

    pub fn condition(&self) -> Condition {
        Condition::from_seed(self.condition_seed, self.condition_dim)
    }

    pub fn edit_condition(&self) -> Condition {
        Condition::from_seed(self.edit_condition_seed, self.condition_dim)
    }

    /// Condition the reference is inverted with.
    pub fn inversion_condition(&self) -> Condition {
        match self.rival.inversion_condition {
            InversionCondition::SourcePrompt => self.condition(),
            InversionCondition::Empty => Condition::null(self.condition_dim),
        }
    }

    /// Every resolved key in config-file syntax; parsing it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.rival;
        let d = &self.denoiser;
        let Toggles { ai, af, li, na } = r.toggles;
        let mu0: Vec<String> = d.mu0.iter().map(|v| format!("{v:?}")).collect();
        let lines: Vec<(&str, String)> = vec![
            ("train_steps", self.schedule.train_steps.to_string()),
            ("inference_steps", self.schedule.inference_steps.to_string()),
            ("beta_start", format!("{:?}", self.schedule.beta_start)),
            ("beta_end", format!("{:?}", self.schedule.beta_end)),
            ("spacing", self.schedule.spacing.as_str().into()),
            ("m", format!("{:?}", r.guidance_scale)),
            ("t_align", r.t_align.to_string()),
            ("t_early", r.t_early.to_string()),
            ("init_mode", r.init_mode.as_str().into()),
            ("ai", ai.to_string()),
            ("af", af.to_string()),
            ("li", li.to_string()),
            ("na", na.to_string()),
            ("inversion_condition", r.inversion_condition.as_str().into()),
            ("seed", r.seed.to_string()),
            ("denoiser.kind", d.kind.as_str().into()),
            ("denoiser.seed", d.seed.to_string()),
            ("denoiser.mu0", mu0.join(",")),
            ("denoiser.s0", format!("{:?}", d.s0)),
            ("denoiser.channels", d.channels.to_string()),
            ("denoiser.size", d.size.to_string()),
            ("denoiser.sites", d.sites.to_string()),
            ("denoiser.dim", d.token_dim.to_string()),
            ("condition.seed", self.condition_seed.to_string()),
            ("condition.dim", self.condition_dim.to_string()),
            ("edit.condition_seed", self.edit_condition_seed.to_string()),
            ("edit.start_step", self.edit_start.to_string()),
            ("store_eps", self.store_eps.to_string()),
            ("palette.k", self.palette_k.to_string()),
            ("palette.iters", self.palette_iters.to_string()),
            ("palette.seed", self.palette_seed.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (k, p) in [("image", &self.image), ("chain", &self.chain), ("mask", &self.mask), ("out", &self.out)] {
            if let Some(p) = p {
                let _ = writeln!(s, "{k} = {}", p.display());
            }
        }
        s
    }
}
