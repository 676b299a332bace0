use std::fmt::Write as _;

use crate::attention::InjectionMode;
use crate::error::{Result, RivalError};
use crate::latent::kl_gaussian_fit;
use crate::pipeline::{ChainRecord, GenerationDiagnostics};

/// Score reported for replacement steps, where all keys are reference keys
/// and the generation chain has no keys of its own to compare against.
pub const REPLACE_SCORE: f64 = 0.5;

/// Per-step values over `t = T..1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSeries {
    pub points: Vec<(usize, f64)>,
    /// Steps whose value could not be computed.
    pub flagged: Vec<usize>,
}

impl TraceSeries {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|(_, v)| *v)
    }

    pub fn get(&self, step: usize) -> Option<f64> {
        self.points.iter().find(|(s, _)| *s == step).map(|(_, v)| *v)
    }

    /// Mean over the first `n` recorded points.
    pub fn head_mean(&self, n: usize) -> f64 {
        let take = n.min(self.points.len());
        self.points[..take].iter().map(|(_, v)| v).sum::<f64>() / take as f64
    }

    /// `step,value` header followed by one row per step.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,value\n");
        for (step, v) in &self.points {
            let _ = writeln!(s, "{step},{v}");
        }
        s
    }
}

/// Fitted-Gaussian KL between the generation and inversion latents per step.
pub fn kl_trace(diag: &GenerationDiagnostics, chain: &ChainRecord) -> Result<TraceSeries> {
    if diag.latents.len() != chain.latents.len() {
        return Err(RivalError::invalid(format!(
            "diagnostics cover {} levels, chain has {}",
            diag.latents.len(),
            chain.latents.len()
        )));
    }
    let mut out = TraceSeries::default();
    for t in (1..chain.latents.len()).rev() {
        match kl_gaussian_fit(&diag.latents[t], &chain.latents[t]) {
            Ok(v) => out.points.push((t, v)),
            Err(RivalError::DegenerateDistribution(_)) => out.flagged.push(t),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Reference attention contribution at the bottleneck site per step.
pub fn score_trace(diag: &GenerationDiagnostics) -> TraceSeries {
    let points = diag
        .steps
        .iter()
        .map(|s| {
            let v = match s.mode {
                InjectionMode::Off => 0.0,
                InjectionMode::Replace => REPLACE_SCORE,
                InjectionMode::Fuse => diag.bottleneck.as_ref().and_then(|b| s.scores.get(b)).copied().unwrap_or(0.0),
            };
            (s.t, v)
        })
        .collect();
    TraceSeries { points, flagged: Vec::new() }
}
