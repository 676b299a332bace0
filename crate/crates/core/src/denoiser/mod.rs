//! The noise-prediction interface and the two built-in denoisers.

mod analytic;
mod toy;

use std::collections::BTreeMap;

pub use analytic::{analytic_eps, AnalyticGaussianDenoiser};
pub use toy::{ToyAttentionDenoiser, ToyConfig, ToyWeights};

use crate::attention::{InjectionContext, TokenMatrix};
use crate::error::Result;
use crate::latent::{LatentTensor, SeededRng, Shape};

pub const DEFAULT_COND_DIM: usize = 16;

/// A numeric conditioning embedding. The null condition is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    embedding: Vec<f64>,
    is_null: bool,
}

impl Condition {
    pub fn new(embedding: Vec<f64>) -> Self {
        Condition { embedding, is_null: false }
    }

    pub fn null(dim: usize) -> Self {
        Condition { embedding: vec![0.0; dim], is_null: true }
    }

    /// Standard-normal embedding drawn from `seed`.
    pub fn from_seed(seed: u64, dim: usize) -> Self {
        let mut rng = SeededRng::derive(seed, 0xC0_4D);
        Condition::new((0..dim).map(|_| rng.standard_normal()).collect())
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn is_null(&self) -> bool {
        self.is_null
    }

    pub fn dim(&self) -> usize {
        self.embedding.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DenoiserCall<'a> {
    pub x: &'a LatentTensor,
    /// Train timestep.
    pub timestep: usize,
    pub cond: &'a Condition,
    pub injection: Option<&'a InjectionContext<'a>>,
}

impl<'a> DenoiserCall<'a> {
    pub fn new(x: &'a LatentTensor, timestep: usize, cond: &'a Condition) -> Self {
        DenoiserCall { x, timestep, cond, injection: None }
    }

    pub fn with_injection(mut self, ctx: &'a InjectionContext<'a>) -> Self {
        self.injection = Some(ctx);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserOutput {
    pub eps: LatentTensor,
    /// Pre-projection input tokens of every attention site.
    pub hidden: BTreeMap<String, TokenMatrix>,
    /// Reference attention mass per site for this call.
    pub scores: BTreeMap<String, f64>,
}

pub trait Denoiser: Send + Sync {
    /// Stable identifier including every parameter that changes predictions.
    fn id(&self) -> String;

    fn shape(&self) -> Shape;

    fn sites(&self) -> Vec<String>;

    /// The deepest attention site, where reference contribution is reported.
    fn bottleneck_site(&self) -> Option<String> {
        let sites = self.sites();
        sites.get(sites.len() / 2).cloned()
    }

    fn predict(&self, call: &DenoiserCall<'_>) -> Result<DenoiserOutput>;
}
