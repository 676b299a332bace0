use std::collections::BTreeMap;

use super::{Denoiser, DenoiserCall, DenoiserOutput, DEFAULT_COND_DIM};
use crate::attention::{injected_attention, InjectionMode, SiteWeights, TokenMatrix};
use crate::error::{Result, RivalError};
use crate::latent::{LatentTensor, SeededRng, Shape};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyConfig {
    pub seed: u64,
    pub channels: usize,
    pub size: usize,
    pub sites: usize,
    pub token_dim: usize,
    pub cond_dim: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { seed: 7, channels: 3, size: 16, sites: 2, token_dim: 8, cond_dim: DEFAULT_COND_DIM }
    }
}

/// Gain applied to query/key projections so attention is far from uniform.
const QK_GAIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyWeights {
    /// `channels x d`
    pub w_in: TokenMatrix,
    pub b_in: Vec<f64>,
    /// `d x d`, applied to the sinusoidal timestep embedding.
    pub w_time: TokenMatrix,
    /// `cond_dim x d`
    pub w_cond: TokenMatrix,
    pub sites: Vec<(String, SiteWeights)>,
    /// `d x channels`
    pub w_out: TokenMatrix,
    pub b_out: Vec<f64>,
}

/// Untrained attention network with seeded weights:
/// per-token input mix, residual self-attention sites, per-token output mix.
///
/// Tokens are the `H*W` spatial positions; a token's features are its channel vector.
#[derive(Debug, Clone)]
pub struct ToyAttentionDenoiser {
    config: ToyConfig,
    weights: ToyWeights,
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize, std: f64) -> TokenMatrix {
    let data = (0..rows * cols).map(|_| std * rng.standard_normal()).collect();
    TokenMatrix::new(rows, cols, data).expect("sized by construction")
}

/// Sinusoidal embedding of a train timestep.
pub(crate) fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    (0..dim)
        .map(|i| {
            let j = i % half.max(1);
            let freq = (-(10_000f64.ln()) * j as f64 / half.max(1) as f64).exp();
            let arg = t as f64 * freq;
            if i < half {
                arg.sin()
            } else {
                arg.cos()
            }
        })
        .collect()
}

impl ToyAttentionDenoiser {
    pub fn new(config: ToyConfig) -> Result<Self> {
        let ToyConfig { seed, channels, size, sites, token_dim: d, cond_dim } = config;
        if channels == 0 || size == 0 || d < 2 {
            return Err(RivalError::invalid("toy denoiser needs channels, size > 0 and token_dim >= 2"));
        }
        let mut rng = SeededRng::derive(seed, 0x70_59);
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let w_in = gaussian_matrix(&mut rng, channels, d, fan(channels));
        let b_in = (0..d).map(|_| 0.1 * rng.standard_normal()).collect();
        let w_time = gaussian_matrix(&mut rng, d, d, 0.5 * fan(d));
        let w_cond = gaussian_matrix(&mut rng, cond_dim, d, fan(cond_dim));
        let site_weights = (0..sites)
            .map(|i| {
                let w = SiteWeights {
                    w_q: gaussian_matrix(&mut rng, d, d, QK_GAIN * fan(d)),
                    w_k: gaussian_matrix(&mut rng, d, d, QK_GAIN * fan(d)),
                    w_v: gaussian_matrix(&mut rng, d, d, fan(d)),
                    w_o: gaussian_matrix(&mut rng, d, d, fan(d)),
                };
                (format!("attn.{i}"), w)
            })
            .collect();
        let w_out = gaussian_matrix(&mut rng, d, channels, fan(d));
        let b_out = (0..channels).map(|_| 0.1 * rng.standard_normal()).collect();
        let weights = ToyWeights { w_in, b_in, w_time, w_cond, sites: site_weights, w_out, b_out };
        Ok(ToyAttentionDenoiser { config, weights })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn weights(&self) -> &ToyWeights {
        &self.weights
    }

    fn token_bias(&self, call: &DenoiserCall<'_>) -> Result<Vec<f64>> {
        let w = &self.weights;
        let d = self.config.token_dim;
        if call.cond.dim() != self.config.cond_dim {
            return Err(RivalError::config(format!(
                "condition has dim {}, denoiser expects {}",
                call.cond.dim(),
                self.config.cond_dim
            )));
        }
        let temb = timestep_embedding(call.timestep, d);
        let mut bias = w.b_in.clone();
        for (i, te) in temb.iter().enumerate() {
            for (b, wv) in bias.iter_mut().zip(w.w_time.row(i)) {
                *b += te * wv;
            }
        }
        for (i, ce) in call.cond.embedding().iter().enumerate() {
            for (b, wv) in bias.iter_mut().zip(w.w_cond.row(i)) {
                *b += ce * wv;
            }
        }
        Ok(bias)
    }

    fn check_context(&self, call: &DenoiserCall<'_>) -> Result<InjectionMode> {
        let Some(ctx) = call.injection else {
            return Ok(InjectionMode::Off);
        };
        if ctx.mode == InjectionMode::Off {
            return Ok(InjectionMode::Off);
        }
        let names: Vec<&str> = self.weights.sites.iter().map(|(n, _)| n.as_str()).collect();
        if let Some(unknown) = ctx.references.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(RivalError::config(format!("injection context names unknown site `{unknown}`")));
        }
        if let Some(missing) = names.iter().find(|n| !ctx.references.contains_key(**n)) {
            return Err(RivalError::config(format!("injection context has no tokens for site `{missing}`")));
        }
        Ok(ctx.mode)
    }
}

impl Denoiser for ToyAttentionDenoiser {
    fn id(&self) -> String {
        let c = &self.config;
        format!(
            "toy(seed={},channels={},size={},sites={},dim={},cond={})",
            c.seed, c.channels, c.size, c.sites, c.token_dim, c.cond_dim
        )
    }

    fn shape(&self) -> Shape {
        Shape::new(self.config.channels, self.config.size, self.config.size)
    }

    fn sites(&self) -> Vec<String> {
        self.weights.sites.iter().map(|(n, _)| n.clone()).collect()
    }

    fn predict(&self, call: &DenoiserCall<'_>) -> Result<DenoiserOutput> {
        call.x.expect_shape(self.shape())?;
        let mode = self.check_context(call)?;
        let bias = self.token_bias(call)?;
        let w = &self.weights;
        let c = self.config.channels;
        let d = self.config.token_dim;
        let n = self.shape().spatial();
        let x = call.x.data();

        let h = par::map_indexed(n * d, |i| {
            let (p, j) = (i / d, i % d);
            let mut acc = bias[j];
            for ch in 0..c {
                acc += x[ch * n + p] * w.w_in.get(ch, j);
            }
            acc.tanh()
        });
        let mut h = TokenMatrix::new(n, d, h)?;

        let mut hidden = BTreeMap::new();
        let mut scores = BTreeMap::new();
        for (name, site) in &w.sites {
            let reference = match (mode, call.injection) {
                (InjectionMode::Off, _) | (_, None) => None,
                (_, Some(ctx)) => ctx.references.get(name).copied(),
            };
            let att = injected_attention(&h, reference, mode, site)?;
            let updated = h.data().iter().zip(att.tokens.data()).map(|(a, b)| a + b).collect();
            let next = TokenMatrix::new(n, d, updated)?;
            hidden.insert(name.clone(), std::mem::replace(&mut h, next));
            scores.insert(name.clone(), att.score_r);
        }

        let eps = par::map_indexed(c * n, |i| {
            let (ch, p) = (i / n, i % n);
            let mut acc = w.b_out[ch];
            for (j, hv) in h.row(p).iter().enumerate() {
                acc += hv * w.w_out.get(j, ch);
            }
            acc
        });
        let eps = LatentTensor::new(self.shape(), eps)
            .map_err(|e| RivalError::invalid(format!("toy denoiser produced invalid output: {e}")))?;
        Ok(DenoiserOutput { eps, hidden, scores })
    }
}
