//! Cross-image self-attention: hidden-state capture from the inversion
//! chain and the KV replacement / fusion policy for the generation chain.

use std::collections::BTreeMap;

use crate::error::{Result, RivalError};
use crate::par;

/// Row-major `rows x cols` matrix; rows are tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(RivalError::invalid(format!(
                "token matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(TokenMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        TokenMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Self {
        let data = par::map_indexed(rows * cols, |i| f(i / cols, i % cols));
        TokenMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &TokenMatrix) -> Result<TokenMatrix> {
        if self.cols != rhs.rows {
            return Err(RivalError::config(format!(
                "matmul dimension mismatch: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        par::for_each_chunk_mut(&mut out, m.max(1), |r, row| {
            let lhs = &self.data[r * k..(r + 1) * k];
            for (i, &a) in lhs.iter().enumerate() {
                let rrow = &rhs.data[i * m..(i + 1) * m];
                for (o, &b) in row.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        });
        Ok(TokenMatrix { rows: n, cols: m, data: out })
    }

    /// Stacks `self` on top of `below` along the token axis.
    pub fn concat_rows(&self, below: &TokenMatrix) -> Result<TokenMatrix> {
        if self.cols != below.cols {
            return Err(RivalError::config(format!(
                "cannot concatenate tokens of dim {} and {}",
                self.cols, below.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + below.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&below.data);
        Ok(TokenMatrix { rows: self.rows + below.rows, cols: self.cols, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Frozen projections of one attention site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteWeights {
    pub w_q: TokenMatrix,
    pub w_k: TokenMatrix,
    pub w_v: TokenMatrix,
    pub w_o: TokenMatrix,
}

impl SiteWeights {
    /// Token (hidden-state) dimension.
    pub fn token_dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn key_dim(&self) -> usize {
        self.w_q.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.token_dim();
        let ok = self.w_k.rows() == d
            && self.w_v.rows() == d
            && self.w_k.cols() == self.key_dim()
            && self.w_o.rows() == self.w_v.cols()
            && self.w_o.cols() == d;
        if ok {
            Ok(())
        } else {
            Err(RivalError::config("inconsistent attention site projection shapes"))
        }
    }
}

/// Source of keys and values at one attention site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InjectionMode {
    /// Vanilla self-attention on the generation tokens.
    Off,
    /// Keys and values come from the reference tokens only.
    Replace,
    /// Keys and values from generation tokens followed by reference tokens.
    Fuse,
}

impl InjectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InjectionMode::Off => "off",
            InjectionMode::Replace => "replace",
            InjectionMode::Fuse => "fuse",
        }
    }
}

impl std::str::FromStr for InjectionMode {
    type Err = RivalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(InjectionMode::Off),
            "replace" => Ok(InjectionMode::Replace),
            "fuse" => Ok(InjectionMode::Fuse),
            other => Err(RivalError::invalid(format!("unknown injection mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectionPolicy {
    /// Inference level at and below which fusion replaces pure replacement.
    pub t_align: usize,
    /// Attention injection (AI).
    pub enabled: bool,
    /// Attention fusion (AF).
    pub fusion_enabled: bool,
}

pub fn policy_mode(t: usize, policy: &InjectionPolicy) -> InjectionMode {
    if !policy.enabled {
        InjectionMode::Off
    } else if t > policy.t_align || !policy.fusion_enabled {
        InjectionMode::Replace
    } else {
        InjectionMode::Fuse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub tokens: TokenMatrix,
    /// Mean over queries of the softmax mass on reference-sourced keys.
    pub score_r: f64,
}

/// Softmax attention with queries from `v_g` and keys/values chosen by `mode`.
///
/// `v_r` is required for `Replace` and `Fuse`. In `Fuse` the key order is
/// generation tokens first, then reference tokens.
pub fn injected_attention(
    v_g: &TokenMatrix,
    v_r: Option<&TokenMatrix>,
    mode: InjectionMode,
    w: &SiteWeights,
) -> Result<AttentionOutput> {
    w.validate()?;
    if v_g.cols() != w.token_dim() {
        return Err(RivalError::config(format!(
            "generation tokens have dim {}, site expects {}",
            v_g.cols(),
            w.token_dim()
        )));
    }
    let reference = || {
        let r = v_r.ok_or_else(|| RivalError::config(format!("{} mode needs reference tokens", mode.as_str())))?;
        if r.cols() != w.token_dim() {
            return Err(RivalError::config(format!(
                "reference tokens have dim {}, site expects {}",
                r.cols(),
                w.token_dim()
            )));
        }
        Ok(r)
    };
    let fused;
    let (kv, ref_start) = match mode {
        InjectionMode::Off => (v_g, v_g.rows()),
        InjectionMode::Replace => (reference()?, 0),
        InjectionMode::Fuse => {
            fused = v_g.concat_rows(reference()?)?;
            (&fused, v_g.rows())
        }
    };

    let q = v_g.matmul(&w.w_q)?;
    let k = kv.matmul(&w.w_k)?;
    let v = kv.matmul(&w.w_v)?;
    let scale = 1.0 / (w.key_dim() as f64).sqrt();
    let n_keys = k.rows();
    let dv = v.cols();

    // Per query: attended value row and reference mass.
    let rows: Vec<(Vec<f64>, f64)> = par::map_indexed(q.rows(), |i| {
        let qi = q.row(i);
        let logits: Vec<f64> =
            (0..n_keys).map(|j| qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() * scale).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut out = vec![0.0; dv];
        let mut ref_mass = 0.0;
        for (j, wj) in weights.iter().enumerate() {
            let p = wj / total;
            if j >= ref_start {
                ref_mass += p;
            }
            for (o, vj) in out.iter_mut().zip(v.row(j)) {
                *o += p * vj;
            }
        }
        (out, ref_mass)
    });

    let mut attended = Vec::with_capacity(q.rows() * dv);
    let mut mass = Vec::with_capacity(q.rows());
    for (row, m) in rows {
        attended.extend(row);
        mass.push(m);
    }
    let attended = TokenMatrix::new(q.rows(), dv, attended)?;
    let score_r = match mode {
        InjectionMode::Off => 0.0,
        InjectionMode::Replace => 1.0,
        InjectionMode::Fuse if mass.is_empty() => 0.0,
        InjectionMode::Fuse => mass.iter().sum::<f64>() / mass.len() as f64,
    };
    Ok(AttentionOutput { tokens: attended.matmul(&w.w_o)?, score_r })
}

/// Reference hidden states captured along the inversion chain, keyed by
/// (site, inference level).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HiddenStateCache {
    entries: BTreeMap<(String, usize), TokenMatrix>,
}

impl HiddenStateCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn capture(&mut self, site: &str, step: usize, v: TokenMatrix) -> Result<()> {
        let key = (site.to_string(), step);
        if self.entries.contains_key(&key) {
            return Err(RivalError::invalid(format!("site `{site}` already captured at step {step}")));
        }
        self.entries.insert(key, v);
        Ok(())
    }

    pub fn lookup(&self, site: &str, step: usize) -> Result<&TokenMatrix> {
        self.entries
            .get(&(site.to_string(), step))
            .ok_or_else(|| RivalError::MissingCache { site: site.to_string(), step })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, &TokenMatrix)> {
        self.entries.iter().map(|((s, t), v)| (s.as_str(), *t, v))
    }
}

/// Per-call instruction for a denoiser's attention sites.
#[derive(Debug, Clone)]
pub struct InjectionContext<'a> {
    pub mode: InjectionMode,
    pub references: BTreeMap<String, &'a TokenMatrix>,
}

impl<'a> InjectionContext<'a> {
    pub fn off() -> Self {
        InjectionContext { mode: InjectionMode::Off, references: BTreeMap::new() }
    }

    /// Looks up every site's reference tokens at `step`. `Off` needs none.
    pub fn from_cache<S: AsRef<str>>(
        cache: &'a HiddenStateCache,
        sites: &[S],
        step: usize,
        mode: InjectionMode,
    ) -> Result<Self> {
        let mut references = BTreeMap::new();
        if mode != InjectionMode::Off {
            for site in sites {
                let site = site.as_ref();
                references.insert(site.to_string(), cache.lookup(site, step)?);
            }
        }
        Ok(InjectionContext { mode, references })
    }
}
