//! Chain directory layout:
//!
//! ```text
//! manifest.txt              key = value
//! latents/level_000.rivl    one per level 0..=T
//! eps/level_001.rivl        one per level 1..=T (optional)
//! hidden/<site>/level_001.rivl
//! ```
//!
//! Hidden token matrices are stored as `1 x tokens x dim` latents.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::invert::ChainRecord;
use crate::attention::{HiddenStateCache, TokenMatrix};
use crate::denoiser::Condition;
use crate::error::{Result, RivalError};
use crate::latent::{load_latent, save_latent, LatentTensor, Shape};
use crate::schedule::ScheduleParams;

const FORMAT: &str = "rival-chain/1";
const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ChainManifest {
    pub steps: usize,
    pub schedule: ScheduleParams,
    pub denoiser_id: String,
    pub condition: Condition,
    pub sites: Vec<String>,
    pub has_eps: bool,
}

impl ChainManifest {
    fn to_text(&self) -> String {
        let emb: Vec<String> = self.condition.embedding().iter().map(|v| format!("{v:?}")).collect();
        let s = &self.schedule;
        format!(
            "format = {FORMAT}\nsteps = {}\ntrain_steps = {}\nbeta_start = {:?}\nbeta_end = {:?}\nspacing = {}\n\
             denoiser = {}\ncondition = {}\ncondition_null = {}\nsites = {}\neps = {}\n",
            self.steps,
            s.train_steps,
            s.beta_start,
            s.beta_end,
            s.spacing.as_str(),
            self.denoiser_id,
            emb.join(","),
            self.condition.is_null(),
            self.sites.join(","),
            self.has_eps,
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RivalError::Parse { line: i + 1, message: "expected `key = value`".into() })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k).map(String::as_str).ok_or_else(|| RivalError::Format(format!("chain manifest is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| RivalError::Format(format!("manifest `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| RivalError::Format(format!("manifest `{k}` is not an integer")))
        };
        let flag = |k: &str| -> Result<bool> {
            get(k)?.parse().map_err(|_| RivalError::Format(format!("manifest `{k}` is not a boolean")))
        };
        if get("format")? != FORMAT {
            return Err(RivalError::Format(format!("unsupported chain format `{}`", get("format")?)));
        }
        let steps = int("steps")?;
        let schedule = ScheduleParams {
            train_steps: int("train_steps")?,
            inference_steps: steps,
            beta_start: num("beta_start")?,
            beta_end: num("beta_end")?,
            spacing: get("spacing")?.parse()?,
        };
        let emb_text = get("condition")?;
        let embedding = if emb_text.is_empty() {
            Vec::new()
        } else {
            emb_text
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| RivalError::Format("bad condition value".into())))
                .collect::<Result<Vec<_>>>()?
        };
        let condition =
            if flag("condition_null")? { Condition::null(embedding.len()) } else { Condition::new(embedding) };
        let sites_text = get("sites")?;
        let sites = if sites_text.is_empty() {
            Vec::new()
        } else {
            sites_text.split(',').map(|s| s.trim().to_string()).collect()
        };
        Ok(ChainManifest {
            steps,
            schedule,
            denoiser_id: get("denoiser")?.to_string(),
            condition,
            sites,
            has_eps: flag("eps")?,
        })
    }
}

fn level_file(dir: &Path, level: usize) -> PathBuf {
    dir.join(format!("level_{level:03}.rivl"))
}

fn check_site_name(site: &str) -> Result<()> {
    if site.is_empty() || site.contains(['/', '\\', ',']) || site.starts_with('.') {
        return Err(RivalError::invalid(format!("site name `{site}` cannot be used as a directory")));
    }
    Ok(())
}

/// Writes the chain into a sibling temp directory, then renames it into place.
/// An existing chain directory at `dir` is replaced; any other existing path is an error.
pub fn save_chain(chain: &ChainRecord, dir: &Path) -> Result<()> {
    let mut sites: Vec<String> = chain.cache.iter().map(|(s, _, _)| s.to_string()).collect();
    sites.dedup();
    for s in &sites {
        check_site_name(s)?;
    }
    let manifest = ChainManifest {
        steps: chain.steps(),
        schedule: chain.schedule,
        denoiser_id: chain.denoiser_id.clone(),
        condition: chain.condition.clone(),
        sites,
        has_eps: chain.eps.is_some(),
    };

    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new().prefix(".chain-").tempdir_in(&parent)?;
    let root = staging.path();

    fs::create_dir(root.join("latents"))?;
    for (level, x) in chain.latents.iter().enumerate() {
        save_latent(&level_file(&root.join("latents"), level), x)?;
    }
    if let Some(eps) = &chain.eps {
        fs::create_dir(root.join("eps"))?;
        for (i, e) in eps.iter().enumerate() {
            save_latent(&level_file(&root.join("eps"), i + 1), e)?;
        }
    }
    fs::create_dir(root.join("hidden"))?;
    for (site, level, v) in chain.cache.iter() {
        let site_dir = root.join("hidden").join(site);
        fs::create_dir_all(&site_dir)?;
        let as_latent = LatentTensor::new(Shape::new(1, v.rows(), v.cols()), v.data().to_vec())?;
        save_latent(&level_file(&site_dir, level), &as_latent)?;
    }
    fs::write(root.join(MANIFEST), manifest.to_text())?;

    if dir.exists() {
        if !dir.join(MANIFEST).is_file() {
            return Err(RivalError::invalid(format!("{} exists and is not a chain directory", dir.display())));
        }
        fs::remove_dir_all(dir)?;
    }
    let staged = staging.keep();
    fs::rename(&staged, dir)?;
    Ok(())
}

pub fn load_chain(dir: &Path) -> Result<ChainRecord> {
    let manifest = ChainManifest::parse(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let latents = (0..=manifest.steps)
        .map(|level| load_latent(&level_file(&dir.join("latents"), level)))
        .collect::<Result<Vec<_>>>()?;
    let eps = if manifest.has_eps {
        Some(
            (1..=manifest.steps)
                .map(|level| load_latent(&level_file(&dir.join("eps"), level)))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let mut cache = HiddenStateCache::new();
    for site in &manifest.sites {
        check_site_name(site)?;
        for level in 1..=manifest.steps {
            let x = load_latent(&level_file(&dir.join("hidden").join(site), level))?;
            let tokens = TokenMatrix::new(x.height(), x.width(), x.into_data())?;
            cache.capture(site, level, tokens)?;
        }
    }
    Ok(ChainRecord {
        latents,
        cache,
        eps,
        condition: manifest.condition,
        schedule: manifest.schedule,
        denoiser_id: manifest.denoiser_id,
    })
}

/// Writes generation diagnostics: `meta.txt`, `steps.csv`
/// (`step,mode,site,score`) and `latents/level_XXX.rivl`.
pub fn save_diagnostics(diag: &super::GenerationDiagnostics, dir: &Path) -> Result<()> {
    use std::fmt::Write as _;
    fs::create_dir_all(dir.join("latents"))?;
    for (level, x) in diag.latents.iter().enumerate() {
        save_latent(&level_file(&dir.join("latents"), level), x)?;
    }
    let mut csv = String::from("step,mode,site,score\n");
    for s in &diag.steps {
        if s.scores.is_empty() {
            let _ = writeln!(csv, "{},{},,", s.t, s.mode.as_str());
        }
        for (site, score) in &s.scores {
            let _ = writeln!(csv, "{},{},{site},{score:?}", s.t, s.mode.as_str());
        }
    }
    crate::io::write_bytes_atomic(&dir.join("steps.csv"), csv.as_bytes())?;
    let meta = format!("levels = {}\nbottleneck = {}\n", diag.latents.len(), diag.bottleneck.as_deref().unwrap_or(""));
    crate::io::write_bytes_atomic(&dir.join("meta.txt"), meta.as_bytes())
}

pub fn load_diagnostics(dir: &Path) -> Result<super::GenerationDiagnostics> {
    use super::StepRecord;
    let meta = fs::read_to_string(dir.join("meta.txt"))?;
    let mut levels = None;
    let mut bottleneck = None;
    for line in meta.lines() {
        match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
            Some(("levels", v)) => {
                levels = Some(v.parse::<usize>().map_err(|_| RivalError::Format("bad `levels` in meta.txt".into()))?)
            }
            Some(("bottleneck", v)) if !v.is_empty() => bottleneck = Some(v.to_string()),
            _ => {}
        }
    }
    let levels = levels.ok_or_else(|| RivalError::Format("meta.txt is missing `levels`".into()))?;
    let latents = (0..levels).map(|l| load_latent(&level_file(&dir.join("latents"), l))).collect::<Result<Vec<_>>>()?;

    let csv = fs::read_to_string(dir.join("steps.csv"))?;
    let mut steps: Vec<StepRecord> = Vec::new();
    for (i, line) in csv.lines().enumerate().skip(1) {
        let bad = || RivalError::Parse { line: i + 1, message: format!("malformed steps.csv row `{line}`") };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad());
        }
        let t: usize = cols[0].parse().map_err(|_| bad())?;
        let mode = cols[1].parse().map_err(|_| bad())?;
        if steps.last().map(|s| s.t) != Some(t) {
            steps.push(StepRecord { t, mode, kl: None, scores: BTreeMap::new() });
        }
        if !cols[2].is_empty() {
            let score: f64 = cols[3].parse().map_err(|_| bad())?;
            steps.last_mut().expect("pushed above").scores.insert(cols[2].to_string(), score);
        }
    }
    Ok(super::GenerationDiagnostics { latents, steps, bottleneck })
}
