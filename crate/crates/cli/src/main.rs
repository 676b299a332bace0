use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rival_core::io::{
    decode_latent, encode_latent, load_image, load_mask, parse_config, save_image, write_bytes_atomic, PixelCodec,
    RunConfig,
};
use rival_core::latent::save_latent;
use rival_core::metrics::{kl_trace, kmeans_palette, palette_distance, score_trace};
use rival_core::pipeline::{
    load_chain, load_diagnostics, save_chain, save_diagnostics, Generation, InpaintSpec, Pipeline,
};
use rival_core::{Result, RivalError, SeededRng};

#[derive(Parser)]
#[command(name = "rival", version, about = "Reference-aligned image variation with a frozen denoiser")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (chain directory for `invert`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Inversion chain directory.
    #[arg(long, global = true)]
    chain: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Invert an RGB PNG into a chain directory.
    Invert {
        /// Input image; falls back to the config `image`.
        image: Option<PathBuf>,
    },
    /// Generate a variation of the inverted reference.
    Variation,
    /// Structure-preserving edit with the config's edit condition.
    Edit {
        /// Level at and below which the chains interact.
        #[arg(long)]
        start_step: Option<usize>,
    },
    /// Regenerate the masked region only.
    Inpaint {
        /// Mask PNG; nonzero pixels are regenerated.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Export KL and reference-attention traces of a finished run.
    Trace {
        /// Run output directory or its `diagnostics` subdirectory.
        run: PathBuf,
    },
    /// Palette distance between two images.
    Metrics { first: PathBuf, second: PathBuf },
}

/// Prefixes I/O and parse errors with the file they came from.
fn at_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        RivalError::Io(io) => RivalError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        RivalError::Parse { line, message } => {
            RivalError::Parse { line, message: format!("{message} (in {})", path.display()) }
        }
        other => other,
    })
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => at_path(path, parse_config(path))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.rival.seed = seed;
    }
    if common.out.is_some() {
        cfg.out.clone_from(&common.out);
    }
    if common.chain.is_some() {
        cfg.chain.clone_from(&common.chain);
    }
    Ok(cfg)
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone().ok_or_else(|| RivalError::InvalidInput(format!("no {what} given (flag or config key)")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes_atomic(path, text.as_bytes())
}

/// Writes the tensors of a diverged step so the run can be inspected.
fn dump_divergence(err: &RivalError, out: Option<&Path>) {
    let (RivalError::NumericalDivergence(dump), Some(out)) = (err, out) else {
        return;
    };
    let dir = out.join("divergence");
    let written = fs::create_dir_all(&dir)
        .map_err(RivalError::from)
        .and_then(|_| save_latent(&dir.join("latent.rivl"), &dump.latent))
        .and_then(|_| save_latent(&dir.join("eps.rivl"), &dump.eps))
        .and_then(|_| {
            write_text(&dir.join("reason.txt"), &format!("step = {}\nreason = {}\n", dump.step, dump.reason))
        });
    match written {
        Ok(()) => log::error!("divergence dump written to {}", dir.display()),
        Err(e) => log::error!("could not write divergence dump: {e}"),
    }
}

fn invert(cfg: &RunConfig, image: Option<PathBuf>) -> Result<()> {
    let image = image.or_else(|| cfg.image.clone());
    let image = required(&image, "input image")?;
    let out = match (&cfg.out, &cfg.chain) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(RivalError::InvalidInput("no chain output directory given (--out or --chain)".into()))
        }
    };
    let schedule = cfg.build_schedule()?;
    let denoiser = cfg.build_denoiser(&schedule)?;
    let raster = at_path(&image, load_image(&image))?;
    let x0 = encode_latent(&raster, &PixelCodec::default())?;
    let pipeline = Pipeline::new(&schedule, denoiser.as_ref());
    let cond = cfg.inversion_condition();
    let chain = if cfg.store_eps { pipeline.invert(&x0, &cond) } else { pipeline.invert_without_eps(&x0, &cond) };
    let chain = chain.inspect_err(|e| dump_divergence(e, Some(&out)))?;
    save_chain(&chain, &out)?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    log::info!("wrote chain with {} steps to {}", chain.steps(), out.display());
    Ok(())
}

enum Mode {
    Variation,
    Edit(Option<usize>),
    Inpaint(Option<PathBuf>),
}

fn generate(cfg: &RunConfig, mode: Mode) -> Result<()> {
    let chain_dir = required(&cfg.chain, "chain directory")?;
    let out = required(&cfg.out, "output directory")?;
    let schedule = cfg.build_schedule()?;
    let denoiser = cfg.build_denoiser(&schedule)?;
    let chain = at_path(&chain_dir, load_chain(&chain_dir))?;
    let pipeline = Pipeline::new(&schedule, denoiser.as_ref());
    let mut rng = SeededRng::new(cfg.rival.seed);

    let mut cfg = cfg.clone();
    let result: Result<Generation> = match mode {
        Mode::Variation => pipeline.rival_generate(&chain, &cfg.condition(), &cfg.rival, &mut rng),
        Mode::Edit(start) => {
            if let Some(start) = start {
                if start > cfg.rival.steps {
                    return Err(RivalError::InvalidInput(format!(
                        "--start-step must be <= T = {}, got {start}",
                        cfg.rival.steps
                    )));
                }
                cfg.edit_start = start;
            }
            pipeline.edit_generate(&chain, &cfg.edit_condition(), &cfg.rival, cfg.edit_start)
        }
        Mode::Inpaint(mask) => {
            if mask.is_some() {
                cfg.mask = mask;
            }
            let mask_path = required(&cfg.mask, "mask")?;
            let (w, h, mask) = at_path(&mask_path, load_mask(&mask_path))?;
            let spec = InpaintSpec::new(h, w, mask)?;
            pipeline.inpaint_generate(&chain, &spec, &cfg.condition(), &cfg.rival, &mut rng)
        }
    };

    fs::create_dir_all(&out)?;
    let generation = result.inspect_err(|e| dump_divergence(e, Some(&out)))?;
    let raster = decode_latent(&generation.latent, &PixelCodec::default())?;
    save_image(&raster, &out.join("output.png"))?;
    save_diagnostics(&generation.diagnostics, &out.join("diagnostics"))?;
    write_traces(&generation, &chain, &out)?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    log::info!("wrote {}", out.join("output.png").display());
    Ok(())
}

fn write_traces(generation: &Generation, chain: &rival_core::pipeline::ChainRecord, out: &Path) -> Result<()> {
    let kl = kl_trace(&generation.diagnostics, chain)?;
    for step in &kl.flagged {
        log::warn!("KL undefined at step {step}: degenerate latent fit");
    }
    write_text(&out.join("kl.csv"), &kl.to_csv())?;
    write_text(&out.join("score.csv"), &score_trace(&generation.diagnostics).to_csv())
}

fn trace(cfg: &RunConfig, run: &Path) -> Result<()> {
    let diag_dir = if run.join("diagnostics").is_dir() { run.join("diagnostics") } else { run.to_path_buf() };
    let chain_dir = required(&cfg.chain, "chain directory")?;
    let chain = at_path(&chain_dir, load_chain(&chain_dir))?;
    let out = required(&cfg.out, "output directory")?;
    let diagnostics = at_path(&diag_dir, load_diagnostics(&diag_dir))?;
    fs::create_dir_all(&out)?;
    let generation = Generation { latent: diagnostics.latents[0].clone(), diagnostics };
    write_traces(&generation, &chain, &out)
}

fn metrics(cfg: &RunConfig, first: &Path, second: &Path) -> Result<()> {
    let palette = |path: &Path| {
        let image = at_path(path, load_image(path))?;
        kmeans_palette(&image, cfg.palette_k, &mut SeededRng::new(cfg.palette_seed), cfg.palette_iters)
    };
    let (p, q) = (palette(first)?, palette(second)?);
    println!("{:.6}", palette_distance(&p, &q)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Invert { image } => invert(&cfg, image),
        Command::Variation => generate(&cfg, Mode::Variation),
        Command::Edit { start_step } => generate(&cfg, Mode::Edit(start_step)),
        Command::Inpaint { mask } => generate(&cfg, Mode::Inpaint(mask)),
        Command::Trace { run } => trace(&cfg, &run),
        Command::Metrics { first, second } => metrics(&cfg, &first, &second),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
