//! Inversion of a reference latent and the aligned generation chain.

mod config;
mod generate;
mod invert;
mod persist;

pub use config::{InitMode, InversionCondition, RivalConfig, Toggles};
pub use generate::{
    aligned_eps, cfg_eps, init_generation_latent, Generation, GenerationDiagnostics, InpaintSpec, Pipeline, StepRecord,
    DEFAULT_EDIT_START,
};
pub use invert::ChainRecord;
pub use persist::{load_chain, load_diagnostics, save_chain, save_diagnostics, ChainManifest};
