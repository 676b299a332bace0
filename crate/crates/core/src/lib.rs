//! Training-free aligned generation on top of a frozen noise-prediction model.
//!
//! A reference latent is inverted with DDIM, caching attention hidden states
//! and noise predictions at every level. A second chain is then sampled while
//! attending to the cached states, with its latents normalized toward the
//! reference statistics in the early steps.

pub mod attention;
pub mod denoiser;
mod error;
pub mod io;
pub mod latent;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod schedule;

pub use error::{DivergenceDump, Result, RivalError};
pub use latent::{LatentTensor, SeededRng, Shape};
pub use schedule::{NoiseSchedule, ScheduleParams, Spacing};
