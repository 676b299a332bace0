//! Latent tensors, seeded randomness and the elementary alignment transforms.

mod align;
mod codec;
mod rng;
pub(crate) mod sum;
mod tensor;

pub use align::{
    adain, kl_gaussian_fit, sample_adaptive_gaussian, sample_standard_gaussian, shuffle_positions, shuffle_spatial,
    stats, LatentStats,
};
pub use codec::{load_latent, read_latent, save_latent, write_latent, LATENT_MAGIC, LATENT_VERSION};
pub use rng::SeededRng;
pub use tensor::{LatentTensor, Shape};
