//! Diagnostics computable without external models: palette distance and
//! per-step chain traces.

mod hungarian;
mod palette;
mod trace;

pub use hungarian::min_cost_assignment;
pub use palette::{
    kmeans_palette, kmeans_pp_init, palette_distance, Palette, DEFAULT_PALETTE_ITERS, DEFAULT_PALETTE_SIZE,
};
pub use trace::{kl_trace, score_trace, TraceSeries, REPLACE_SCORE};
