//! The model architecture: relational graph convolution encoder,
//! per-type variational latent heads, and the DEDICOM, bilinear, and
//! MLP decoders.

pub mod arch;
pub mod config;
pub mod forward;

pub use arch::{Architecture, DecodeKind};
pub use config::{DecoderKind, ModelMode, TaskKind, TrainConfig};
pub use forward::{
    build_posterior, encode, Posterior,
    build_latents, kl_to_standard_normal, link_probability, reparameterize, score_pairs,
    ForwardInput, Latents, ParamBinder, RelationAdj, TypeLatent,
};
