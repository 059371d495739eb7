//! Proxy tokenizer with the two-layer (I, P) token shape, adaptive
//! resolution scaling, and GoP boundary smoothing.

mod blend;
mod dct;
mod scale;
mod tokens;

pub use blend::{blend_boundary, blend_weight};
pub use dct::{decode_gop, encode_gop, forward_block, inverse_block, temporal_mean, zigzag, DctTokenizer, Tokenizer};
pub use scale::{
    downscale_frame, downscale_gop, scaled_dims, upscale_frame, upscale_gop, BilinearUpscaler, Upscaler,
};
pub use tokens::{CodecConfig, TokenKind, TokenMatrix, SPATIAL_FACTOR, TEMPORAL_FACTOR};
