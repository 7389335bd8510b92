//! Image values and the native-style image operations used by the pipeline
//! stages: uncompressed codecs, deterministic pixel/geometric transforms, a
//! fused op-chain executor and the synthetic camera-trap corpus generator.

mod chain;
mod codec;
mod error;
mod record;
pub mod synth;

pub use chain::{ChainOutput, ImageOp, ImageOpChain, ResizeMethod, DEFAULT_OFFSET, DEFAULT_SCALE};
pub use codec::{decode, encode, sniff_format, ImageFormat};
pub use error::ImageError;
pub use record::{ImageMeta, ImageRecord, PixelMode};
