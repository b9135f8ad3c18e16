//! One-time MAC and averaging sampler.

pub mod mac;
pub mod sampler;

pub use mac::{encode_claim, mac_sign, mac_verify, MacError, MacKey, Tag};
pub use sampler::{sample_indices, sampler_guarantee, IndexSet, SamplerError, SamplerKey};
