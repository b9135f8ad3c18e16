//! Distance-bounding verification over a path-loss-and-noise channel.
//!
//! The crate covers the channel model, the security bounds on the challenge
//! length, a parameter optimiser, the three verification protocols, a set of
//! attacks and a Monte Carlo harness for estimating error rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod bits;
pub mod bounds;
pub mod channel;
pub mod harness;
pub mod optimizer;
pub mod primitives;
pub mod protocol;

pub use bits::Bits;
pub use bounds::{BoundsError, BrmSpec, CloseSecurity, DbvSpec, SoundnessModel};
pub use channel::{BerPair, ChannelError, ChannelParams};
pub use optimizer::{BrmMode, OptimalBrmConfig, OptimalDfaConfig, OptimizeError};
pub use protocol::{
    Claim, PartyPlacement, ProtocolConfig, ProtocolError, ProtocolKind, SessionKeys, Transcript,
    Verdict,
};
