//! Labeled multipartite states, channels and seeded random generation.

pub mod channel;
pub mod layout;
pub mod random;
pub mod state;

pub use channel::{apply_channel, QuantumChannel};
pub use layout::{System, SystemLayout};
pub use random::{random_density, random_isometry, random_pure, random_unitary, RngSeed};
pub use state::{
    align_layout, align_purifications, canonical_spectrum, fidelity, partial_trace, permute_systems, purify, reduce_to,
    tensor_product, trace_distance, validate_state, Corrections, DensityMatrix, PureState,
};
