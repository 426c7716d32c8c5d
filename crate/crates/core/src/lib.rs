//! Memory-efficient state storage for explicit-state exploration of chemical
//! reaction networks.
//!
//! A [`PrefixTree`] shares common prefixes of stored state vectors and is
//! compared against an open-addressing [`HashBaseline`]. The order in which
//! species are laid out along tree paths is chosen from BMC-derived bounds
//! ([`ordering_from_bounds`]).

pub mod bmc;
pub mod explorer;
pub mod model;
pub mod ordering;
pub mod prefix_tree;
pub mod store;

pub use explorer::{explore, ExplorationConfig, ExplorationResult, ExploreError, Mode};
pub use model::{parse_model, Comparator, ModelError, Reaction, ReactionModel, State, Target};
pub use ordering::{
    oracle_ordering, ordering_from_bounds, OrderingError, Provenance, VariableOrdering,
};
pub use prefix_tree::PrefixTree;
pub use store::{
    new_store, ByteModel, HashBaseline, StateStore, StoreError, StoreKind, StoreStats,
};
