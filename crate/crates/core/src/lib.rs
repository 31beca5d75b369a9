//! Class-count spatial embeddings, landmark contextual embeddings, class-aware
//! homophily analysis and a small MLP harness for node classification and
//! link prediction.

pub mod contextual;
pub mod error;
pub mod graph;
pub mod homophily;
pub mod io;
pub mod mlp;
pub mod pipeline;
pub mod recipe;
pub mod rng;
pub mod spatial;
pub mod split;
pub mod table;

pub use error::{CcError, Result};
pub use graph::{k_hop_neighborhood, neighborhood, Direction, Graph, HopMode, NodeId};
pub use split::{stratified_split, Role, SplitAssignment, SplitFractions};
pub use table::{FeatureKind, NodeTable};
