//! Inference on the latent history of a randomly grown tree observed as a
//! single unlabeled snapshot.

pub mod dsu;
pub mod experiments;
pub mod fenwick;
pub mod growth;
pub mod logmath;
pub mod oracle;
pub mod posterior;
pub mod rng;
pub mod root;
pub mod sampling;
pub mod tree;

pub use growth::{AttachmentKernel, GrowthError, GrownTree};
pub use tree::{LabeledTree, TreeError};
