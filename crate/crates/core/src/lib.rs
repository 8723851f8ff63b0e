//! Detection of bullying and aggressive behavior on Twitter-like data.
//!
//! The crate covers the whole pipeline: keyword-driven corpus collection, spam
//! removal, sessionization and crowd labeling, user/text/network features, graph
//! analytics, statistical comparisons, topic modeling, classification and
//! account-status monitoring. A synthetic generator produces self-consistent data
//! for every stage.

pub mod corpus;
pub mod exec;
pub mod features;
pub mod graph;
pub mod label;
pub mod lexicon;
pub mod ml;
pub mod pipeline;
pub mod preprocess;
pub mod sessions;
pub mod stats;
pub mod status;
pub mod synth;
pub mod topics;

pub use exec::Execution;
pub use label::Label;
