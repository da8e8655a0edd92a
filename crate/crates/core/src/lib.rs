//! Detection and disruption pipeline for coordinated influence content.
//!
//! Stages: anonymized corpora and a pluggable social-graph [`source`],
//! [`snowball`] sampling, a weighted interaction [`graph`], Louvain
//! [`community`] detection, betweenness [`centrality`] and liminal nodes,
//! stratagem labels, a small convolutional text [`classifier`] built on the
//! [`neural`] kernels, and [`detection`] reports that rank flagged tweets by
//! how likely they are to leave their echo chamber.

pub mod centrality;
pub mod classifier;
pub mod community;
pub mod config;
pub mod corpus;
pub mod detection;
pub mod error;
pub mod graph;
pub mod neural;
pub mod parallel;
pub mod snowball;
pub mod source;
pub mod stratagem;
pub mod textenc;
pub mod workspace;

pub use error::{Error, Result};
