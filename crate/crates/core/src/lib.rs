//! Scene-graph canonicalization under learned logical-equivalence rules
//! (transitivity, converse relations) and a weighted graph-convolutional
//! layout predictor trained on top of the canonicalized graphs.

pub mod canon;
pub mod chart;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod jsonl;
pub mod neural;
pub mod render;
pub mod seed;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use graph::{Digraph, EdgeKey, Layout, SceneGraph, SceneObject, WeightedDigraph, WeightedSceneGraph};
pub use vocab::RelationVocab;
