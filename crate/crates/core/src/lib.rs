//! Engine for small dense binary classifiers and the capacity measurements
//! that go with them.
//!
//! - [`topology`]: layered graph with maskable links and skip connections
//! - [`network`]: parameters, forward pass, backpropagation, SGD
//! - [`dataset`]: synthetic and uploaded 2-D data, feature mapping, splits
//! - [`measurements`]: MEC, capacity demand, generalization ratio, bias
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod activation;
pub mod dataset;
mod error;
pub mod eval;
pub mod features;
pub mod measurements;
pub mod network;
pub mod topology;

pub use activation::Activation;
pub use dataset::{apply_features, generate, split, DataSource, Dataset, FeatureView, Label, RawPoint};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use features::{Feature, FeatureSelection};
pub use measurements::{
    bias_indicator, capacity_demand, class_balance, generalization_ratio, mec, BiasThreshold, Demand,
    Generalization, MeasurementReport, Mec,
};
pub use network::{NetworkState, Params, Regularization, Sample, TrainingConfig};
pub use topology::{Edge, EdgeKey, Edit, Node, NeuronId, Topology};
