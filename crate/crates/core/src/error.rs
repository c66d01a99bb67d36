use alloc::string::String;

use crate::topology::{EdgeKey, NeuronId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A structural rule of the network graph was violated.
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("edge {0} does not exist")]
    UnknownEdge(EdgeKey),

    #[error("edge {0} already exists")]
    DuplicateEdge(EdgeKey),

    #[error("neuron {0} does not exist")]
    UnknownNeuron(NeuronId),

    #[error("parameters do not match topology: {0}")]
    ParamMismatch(String),

    #[error("input has {got} features, network expects {expected}")]
    InputShape { expected: usize, got: usize },

    #[error("training diverged at step {step}: non-finite {what}")]
    Divergence { step: u64, what: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("network capacity is zero; generalization ratio undefined")]
    UndefinedCapacity,
}
