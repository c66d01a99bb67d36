//! Capacity measurements: Memory Equivalent Capacity of a topology, the
//! expected capacity demand of a labelled dataset, the generalization ratio
//! and the class-balance bias indicator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{FeatureView, Label};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::topology::{Node, Topology};

/// Memory Equivalent Capacity in bits, total and per layer (output last).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mec {
    pub bits: u64,
    pub per_layer: Vec<u64>,
}

/// Per-layer capacity rule.
///
/// The first neuron layer stores one bit per parameter (incoming weights plus
/// biases). A later layer can store no more than the number of distinct
/// neurons feeding it, since every neuron output carries at most one bit; only
/// its weights from input features, which are continuous, escape that cap:
///
/// `C_l = min(R_l^neuron, B_{l-1}) + R_l^input`
///
/// Disabled edges are ignored everywhere.
pub fn mec(topology: &Topology) -> Mec {
    let per_layer: Vec<u64> = (1..=topology.output_layer())
        .map(|layer| {
            let mut from_inputs = 0u64;
            let mut from_neurons = topology.width(layer) as u64;
            let mut feeders = BTreeSet::new();
            for e in topology.enabled_edges().filter(|e| e.target.layer == layer) {
                match e.source {
                    Node::Input(_) => from_inputs += 1,
                    Node::Neuron(n) => {
                        from_neurons += 1;
                        feeders.insert(n);
                    }
                }
            }
            if layer == 1 {
                from_neurons + from_inputs
            } else {
                from_neurons.min(feeders.len() as u64) + from_inputs
            }
        })
        .collect();
    Mec { bits: per_layer.iter().sum(), per_layer }
}

/// Datasets above this many rows are subsampled for the demand estimate.
pub const DEMAND_ROW_LIMIT: usize = 100_000;
pub const DEMAND_SUBSAMPLE_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DemandTrace {
    /// Number of selected features `d`.
    pub dimension: usize,
    /// Sum of each (used) row's features, in row order.
    pub row_sums: Vec<f64>,
    /// Labels after sorting rows by sum, negatives first on ties.
    pub sorted_labels: Vec<Label>,
    /// Adjacent label changes `t` in `sorted_labels`.
    pub transitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Demand {
    pub bits: u64,
    /// True when computed on a subsample.
    pub estimated: bool,
    pub trace: DemandTrace,
}

/// Expected capacity demand: `t * (d + 1)` bits, one threshold unit of `d`
/// weights and a bias for every label change along the sum-sorted rows.
pub fn capacity_demand(view: &FeatureView) -> Result<Demand> {
    capacity_demand_with(view, DEMAND_ROW_LIMIT, DEMAND_SUBSAMPLE_SEED)
}

pub fn capacity_demand_with(view: &FeatureView, row_limit: usize, seed: u64) -> Result<Demand> {
    if view.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let estimated = view.len() > row_limit;
    let rows: Vec<usize> = if estimated {
        let mut idx = rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), view.len(), row_limit)
            .into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..view.len()).collect()
    };
    // adding 0.0 turns -0.0 into 0.0 so equal sums tie under total_cmp
    let row_sums: Vec<f64> = rows.iter().map(|&i| view.row(i).iter().sum::<f64>() + 0.0).collect();
    let mut order: Vec<(f64, Label)> = row_sums.iter().zip(&rows).map(|(&s, &i)| (s, view.label(i))).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sorted_labels: Vec<Label> = order.into_iter().map(|(_, l)| l).collect();
    let transitions = sorted_labels.windows(2).filter(|w| w[0] != w[1]).count();
    let dimension = view.dim();
    Ok(Demand {
        bits: transitions as u64 * (dimension as u64 + 1),
        estimated,
        trace: DemandTrace { dimension, row_sums, sorted_labels, transitions },
    })
}

/// Correctly predicted instances per bit of capacity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Generalization(f64);

impl Generalization {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Two decimals, as displayed.
    pub fn rounded(self) -> f64 {
        libm::round(self.0 * 100.0) / 100.0
    }

    /// `G > 1`; at or below 1 the learner has only memorized.
    pub fn generalizes(self) -> bool {
        self.0 > 1.0
    }
}

pub fn generalization_ratio(correct_count: u64, mec_bits: u64) -> Result<Generalization> {
    if mec_bits == 0 {
        return Err(Error::UndefinedCapacity);
    }
    Ok(Generalization(correct_count as f64 / mec_bits as f64))
}

/// Fraction of positive labels.
pub fn class_balance(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pos = labels.iter().filter(|l| **l == Label::Positive).count();
    Ok(pos as f64 / labels.len() as f64)
}

/// Largest tolerated gap between per-class accuracies, in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct BiasThreshold(f64);

impl BiasThreshold {
    pub const DEFAULT: BiasThreshold = BiasThreshold(0.1);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Config(format!("bias threshold must be in (0, 1), got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for BiasThreshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for BiasThreshold {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BiasThreshold> for f64 {
    fn from(t: BiasThreshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasIndicator {
    pub flagged: bool,
    pub gap: f64,
    pub detail: String,
}

pub fn bias_indicator(report: &EvalReport, balance: f64, threshold: BiasThreshold) -> BiasIndicator {
    let gap = libm::fabs(report.acc_positive - report.acc_negative);
    let flagged = gap > threshold.value();
    let mut detail = format!(
        "accuracy +1: {:.3}, -1: {:.3} (gap {:.3}, threshold {:.3}); {:.1}% of labels are +1",
        report.acc_positive,
        report.acc_negative,
        gap,
        threshold.value(),
        balance * 100.0
    );
    if !report.positive_defined() || !report.negative_defined() {
        detail.push_str("; one class has no instances, its accuracy is undefined");
    }
    BiasIndicator { flagged, gap, detail }
}

/// Every measurement shown next to a network.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementReport {
    pub mec_bits: u64,
    pub mec_per_layer: Vec<u64>,
    pub demand_bits: u64,
    pub demand_estimated: bool,
    pub generalization: f64,
    pub balance: f64,
    pub bias_flagged: bool,
    pub acc_positive: f64,
    pub acc_negative: f64,
}

impl MeasurementReport {
    /// `eval` supplies the correct count (usually on held-out data);
    /// `balance` is the positive fraction of the whole dataset.
    pub fn new(mec: &Mec, demand: &Demand, eval: &EvalReport, balance: f64, threshold: BiasThreshold) -> Result<Self> {
        let g = generalization_ratio(eval.correct_count, mec.bits)?;
        let bias = bias_indicator(eval, balance, threshold);
        Ok(Self {
            mec_bits: mec.bits,
            mec_per_layer: mec.per_layer.clone(),
            demand_bits: demand.bits,
            demand_estimated: demand.estimated,
            generalization: g.value(),
            balance,
            bias_flagged: bias.flagged,
            acc_positive: eval.acc_positive,
            acc_negative: eval.acc_negative,
        })
    }
}
