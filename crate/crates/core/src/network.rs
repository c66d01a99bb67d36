//! Parameters, forward pass and gradient-descent training over a
//! [`Topology`]. Disabled edges carry no weight at all, so they cannot
//! receive gradient.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::Activation;
use crate::dataset::{FeatureView, Label};
use crate::error::{Error, Result};
use crate::topology::{EdgeKey, Node, NeuronId, Topology};

pub const INIT_WEIGHT_RANGE: f64 = 0.5;
pub const INIT_BIAS: f64 = 0.1;

/// Weights keyed by enabled edge and biases keyed by neuron, both kept in
/// canonical sorted order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "ParamsRepr", into = "ParamsRepr"))]
pub struct Params {
    weights: Vec<(EdgeKey, f64)>,
    biases: Vec<(NeuronId, f64)>,
}

impl Params {
    /// Seeded initialization: weights uniform in `[-0.5, 0.5]`, biases `0.1`.
    pub fn init(topology: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = topology
            .enabled_edges()
            .map(|k| (k, rng.random_range(-INIT_WEIGHT_RANGE..=INIT_WEIGHT_RANGE)))
            .collect();
        let biases = topology.neurons().map(|n| (n, INIT_BIAS)).collect();
        Self { weights, biases }
    }

    /// Builds parameters from explicit entries; order does not matter.
    pub fn from_entries(
        weights: impl IntoIterator<Item = (EdgeKey, f64)>,
        biases: impl IntoIterator<Item = (NeuronId, f64)>,
    ) -> Result<Self> {
        let w: BTreeMap<_, _> = weights.into_iter().collect();
        let b: BTreeMap<_, _> = biases.into_iter().collect();
        let p = Self { weights: w.into_iter().collect(), biases: b.into_iter().collect() };
        if let Some(bad) = p.weights.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::ParamMismatch(format!("weight of {} is not finite", bad.0)));
        }
        if let Some(bad) = p.biases.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::ParamMismatch(format!("bias of {} is not finite", bad.0)));
        }
        Ok(p)
    }

    /// Keeps every value whose key survives in `topology`; anything new gets
    /// the value `init(topology, seed)` would give it.
    pub fn reconcile(&self, topology: &Topology, seed: u64) -> Self {
        let mut fresh = Self::init(topology, seed);
        for (k, v) in &mut fresh.weights {
            if let Some(old) = self.weight(k) {
                *v = old;
            }
        }
        for (n, v) in &mut fresh.biases {
            if let Some(old) = self.bias(*n) {
                *v = old;
            }
        }
        fresh
    }

    pub fn weight(&self, key: &EdgeKey) -> Option<f64> {
        self.weights.binary_search_by(|(k, _)| k.cmp(key)).ok().map(|i| self.weights[i].1)
    }

    pub fn bias(&self, neuron: NeuronId) -> Option<f64> {
        self.biases.binary_search_by(|(n, _)| n.cmp(&neuron)).ok().map(|i| self.biases[i].1)
    }

    pub fn set_weight(&mut self, key: &EdgeKey, value: f64) -> Result<()> {
        let i = self.weights.binary_search_by(|(k, _)| k.cmp(key)).map_err(|_| Error::UnknownEdge(*key))?;
        self.weights[i].1 = value;
        Ok(())
    }

    pub fn set_bias(&mut self, neuron: NeuronId, value: f64) -> Result<()> {
        let i = self
            .biases
            .binary_search_by(|(n, _)| n.cmp(&neuron))
            .map_err(|_| Error::UnknownNeuron(neuron))?;
        self.biases[i].1 = value;
        Ok(())
    }

    pub fn weights(&self) -> &[(EdgeKey, f64)] {
        &self.weights
    }

    pub fn biases(&self) -> &[(NeuronId, f64)] {
        &self.biases
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matches(&self, topology: &Topology) -> Result<()> {
        let keys_match = self.weights.len() == topology.enabled_edge_count()
            && self.weights.iter().map(|(k, _)| *k).eq(topology.enabled_edges());
        if !keys_match {
            return Err(Error::ParamMismatch("weights must cover exactly the enabled edges".into()));
        }
        let neurons_match = self.biases.len() == topology.neuron_count()
            && self.biases.iter().map(|(n, _)| *n).eq(topology.neurons());
        if !neurons_match {
            return Err(Error::ParamMismatch("biases must cover exactly the neurons".into()));
        }
        Ok(())
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct ParamsRepr {
    weights: Vec<(EdgeKey, f64)>,
    biases: Vec<(NeuronId, f64)>,
}

#[cfg(feature = "serde")]
impl TryFrom<ParamsRepr> for Params {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let (nw, nb) = (r.weights.len(), r.biases.len());
        let p = Params::from_entries(r.weights, r.biases)?;
        if p.weights.len() != nw || p.biases.len() != nb {
            return Err(Error::ParamMismatch("duplicate parameter keys".into()));
        }
        Ok(p)
    }
}

#[cfg(feature = "serde")]
impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        Self { weights: p.weights, biases: p.biases }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regularization {
    #[default]
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub regularization: Regularization,
    pub regularization_rate: f64,
    pub seed: u64,
    /// Epochs between two published metric frames.
    pub epochs_per_tick: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            batch_size: 10,
            regularization: Regularization::None,
            regularization_rate: 0.0,
            seed: 0,
            epochs_per_tick: 10,
        }
    }
}

pub const MAX_LEARNING_RATE: f64 = 10.0;

impl TrainingConfig {
    /// `train_len`, when known, bounds the batch size.
    pub fn validate(&self, train_len: Option<usize>) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= MAX_LEARNING_RATE) {
            return Err(Error::Config(format!(
                "learning_rate must be in (0, {MAX_LEARNING_RATE}], got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let Some(n) = train_len {
            if self.batch_size > n {
                return Err(Error::Config(format!(
                    "batch_size {} exceeds training set size {n}",
                    self.batch_size
                )));
            }
        }
        if !(self.regularization_rate >= 0.0 && self.regularization_rate.is_finite()) {
            return Err(Error::Config("regularization_rate must be finite and >= 0".into()));
        }
        if self.epochs_per_tick == 0 {
            return Err(Error::Config("epochs_per_tick must be at least 1".into()));
        }
        Ok(())
    }

    fn penalty(&self, w: f64) -> f64 {
        let rate = self.regularization_rate;
        match self.regularization {
            Regularization::None => 0.0,
            Regularization::L1 => {
                if w > 0.0 {
                    rate
                } else if w < 0.0 {
                    -rate
                } else {
                    0.0
                }
            }
            Regularization::L2 => rate * w,
        }
    }
}

/// One labelled input row.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub label: Label,
}

/// Gradient of the mean batch loss, aligned with [`Params::weights`] and
/// [`Params::biases`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub prediction: f64,
    /// Post-activation output of every neuron, in [`Topology::neurons`] order.
    pub activations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Link {
    source: usize,
    weight: usize,
}

/// Flat evaluation order compiled from a topology. Slots `0..inputs` hold
/// the features, slot `inputs + k` the k-th neuron.
#[derive(Debug, Clone, PartialEq)]
struct Plan {
    inputs: usize,
    activation: Vec<Activation>,
    start: Vec<usize>,
    links: Vec<Link>,
}

impl Plan {
    fn compile(topology: &Topology) -> Self {
        let features = topology.features();
        let inputs = features.len();
        let mut layer_offset = vec![0usize; topology.output_layer() + 2];
        for l in 1..=topology.output_layer() {
            layer_offset[l + 1] = layer_offset[l] + topology.width(l);
        }
        let slot = |n: Node| match n {
            Node::Input(f) => features.column_of(f).expect("validated source"),
            Node::Neuron(id) => inputs + layer_offset[id.layer] + id.index,
        };
        let neurons = topology.neuron_count();
        let mut by_target: Vec<(usize, Link)> = topology
            .enabled_edges()
            .enumerate()
            .map(|(w, k)| (slot(Node::Neuron(k.target)) - inputs, Link { source: slot(k.source), weight: w }))
            .collect();
        by_target.sort_by_key(|(t, _)| *t);
        let mut start = vec![0usize; neurons + 1];
        for (t, _) in &by_target {
            start[t + 1] += 1;
        }
        for k in 0..neurons {
            start[k + 1] += start[k];
        }
        Self {
            inputs,
            activation: topology.neurons().map(|n| topology.activation_of(n.layer)).collect(),
            start,
            links: by_target.into_iter().map(|(_, l)| l).collect(),
        }
    }

    fn neurons(&self) -> usize {
        self.activation.len()
    }

    /// Fills `values` (inputs then neuron outputs) and `pre` (pre-activations).
    fn run(&self, params: &Params, x: &[f64], values: &mut [f64], pre: &mut [f64]) {
        values[..self.inputs].copy_from_slice(x);
        for k in 0..self.neurons() {
            let mut z = params.biases[k].1;
            for l in &self.links[self.start[k]..self.start[k + 1]] {
                z += params.weights[l.weight].1 * values[l.source];
            }
            pre[k] = z;
            values[self.inputs + k] = self.activation[k].apply(z);
        }
    }
}

/// Topology plus its trainable parameters and the number of updates applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    topology: Topology,
    params: Params,
    step: u64,
    plan: Plan,
}

impl NetworkState {
    pub fn new(topology: Topology, seed: u64) -> Self {
        let params = Params::init(&topology, seed);
        let plan = Plan::compile(&topology);
        Self { topology, params, step: 0, plan }
    }

    pub fn from_parts(topology: Topology, params: Params, step: u64) -> Result<Self> {
        topology.validate()?;
        params.matches(&topology)?;
        let plan = Plan::compile(&topology);
        Ok(Self { topology, params, step, plan })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Number of `train_step` calls applied since initialization.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn into_parts(self) -> (Topology, Params, u64) {
        (self.topology, self.params, self.step)
    }

    /// Swaps in a new topology, keeping the parameters of surviving edges
    /// and neurons and seeding the rest from `seed`.
    pub fn retopologize(&mut self, topology: Topology, seed: u64) {
        self.params = self.params.reconcile(&topology, seed);
        self.plan = Plan::compile(&topology);
        self.topology = topology;
    }

    pub fn set_params(&mut self, params: Params) -> Result<()> {
        params.matches(&self.topology)?;
        self.params = params;
        Ok(())
    }

    /// Re-initializes every parameter from `seed` and zeroes the step counter.
    pub fn reset(&mut self, seed: u64) {
        self.params = Params::init(&self.topology, seed);
        self.step = 0;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.plan.inputs {
            return Err(Error::InputShape { expected: self.plan.inputs, got: x.len() });
        }
        Ok(())
    }

    fn buffers(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.plan.inputs + self.plan.neurons()], vec![0.0; self.plan.neurons()])
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        let (mut values, mut pre) = self.buffers();
        self.plan.run(&self.params, x, &mut values, &mut pre);
        let activations = values.split_off(self.plan.inputs);
        Ok(Forward { prediction: *activations.last().expect("output neuron"), activations })
    }

    /// Predictions for every row of `view`.
    pub fn predict(&self, view: &FeatureView) -> Result<Vec<f64>> {
        self.check_input(view.row(0))?;
        let (mut values, mut pre) = self.buffers();
        Ok((0..view.len())
            .map(|i| {
                self.plan.run(&self.params, view.row(i), &mut values, &mut pre);
                values[values.len() - 1]
            })
            .collect())
    }

    /// Mean of `½(prediction − y)²` over the batch.
    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (mut values, mut pre) = self.buffers();
        let mut total = 0.0;
        for s in batch {
            self.check_input(s.x)?;
            self.plan.run(&self.params, s.x, &mut values, &mut pre);
            let err = values[values.len() - 1] - s.label.value();
            total += 0.5 * err * err;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean batch loss and its exact gradient by reverse accumulation.
    pub fn gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let plan = &self.plan;
        let n = plan.neurons();
        let (mut values, mut pre) = self.buffers();
        let mut upstream = vec![0.0; plan.inputs + n];
        let mut grad = Gradients { weights: vec![0.0; self.params.weights.len()], biases: vec![0.0; n] };
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for s in batch {
            self.check_input(s.x)?;
            plan.run(&self.params, s.x, &mut values, &mut pre);
            let err = values[plan.inputs + n - 1] - s.label.value();
            total += 0.5 * err * err;
            upstream.iter_mut().for_each(|g| *g = 0.0);
            upstream[plan.inputs + n - 1] = err * scale;
            for k in (0..n).rev() {
                let out = values[plan.inputs + k];
                let delta = upstream[plan.inputs + k] * plan.activation[k].derivative(pre[k], out);
                if delta == 0.0 {
                    continue;
                }
                grad.biases[k] += delta;
                for l in &plan.links[plan.start[k]..plan.start[k + 1]] {
                    grad.weights[l.weight] += delta * values[l.source];
                    upstream[l.source] += delta * self.params.weights[l.weight].1;
                }
            }
        }
        Ok((total * scale, grad))
    }

    /// One gradient-descent update on `batch`; returns the batch loss before
    /// the update. On divergence the state is left unchanged.
    pub fn train_step(&mut self, batch: &[Sample<'_>], config: &TrainingConfig) -> Result<f64> {
        let (loss, mut grad) = self.gradient(batch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: self.step + 1, what: "loss" });
        }
        let lr = config.learning_rate;
        for (g, (_, w)) in grad.weights.iter_mut().zip(&self.params.weights) {
            *g = w - lr * (*g + config.penalty(*w));
        }
        for (g, (_, b)) in grad.biases.iter_mut().zip(&self.params.biases) {
            *g = b - lr * *g;
        }
        if grad.weights.iter().chain(&grad.biases).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: self.step + 1, what: "parameter" });
        }
        for (new, (_, w)) in grad.weights.into_iter().zip(&mut self.params.weights) {
            *w = new;
        }
        for (new, (_, b)) in grad.biases.into_iter().zip(&mut self.params.biases) {
            *b = new;
        }
        self.step += 1;
        Ok(loss)
    }

    /// One pass over `view` in row order, `batch_size` rows per update.
    /// Returns the mean of the batch losses.
    pub fn train_epoch(&mut self, view: &FeatureView, config: &TrainingConfig) -> Result<f64> {
        if view.is_empty() {
            return Err(Error::EmptyDataset);
        }
        config.validate(None)?;
        let mut batch = Vec::with_capacity(config.batch_size);
        let mut sum = 0.0;
        let mut batches = 0usize;
        let mut row = 0;
        while row < view.len() {
            let end = (row + config.batch_size).min(view.len());
            batch.clear();
            batch.extend((row..end).map(|i| Sample { x: view.row(i), label: view.label(i) }));
            sum += self.train_step(&batch, config)?;
            batches += 1;
            row = end;
        }
        Ok(sum / batches as f64)
    }
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::*;

    #[derive(serde::Serialize, serde::Deserialize)]
    struct Repr {
        topology: Topology,
        params: Params,
        step: u64,
    }

    impl serde::Serialize for NetworkState {
        fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
            Repr { topology: self.topology.clone(), params: self.params.clone(), step: self.step }.serialize(s)
        }
    }

    impl<'de> serde::Deserialize<'de> for NetworkState {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
            let r = Repr::deserialize(d)?;
            NetworkState::from_parts(r.topology, r.params, r.step).map_err(serde::de::Error::custom)
        }
    }
}
