//! Layered network graph: selected input features, hidden layer widths, and a
//! set of weighted links that may be disabled or skip over layers.
//!
//! Layer 0 holds the input features, layers `1..=hidden.len()` the hidden
//! neurons and layer `hidden.len() + 1` the single output neuron. Every edge
//! points from a lower layer to a strictly higher one, so the graph is acyclic
//! by construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureSelection};

pub const MAX_HIDDEN_LAYERS: usize = 6;
pub const MAX_LAYER_WIDTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub const fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n({},{})", self.layer, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Node {
    Input(Feature),
    Neuron(NeuronId),
}

impl Node {
    pub const fn neuron(layer: usize, index: usize) -> Self {
        Self::Neuron(NeuronId::new(layer, index))
    }

    pub fn layer(self) -> usize {
        match self {
            Self::Input(_) => 0,
            Self::Neuron(n) => n.layer,
        }
    }
}

impl From<Feature> for Node {
    fn from(f: Feature) -> Self {
        Self::Input(f)
    }
}

impl From<NeuronId> for Node {
    fn from(n: NeuronId) -> Self {
        Self::Neuron(n)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(feat) => write!(f, "{feat}"),
            Self::Neuron(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeKey {
    pub source: Node,
    pub target: NeuronId,
}

impl EdgeKey {
    pub fn new(source: impl Into<Node>, target: NeuronId) -> Self {
        Self { source: source.into(), target }
    }

    /// True when the edge jumps over at least one layer.
    pub fn is_skip(&self) -> bool {
        self.target.layer > self.source.layer() + 1
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub source: Node,
    pub target: NeuronId,
    #[cfg_attr(feature = "serde", serde(default = "enabled_default"))]
    pub enabled: bool,
}

#[cfg(feature = "serde")]
fn enabled_default() -> bool {
    true
}

impl Edge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey { source: self.source, target: self.target }
    }
}

/// A structural change requested by the user.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "op", rename_all = "snake_case"))]
pub enum Edit {
    /// Append a fully connected hidden layer just before the output.
    AddLayer { width: usize },
    /// Drop a hidden layer and reconnect its neighbours.
    RemoveLayer { layer: usize },
    SetWidth { layer: usize, width: usize },
    ToggleEdge { source: Node, target: NeuronId },
    /// Add an enabled edge between any lower node and a higher neuron.
    AddSkipEdge { source: Node, target: NeuronId },
    RemoveEdge { source: Node, target: NeuronId },
    SetActivation { activation: Activation },
    SetFeatures { features: FeatureSelection },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "TopologyRepr", into = "TopologyRepr"))]
pub struct Topology {
    features: FeatureSelection,
    hidden: Vec<usize>,
    edges: BTreeMap<EdgeKey, bool>,
    activation: Activation,
    output_activation: Activation,
}

impl Topology {
    /// Fully connected network between adjacent layers, all edges enabled.
    pub fn new(features: FeatureSelection, hidden: &[usize], activation: Activation) -> Result<Self> {
        let mut t = Self {
            features,
            hidden: hidden.to_vec(),
            edges: BTreeMap::new(),
            activation,
            output_activation: Activation::Tanh,
        };
        t.check_shape()?;
        for layer in 1..=t.output_layer() {
            t.connect_adjacent(layer);
        }
        Ok(t)
    }

    /// Builds a topology from an explicit edge list.
    pub fn from_edges(
        features: FeatureSelection,
        hidden: &[usize],
        activation: Activation,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in edges {
            if map.insert(e.key(), e.enabled).is_some() {
                return Err(Error::DuplicateEdge(e.key()));
            }
        }
        let t = Self {
            features,
            hidden: hidden.to_vec(),
            edges: map,
            activation,
            output_activation: Activation::Tanh,
        };
        t.validate()?;
        Ok(t)
    }

    /// Replaces the output activation (tanh by default).
    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn features(&self) -> FeatureSelection {
        self.features
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn activation_of(&self, layer: usize) -> Activation {
        if layer == self.output_layer() {
            self.output_activation
        } else {
            self.activation
        }
    }

    pub fn output_layer(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn output(&self) -> NeuronId {
        NeuronId::new(self.output_layer(), 0)
    }

    /// Number of nodes in `layer`; layer 0 is the input layer.
    pub fn width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.features.len()
        } else if layer <= self.hidden.len() {
            self.hidden[layer - 1]
        } else if layer == self.output_layer() {
            1
        } else {
            0
        }
    }

    /// All neurons, ordered by layer then index.
    pub fn neurons(&self) -> impl Iterator<Item = NeuronId> + '_ {
        (1..=self.output_layer())
            .flat_map(move |l| (0..self.width(l)).map(move |i| NeuronId::new(l, i)))
    }

    pub fn neuron_count(&self) -> usize {
        self.hidden.iter().sum::<usize>() + 1
    }

    pub fn contains_node(&self, node: Node) -> bool {
        match node {
            Node::Input(f) => self.features.contains(f),
            Node::Neuron(n) => n.layer >= 1 && n.index < self.width(n.layer),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .map(|(k, &enabled)| Edge { source: k.source, target: k.target, enabled })
    }

    /// Enabled edges in canonical (sorted) order.
    pub fn enabled_edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.iter().filter(|(_, &on)| on).map(|(k, _)| *k)
    }

    /// `Some(enabled)` if the edge exists.
    pub fn edge_state(&self, key: &EdgeKey) -> Option<bool> {
        self.edges.get(key).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn enabled_edge_count(&self) -> usize {
        self.edges.values().filter(|on| **on).count()
    }

    /// Trainable parameters: one weight per enabled edge plus one bias per neuron.
    pub fn parameter_count(&self) -> usize {
        self.enabled_edge_count() + self.neuron_count()
    }

    fn layer_nodes(&self, layer: usize) -> Vec<Node> {
        if layer == 0 {
            self.features.iter().map(Node::Input).collect()
        } else {
            (0..self.width(layer)).map(|i| Node::neuron(layer, i)).collect()
        }
    }

    /// Inserts every missing edge from `layer - 1` into `layer` as enabled.
    fn connect_adjacent(&mut self, layer: usize) {
        let sources = self.layer_nodes(layer - 1);
        for i in 0..self.width(layer) {
            for &s in &sources {
                self.edges.entry(EdgeKey::new(s, NeuronId::new(layer, i))).or_insert(true);
            }
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.hidden.len() > MAX_HIDDEN_LAYERS {
            return Err(Error::Topology(format!(
                "{} hidden layers exceeds the maximum of {MAX_HIDDEN_LAYERS}",
                self.hidden.len()
            )));
        }
        for (i, &w) in self.hidden.iter().enumerate() {
            if w == 0 || w > MAX_LAYER_WIDTH {
                return Err(Error::Topology(format!(
                    "hidden layer {} has width {w}; widths must be in 1..={MAX_LAYER_WIDTH}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn check_edge(&self, key: &EdgeKey) -> Result<()> {
        if !self.contains_node(key.source) {
            return Err(Error::Topology(format!("edge {key}: source {} does not exist", key.source)));
        }
        if !self.contains_node(Node::Neuron(key.target)) {
            return Err(Error::UnknownNeuron(key.target));
        }
        if key.target.layer <= key.source.layer() {
            return Err(Error::Topology(format!(
                "edge {key} must point to a later layer (would create a cycle)"
            )));
        }
        Ok(())
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        self.edges.keys().try_for_each(|k| self.check_edge(k))
    }

    /// Returns the edited topology, leaving `self` untouched.
    pub fn apply(&self, edit: &Edit) -> Result<Topology> {
        let mut t = self.clone();
        match *edit {
            Edit::AddLayer { width } => t.add_layer(width)?,
            Edit::RemoveLayer { layer } => t.remove_layer(layer)?,
            Edit::SetWidth { layer, width } => t.set_width(layer, width)?,
            Edit::ToggleEdge { source, target } => {
                let key = EdgeKey { source, target };
                let on = t.edges.get_mut(&key).ok_or(Error::UnknownEdge(key))?;
                *on = !*on;
            }
            Edit::AddSkipEdge { source, target } => {
                let key = EdgeKey { source, target };
                t.check_edge(&key)?;
                if t.edges.insert(key, true).is_some() {
                    return Err(Error::DuplicateEdge(key));
                }
            }
            Edit::RemoveEdge { source, target } => {
                let key = EdgeKey { source, target };
                t.edges.remove(&key).ok_or(Error::UnknownEdge(key))?;
            }
            Edit::SetActivation { activation } => t.activation = activation,
            Edit::SetFeatures { features } => t.set_features(features),
        }
        t.validate()?;
        Ok(t)
    }

    fn check_hidden_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.hidden.len() {
            return Err(Error::Topology(format!(
                "layer {layer} is not a hidden layer (network has {})",
                self.hidden.len()
            )));
        }
        Ok(())
    }

    fn add_layer(&mut self, width: usize) -> Result<()> {
        let new_layer = self.output_layer();
        let new_output = NeuronId::new(new_layer + 1, 0);
        self.edges = core::mem::take(&mut self.edges)
            .into_iter()
            .filter_map(|(k, on)| {
                if k.target.layer != new_layer {
                    Some((k, on))
                } else if k.source.layer() + 1 == new_layer {
                    // adjacent output edges are replaced by the new layer
                    None
                } else {
                    Some((EdgeKey { source: k.source, target: new_output }, on))
                }
            })
            .collect();
        self.hidden.push(width);
        self.check_shape()?;
        self.connect_adjacent(new_layer);
        self.connect_adjacent(new_layer + 1);
        Ok(())
    }

    fn remove_layer(&mut self, layer: usize) -> Result<()> {
        self.check_hidden_layer(layer)?;
        let shift_node = |n: Node| match n {
            Node::Neuron(id) if id.layer > layer => Node::neuron(id.layer - 1, id.index),
            other => other,
        };
        self.edges = core::mem::take(&mut self.edges)
            .into_iter()
            .filter(|(k, _)| k.source.layer() != layer && k.target.layer != layer)
            .map(|(k, on)| {
                let target = match shift_node(Node::Neuron(k.target)) {
                    Node::Neuron(id) => id,
                    Node::Input(_) => unreachable!(),
                };
                (EdgeKey { source: shift_node(k.source), target }, on)
            })
            .collect();
        self.hidden.remove(layer - 1);
        self.connect_adjacent(layer);
        Ok(())
    }

    fn set_width(&mut self, layer: usize, width: usize) -> Result<()> {
        self.check_hidden_layer(layer)?;
        if width == 0 || width > MAX_LAYER_WIDTH {
            return Err(Error::Topology(format!(
                "width {width} out of range 1..={MAX_LAYER_WIDTH}"
            )));
        }
        let old = self.hidden[layer - 1];
        self.hidden[layer - 1] = width;
        if width < old {
            let gone = |n: Node| matches!(n, Node::Neuron(id) if id.layer == layer && id.index >= width);
            self.edges.retain(|k, _| !gone(k.source) && !gone(Node::Neuron(k.target)));
        } else {
            let sources = self.layer_nodes(layer - 1);
            let targets = self.layer_nodes(layer + 1);
            for i in old..width {
                let id = NeuronId::new(layer, i);
                for &s in &sources {
                    self.edges.insert(EdgeKey::new(s, id), true);
                }
                for &t in &targets {
                    if let Node::Neuron(t) = t {
                        self.edges.insert(EdgeKey::new(id, t), true);
                    }
                }
            }
        }
        Ok(())
    }

    fn set_features(&mut self, features: FeatureSelection) {
        let added: Vec<Feature> =
            features.iter().filter(|f| !self.features.contains(*f)).collect();
        self.edges
            .retain(|k, _| !matches!(k.source, Node::Input(f) if !features.contains(f)));
        self.features = features;
        for f in added {
            for i in 0..self.width(1) {
                self.edges.insert(EdgeKey::new(f, NeuronId::new(1, i)), true);
            }
        }
    }
}

impl Default for Topology {
    /// Two input features, hidden layers of 4 and 2, tanh.
    fn default() -> Self {
        Self::new(FeatureSelection::default(), &[4, 2], Activation::Tanh)
            .expect("default topology is valid")
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct TopologyRepr {
    features: FeatureSelection,
    hidden: Vec<usize>,
    #[serde(default)]
    activation: Activation,
    #[serde(default)]
    output_activation: Activation,
    /// Omitted means fully connected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<Edge>>,
}

#[cfg(feature = "serde")]
impl TryFrom<TopologyRepr> for Topology {
    type Error = Error;

    fn try_from(r: TopologyRepr) -> Result<Self> {
        let t = match r.edges {
            Some(edges) => Topology::from_edges(r.features, &r.hidden, r.activation, edges)?,
            None => Topology::new(r.features, &r.hidden, r.activation)?,
        };
        Ok(t.with_output_activation(r.output_activation))
    }
}

#[cfg(feature = "serde")]
impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        Self {
            features: t.features,
            edges: Some(t.edges().collect()),
            hidden: t.hidden,
            activation: t.activation,
            output_activation: t.output_activation,
        }
    }
}
