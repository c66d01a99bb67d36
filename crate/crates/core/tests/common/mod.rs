#![allow(dead_code)]

use std::collections::HashMap;

use capmeter_core::{
    Activation, Edit, Feature, FeatureSelection, Label, Node, NeuronId, Params, Topology,
};
use proptest::prelude::*;

/// Feature bitmask (non-zero), hidden widths, activation, edge-disable
/// pattern and skip-edge picks.
pub fn topology_strategy(max_layers: usize, max_width: usize) -> impl Strategy<Value = Topology> {
    (
        1u8..128,
        prop::collection::vec(1..=max_width, 0..=max_layers),
        prop::sample::select(Activation::ALL.to_vec()),
        prop::collection::vec(any::<bool>(), 64),
        prop::collection::vec((0usize..64, 0usize..64), 0..4),
    )
        .prop_map(|(mask, hidden, act, disable, skips)| {
            let feats: Vec<Feature> =
                Feature::ALL.into_iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, f)| f).collect();
            let mut t = Topology::new(FeatureSelection::new(&feats).unwrap(), &hidden, act).unwrap();
            for (s, d) in skips {
                let nodes = all_nodes(&t);
                let src = nodes[s % nodes.len()];
                let targets: Vec<NeuronId> = t.neurons().filter(|n| n.layer > src.layer() + 1).collect();
                if !targets.is_empty() {
                    let edit = Edit::AddSkipEdge { source: src, target: targets[d % targets.len()] };
                    if let Ok(next) = t.apply(&edit) {
                        t = next;
                    }
                }
            }
            let edges: Vec<_> = t.edges().collect();
            for (e, off) in edges.iter().zip(disable.iter().cycle()) {
                // leave roughly one in four edges disabled
                if *off && (e.target.index + e.target.layer) % 2 == 0 {
                    t = t.apply(&Edit::ToggleEdge { source: e.source, target: e.target }).unwrap();
                }
            }
            t
        })
}

pub fn all_nodes(t: &Topology) -> Vec<Node> {
    t.features().iter().map(Node::Input).chain(t.neurons().map(Node::Neuron)).collect()
}

/// Straightforward recursive evaluation straight from the edge list and the
/// keyed parameters; shares nothing with the engine's compiled plan.
pub fn reference_forward(t: &Topology, p: &Params, x: &[f64]) -> f64 {
    fn value(t: &Topology, p: &Params, x: &[f64], n: Node, memo: &mut HashMap<Node, f64>) -> f64 {
        if let Some(v) = memo.get(&n) {
            return *v;
        }
        let v = match n {
            Node::Input(f) => x[t.features().column_of(f).unwrap()],
            Node::Neuron(id) => {
                let mut z = p.bias(id).unwrap();
                for e in t.edges().filter(|e| e.enabled && e.target == id) {
                    z += p.weight(&e.key()).unwrap() * value(t, p, x, e.source, memo);
                }
                let act = if id == t.output() { t.output_activation() } else { t.activation() };
                match act {
                    Activation::Tanh => z.tanh(),
                    Activation::Relu => z.max(0.0),
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                    Activation::Linear => z,
                }
            }
        };
        memo.insert(n, v);
        v
    }
    value(t, p, x, Node::Neuron(t.output()), &mut HashMap::new())
}

pub fn reference_loss(t: &Topology, p: &Params, batch: &[(Vec<f64>, Label)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| {
            let e = reference_forward(t, p, x) - y.value();
            0.5 * e * e
        })
        .sum::<f64>()
        / batch.len() as f64
}

pub fn batch_strategy(dim: usize, size: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(Vec<f64>, Label)>> {
    prop::collection::vec(
        (prop::collection::vec(-2.0f64..2.0, dim), any::<bool>())
            .prop_map(|(x, pos)| (x, if pos { Label::Positive } else { Label::Negative })),
        size,
    )
}
