//! Independent reference computations and seeded generators shared by the
//! criteria. Nothing here calls into the engine's compiled plan or its
//! measurement code.

use std::collections::{BTreeMap, HashMap};

use capmeter_core::{
    Activation, Edit, Feature, FeatureSelection, Label, Node, NeuronId, Params, Topology,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn random_features(rng: &mut impl Rng) -> FeatureSelection {
    loop {
        let picked: Vec<Feature> = Feature::ALL.into_iter().filter(|_| rng.random_bool(0.4)).collect();
        if let Ok(sel) = FeatureSelection::new(&picked) {
            return sel;
        }
    }
}

pub fn random_activation(rng: &mut impl Rng) -> Activation {
    *Activation::ALL.choose(rng).unwrap()
}

fn all_nodes(t: &Topology) -> Vec<Node> {
    t.features().iter().map(Node::Input).chain(t.neurons().map(Node::Neuron)).collect()
}

/// Random features, widths, activations, a few skip edges and about a
/// quarter of the edges disabled.
pub fn random_topology(rng: &mut impl Rng, max_layers: usize, max_width: usize) -> Topology {
    let hidden: Vec<usize> = (0..rng.random_range(0..=max_layers)).map(|_| rng.random_range(1..=max_width)).collect();
    let mut t = Topology::new(random_features(rng), &hidden, random_activation(rng))
        .unwrap()
        .with_output_activation(random_activation(rng));
    for _ in 0..rng.random_range(0..4) {
        let nodes = all_nodes(&t);
        let src = *nodes.choose(rng).unwrap();
        let targets: Vec<NeuronId> = t.neurons().filter(|n| n.layer > src.layer() + 1).collect();
        if let Some(&target) = targets.choose(rng) {
            if let Ok(next) = t.apply(&Edit::AddSkipEdge { source: src, target }) {
                t = next;
            }
        }
    }
    let edges: Vec<_> = t.edges().collect();
    for e in edges {
        if rng.random_bool(0.25) {
            t = t.apply(&Edit::ToggleEdge { source: e.source, target: e.target }).unwrap();
        }
    }
    t
}

pub fn random_batch(rng: &mut impl Rng, dim: usize, size: usize) -> Vec<(Vec<f64>, Label)> {
    (0..size)
        .map(|_| {
            let x = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            (x, if rng.random_bool(0.5) { Label::Positive } else { Label::Negative })
        })
        .collect()
}

/// Memoized recursive evaluation straight from the edge list.
pub fn forward(t: &Topology, p: &Params, x: &[f64]) -> f64 {
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

pub fn loss(t: &Topology, p: &Params, batch: &[(Vec<f64>, Label)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| {
            let e = forward(t, p, x) - y.value();
            0.5 * e * e
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Central differences of [`loss`] for every weight, then every bias.
pub fn numeric_gradient(t: &Topology, p: &Params, batch: &[(Vec<f64>, Label)], h: f64) -> Vec<f64> {
    let nudge = |i: usize, d: f64| {
        let mut q = p.clone();
        let nw = p.weights().len();
        if i < nw {
            let (k, w) = p.weights()[i];
            q.set_weight(&k, w + d).unwrap();
        } else {
            let (n, b) = p.biases()[i - nw];
            q.set_bias(n, b + d).unwrap();
        }
        q
    };
    (0..p.len()).map(|i| (loss(t, &nudge(i, h), batch) - loss(t, &nudge(i, -h), batch)) / (2.0 * h)).collect()
}

/// Expected demand by bucketing rows on their exact sum: inside a bucket the
/// negatives come first, buckets ascend, and every adjacent label change in
/// that walk costs `d + 1` bits.
pub fn demand(rows: &[Vec<f64>], labels: &[Label]) -> u64 {
    let d = rows[0].len() as u64;
    let mut buckets: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (row, label) in rows.iter().zip(labels) {
        let mut s = 0.0;
        for v in row {
            s += v;
        }
        // order-preserving integer key for finite floats, with -0.0 == 0.0
        let bits = if s == 0.0 { 0 } else { s.to_bits() as i64 };
        let key = if bits < 0 { i64::MIN - bits } else { bits };
        let entry = buckets.entry(key).or_default();
        match label {
            Label::Negative => entry.0 += 1,
            Label::Positive => entry.1 += 1,
        }
    }
    let mut walk = Vec::new();
    for (neg, pos) in buckets.into_values() {
        walk.extend(std::iter::repeat_n(-1, neg));
        walk.extend(std::iter::repeat_n(1, pos));
    }
    let changes = walk.windows(2).filter(|w| w[0] != w[1]).count() as u64;
    changes * (d + 1)
}
