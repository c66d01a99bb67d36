//! Exit criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

mod oracle;

use std::time::{Duration, Instant};

use capmeter::{DatasetSpec, Experiment, ExperimentRecord, ExperimentSpec};
use capmeter_core::{
    bias_indicator, capacity_demand, class_balance, evaluate, generalization_ratio, mec, Activation, BiasThreshold,
    DataSource, Edit, FeatureSelection, FeatureView, Label, NetworkState, Node, Params, Regularization, Sample,
    Topology, TrainingConfig,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "generalization arithmetic", limit: Some(Duration::from_secs(1)), run: g_arithmetic },
        Criterion { name: "saturated layer widening", limit: Some(Duration::from_secs(5)), run: saturation },
        Criterion { name: "gradient check", limit: Some(Duration::from_secs(30)), run: gradient_check },
        Criterion { name: "demand oracle", limit: Some(Duration::from_secs(60)), run: demand_oracle },
        Criterion { name: "mask equivalence", limit: None, run: mask_equivalence },
        Criterion { name: "training sanity", limit: Some(Duration::from_secs(60)), run: training_sanity },
        Criterion { name: "bias indicator", limit: None, run: bias },
        Criterion { name: "determinism and persistence", limit: None, run: persistence },
        Criterion { name: "measurement change", limit: None, run: measurement_change },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut o = (c.run)();
        let took = start.elapsed();
        if let Some(limit) = c.limit {
            if took > limit {
                o.pass = false;
                o.detail += &format!(" (took {took:.2?}, limit {limit:?})");
            }
        }
        println!("{} {:<28} {:>9.2?}  {}", if o.pass { "PASS" } else { "FAIL" }, c.name, took, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn g_arithmetic() -> Outcome {
    let g = generalization_ratio(500, 12).unwrap();
    let ok = (g.rounded() - 41.67).abs() <= 0.005 && (g.value() - 41.67).abs() <= 0.005 && g.generalizes();
    outcome(ok, format!("G(500, 12) = {:.4}, shown as {}", g.value(), g.rounded()))
}

/// Widening a hidden layer l >= 2 that takes no input edges and already has
/// at least as many incoming neuron parameters as feeding neurons must leave
/// the total unchanged.
fn saturation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut cases, mut unchanged, mut layer_fixed) = (0, 0, 0);
    let mut example = String::new();
    while cases < 50 {
        let hidden: Vec<usize> = (0..rng.random_range(2..=4)).map(|_| rng.random_range(1..=7)).collect();
        let t = Topology::new(oracle::random_features(&mut rng), &hidden, oracle::random_activation(&mut rng)).unwrap();
        let layer = rng.random_range(2..=hidden.len());
        let feeders = t.width(layer - 1) as u64;
        let neuron_params = t
            .enabled_edges()
            .filter(|e| e.target.layer == layer && matches!(e.source, Node::Neuron(_)))
            .count() as u64
            + t.width(layer) as u64;
        let input_edges = t.enabled_edges().any(|e| e.target.layer == layer && matches!(e.source, Node::Input(_)));
        if input_edges || neuron_params < feeders {
            continue;
        }
        cases += 1;
        let wider = t.apply(&Edit::SetWidth { layer, width: hidden[layer - 1] + 1 }).unwrap();
        let (before, after) = (mec(&t), mec(&wider));
        if before.bits == after.bits {
            unchanged += 1;
        } else if example.is_empty() {
            example = format!(
                "; e.g. {hidden:?} widening layer {layer}: {:?} -> {:?}",
                before.per_layer, after.per_layer
            );
        }
        layer_fixed += usize::from(before.per_layer[layer - 1] == after.per_layer[layer - 1]);
    }
    outcome(
        unchanged == cases,
        format!("total unchanged in {unchanged}/{cases}, widened layer's own term unchanged in {layer_fixed}/{cases}{example}"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for _ in 0..100 {
        let t = oracle::random_topology(&mut rng, 3, 4);
        let size = rng.random_range(1..=6);
        let batch = oracle::random_batch(&mut rng, t.features().len(), size);
        let state = NetworkState::new(t.clone(), rng.random());
        let samples: Vec<Sample> = batch.iter().map(|(x, l)| Sample { x, label: *l }).collect();
        let (_, g) = state.gradient(&samples).unwrap();
        let numeric = oracle::numeric_gradient(&t, state.params(), &batch, 1e-5);
        for (a, n) in g.weights.iter().chain(&g.biases).zip(numeric) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
            checked += 1;
        }
    }
    outcome(worst <= 1e-4, format!("{checked} parameters over 100 networks, worst relative error {worst:.2e} (limit 1e-4)"))
}

fn demand_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut cases, mut mismatches) = (0usize, 0usize);
    for i in 0..40 {
        let n = 4 + i % 9;
        let d = 1 + i % 3;
        // half-unit grid so equal sums, and so ties, are common
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| f64::from(rng.random_range(-4i32..=4)) * 0.5).collect())
            .collect();
        for mask in 0u32..(1 << n) {
            let labels: Vec<Label> =
                (0..n).map(|j| if mask & (1 << j) != 0 { Label::Positive } else { Label::Negative }).collect();
            let view = FeatureView::from_rows(d, rows.concat(), labels.clone()).unwrap();
            let got = capacity_demand(&view).unwrap();
            if got.bits != oracle::demand(&rows, &labels) || got.estimated {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    outcome(cases >= 10_000 && mismatches == 0, format!("{cases} label assignments, {mismatches} mismatches"))
}

/// Disabling an edge versus zeroing its weight: same outputs, and one
/// training step leaves every other parameter bit-identical.
fn mask_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut states, mut diffs) = (0, 0);
    while states < 50 {
        let t = oracle::random_topology(&mut rng, 3, 4);
        let enabled: Vec<_> = t.enabled_edges().collect();
        let Some(&edge) = enabled.choose(&mut rng) else { continue };
        states += 1;
        let base = NetworkState::new(t.clone(), rng.random());
        let mut zeroed_params = base.params().clone();
        zeroed_params.set_weight(&edge, 0.0).unwrap();
        let mut zeroed = NetworkState::from_parts(t.clone(), zeroed_params, 0).unwrap();
        let masked_t = t.apply(&Edit::ToggleEdge { source: edge.source, target: edge.target }).unwrap();
        let masked_params = Params::from_entries(
            base.params().weights().iter().copied().filter(|(k, _)| *k != edge),
            base.params().biases().iter().copied(),
        )
        .unwrap();
        let mut masked = NetworkState::from_parts(masked_t, masked_params, 0).unwrap();

        let size = rng.random_range(1..=8);
        let batch = oracle::random_batch(&mut rng, t.features().len(), size);
        for (x, _) in &batch {
            if zeroed.forward(x).unwrap().prediction.to_bits() != masked.forward(x).unwrap().prediction.to_bits() {
                diffs += 1;
            }
        }
        let config = TrainingConfig {
            learning_rate: rng.random_range(0.001..1.0),
            regularization: *[Regularization::None, Regularization::L1, Regularization::L2].choose(&mut rng).unwrap(),
            regularization_rate: rng.random_range(0.0..0.01),
            batch_size: batch.len(),
            ..TrainingConfig::default()
        };
        let samples: Vec<Sample> = batch.iter().map(|(x, l)| Sample { x, label: *l }).collect();
        zeroed.train_step(&samples, &config).unwrap();
        masked.train_step(&samples, &config).unwrap();
        for &(k, w) in masked.params().weights() {
            diffs += usize::from(zeroed.params().weight(&k).unwrap().to_bits() != w.to_bits());
        }
        for &(n, b) in masked.params().biases() {
            diffs += usize::from(zeroed.params().bias(n).unwrap().to_bits() != b.to_bits());
        }
    }
    outcome(diffs == 0, format!("{states} states, {diffs} differing outputs or parameters"))
}

fn training_sanity() -> Outcome {
    let spec = ExperimentSpec {
        topology: Topology::new(FeatureSelection::default(), &[8, 4], Activation::Tanh).unwrap(),
        config: TrainingConfig { learning_rate: 0.03, batch_size: 10, ..TrainingConfig::default() },
        dataset: DatasetSpec::Generated { kind: DataSource::Circle, n: 500, noise: 0.0, seed: SEED },
        split_seed: SEED,
        ..ExperimentSpec::default()
    };
    let mut exp = Experiment::new(spec).unwrap();
    let mut accuracy = 0.0;
    while exp.epoch() < 4000 {
        exp.train_epochs(50).unwrap();
        accuracy = exp.evaluate_test().unwrap().accuracy;
        if accuracy >= 0.9 {
            break;
        }
    }
    let m = exp.measurements().unwrap();
    let g = m.generalization;
    outcome(
        accuracy >= 0.9 && g > 1.0,
        format!("test accuracy {accuracy:.3} after {} epochs, MEC {} bits, G = {g:.2}", exp.epoch(), m.mec_bits),
    )
}

fn bias() -> Outcome {
    let labels: Vec<Label> = (0..100).map(|i| if i < 90 { Label::Positive } else { Label::Negative }).collect();
    let rows: Vec<f64> = (0..100).flat_map(|i| [f64::from(i) / 20.0 - 2.5, f64::from(i % 7) - 3.0]).collect();
    let view = FeatureView::from_rows(2, rows, labels.clone()).unwrap();
    // zero weights and a positive output bias: every prediction is positive
    let t = Topology::default();
    let mut p = Params::init(&t, 0);
    for (k, _) in p.weights().to_vec() {
        p.set_weight(&k, 0.0).unwrap();
    }
    p.set_bias(t.output(), 1.0).unwrap();
    let state = NetworkState::from_parts(t, p, 0).unwrap();
    let report = evaluate(&state, &view).unwrap();
    let ind = bias_indicator(&report, class_balance(&labels).unwrap(), BiasThreshold::default());
    outcome(
        report.acc_positive == 1.0 && report.acc_negative == 0.0 && ind.flagged,
        format!("acc+ {}, acc- {}, flagged {}", report.acc_positive, report.acc_negative, ind.flagged),
    )
}

fn persistence() -> Outcome {
    let mut problems = Vec::new();
    let uploaded = capmeter::csv_io::parse_csv(
        b"x1,x2,label\n0,0,1\n1,0.5,1\n-1,0.2,1\n0.3,-1,1\n5,5,-1\n-5,4,-1\n4,-5,-1\n-4,-4,-1\n",
    )
    .unwrap();
    let specs = [
        ExperimentSpec::default(),
        ExperimentSpec {
            dataset: DatasetSpec::from_dataset(&uploaded),
            config: TrainingConfig { batch_size: 2, seed: 9, ..TrainingConfig::default() },
            ..ExperimentSpec::default()
        },
    ];
    for spec in specs {
        let mut a = Experiment::new(spec.clone()).unwrap();
        let mut b = Experiment::new(spec).unwrap();
        a.train_epochs(120).unwrap();
        b.train_epochs(120).unwrap();
        if serde_json::to_string(a.history()).unwrap() != serde_json::to_string(b.history()).unwrap() {
            problems.push("same-seed histories differ");
        }

        let json = a.to_record().to_json().unwrap();
        let restored = Experiment::from_record(&ExperimentRecord::from_json(json.as_bytes()).unwrap()).unwrap();
        let (m0, m1) = (a.measurements().unwrap(), restored.measurements().unwrap());
        let (e0, e1) = (a.evaluate_test().unwrap(), restored.evaluate_test().unwrap());
        if m0.mec_bits != m1.mec_bits {
            problems.push("mec_bits");
        }
        if m0.demand_bits != m1.demand_bits {
            problems.push("demand_bits");
        }
        if e0.accuracy.to_bits() != e1.accuracy.to_bits() || e0.mean_loss.to_bits() != e1.mean_loss.to_bits() {
            problems.push("accuracy");
        }
        if a.network().params() != restored.network().params() {
            problems.push("parameters");
        }
    }
    let detail = if problems.is_empty() { "2 experiments, bit-exact".to_owned() } else { problems.join(", ") };
    outcome(problems.is_empty(), detail)
}

fn random_edit(rng: &mut impl Rng, t: &Topology) -> Option<Edit> {
    let neurons: Vec<_> = t.neurons().collect();
    let edges: Vec<_> = t.edges().collect();
    let hidden = t.hidden().len();
    Some(match rng.random_range(0..7) {
        0 => {
            let e = edges.choose(rng)?;
            Edit::ToggleEdge { source: e.source, target: e.target }
        }
        1 => {
            let e = edges.choose(rng)?;
            Edit::RemoveEdge { source: e.source, target: e.target }
        }
        2 => {
            let target = *neurons.choose(rng)?;
            let sources: Vec<Node> = t
                .features()
                .iter()
                .map(Node::Input)
                .chain(t.neurons().map(Node::Neuron))
                .filter(|s| s.layer() + 1 < target.layer)
                .collect();
            Edit::AddSkipEdge { source: *sources.choose(rng)?, target }
        }
        3 if hidden > 0 => {
            let layer = rng.random_range(1..=hidden);
            Edit::SetWidth { layer, width: rng.random_range(1..=8) }
        }
        4 => Edit::AddLayer { width: rng.random_range(1..=8) },
        5 if hidden > 0 => Edit::RemoveLayer { layer: rng.random_range(1..=hidden) },
        _ => Edit::SetFeatures { features: oracle::random_features(rng) },
    })
}

/// Every applied edit that changes the enabled parameter count must move
/// mec_bits.
fn measurement_change() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut t = Topology::default();
    let (mut edits, mut unchanged) = (0, 0);
    let mut example = String::new();
    while edits < 200 {
        let Some(edit) = random_edit(&mut rng, &t) else { continue };
        let Ok(next) = t.apply(&edit) else { continue };
        if next.parameter_count() != t.parameter_count() {
            edits += 1;
            if mec(&next).bits == mec(&t).bits {
                unchanged += 1;
                if example.is_empty() {
                    example = format!(
                        "; e.g. {edit:?} on hidden {:?}: parameters {} -> {}, MEC stays {}",
                        t.hidden(),
                        t.parameter_count(),
                        next.parameter_count(),
                        mec(&t).bits
                    );
                }
            }
        }
        t = next;
    }
    outcome(unchanged == 0, format!("{} of {edits} parameter-changing edits moved mec_bits{example}", edits - unchanged))
}
