//! One network training on one dataset, with its measurements. Both the
//! CLI and the session service drive this type, so the two frontends
//! report identical numbers for identical specs.

use std::time::{SystemTime, UNIX_EPOCH};

use capmeter_core::measurements::Demand;
use capmeter_core::{
    apply_features, capacity_demand, class_balance, evaluate, generate, mec, split, BiasThreshold,
    DataSource, Dataset, Edit, EvalReport, FeatureView, MeasurementReport, NetworkState, Params, RawPoint,
    Topology, TrainingConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version written to, and required from, every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Frames kept in the history before it is thinned.
pub const HISTORY_LIMIT: usize = 1000;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Generated {
        kind: DataSource,
        #[serde(default = "default_points")]
        n: usize,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Already-rescaled points, stored inline.
    Uploaded { points: Vec<RawPoint> },
}

fn default_points() -> usize {
    500
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::Generated { kind: DataSource::Circle, n: default_points(), noise: 0.0, seed: 0 }
    }
}

impl DatasetSpec {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            Self::Generated { kind, n, noise, seed } => Ok(generate(*kind, *n, *noise, *seed)?),
            Self::Uploaded { points } => Ok(Dataset::new(points.clone(), DataSource::Uploaded, 0, 0.0)?),
        }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        match dataset.source() {
            DataSource::Uploaded => Self::Uploaded { points: dataset.points().to_vec() },
            kind => Self::Generated { kind, n: dataset.len(), noise: dataset.noise(), seed: dataset.seed() },
        }
    }
}

/// Everything needed to set up an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub topology: Topology,
    pub config: TrainingConfig,
    pub dataset: DatasetSpec,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub bias_threshold: BiasThreshold,
    /// Epoch budget for headless runs.
    pub epochs: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            topology: Topology::default(),
            config: TrainingConfig::default(),
            dataset: DatasetSpec::default(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split_seed: 0,
            bias_threshold: BiasThreshold::DEFAULT,
            epochs: 500,
        }
    }
}

/// Snapshot published to metric subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    /// Completed epochs.
    pub step: u64,
    /// Bumped on every reset; `step` increases strictly within a generation.
    pub generation: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub accuracy: f64,
    pub acc_positive: f64,
    pub acc_negative: f64,
    pub mec_bits: u64,
    pub demand_bits: u64,
    pub generalization: f64,
    pub balance: f64,
    pub bias_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub schema_version: u32,
    pub source: DataSource,
    pub n: usize,
    pub positives: usize,
    pub negatives: usize,
    pub balance: f64,
    pub demand_bits: u64,
    pub demand_estimated: bool,
}

/// Final evaluation of a headless run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub architecture: String,
    pub hidden: Vec<usize>,
    pub epochs: u64,
    pub train_loss: f64,
    pub test: EvalReport,
    pub measurements: MeasurementReport,
}

/// Portable snapshot of an experiment; importing it reproduces the
/// measurements and parameters exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    /// Unix seconds; the only field allowed to differ between two exports
    /// of the same state.
    pub exported_at: u64,
    pub spec: ExperimentSpec,
    pub params: Params,
    pub updates: u64,
    pub epoch: u64,
    pub generation: u64,
    pub history: Vec<MetricsFrame>,
}

impl ExperimentRecord {
    /// Parses a record, rejecting other schema versions before looking at
    /// anything else.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_slice(bytes)?;
        check_schema(&value)?;
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Requires `schema_version` to be present and equal to [`SCHEMA_VERSION`].
pub fn check_schema(value: &serde_json::Value) -> Result<()> {
    match value.get("schema_version").map(|v| v.as_u64()) {
        Some(Some(v)) if v == u64::from(SCHEMA_VERSION) => Ok(()),
        Some(Some(v)) => Err(Error::SchemaVersion { found: v, expected: SCHEMA_VERSION }),
        Some(None) => Err(Error::Validation("schema_version must be an unsigned integer".into())),
        None => Err(Error::Validation("schema_version is required".into())),
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone)]
struct Data {
    dataset: Dataset,
    full: FeatureView,
    train: FeatureView,
    test: FeatureView,
    demand: Demand,
    balance: f64,
}

impl Data {
    fn new(dataset: Dataset, spec: &ExperimentSpec) -> Result<Self> {
        let features = spec.topology.features();
        let (train, test) = split(&dataset, spec.train_fraction, spec.split_seed)?;
        let full = apply_features(&dataset, features);
        let demand = capacity_demand(&full)?;
        let balance = class_balance(full.labels())?;
        Ok(Self {
            train: apply_features(&train, features),
            test: apply_features(&test, features),
            full,
            dataset,
            demand,
            balance,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    spec: ExperimentSpec,
    network: NetworkState,
    data: Data,
    epoch: u64,
    generation: u64,
    history: Vec<MetricsFrame>,
}

impl Experiment {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        spec.topology.validate()?;
        let data = Data::new(spec.dataset.build()?, &spec)?;
        spec.config.validate(Some(data.train.len()))?;
        let network = NetworkState::new(spec.topology.clone(), spec.config.seed);
        Ok(Self { spec, network, data, epoch: 0, generation: 0, history: Vec::new() })
    }

    pub fn from_record(record: &ExperimentRecord) -> Result<Self> {
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: record.schema_version.into(), expected: SCHEMA_VERSION });
        }
        let mut exp = Self::new(record.spec.clone())?;
        exp.network = NetworkState::from_parts(record.spec.topology.clone(), record.params.clone(), record.updates)?;
        exp.epoch = record.epoch;
        exp.generation = record.generation;
        exp.history = record.history.clone();
        Ok(exp)
    }

    pub fn to_record(&self) -> ExperimentRecord {
        ExperimentRecord {
            schema_version: SCHEMA_VERSION,
            exported_at: unix_now(),
            spec: self.spec.clone(),
            params: self.network.params().clone(),
            updates: self.network.step(),
            epoch: self.epoch,
            generation: self.generation,
            history: self.history.clone(),
        }
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn network(&self) -> &NetworkState {
        &self.network
    }

    pub fn topology(&self) -> &Topology {
        self.network.topology()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data.dataset
    }

    pub fn demand(&self) -> &Demand {
        &self.data.demand
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn history(&self) -> &[MetricsFrame] {
        &self.history
    }

    pub fn test_view(&self) -> &FeatureView {
        &self.data.test
    }

    pub fn train_view(&self) -> &FeatureView {
        &self.data.train
    }

    pub fn full_view(&self) -> &FeatureView {
        &self.data.full
    }

    pub fn evaluate_test(&self) -> Result<EvalReport> {
        Ok(evaluate(&self.network, &self.data.test)?)
    }

    pub fn measurements(&self) -> Result<MeasurementReport> {
        self.measurements_for(&self.evaluate_test()?)
    }

    fn measurements_for(&self, eval: &EvalReport) -> Result<MeasurementReport> {
        Ok(MeasurementReport::new(
            &mec(self.topology()),
            &self.data.demand,
            eval,
            self.data.balance,
            self.spec.bias_threshold,
        )?)
    }

    pub fn frame(&self) -> Result<MetricsFrame> {
        let test = self.evaluate_test()?;
        let train = evaluate(&self.network, &self.data.train)?;
        let m = self.measurements_for(&test)?;
        Ok(MetricsFrame {
            step: self.epoch,
            generation: self.generation,
            train_loss: train.mean_loss,
            test_loss: test.mean_loss,
            accuracy: test.accuracy,
            acc_positive: test.acc_positive,
            acc_negative: test.acc_negative,
            mec_bits: m.mec_bits,
            demand_bits: m.demand_bits,
            generalization: m.generalization,
            balance: m.balance,
            bias_flagged: m.bias_flagged,
        })
    }

    /// Runs `epochs` full passes over the training set, appending a history
    /// frame every `epochs_per_tick` epochs.
    pub fn train_epochs(&mut self, epochs: u64) -> Result<()> {
        let tick = u64::from(self.spec.config.epochs_per_tick);
        for _ in 0..epochs {
            self.network.train_epoch(&self.data.train, &self.spec.config)?;
            self.epoch += 1;
            if self.epoch.is_multiple_of(tick) {
                let f = self.frame()?;
                self.push_history(f);
            }
        }
        Ok(())
    }

    fn push_history(&mut self, frame: MetricsFrame) {
        self.history.push(frame);
        if self.history.len() > HISTORY_LIMIT {
            // keep every other frame, always including the first
            let mut i = 0;
            self.history.retain(|_| {
                i += 1;
                i % 2 == 1
            });
        }
    }

    /// Trains for `spec.epochs` and reports the final state.
    pub fn run(&mut self) -> Result<RunReport> {
        let remaining = self.spec.epochs.saturating_sub(self.epoch);
        self.train_epochs(remaining)?;
        self.report()
    }

    pub fn report(&self) -> Result<RunReport> {
        let test = self.evaluate_test()?;
        let measurements = self.measurements_for(&test)?;
        Ok(RunReport {
            architecture: architecture_label(self.topology()),
            hidden: self.topology().hidden().to_vec(),
            epochs: self.epoch,
            train_loss: evaluate(&self.network, &self.data.train)?.mean_loss,
            test,
            measurements,
        })
    }

    /// Applies a topology edit. Surviving parameters are kept; new edges and
    /// neurons are seeded from the config seed. Changing the features also
    /// rebuilds the feature views and the demand estimate.
    pub fn apply_edit(&mut self, edit: &Edit) -> Result<MeasurementReport> {
        let topology = self.topology().apply(edit)?;
        let features_changed = topology.features() != self.topology().features();
        let mut spec = self.spec.clone();
        spec.topology = topology.clone();
        if features_changed {
            self.data = Data::new(self.data.dataset.clone(), &spec)?;
        }
        self.spec = spec;
        self.network.retopologize(topology, self.spec.config.seed);
        self.measurements()
    }

    /// Swaps the dataset and restarts training from the seed.
    pub fn replace_dataset(&mut self, dataset: Dataset) -> Result<DatasetSummary> {
        let mut spec = self.spec.clone();
        spec.dataset = DatasetSpec::from_dataset(&dataset);
        let data = Data::new(dataset, &spec)?;
        spec.config.validate(Some(data.train.len()))?;
        self.spec = spec;
        self.data = data;
        self.reset();
        Ok(self.dataset_summary())
    }

    pub fn dataset_summary(&self) -> DatasetSummary {
        let d = &self.data.dataset;
        DatasetSummary {
            schema_version: SCHEMA_VERSION,
            source: d.source(),
            n: d.len(),
            positives: d.count(capmeter_core::Label::Positive),
            negatives: d.count(capmeter_core::Label::Negative),
            balance: self.data.balance,
            demand_bits: self.data.demand.bits,
            demand_estimated: self.data.demand.estimated,
        }
    }

    /// Re-initializes parameters from the seed and starts a new generation.
    pub fn reset(&mut self) {
        self.network.reset(self.spec.config.seed);
        self.epoch = 0;
        self.generation += 1;
        self.history.clear();
    }
}

/// `d-h1-...-1`, e.g. `2-4-2-1`.
pub fn architecture_label(t: &Topology) -> String {
    std::iter::once(t.features().len())
        .chain(t.hidden().iter().copied())
        .chain(std::iter::once(1))
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[cfg(test)]
mod tests {
    use super::*;
    use capmeter_core::{Feature, NeuronId};

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            dataset: DatasetSpec::Generated { kind: DataSource::Xor, n: 60, noise: 0.0, seed: 4 },
            epochs: 20,
            ..Default::default()
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let a = Experiment::new(small()).unwrap().run().unwrap();
        let b = Experiment::new(small()).unwrap().run().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.architecture, "2-4-2-1");
        assert_eq!(a.epochs, 20);
    }

    #[test]
    fn history_follows_ticks() {
        let mut e = Experiment::new(small()).unwrap();
        e.train_epochs(25).unwrap();
        let steps: Vec<u64> = e.history().iter().map(|f| f.step).collect();
        assert_eq!(steps, [10, 20]);
    }

    #[test]
    fn history_is_thinned() {
        let mut spec = small();
        spec.config.epochs_per_tick = 1;
        let mut e = Experiment::new(spec).unwrap();
        e.train_epochs(HISTORY_LIMIT as u64 + 1).unwrap();
        assert!(e.history().len() <= HISTORY_LIMIT);
        assert_eq!(e.history()[0].step, 1);
        assert!(e.history().windows(2).all(|w| w[0].step < w[1].step));
    }

    #[test]
    fn feature_edit_updates_demand() {
        let mut e = Experiment::new(small()).unwrap();
        let before = e.measurements().unwrap();
        let features = capmeter_core::FeatureSelection::new(&[Feature::X1X2]).unwrap();
        let after = e.apply_edit(&Edit::SetFeatures { features }).unwrap();
        // x1*x2 separates xor with one threshold: demand = 1 * (1 + 1)
        assert_eq!(after.demand_bits, 2);
        assert_ne!(before.demand_bits, after.demand_bits);
        assert_eq!(e.test_view().dim(), 1);
    }

    #[test]
    fn record_round_trip() {
        let mut e = Experiment::new(small()).unwrap();
        e.train_epochs(12).unwrap();
        e.apply_edit(&Edit::AddSkipEdge { source: Feature::X1.into(), target: NeuronId::new(3, 0) })
            .unwrap();
        let rec = e.to_record();
        let json = rec.to_json().unwrap();
        let back = ExperimentRecord::from_json(json.as_bytes()).unwrap();
        assert_eq!(back, rec);
        let e2 = Experiment::from_record(&back).unwrap();
        assert_eq!(e2.measurements().unwrap(), e.measurements().unwrap());
        assert_eq!(e2.network(), e.network());
    }

    #[test]
    fn schema_mismatch() {
        let mut v = serde_json::to_value(Experiment::new(small()).unwrap().to_record()).unwrap();
        v["schema_version"] = 99.into();
        let err = ExperimentRecord::from_json(v.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 99, .. }));
    }

    #[test]
    fn batch_larger_than_train_set_is_rejected() {
        let mut spec = small();
        spec.config.batch_size = 31;
        assert!(Experiment::new(spec).is_err());
    }
}
