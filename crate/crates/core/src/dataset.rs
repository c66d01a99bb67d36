//! Labelled 2-D point sets: the four synthetic playground distributions,
//! uploaded data, feature mapping and train/test splitting.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::FeatureSelection;

/// Half-width of the square every point lives in.
pub const CANVAS_HALF_WIDTH: f64 = 6.0;
pub const MAX_NOISE: f64 = 0.5;
pub const MIN_GENERATED_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Self::Negative => -1.0,
            Self::Positive => 1.0,
        }
    }

    /// Thresholds a prediction at zero; exactly zero counts as positive.
    pub fn from_prediction(p: f64) -> Self {
        if p >= 0.0 {
            Self::Positive
        } else {
            Self::Negative
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Self::Negative => Self::Positive,
            Self::Positive => Self::Negative,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Self::Positive),
            -1 => Ok(Self::Negative),
            _ => Err(Error::Dataset(format!("label must be -1 or +1, got {v}"))),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_i8((*self).into())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        Label::try_from(i8::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawPoint {
    pub x1: f64,
    pub x2: f64,
    pub label: Label,
}

impl RawPoint {
    pub fn new(x1: f64, x2: f64, label: Label) -> Self {
        Self { x1, x2, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DataSource {
    Circle,
    Xor,
    Gauss,
    Spiral,
    Uploaded,
}

impl DataSource {
    pub const GENERATED: [DataSource; 4] = [Self::Circle, Self::Xor, Self::Gauss, Self::Spiral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Circle => "circle",
            Self::Xor => "xor",
            Self::Gauss => "gauss",
            Self::Spiral => "spiral",
            Self::Uploaded => "uploaded",
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Circle, Self::Xor, Self::Gauss, Self::Spiral, Self::Uploaded]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Dataset(format!("unknown dataset kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    points: Vec<RawPoint>,
    source: DataSource,
    seed: u64,
    noise: f64,
}

impl Dataset {
    pub fn new(points: Vec<RawPoint>, source: DataSource, seed: u64, noise: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(0.0..=MAX_NOISE).contains(&noise) {
            return Err(Error::Dataset(format!("noise must be in [0, {MAX_NOISE}], got {noise}")));
        }
        if let Some(i) = points.iter().position(|p| {
            !(p.x1.is_finite() && p.x2.is_finite())
                || p.x1.abs() > CANVAS_HALF_WIDTH
                || p.x2.abs() > CANVAS_HALF_WIDTH
        }) {
            return Err(Error::Dataset(format!(
                "point {i} lies outside [-{CANVAS_HALF_WIDTH}, {CANVAS_HALF_WIDTH}]^2"
            )));
        }
        Ok(Self { points, source, seed, noise })
    }

    /// Wraps user data, mapping each axis's range affinely onto the canvas.
    pub fn uploaded(points: Vec<RawPoint>) -> Result<Self> {
        Self::new(rescale_to_canvas(points), DataSource::Uploaded, 0, 0.0)
    }

    pub fn points(&self) -> &[RawPoint] {
        &self.points
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.points.iter().map(|p| p.label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels().filter(|l| *l == label).count()
    }
}

/// Maps `[min, max]` of each axis onto `[-6, 6]`. An axis that already spans
/// the canvas exactly is left bit-for-bit unchanged; a constant axis maps to 0.
pub fn rescale_to_canvas(mut points: Vec<RawPoint>) -> Vec<RawPoint> {
    fn axis(points: &mut [RawPoint], get: fn(&mut RawPoint) -> &mut f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points.iter_mut() {
            let v = *get(p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == -CANVAS_HALF_WIDTH && hi == CANVAS_HALF_WIDTH {
            return;
        }
        let span = hi - lo;
        for p in points.iter_mut() {
            let v = get(p);
            *v = if span > 0.0 {
                (*v - lo) / span * (2.0 * CANVAS_HALF_WIDTH) - CANVAS_HALF_WIDTH
            } else {
                0.0
            };
        }
    }
    axis(&mut points, |p| &mut p.x1);
    axis(&mut points, |p| &mut p.x2);
    points
}

/// Deterministic synthetic dataset. Classes come in equal halves (the extra
/// point of an odd `n` is positive) and labels are assigned before noise
/// jitters the coordinates.
pub fn generate(kind: DataSource, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < MIN_GENERATED_POINTS {
        return Err(Error::Dataset(format!(
            "need at least {MIN_GENERATED_POINTS} points, got {n}"
        )));
    }
    if !(0.0..=MAX_NOISE).contains(&noise) {
        return Err(Error::Dataset(format!("noise must be in [0, {MAX_NOISE}], got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = n - n / 2;
    let mut points = Vec::with_capacity(n);
    match kind {
        DataSource::Circle => {
            const RADIUS: f64 = 5.0;
            for i in 0..n {
                let (label, r) = if i < positives {
                    (Label::Positive, rng.random_range(0.0..RADIUS * 0.5))
                } else {
                    (Label::Negative, rng.random_range(RADIUS * 0.7..RADIUS))
                };
                let angle = rng.random_range(0.0..2.0 * PI);
                let (x, y) = (r * libm::sin(angle), r * libm::cos(angle));
                let jx = rng.random_range(-RADIUS..RADIUS) * noise;
                let jy = rng.random_range(-RADIUS..RADIUS) * noise;
                points.push(RawPoint::new(x + jx, y + jy, label));
            }
        }
        DataSource::Xor => {
            const PADDING: f64 = 0.3;
            let pad = |v: f64| if v > 0.0 { v + PADDING } else { v - PADDING };
            for i in 0..n {
                let want = if i < positives { Label::Positive } else { Label::Negative };
                let x = pad(rng.random_range(-5.0..5.0));
                let mut y = pad(rng.random_range(-5.0..5.0));
                if Label::from_prediction(x * y) != want {
                    y = -y;
                }
                let jx = rng.random_range(-5.0..5.0) * noise;
                let jy = rng.random_range(-5.0..5.0) * noise;
                points.push(RawPoint::new(x + jx, y + jy, want));
            }
        }
        DataSource::Gauss => {
            let spread = Normal::new(0.0, libm::sqrt(0.5 + 3.5 * noise / MAX_NOISE))
                .expect("positive standard deviation");
            for i in 0..n {
                let (label, c) = if i < positives { (Label::Positive, 2.0) } else { (Label::Negative, -2.0) };
                let x = c + spread.sample(&mut rng);
                let y = c + spread.sample(&mut rng);
                points.push(RawPoint::new(x, y, label));
            }
        }
        DataSource::Spiral => {
            let arm = |count: usize, delta: f64, label: Label, rng: &mut ChaCha8Rng, out: &mut Vec<RawPoint>| {
                for i in 0..count {
                    let frac = i as f64 / count as f64;
                    let r = frac * 5.0;
                    let t = 1.75 * frac * 2.0 * PI + delta;
                    let jx = rng.random_range(-1.0..1.0) * noise;
                    let jy = rng.random_range(-1.0..1.0) * noise;
                    out.push(RawPoint::new(r * libm::sin(t) + jx, r * libm::cos(t) + jy, label));
                }
            };
            arm(positives, 0.0, Label::Positive, &mut rng, &mut points);
            arm(n - positives, PI, Label::Negative, &mut rng, &mut points);
        }
        DataSource::Uploaded => {
            return Err(Error::Dataset("`uploaded` is not a generator kind".into()));
        }
    }
    for p in &mut points {
        p.x1 = p.x1.clamp(-CANVAS_HALF_WIDTH, CANVAS_HALF_WIDTH);
        p.x2 = p.x2.clamp(-CANVAS_HALF_WIDTH, CANVAS_HALF_WIDTH);
    }
    // interleave the classes so in-order minibatches see both
    points.shuffle(&mut rng);
    Dataset::new(points, kind, seed, noise)
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` points train.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.1..=0.9).contains(&train_fraction) {
        return Err(Error::Config(format!("train_fraction must be in [0.1, 0.9], got {train_fraction}")));
    }
    let n = dataset.len();
    // the epsilon keeps products like 0.7 * 10 from landing just under 7
    let n_train = libm::floor(n as f64 * train_fraction + 1e-9) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Dataset(format!(
            "splitting {n} points at {train_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.points[i]).collect::<Vec<_>>();
    let make = |pts| Dataset { points: pts, ..dataset.clone() };
    Ok((make(pick(&order[..n_train])), make(pick(&order[n_train..]))))
}

/// Row-major `n x d` matrix of feature values plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl FeatureView {
    pub fn from_rows(dim: usize, values: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dataset("feature dimension must be at least 1".into()));
        }
        if values.len() != dim * labels.len() {
            return Err(Error::Dataset(format!(
                "{} values do not form {} rows of {dim}",
                values.len(),
                labels.len()
            )));
        }
        Ok(Self { dim, values, labels })
    }

    /// The input dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

pub fn apply_features(dataset: &Dataset, selection: FeatureSelection) -> FeatureView {
    let dim = selection.len();
    let mut values = Vec::with_capacity(dim * dataset.len());
    for p in dataset.points() {
        values.extend(selection.iter().map(|f| f.eval(p.x1, p.x2)));
    }
    FeatureView { dim, values, labels: dataset.labels().collect() }
}
