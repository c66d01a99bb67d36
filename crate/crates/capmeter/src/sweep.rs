//! Capacity sweeps over hidden-layer widths.

use std::ops::RangeInclusive;
use std::str::FromStr;

use capmeter_core::Edit;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Experiment, ExperimentSpec, RunReport};

pub const MAX_SWEEP_COMBINATIONS: usize = 200;

/// `layer2=1..5,layer1=3` style width ranges (1-based hidden layers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub ranges: Vec<(usize, RangeInclusive<usize>)>,
}

impl FromStr for SweepPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Validation(format!("sweep `{s}`: {msg}"));
        let mut ranges = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, range) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` lacks `=`")))?;
            let layer: usize = name
                .trim()
                .strip_prefix("layer")
                .and_then(|n| n.parse().ok())
                .filter(|&l| l >= 1)
                .ok_or_else(|| bad(format!("`{name}` should look like layer1, layer2, ...")))?;
            let range = range.trim();
            let (lo, hi) = match range.split_once("..") {
                Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
                None => (range, range),
            };
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| bad(format!("`{v}` is not a width")));
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo == 0 || lo > hi {
                return Err(bad(format!("empty or invalid range {lo}..{hi}")));
            }
            if ranges.iter().any(|(l, _)| *l == layer) {
                return Err(bad(format!("layer{layer} given twice")));
            }
            ranges.push((layer, lo..=hi));
        }
        if ranges.is_empty() {
            return Err(bad("no ranges".into()));
        }
        Ok(Self { ranges })
    }
}

impl SweepPlan {
    pub fn combinations(&self) -> usize {
        self.ranges.iter().map(|(_, r)| r.clone().count()).product()
    }

    /// Width overrides for every combination, first range varying slowest.
    fn expand(&self) -> Vec<Vec<(usize, usize)>> {
        self.ranges.iter().fold(vec![Vec::new()], |acc, (layer, r)| {
            acc.into_iter()
                .flat_map(|prefix| {
                    r.clone().map(move |w| {
                        let mut v = prefix.clone();
                        v.push((*layer, w));
                        v
                    })
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub architecture: String,
    pub hidden: Vec<usize>,
    pub mec_bits: u64,
    pub demand_bits: u64,
    pub accuracy: f64,
    pub generalization: f64,
}

impl From<&RunReport> for SweepRow {
    fn from(r: &RunReport) -> Self {
        Self {
            architecture: r.architecture.clone(),
            hidden: r.hidden.clone(),
            mec_bits: r.measurements.mec_bits,
            demand_bits: r.measurements.demand_bits,
            accuracy: r.test.accuracy,
            generalization: r.measurements.generalization,
        }
    }
}

/// Descending G, then ascending MEC: the top row is the smallest network
/// that does the most with its capacity.
pub fn rank(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        b.generalization
            .total_cmp(&a.generalization)
            .then(a.mec_bits.cmp(&b.mec_bits))
            .then_with(|| a.hidden.cmp(&b.hidden))
    });
}

/// Trains one isolated run per width combination, in parallel.
pub fn sweep(base: &ExperimentSpec, plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    let count = plan.combinations();
    if count > MAX_SWEEP_COMBINATIONS {
        return Err(Error::Validation(format!(
            "sweep has {count} combinations; the limit is {MAX_SWEEP_COMBINATIONS}"
        )));
    }
    let hidden = base.topology.hidden().len();
    if let Some((layer, _)) = plan.ranges.iter().find(|(l, _)| *l > hidden) {
        return Err(Error::Validation(format!(
            "sweep varies layer{layer} but the base network has {hidden} hidden layer(s)"
        )));
    }
    let specs = plan
        .expand()
        .into_iter()
        .map(|widths| {
            let mut spec = base.clone();
            for (layer, width) in widths {
                if spec.topology.width(layer) != width {
                    spec.topology = spec.topology.apply(&Edit::SetWidth { layer, width })?;
                }
            }
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = specs
        .into_par_iter()
        .map(|spec| Experiment::new(spec)?.run().map(|r| SweepRow::from(&r)))
        .collect::<Result<Vec<_>>>()?;
    rank(&mut rows);
    Ok(rows)
}
