//! The seven fixed input transforms of the 2-D playground and the selection
//! of which ones feed the network.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// An input transform of a point `(x1, x2)`. Variant order is the canonical
/// column order of a [`FeatureView`](crate::dataset::FeatureView).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Feature {
    X1,
    X2,
    X1Squared,
    X2Squared,
    X1X2,
    SinX1,
    SinX2,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Self::X1,
        Self::X2,
        Self::X1Squared,
        Self::X2Squared,
        Self::X1X2,
        Self::SinX1,
        Self::SinX2,
    ];

    #[inline]
    pub fn eval(self, x1: f64, x2: f64) -> f64 {
        match self {
            Self::X1 => x1,
            Self::X2 => x2,
            Self::X1Squared => x1 * x1,
            Self::X2Squared => x2 * x2,
            Self::X1X2 => x1 * x2,
            Self::SinX1 => libm::sin(x1),
            Self::SinX2 => libm::sin(x2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X1 => "x1",
            Self::X2 => "x2",
            Self::X1Squared => "x1_squared",
            Self::X2Squared => "x2_squared",
            Self::X1X2 => "x1_x2",
            Self::SinX1 => "sin_x1",
            Self::SinX2 => "sin_x2",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|feat| feat.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature `{s}`")))
    }
}

/// Non-empty set of selected features.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Feature>", into = "Vec<Feature>"))]
pub struct FeatureSelection(u8);

impl FeatureSelection {
    pub fn new(features: &[Feature]) -> Result<Self> {
        let bits = features.iter().fold(0u8, |acc, f| acc | f.bit());
        if bits == 0 {
            return Err(Error::Topology("at least one input feature must be selected".into()));
        }
        Ok(Self(bits))
    }

    pub fn contains(self, feature: Feature) -> bool {
        self.0 & feature.bit() != 0
    }

    /// Number of selected features (the input dimension `d`).
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Selected features in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    pub fn to_vec(self) -> Vec<Feature> {
        self.iter().collect()
    }

    /// Position of `feature` among the selected columns.
    pub fn column_of(self, feature: Feature) -> Option<usize> {
        self.iter().position(|f| f == feature)
    }
}

impl Default for FeatureSelection {
    fn default() -> Self {
        Self(Feature::X1.bit() | Feature::X2.bit())
    }
}

impl fmt::Debug for FeatureSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl TryFrom<Vec<Feature>> for FeatureSelection {
    type Error = Error;

    fn try_from(v: Vec<Feature>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<FeatureSelection> for Vec<Feature> {
    fn from(s: FeatureSelection) -> Self {
        s.to_vec()
    }
}
