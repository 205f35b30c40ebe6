use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Smallest accepted privacy budget. The debiasing constants divide by
/// `e^ε - 1`, so `ε = 0` is rejected outright.
pub const MIN_EPSILON: f64 = 1e-6;

/// Privacy budget, label-space size and (for d-subset selection) subset size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismParams {
    epsilon: f64,
    num_labels: usize,
    subset_size: Option<usize>,
}

impl MechanismParams {
    pub fn new(epsilon: f64, num_labels: usize) -> Result<Self> {
        let params = Self {
            epsilon,
            num_labels,
            subset_size: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_subset_size(epsilon: f64, num_labels: usize, subset_size: usize) -> Result<Self> {
        let params = Self {
            epsilon,
            num_labels,
            subset_size: Some(subset_size),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn subset_size(&self) -> Option<usize> {
        self.subset_size
    }

    pub fn exp_epsilon(&self) -> f64 {
        self.epsilon.exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < MIN_EPSILON {
            return Err(Error::InvalidParams(format!(
                "epsilon must be finite and at least {MIN_EPSILON}, got {}",
                self.epsilon
            )));
        }
        if self.num_labels < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 labels, got {}",
                self.num_labels
            )));
        }
        if let Some(d) = self.subset_size {
            if d == 0 || d >= self.num_labels {
                return Err(Error::InvalidParams(format!(
                    "subset size {d} outside [1, {}]",
                    self.num_labels - 1
                )));
            }
            // the d-subset moment analysis assumes d <= 2K/3
            if 3 * d > 2 * self.num_labels {
                return Err(Error::InvalidParams(format!(
                    "subset size {d} exceeds 2K/3 for K = {}",
                    self.num_labels
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self, value: usize) -> Result<Label> {
        Label::new(value, self.num_labels)
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (1..=self.num_labels).map(Label)
    }
}

/// A 1-based label in `[1, K]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(usize);

impl Label {
    pub fn new(value: usize, num_labels: usize) -> Result<Self> {
        if value == 0 || value > num_labels {
            return Err(Error::LabelOutOfRange {
                label: value,
                num_labels,
            });
        }
        Ok(Self(value))
    }

    /// Builds a label without a range check against K. The value must still be
    /// at least 1.
    pub fn from_value(value: usize) -> Result<Self> {
        if value == 0 {
            return Err(Error::LabelOutOfRange {
                label: 0,
                num_labels: 0,
            });
        }
        Ok(Self(value))
    }

    pub fn value(self) -> usize {
        self.0
    }

    /// Zero-based position of the label.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub(crate) fn from_index(index: usize) -> Self {
        Self(index + 1)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Randomizers whose output is a subset of the label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsetMechanism {
    BernoulliSubset,
    DSubset,
    Krr,
}

impl SubsetMechanism {
    pub const ALL: [SubsetMechanism; 3] = [Self::BernoulliSubset, Self::DSubset, Self::Krr];

    pub fn name(self) -> &'static str {
        Mechanism::from(self).name()
    }
}

impl fmt::Display for SubsetMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every training mechanism, including the gradient-vector randomizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    BernoulliSubset,
    DSubset,
    Krr,
    Djw,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Self::BernoulliSubset, Self::DSubset, Self::Krr, Self::Djw];

    /// Stable name used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Self::BernoulliSubset => "bernoulli-subset",
            Self::DSubset => "d-subset",
            Self::Krr => "krr",
            Self::Djw => "djw",
        }
    }

    pub fn as_subset(self) -> Option<SubsetMechanism> {
        match self {
            Self::BernoulliSubset => Some(SubsetMechanism::BernoulliSubset),
            Self::DSubset => Some(SubsetMechanism::DSubset),
            Self::Krr => Some(SubsetMechanism::Krr),
            Self::Djw => None,
        }
    }
}

impl From<SubsetMechanism> for Mechanism {
    fn from(m: SubsetMechanism) -> Self {
        match m {
            SubsetMechanism::BernoulliSubset => Self::BernoulliSubset,
            SubsetMechanism::DSubset => Self::DSubset,
            SubsetMechanism::Krr => Self::Krr,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidParams(format!("unknown mechanism `{s}`")))
    }
}

/// The privatized message a user sends: a subset of `[K]`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SanitizedSubset {
    members: Vec<Label>,
    num_labels: usize,
    mechanism: SubsetMechanism,
}

impl SanitizedSubset {
    /// Validates membership and the per-mechanism size invariants. `subset_size`
    /// is the required size for [`SubsetMechanism::DSubset`].
    pub fn new(
        mut members: Vec<Label>,
        num_labels: usize,
        mechanism: SubsetMechanism,
        subset_size: Option<usize>,
    ) -> Result<Self> {
        if let Some(bad) = members.iter().find(|l| l.value() > num_labels) {
            return Err(Error::LabelOutOfRange {
                label: bad.value(),
                num_labels,
            });
        }
        members.sort_unstable();
        let before = members.len();
        members.dedup();
        if members.len() != before {
            return Err(Error::InvalidParams("duplicate subset members".into()));
        }
        match mechanism {
            SubsetMechanism::Krr if members.len() != 1 => {
                return Err(Error::SubsetSize {
                    expected: 1,
                    found: members.len(),
                })
            }
            SubsetMechanism::DSubset => {
                let d = subset_size.ok_or_else(|| {
                    Error::InvalidParams("d-subset output requires a subset size".into())
                })?;
                if members.len() != d {
                    return Err(Error::SubsetSize {
                        expected: d,
                        found: members.len(),
                    });
                }
            }
            _ => {}
        }
        Ok(Self {
            members,
            num_labels,
            mechanism,
        })
    }

    /// Subset from a membership mask over zero-based label positions.
    pub(crate) fn from_mask(mask: &[bool], mechanism: SubsetMechanism) -> Self {
        let members = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| Label::from_index(i))
            .collect();
        Self {
            members,
            num_labels: mask.len(),
            mechanism,
        }
    }

    /// Subset from zero-based positions that are already sorted and distinct.
    pub(crate) fn from_sorted_indices(
        indices: impl IntoIterator<Item = usize>,
        num_labels: usize,
        mechanism: SubsetMechanism,
    ) -> Self {
        Self {
            members: indices.into_iter().map(Label::from_index).collect(),
            num_labels,
            mechanism,
        }
    }

    pub fn members(&self) -> &[Label] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn mechanism(&self) -> SubsetMechanism {
        self.mechanism
    }

    pub fn contains(&self, label: Label) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    /// Membership indicator over zero-based label positions.
    pub fn indicator(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_labels];
        for l in &self.members {
            mask[l.index()] = true;
        }
        mask
    }

    pub(crate) fn check_label_space(&self, params: &MechanismParams) -> Result<()> {
        if self.num_labels != params.num_labels() {
            return Err(Error::LabelSpaceMismatch {
                expected: params.num_labels(),
                found: self.num_labels,
            });
        }
        Ok(())
    }

    pub(crate) fn expect_mechanism(&self, expected: SubsetMechanism) -> Result<()> {
        if self.mechanism != expected {
            return Err(Error::MechanismMismatch {
                expected: expected.name(),
                found: self.mechanism.name(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for SanitizedSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, l) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("}")
    }
}
