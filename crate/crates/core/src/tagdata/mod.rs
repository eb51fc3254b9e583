//! Track/tag groundtruth: vocabularies, the sparse label matrix, dataset
//! splits, and annotation subsets drawn for re-annotation.
//!
//! A [`LabelMatrix`] is immutable once built and can be shared read-only
//! across workers.

mod annotation;
mod ingest;
mod matrix;
mod sampling;
mod vocab;

pub use annotation::{AnnotationRecord, AnnotationSet, SubsetKind, Verdict};
pub use ingest::{assign_splits, ingest_edge_list, ingest_edges, read_splits, SplitReport};
pub use matrix::LabelMatrix;
pub use sampling::{sample_balanced_subset, sample_random_subset};
pub use vocab::TagVocabulary;

use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Dataset partition a track belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Split {
    #[default]
    None,
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::None, Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::None => "none",
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Split::None => 0,
            Split::Train => 1,
            Split::Valid => 2,
            Split::Test => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Split> {
        Split::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// Restricts an operation to one split or to every track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitFilter {
    #[default]
    All,
    Only(Split),
}

impl SplitFilter {
    pub fn accepts(self, split: Split) -> bool {
        match self {
            SplitFilter::All => true,
            SplitFilter::Only(s) => s == split,
        }
    }
}

impl From<Split> for SplitFilter {
    fn from(s: Split) -> Self {
        SplitFilter::Only(s)
    }
}

impl fmt::Display for SplitFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitFilter::All => f.write_str("all"),
            SplitFilter::Only(s) => s.fmt(f),
        }
    }
}

impl FromStr for SplitFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            Ok(SplitFilter::All)
        } else {
            s.parse().map(SplitFilter::Only)
        }
    }
}
