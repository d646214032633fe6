//! K-fold cross upper bound validation (CUBV) of linear classifiers and the
//! experimental apparatus around it: synthetic heterogeneous data,
//! permutation inference, Monte Carlo power, nested-CV intervals and
//! capacity analysis of linear separators.

pub mod bounds;
pub mod capacity;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod linmodel;
pub mod normal;
pub mod seed;
pub mod synthgen;
pub mod validate;

pub use bounds::{cubv_test, BoundConfig, BoundReport};
pub use capacity::{DichotomyCensus, PointSet};
pub use dataset::Dataset;
pub use error::{CubvError, Result};
pub use experiments::{ExperimentConfig, ResultBundle, Scenario};
pub use inference::{PermutationResult, PowerCurve, PowerMethod};
pub use linmodel::{LinearModel, PlsModel, StandardizationParams, TrainerConfig};
pub use synthgen::{ClusterSpec, ProblemParams, ProblemSpec};
pub use validate::{CvOutcome, FoldPlan, Interval};
