//! Gradient boosting of rule ensembles.

mod boosting;
mod evaluation;
mod refinement;

pub use boosting::{best_refinement, refine_rule, train, TrainConfig, TrainTiming};
pub use evaluation::{evaluate_candidate, CandidateEvaluator, Evaluation};
pub use refinement::{Candidate, SortedAttributes, TIE_EPSILON};
