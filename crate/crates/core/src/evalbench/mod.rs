//! Scoring, baselines and the experiment harness.

mod baselines;
mod experiment;
mod metrics;

pub use baselines::{train_mlp, MlpConfig, MlpPlanner, NearestNeighbor, TaskAbsent};
pub use metrics::{score, Confusion, LengthMismatch, SequenceEval, ABSENT, CONFUSION_DIM};
pub use experiment::{
    evaluate_planner, experiment_arms, Arm, ArmReport, AogReport, ExperimentConfig, ExperimentError, NoiseReport, Profile,
    Report, SplitEval, Workbench,
    EXPERIMENTS, REPORT_SCHEMA,
};
