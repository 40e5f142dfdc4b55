//! Synthetic-crowd harness: agents with known ground truth answer the
//! platform's stream end to end, and the outcome is scored.

pub mod agent;
pub mod eval;
pub mod run;
pub mod truth;

pub use agent::{agent_answer, AgentProfile};
pub use eval::{evaluate_structure, evaluate_weights, weight_rmse, StructureScore, WeightScore};
pub use run::{simulate, RunReport, Scenario, Schedule, SimRun};
pub use truth::GroundTruthSoo;
