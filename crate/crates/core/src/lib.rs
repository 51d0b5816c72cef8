pub mod action_planner;
pub mod aog_planner;
pub mod context;
pub mod evalbench;
pub mod grammar;
pub mod neural;
pub mod vocab;
pub mod worldgen;
