//! Command grammar, point-mass swarm simulator and scenario files.

mod command;
mod scenario;
mod sim;

pub use command::{
    detokenize, load_dataset, parse_command, parse_dataset, render_command,
    token_cosine_similarity, tokenize, CommandAst, Modifier, Verb, VOCAB, V_MAX,
};
pub use scenario::{
    metrics_csv, run_schedule, run_scripted, ObstacleSpec, Scenario, ScenarioOutcome, ScriptEntry,
    UavSpec, WaypointSpec,
};
pub use sim::{
    formation_metrics, reward_score, swarm_step, Aabb, FormationReport, RewardWeights, SwarmState,
    UavState, CRUISE_SPEED, DRAIN_PER_METER, FORMATION_SCALE, NAV_ERROR_SCALE,
};
