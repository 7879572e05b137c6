//! Scenario files: a TOML document describing initial UAV states, the
//! formation spacing, obstacle boxes, a timed command script with optional
//! sensor-report text per entry, and run parameters. Execution turns the
//! script into a per-step command schedule, simulates it, and reports the
//! formation metrics, reward and a CSV summary.

use crate::error::{Error, Result};
use crate::swarm::command::{parse_command, CommandAst};
use crate::swarm::sim::{
    formation_metrics, reward_score, swarm_step, Aabb, FormationReport, RewardWeights, SwarmState,
    UavState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    pub spacing: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub energy_budget: f64,
    #[serde(default)]
    pub home: [f64; 3],
    #[serde(rename = "uav")]
    pub uavs: Vec<UavSpec>,
    #[serde(rename = "obstacle", default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(rename = "script", default)]
    pub script: Vec<ScriptEntry>,
    /// Informational waypoints; the planned trajectory used by the metrics
    /// is the noise-free execution of the script.
    #[serde(rename = "waypoint", default)]
    pub waypoints: Vec<WaypointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub position: [f64; 3],
    #[serde(default = "full_battery")]
    pub battery: f64,
}

fn full_battery() -> f64 {
    100.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// One timed script entry: at `step`, aircraft `uav` (or all, if omitted)
/// switches to `command`. `sensor` carries the sensor-report text that an
/// encrypted run feeds to the language model to regenerate the command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub step: usize,
    pub uav: Option<usize>,
    pub command: String,
    #[serde(default)]
    pub sensor: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub uav: usize,
    pub step: usize,
    pub position: [f64; 3],
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::Format(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("scenario {}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.uavs.is_empty() {
            return Err(Error::Format("field `uav`: at least one aircraft required".into()));
        }
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::Format(format!("field `dt`: {} must be positive", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::Format("field `steps`: must be positive".into()));
        }
        if self.spacing <= 0.0 || !self.spacing.is_finite() {
            return Err(Error::Format(format!(
                "field `spacing`: {} must be positive",
                self.spacing
            )));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::Format(format!(
                "field `noise_sigma`: {} must be nonnegative",
                self.noise_sigma
            )));
        }
        if self.energy_budget <= 0.0 || !self.energy_budget.is_finite() {
            return Err(Error::Format(format!(
                "field `energy_budget`: {} must be positive",
                self.energy_budget
            )));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if (0..3).any(|k| o.min[k] > o.max[k]) {
                return Err(Error::Format(format!(
                    "field `obstacle[{i}]`: min exceeds max"
                )));
            }
        }
        for (i, e) in self.script.iter().enumerate() {
            if e.step >= self.steps {
                return Err(Error::Format(format!(
                    "field `script[{i}].step`: {} outside 0..{}",
                    e.step, self.steps
                )));
            }
            if let Some(u) = e.uav {
                if u >= self.uavs.len() {
                    return Err(Error::Format(format!(
                        "field `script[{i}].uav`: {u} outside fleet of {}",
                        self.uavs.len()
                    )));
                }
            }
            parse_command(&e.command)
                .map_err(|err| Error::Format(format!("field `script[{i}].command`: {err}")))?;
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.uav >= self.uavs.len() {
                return Err(Error::Format(format!(
                    "field `waypoint[{i}].uav`: {} outside fleet of {}",
                    w.uav,
                    self.uavs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<SwarmState> {
        let uavs = self
            .uavs
            .iter()
            .map(|u| UavState {
                position: u.position,
                velocity: [0.0; 3],
                battery: u.battery,
            })
            .collect();
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| Aabb { min: o.min, max: o.max })
            .collect();
        SwarmState::new(uavs, self.spacing, obstacles, self.home)
    }

    /// Expands the timed script into `steps` rows of one command per
    /// aircraft. A command stays active until replaced; aircraft without
    /// a script entry hold position.
    pub fn schedule(&self) -> Result<Vec<Vec<CommandAst>>> {
        self.schedule_with(|e| parse_command(&e.command))
    }

    /// Like [`Scenario::schedule`] but lets the caller supply the command
    /// for each script entry, e.g. model-generated text instead of the
    /// scripted ground truth.
    pub fn schedule_with<F>(&self, mut command_of: F) -> Result<Vec<Vec<CommandAst>>>
    where
        F: FnMut(&ScriptEntry) -> Result<CommandAst>,
    {
        let n = self.uavs.len();
        let mut current = vec![CommandAst::hold(); n];
        let mut by_step: Vec<Vec<(usize, CommandAst)>> = vec![Vec::new(); self.steps];
        for e in &self.script {
            let cmd = command_of(e)?;
            match e.uav {
                Some(u) => by_step[e.step].push((u, cmd)),
                None => {
                    for u in 0..n {
                        by_step[e.step].push((u, cmd.clone()));
                    }
                }
            }
        }
        let mut schedule = Vec::with_capacity(self.steps);
        for updates in by_step {
            for (u, cmd) in updates {
                current[u] = cmd;
            }
            schedule.push(current.clone());
        }
        Ok(schedule)
    }
}

/// Result of simulating a schedule against a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trace: Vec<SwarmState>,
    pub report: FormationReport,
    pub reward: f64,
}

/// Simulates `schedule` (one command row per step) under the scenario's
/// noise and parameters. The planned trajectory the metrics compare
/// against is a second, noise-free run of the same schedule.
pub fn run_schedule(scenario: &Scenario, schedule: &[Vec<CommandAst>]) -> Result<ScenarioOutcome> {
    if schedule.len() != scenario.steps {
        return Err(Error::Shape(format!(
            "schedule has {} steps, scenario wants {}",
            schedule.len(),
            scenario.steps
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut actual = scenario.initial_state()?;
    let mut reference = actual.clone();
    let mut trace = Vec::with_capacity(scenario.steps);
    let mut planned = Vec::with_capacity(scenario.steps);
    // the reference run shares no randomness with the noisy run, so give
    // it a throwaway stream
    let mut ref_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x9e37_79b9);
    for cmds in schedule {
        actual = swarm_step(&actual, cmds, scenario.dt, scenario.noise_sigma, &mut rng)?;
        reference = swarm_step(&reference, cmds, scenario.dt, 0.0, &mut ref_rng)?;
        planned.push(reference.uavs.iter().map(|u| u.position).collect::<Vec<_>>());
        trace.push(actual.clone());
    }
    let report = formation_metrics(&trace, &planned)?;
    let end = trace.last().unwrap();
    let reward = reward_score(&report, end, 0, scenario.energy_budget, &RewardWeights::equal())?;
    Ok(ScenarioOutcome { trace, report, reward })
}

/// Runs the scenario's own scripted commands.
pub fn run_scripted(scenario: &Scenario) -> Result<ScenarioOutcome> {
    let schedule = scenario.schedule()?;
    run_schedule(scenario, &schedule)
}

/// One-line-per-metric CSV summary of an outcome.
pub fn metrics_csv(name: &str, outcome: &ScenarioOutcome) -> String {
    let end = outcome.trace.last().expect("nonempty trace");
    let mut out = String::from(
        "scenario,steps,trajectory_error_m,formation_rms_m,avoidance_rate,avoidance_events,collisions,energy_used_m,reward\n",
    );
    out.push_str(&format!(
        "{},{},{:.6},{:.6},{:.6},{},{},{:.6},{:.6}\n",
        name,
        outcome.trace.len(),
        outcome.report.trajectory_error,
        outcome.report.formation_rms,
        outcome.report.avoidance_rate,
        end.avoidance_events,
        end.collisions,
        end.energy_used,
        outcome.reward,
    ));
    out
}
