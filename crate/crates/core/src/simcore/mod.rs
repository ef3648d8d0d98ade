//! Discrete-event core: scenarios, the scheduler and channel, transcripts,
//! replay verification, and the outcome-matrix sweep.
//!
//! Time is a logical tick. Message loss happens only when the attacker drops
//! a message.

pub mod channel;
pub mod replay;
pub mod scenario;
pub mod sim;
pub mod sweep;

use crate::adversary::{execute_attack, AttackError, AttackOutcome};

pub use channel::{Event, Record, Transcript};
pub use replay::{verify_transcript, ReplayMismatch, ReplayStats};
pub use scenario::{Diagnostic, Knobs, ScenarioConfig, ScenarioError, SCENARIO_VERSION};
pub use sim::{FinalStates, Simulation};
pub use sweep::{enumerate_outcomes, Cell, Expectations, Grid, Mismatch, OutcomeMatrix};

/// Results of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    /// Node states after the benign run.
    pub final_states: FinalStates,
    /// Transcript of the benign run (attacker capabilities active, no script).
    pub transcript: Transcript,
    /// One outcome per attack listed in the scenario, each on a fresh run.
    pub outcomes: Vec<AttackOutcome>,
}

/// Runs the benign procedure, then every listed attack on its own fresh
/// simulation.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, AttackError> {
    let mut sim = Simulation::new(config)?;
    sim.run_benign();
    let outcomes = config.attacks.iter().map(|a| execute_attack(*a, config)).collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioRun { final_states: sim.final_states(), transcript: sim.transcript, outcomes })
}
