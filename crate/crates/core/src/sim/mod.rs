//! Deterministic end-to-end simulation with adversary probes.

mod population;
mod probes;
mod report;
mod run;
mod scenario;

pub use population::{diagnosis_schedule, generate_encounters, Diagnosis, EncounterEvent};
pub use probes::{
    detection_audit, relay_distinguisher_probe, snooper_probe, BroadcastObservation, DetectionResult,
    RelayProbeResult, SnooperResult,
};
pub use report::{GraphCheck, SimulationReport};
pub use run::{run_scenario, SimError, Simulation};
pub use scenario::{Protocol, Scenario, ScenarioError, DIAGNOSIS_JITTER_DAYS};
