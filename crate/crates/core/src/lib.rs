//! Deterministic 2D crowd-evacuation simulator.
//!
//! Agents are discs moved by a social-force model. Each carries a strength
//! reserve drained by the mechanical work of its own driving force, and a
//! panic level fed by contagion from nearby agents, hazard proximity and its
//! own exertion. Panic raises the desired walking speed; low strength caps it.
//!
//! The loop is noise-free: all randomness happens once, when agents are
//! spawned from the scenario seed, so a scenario file fully determines the
//! output bytes.

pub mod dynamics;
pub mod emotion;
pub mod engine;
pub mod geom;
pub mod io;
pub mod model;
pub mod physiology;
pub mod spatial;

pub use engine::{compute_metrics, run, run_with, Engine, MetricsReport, RunError, RunOptions, SimRun};
pub use geom::{Rect, Segment, Vec2};
pub use model::{spawn_agents, validate_scenario, AgentState, ModelParams, ParamKey, ScenarioSpec, SimFrame};
