//! Fixed-timestep simulation loop.
//!
//! A tick reads only the previous frame and runs, per agent in ascending id:
//!
//! 1. neighbor grid over the active agents;
//! 2. goal direction, desired speed, drive + agent repulsion + wall forces;
//! 3. integration to the new position and velocity, then the strength-limited
//!    speed ceiling;
//! 4. mechanical power of the frame-t drive at the frame-t velocity, and the
//!    strength update;
//! 5. contagion, hazard and exertion rates from frame-t panic and this tick's
//!    consumption, then the panic update;
//! 6. exit detection on the new position.
//!
//! Every agent's update is independent of the others within a tick, so the
//! per-agent work can fan out across threads without changing a single bit
//! of the result.

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{
    agent_repulsion, desired_speed, drive_force, integrate, speed_cap, wall_repulsion, ForceBreakdown,
    NonFiniteForce, World,
};
use crate::emotion::{contagion_rate, hazard_rate, james_lange_rate, update_panic, EmotionIncrement, HazardSource};
use crate::geom::Vec2;
use crate::model::{spawn_agents, validate_scenario, AgentState, ModelParams, PlacementError, ScenarioSpec, SimFrame, ValidationReport};
use crate::physiology::{mechanical_power, update_strength, StrengthLedger};
use crate::spatial::{build_grid, compute_nav_field, NavError, NavField};

/// Extra reach beyond two body radii for the repulsion neighborhood, m.
pub const CONTACT_MARGIN: f64 = 0.5;

/// Geodesic distance to an exit below which agents steer straight at it, m.
pub const FINAL_APPROACH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("tick {tick}: {source}")]
    NonFiniteForce {
        tick: u64,
        #[source]
        source: NonFiniteForce,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("scenario failed validation:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Navigation(#[from] NavError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// An agent leaving through an exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    pub id: usize,
    pub tick: u64,
    pub time: f64,
}

/// Everything a tick produces for one agent.
#[derive(Debug, Clone, Copy)]
struct AgentUpdate {
    state: AgentState,
    power: f64,
    consumed: f64,
    recovered: f64,
    exited_now: bool,
}

/// Immutable world shared by every tick of a run.
#[derive(Debug, Clone)]
pub struct Engine {
    params: ModelParams,
    dt: f64,
    world: World,
    nav: NavField,
    hazards: Vec<HazardSource>,
    interaction_radius: f64,
}

impl Engine {
    pub fn new(spec: &ScenarioSpec) -> Result<Self, NavError> {
        let params = spec.resolved_params();
        let nav = compute_nav_field(spec)?;
        let max_radius = spec
            .groups
            .iter()
            .filter(|g| g.count > 0)
            .map(|g| g.radius.hi)
            .fold(0.0, f64::max);
        Ok(Self::with_parts(
            params,
            spec.sim.dt,
            World::from_spec(spec),
            nav,
            spec.hazards.iter().map(|h| HazardSource::resolve(h, &params)).collect(),
            max_radius,
        ))
    }

    fn with_parts(
        params: ModelParams,
        dt: f64,
        world: World,
        nav: NavField,
        hazards: Vec<HazardSource>,
        max_radius: f64,
    ) -> Self {
        let interaction_radius = params.r_contagion.max(2.0 * max_radius + CONTACT_MARGIN);
        Self {
            params,
            dt,
            world,
            nav,
            hazards,
            interaction_radius,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn nav(&self) -> &NavField {
        &self.nav
    }

    /// Radius of the neighbor query used for both repulsion and contagion.
    pub fn interaction_radius(&self) -> f64 {
        self.interaction_radius
    }

    /// Goal direction for a disc of `radius` at `pos`.
    ///
    /// Within [`FINAL_APPROACH`] of an exit (geodesic) and with a clear line
    /// of sight, agents head straight for the nearest point of the exit's
    /// usable span (the segment shortened by the radius at both ends, so the
    /// disc clears the door posts). Elsewhere the navigation field decides;
    /// agents in a blocked cell head for the best open neighbor cell.
    pub fn goal(&self, pos: Vec2, radius: f64) -> Vec2 {
        match self.nav.goal_direction(pos) {
            Ok(d) => {
                let (i, j) = self.nav.cell_of(pos);
                if self.nav.dist_at(i, j) <= FINAL_APPROACH {
                    if let Some(q) = self.world.exit_approach_point(pos, radius) {
                        let to = q - pos;
                        if to.length() > 0.0 && self.world.line_of_sight(pos, q) {
                            return to.normalized_or_zero();
                        }
                    }
                }
                if d == Vec2::ZERO {
                    self.world
                        .nearest_exit_point(pos)
                        .map(|q| (q - pos).normalized_or_zero())
                        .unwrap_or(Vec2::ZERO)
                } else {
                    d
                }
            }
            Err(_) => self.nav.escape_direction(pos).unwrap_or(Vec2::ZERO),
        }
    }

    /// Force decomposition on `agent` given the frame it belongs to and its
    /// neighbor ids (ascending).
    pub fn forces(&self, agent: &AgentState, frame: &SimFrame, neighbors: &[(usize, f64)]) -> ForceBreakdown {
        let p = &self.params;
        let goal = self.goal(agent.pos, agent.radius);
        let v_des = desired_speed(agent.v_pref, agent.panic, agent.strength, p);
        let drive = drive_force(agent, goal, v_des, p);
        let mut repulsion = Vec2::ZERO;
        for &(j, _) in neighbors {
            repulsion += agent_repulsion(agent, &frame.agents[j], p);
        }
        let wall = wall_repulsion(agent, &self.world, p);
        ForceBreakdown::new(drive, repulsion, wall)
    }

    fn update_agent(&self, agent: &AgentState, frame: &SimFrame, grid: &crate::spatial::SpatialGrid) -> Result<AgentUpdate, NonFiniteForce> {
        if agent.exited {
            return Ok(AgentUpdate {
                state: *agent,
                power: 0.0,
                consumed: 0.0,
                recovered: 0.0,
                exited_now: false,
            });
        }
        let p = &self.params;
        let neighbors = grid.query_neighbors(agent.pos, self.interaction_radius, Some(agent.id));
        let forces = self.forces(agent, frame, &neighbors);

        let (pos, mut vel) = integrate(agent, forces.total, self.dt, p, &self.world)?;
        let ceiling = speed_cap(agent.strength, p);
        let speed = vel.length();
        if speed > ceiling {
            vel = vel * (ceiling / speed);
        }

        let power = mechanical_power(forces.drive, agent.vel);
        let strength = update_strength(agent.strength, power, agent.speed(), self.dt, p);

        let contagion = contagion_rate(
            agent.panic,
            neighbors
                .iter()
                .filter(|&&(_, d)| d <= p.r_contagion)
                .map(|&(j, d)| (frame.agents[j].panic, d)),
            p,
        );
        let inc = EmotionIncrement::new(
            contagion,
            hazard_rate(agent.pos, &self.hazards),
            james_lange_rate(strength.consumed, self.dt, p),
            agent.panic,
            p,
        );
        let panic = update_panic(agent.panic, &inc, self.dt);

        let exited_now = self.world.touches_exit(pos, agent.radius);
        let state = AgentState {
            pos,
            vel: if exited_now { Vec2::ZERO } else { vel },
            strength: strength.strength,
            panic,
            exited: exited_now,
            ..*agent
        };
        Ok(AgentUpdate {
            state,
            power,
            consumed: strength.consumed,
            recovered: strength.recovered,
            exited_now,
        })
    }

    fn advance(&self, frame: &SimFrame, parallel: bool) -> Result<(SimFrame, Vec<AgentUpdate>), StepError> {
        let grid = build_grid(&frame.agents, self.interaction_radius);
        let results: Vec<Result<AgentUpdate, NonFiniteForce>> = if parallel {
            frame
                .agents
                .par_iter()
                .map(|a| self.update_agent(a, frame, &grid))
                .collect()
        } else {
            frame
                .agents
                .iter()
                .map(|a| self.update_agent(a, frame, &grid))
                .collect()
        };
        let mut updates = Vec::with_capacity(results.len());
        for r in results {
            updates.push(r.map_err(|source| StepError::NonFiniteForce {
                tick: frame.tick,
                source,
            })?);
        }
        let tick = frame.tick + 1;
        let next = SimFrame {
            tick,
            time: tick as f64 * self.dt,
            agents: updates.iter().map(|u| u.state).collect(),
        };
        Ok((next, updates))
    }

    /// Advances one tick.
    pub fn step(&self, frame: &SimFrame) -> Result<SimFrame, StepError> {
        self.advance(frame, false).map(|(f, _)| f)
    }
}

/// Aggregates of one frame. Panic and speed average over active agents;
/// strength averages over the whole population, with exited agents holding
/// the reserve they left with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickMetrics {
    pub time: f64,
    pub exited: usize,
    pub mean_panic: f64,
    pub max_panic: f64,
    pub mean_strength_frac: f64,
    pub mean_speed: f64,
}

impl TickMetrics {
    pub fn of(frame: &SimFrame, s_max: f64) -> Self {
        let mut active = 0usize;
        let mut panic_sum = 0.0;
        let mut panic_max = 0.0_f64;
        let mut speed_sum = 0.0;
        let mut strength_sum = 0.0;
        for a in &frame.agents {
            strength_sum += a.strength / s_max;
            if a.exited {
                continue;
            }
            active += 1;
            panic_sum += a.panic;
            panic_max = panic_max.max(a.panic);
            speed_sum += a.speed();
        }
        let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
        Self {
            time: frame.time,
            exited: frame.agents.len() - active,
            mean_panic: mean(panic_sum, active),
            max_panic: if active == 0 { 0.0 } else { panic_max },
            mean_strength_frac: mean(strength_sum, frame.agents.len()),
            mean_speed: mean(speed_sum, active),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Time of the last exit, or `+inf` when someone is still inside.
    pub evacuation_time: f64,
    pub series: Vec<TickMetrics>,
}

impl MetricsReport {
    pub fn final_tick(&self) -> Option<&TickMetrics> {
        self.series.last()
    }
}

fn evacuation_time(population: usize, exits: &[ExitEvent]) -> f64 {
    if population == 0 {
        0.0
    } else if exits.len() == population {
        exits.iter().map(|e| e.time).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    }
}

/// Metrics over a complete per-tick frame sequence.
pub fn compute_metrics(frames: &[SimFrame], exits: &[ExitEvent], params: &ModelParams) -> MetricsReport {
    let population = frames.first().map_or(0, |f| f.agents.len());
    MetricsReport {
        evacuation_time: evacuation_time(population, exits),
        series: frames.iter().map(|f| TickMetrics::of(f, params.s_max)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub scenario: ScenarioSpec,
    pub params: ModelParams,
    /// Sampled every `output_every` ticks plus the final frame.
    pub frames: Vec<SimFrame>,
    pub exits: Vec<ExitEvent>,
    pub metrics: MetricsReport,
    /// Indexed by agent id.
    pub ledger: Vec<StrengthLedger>,
    pub initial_strength: Vec<f64>,
}

impl SimRun {
    pub fn final_frame(&self) -> &SimFrame {
        self.frames.last().expect("a run always holds the initial frame")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for the per-agent stages; 1 runs on the calling thread.
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

/// Number of ticks that fit in the horizon.
pub fn tick_budget(max_time: f64, dt: f64) -> u64 {
    ((max_time / dt) + 1e-9).floor() as u64
}

pub fn run(spec: &ScenarioSpec) -> Result<SimRun, RunError> {
    run_with(spec, RunOptions::default())
}

pub fn run_with(spec: &ScenarioSpec, opts: RunOptions) -> Result<SimRun, RunError> {
    let report = validate_scenario(spec);
    if !report.is_ok() {
        return Err(RunError::ValidationFailed(report));
    }
    let agents = spawn_agents(spec, spec.sim.seed)?;
    let engine = Engine::new(spec)?;
    let frame = SimFrame::initial(agents);
    if opts.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(|| simulate(spec, &engine, frame, true))
    } else {
        simulate(spec, &engine, frame, false)
    }
}

fn simulate(spec: &ScenarioSpec, engine: &Engine, mut frame: SimFrame, parallel: bool) -> Result<SimRun, RunError> {
    let params = *engine.params();
    let population = frame.agents.len();
    let every = spec.sim.output_every.max(1);
    let max_ticks = tick_budget(spec.sim.max_time, spec.sim.dt);

    let initial_strength: Vec<f64> = frame.agents.iter().map(|a| a.strength).collect();
    let mut ledger = vec![StrengthLedger::default(); population];
    let mut exits = Vec::new();
    let mut series = vec![TickMetrics::of(&frame, params.s_max)];
    let mut frames = vec![frame.clone()];
    let mut active = frame.active().count();

    while active > 0 && frame.tick < max_ticks {
        let (next, updates) = engine.advance(&frame, parallel)?;
        for (id, u) in updates.iter().enumerate() {
            if frame.agents[id].exited {
                continue;
            }
            ledger[id].consumed += u.consumed;
            ledger[id].recovered += u.recovered;
            ledger[id].last_power = u.power;
            if u.exited_now {
                exits.push(ExitEvent {
                    id,
                    tick: next.tick,
                    time: next.time,
                });
                active -= 1;
            }
        }
        frame = next;
        series.push(TickMetrics::of(&frame, params.s_max));
        if frame.tick.is_multiple_of(every) {
            frames.push(frame.clone());
        }
    }
    if frames.last().map(|f| f.tick) != Some(frame.tick) {
        frames.push(frame);
    }

    Ok(SimRun {
        scenario: spec.clone(),
        params,
        frames,
        metrics: MetricsReport {
            evacuation_time: evacuation_time(population, &exits),
            series,
        },
        exits,
        ledger,
        initial_strength,
    })
}
