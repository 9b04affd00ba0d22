#![allow(dead_code)]

use evac_core::dynamics::{drive_force, integrate, World};
use evac_core::emotion::{james_lange_rate, update_panic, EmotionIncrement};
use evac_core::model::{Range, SpawnGroup};
use evac_core::physiology::{mechanical_power, update_strength};
use evac_core::{AgentState, ModelParams, Rect, ScenarioSpec, Segment, Vec2};

/// 20 x 20 m room, 2 m exit centered on the east wall, `n` agents in the
/// western two thirds.
pub fn open_room(n: usize, seed: u64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::room(20.0, 20.0);
    spec.exits.push(Segment::new(Vec2::new(20.0, 9.0), Vec2::new(20.0, 11.0)));
    spec.groups.push(SpawnGroup::new(n, Rect::new(1.0, 1.0, 12.0, 18.0)));
    spec.sim.seed = seed;
    spec.sim.max_time = 60.0;
    spec.sim.output_every = 1;
    spec
}

/// The 200-agent room used for determinism and energy checks.
pub fn canonical_room() -> ScenarioSpec {
    open_room(200, 42)
}

/// 15 x 15 m room with a 1 m door in the middle of the east wall.
pub fn narrow_door(n: usize, seed: u64, panic: f64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::room(15.0, 15.0);
    spec.exits.push(Segment::new(Vec2::new(15.0, 7.0), Vec2::new(15.0, 8.0)));
    let mut g = SpawnGroup::new(n, Rect::new(1.0, 1.0, 10.0, 13.0));
    g.radius = Range::new(0.25, 0.3);
    g.panic = Range::fixed(panic);
    spec.groups.push(g);
    spec.sim.seed = seed;
    spec.sim.max_time = 300.0;
    spec.sim.output_every = 100;
    spec
}

/// Room with a pillar and a partition, two exits.
pub fn obstacle_room(n: usize, seed: u64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::room(16.0, 12.0);
    spec.exits.push(Segment::new(Vec2::new(16.0, 5.0), Vec2::new(16.0, 7.0)));
    spec.exits.push(Segment::new(Vec2::new(7.0, 12.0), Vec2::new(8.5, 12.0)));
    spec.obstacles.push(Rect::new(9.0, 4.0, 1.5, 4.0));
    spec.obstacles.push(Rect::new(4.0, 0.0, 0.5, 5.0));
    spec.groups.push(SpawnGroup::new(n, Rect::new(0.5, 0.5, 3.0, 11.0)));
    spec.sim.seed = seed;
    spec.sim.max_time = 90.0;
    spec
}

/// Twin experiment on the physiology and emotion layers: one agent driven
/// toward (1, 0) at its preferred speed, one held still, in empty space.
/// Returns `(walker_panic, stationary_panic)` after every tick.
pub fn james_lange_twins(params: &ModelParams, dt: f64, ticks: usize) -> Vec<(f64, f64)> {
    let mut spec = ScenarioSpec::room(1e6, 1e6);
    spec.domain.cell_size = 1e3;
    let world = World::from_spec(&spec);
    let base = AgentState {
        id: 0,
        pos: Vec2::new(5e5, 5e5),
        vel: Vec2::ZERO,
        radius: 0.25,
        mass: 80.0,
        v_pref: 1.5,
        strength: params.s_max,
        panic: 0.0,
        exited: false,
    };
    let mut walker = base;
    let mut still = AgentState { id: 1, ..base };
    let mut out = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        for (agent, goal) in [(&mut walker, Vec2::new(1.0, 0.0)), (&mut still, Vec2::ZERO)] {
            let drive = drive_force(agent, goal, agent.v_pref, params);
            let (pos, vel) = integrate(agent, drive, dt, params, &world).unwrap();
            let power = mechanical_power(drive, agent.vel);
            let s = update_strength(agent.strength, power, agent.speed(), dt, params);
            let inc = EmotionIncrement::new(0.0, 0.0, james_lange_rate(s.consumed, dt, params), agent.panic, params);
            agent.panic = update_panic(agent.panic, &inc, dt);
            agent.strength = s.strength;
            agent.pos = pos;
            agent.vel = vel;
        }
        out.push((walker.panic, still.panic));
    }
    out
}

/// Closed-form continuous-time panic of the twins at time `t`.
///
/// Walker velocity relaxes as `v(t) = v (1 - e^{-t/tau})`, so the drive power
/// is `P(t) = K (e^{-t/tau} - e^{-2t/tau})` with `K = m v^2 / tau`. Panic
/// obeys `dE/dt = gamma (c + P) / P_ref - delta E`, whose solution from 0 is
/// a sum of exponential convolutions.
pub fn james_lange_closed_form(params: &ModelParams, mass: f64, v: f64, t: f64) -> (f64, f64) {
    let delta = params.delta_decay;
    let a = 1.0 / params.tau;
    let k = mass * v * v / params.tau;
    let g = params.gamma_jl / params.p_ref;
    let conv = |rate: f64| ((-rate * t).exp() - (-delta * t).exp()) / (delta - rate);
    let basal = params.c_basal * (1.0 - (-delta * t).exp()) / delta;
    let still = g * basal;
    let walker = g * (basal + k * (conv(a) - conv(2.0 * a)));
    (walker, still)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
