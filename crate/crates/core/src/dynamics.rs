//! Social-force locomotion.
//!
//! Each agent feels a driving force relaxing its velocity toward the desired
//! velocity, exponential social repulsion plus body compression and sliding
//! friction from other agents, and the same interaction from walls and
//! obstacles. Panic raises the desired speed; depleted strength caps it.

use thiserror::Error;

use crate::geom::{Rect, Segment, Vec2};
use crate::model::{AgentState, ModelParams, ScenarioSpec};

/// Distance below which two centers are treated as coincident.
pub const DEGENERATE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    pub drive: Vec2,
    pub repulsion: Vec2,
    pub wall: Vec2,
    pub total: Vec2,
}

impl ForceBreakdown {
    pub fn new(drive: Vec2, repulsion: Vec2, wall: Vec2) -> Self {
        Self {
            drive,
            repulsion,
            wall,
            total: drive + repulsion + wall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("non-finite force ({fx}, {fy}) on agent {id}")]
pub struct NonFiniteForce {
    pub id: usize,
    pub fx: f64,
    pub fy: f64,
}

/// Strength-limited speed ceiling: `v_crawl` when empty, `v_phys` when full.
pub fn speed_cap(strength: f64, params: &ModelParams) -> f64 {
    let frac = (strength / params.s_max).clamp(0.0, 1.0);
    params.v_crawl + (params.v_phys - params.v_crawl) * frac.powf(params.kappa_fat)
}

pub fn desired_speed(v_pref: f64, panic: f64, strength: f64, params: &ModelParams) -> f64 {
    let wanted = v_pref * (1.0 + params.alpha_p * panic);
    wanted.min(speed_cap(strength, params))
}

/// `m (v_des * goal - vel) / tau`.
pub fn drive_force(agent: &AgentState, goal: Vec2, v_des: f64, params: &ModelParams) -> Vec2 {
    (goal * v_des - agent.vel) * (agent.mass / params.tau)
}

#[inline]
fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Interaction with contact distance `r`, center distance `d`, unit normal
/// `n` pointing toward the receiving agent, and relative tangential velocity.
#[inline]
fn interaction(r: f64, d: f64, n: Vec2, rel_vel: Vec2, params: &ModelParams) -> Vec2 {
    let overlap = positive_part(r - d);
    let t = n.perp();
    let normal = params.a_rep * ((r - d) / params.b_rep).exp() + params.k_body * overlap;
    let tangential = params.kappa_fric * overlap * rel_vel.dot(t);
    n * normal + t * tangential
}

/// Fallback normal for coincident centers, keyed on the agent id.
pub fn degenerate_normal(id: usize) -> Vec2 {
    let angle = (id % 8) as f64 * std::f64::consts::FRAC_PI_4;
    Vec2::new(angle.cos(), angle.sin())
}

/// Force on `a` from `b`.
pub fn agent_repulsion(a: &AgentState, b: &AgentState, params: &ModelParams) -> Vec2 {
    let diff = a.pos - b.pos;
    let mut d = diff.length();
    let n = if d < DEGENERATE_DISTANCE {
        d = DEGENERATE_DISTANCE;
        degenerate_normal(a.id)
    } else {
        diff / d
    };
    interaction(a.radius + b.radius, d, n, b.vel - a.vel, params)
}

/// Static geometry the agents collide with: the domain box minus exit
/// openings, and the obstacle rectangles.
#[derive(Debug, Clone)]
pub struct World {
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
    pub exits: Vec<Segment>,
    /// Solid pieces of the W, E, S, N domain walls, in that order.
    pub walls: [Vec<Segment>; 4],
}

const COLLINEAR_EPS: f64 = 1e-9;

/// Parts of `[lo, hi]` not covered by any of `holes`.
fn subtract_intervals(lo: f64, hi: f64, mut holes: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    holes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cursor = lo;
    for (a, b) in holes {
        if a > cursor {
            out.push((cursor, a.min(hi)));
        }
        cursor = cursor.max(b);
        if cursor >= hi {
            break;
        }
    }
    if cursor < hi {
        out.push((cursor, hi));
    }
    out.retain(|(a, b)| b > a);
    out
}

impl World {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        let w = spec.domain.width;
        let h = spec.domain.height;

        let on_line = |e: &Segment, vertical: bool, at: f64| -> Option<(f64, f64)> {
            let (p, q) = if vertical { (e.a.x, e.b.x) } else { (e.a.y, e.b.y) };
            if (p - at).abs() < COLLINEAR_EPS && (q - at).abs() < COLLINEAR_EPS {
                let (s, t) = if vertical { (e.a.y, e.b.y) } else { (e.a.x, e.b.x) };
                Some((s.min(t), s.max(t)))
            } else {
                None
            }
        };

        let build = |vertical: bool, at: f64, len: f64| -> Vec<Segment> {
            let holes = spec.exits.iter().filter_map(|e| on_line(e, vertical, at)).collect();
            subtract_intervals(0.0, len, holes)
                .into_iter()
                .map(|(s, t)| {
                    if vertical {
                        Segment::new(Vec2::new(at, s), Vec2::new(at, t))
                    } else {
                        Segment::new(Vec2::new(s, at), Vec2::new(t, at))
                    }
                })
                .collect()
        };

        Self {
            bounds: spec.domain.rect(),
            obstacles: spec.obstacles.clone(),
            exits: spec.exits.clone(),
            walls: [build(true, 0.0, h), build(true, w, h), build(false, 0.0, w), build(false, h, w)],
        }
    }

    /// Whether the agent's disc touches an exit segment.
    pub fn touches_exit(&self, pos: Vec2, radius: f64) -> bool {
        self.exits
            .iter()
            .any(|e| e.distance_to(pos) <= radius + COLLINEAR_EPS)
    }

    /// Closest point to `pos` on the part of any exit a disc of `radius`
    /// can pass through without touching the ends; the midpoint for exits
    /// narrower than the disc. Ties go to the lowest exit index.
    pub fn exit_approach_point(&self, pos: Vec2, radius: f64) -> Option<Vec2> {
        let mut best: Option<(f64, Vec2)> = None;
        for e in &self.exits {
            let len = e.length();
            let usable = if len > 2.0 * radius {
                let dir = (e.b - e.a) / len;
                Segment::new(e.a + dir * radius, e.b - dir * radius)
            } else {
                let mid = (e.a + e.b) * 0.5;
                Segment::new(mid, mid)
            };
            let q = usable.closest_point(pos);
            let d = q.distance(pos);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
        best.map(|(_, q)| q)
    }

    /// No obstacle interior between the two points.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        !self.obstacles.iter().any(|o| o.segment_hits_interior(a, b))
    }

    /// Closest point on any exit segment, ties to the lowest index.
    pub fn nearest_exit_point(&self, pos: Vec2) -> Option<Vec2> {
        let mut best: Option<(f64, Vec2)> = None;
        for e in &self.exits {
            let q = e.closest_point(pos);
            let d = q.distance(pos);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
        best.map(|(_, q)| q)
    }
}

/// Summed wall and obstacle force on `a`: domain walls W, E, S, N then
/// obstacles by index. Wall stretches covered by an exit push nothing.
pub fn wall_repulsion(a: &AgentState, world: &World, params: &ModelParams) -> Vec2 {
    let mut total = Vec2::ZERO;
    let rel_vel = -a.vel;
    for pieces in &world.walls {
        let mut best: Option<(f64, Vec2)> = None;
        for s in pieces {
            let q = s.closest_point(a.pos);
            let d = q.distance(a.pos);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
        let Some((d, q)) = best else { continue };
        let (d, n) = if d < DEGENERATE_DISTANCE {
            (DEGENERATE_DISTANCE, degenerate_normal(a.id))
        } else {
            (d, (a.pos - q) / d)
        };
        total += interaction(a.radius, d, n, rel_vel, params);
    }
    for o in &world.obstacles {
        let (d, n) = o.signed_distance(a.pos);
        total += interaction(a.radius, d, n, rel_vel, params);
    }
    total
}

/// Semi-implicit Euler step with the hard speed cap, followed by confining
/// the disc to the domain and pushing it out of obstacles.
pub fn integrate(
    agent: &AgentState,
    total_force: Vec2,
    dt: f64,
    params: &ModelParams,
    world: &World,
) -> Result<(Vec2, Vec2), NonFiniteForce> {
    if !total_force.is_finite() {
        return Err(NonFiniteForce {
            id: agent.id,
            fx: total_force.x,
            fy: total_force.y,
        });
    }
    let mut vel = agent.vel + total_force * (dt / agent.mass);
    let speed = vel.length();
    if speed > params.v_hard {
        vel = vel * (params.v_hard / speed);
    }
    let pos = confine(agent.pos + vel * dt, agent.radius, world);
    Ok((pos, vel))
}

fn clamp_axis(v: f64, lo: f64, hi: f64) -> f64 {
    if lo > hi {
        0.5 * (lo + hi)
    } else {
        v.max(lo).min(hi)
    }
}

/// Moves a disc center into free space.
pub fn confine(mut pos: Vec2, radius: f64, world: &World) -> Vec2 {
    let b = world.bounds;
    for _ in 0..4 {
        pos.x = clamp_axis(pos.x, b.x + radius, b.x + b.w - radius);
        pos.y = clamp_axis(pos.y, b.y + radius, b.y + b.h - radius);
        let mut moved = false;
        for o in &world.obstacles {
            let (d, n) = o.signed_distance(pos);
            if d < radius {
                pos += n * (radius - d);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    pos
}
