//! Panic dynamics.
//!
//! Panic rises through three drives (contagion from more-panicked neighbors,
//! proximity to hazards, and the agent's own exertion) and relaxes through a
//! linear decay. Exertion feeding panic is the bodily-response-first reading:
//! the harder an agent works, the more afraid it becomes.

use crate::geom::Vec2;
use crate::model::{Hazard, ModelParams};

/// Additive panic rates for one tick, all in 1/s and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmotionIncrement {
    pub contagion: f64,
    pub hazard: f64,
    pub james_lange: f64,
    /// Decay rate already multiplied by the current panic.
    pub decay: f64,
}

impl EmotionIncrement {
    pub fn new(contagion: f64, hazard: f64, james_lange: f64, panic: f64, params: &ModelParams) -> Self {
        Self {
            contagion,
            hazard,
            james_lange,
            decay: params.delta_decay * panic,
        }
    }

    pub fn net(&self) -> f64 {
        self.contagion + self.hazard + self.james_lange - self.decay
    }
}

/// Contagion kernel, linear from 1 at contact to 0 at the perception radius.
#[inline]
pub fn contagion_weight(distance: f64, params: &ModelParams) -> f64 {
    (1.0 - distance / params.r_contagion).max(0.0)
}

/// `beta * sum w(d_j) * max(0, E_j - E_self)` over `(panic, distance)` pairs,
/// which callers supply in ascending neighbor id.
pub fn contagion_rate<I>(self_panic: f64, neighbors: I, params: &ModelParams) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut sum = 0.0;
    for (panic, d) in neighbors {
        sum += contagion_weight(d, params) * (panic - self_panic).max(0.0);
    }
    params.beta * sum
}

/// Hazard with its drive and decay length resolved against the params.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardSource {
    pub pos: Vec2,
    pub drive: f64,
    pub decay_length: f64,
}

impl HazardSource {
    pub fn resolve(h: &Hazard, params: &ModelParams) -> Self {
        Self {
            pos: h.pos,
            drive: h.a_h.unwrap_or(params.a_h),
            decay_length: h.lambda_h.unwrap_or(params.lambda_h),
        }
    }
}

pub fn hazard_rate(pos: Vec2, hazards: &[HazardSource]) -> f64 {
    hazards
        .iter()
        .map(|h| h.drive * (-pos.distance(h.pos) / h.decay_length).exp())
        .sum()
}

/// Arousal from this tick's strength consumption, normalized by `p_ref`.
pub fn james_lange_rate(consumed_this_tick: f64, dt: f64, params: &ModelParams) -> f64 {
    params.gamma_jl * (consumed_this_tick / dt) / params.p_ref
}

/// Explicit Euler step clamped to `[0, 1]`.
pub fn update_panic(panic: f64, inc: &EmotionIncrement, dt: f64) -> f64 {
    (panic + dt * inc.net()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn contagion_examples() {
        let p = ModelParams::default();
        assert_eq!(contagion_rate(0.0, [], &p), 0.0);
        assert!(close(contagion_rate(0.0, [(1.0, 1.0)], &p), 0.15));
        assert_eq!(contagion_rate(1.0, [(0.2, 0.5), (0.9, 1.0), (1.0, 0.1)], &p), 0.0);
    }

    #[test]
    fn raising_a_neighbor_never_lowers_contagion() {
        let p = ModelParams::default();
        let base = [(0.3, 0.5), (0.6, 1.2), (0.1, 1.9)];
        let r0 = contagion_rate(0.4, base, &p);
        for k in 0..base.len() {
            let mut raised = base;
            raised[k].0 += 0.2;
            assert!(contagion_rate(0.4, raised, &p) >= r0);
        }
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(hazard_rate(Vec2::ZERO, &[]), 0.0);
        let h = HazardSource {
            pos: Vec2::new(2.0, 0.0),
            drive: 0.5,
            decay_length: 2.0,
        };
        let r = hazard_rate(Vec2::ZERO, &[h]);
        assert!(close(r, 0.5 * (-1.0f64).exp()));
        assert!((r - 0.1839).abs() < 1e-4);
        assert_eq!(hazard_rate(h.pos, &[h]), 0.5);
    }

    #[test]
    fn hazard_defaults_from_params() {
        let p = ModelParams::default();
        let h = Hazard {
            pos: Vec2::ZERO,
            a_h: None,
            lambda_h: Some(3.0),
        };
        let s = HazardSource::resolve(&h, &p);
        assert_eq!(s.drive, p.a_h);
        assert_eq!(s.decay_length, 3.0);
    }

    #[test]
    fn james_lange_examples() {
        let p = ModelParams::default();
        assert_eq!(james_lange_rate(0.0, 0.1, &p), 0.0);
        assert!(close(james_lange_rate(15.2, 0.1, &p), 0.038));
        assert!(close(james_lange_rate(p.p_ref * 0.05, 0.05, &p), p.gamma_jl));
    }

    #[test]
    fn update_examples() {
        let p = ModelParams::default();
        let calm = EmotionIncrement::new(0.0, 0.0, 0.0, 0.0, &p);
        assert_eq!(update_panic(0.0, &calm, 0.1), 0.0);

        let inc = EmotionIncrement::new(0.15, 0.0, 0.0, 0.0, &p);
        assert!(close(update_panic(0.0, &inc, 0.1), 0.015));

        let inc = EmotionIncrement::new(0.0, 0.0, 0.0, 1.0, &p);
        assert!(close(update_panic(1.0, &inc, 0.1), 0.998));

        let inc = EmotionIncrement::new(0.0, 1e6, 0.0, 1.0, &p);
        assert_eq!(update_panic(1.0, &inc, 0.1), 1.0);
    }
}
