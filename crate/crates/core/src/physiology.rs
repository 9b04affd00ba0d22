//! Strength consumption from mechanical work.
//!
//! An agent pays for the positive work done by its own driving force plus a
//! basal metabolic draw. Contact forces are external and cost nothing.

use crate::geom::Vec2;
use crate::model::ModelParams;

/// Running totals for one agent. Both totals are non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrengthLedger {
    pub consumed: f64,
    pub recovered: f64,
    pub last_power: f64,
}

impl StrengthLedger {
    pub fn record(&mut self, update: &StrengthUpdate, power: f64) {
        self.consumed += update.consumed;
        self.recovered += update.recovered;
        self.last_power = power;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrengthUpdate {
    pub strength: f64,
    pub consumed: f64,
    pub recovered: f64,
}

/// Positive work rate of the driving force, W.
pub fn mechanical_power(drive_force: Vec2, vel: Vec2) -> f64 {
    drive_force.dot(vel).max(0.0)
}

/// One tick of depletion and (optional) resting recovery. The reported
/// consumption and recovery always satisfy
/// `strength' = strength - consumed + recovered`.
pub fn update_strength(strength: f64, power: f64, speed: f64, dt: f64, params: &ModelParams) -> StrengthUpdate {
    let loss = (params.c_basal + power) * dt;
    let gain = if speed < params.v_rest { params.r_rec * dt } else { 0.0 };
    let next = (strength - loss + gain).clamp(0.0, params.s_max);
    let consumed = loss.min(strength + gain);
    // Gain beyond the capacity is discarded.
    let recovered = if next >= params.s_max {
        (params.s_max - strength + consumed).min(gain)
    } else {
        gain
    };
    StrengthUpdate {
        strength: next,
        consumed,
        recovered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_examples() {
        assert_eq!(mechanical_power(Vec2::new(100.0, 0.0), Vec2::ZERO), 0.0);
        assert_eq!(mechanical_power(Vec2::new(100.0, 0.0), Vec2::new(1.5, 0.0)), 150.0);
        assert_eq!(mechanical_power(Vec2::new(100.0, 0.0), Vec2::new(-1.0, 0.0)), 0.0);
    }

    #[test]
    fn strength_examples() {
        let p = ModelParams::default();
        let u = update_strength(1000.0, 150.0, 1.5, 0.1, &p);
        assert!((u.strength - 984.8).abs() < 1e-9);
        assert!((u.consumed - 15.2).abs() < 1e-12);
        assert_eq!(u.recovered, 0.0);

        let u = update_strength(1000.0, 0.0, 0.0, 0.1, &p);
        assert!((u.strength - 999.8).abs() < 1e-9);

        let u = update_strength(0.1, 150.0, 1.5, 0.1, &p);
        assert_eq!(u.strength, 0.0);
        assert_eq!(u.consumed, 0.1);
    }

    #[test]
    fn recovery_truncated_at_capacity() {
        let p = ModelParams {
            r_rec: 100.0,
            ..ModelParams::default()
        };
        let u = update_strength(p.s_max - 1.0, 0.0, 0.0, 0.1, &p);
        assert_eq!(u.strength, p.s_max);
        assert!((u.consumed - 0.2).abs() < 1e-12);
        assert!((u.recovered - 1.2).abs() < 1e-9);
        assert!((p.s_max - 1.0 - u.consumed + u.recovered - u.strength).abs() < 1e-9);

        // Moving agents do not recover.
        let u = update_strength(1000.0, 0.0, 1.0, 0.1, &p);
        assert_eq!(u.recovered, 0.0);
    }

    #[test]
    fn ledger_accumulates() {
        let p = ModelParams::default();
        let mut ledger = StrengthLedger::default();
        let mut s = 100.0;
        for _ in 0..10 {
            let u = update_strength(s, 50.0, 1.0, 0.05, &p);
            ledger.record(&u, 50.0);
            s = u.strength;
        }
        assert!((100.0 - s - ledger.consumed + ledger.recovered).abs() < 1e-12);
        assert_eq!(ledger.last_power, 50.0);
    }
}
