//! Shared domain types: agent state, model constants, scenario description,
//! plus scenario validation and seeded agent spawning.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{Rect, Segment, Vec2};
use crate::spatial::{compute_nav_field, NavError};

/// Per-agent simulation state. Strength is in joules, panic is in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub pos: Vec2,
    pub vel: Vec2,
    pub radius: f64,
    pub mass: f64,
    pub v_pref: f64,
    pub strength: f64,
    pub panic: f64,
    pub exited: bool,
}

impl AgentState {
    pub fn speed(&self) -> f64 {
        self.vel.length()
    }
}

/// Whether a constant must be strictly positive or may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    NonNegative,
}

macro_rules! model_params {
    ($( $(#[$doc:meta])* $field:ident : $variant:ident = $default:expr, $sign:ident; )*) => {
        /// Every model constant. SI units throughout.
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct ModelParams {
            $( $(#[$doc])* pub $field: f64, )*
        }

        impl Default for ModelParams {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        /// Names a single field of [`ModelParams`].
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum ParamKey {
            $( $variant, )*
        }

        impl ParamKey {
            pub const ALL: &'static [ParamKey] = &[ $( ParamKey::$variant, )* ];

            /// Name used in scenario files and on the command line.
            pub fn name(self) -> &'static str {
                match self {
                    $( ParamKey::$variant => stringify!($field), )*
                }
            }

            pub fn from_name(name: &str) -> Option<ParamKey> {
                match name {
                    $( stringify!($field) => Some(ParamKey::$variant), )*
                    _ => None,
                }
            }

            pub fn sign(self) -> Sign {
                match self {
                    $( ParamKey::$variant => Sign::$sign, )*
                }
            }
        }

        impl ModelParams {
            pub fn get(&self, key: ParamKey) -> f64 {
                match key {
                    $( ParamKey::$variant => self.$field, )*
                }
            }

            pub fn set(&mut self, key: ParamKey, value: f64) {
                match key {
                    $( ParamKey::$variant => self.$field = value, )*
                }
            }
        }
    };
}

model_params! {
    /// Relaxation time of the driving force, s.
    tau: Tau = 0.5, Positive;
    /// Social repulsion amplitude, N.
    a_rep: ARep = 2000.0, NonNegative;
    /// Social repulsion range, m.
    b_rep: BRep = 0.08, Positive;
    /// Body compression stiffness, N/m.
    k_body: KBody = 1.2e5, NonNegative;
    /// Sliding friction coefficient, kg/(m s).
    kappa_fric: KappaFric = 2.4e5, NonNegative;
    /// Strength capacity, J.
    s_max: SMax = 5000.0, Positive;
    /// Basal consumption, W.
    c_basal: CBasal = 2.0, NonNegative;
    /// Recovery rate while near-stationary, W.
    r_rec: RRec = 0.0, NonNegative;
    /// Speed below which an agent counts as resting, m/s.
    v_rest: VRest = 0.1, Positive;
    /// Speed ceiling of a fully exhausted agent, m/s.
    v_crawl: VCrawl = 0.3, Positive;
    /// Speed ceiling of a fresh agent, m/s.
    v_phys: VPhys = 3.0, Positive;
    /// Fatigue exponent.
    kappa_fat: KappaFat = 0.25, Positive;
    /// Panic amplification of desired speed.
    alpha_p: AlphaP = 0.8, NonNegative;
    /// Panic perception radius, m.
    r_contagion: RContagion = 2.0, Positive;
    /// Contagion rate, 1/s.
    beta: Beta = 0.3, NonNegative;
    /// Default hazard panic drive, 1/s.
    a_h: AH = 0.5, NonNegative;
    /// Default hazard decay length, m.
    lambda_h: LambdaH = 2.0, Positive;
    /// Exertion-to-panic gain.
    gamma_jl: GammaJl = 0.05, NonNegative;
    /// Reference power normalizing exertion, W.
    p_ref: PRef = 200.0, Positive;
    /// Panic decay, 1/s.
    delta_decay: DeltaDecay = 0.02, NonNegative;
    /// Absolute speed cap, m/s.
    v_hard: VHard = 5.0, Positive;
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ModelParams {
    /// Constraint violations, one message per broken rule.
    pub fn check(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for &key in ParamKey::ALL {
            let v = self.get(key);
            let ok = v.is_finite()
                && match key.sign() {
                    Sign::Positive => v > 0.0,
                    Sign::NonNegative => v >= 0.0,
                };
            if !ok {
                let rule = match key.sign() {
                    Sign::Positive => "must be positive",
                    Sign::NonNegative => "must be non-negative",
                };
                errors.push(format!("param {key} = {v} {rule}"));
            }
        }
        if !(self.v_crawl < self.v_phys) {
            errors.push(format!(
                "v_crawl ({}) must be below v_phys ({})",
                self.v_crawl, self.v_phys
            ));
        }
        if !(self.v_phys <= self.v_hard) {
            errors.push(format!(
                "v_phys ({}) must not exceed v_hard ({})",
                self.v_phys, self.v_hard
            ));
        }
        errors
    }
}

/// Partial override of [`ModelParams`], as written in a scenario.
pub type ParamOverrides = BTreeMap<ParamKey, f64>;

/// Closed interval sampled uniformly at spawn time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            // Draw anyway so the stream does not depend on range widths.
            let _: f64 = rng.gen();
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * rng.gen::<f64>()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub width: f64,
    pub height: f64,
    /// Navigation grid resolution, m.
    pub cell_size: f64,
}

impl Domain {
    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }
}

/// Point source of panic. Missing drive/decay fall back to the model params.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hazard {
    pub pos: Vec2,
    pub a_h: Option<f64>,
    pub lambda_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnGroup {
    pub count: usize,
    pub rect: Rect,
    pub v_pref: Range,
    pub mass: Range,
    pub radius: Range,
    /// Initial strength as a fraction of `s_max`.
    pub strength: Range,
    pub panic: Range,
}

impl SpawnGroup {
    pub const DEFAULT_V_PREF: Range = Range::new(1.2, 1.6);
    pub const DEFAULT_MASS: Range = Range::new(60.0, 90.0);
    pub const DEFAULT_RADIUS: Range = Range::new(0.2, 0.3);
    pub const DEFAULT_STRENGTH: Range = Range::fixed(1.0);
    pub const DEFAULT_PANIC: Range = Range::fixed(0.0);

    pub fn new(count: usize, rect: Rect) -> Self {
        Self {
            count,
            rect,
            v_pref: Self::DEFAULT_V_PREF,
            mass: Self::DEFAULT_MASS,
            radius: Self::DEFAULT_RADIUS,
            strength: Self::DEFAULT_STRENGTH,
            panic: Self::DEFAULT_PANIC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub max_time: f64,
    pub seed: u64,
    /// Frames are recorded every this many ticks (plus the final frame).
    pub output_every: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_time: 60.0,
            seed: 0,
            output_every: 1,
        }
    }
}

/// Static description of one evacuation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub domain: Domain,
    pub obstacles: Vec<Rect>,
    pub exits: Vec<Segment>,
    pub hazards: Vec<Hazard>,
    pub groups: Vec<SpawnGroup>,
    pub params: ParamOverrides,
    pub sim: SimSettings,
}

impl ScenarioSpec {
    pub const DEFAULT_CELL_SIZE: f64 = 0.25;

    /// An empty room of the given size with default settings.
    pub fn room(width: f64, height: f64) -> Self {
        Self {
            domain: Domain {
                width,
                height,
                cell_size: Self::DEFAULT_CELL_SIZE,
            },
            obstacles: Vec::new(),
            exits: Vec::new(),
            hazards: Vec::new(),
            groups: Vec::new(),
            params: ParamOverrides::new(),
            sim: SimSettings::default(),
        }
    }

    /// Defaults with the scenario's overrides applied.
    pub fn resolved_params(&self) -> ModelParams {
        let mut p = ModelParams::default();
        for (&k, &v) in &self.params {
            p.set(k, v);
        }
        p
    }

    pub fn population(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

const GEOM_EPS: f64 = 1e-9;

fn finite_all(vals: &[f64]) -> bool {
    vals.iter().all(|v| v.is_finite())
}

fn check_range(errors: &mut Vec<String>, what: &str, r: Range, lo_bound: f64, hi_bound: f64, strict_lo: bool) {
    if !finite_all(&[r.lo, r.hi]) || r.lo > r.hi {
        errors.push(format!("{what}: invalid range {} {}", r.lo, r.hi));
        return;
    }
    let lo_ok = if strict_lo { r.lo > lo_bound } else { r.lo >= lo_bound };
    if !lo_ok || r.hi > hi_bound {
        errors.push(format!("{what}: range {} {} out of bounds", r.lo, r.hi));
    }
}

/// Checks every scenario invariant. Never fails; problems are reported.
pub fn validate_scenario(spec: &ScenarioSpec) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let d = spec.domain;

    let domain_ok = finite_all(&[d.width, d.height, d.cell_size])
        && d.width > 0.0
        && d.height > 0.0
        && d.cell_size > 0.0;
    if !domain_ok {
        errors.push(format!(
            "domain must have positive width, height and cell_size (got {} x {}, cell {})",
            d.width, d.height, d.cell_size
        ));
    }

    let s = spec.sim;
    if !(s.dt.is_finite() && s.dt > 0.0) {
        errors.push(format!("dt must be positive (got {})", s.dt));
    }
    if !(s.max_time.is_finite() && s.max_time >= 0.0) {
        errors.push(format!("max_time must be non-negative (got {})", s.max_time));
    }
    if s.output_every == 0 {
        errors.push("output_every must be at least 1".to_string());
    }

    let params = spec.resolved_params();
    errors.extend(params.check());

    for (i, o) in spec.obstacles.iter().enumerate() {
        if !finite_all(&[o.x, o.y, o.w, o.h]) || o.w <= 0.0 || o.h <= 0.0 {
            errors.push(format!("obstacle {i}: width and height must be positive"));
        }
    }

    if spec.exits.is_empty() {
        errors.push("no exits".to_string());
    }
    let outer = d.rect();
    for (i, e) in spec.exits.iter().enumerate() {
        if !finite_all(&[e.a.x, e.a.y, e.b.x, e.b.y]) || e.length() <= 0.0 {
            errors.push(format!("exit {i}: segment must have positive length"));
            continue;
        }
        let grown = Rect::new(-GEOM_EPS, -GEOM_EPS, d.width + 2.0 * GEOM_EPS, d.height + 2.0 * GEOM_EPS);
        if !(grown.contains_closed(e.a) && grown.contains_closed(e.b)) {
            errors.push(format!("exit {i}: segment lies outside the domain"));
        }
        for (j, o) in spec.obstacles.iter().enumerate() {
            if o.segment_hits_interior(e.a, e.b) {
                errors.push(format!("exit {i}: segment intersects obstacle {j}"));
            }
        }
    }

    for (i, h) in spec.hazards.iter().enumerate() {
        if !h.pos.is_finite() {
            errors.push(format!("hazard {i}: position must be finite"));
        }
        if let Some(a) = h.a_h {
            if !(a.is_finite() && a >= 0.0) {
                errors.push(format!("hazard {i}: a_h must be non-negative"));
            }
        }
        if let Some(l) = h.lambda_h {
            if !(l.is_finite() && l > 0.0) {
                errors.push(format!("hazard {i}: lambda_h must be positive"));
            }
        }
    }

    for (i, g) in spec.groups.iter().enumerate() {
        let r = g.rect;
        if !finite_all(&[r.x, r.y, r.w, r.h]) || r.w < 0.0 || r.h < 0.0 {
            errors.push(format!("group {i}: invalid spawn rectangle"));
            continue;
        }
        if !r.inside(&outer) {
            errors.push(format!("group {i}: spawn rectangle lies outside the domain"));
        }
        for (j, o) in spec.obstacles.iter().enumerate() {
            if r.overlaps_interior(o) {
                errors.push(format!("group {i}: spawn rectangle overlaps obstacle {j}"));
            }
        }
        check_range(&mut errors, &format!("group {i} v_pref"), g.v_pref, 0.0, f64::INFINITY, true);
        check_range(&mut errors, &format!("group {i} mass"), g.mass, 0.0, f64::INFINITY, true);
        check_range(&mut errors, &format!("group {i} radius"), g.radius, 0.0, f64::INFINITY, true);
        check_range(&mut errors, &format!("group {i} strength"), g.strength, 0.0, 1.0, false);
        check_range(&mut errors, &format!("group {i} panic"), g.panic, 0.0, 1.0, false);
    }

    // Reachability needs a sane grid; skip it when the basics are broken.
    if errors.is_empty() {
        match compute_nav_field(spec) {
            Ok(nav) => {
                for (i, g) in spec.groups.iter().enumerate() {
                    if g.count > 0 && !nav.rect_fully_reachable(&g.rect) {
                        errors.push(format!("group {i}: spawn rectangle contains cells with no path to an exit"));
                    }
                }
            }
            Err(NavError::Unreachable { groups }) => {
                for i in groups {
                    errors.push(format!("group {i}: spawn rectangle is unreachable from every exit"));
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }

    if s.dt.is_finite() && params.tau.is_finite() && s.dt > params.tau / 2.0 {
        warnings.push(format!("dt exceeds tau/2 ({} > {})", s.dt, params.tau / 2.0));
    }
    let min_mass = spec.groups.iter().map(|g| g.mass.lo).fold(f64::INFINITY, f64::min);
    if params.k_body > 0.0 && min_mass.is_finite() && min_mass > 0.0 {
        let limit = 2.0 * (min_mass / params.k_body).sqrt();
        if s.dt > limit {
            warnings.push(format!(
                "dt exceeds contact stability limit 2*sqrt(m/k_body) ({} > {limit:.6})",
                s.dt
            ));
        }
    }
    let weight = max_neighbor_weight(spec, &params);
    if s.dt * params.beta * weight > 1.0 {
        warnings.push(format!(
            "dt*beta*max neighbor weight exceeds 1 ({:.6}); contagion update may overshoot",
            s.dt * params.beta * weight
        ));
    }

    ValidationReport { errors, warnings }
}

/// Upper bound on the summed contagion kernel weight any agent can see: the
/// number of smallest discs that pack into the perception circle (each weight
/// is at most 1), capped by the population.
pub fn max_neighbor_weight(spec: &ScenarioSpec, params: &ModelParams) -> f64 {
    let population = spec.population();
    if population < 2 {
        return 0.0;
    }
    let r_min = spec
        .groups
        .iter()
        .filter(|g| g.count > 0)
        .map(|g| g.radius.lo)
        .fold(f64::INFINITY, f64::min);
    if !(r_min > 0.0) {
        return (population - 1) as f64;
    }
    // Hexagonal packing density.
    let packed = 0.9069 * (params.r_contagion / r_min).powi(2);
    packed.floor().min((population - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("could not place agent {agent} of group {group} after {attempts} attempts (spawn density too high)")]
pub struct PlacementError {
    pub group: usize,
    pub agent: usize,
    pub attempts: usize,
}

pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Seeded, rejection-sampled initial population. Assumes a validated spec.
pub fn spawn_agents(spec: &ScenarioSpec, seed: u64) -> Result<Vec<AgentState>, PlacementError> {
    let params = spec.resolved_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents: Vec<AgentState> = Vec::with_capacity(spec.population());

    for (gi, group) in spec.groups.iter().enumerate() {
        for k in 0..group.count {
            let radius = group.radius.sample(&mut rng);
            let mass = group.mass.sample(&mut rng);
            let v_pref = group.v_pref.sample(&mut rng);
            let strength = group.strength.sample(&mut rng) * params.s_max;
            let panic = group.panic.sample(&mut rng);

            let r = group.rect;
            let (x_lo, x_span) = inset(r.x, r.w, radius);
            let (y_lo, y_span) = inset(r.y, r.h, radius);

            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let pos = Vec2::new(
                    x_lo + x_span * rng.gen::<f64>(),
                    y_lo + y_span * rng.gen::<f64>(),
                );
                let hits_agent = agents
                    .iter()
                    .any(|a| a.pos.distance(pos) < a.radius + radius);
                let hits_obstacle = spec
                    .obstacles
                    .iter()
                    .any(|o| o.signed_distance(pos).0 < radius);
                if !hits_agent && !hits_obstacle {
                    placed = Some(pos);
                    break;
                }
            }
            let pos = placed.ok_or(PlacementError {
                group: gi,
                agent: k,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;

            agents.push(AgentState {
                id: agents.len(),
                pos,
                vel: Vec2::ZERO,
                radius,
                mass,
                v_pref,
                strength,
                panic,
                exited: false,
            });
        }
    }
    Ok(agents)
}

/// Interval of admissible centers keeping a disc inside `[start, start+len]`;
/// collapses to the midpoint when the disc does not fit.
fn inset(start: f64, len: f64, radius: f64) -> (f64, f64) {
    if len >= 2.0 * radius {
        (start + radius, len - 2.0 * radius)
    } else {
        (start + 0.5 * len, 0.0)
    }
}

/// Immutable snapshot of every agent at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub tick: u64,
    pub time: f64,
    /// Ascending id; index equals id.
    pub agents: Vec<AgentState>,
}

impl SimFrame {
    pub fn initial(agents: Vec<AgentState>) -> Self {
        Self {
            tick: 0,
            time: 0.0,
            agents,
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| !a.exited)
    }
}
