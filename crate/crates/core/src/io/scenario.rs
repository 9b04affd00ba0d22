//! Scenario text format.
//!
//! ```text
//! # comment
//! [domain]
//! width = 15
//! height = 15
//! cell_size = 0.25
//!
//! [sim]
//! dt = 0.05
//! max_time = 120
//! seed = 42
//! output_every = 10
//!
//! [params]
//! beta = 0.3
//!
//! [[obstacle]]
//! rect = 5 5 1 2
//!
//! [[exit]]
//! segment = 15 7 15 8
//!
//! [[hazard]]
//! point = 2 2
//! a_h = 0.5
//! lambda_h = 2
//!
//! [[group]]
//! count = 100
//! rect = 1 1 10 13
//! v_pref = 1.2 1.6
//! ```
//!
//! Unknown sections and keys are errors. Only `[domain]` with `width` and
//! `height` is mandatory; everything else has defaults.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{Rect, Segment, Vec2};
use crate::model::{validate_scenario, Domain, Hazard, ParamKey, ParamOverrides, Range, ScenarioSpec, SimSettings, SpawnGroup, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}: `{token}`")]
pub struct ParseError {
    pub line: usize,
    pub token: String,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, token: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line,
            token: token.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid scenario:\n{0}")]
    Semantic(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Domain,
    Sim,
    Params,
    Obstacle,
    Exit,
    Hazard,
    Group,
}

impl Kind {
    fn from_header(name: &str, repeated: bool) -> Option<Kind> {
        match (name, repeated) {
            ("domain", false) => Some(Kind::Domain),
            ("sim", false) => Some(Kind::Sim),
            ("params", false) => Some(Kind::Params),
            ("obstacle", true) => Some(Kind::Obstacle),
            ("exit", true) => Some(Kind::Exit),
            ("hazard", true) => Some(Kind::Hazard),
            ("group", true) => Some(Kind::Group),
            _ => None,
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Kind::Domain => &["width", "height", "cell_size"],
            Kind::Sim => &["dt", "max_time", "seed", "output_every"],
            Kind::Params => &[],
            Kind::Obstacle => &["rect"],
            Kind::Exit => &["segment"],
            Kind::Hazard => &["point", "a_h", "lambda_h"],
            Kind::Group => &["count", "rect", "v_pref", "mass", "radius", "strength", "panic"],
        }
    }

    fn accepts(self, key: &str) -> bool {
        match self {
            Kind::Params => ParamKey::from_name(key).is_some(),
            _ => self.keys().contains(&key),
        }
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

struct Block<'a> {
    kind: Kind,
    line: usize,
    header: &'a str,
    entries: Vec<Entry<'a>>,
}

impl<'a> Block<'a> {
    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&Entry<'a>, ParseError> {
        self.get(key)
            .ok_or_else(|| ParseError::new(self.line, self.header, format!("missing required key `{key}`")))
    }
}

fn numbers(e: &Entry<'_>, n: usize) -> Result<Vec<f64>, ParseError> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    if parts.len() != n {
        return Err(ParseError::new(
            e.line,
            e.value,
            format!("`{}` expects {n} number(s), found {}", e.key, parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError::new(e.line, *p, "expected a finite number")),
        })
        .collect()
}

fn number(e: &Entry<'_>) -> Result<f64, ParseError> {
    Ok(numbers(e, 1)?[0])
}

fn integer<T: std::str::FromStr>(e: &Entry<'_>) -> Result<T, ParseError> {
    e.value
        .trim()
        .parse::<T>()
        .map_err(|_| ParseError::new(e.line, e.value, "expected a non-negative integer"))
}

fn range(e: &Entry<'_>) -> Result<Range, ParseError> {
    let v = numbers(e, 2)?;
    Ok(Range::new(v[0], v[1]))
}

fn rect(e: &Entry<'_>) -> Result<Rect, ParseError> {
    let v = numbers(e, 4)?;
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn split_blocks(text: &str) -> Result<Vec<Block<'_>>, ParseError> {
    let mut blocks: Vec<Block<'_>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let (name, repeated) = if let Some(inner) = content.strip_prefix("[[").and_then(|s| s.strip_suffix("]]")) {
                (inner.trim(), true)
            } else if let Some(inner) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                (inner.trim(), false)
            } else {
                return Err(ParseError::new(line, content, "malformed section header"));
            };
            let kind = Kind::from_header(name, repeated)
                .ok_or_else(|| ParseError::new(line, content, "unknown section"))?;
            if !repeated && blocks.iter().any(|b| b.kind == kind) {
                return Err(ParseError::new(line, content, "duplicate section"));
            }
            blocks.push(Block {
                kind,
                line,
                header: content,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ParseError::new(line, content, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        let block = blocks
            .last_mut()
            .ok_or_else(|| ParseError::new(line, key, "key outside of any section"))?;
        if !block.kind.accepts(key) {
            return Err(ParseError::new(line, key, format!("unknown key in {}", block.header)));
        }
        if block.entries.iter().any(|e| e.key == key) {
            return Err(ParseError::new(line, key, "duplicate key"));
        }
        if value.is_empty() {
            return Err(ParseError::new(line, key, "missing value"));
        }
        block.entries.push(Entry { line, key, value });
    }
    Ok(blocks)
}

/// Parses the text format into a spec with defaults filled in. Semantic
/// checks are left to [`validate_scenario`]; see [`load_scenario`].
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ParseError> {
    let blocks = split_blocks(text)?;

    let domain_block = blocks
        .iter()
        .find(|b| b.kind == Kind::Domain)
        .ok_or_else(|| ParseError::new(0, "[domain]", "missing required section"))?;
    let mut domain = Domain {
        width: number(domain_block.require("width")?)?,
        height: number(domain_block.require("height")?)?,
        cell_size: ScenarioSpec::DEFAULT_CELL_SIZE,
    };
    if let Some(e) = domain_block.get("cell_size") {
        domain.cell_size = number(e)?;
    }

    let mut spec = ScenarioSpec {
        domain,
        obstacles: Vec::new(),
        exits: Vec::new(),
        hazards: Vec::new(),
        groups: Vec::new(),
        params: ParamOverrides::new(),
        sim: SimSettings::default(),
    };

    for b in &blocks {
        match b.kind {
            Kind::Domain => {}
            Kind::Sim => {
                for e in &b.entries {
                    match e.key {
                        "dt" => spec.sim.dt = number(e)?,
                        "max_time" => spec.sim.max_time = number(e)?,
                        "seed" => spec.sim.seed = integer(e)?,
                        "output_every" => spec.sim.output_every = integer(e)?,
                        _ => unreachable!("key filtered by Kind::accepts"),
                    }
                }
            }
            Kind::Params => {
                for e in &b.entries {
                    let key = ParamKey::from_name(e.key).expect("key filtered by Kind::accepts");
                    spec.params.insert(key, number(e)?);
                }
            }
            Kind::Obstacle => spec.obstacles.push(rect(b.require("rect")?)?),
            Kind::Exit => {
                let v = numbers(b.require("segment")?, 4)?;
                spec.exits
                    .push(Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])));
            }
            Kind::Hazard => {
                let v = numbers(b.require("point")?, 2)?;
                spec.hazards.push(Hazard {
                    pos: Vec2::new(v[0], v[1]),
                    a_h: b.get("a_h").map(number).transpose()?,
                    lambda_h: b.get("lambda_h").map(number).transpose()?,
                });
            }
            Kind::Group => {
                let mut g = SpawnGroup::new(integer(b.require("count")?)?, rect(b.require("rect")?)?);
                for e in &b.entries {
                    match e.key {
                        "v_pref" => g.v_pref = range(e)?,
                        "mass" => g.mass = range(e)?,
                        "radius" => g.radius = range(e)?,
                        "strength" => g.strength = range(e)?,
                        "panic" => g.panic = range(e)?,
                        _ => {}
                    }
                }
                spec.groups.push(g);
            }
        }
    }
    Ok(spec)
}

/// Parse followed by validation.
pub fn load_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec = parse_scenario(text)?;
    let report = validate_scenario(&spec);
    if report.is_ok() {
        Ok(spec)
    } else {
        Err(ScenarioError::Semantic(report))
    }
}

/// Canonical text form; `parse_scenario` reads it back to an equal spec.
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let mut s = String::new();
    let d = spec.domain;
    let _ = writeln!(s, "[domain]\nwidth = {}\nheight = {}\ncell_size = {}", d.width, d.height, d.cell_size);
    let sim = spec.sim;
    let _ = writeln!(
        s,
        "\n[sim]\ndt = {}\nmax_time = {}\nseed = {}\noutput_every = {}",
        sim.dt, sim.max_time, sim.seed, sim.output_every
    );
    if !spec.params.is_empty() {
        s.push_str("\n[params]\n");
        for (k, v) in &spec.params {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    for o in &spec.obstacles {
        let _ = writeln!(s, "\n[[obstacle]]\nrect = {} {} {} {}", o.x, o.y, o.w, o.h);
    }
    for e in &spec.exits {
        let _ = writeln!(s, "\n[[exit]]\nsegment = {} {} {} {}", e.a.x, e.a.y, e.b.x, e.b.y);
    }
    for h in &spec.hazards {
        let _ = writeln!(s, "\n[[hazard]]\npoint = {} {}", h.pos.x, h.pos.y);
        if let Some(a) = h.a_h {
            let _ = writeln!(s, "a_h = {a}");
        }
        if let Some(l) = h.lambda_h {
            let _ = writeln!(s, "lambda_h = {l}");
        }
    }
    for g in &spec.groups {
        let r = g.rect;
        let _ = writeln!(s, "\n[[group]]\ncount = {}\nrect = {} {} {} {}", g.count, r.x, r.y, r.w, r.h);
        for (name, rg) in [
            ("v_pref", g.v_pref),
            ("mass", g.mass),
            ("radius", g.radius),
            ("strength", g.strength),
            ("panic", g.panic),
        ] {
            let _ = writeln!(s, "{name} = {} {}", rg.lo, rg.hi);
        }
    }
    s
}
