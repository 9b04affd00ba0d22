//! CSV and text outputs of a run. All numbers use fixed 6-decimal formatting
//! so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::SimRun;
use crate::model::ParamKey;

pub const TRAJECTORY_HEADER: &str = "t,id,x,y,vx,vy,speed,panic,strength,exited";
pub const METRICS_HEADER: &str = "t,exited,mean_panic,max_panic,mean_strength_frac,mean_speed";
pub const LEDGER_HEADER: &str = "id,initial_strength,consumed,recovered,final_strength,last_power";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("agent {id} at t={time}: {what} out of range")]
    StateOutOfRange { id: usize, time: f64, what: &'static str },
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt_time(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".to_string()
    }
}

/// Trajectory rows ordered by (t, id). Re-checks the state bounds as it goes.
pub fn trajectory_csv(run: &SimRun) -> Result<String, OutputError> {
    let s_max = run.params.s_max;
    let mut s = String::with_capacity(64 * run.frames.iter().map(|f| f.agents.len() + 1).sum::<usize>());
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for f in &run.frames {
        for a in &f.agents {
            if !(0.0..=1.0).contains(&a.panic) {
                return Err(OutputError::StateOutOfRange { id: a.id, time: f.time, what: "panic" });
            }
            if !(0.0..=s_max).contains(&a.strength) {
                return Err(OutputError::StateOutOfRange { id: a.id, time: f.time, what: "strength" });
            }
            let _ = writeln!(
                s,
                "{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                f.time,
                a.id,
                a.pos.x,
                a.pos.y,
                a.vel.x,
                a.vel.y,
                a.speed(),
                a.panic,
                a.strength,
                u8::from(a.exited)
            );
        }
    }
    Ok(s)
}

pub fn metrics_csv(run: &SimRun) -> String {
    let mut s = String::new();
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for m in &run.metrics.series {
        let _ = writeln!(
            s,
            "{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            m.time, m.exited, m.mean_panic, m.max_panic, m.mean_strength_frac, m.mean_speed
        );
    }
    let _ = writeln!(s, "evacuation_time,{}", fmt_time(run.metrics.evacuation_time));
    s
}

/// Per-agent strength bookkeeping.
pub fn ledger_csv(run: &SimRun) -> String {
    let mut s = String::new();
    s.push_str(LEDGER_HEADER);
    s.push('\n');
    let last = run.final_frame();
    for (id, l) in run.ledger.iter().enumerate() {
        let _ = writeln!(
            s,
            "{id},{:.6},{:.6},{:.6},{:.6},{:.6}",
            run.initial_strength[id], l.consumed, l.recovered, last.agents[id].strength, l.last_power
        );
    }
    s
}

/// Every effective constant, in the scenario grammar.
pub fn resolved_params_text(run: &SimRun) -> String {
    let mut s = String::from("# effective model constants and sim settings\n[params]\n");
    for &k in ParamKey::ALL {
        let _ = writeln!(s, "{} = {}", k.name(), run.params.get(k));
    }
    let sim = run.scenario.sim;
    let _ = writeln!(
        s,
        "\n[sim]\ndt = {}\nmax_time = {}\nseed = {}\noutput_every = {}",
        sim.dt, sim.max_time, sim.seed, sim.output_every
    );
    s
}

pub fn write_trajectory(run: &SimRun, path: &Path) -> Result<(), OutputError> {
    write_file(path, &trajectory_csv(run)?)
}

pub fn write_metrics(run: &SimRun, path: &Path) -> Result<(), OutputError> {
    write_file(path, &metrics_csv(run))
}

/// Writes `trajectory.csv`, `metrics.csv`, `ledger.csv` and
/// `resolved-params.txt` into `dir`, creating it if needed.
pub fn write_run(run: &SimRun, dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_trajectory(run, &dir.join("trajectory.csv"))?;
    write_metrics(run, &dir.join("metrics.csv"))?;
    write_file(&dir.join("ledger.csv"), &ledger_csv(run))?;
    write_file(&dir.join("resolved-params.txt"), &resolved_params_text(run))
}
