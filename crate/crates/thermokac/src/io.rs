//! CSV and manifest output, collision-history dump/replay.
//!
//! All files use '.' as the decimal separator, '\n' line endings and a
//! header row. Floats are written with Rust's shortest round-trip
//! formatting, so a dumped history replays bit-exactly and identical runs
//! produce byte-identical files.

use crate::collision::CollisionEvent;
use crate::config::SimConfig;
use crate::diagnostics::{RateFit, ScalingTable};
use crate::engine::{CoupledSample, TrajectorySample};
use crate::error::{Result, SimError};
use std::io::{BufRead, Write};

pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    replicas: &[Vec<TrajectorySample>],
) -> Result<()> {
    writeln!(w, "replica,time,J,U,m2,m4,m6")?;
    for (r, samples) in replicas.iter().enumerate() {
        for s in samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r, s.time, s.j_value, s.u_value, s.m2, s.m4, s.m6
            )?;
        }
    }
    Ok(())
}

pub fn write_coupled_csv<W: Write>(w: &mut W, replicas: &[Vec<CoupledSample>]) -> Result<()> {
    writeln!(
        w,
        "replica,time,distance_N,J_int,J_quench,U_int,U_quench,Jhat_ode"
    )?;
    for (r, samples) in replicas.iter().enumerate() {
        for s in samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r,
                s.time,
                s.distance_n,
                s.j_interacting,
                s.j_quenched,
                s.u_interacting,
                s.u_quenched,
                s.jhat_ode
            )?;
        }
    }
    Ok(())
}

/// One row of the chaos CSV.
#[derive(Debug, Clone)]
pub struct ChaosRow {
    pub n_particles: usize,
    pub time: f64,
    pub phi: String,
    pub psi: String,
    pub defect: f64,
    pub stderr: f64,
}

pub fn write_chaos_csv<W: Write>(w: &mut W, rows: &[ChaosRow]) -> Result<()> {
    writeln!(w, "N,t,phi,psi,defect,stderr")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n_particles, r.time, r.phi, r.psi, r.defect, r.stderr
        )?;
    }
    Ok(())
}

pub fn write_scaling_csv<W: Write>(w: &mut W, table: &ScalingTable) -> Result<()> {
    writeln!(w, "N,metric,mean,stderr,replicas")?;
    for r in table.rows() {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n_particles, r.metric, r.mean, r.stderr, r.replicas
        )?;
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(w: &mut W, fits: &[(String, RateFit)]) -> Result<()> {
    writeln!(w, "metric,slope,intercept,r2")?;
    for (metric, fit) in fits {
        writeln!(
            w,
            "{},{},{},{}",
            metric, fit.slope, fit.intercept, fit.r_squared
        )?;
    }
    Ok(())
}

/// One velocity per line, no header.
pub fn write_snapshot<W: Write>(w: &mut W, velocities: &[f64]) -> Result<()> {
    for v in velocities {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_history_csv<W: Write>(w: &mut W, events: &[CollisionEvent]) -> Result<()> {
    writeln!(w, "event_index,time,i,j,theta")?;
    for (k, e) in events.iter().enumerate() {
        writeln!(w, "{},{},{},{},{}", k, e.time, e.pair.0, e.pair.1, e.angle)?;
    }
    Ok(())
}

/// Parse a dumped history. Round-trip with [`write_history_csv`] is
/// bit-exact because floats are written with round-trip formatting.
pub fn read_history_csv<R: BufRead>(r: R) -> Result<Vec<CollisionEvent>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Parse("empty history file".into()))??;
    if header.trim() != "event_index,time,i,j,theta" {
        return Err(SimError::Parse(format!("unexpected history header `{header}`")));
    }
    let mut events = Vec::new();
    let mut prev_time = f64::NEG_INFINITY;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(SimError::Parse(format!(
                "history line {}: expected 5 fields, got {}",
                k + 2,
                fields.len()
            )));
        }
        let time: f64 = fields[1]
            .parse()
            .map_err(|_| SimError::Parse(format!("bad time `{}`", fields[1])))?;
        let i: usize = fields[2]
            .parse()
            .map_err(|_| SimError::Parse(format!("bad index `{}`", fields[2])))?;
        let j: usize = fields[3]
            .parse()
            .map_err(|_| SimError::Parse(format!("bad index `{}`", fields[3])))?;
        let angle: f64 = fields[4]
            .parse()
            .map_err(|_| SimError::Parse(format!("bad angle `{}`", fields[4])))?;
        if i >= j {
            return Err(SimError::Parse(format!("history line {}: need i < j", k + 2)));
        }
        if time <= prev_time {
            return Err(SimError::Parse(format!(
                "history line {}: times must be strictly increasing",
                k + 2
            )));
        }
        prev_time = time;
        events.push(CollisionEvent {
            time,
            pair: (i, j),
            angle,
        });
    }
    Ok(events)
}

/// The run manifest: tool version, subcommand and the full effective
/// configuration. Together with the seed it determines every output byte,
/// so it deliberately carries no timestamps or host details.
pub fn write_manifest<W: Write>(
    w: &mut W,
    subcommand: &str,
    config: &SimConfig,
    extras: &[(String, String)],
) -> Result<()> {
    writeln!(w, "tool=thermokac {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "subcommand={subcommand}")?;
    for (k, v) in config.to_key_values() {
        writeln!(w, "{k}={v}")?;
    }
    for (k, v) in extras {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}
