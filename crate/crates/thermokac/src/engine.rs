//! Event-driven simulation loop: closed-form flows between collisions,
//! pair rotations at collision times, sample emission by segment splitting.
//!
//! Per-event cost is O(1): each flow segment contributes one affine map
//! `(α, β)` composed into a running global map, and a collision
//! materializes only the two touched coordinates. Coordinates are
//! materialized in O(N) only when a sample is emitted.

use crate::collision::{CollisionEvent, EventSource};
use crate::config::{QuenchedInit, SimConfig};
use crate::error::{Result, SimError};
use crate::flow::{interacting_coefficients, CurrentKind, CurrentSolution};
use crate::rng::{RngStreamKey, StreamTag};
use crate::state::{compensated_sum, sample_initial_state, MasterVector, CACHE_REFRESH_INTERVAL};

/// Which master equation a single run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Interacting,
    Quenched,
}

/// What an ensemble runs: one process, or the coupled pair sharing one
/// collision history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Interacting,
    Quenched,
    Coupled,
}

/// Observables of one replica at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub j_value: f64,
    pub u_value: f64,
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
    pub snapshot: Option<Vec<f64>>,
}

/// Coupled observables at one sample time: the normalized pathwise distance
/// `||V - V̂||_N` plus both observable sets and the deterministic current.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub time: f64,
    pub distance_n: f64,
    pub j_interacting: f64,
    pub j_quenched: f64,
    pub u_interacting: f64,
    pub u_quenched: f64,
    pub jhat_ode: f64,
}

/// Per-replica run switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunFlags {
    pub collect_snapshots: bool,
    pub record_events: bool,
}

/// Output of one replica: samples, plus the applied events when recording
/// was requested (for history dumps).
#[derive(Debug, Clone)]
pub struct ReplicaRun {
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<CollisionEvent>,
}

/// Particle state with the pending affine map kept lazy.
///
/// `actual_i = map_a * stored_i + map_b`; the Σv and Σv² caches always hold
/// actual-space values. `map_a` stays positive, so stored coordinates can be
/// recovered after a collision rewrites two actual values.
#[derive(Debug, Clone)]
struct LazyState {
    stored: Vec<f64>,
    map_a: f64,
    map_b: f64,
    sum: f64,
    sum_sq: f64,
    events: u32,
}

impl LazyState {
    fn from_master(v: &MasterVector) -> Self {
        LazyState {
            stored: v.velocities().to_vec(),
            map_a: 1.0,
            map_b: 0.0,
            sum: v.cached_sum(),
            sum_sq: v.cached_sum_sq(),
            events: 0,
        }
    }

    fn n(&self) -> usize {
        self.stored.len()
    }

    fn momentum(&self) -> f64 {
        self.sum / self.n() as f64
    }

    fn energy(&self) -> f64 {
        self.sum_sq / self.n() as f64
    }

    /// Compose one flow segment into the pending map; O(1).
    fn flow(&mut self, alpha: f64, beta: f64) {
        if alpha == 1.0 && beta == 0.0 {
            return;
        }
        let n = self.n() as f64;
        self.map_a *= alpha;
        self.map_b = alpha * self.map_b + beta;
        let old_sum = self.sum;
        self.sum = alpha * old_sum + n * beta;
        self.sum_sq =
            alpha * alpha * self.sum_sq + 2.0 * alpha * beta * old_sum + n * beta * beta;
        self.note_event();
    }

    /// Rotate the pair (i, j) by θ in actual space; Σv² is preserved by the
    /// rotation, Σv shifts by the pair delta.
    fn rotate(&mut self, i: usize, j: usize, angle: f64) {
        let (c, s) = (angle.cos(), angle.sin());
        let u = self.map_a * self.stored[i] + self.map_b;
        let w = self.map_a * self.stored[j] + self.map_b;
        let u2 = u * c + w * s;
        let w2 = w * c - u * s;
        self.stored[i] = (u2 - self.map_b) / self.map_a;
        self.stored[j] = (w2 - self.map_b) / self.map_a;
        self.sum += (u2 + w2) - (u + w);
        self.note_event();
    }

    fn note_event(&mut self) {
        self.events += 1;
        if self.events >= CACHE_REFRESH_INTERVAL {
            self.materialize();
            self.sum = compensated_sum(self.stored.iter().copied());
            self.sum_sq = compensated_sum(self.stored.iter().map(|&v| v * v));
            self.events = 0;
        }
    }

    /// Fold the pending map into the coordinates. Does not rebuild caches:
    /// those are only rebuilt on the periodic refresh.
    fn materialize(&mut self) {
        if self.map_a != 1.0 || self.map_b != 0.0 {
            for v in &mut self.stored {
                *v = self.map_a * *v + self.map_b;
            }
            self.map_a = 1.0;
            self.map_b = 0.0;
        }
    }

    fn moments(&self) -> (f64, f64, f64) {
        let n = self.n() as f64;
        let m2 = compensated_sum(self.stored.iter().map(|&v| v * v)) / n;
        let m4 = compensated_sum(self.stored.iter().map(|&v| v.powi(4))) / n;
        let m6 = compensated_sum(self.stored.iter().map(|&v| v.powi(6))) / n;
        (m2, m4, m6)
    }
}

/// The deterministic law governing flow segments of one process.
enum FlowLaw {
    Interacting { field: f64 },
    Quenched { current: CurrentSolution },
}

impl FlowLaw {
    fn advance(&self, state: &mut LazyState, from: f64, to: f64) -> Result<()> {
        debug_assert!(to >= from);
        if to == from {
            return Ok(());
        }
        let (alpha, beta) = match self {
            FlowLaw::Interacting { field } => {
                if *field != 0.0 && state.energy() <= 0.0 {
                    return Err(SimError::Degenerate(
                        "zero energy under a nonzero field".into(),
                    ));
                }
                interacting_coefficients(state.energy(), *field, state.momentum(), to - from)
            }
            FlowLaw::Quenched { current } => {
                let k = current.coefficients(from, to)?;
                (k.alpha, k.beta)
            }
        };
        state.flow(alpha, beta);
        Ok(())
    }
}

/// Seed the quenched current from the realized initial state or from the
/// distribution-level moments, per the config switch.
fn make_quenched_current(config: &SimConfig, v0: &MasterVector, projected: bool) -> Result<CurrentSolution> {
    let (j0, u) = match config.quenched_init {
        QuenchedInit::Empirical => (v0.momentum(), v0.energy()),
        QuenchedInit::Distributional => {
            let mean = config.initial_distribution.mean();
            let m2 = config.initial_distribution.second_moment();
            if projected {
                if m2 <= 0.0 {
                    return Err(SimError::Degenerate(
                        "distributional seeding needs a nonzero second moment under projection"
                            .into(),
                    ));
                }
                (mean / m2.sqrt(), 1.0)
            } else {
                (mean, m2)
            }
        }
    };
    if u <= 0.0 {
        if config.field_strength == 0.0 {
            // All-zero state with no forcing: the current is identically 0
            // and the flow is the identity.
            return CurrentSolution::new(CurrentKind::Quenched, 1.0, 0.0, 0.0, 0.0);
        }
        return Err(SimError::Degenerate(
            "quenched current undefined at zero energy under a nonzero field".into(),
        ));
    }
    CurrentSolution::new(CurrentKind::Quenched, u, config.field_strength, j0, 0.0)
}

fn emit_sample(state: &mut LazyState, time: f64, collect_snapshot: bool) -> TrajectorySample {
    state.materialize();
    let (m2, m4, m6) = state.moments();
    TrajectorySample {
        time,
        j_value: state.momentum(),
        u_value: state.energy(),
        m2,
        m4,
        m6,
        snapshot: collect_snapshot.then(|| state.stored.clone()),
    }
}

/// Run one replica of one process from a given initial state and event
/// source. This is the core loop; `simulate` wraps it with the seeded
/// sources.
pub fn simulate_with_source(
    config: &SimConfig,
    process: Process,
    v0: &MasterVector,
    source: &mut EventSource,
    flags: RunFlags,
) -> Result<ReplicaRun> {
    config.validate()?;
    let projected = config.projection_for(process == Process::Interacting);
    let law = match process {
        Process::Interacting => FlowLaw::Interacting {
            field: config.field_strength,
        },
        Process::Quenched => FlowLaw::Quenched {
            current: make_quenched_current(config, v0, projected)?,
        },
    };
    let mut state = LazyState::from_master(v0);
    let mut t = 0.0;
    let mut pending = source.next(t);
    let mut samples = Vec::with_capacity(config.sample_times.len());
    let mut events = Vec::new();
    for &ts in &config.sample_times {
        loop {
            let ev = match pending {
                Some(e) if e.time < ts => e,
                _ => break,
            };
            law.advance(&mut state, t, ev.time)?;
            state.rotate(ev.pair.0, ev.pair.1, ev.angle);
            if flags.record_events {
                events.push(ev);
            }
            t = ev.time;
            pending = source.next(t);
        }
        law.advance(&mut state, t, ts)?;
        t = ts;
        samples.push(emit_sample(&mut state, ts, flags.collect_snapshots));
    }
    Ok(ReplicaRun { samples, events })
}

/// The seeded event source replica `replica_index` consumes.
pub fn replica_event_source(config: &SimConfig, replica_index: u32) -> Result<EventSource> {
    EventSource::generated(
        RngStreamKey::new(
            config.master_seed,
            replica_index,
            StreamTag::CollisionHistory,
        ),
        config.n_particles,
    )
}

/// The initial state of replica `replica_index`, with the projection flag
/// resolved for `process`.
pub fn replica_initial_state(
    config: &SimConfig,
    process: Process,
    replica_index: u32,
) -> Result<MasterVector> {
    initial_state_for(
        config,
        replica_index,
        config.projection_for(process == Process::Interacting),
    )
}

fn initial_state_for(config: &SimConfig, replica_index: u32, projected: bool) -> Result<MasterVector> {
    let key = RngStreamKey::new(config.master_seed, replica_index, StreamTag::InitialState);
    let mut cfg = config.clone();
    cfg.project_to_sphere = Some(projected);
    sample_initial_state(&cfg, key)
}

/// Simulate one replica of one process; fully determined by
/// `(config, process, replica_index)`.
pub fn simulate(
    config: &SimConfig,
    process: Process,
    replica_index: u32,
    collect_snapshots: bool,
) -> Result<Vec<TrajectorySample>> {
    let projected = config.projection_for(process == Process::Interacting);
    let v0 = initial_state_for(config, replica_index, projected)?;
    let mut source = replica_event_source(config, replica_index)?;
    let run = simulate_with_source(
        config,
        process,
        &v0,
        &mut source,
        RunFlags {
            collect_snapshots,
            record_events: false,
        },
    )?;
    Ok(run.samples)
}

/// Run the interacting and quenched processes from identical initial
/// velocities, consuming the identical collision stream (same times, pairs,
/// and angles), and report the pathwise distance at each sample time.
pub fn simulate_coupled(config: &SimConfig, replica_index: u32) -> Result<Vec<CoupledSample>> {
    config.validate()?;
    let projected = config.projection_for(true);
    let v0 = initial_state_for(config, replica_index, projected)?;
    let mut source = replica_event_source(config, replica_index)?;
    let current = make_quenched_current(config, &v0, projected)?;
    let interacting = FlowLaw::Interacting {
        field: config.field_strength,
    };
    let quenched = FlowLaw::Quenched { current };
    let mut a = LazyState::from_master(&v0);
    let mut b = LazyState::from_master(&v0);
    let mut t = 0.0;
    let mut pending = source.next(t);
    let mut out = Vec::with_capacity(config.sample_times.len());
    for &ts in &config.sample_times {
        loop {
            let ev = match pending {
                Some(e) if e.time < ts => e,
                _ => break,
            };
            interacting.advance(&mut a, t, ev.time)?;
            quenched.advance(&mut b, t, ev.time)?;
            a.rotate(ev.pair.0, ev.pair.1, ev.angle);
            b.rotate(ev.pair.0, ev.pair.1, ev.angle);
            t = ev.time;
            pending = source.next(t);
        }
        interacting.advance(&mut a, t, ts)?;
        quenched.advance(&mut b, t, ts)?;
        t = ts;
        a.materialize();
        b.materialize();
        let n = a.n() as f64;
        let dist_sq = compensated_sum(
            a.stored
                .iter()
                .zip(&b.stored)
                .map(|(&x, &y)| (x - y) * (x - y)),
        ) / n;
        out.push(CoupledSample {
            time: ts,
            distance_n: dist_sq.max(0.0).sqrt(),
            j_interacting: a.momentum(),
            j_quenched: b.momentum(),
            u_interacting: a.energy(),
            u_quenched: b.energy(),
            jhat_ode: quenched_current_value(&quenched, ts),
        });
    }
    Ok(out)
}

fn quenched_current_value(law: &FlowLaw, t: f64) -> f64 {
    match law {
        FlowLaw::Quenched { current } => current.evaluate(t),
        FlowLaw::Interacting { .. } => unreachable!("coupled runs carry a quenched law"),
    }
}

/// Replica-resolved ensemble output.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleData {
    Trajectories(Vec<Vec<TrajectorySample>>),
    Coupled(Vec<Vec<CoupledSample>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub mode: EnsembleMode,
    pub sample_times: Vec<f64>,
    pub data: EnsembleData,
}

/// Ensemble execution switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnsembleOptions {
    pub collect_snapshots: bool,
    /// Worker threads; `None` means the global default pool. Ignored when
    /// the `parallel` feature is off.
    pub threads: Option<usize>,
}

fn run_one(config: &SimConfig, mode: EnsembleMode, r: u32, snapshots: bool) -> Result<EnsembleItem> {
    let wrap = |e: SimError| SimError::Replica {
        replica: r,
        master_seed: config.master_seed,
        source: Box::new(e),
    };
    match mode {
        EnsembleMode::Interacting => simulate(config, Process::Interacting, r, snapshots)
            .map(EnsembleItem::Trajectory)
            .map_err(wrap),
        EnsembleMode::Quenched => simulate(config, Process::Quenched, r, snapshots)
            .map(EnsembleItem::Trajectory)
            .map_err(wrap),
        EnsembleMode::Coupled => simulate_coupled(config, r)
            .map(EnsembleItem::Coupled)
            .map_err(wrap),
    }
}

enum EnsembleItem {
    Trajectory(Vec<TrajectorySample>),
    Coupled(Vec<CoupledSample>),
}

fn assemble(
    mode: EnsembleMode,
    sample_times: Vec<f64>,
    items: Vec<EnsembleItem>,
) -> EnsembleResult {
    let data = match mode {
        EnsembleMode::Coupled => EnsembleData::Coupled(
            items
                .into_iter()
                .map(|i| match i {
                    EnsembleItem::Coupled(c) => c,
                    EnsembleItem::Trajectory(_) => unreachable!(),
                })
                .collect(),
        ),
        _ => EnsembleData::Trajectories(
            items
                .into_iter()
                .map(|i| match i {
                    EnsembleItem::Trajectory(t) => t,
                    EnsembleItem::Coupled(_) => unreachable!(),
                })
                .collect(),
        ),
    };
    EnsembleResult {
        mode,
        sample_times,
        data,
    }
}

/// Run R independent replicas sequentially. Always available; the parallel
/// path must produce byte-identical results.
pub fn run_ensemble_sequential(
    config: &SimConfig,
    mode: EnsembleMode,
    options: EnsembleOptions,
) -> Result<EnsembleResult> {
    config.validate()?;
    let items = (0..config.replicas)
        .map(|r| run_one(config, mode, r, options.collect_snapshots))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(mode, config.sample_times.clone(), items))
}

/// Run R independent replicas, in parallel when the `parallel` feature is
/// enabled. Replica r is fully determined by `(master_seed, r)`, and
/// aggregation happens in replica order, so results do not depend on the
/// number of threads or on completion order.
#[cfg(feature = "parallel")]
pub fn run_ensemble(
    config: &SimConfig,
    mode: EnsembleMode,
    options: EnsembleOptions,
) -> Result<EnsembleResult> {
    use rayon::prelude::*;
    config.validate()?;
    let run_all = || -> Result<Vec<EnsembleItem>> {
        (0..config.replicas)
            .into_par_iter()
            .map(|r| run_one(config, mode, r, options.collect_snapshots))
            .collect()
    };
    let items = match options.threads {
        Some(1) => {
            return run_ensemble_sequential(config, mode, options);
        }
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| SimError::contract(format!("thread pool: {e}")))?;
            pool.install(run_all)?
        }
        None => run_all()?,
    };
    Ok(assemble(mode, config.sample_times.clone(), items))
}

#[cfg(not(feature = "parallel"))]
pub fn run_ensemble(
    config: &SimConfig,
    mode: EnsembleMode,
    options: EnsembleOptions,
) -> Result<EnsembleResult> {
    run_ensemble_sequential(config, mode, options)
}

/// Mean and standard error of a sample; stderr is 0 for fewer than two
/// values.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Median (average of the middle pair for even counts).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ensemble mean and standard error of every observable at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryAggregate {
    pub time: f64,
    pub mean_j: f64,
    pub se_j: f64,
    pub mean_u: f64,
    pub se_u: f64,
    pub mean_m2: f64,
    pub se_m2: f64,
    pub mean_m4: f64,
    pub se_m4: f64,
    pub mean_m6: f64,
    pub se_m6: f64,
}

/// Aggregate per-sample-time means and standard errors across replicas.
/// The reduction runs in replica order, so it is independent of how the
/// replicas were scheduled.
pub fn aggregate_trajectories(replicas: &[Vec<TrajectorySample>]) -> Vec<TrajectoryAggregate> {
    if replicas.is_empty() {
        return Vec::new();
    }
    let times = replicas[0].len();
    (0..times)
        .map(|k| {
            let pull = |f: &dyn Fn(&TrajectorySample) -> f64| -> Vec<f64> {
                replicas.iter().map(|r| f(&r[k])).collect()
            };
            let (mean_j, se_j) = mean_and_stderr(&pull(&|s| s.j_value));
            let (mean_u, se_u) = mean_and_stderr(&pull(&|s| s.u_value));
            let (mean_m2, se_m2) = mean_and_stderr(&pull(&|s| s.m2));
            let (mean_m4, se_m4) = mean_and_stderr(&pull(&|s| s.m4));
            let (mean_m6, se_m6) = mean_and_stderr(&pull(&|s| s.m6));
            TrajectoryAggregate {
                time: replicas[0][k].time,
                mean_j,
                se_j,
                mean_u,
                se_u,
                mean_m2,
                se_m2,
                mean_m4,
                se_m4,
                mean_m6,
                se_m6,
            }
        })
        .collect()
}

/// Per-replica supremum over sample times of the coupled distance.
pub fn sup_distances(replicas: &[Vec<CoupledSample>]) -> Vec<f64> {
    replicas
        .iter()
        .map(|rows| rows.iter().map(|r| r.distance_n).fold(0.0, f64::max))
        .collect()
}

/// Velocity snapshots of every replica at sample-time index `k`.
pub fn snapshots_at(result: &EnsembleResult, k: usize) -> Result<Vec<Vec<f64>>> {
    match &result.data {
        EnsembleData::Trajectories(rs) => rs
            .iter()
            .map(|r| {
                r.get(k)
                    .and_then(|s| s.snapshot.clone())
                    .ok_or_else(|| SimError::contract("snapshots were not collected"))
            })
            .collect(),
        EnsembleData::Coupled(_) => Err(SimError::contract(
            "coupled ensembles carry no snapshots",
        )),
    }
}
