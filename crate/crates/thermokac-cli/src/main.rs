//! Command-line orchestration: parse config, dispatch experiments, manage
//! seeds and output directories, and run the built-in acceptance suite.
//!
//! Every run writes a manifest (config echo, seed, tool version) next to
//! its outputs; together they determine every output byte.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thermokac::collision::EventSource;
use thermokac::diagnostics::{
    fit_rate, theorem_bounds, ScalingRow, ScalingTable, TestFunction,
};
use thermokac::engine::{
    aggregate_trajectories, mean_and_stderr, median, replica_event_source, replica_initial_state,
    run_ensemble, simulate_with_source, snapshots_at, sup_distances, EnsembleData, EnsembleMode,
    EnsembleOptions, Process, RunFlags,
};
use thermokac::io::{
    read_history_csv, write_chaos_csv, write_coupled_csv, write_fit_csv, write_history_csv,
    write_manifest, write_scaling_csv, write_snapshot, write_trajectory_csv, ChaosRow,
};
use thermokac::{solve_current, CurrentKind, SimConfig};

#[derive(Parser)]
#[command(name = "thermokac", version, about = "Event-driven thermostatted pair-collision gas simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key=value config file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created; must be empty unless --force).
    #[arg(long)]
    out: PathBuf,
    /// Override master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override replicas.
    #[arg(long)]
    replicas: Option<u32>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Repeatable config override, e.g. --set n_particles=4096.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ProcessArg {
    Interacting,
    Quenched,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble (interacting or quenched) and write trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value = "interacting")]
        process: ProcessArg,
        /// Write one velocity-snapshot file per (replica, sample time).
        #[arg(long)]
        snapshots: bool,
        /// Dump the applied collision events (requires replicas=1).
        #[arg(long, value_name = "FILE")]
        dump_history: Option<PathBuf>,
        /// Replay collision events from a dump (requires replicas=1).
        #[arg(long, value_name = "FILE")]
        replay_history: Option<PathBuf>,
    },
    /// Run the coupled pair on shared randomness and write coupled CSV.
    Couple {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// N-sweep of the two-coordinate factorization defect plus a rate fit.
    ChaosSweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Particle counts of the sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![32usize, 128, 512, 2048])]
        sweep_n: Vec<usize>,
        /// Probe time of the defect measurement.
        #[arg(long, default_value_t = 0.5)]
        time: f64,
        /// Test function applied to the first coordinate.
        #[arg(long, default_value = "v")]
        phi: String,
        /// Test function applied to the second coordinate.
        #[arg(long, default_value = "v")]
        psi: String,
        /// Use only the literal first two coordinates instead of averaging
        /// over all ordered pairs.
        #[arg(long)]
        no_symmetrize: bool,
    },
    /// N-sweep of the coupled sup-distance plus a rate fit.
    CouplingSweep {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 256, 1024, 4096])]
        sweep_n: Vec<usize>,
    },
    /// Compare quenched ensemble means against the closed-form current.
    LimitCheck {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Print the pathwise coupling bound constants.
    Bounds {
        #[arg(long, default_value_t = 1.0)]
        u_hat: f64,
        #[arg(long, default_value_t = 1.0)]
        field: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Also write bounds.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run the built-in acceptance suite and report pass/fail per criterion.
    Acceptance {
        /// Also write acceptance.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Load the config file (or defaults), then apply --set pairs and flag
/// overrides in order.
fn effective_config(common: &CommonOpts) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            SimConfig::parse_str(&text)?
        }
        None => SimConfig::default(),
    };
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("--set needs KEY=VALUE, got `{pair}`"))?;
        config.apply_override(key.trim(), value)?;
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(replicas) = common.replicas {
        config.replicas = replicas;
    }
    config.validate()?;
    Ok(config)
}

/// Create the output directory; refuse to write into a non-empty one
/// without --force.
fn prepare_out_dir(path: &Path, force: bool) -> Result<()> {
    if path.exists() {
        let non_empty = path.read_dir()?.next().is_some();
        if non_empty && !force {
            bail!(
                "output directory {} is not empty (pass --force to write anyway)",
                path.display()
            );
        }
    } else {
        fs::create_dir_all(path)?;
    }
    Ok(())
}

fn create_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

fn ensemble_options(common: &CommonOpts, snapshots: bool) -> EnsembleOptions {
    EnsembleOptions {
        collect_snapshots: snapshots,
        threads: common.threads,
    }
}

fn write_run_manifest(
    dir: &Path,
    subcommand: &str,
    config: &SimConfig,
    extras: &[(String, String)],
) -> Result<()> {
    let mut w = create_file(dir, "manifest.txt")?;
    write_manifest(&mut w, subcommand, config, extras)?;
    w.flush()?;
    Ok(())
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate {
            common,
            process,
            snapshots,
            dump_history,
            replay_history,
        } => cmd_simulate(common, process, snapshots, dump_history, replay_history),
        Command::Couple { common } => cmd_couple(common),
        Command::ChaosSweep {
            common,
            sweep_n,
            time,
            phi,
            psi,
            no_symmetrize,
        } => cmd_chaos_sweep(common, sweep_n, time, &phi, &psi, !no_symmetrize),
        Command::CouplingSweep { common, sweep_n } => cmd_coupling_sweep(common, sweep_n),
        Command::LimitCheck { common } => cmd_limit_check(common),
        Command::Bounds {
            u_hat,
            field,
            horizon,
            out,
            force,
        } => cmd_bounds(u_hat, field, horizon, out, force),
        Command::Acceptance { out, force } => cmd_acceptance(out, force),
    }
}

fn process_mode(process: ProcessArg) -> (Process, EnsembleMode, &'static str) {
    match process {
        ProcessArg::Interacting => (Process::Interacting, EnsembleMode::Interacting, "interacting"),
        ProcessArg::Quenched => (Process::Quenched, EnsembleMode::Quenched, "quenched"),
    }
}

fn cmd_simulate(
    common: CommonOpts,
    process: ProcessArg,
    snapshots: bool,
    dump_history: Option<PathBuf>,
    replay_history: Option<PathBuf>,
) -> Result<ExitCode> {
    let config = effective_config(&common)?;
    prepare_out_dir(&common.out, common.force)?;
    let (proc, mode, proc_name) = process_mode(process);

    let replicas: Vec<Vec<thermokac::TrajectorySample>> = if dump_history.is_some()
        || replay_history.is_some()
    {
        if config.replicas != 1 {
            bail!("history dump/replay requires replicas=1");
        }
        let v0 = replica_initial_state(&config, proc, 0)?;
        let mut source = match &replay_history {
            Some(path) => {
                let file = File::open(path)
                    .with_context(|| format!("opening history {}", path.display()))?;
                EventSource::replay(read_history_csv(BufReader::new(file))?)
            }
            None => replica_event_source(&config, 0)?,
        };
        let run = simulate_with_source(
            &config,
            proc,
            &v0,
            &mut source,
            RunFlags {
                collect_snapshots: snapshots,
                record_events: dump_history.is_some(),
            },
        )?;
        if let Some(path) = &dump_history {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write_history_csv(&mut w, &run.events)?;
            w.flush()?;
        }
        vec![run.samples]
    } else {
        let result = run_ensemble(&config, mode, ensemble_options(&common, snapshots))?;
        match result.data {
            EnsembleData::Trajectories(t) => t,
            EnsembleData::Coupled(_) => unreachable!(),
        }
    };

    let mut w = create_file(&common.out, "trajectory.csv")?;
    write_trajectory_csv(&mut w, &replicas)?;
    w.flush()?;

    if snapshots {
        let snap_dir = common.out.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        for (r, samples) in replicas.iter().enumerate() {
            for (k, s) in samples.iter().enumerate() {
                if let Some(vel) = &s.snapshot {
                    let mut w = create_file(&snap_dir, &format!("snapshot_r{r:04}_t{k:02}.txt"))?;
                    write_snapshot(&mut w, vel)?;
                    w.flush()?;
                }
            }
        }
    }

    write_run_manifest(
        &common.out,
        "simulate",
        &config,
        &[("process".into(), proc_name.into())],
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_couple(common: CommonOpts) -> Result<ExitCode> {
    let config = effective_config(&common)?;
    prepare_out_dir(&common.out, common.force)?;
    let result = run_ensemble(&config, EnsembleMode::Coupled, ensemble_options(&common, false))?;
    let EnsembleData::Coupled(rows) = &result.data else {
        unreachable!()
    };
    let mut w = create_file(&common.out, "coupled.csv")?;
    write_coupled_csv(&mut w, rows)?;
    w.flush()?;

    // Per-replica supremum over sample times, the quantity the sweep fits.
    let sups = sup_distances(rows);
    let mut w = create_file(&common.out, "sup_distance.csv")?;
    writeln!(w, "replica,sup_distance_N")?;
    for (r, s) in sups.iter().enumerate() {
        writeln!(w, "{r},{s}")?;
    }
    w.flush()?;

    write_run_manifest(&common.out, "couple", &config, &[])?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_chaos_sweep(
    common: CommonOpts,
    sweep_n: Vec<usize>,
    time: f64,
    phi: &str,
    psi: &str,
    symmetrize: bool,
) -> Result<ExitCode> {
    let base = effective_config(&common)?;
    prepare_out_dir(&common.out, common.force)?;
    let phi: TestFunction = phi.parse()?;
    let psi: TestFunction = psi.parse()?;

    let mut chaos_rows = Vec::new();
    let mut table = ScalingTable::new();
    for &n in &sweep_n {
        let mut config = base.clone();
        config.n_particles = n;
        config.t_final = time;
        config.sample_times = vec![time];
        // Independent randomness per sweep point.
        config.master_seed = base.master_seed.wrapping_add(n as u64);
        config.validate()?;
        let result = run_ensemble(&config, EnsembleMode::Quenched, ensemble_options(&common, true))?;
        let snaps = snapshots_at(&result, 0)?;
        let (defect, stderr) = thermokac::diagnostics::chaos_defect(&snaps, phi, psi, symmetrize)?;
        chaos_rows.push(ChaosRow {
            n_particles: n,
            time,
            phi: phi.to_string(),
            psi: psi.to_string(),
            defect,
            stderr,
        });
        table.push(ScalingRow {
            n_particles: n,
            metric: format!("chaos_defect_{phi}_{psi}"),
            mean: defect.abs(),
            stderr,
            replicas: config.replicas,
        })?;
    }

    let mut w = create_file(&common.out, "chaos.csv")?;
    write_chaos_csv(&mut w, &chaos_rows)?;
    w.flush()?;
    let mut w = create_file(&common.out, "scaling.csv")?;
    write_scaling_csv(&mut w, &table)?;
    w.flush()?;

    let metric = format!("chaos_defect_{phi}_{psi}");
    let fit = fit_rate(&table, &metric)?;
    let mut w = create_file(&common.out, "fit_summary.csv")?;
    write_fit_csv(&mut w, &[(metric.clone(), fit)])?;
    w.flush()?;
    println!("{metric}: slope {:.4}, r² {:.4}", fit.slope, fit.r_squared);

    write_run_manifest(
        &common.out,
        "chaos-sweep",
        &base,
        &[
            (
                "sweep_n".into(),
                sweep_n
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("time".into(), time.to_string()),
            ("phi".into(), phi.to_string()),
            ("psi".into(), psi.to_string()),
            ("symmetrize".into(), symmetrize.to_string()),
            ("seed_rule".into(), "master_seed + N per sweep point".into()),
        ],
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_coupling_sweep(common: CommonOpts, sweep_n: Vec<usize>) -> Result<ExitCode> {
    let base = effective_config(&common)?;
    prepare_out_dir(&common.out, common.force)?;
    let mut table = ScalingTable::new();
    for &n in &sweep_n {
        let mut config = base.clone();
        config.n_particles = n;
        config.master_seed = base.master_seed.wrapping_add(n as u64);
        config.validate()?;
        let result = run_ensemble(&config, EnsembleMode::Coupled, ensemble_options(&common, false))?;
        let EnsembleData::Coupled(rows) = &result.data else {
            unreachable!()
        };
        let sups = sup_distances(rows);
        let (_, se) = mean_and_stderr(&sups);
        table.push(ScalingRow {
            n_particles: n,
            metric: "sup_distance_median".into(),
            mean: median(&sups),
            stderr: 1.2533 * se,
            replicas: config.replicas,
        })?;
    }

    let mut w = create_file(&common.out, "scaling.csv")?;
    write_scaling_csv(&mut w, &table)?;
    w.flush()?;
    let fit = fit_rate(&table, "sup_distance_median")?;
    let mut w = create_file(&common.out, "fit_summary.csv")?;
    write_fit_csv(&mut w, &[("sup_distance_median".into(), fit)])?;
    w.flush()?;
    println!("sup_distance_median: slope {:.4}, r² {:.4}", fit.slope, fit.r_squared);

    write_run_manifest(
        &common.out,
        "coupling-sweep",
        &base,
        &[
            (
                "sweep_n".into(),
                sweep_n
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("seed_rule".into(), "master_seed + N per sweep point".into()),
        ],
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_limit_check(common: CommonOpts) -> Result<ExitCode> {
    let config = effective_config(&common)?;
    prepare_out_dir(&common.out, common.force)?;
    let result = run_ensemble(&config, EnsembleMode::Quenched, ensemble_options(&common, false))?;
    let EnsembleData::Trajectories(replicas) = &result.data else {
        unreachable!()
    };
    let agg = aggregate_trajectories(replicas);

    // Distribution-level seed of the reference curve.
    let projected = config.projection_for(false);
    let mean = config.initial_distribution.mean();
    let m2 = config.initial_distribution.second_moment();
    let (j0, u_hat) = if projected {
        if m2 <= 0.0 {
            bail!("initial_distribution has zero second moment; no reference curve");
        }
        (mean / m2.sqrt(), 1.0)
    } else {
        (mean, m2)
    };
    if u_hat <= 0.0 && config.field_strength > 0.0 {
        bail!("initial_distribution has zero second moment; no reference curve");
    }

    let mut w = create_file(&common.out, "limit_check.csv")?;
    writeln!(w, "time,mean_J,stderr_J,zeta,z_J,mean_U,stderr_U,u_hat,z_U")?;
    for row in &agg {
        let zeta = if u_hat > 0.0 {
            solve_current(CurrentKind::Quenched, u_hat, config.field_strength, j0, 0.0, row.time)?
        } else {
            0.0
        };
        let z_j = if row.se_j > 0.0 {
            (row.mean_j - zeta) / row.se_j
        } else {
            0.0
        };
        let z_u = if row.se_u > 0.0 {
            (row.mean_u - u_hat) / row.se_u
        } else {
            0.0
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            row.time, row.mean_j, row.se_j, zeta, z_j, row.mean_u, row.se_u, u_hat, z_u
        )?;
    }
    w.flush()?;

    write_run_manifest(&common.out, "limit-check", &config, &[])?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(
    u_hat: f64,
    field: f64,
    horizon: f64,
    out: Option<PathBuf>,
    force: bool,
) -> Result<ExitCode> {
    let b = theorem_bounds(u_hat, field, horizon)?;
    let text = format!(
        "u_hat={}\nfield={}\nhorizon={}\ndelta_t={}\nn_of_t={}\nlambda_rate={}\nexp_envelope={}\n",
        b.u_hat, b.field, b.horizon, b.delta_t, b.n_of_t, b.lambda_rate, b.exp_envelope
    );
    print!("{text}");
    if let Some(dir) = out {
        prepare_out_dir(&dir, force)?;
        fs::write(dir.join("bounds.txt"), text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_acceptance(out: Option<PathBuf>, force: bool) -> Result<ExitCode> {
    let exe = std::env::current_exe().context("locating own executable")?;
    let outcomes = thermokac::acceptance::run_all(&exe);
    let mut report = String::new();
    for o in &outcomes {
        let line = o.report_line();
        println!("{line}");
        report.push_str(&line);
        report.push('\n');
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    report.push_str(if all_passed {
        "result: all criteria passed\n"
    } else {
        "result: FAILURES present\n"
    });
    println!(
        "result: {}",
        if all_passed {
            "all criteria passed"
        } else {
            "FAILURES present"
        }
    );
    if let Some(dir) = out {
        prepare_out_dir(&dir, force)?;
        fs::write(dir.join("acceptance.txt"), report)?;
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
