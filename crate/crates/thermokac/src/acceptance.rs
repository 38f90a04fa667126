//! The built-in acceptance suite: ten self-contained checks combining exact
//! invariants, closed-form oracles and desk-scale exponent measurements.
//! Each check reports one pass/fail line and its runtime budget.

use crate::config::{InitialDistribution, QuenchedInit, SimConfig};
use crate::diagnostics::{
    chaos_defect, current_fluctuation, fit_rate, theorem_bounds, wasserstein1, EmpiricalMeasure,
    ScalingRow, ScalingTable, TestFunction,
};
use crate::engine::{
    aggregate_trajectories, mean_and_stderr, median, run_ensemble, snapshots_at, sup_distances,
    EnsembleData, EnsembleMode, EnsembleOptions,
};
use crate::error::Result;
use crate::flow::{
    quenched_coefficients, solve_current, thermostatted_flow, CurrentKind, CurrentSolution,
};
use crate::oracle::integrate_rk45;
use crate::state::MasterVector;
use rand::Rng;
use std::path::Path;
use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CriterionOutcome {
    /// The one-line report format used by the CLI and the test suite.
    pub fn report_line(&self) -> String {
        format!(
            "criterion {:2} [{}] {} — {} ({:.2?})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed
        )
    }
}

fn finish(
    id: u8,
    name: &'static str,
    budget: Duration,
    started: Instant,
    passed: bool,
    detail: String,
) -> CriterionOutcome {
    let elapsed = started.elapsed();
    let in_budget = elapsed <= budget;
    let detail = if in_budget {
        detail
    } else {
        format!("{detail}; over runtime budget {budget:.2?}")
    };
    CriterionOutcome {
        id,
        name,
        passed: passed && in_budget,
        detail,
        elapsed,
    }
}

fn gaussian_projected(n: usize, seed: u64, replicas: u32) -> SimConfig {
    SimConfig {
        n_particles: n,
        field_strength: 1.0,
        t_final: 2.0,
        sample_times: vec![0.5, 1.0, 2.0],
        initial_distribution: InitialDistribution::Gaussian {
            mean: 0.0,
            variance: 1.0,
        },
        project_to_sphere: Some(true),
        replicas,
        master_seed: seed,
        quenched_init: QuenchedInit::Empirical,
    }
}

/// Criterion 1: Interacting process on the sphere: max relative drift of U(V(t)) at
/// all sample times stays within 1e-8.
pub fn criterion_1() -> CriterionOutcome {
    let budget = Duration::from_secs(30);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut config = gaussian_projected(1024, 0xACC0_0001, 20);
        config.sample_times = (1..=8).map(|k| 0.25 * k as f64).collect();
        let result = run_ensemble(&config, EnsembleMode::Interacting, EnsembleOptions::default())?;
        let EnsembleData::Trajectories(replicas) = &result.data else {
            unreachable!()
        };
        let mut max_drift = 0.0f64;
        for samples in replicas {
            for s in samples {
                // Projected start has U(V0) = 1; m2 is recomputed from the
                // materialized coordinates, so this is an end-to-end check.
                max_drift = max_drift.max((s.m2 - 1.0).abs());
                max_drift = max_drift.max((s.u_value - 1.0).abs());
            }
        }
        Ok((
            max_drift <= 1e-8,
            format!("max relative energy drift {max_drift:.3e} (allowed 1e-8; N=1024, E=1, T=2, R=20)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(1, "energy conservation", budget, start, passed, detail),
        Err(e) => finish(1, "energy conservation", budget, start, false, e.to_string()),
    }
}

/// Criterion 2: Closed-form flows against an adaptive Dormand-Prince integration of
/// the raw equations of motion, 100 random cases, 1e-9 per component.
pub fn criterion_2() -> CriterionOutcome {
    let budget = Duration::from_secs(10);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut rng = crate::rng::RngStreamKey::new(0xACC0_0002, 0, crate::rng::StreamTag::InitialState).rng();
        let mut worst = 0.0f64;
        for case in 0..100 {
            let n = rng.random_range(2..=8usize);
            let field: f64 = rng.random_range(0.0..2.0);
            let dt: f64 = rng.random_range(0.05..1.0);
            let velocities: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v0 = MasterVector::from_velocities(velocities.clone())?;
            if v0.energy() < 1e-3 {
                continue;
            }

            if case % 2 == 0 {
                // Interacting: dv_i/dt = E (1 - J(V)/U(V) v_i).
                let flowed = thermostatted_flow(&v0, dt, field)?;
                let reference = integrate_rk45(
                    |_, y, dy| {
                        let nf = y.len() as f64;
                        let j: f64 = y.iter().sum::<f64>() / nf;
                        let u: f64 = y.iter().map(|v| v * v).sum::<f64>() / nf;
                        for (d, &v) in dy.iter_mut().zip(y) {
                            *d = field * (1.0 - j / u * v);
                        }
                    },
                    0.0,
                    dt,
                    &velocities,
                    1e-12,
                    1e-14,
                );
                for (a, b) in flowed.velocities().iter().zip(&reference) {
                    worst = worst.max((a - b).abs());
                }
            } else {
                // Quenched: dv_i/dt = E - (E Ĵ(t)/Û) v_i, with Ĵ co-integrated.
                let u_bar: f64 = rng.random_range(0.25..4.0);
                let j0 = u_bar.sqrt() * rng.random_range(-0.95..0.95);
                let current = CurrentSolution::new(CurrentKind::Quenched, u_bar, field, j0, 0.0)?;
                let coeffs = quenched_coefficients(&current, 0.0, dt)?;
                let mut y0 = velocities.clone();
                y0.push(j0);
                let reference = integrate_rk45(
                    |_, y, dy| {
                        let jhat = y[y.len() - 1];
                        let gamma = field * jhat / u_bar;
                        let m = y.len() - 1;
                        for i in 0..m {
                            dy[i] = field - gamma * y[i];
                        }
                        dy[m] = field - field * jhat * jhat / u_bar - 2.0 * jhat;
                    },
                    0.0,
                    dt,
                    &y0,
                    1e-12,
                    1e-14,
                );
                for (i, &v) in velocities.iter().enumerate() {
                    worst = worst.max((coeffs.apply(v) - reference[i]).abs());
                }
                // The current closed form itself must track the integrator.
                worst = worst.max((current.evaluate(dt) - reference[n]).abs());
            }
        }
        Ok((
            worst <= 1e-9,
            format!("worst per-component deviation {worst:.3e} over 100 cases (allowed 1e-9)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(2, "flow vs integrator oracle", budget, start, passed, detail),
        Err(e) => finish(2, "flow vs integrator oracle", budget, start, false, e.to_string()),
    }
}

/// Criterion 3: Quenched ensemble means track the N-independent current equation:
/// mean J within 3 SE of the closed form, mean U within 3 SE of Û = 1.
pub fn criterion_3() -> CriterionOutcome {
    let budget = Duration::from_secs(120);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let config = gaussian_projected(512, 0xACC0_0003, 200);
        let result = run_ensemble(&config, EnsembleMode::Quenched, EnsembleOptions::default())?;
        let EnsembleData::Trajectories(replicas) = &result.data else {
            unreachable!()
        };
        let agg = aggregate_trajectories(replicas);
        let mut passed = true;
        let mut worst_z = 0.0f64;
        for row in &agg {
            let zeta = solve_current(CurrentKind::Quenched, 1.0, 1.0, 0.0, 0.0, row.time)?;
            let zj = (row.mean_j - zeta).abs() / row.se_j;
            let zu = (row.mean_u - 1.0).abs() / row.se_u;
            worst_z = worst_z.max(zj).max(zu);
            passed &= zj <= 3.0 && zu <= 3.0;
        }
        Ok((
            passed,
            format!("worst |z| = {worst_z:.2} over J and U at t in {{0.5, 1, 2}} (allowed 3; N=512, R=200)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(3, "mean-current consistency", budget, start, passed, detail),
        Err(e) => finish(3, "mean-current consistency", budget, start, false, e.to_string()),
    }
}

/// Criterion 4: Two-coordinate factorization defect decays like 1/N: log-log slope
/// -1 +- 0.3 with r² >= 0.9 over N in {32, 128, 512, 2048}.
///
/// The initial family is a +-0.05 two-point law, i.e. Û = 0.0025 under a
/// unit field. In that strong-field regime the current settles at
/// Ĵ² ≈ 0.9 Û, which maximizes the defect relative to the estimator's
/// replica noise; with O(1) energies the signal would sit below the
/// R = 400 noise floor.
pub fn criterion_4() -> CriterionOutcome {
    let budget = Duration::from_secs(600);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut table = ScalingTable::new();
        for &n in &[32usize, 128, 512, 2048] {
            let config = SimConfig {
                n_particles: n,
                field_strength: 1.0,
                t_final: 0.5,
                sample_times: vec![0.5],
                initial_distribution: InitialDistribution::TwoPoint {
                    a: -0.05,
                    b: 0.05,
                    prob_a: 0.5,
                },
                project_to_sphere: Some(false),
                replicas: 400,
                master_seed: 4 + n as u64,
                quenched_init: QuenchedInit::Empirical,
            };
            let result = run_ensemble(
                &config,
                EnsembleMode::Quenched,
                EnsembleOptions {
                    collect_snapshots: true,
                    threads: None,
                },
            )?;
            let snaps = snapshots_at(&result, 0)?;
            let (defect, stderr) =
                chaos_defect(&snaps, TestFunction::Velocity, TestFunction::Velocity, true)?;
            table.push(ScalingRow {
                n_particles: n,
                metric: "chaos_defect".into(),
                mean: defect.abs(),
                stderr,
                replicas: config.replicas,
            })?;
        }
        let fit = fit_rate(&table, "chaos_defect")?;
        let passed = (fit.slope + 1.0).abs() <= 0.3 && fit.r_squared >= 0.9;
        Ok((
            passed,
            format!(
                "slope {:.3} (want -1 +- 0.3), r² {:.3} (want >= 0.9), R=400, t=0.5",
                fit.slope, fit.r_squared
            ),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(4, "chaos defect 1/N rate", budget, start, passed, detail),
        Err(e) => finish(4, "chaos defect 1/N rate", budget, start, false, e.to_string()),
    }
}

/// Criterion 5: Coupled pathwise distance: median sup-distance strictly decreasing in
/// N with fitted slope <= -0.20 over N in {64, 256, 1024, 4096}.
pub fn criterion_5() -> CriterionOutcome {
    let budget = Duration::from_secs(600);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut medians = Vec::new();
        let mut table = ScalingTable::new();
        for &n in &[64usize, 256, 1024, 4096] {
            let config = SimConfig {
                n_particles: n,
                field_strength: 1.0,
                t_final: 1.0,
                sample_times: (1..=10).map(|k| 0.1 * k as f64).collect(),
                initial_distribution: InitialDistribution::Gaussian {
                    mean: 0.0,
                    variance: 1.0,
                },
                project_to_sphere: Some(true),
                replicas: 100,
                master_seed: 0xACC0_0005 + n as u64,
                quenched_init: QuenchedInit::Empirical,
            };
            let result = run_ensemble(&config, EnsembleMode::Coupled, EnsembleOptions::default())?;
            let EnsembleData::Coupled(rows) = &result.data else {
                unreachable!()
            };
            let sups = sup_distances(rows);
            let med = median(&sups);
            let (_, se) = mean_and_stderr(&sups);
            medians.push(med);
            table.push(ScalingRow {
                n_particles: n,
                metric: "sup_distance_median".into(),
                mean: med,
                // Normal-approximation standard error of a median.
                stderr: 1.2533 * se,
                replicas: config.replicas,
            })?;
        }
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        let fit = fit_rate(&table, "sup_distance_median")?;
        let passed = decreasing && fit.slope <= -0.20;
        Ok((
            passed,
            format!(
                "medians {:?} decreasing: {decreasing}, slope {:.3} (want <= -0.20)",
                medians
                    .iter()
                    .map(|m| format!("{m:.4}"))
                    .collect::<Vec<_>>(),
                fit.slope
            ),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(5, "coupling distance decay", budget, start, passed, detail),
        Err(e) => finish(5, "coupling distance decay", budget, start, false, e.to_string()),
    }
}

/// Criterion 6: Sixth-moment control: ensemble mean m6(t) finite and below 50 times
/// the analytic initial value 15 for Gaussian data.
pub fn criterion_6() -> CriterionOutcome {
    let budget = Duration::from_secs(60);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut config = gaussian_projected(256, 0xACC0_0006, 50);
        config.sample_times = (1..=8).map(|k| 0.25 * k as f64).collect();
        let result = run_ensemble(&config, EnsembleMode::Quenched, EnsembleOptions::default())?;
        let EnsembleData::Trajectories(replicas) = &result.data else {
            unreachable!()
        };
        let agg = aggregate_trajectories(replicas);
        let budget_m6 = 50.0 * 15.0;
        let mut max_m6 = 0.0f64;
        let mut all_finite = true;
        for row in &agg {
            all_finite &= row.mean_m6.is_finite();
            max_m6 = max_m6.max(row.mean_m6);
        }
        Ok((
            all_finite && max_m6 <= budget_m6,
            format!("max ensemble m6 = {max_m6:.2} (allowed {budget_m6}; N=256, E=1, T=2)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(6, "sixth-moment control", budget, start, passed, detail),
        Err(e) => finish(6, "sixth-moment control", budget, start, false, e.to_string()),
    }
}

/// Criterion 7: Current-fluctuation identity: N E|J - Ĵ|² within 3σ of Û - Ĵ(t)².
/// Zero field on the sphere keeps the law stationary, so the target is
/// exactly 1 - Ĵ(t)² = 1 at both probe times.
pub fn criterion_7() -> CriterionOutcome {
    let budget = Duration::from_secs(120);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut worst_z = 0.0f64;
        let mut passed = true;
        for &n in &[256usize, 1024] {
            let config = SimConfig {
                n_particles: n,
                field_strength: 0.0,
                t_final: 1.0,
                sample_times: vec![0.5, 1.0],
                initial_distribution: InitialDistribution::Gaussian {
                    mean: 0.0,
                    variance: 1.0,
                },
                project_to_sphere: Some(true),
                replicas: 400,
                master_seed: 8 + n as u64,
                quenched_init: QuenchedInit::Empirical,
            };
            let result = run_ensemble(
                &config,
                EnsembleMode::Quenched,
                EnsembleOptions {
                    collect_snapshots: true,
                    threads: None,
                },
            )?;
            let EnsembleData::Trajectories(replicas) = &result.data else {
                unreachable!()
            };
            for (k, &t) in config.sample_times.iter().enumerate() {
                let jhat = solve_current(CurrentKind::Quenched, 1.0, 0.0, 0.0, 0.0, t)?;
                let snaps = snapshots_at(&result, k)?;
                let fluct = current_fluctuation(&snaps, jhat)?;
                let per_replica: Vec<f64> = replicas
                    .iter()
                    .map(|r| {
                        let d = r[k].j_value - jhat;
                        n as f64 * d * d
                    })
                    .collect();
                let (_, se) = mean_and_stderr(&per_replica);
                let target = 1.0 - jhat * jhat;
                let z = (fluct - target).abs() / se;
                worst_z = worst_z.max(z);
                passed &= z <= 3.0;
            }
        }
        Ok((
            passed,
            format!("worst |z| = {worst_z:.2} over N in {{256, 1024}}, t in {{0.5, 1}} (allowed 3)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(7, "current fluctuation identity", budget, start, passed, detail),
        Err(e) => finish(7, "current fluctuation identity", budget, start, false, e.to_string()),
    }
}

fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, a: &[f64], b: &[f64], best: &mut f64) {
        if rest.is_empty() {
            let cost: f64 = chosen
                .iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]).abs())
                .sum();
            if cost < *best {
                *best = cost;
            }
            return;
        }
        for k in 0..rest.len() {
            let j = rest.remove(k);
            chosen.push(j);
            permute(rest, chosen, a, b, best);
            chosen.pop();
            rest.insert(k, j);
        }
    }
    let mut best = f64::INFINITY;
    let mut rest: Vec<usize> = (0..b.len()).collect();
    permute(&mut rest, &mut Vec::new(), a, b, &mut best);
    best / a.len() as f64
}

/// Criterion 8: Sorted-matching W1 equals the brute-force optimal assignment on all
/// pairs of samples of size <= 6, 1000 random instances.
pub fn criterion_8() -> CriterionOutcome {
    let budget = Duration::from_secs(5);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let mut rng = crate::rng::RngStreamKey::new(0xACC0_0008, 0, crate::rng::StreamTag::InitialState).rng();
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let n = rng.random_range(1..=6usize);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let w = wasserstein1(
                &EmpiricalMeasure::from_velocities(&a, (0, 0.0))?,
                &EmpiricalMeasure::from_velocities(&b, (1, 0.0))?,
            )?;
            let brute = brute_force_w1(&a, &b);
            worst = worst.max((w - brute).abs());
        }
        Ok((
            worst <= 1e-12,
            format!("max |sorted - assignment| = {worst:.3e} over 1000 instances (allowed 1e-12)"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(8, "exact 1-D Wasserstein", budget, start, passed, detail),
        Err(e) => finish(8, "exact 1-D Wasserstein", budget, start, false, e.to_string()),
    }
}

/// Criterion 9: Coupling bound constants, direct formula evaluation:
/// δ(1,1) = ln((2+2√2)/(1+2√2)) ≈ 0.2320667 and n(1) = 6.
pub fn criterion_9() -> CriterionOutcome {
    let budget = Duration::from_secs(1);
    let start = Instant::now();
    let run = || -> Result<(bool, String)> {
        let b = theorem_bounds(1.0, 1.0, 1.0)?;
        // Frozen oracle value of ln((2 + 2√2)/(1 + 2√2)).
        let expected = 0.232_066_72_f64;
        let passed = (b.delta_t - expected).abs() <= 1e-5 && b.n_of_t == 6;
        Ok((
            passed,
            format!("delta_t = {:.8} (want {expected} +- 1e-5), n = {} (want 6)", b.delta_t, b.n_of_t),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(9, "coupling bound constants", budget, start, passed, detail),
        Err(e) => finish(9, "coupling bound constants", budget, start, false, e.to_string()),
    }
}

/// Criterion 10: CLI determinism: the same subcommand run twice with an identical
/// config and seed produces byte-identical outputs, independent of
/// `--threads`.
pub fn criterion_10(exe: &Path) -> CriterionOutcome {
    let budget = Duration::from_secs(60);
    let start = Instant::now();
    let run = || -> std::result::Result<(bool, String), String> {
        use std::fs;
        use std::process::Command;

        let scratch = std::env::temp_dir().join(format!(
            "thermokac-acceptance-{}-{:x}",
            std::process::id(),
            start.elapsed().as_nanos()
        ));
        fs::create_dir_all(&scratch).map_err(|e| e.to_string())?;
        let config_path = scratch.join("det.conf");
        fs::write(
            &config_path,
            "n_particles=64\nfield_strength=1.0\nt_final=0.5\nsample_times=0.1,0.2,0.3,0.4,0.5\n\
             initial_distribution=gaussian:0:1\nreplicas=8\nmaster_seed=99\n",
        )
        .map_err(|e| e.to_string())?;

        let run_cli = |sub: &str, out: &str, threads: &str| -> std::result::Result<(), String> {
            let out_dir = scratch.join(out);
            let status = Command::new(exe)
                .arg(sub)
                .arg("--config")
                .arg(&config_path)
                .arg("--out")
                .arg(&out_dir)
                .arg("--threads")
                .arg(threads)
                .status()
                .map_err(|e| format!("spawn: {e}"))?;
            if !status.success() {
                return Err(format!("{sub} exited with {status}"));
            }
            Ok(())
        };

        let read = |out: &str, file: &str| -> std::result::Result<Vec<u8>, String> {
            fs::read(scratch.join(out).join(file)).map_err(|e| format!("{out}/{file}: {e}"))
        };

        run_cli("simulate", "sim1", "1")?;
        run_cli("simulate", "sim2", "4")?;
        run_cli("couple", "cpl1", "2")?;
        run_cli("couple", "cpl2", "1")?;

        let same_sim = read("sim1", "trajectory.csv")? == read("sim2", "trajectory.csv")?
            && read("sim1", "manifest.txt")? == read("sim2", "manifest.txt")?;
        let same_cpl = read("cpl1", "coupled.csv")? == read("cpl2", "coupled.csv")?;
        let _ = fs::remove_dir_all(&scratch);
        Ok((
            same_sim && same_cpl,
            format!("simulate identical across threads: {same_sim}, couple identical: {same_cpl}"),
        ))
    };
    match run() {
        Ok((passed, detail)) => finish(10, "byte-identical reruns", budget, start, passed, detail),
        Err(e) => finish(10, "byte-identical reruns", budget, start, false, e),
    }
}

/// Run the whole suite. `exe` is the CLI binary used by the determinism
/// check.
pub fn run_all(exe: &Path) -> Vec<CriterionOutcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(exe),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_on_tiny_case() {
        // {0, 2} vs {1, 1}: both assignments cost 1 per point on average.
        assert_eq!(brute_force_w1(&[0.0, 2.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn fast_criteria_pass() {
        for c in [criterion_8(), criterion_9()] {
            assert!(c.passed, "{}", c.report_line());
        }
    }
}
