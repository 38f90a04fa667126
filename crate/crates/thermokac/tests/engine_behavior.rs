//! Ensemble-level statistical behavior of the event loop: stationary
//! fluctuation laws on the energy sphere, conservation of the quenched mean
//! energy, equilibrium moments of the collision walk, and defect estimators
//! on simulated (not synthetic) snapshots.

use thermokac::config::QuenchedInit;
use thermokac::diagnostics::{chaos_defect, current_fluctuation, TestFunction};
use thermokac::engine::{
    aggregate_trajectories, mean_and_stderr, run_ensemble, snapshots_at, EnsembleData,
    EnsembleMode, EnsembleOptions,
};
use thermokac::{InitialDistribution, SimConfig};

fn gaussian_config(n: usize, replicas: u32, seed: u64) -> SimConfig {
    SimConfig {
        n_particles: n,
        field_strength: 0.0,
        t_final: 1.0,
        sample_times: vec![1.0],
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

#[test]
fn current_variance_on_sphere_scales_like_one_over_n() {
    // Projected Gaussian data is uniform on the energy sphere, which is
    // stationary for the zero-field walk, so N Var(J(t)) = 1 exactly in
    // law; the sample variance over R = 400 replicas has sd ~ sqrt(2/R).
    let config = gaussian_config(64, 400, 101);
    let result = run_ensemble(&config, EnsembleMode::Interacting, EnsembleOptions::default()).unwrap();
    let EnsembleData::Trajectories(replicas) = &result.data else {
        panic!()
    };
    let js: Vec<f64> = replicas.iter().map(|r| r[0].j_value).collect();
    let (mean, _) = mean_and_stderr(&js);
    let var: f64 = js.iter().map(|j| (j - mean) * (j - mean)).sum::<f64>() / (js.len() - 1) as f64;
    let scaled = 64.0 * var;
    let tol = 3.0 * (2.0f64 / 400.0).sqrt();
    assert!((scaled - 1.0).abs() < tol, "N Var(J) = {scaled}");
}

#[test]
fn zero_field_walk_equilibrates_fourth_moment() {
    // Long-run m4 of the collision walk on the sphere; the sphere-uniform
    // marginal has m4 = 3N/(N+2), within 0.1 of the Gaussian value 3.
    let mut config = gaussian_config(1024, 200, 202);
    config.t_final = 10.0;
    config.sample_times = vec![10.0];
    let result = run_ensemble(&config, EnsembleMode::Interacting, EnsembleOptions::default()).unwrap();
    let EnsembleData::Trajectories(replicas) = &result.data else {
        panic!()
    };
    let agg = aggregate_trajectories(replicas);
    let m4 = agg[0].mean_m4;
    let exact = 3.0 * 1024.0 / 1026.0;
    assert!((m4 - 3.0).abs() <= 0.1, "m4 = {m4}");
    assert!((m4 - exact).abs() <= 3.0 * agg[0].se_m4, "m4 = {m4} vs sphere value {exact}");
}

#[test]
fn quenched_mean_energy_is_conserved() {
    // Pathwise U(V̂) fluctuates, but its ensemble mean must stay at Û.
    let mut config = gaussian_config(128, 100, 303);
    config.field_strength = 1.0;
    config.t_final = 2.0;
    config.sample_times = vec![0.5, 1.0, 2.0];
    let result = run_ensemble(&config, EnsembleMode::Quenched, EnsembleOptions::default()).unwrap();
    let EnsembleData::Trajectories(replicas) = &result.data else {
        panic!()
    };
    // Pathwise non-conservation: some replica departs from U = 1 by far
    // more than the energy-drift tolerance of the interacting process.
    let max_departure = replicas
        .iter()
        .flat_map(|r| r.iter())
        .map(|s| (s.u_value - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(max_departure > 1e-4, "quenched energy unexpectedly pinned");
    for row in aggregate_trajectories(replicas) {
        assert!(
            (row.mean_u - 1.0).abs() <= 3.0 * row.se_u,
            "t = {}: mean U = {} +- {}",
            row.time,
            row.mean_u,
            row.se_u
        );
    }
}

#[test]
fn current_fluctuation_tracks_decaying_mean() {
    // Two-point +-1 data with P(+1) = 3/4: U(V0) = 1 exactly per replica
    // and the mean current decays as 0.5 e^{-2t} under the zero-field
    // walk. The scaled fluctuation converges to 1 - Ĵ(t)².
    let config = SimConfig {
        n_particles: 512,
        field_strength: 0.0,
        t_final: 1.0,
        sample_times: vec![0.5, 1.0],
        initial_distribution: InitialDistribution::TwoPoint {
            a: 1.0,
            b: -1.0,
            prob_a: 0.75,
        },
        project_to_sphere: Some(false),
        replicas: 400,
        master_seed: 404,
        quenched_init: QuenchedInit::Empirical,
    };
    let result = run_ensemble(
        &config,
        EnsembleMode::Quenched,
        EnsembleOptions {
            collect_snapshots: true,
            threads: None,
        },
    )
    .unwrap();
    let EnsembleData::Trajectories(replicas) = &result.data else {
        panic!()
    };
    for (k, &t) in config.sample_times.iter().enumerate() {
        let jhat = 0.5 * (-2.0 * t).exp();
        let snaps = snapshots_at(&result, k).unwrap();
        let fluct = current_fluctuation(&snaps, jhat).unwrap();
        let per_replica: Vec<f64> = replicas
            .iter()
            .map(|r| {
                let d = r[k].j_value - jhat;
                512.0 * d * d
            })
            .collect();
        let (_, se) = mean_and_stderr(&per_replica);
        let target = 1.0 - jhat * jhat;
        assert!(
            (fluct - target).abs() <= 3.0 * se,
            "t = {t}: fluctuation {fluct} vs {target} +- {se}"
        );
    }
}

#[test]
fn shuffling_replicas_destroys_the_defect() {
    // Swap the second coordinate across replicas: within-replica
    // correlation disappears and the defect estimate must be consistent
    // with zero.
    let mut config = gaussian_config(64, 200, 505);
    config.field_strength = 1.0;
    config.t_final = 0.5;
    config.sample_times = vec![0.5];
    let result = run_ensemble(
        &config,
        EnsembleMode::Quenched,
        EnsembleOptions {
            collect_snapshots: true,
            threads: None,
        },
    )
    .unwrap();
    let snaps = snapshots_at(&result, 0).unwrap();
    let r = snaps.len();
    let shuffled: Vec<Vec<f64>> = (0..r)
        .map(|i| vec![snaps[i][0], snaps[(i + 1) % r][1]])
        .collect();
    let (est, se) = chaos_defect(
        &shuffled,
        TestFunction::Velocity,
        TestFunction::Velocity,
        false,
    )
    .unwrap();
    assert!(est.abs() <= 3.0 * se, "defect {est} +- {se}");
}

#[test]
fn quenched_init_switch_changes_the_reference_current() {
    // Distributional seeding uses the family mean instead of the realized
    // J(V0); with a biased family the two settings drive the flow with
    // different currents, so trajectories differ.
    let mut config = gaussian_config(32, 1, 606);
    config.field_strength = 1.0;
    config.initial_distribution = InitialDistribution::Gaussian {
        mean: 0.7,
        variance: 1.0,
    };
    config.sample_times = vec![0.5, 1.0];
    let empirical = thermokac::simulate(&config, thermokac::Process::Quenched, 0, false).unwrap();
    config.quenched_init = QuenchedInit::Distributional;
    let distributional =
        thermokac::simulate(&config, thermokac::Process::Quenched, 0, false).unwrap();
    assert_ne!(empirical, distributional);
}
