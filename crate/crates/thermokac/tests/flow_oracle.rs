//! Cross-validation of every closed form in the flow module against the
//! reference integrator and quadrature, over parameter grids that include
//! the degenerate corners (zero field, fixed points, long horizons).

use thermokac::flow::{quenched_coefficients, solve_current, thermostatted_flow, CurrentKind, CurrentSolution};
use thermokac::oracle::{integrate_rk45, quadrature};
use thermokac::MasterVector;

fn param_grid() -> Vec<(f64, f64, f64)> {
    // (u_bar, field, j0 as fraction of sqrt(u_bar))
    let mut grid = Vec::new();
    for &u in &[0.25, 1.0, 3.7] {
        for &e in &[0.0, 0.3, 1.0, 2.5] {
            for &x in &[-0.999, -0.5, 0.0, 0.41421356, 0.9, 0.999] {
                grid.push((u, e, x * f64::sqrt(u)));
            }
        }
    }
    grid
}

#[test]
fn quenched_current_matches_integrator() {
    for (u, e, j0) in param_grid() {
        for &t in &[0.01, 0.4, 2.0, 9.0] {
            let closed = solve_current(CurrentKind::Quenched, u, e, j0, 0.0, t).unwrap();
            let reference = integrate_rk45(
                |_, y, dy| dy[0] = e - e * y[0] * y[0] / u - 2.0 * y[0],
                0.0,
                t,
                &[j0],
                1e-12,
                1e-14,
            )[0];
            assert!(
                (closed - reference).abs() <= 1e-9,
                "u={u} e={e} j0={j0} t={t}: {closed} vs {reference}"
            );
        }
    }
}

#[test]
fn interacting_current_matches_integrator() {
    for (u, e, j0) in param_grid() {
        for &t in &[0.01, 0.4, 2.0] {
            let closed = solve_current(CurrentKind::Interacting, u, e, j0, 0.0, t).unwrap();
            let reference = integrate_rk45(
                |_, y, dy| dy[0] = e * (1.0 - y[0] * y[0] / u),
                0.0,
                t,
                &[j0],
                1e-12,
                1e-14,
            )[0];
            assert!(
                (closed - reference).abs() <= 1e-9,
                "u={u} e={e} j0={j0} t={t}: {closed} vs {reference}"
            );
        }
    }
}

#[test]
fn quenched_alpha_matches_quadrature_of_gamma() {
    // α over [s, t] is exp(-∫ γ) with γ(τ) = E Ĵ(τ)/Û; integrate γ through
    // the current closed form with adaptive Simpson and compare.
    for (u, e, j0) in param_grid() {
        let current = CurrentSolution::new(CurrentKind::Quenched, u, e, j0, 0.0).unwrap();
        for &(s, t) in &[(0.0, 0.7), (0.3, 0.31), (1.2, 4.0)] {
            let coeffs = quenched_coefficients(&current, s, t).unwrap();
            let integral = quadrature(|tau| e * current.evaluate(tau) / u, s, t, 1e-13);
            let alpha_ref = (-integral).exp();
            assert!(
                (coeffs.alpha - alpha_ref).abs() <= 1e-10 * alpha_ref.max(1.0),
                "u={u} e={e} j0={j0} [{s},{t}]: alpha {} vs {alpha_ref}",
                coeffs.alpha
            );
        }
    }
}

#[test]
fn quenched_beta_matches_nested_quadrature() {
    // β over [s, t] is E ∫_s^t exp(-∫_τ^t γ) dτ.
    for &(u, e, x) in &[
        (1.0, 1.0, 0.0),
        (1.0, 1.0, 0.41421356),
        (0.25, 2.5, -0.9),
        (3.7, 0.3, 0.6),
        (1.0, 0.0, 0.8),
    ] {
        let j0 = x * f64::sqrt(u);
        let current = CurrentSolution::new(CurrentKind::Quenched, u, e, j0, 0.0).unwrap();
        for &(s, t) in &[(0.0, 1.0), (0.5, 2.0)] {
            let coeffs = quenched_coefficients(&current, s, t).unwrap();
            let beta_ref = e * quadrature(
                |tau| {
                    let inner = quadrature(|x| e * current.evaluate(x) / u, tau, t, 1e-13);
                    (-inner).exp()
                },
                s,
                t,
                1e-11,
            );
            assert!(
                (coeffs.beta - beta_ref).abs() <= 1e-9,
                "u={u} e={e} j0={j0} [{s},{t}]: beta {} vs {beta_ref}",
                coeffs.beta
            );
        }
    }
}

#[test]
fn quenched_flow_segments_match_joint_integration() {
    // Apply coefficients over [0, t] to a small state and compare against
    // integrating the coordinates jointly with the current.
    let velocities = vec![1.0, -0.5, 0.25, 2.0, -1.5];
    for &(u, e, x) in &[(1.0, 1.0, 0.1), (0.5, 2.0, -0.8), (2.0, 0.7, 0.9)] {
        let j0 = x * f64::sqrt(u);
        let current = CurrentSolution::new(CurrentKind::Quenched, u, e, j0, 0.0).unwrap();
        for &t in &[0.3, 1.7] {
            let coeffs = quenched_coefficients(&current, 0.0, t).unwrap();
            let mut y0 = velocities.clone();
            y0.push(j0);
            let reference = integrate_rk45(
                |_, y, dy| {
                    let m = y.len() - 1;
                    let jhat = y[m];
                    for i in 0..m {
                        dy[i] = e - e * jhat / u * y[i];
                    }
                    dy[m] = e - e * jhat * jhat / u - 2.0 * jhat;
                },
                0.0,
                t,
                &y0,
                1e-12,
                1e-14,
            );
            for (i, &v) in velocities.iter().enumerate() {
                assert!(
                    (coeffs.apply(v) - reference[i]).abs() <= 1e-9,
                    "u={u} e={e} t={t} coord {i}"
                );
            }
        }
    }
}

#[test]
fn thermostatted_flow_matches_integrator_per_component() {
    let cases: Vec<(Vec<f64>, f64, f64)> = vec![
        (vec![1.0, -1.0], 1.0, 0.1),
        (vec![1.0, -1.0], 1.0, 1.3),
        (vec![0.3, 0.4, -2.0, 1.1], 2.0, 0.6),
        (vec![6.0, -0.1, 0.2], 0.5, 0.9),
        (vec![1.0, 1.0, 1.0, 1.0, -3.0], 1.7, 0.4),
    ];
    for (velocities, field, dt) in cases {
        let v0 = MasterVector::from_velocities(velocities.clone()).unwrap();
        let flowed = thermostatted_flow(&v0, dt, field).unwrap();
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
            assert!(
                (a - b).abs() <= 1e-9,
                "field={field} dt={dt}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn quenched_zero_field_example_value() {
    // Linear decay: 0.8 e^{-2} after one unit of time.
    let j = solve_current(CurrentKind::Quenched, 1.0, 0.0, 0.8, 0.0, 1.0).unwrap();
    assert!((j - 0.10826822658929017).abs() < 1e-15);
}
