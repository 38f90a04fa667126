//! Reference numerics used to validate the closed-form flows: an adaptive
//! Dormand-Prince 5(4) integrator and an adaptive Simpson quadrature.
//!
//! These deliberately know nothing about the closed forms in [`crate::flow`];
//! they integrate the raw differential equations, so agreement between the
//! two is a real check and not a tautology.

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` with adaptive
/// Dormand-Prince 5(4) steps, returning y(t1).
///
/// Panics on inconsistent inputs (`t1 < t0`); this is validation tooling,
/// not a production surface.
pub fn integrate_rk45<F>(f: F, t0: f64, t1: f64, y0: &[f64], rtol: f64, atol: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    assert!(t1 >= t0, "integration interval reversed");
    let dim = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return y;
    }
    let mut t = t0;
    let mut h = ((t1 - t0) / 100.0).clamp(1e-12, 0.1);

    // Dormand-Prince coefficients.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // 5th-order weights equal A[5]; embedded 4th-order weights below.
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    f(t, &y, &mut k[0]);

    let mut steps = 0usize;
    while t < t1 {
        if t1 - t < 1e-14 * t1.abs().max(1.0) {
            break;
        }
        if t + h > t1 {
            h = t1 - t;
        }
        for stage in 0..6 {
            for d in 0..dim {
                let mut acc = 0.0;
                for (prev, a) in A[stage].iter().enumerate().take(stage + 1) {
                    acc += a * k[prev][d];
                }
                y_stage[d] = y[d] + h * acc;
            }
            f(t + C[stage] * h, &y_stage, &mut k[stage + 1]);
        }
        // 5th-order solution is the last stage state (FSAL), error from the
        // difference against the embedded 4th-order weights.
        let mut err = 0.0f64;
        for d in 0..dim {
            let y5 = y[d]
                + h * (A[5][0] * k[0][d]
                    + A[5][2] * k[2][d]
                    + A[5][3] * k[3][d]
                    + A[5][4] * k[4][d]
                    + A[5][5] * k[5][d]);
            let mut y4 = y[d];
            for (stage, b) in B4.iter().enumerate() {
                y4 += h * b * k[stage][d];
            }
            let scale = atol + rtol * y[d].abs().max(y5.abs());
            let e = (y5 - y4) / scale;
            err += e * e;
            y_stage[d] = y5;
        }
        let err = (err / dim as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_stage);
            // FSAL: the last stage derivative seeds the next step.
            k.swap(0, 6);
            steps += 1;
            assert!(steps < 2_000_000, "integrator stalled");
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).max(1e-14);
    }
    y
}

/// Adaptive Simpson quadrature of `g` over `[a, b]` to absolute tolerance.
pub fn quadrature<G>(g: G, a: f64, b: f64, tol: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    fn simpson<G: Fn(f64) -> f64>(g: &G, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = g(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<G: Fn(f64) -> f64>(
        g: &G,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(g, a, fa, m, fm);
        let (right, rm, frm) = simpson(g, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(g, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(g, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (g(a), g(b));
    let (whole, m, fm) = simpson(&g, a, fa, b, fb);
    recurse(&g, a, fa, b, fb, whole, m, fm, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_linear_decay() {
        // y' = -2y from 1: y(t) = e^{-2t}.
        let y = integrate_rk45(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, 1.5, &[1.0], 1e-11, 1e-13);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn integrates_logistic_current() {
        // dJ/dt = E(1 - J²/U): closed form sqrt(U) tanh(E t / sqrt(U)).
        let (e, u) = (1.7, 2.3);
        let y = integrate_rk45(
            |_, y, dy| dy[0] = e * (1.0 - y[0] * y[0] / u),
            0.0,
            2.0,
            &[0.0],
            1e-11,
            1e-13,
        );
        let expected = u.sqrt() * (e * 2.0 / u.sqrt()).tanh();
        assert!((y[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn quadrature_matches_analytic_integral() {
        let got = quadrature(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((got - (1.0f64.exp() - 1.0)).abs() < 1e-11);
        let got = quadrature(|x| (3.0 * x).sin(), 0.0, 2.0, 1e-12);
        assert!((got - (1.0 - (6.0f64).cos()) / 3.0).abs() < 1e-11);
    }
}
