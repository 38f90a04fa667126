//! Deterministic inter-collision dynamics.
//!
//! Between jumps every coordinate obeys `dv/dt = E - γ(t) v` with
//! `γ(t) = E J(t)/U`, so each flow segment is one affine map
//! `v <- α v + β` shared by all coordinates. The per-particle current J
//! solves a constant-coefficient Riccati equation:
//!
//! * interacting (flow only):  dJ/dt = E - E J²/U, with U invariant;
//! * quenched (with collision damping):  dJ/dt = E - E J²/Û - 2 J.
//!
//! Both are solved in closed form (tanh for the interacting kind, a Möbius
//! transform of a single exponential for the quenched kind), and α and β
//! are evaluated from the same closed forms. There is no time-stepping
//! anywhere: the only approximations are float rounding.

use crate::error::{Result, SimError};
use crate::state::MasterVector;
use std::f64::consts::LN_2;

/// Which current equation a [`CurrentSolution`] solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentKind {
    /// Collisionless flow segment: thermostat only.
    Interacting,
    /// Mean-field approximation with the -2J collision damping.
    Quenched,
}

/// Relative slack allowed on the |j0| <= sqrt(u_bar) precondition before it
/// is treated as a contract violation rather than rounding.
const CURRENT_BOUND_SLACK: f64 = 1e-9;

/// Precomputed quantities for the quenched closed form with E != 0.
#[derive(Debug, Clone, Copy)]
struct QuenchClosedForm {
    /// Stable fixed point, inside (-sqrt(u), sqrt(u)).
    r_plus: f64,
    /// The other (unphysical) root of the Riccati right-hand side.
    r_minus: f64,
    /// Exponential rate of the Möbius variable: 2 sqrt(1 + E²/Û).
    kappa: f64,
    /// Asymptotic damping rate E r_plus / Û = kappa/2 - 1.
    gamma_inf: f64,
    /// Möbius ratio (j0 - r_plus)/(j0 - r_minus) at t0.
    mobius0: f64,
}

/// Closed-form solution of one current equation from `(j0, t0)`.
#[derive(Debug, Clone, Copy)]
pub struct CurrentSolution {
    pub kind: CurrentKind,
    pub u_bar: f64,
    pub field: f64,
    pub j0: f64,
    pub t0: f64,
    quench: Option<QuenchClosedForm>,
}

impl CurrentSolution {
    pub fn new(kind: CurrentKind, u_bar: f64, field: f64, j0: f64, t0: f64) -> Result<Self> {
        if !u_bar.is_finite() || u_bar <= 0.0 {
            return Err(SimError::contract(format!("u_bar must be positive, got {u_bar}")));
        }
        if !field.is_finite() || !j0.is_finite() || !t0.is_finite() {
            return Err(SimError::contract("field, j0, t0 must be finite"));
        }
        let root_u = u_bar.sqrt();
        if j0.abs() > root_u * (1.0 + CURRENT_BOUND_SLACK) {
            return Err(SimError::contract(format!(
                "|j0| = {} exceeds sqrt(u_bar) = {root_u}",
                j0.abs()
            )));
        }
        let j0 = j0.clamp(-root_u, root_u);
        let quench = if kind == CurrentKind::Quenched && field != 0.0 {
            let z = field * field / u_bar;
            let root = (1.0 + z).sqrt();
            // r_plus in the cancellation-free form E / (root + 1).
            let r_plus = field / (root + 1.0);
            let r_minus = -(u_bar / field) * (root + 1.0);
            let kappa = 2.0 * root;
            let gamma_inf = field * r_plus / u_bar;
            // j0 - r_minus is bounded away from zero: |r_minus| > sqrt(u).
            let mobius0 = (j0 - r_plus) / (j0 - r_minus);
            Some(QuenchClosedForm {
                r_plus,
                r_minus,
                kappa,
                gamma_inf,
                mobius0,
            })
        } else {
            None
        };
        Ok(CurrentSolution {
            kind,
            u_bar,
            field,
            j0,
            t0,
            quench,
        })
    }

    /// J(t) for t >= t0.
    pub fn evaluate(&self, t: f64) -> f64 {
        debug_assert!(t >= self.t0 - 1e-12);
        if t == self.t0 {
            return self.j0;
        }
        let dt = t - self.t0;
        match self.kind {
            CurrentKind::Interacting => {
                if self.field == 0.0 {
                    return self.j0;
                }
                let s = self.u_bar.sqrt();
                let x0 = (self.j0 / s).clamp(-1.0, 1.0);
                if x0.abs() >= 1.0 - 1e-12 {
                    // At a fixed point of dJ/dt = E(1 - J²/U).
                    return self.j0;
                }
                s * (x0.atanh() + self.field * dt / s).tanh()
            }
            CurrentKind::Quenched => match self.quench {
                // E = 0: linear decay dJ/dt = -2J.
                None => self.j0 * (-2.0 * dt).exp(),
                Some(q) => {
                    let m = 1.0 - q.mobius0 * (-q.kappa * dt).exp();
                    q.r_minus + (q.r_plus - q.r_minus) / m
                }
            },
        }
    }

    /// Affine coefficients of the quenched flow over `[s, t]`:
    /// `α = exp(-∫γ)` and `β = E ∫ exp(-∫_τ^t γ) dτ` with `γ = E Ĵ(τ)/Û`,
    /// both in closed form.
    pub fn coefficients(&self, s: f64, t: f64) -> Result<AffineFlowCoefficients> {
        if self.kind != CurrentKind::Quenched {
            return Err(SimError::contract(
                "flow coefficients are defined for the quenched current",
            ));
        }
        if !(s.is_finite() && t.is_finite()) || s < self.t0 - 1e-12 || t < s {
            return Err(SimError::contract(format!(
                "need t0 <= s <= t, got t0 = {}, s = {s}, t = {t}",
                self.t0
            )));
        }
        let delta = t - s;
        let (alpha, beta) = match self.quench {
            None => (1.0, 0.0), // E = 0: the forcing vanishes entirely.
            Some(q) => {
                let es = (-q.kappa * (s - self.t0)).exp();
                let e_delta = (-q.kappa * delta).exp();
                let ms = 1.0 - q.mobius0 * es;
                let mt = 1.0 - q.mobius0 * es * e_delta;
                let egd = (-q.gamma_inf * delta).exp();
                let alpha = egd * ms / mt;
                // β = E/m(t) [ (1 - e^{-γ∞Δ})/γ∞
                //             - R0 e^{-κ(s-t0)} (e^{-κΔ} - e^{-γ∞Δ})/(γ∞ - κ) ]
                let term1 = -(-q.gamma_inf * delta).exp_m1() / q.gamma_inf;
                let term2 = q.mobius0 * es * (e_delta - egd) / (q.gamma_inf - q.kappa);
                (alpha, self.field * (term1 - term2) / mt)
            }
        };
        Ok(AffineFlowCoefficients {
            alpha,
            beta,
            s,
            t,
        })
    }
}

/// Evaluate J(t) for the given current equation; closed form throughout.
pub fn solve_current(
    kind: CurrentKind,
    u_bar: f64,
    field: f64,
    j0: f64,
    t0: f64,
    t: f64,
) -> Result<f64> {
    if t < t0 {
        return Err(SimError::contract(format!("t = {t} before t0 = {t0}")));
    }
    Ok(CurrentSolution::new(kind, u_bar, field, j0, t0)?.evaluate(t))
}

/// One affine flow segment `v <- α v + β` over `[s, t]`, with α > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFlowCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    pub t: f64,
}

impl AffineFlowCoefficients {
    pub fn identity(s: f64, t: f64) -> Self {
        AffineFlowCoefficients {
            alpha: 1.0,
            beta: 0.0,
            s,
            t,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.alpha * x + self.beta
    }

    /// Coefficients of `later ∘ self` over `[self.s, later.t]`.
    pub fn then(&self, later: &AffineFlowCoefficients) -> AffineFlowCoefficients {
        AffineFlowCoefficients {
            alpha: later.alpha * self.alpha,
            beta: later.alpha * self.beta + later.beta,
            s: self.s,
            t: later.t,
        }
    }
}

/// log cosh(y), stable for large |y|.
fn log_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// Affine coefficients of the interacting (thermostatted) flow over a
/// segment of length `dt`, for a state with energy `u` and momentum `j0`.
///
/// With y(τ) = atanh(j0/√U) + E τ/√U we have α = cosh y(0)/cosh y(dt) and
/// β = J(dt) - α j0, which makes the induced map exactly consistent with
/// the current solution and exactly energy-preserving.
pub(crate) fn interacting_coefficients(u: f64, field: f64, j0: f64, dt: f64) -> (f64, f64) {
    if field == 0.0 || dt == 0.0 {
        return (1.0, 0.0);
    }
    let s = u.sqrt();
    let x0 = (j0 / s).clamp(-1.0, 1.0);
    if x0.abs() >= 1.0 - 1e-12 {
        // All coordinates coincide; the flow keeps them at the fixed point.
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        let gamma = field * sign / s;
        let alpha = (-gamma * dt).exp();
        return (alpha, sign * s * (1.0 - alpha));
    }
    let y0 = x0.atanh();
    let y1 = y0 + field * dt / s;
    let alpha = (log_cosh(y0) - log_cosh(y1)).exp();
    let jt = s * y1.tanh();
    (alpha, jt - alpha * j0)
}

/// Advance all N velocities by the exact thermostatted flow for time `dt`.
/// U is invariant along the flow; J follows the interacting current.
pub fn thermostatted_flow(v: &MasterVector, dt: f64, field: f64) -> Result<MasterVector> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(SimError::contract(format!("dt must be >= 0, got {dt}")));
    }
    if !field.is_finite() {
        return Err(SimError::contract("field must be finite"));
    }
    let u = v.energy();
    if field != 0.0 && u <= 0.0 {
        return Err(SimError::Degenerate(
            "thermostatted flow undefined at zero energy under a nonzero field".into(),
        ));
    }
    let (alpha, beta) = interacting_coefficients(u, field, v.momentum(), dt);
    let mut out = v.clone();
    out.apply_affine(alpha, beta);
    Ok(out)
}

/// Affine coefficients of the quenched flow over `[s, t]` for a given
/// current solution.
pub fn quenched_coefficients(
    current: &CurrentSolution,
    s: f64,
    t: f64,
) -> Result<AffineFlowCoefficients> {
    current.coefficients(s, t)
}

/// Apply one affine flow segment to all coordinates.
pub fn quenched_flow(v: &MasterVector, coeffs: &AffineFlowCoefficients) -> MasterVector {
    let mut out = v.clone();
    out.apply_affine(coeffs.alpha, coeffs.beta);
    out
}
