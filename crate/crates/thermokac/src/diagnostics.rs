//! Quantitative chaos measurement: exact 1-D Wasserstein-1 between equal
//! size empirical measures, marginal-factorization defects with jackknife
//! errors, current-fluctuation statistics, coupling bound constants, and
//! log-log scaling-rate fits.

use crate::error::{Result, SimError};
use crate::state::compensated_sum;
use std::fmt;
use std::str::FromStr;

/// Minimum ensemble size accepted by the statistical estimators.
pub const MIN_REPLICAS: usize = 30;

/// A sorted sample of velocities with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    sorted: Vec<f64>,
    /// (replica, time) the sample was taken from.
    pub source: (u32, f64),
}

impl EmpiricalMeasure {
    pub fn from_velocities(samples: &[f64], source: (u32, f64)) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(SimError::contract("empirical measure needs finite samples"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(EmpiricalMeasure { sorted, source })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Exact Wasserstein-1 distance between two equal-size empirical measures
/// on the line: the mean absolute difference of sorted samples.
pub fn wasserstein1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SimError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(SimError::contract("empty empirical measures"));
    }
    let total = compensated_sum(
        a.sorted
            .iter()
            .zip(&b.sorted)
            .map(|(&x, &y)| (x - y).abs()),
    );
    Ok(total / a.len() as f64)
}

/// The fixed, versioned catalog of test functions used in chaos studies.
/// All are bounded or of quadratic growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// v
    Velocity,
    /// v²
    VelocitySquared,
    /// sin v
    Sine,
    /// tanh v
    Tanh,
    /// min(1, v²)
    MinOneVSquared,
}

/// Catalog order is part of the published interface; scaling studies
/// reference functions by these ids.
pub const TEST_FUNCTION_CATALOG: [TestFunction; 5] = [
    TestFunction::Velocity,
    TestFunction::VelocitySquared,
    TestFunction::Sine,
    TestFunction::Tanh,
    TestFunction::MinOneVSquared,
];

impl TestFunction {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            TestFunction::Velocity => v,
            TestFunction::VelocitySquared => v * v,
            TestFunction::Sine => v.sin(),
            TestFunction::Tanh => v.tanh(),
            TestFunction::MinOneVSquared => (v * v).min(1.0),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            TestFunction::Velocity => "v",
            TestFunction::VelocitySquared => "v2",
            TestFunction::Sine => "sin",
            TestFunction::Tanh => "tanh",
            TestFunction::MinOneVSquared => "min1v2",
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TestFunction {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        TEST_FUNCTION_CATALOG
            .iter()
            .copied()
            .find(|f| f.id() == s)
            .ok_or_else(|| {
                SimError::Parse(format!(
                    "unknown test function `{s}`; catalog: v, v2, sin, tanh, min1v2"
                ))
            })
    }
}

/// Per-replica statistics feeding the defect estimator.
struct DefectTerms {
    /// Estimate of E[φ(v_a) ψ(v_b)] over distinct coordinates.
    pair: f64,
    /// Estimate of E[φ(v)].
    phi_mean: f64,
    /// Estimate of E[ψ(v)].
    psi_mean: f64,
}

fn defect_terms(
    snapshot: &[f64],
    phi: TestFunction,
    psi: TestFunction,
    symmetrize: bool,
) -> DefectTerms {
    let n = snapshot.len() as f64;
    if symmetrize {
        // Mean over all ordered pairs (i, j), i != j, in O(N):
        // (Σφ Σψ - Σφψ) / (N(N-1)).
        let sum_phi = compensated_sum(snapshot.iter().map(|&v| phi.eval(v)));
        let sum_psi = compensated_sum(snapshot.iter().map(|&v| psi.eval(v)));
        let sum_both = compensated_sum(snapshot.iter().map(|&v| phi.eval(v) * psi.eval(v)));
        DefectTerms {
            pair: (sum_phi * sum_psi - sum_both) / (n * (n - 1.0)),
            phi_mean: sum_phi / n,
            psi_mean: sum_psi / n,
        }
    } else {
        DefectTerms {
            pair: phi.eval(snapshot[0]) * psi.eval(snapshot[1]),
            phi_mean: phi.eval(snapshot[0]),
            psi_mean: psi.eval(snapshot[1]),
        }
    }
}

/// Estimate the two-coordinate factorization defect
/// `E[φ(v_1) ψ(v_2)] - E[φ(v_1)] E[ψ(v_2)]` across replicas, with a
/// leave-one-replica-out jackknife standard error.
///
/// With `symmetrize` the per-replica pair statistic averages over all
/// ordered coordinate pairs; by exchangeability this changes the estimator,
/// not the estimand, and cuts its variance enormously.
pub fn chaos_defect(
    snapshots: &[Vec<f64>],
    phi: TestFunction,
    psi: TestFunction,
    symmetrize: bool,
) -> Result<(f64, f64)> {
    let r = snapshots.len();
    if r < MIN_REPLICAS {
        return Err(SimError::TooFewReplicas {
            got: r,
            need: MIN_REPLICAS,
        });
    }
    if snapshots.iter().any(|s| s.len() < 2) {
        return Err(SimError::contract("snapshots need at least 2 coordinates"));
    }
    let terms: Vec<DefectTerms> = snapshots
        .iter()
        .map(|s| defect_terms(s, phi, psi, symmetrize))
        .collect();
    let rf = r as f64;
    let sum_pair = compensated_sum(terms.iter().map(|t| t.pair));
    let sum_phi = compensated_sum(terms.iter().map(|t| t.phi_mean));
    let sum_psi = compensated_sum(terms.iter().map(|t| t.psi_mean));
    let estimate = sum_pair / rf - (sum_phi / rf) * (sum_psi / rf);

    // Jackknife over replicas.
    let loo = |total: f64, own: f64| (total - own) / (rf - 1.0);
    let estimates_loo: Vec<f64> = terms
        .iter()
        .map(|t| loo(sum_pair, t.pair) - loo(sum_phi, t.phi_mean) * loo(sum_psi, t.psi_mean))
        .collect();
    let loo_mean = compensated_sum(estimates_loo.iter().copied()) / rf;
    let ss = compensated_sum(
        estimates_loo
            .iter()
            .map(|&x| (x - loo_mean) * (x - loo_mean)),
    );
    let stderr = ((rf - 1.0) / rf * ss).sqrt();
    Ok((estimate, stderr))
}

/// `N * mean over replicas of (J(V(t)) - jhat)²`: the scaled fluctuation of
/// the empirical current around a deterministic value.
pub fn current_fluctuation(snapshots: &[Vec<f64>], jhat: f64) -> Result<f64> {
    let r = snapshots.len();
    if r < MIN_REPLICAS {
        return Err(SimError::TooFewReplicas {
            got: r,
            need: MIN_REPLICAS,
        });
    }
    if snapshots.is_empty() || snapshots[0].is_empty() {
        return Err(SimError::contract("snapshots must be nonempty"));
    }
    let n = snapshots[0].len() as f64;
    let mean_sq = compensated_sum(snapshots.iter().map(|s| {
        let j = compensated_sum(s.iter().copied()) / s.len() as f64;
        (j - jhat) * (j - jhat)
    })) / r as f64;
    Ok(n * mean_sq)
}

/// Constants entering the pathwise coupling estimate: the energy-floor
/// interval length δ, the number of such intervals covering the horizon,
/// the flow-differential rate λ = 4E/√Û, and the exponential envelope
/// exp(8 E T sqrt(2/Û)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub delta_t: f64,
    pub n_of_t: u64,
    pub lambda_rate: f64,
    pub exp_envelope: f64,
    pub u_hat: f64,
    pub field: f64,
    pub horizon: f64,
}

/// Evaluate the coupling bound constants
/// `δ = (√Û/E) log((2 + 2√2)/(1 + 2√2))` and `n(T) = min {n : n ≥ T/δ + 1}`.
pub fn theorem_bounds(u_hat: f64, field: f64, horizon: f64) -> Result<BoundConstants> {
    if !(u_hat.is_finite() && u_hat > 0.0) {
        return Err(SimError::contract(format!("u_hat must be positive, got {u_hat}")));
    }
    if !(field.is_finite() && field > 0.0) {
        return Err(SimError::contract(format!("field must be positive, got {field}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::contract(format!("horizon must be positive, got {horizon}")));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let delta_t = (u_hat.sqrt() / field) * ((2.0 + 2.0 * sqrt2) / (1.0 + 2.0 * sqrt2)).ln();
    let n_of_t = (horizon / delta_t + 1.0).ceil() as u64;
    let lambda_rate = 4.0 * field / u_hat.sqrt();
    let exp_envelope = (8.0 * field * horizon * (2.0 / u_hat).sqrt()).exp();
    Ok(BoundConstants {
        delta_t,
        n_of_t,
        lambda_rate,
        exp_envelope,
        u_hat,
        field,
        horizon,
    })
}

/// One row of a scaling study.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n_particles: usize,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub replicas: u32,
}

/// Rows of (N, metric, mean, stderr, replicas) feeding log-log rate fits.
/// N must be strictly increasing within each metric and stderr nonnegative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalingTable {
    rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn new() -> Self {
        ScalingTable::default()
    }

    pub fn push(&mut self, row: ScalingRow) -> Result<()> {
        if !(row.mean.is_finite() && row.stderr.is_finite()) || row.stderr < 0.0 {
            return Err(SimError::contract("scaling rows need finite mean and stderr >= 0"));
        }
        if let Some(last) = self.rows.iter().rev().find(|r| r.metric == row.metric) {
            if row.n_particles <= last.n_particles {
                return Err(SimError::contract(format!(
                    "N must be strictly increasing within metric `{}`",
                    row.metric
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ScalingRow] {
        &self.rows
    }
}

/// A fitted power law `mean ~ C N^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of log(mean) against log(N) for one metric.
/// Requires at least 3 distinct N values, each row with positive mean and
/// stderr < mean/3.
pub fn fit_rate(table: &ScalingTable, metric: &str) -> Result<RateFit> {
    let rows: Vec<&ScalingRow> = table.rows.iter().filter(|r| r.metric == metric).collect();
    if rows.is_empty() {
        return Err(SimError::Fit(format!("no rows for metric `{metric}`")));
    }
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n_particles).collect();
    ns.dedup();
    if ns.len() < 3 {
        return Err(SimError::Fit(format!(
            "need >= 3 distinct N values, got {}",
            ns.len()
        )));
    }
    for r in &rows {
        if r.mean <= 0.0 {
            return Err(SimError::Fit(format!(
                "nonpositive mean {} at N = {}",
                r.mean, r.n_particles
            )));
        }
        if r.stderr >= r.mean / 3.0 {
            return Err(SimError::Fit(format!(
                "stderr {} is not below mean/3 = {} at N = {}",
                r.stderr,
                r.mean / 3.0,
                r.n_particles
            )));
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n_particles as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|&x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|&y| (y - ym) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}
