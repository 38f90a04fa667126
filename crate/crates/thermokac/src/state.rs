//! Particle state: the master vector of N velocities with running
//! momentum/energy accumulators, and the initial-condition samplers.

use crate::config::{InitialDistribution, SimConfig};
use crate::error::{Result, SimError};
use crate::rng::{RngStreamKey, StreamTag};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Cached sums are rebuilt from scratch this often to bound float drift.
pub const CACHE_REFRESH_INTERVAL: u32 = 1 << 16;

/// Attempts before an all-zero draw under projection is treated as a
/// configuration error rather than bad luck.
const MAX_RESAMPLE_ATTEMPTS: u32 = 64;

/// Compensated (Neumaier) summation; keeps cache rebuilds and moment sums
/// accurate at large N.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// The N velocities of one replica plus running Σv and Σv² accumulators.
///
/// The accumulators are updated in O(1) on each flow segment or collision
/// and rebuilt from the coordinates every [`CACHE_REFRESH_INTERVAL`] events.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterVector {
    velocities: Vec<f64>,
    cached_sum: f64,
    cached_sum_sq: f64,
    events_since_refresh: u32,
}

impl MasterVector {
    pub fn from_velocities(velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() < 2 {
            return Err(SimError::contract("a master vector needs at least 2 coordinates"));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(SimError::contract("velocities must be finite"));
        }
        let mut mv = MasterVector {
            velocities,
            cached_sum: 0.0,
            cached_sum_sq: 0.0,
            events_since_refresh: 0,
        };
        mv.refresh_caches();
        Ok(mv)
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// Average momentum per particle, J = (1/N) Σ v_i, from the cache.
    pub fn momentum(&self) -> f64 {
        self.cached_sum / self.len() as f64
    }

    /// Average energy per particle, U = (1/N) Σ v_i², from the cache.
    pub fn energy(&self) -> f64 {
        self.cached_sum_sq / self.len() as f64
    }

    /// (1/N) Σ v_i^p for p in {2, 4, 6}, computed fresh from coordinates.
    pub fn moment(&self, p: u32) -> Result<f64> {
        if !matches!(p, 2 | 4 | 6) {
            return Err(SimError::contract(format!("moment order {p} not in {{2, 4, 6}}")));
        }
        let total = compensated_sum(self.velocities.iter().map(|&v| v.powi(p as i32)));
        Ok(total / self.len() as f64)
    }

    pub fn cached_sum(&self) -> f64 {
        self.cached_sum
    }

    pub fn cached_sum_sq(&self) -> f64 {
        self.cached_sum_sq
    }

    /// Rebuild both accumulators from the coordinates.
    pub fn refresh_caches(&mut self) {
        self.cached_sum = compensated_sum(self.velocities.iter().copied());
        self.cached_sum_sq = compensated_sum(self.velocities.iter().map(|&v| v * v));
        self.events_since_refresh = 0;
    }

    /// Count one event against the refresh interval.
    pub(crate) fn note_event(&mut self) {
        self.events_since_refresh += 1;
        if self.events_since_refresh >= CACHE_REFRESH_INTERVAL {
            self.refresh_caches();
        }
    }

    /// Replace the pair (i, j) and shift the Σv cache by the pair delta.
    /// Σv² is left untouched: a rotation preserves it identically.
    pub(crate) fn set_pair_after_rotation(&mut self, i: usize, j: usize, vi: f64, vj: f64) {
        let old = self.velocities[i] + self.velocities[j];
        self.velocities[i] = vi;
        self.velocities[j] = vj;
        self.cached_sum += (vi + vj) - old;
        self.note_event();
    }

    /// Apply `v_i <- alpha v_i + beta` to all coordinates, updating both
    /// caches in O(1) before the O(N) sweep.
    pub(crate) fn apply_affine(&mut self, alpha: f64, beta: f64) {
        let n = self.len() as f64;
        let old_sum = self.cached_sum;
        self.cached_sum = alpha * old_sum + n * beta;
        self.cached_sum_sq =
            alpha * alpha * self.cached_sum_sq + 2.0 * alpha * beta * old_sum + n * beta * beta;
        for v in &mut self.velocities {
            *v = alpha * *v + beta;
        }
        self.note_event();
    }
}

fn draw(dist: &InitialDistribution, rng: &mut impl Rng) -> f64 {
    match *dist {
        InitialDistribution::Gaussian { mean, variance } => {
            // Normal::new only fails on a negative standard deviation.
            let normal = Normal::new(mean, variance.sqrt()).expect("validated variance");
            normal.sample(rng)
        }
        InitialDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        InitialDistribution::TwoPoint { a, b, prob_a } => {
            if rng.random::<f64>() < prob_a {
                a
            } else {
                b
            }
        }
    }
}

/// Draw N i.i.d. velocities and, for the sphere-constrained process, rescale
/// so that Σ v_i² = N exactly (up to rounding), i.e. U(V) = 1.
///
/// The rescaling is what pins the initial energy; it perturbs each
/// coordinate by O(1/N) relative to the raw draw.
pub fn sample_initial_state(config: &SimConfig, key: RngStreamKey) -> Result<MasterVector> {
    if key.stream_tag != StreamTag::InitialState {
        return Err(SimError::contract("initial-state sampling needs the initial_state stream"));
    }
    let n = config.n_particles;
    let project = config.project_to_sphere.unwrap_or(true);
    let mut rng = key.rng();
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let velocities: Vec<f64> = (0..n)
            .map(|_| draw(&config.initial_distribution, &mut rng))
            .collect();
        if !project {
            return MasterVector::from_velocities(velocities);
        }
        let sum_sq = compensated_sum(velocities.iter().map(|&v| v * v));
        if sum_sq > 0.0 {
            let scale = (n as f64 / sum_sq).sqrt();
            let scaled: Vec<f64> = velocities.iter().map(|&v| v * scale).collect();
            return MasterVector::from_velocities(scaled);
        }
        // All-zero draw: probability zero for continuous families, so this
        // loop only spins for degenerate point masses at zero.
    }
    Err(SimError::Degenerate(
        "initial distribution is concentrated at zero; cannot project to the energy sphere".into(),
    ))
}

/// Convenience: sample the initial state for a given replica.
pub fn sample_replica_state(config: &SimConfig, replica_index: u32) -> Result<MasterVector> {
    sample_initial_state(
        config,
        RngStreamKey::new(config.master_seed, replica_index, StreamTag::InitialState),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config_with(dist: InitialDistribution, n: usize, project: bool) -> SimConfig {
        SimConfig {
            n_particles: n,
            initial_distribution: dist,
            project_to_sphere: Some(project),
            ..SimConfig::default()
        }
    }

    #[test]
    fn momentum_and_energy_examples() {
        let v = MasterVector::from_velocities(vec![1.0, -1.0]).unwrap();
        assert_eq!(v.momentum(), 0.0);
        assert_eq!(v.energy(), 1.0);
        let v = MasterVector::from_velocities(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.momentum(), 3.5);
        assert_eq!(v.energy(), 12.5);
        let c = MasterVector::from_velocities(vec![2.5; 5]).unwrap();
        assert!((c.momentum() - 2.5).abs() < 1e-15);
        let z = MasterVector::from_velocities(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(z.energy(), 0.0);
    }

    #[test]
    fn moment_examples() {
        let v = MasterVector::from_velocities(vec![1.0, -1.0]).unwrap();
        assert_eq!(v.moment(6).unwrap(), 1.0);
        let v = MasterVector::from_velocities(vec![2.0, 2.0]).unwrap();
        assert_eq!(v.moment(4).unwrap(), 16.0);
        let v = MasterVector::from_velocities(vec![1.0, 2.0, 3.0]).unwrap();
        assert!((v.moment(2).unwrap() - 14.0 / 3.0).abs() < 1e-15);
        assert!(v.moment(3).is_err());
        assert!(v.moment(8).is_err());
    }

    #[test]
    fn projection_pins_energy() {
        let c = config_with(
            InitialDistribution::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            4,
            true,
        );
        let v = sample_replica_state(&c, 0).unwrap();
        let sum_sq: f64 = v.velocities().iter().map(|&x| x * x).sum();
        assert!((sum_sq - 4.0).abs() / 4.0 < 1e-12);
        assert!((v.energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_two_point_is_projection_identity() {
        let c = config_with(
            InitialDistribution::TwoPoint {
                a: 1.0,
                b: 1.0,
                prob_a: 0.5,
            },
            16,
            true,
        );
        let v = sample_replica_state(&c, 0).unwrap();
        for &x in v.velocities() {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_draw_with_projection_is_config_error() {
        let c = config_with(
            InitialDistribution::TwoPoint {
                a: 0.0,
                b: 0.0,
                prob_a: 0.5,
            },
            8,
            true,
        );
        assert!(matches!(
            sample_replica_state(&c, 0),
            Err(SimError::Degenerate(_))
        ));
        // Without projection the zero state is a valid (if dull) start.
        let c = config_with(
            InitialDistribution::TwoPoint {
                a: 0.0,
                b: 0.0,
                prob_a: 0.5,
            },
            8,
            false,
        );
        assert_eq!(sample_replica_state(&c, 0).unwrap().energy(), 0.0);
    }

    #[test]
    fn gaussian_sixth_moment_matches_analytic_value() {
        // Oracle: for a standard normal, E v^6 = 5*3*1 = 15 and
        // Var(v^6) = E v^12 - 225 = 10395 - 225, so the standard error of the
        // sample mean over 10^4 draws is sqrt(10170/10^4) ~ 1.008.
        let c = config_with(
            InitialDistribution::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            10_000,
            false,
        );
        let v = sample_replica_state(&c, 1).unwrap();
        let m6 = v.moment(6).unwrap();
        let se = (10170.0f64 / 10_000.0).sqrt();
        assert!(
            (m6 - 15.0).abs() < 3.0 * se,
            "m6 = {m6} outside 15 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn sampling_is_pure_in_config_and_key() {
        let c = config_with(
            InitialDistribution::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            256,
            true,
        );
        let a = sample_replica_state(&c, 5).unwrap();
        let b = sample_replica_state(&c, 5).unwrap();
        assert_eq!(a.velocities(), b.velocities());
        let other = sample_replica_state(&c, 6).unwrap();
        assert_ne!(a.velocities(), other.velocities());
    }

    #[test]
    fn wrong_stream_tag_rejected() {
        let c = config_with(
            InitialDistribution::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            8,
            false,
        );
        let key = RngStreamKey::new(c.master_seed, 0, StreamTag::CollisionHistory);
        assert!(sample_initial_state(&c, key).is_err());
    }

    #[test]
    fn caches_stay_within_tolerance_across_refresh_interval() {
        // Drive more events than the refresh interval through the
        // incremental cache updates; the periodic rebuild keeps them within
        // 1e-9 of a fresh recomputation throughout.
        let mut v = MasterVector::from_velocities(vec![0.3, -1.0, 2.0, 0.7]).unwrap();
        let up = 1.0 + 1e-5;
        for k in 0..(CACHE_REFRESH_INTERVAL + 1000) {
            if k % 2 == 0 {
                v.apply_affine(up, 1e-5);
            } else {
                v.apply_affine(1.0 / up, -1e-5 / up);
            }
            if k % 7 == 0 {
                let (a, b) = (v.velocities()[1], v.velocities()[3]);
                let (c, s) = (0.6f64.cos(), 0.6f64.sin());
                v.set_pair_after_rotation(1, 3, a * c + b * s, b * c - a * s);
            }
        }
        let sum = compensated_sum(v.velocities().iter().copied());
        let sum_sq = compensated_sum(v.velocities().iter().map(|&x| x * x));
        assert!((v.cached_sum() - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        assert!((v.cached_sum_sq() - sum_sq).abs() <= 1e-9 * sum_sq.max(1.0));
    }

    proptest! {
        // Cauchy-Schwarz: momentum(V)^2 <= energy(V).
        #[test]
        fn momentum_squared_bounded_by_energy(vs in proptest::collection::vec(-100.0f64..100.0, 2..64)) {
            let v = MasterVector::from_velocities(vs).unwrap();
            prop_assert!(v.momentum().powi(2) <= v.energy() * (1.0 + 1e-12) + 1e-300);
        }

        // The caches must track a fresh recomputation.
        #[test]
        fn caches_agree_with_recomputation(vs in proptest::collection::vec(-10.0f64..10.0, 2..64)) {
            let v = MasterVector::from_velocities(vs.clone()).unwrap();
            let sum: f64 = compensated_sum(vs.iter().copied());
            let sum_sq: f64 = compensated_sum(vs.iter().map(|&x| x * x));
            prop_assert!((v.cached_sum() - sum).abs() <= 1e-9 * sum.abs().max(1.0));
            prop_assert!((v.cached_sum_sq() - sum_sq).abs() <= 1e-9 * sum_sq.max(1.0));
        }
    }
}
