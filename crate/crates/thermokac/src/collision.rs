//! The jump part of the dynamics: exponential collision clocks, uniform
//! pair selection, uniform rotation angles, and the energy-preserving pair
//! rotation.
//!
//! The pair generator assigns rate 2/(N-1) to each of the N(N-1)/2 unordered
//! pairs, so the total jump rate is N and the mean inter-collision time is
//! 1/N. Waiting times, pairs and angles are drawn in the fixed order
//! (time, pair, angle) for reproducibility.

use crate::error::{Result, SimError};
use crate::rng::{RngStreamKey, StreamTag};
use crate::state::MasterVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

/// One collision: jump time, colliding pair (i < j), rotation angle in
/// (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub pair: (usize, usize),
    pub angle: f64,
}

/// Law of the rotation angle. Only the flat law ships; any bounded density
/// would slot in here via rejection sampling against the flat envelope
/// without touching the rest of the event machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum AngleLaw {
    /// Uniform on (-pi, pi].
    #[default]
    Uniform,
}

/// A lazily generated, replayable stream of collision events for one
/// replica. Replaying from the same key reproduces identical events, which
/// is what lets two coupled processes consume the same randomness.
#[derive(Debug, Clone)]
pub struct CollisionHistory {
    rng: ChaCha12Rng,
    n: usize,
    /// Total jump rate; equals N for the pair generator used here.
    rate: f64,
    angle_law: AngleLaw,
}

impl CollisionHistory {
    pub fn new(key: RngStreamKey, n: usize) -> Result<Self> {
        CollisionHistory::with_angle_law(key, n, AngleLaw::Uniform)
    }

    pub fn with_angle_law(key: RngStreamKey, n: usize, angle_law: AngleLaw) -> Result<Self> {
        if key.stream_tag != StreamTag::CollisionHistory {
            return Err(SimError::contract(
                "collision history needs the collision_history stream",
            ));
        }
        if n < 2 {
            return Err(SimError::contract("a collision needs at least 2 particles"));
        }
        Ok(CollisionHistory {
            rng: key.rng(),
            n,
            rate: n as f64,
            angle_law,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.rate
    }

    /// Draw the next event strictly after `t_now`.
    pub fn next_event(&mut self, t_now: f64) -> CollisionEvent {
        // Exponential waiting time with rate N; reject u = 0 so event times
        // are strictly increasing.
        let dt = loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                break -u.ln() / self.rate;
            }
        };
        // Uniform unordered pair via (i, j != i).
        let i = self.rng.random_range(0..self.n);
        let mut j = self.rng.random_range(0..self.n - 1);
        if j >= i {
            j += 1;
        }
        let pair = (i.min(j), i.max(j));
        let angle = match self.angle_law {
            // Uniform on (-pi, pi]; u in [0, 1) maps to pi(1 - 2u).
            AngleLaw::Uniform => {
                let u: f64 = self.rng.random();
                PI * (1.0 - 2.0 * u)
            }
        };
        CollisionEvent {
            time: t_now + dt,
            pair,
            angle,
        }
    }
}

/// Draw the next event of `history` strictly after `t_now`.
pub fn sample_next_event(history: &mut CollisionHistory, t_now: f64) -> CollisionEvent {
    history.next_event(t_now)
}

/// Apply the pair rotation
/// `(v_i, v_j) <- (v_i cos θ + v_j sin θ, v_j cos θ - v_i sin θ)`,
/// leaving every other coordinate untouched. Σv² is invariant; the Σv cache
/// shifts by the pair delta.
pub fn rotate_pair(v: &MasterVector, event: &CollisionEvent) -> Result<MasterVector> {
    let (i, j) = event.pair;
    if i >= j || j >= v.len() {
        return Err(SimError::contract(format!(
            "pair ({i}, {j}) invalid for {} particles",
            v.len()
        )));
    }
    let (c, s) = (event.angle.cos(), event.angle.sin());
    let (vi, vj) = (v.velocities()[i], v.velocities()[j]);
    let mut out = v.clone();
    out.set_pair_after_rotation(i, j, vi * c + vj * s, vj * c - vi * s);
    Ok(out)
}

/// Where a run's events come from: freshly generated, or replayed from a
/// recorded history. A replayed source is exhausted once the recording ends.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)] // built once per replica, never moved per event
pub enum EventSource {
    Generated(CollisionHistory),
    Replay {
        events: std::vec::IntoIter<CollisionEvent>,
    },
}

impl EventSource {
    pub fn generated(key: RngStreamKey, n: usize) -> Result<Self> {
        Ok(EventSource::Generated(CollisionHistory::new(key, n)?))
    }

    pub fn replay(events: Vec<CollisionEvent>) -> Self {
        EventSource::Replay {
            events: events.into_iter(),
        }
    }

    /// Next event strictly after `t_now`, or `None` when a replayed history
    /// is exhausted.
    pub fn next(&mut self, t_now: f64) -> Option<CollisionEvent> {
        match self {
            EventSource::Generated(history) => Some(history.next_event(t_now)),
            EventSource::Replay { events } => events.next(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(seed: u64, n: usize) -> CollisionHistory {
        CollisionHistory::new(
            RngStreamKey::new(seed, 0, StreamTag::CollisionHistory),
            n,
        )
        .unwrap()
    }

    #[test]
    fn quarter_turn_example() {
        let v = MasterVector::from_velocities(vec![1.0, 0.0]).unwrap();
        let e = CollisionEvent {
            time: 0.1,
            pair: (0, 1),
            angle: PI / 2.0,
        };
        let out = rotate_pair(&v, &e).unwrap();
        assert!((out.velocities()[0] - 0.0).abs() < 1e-15);
        assert!((out.velocities()[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let v = MasterVector::from_velocities(vec![0.3, -1.2, 4.0]).unwrap();
        let e = CollisionEvent {
            time: 0.1,
            pair: (0, 2),
            angle: 0.0,
        };
        let out = rotate_pair(&v, &e).unwrap();
        assert_eq!(out.velocities(), v.velocities());
    }

    #[test]
    fn pair_energy_preserved() {
        let v = MasterVector::from_velocities(vec![3.0, 4.0]).unwrap();
        let e = CollisionEvent {
            time: 0.1,
            pair: (0, 1),
            angle: 0.7,
        };
        let out = rotate_pair(&v, &e).unwrap();
        let sq: f64 = out.velocities().iter().map(|&x| x * x).sum();
        assert!((sq - 25.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_inverse_restores_state() {
        let v = MasterVector::from_velocities(vec![0.5, -2.0, 1.5, 0.25]).unwrap();
        for &angle in &[0.3, 2.9, -1.4, PI] {
            let fwd = CollisionEvent {
                time: 0.1,
                pair: (1, 3),
                angle,
            };
            let back = CollisionEvent {
                time: 0.2,
                pair: (1, 3),
                angle: -angle,
            };
            let out = rotate_pair(&rotate_pair(&v, &fwd).unwrap(), &back).unwrap();
            for (a, b) in out.velocities().iter().zip(v.velocities()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_pair_rejected() {
        let v = MasterVector::from_velocities(vec![1.0, 2.0]).unwrap();
        let e = CollisionEvent {
            time: 0.1,
            pair: (0, 2),
            angle: 0.5,
        };
        assert!(rotate_pair(&v, &e).is_err());
    }

    #[test]
    fn waiting_time_mean_matches_total_rate() {
        // For N = 2 the total rate is 2, so the mean waiting time is 0.5
        // with per-draw standard deviation 0.5.
        let mut h = history(11, 2);
        let draws = 100_000;
        let mut t = 0.0;
        let mut total = 0.0;
        for _ in 0..draws {
            let e = h.next_event(t);
            total += e.time - t;
            t = e.time;
        }
        let mean = total / draws as f64;
        let tol = 3.0 * 0.5 / (draws as f64).sqrt();
        assert!((mean - 0.5).abs() < tol, "mean waiting time {mean}");
    }

    #[test]
    fn pairs_are_uniform() {
        let mut h = history(12, 3);
        let draws = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            let e = h.next_event(0.0);
            let idx = match e.pair {
                (0, 1) => 0,
                (0, 2) => 1,
                (1, 2) => 2,
                other => panic!("unexpected pair {other:?}"),
            };
            counts[idx] += 1;
        }
        let p = 1.0 / 3.0;
        let tol = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < tol, "pair frequency {freq}");
        }
    }

    #[test]
    fn angle_cosine_is_centered() {
        let mut h = history(13, 8);
        let draws = 100_000;
        let mean: f64 = (0..draws).map(|_| h.next_event(0.0).angle.cos()).sum::<f64>() / draws as f64;
        // Var(cos θ) = 1/2 for a uniform angle.
        let tol = 3.0 * (0.5f64 / draws as f64).sqrt();
        assert!(mean.abs() < tol, "mean cos theta {mean}");
        // All angles in (-pi, pi].
        for _ in 0..1000 {
            let a = h.next_event(0.0).angle;
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn event_count_is_poisson() {
        // Over [0, t] the number of events is Poisson(N t): for N = 16,
        // t = 4 the mean count is 64 with sd 8, so the mean over 10^4
        // replays has sd 0.08.
        let n = 16;
        let t_end = 4.0;
        let replays = 10_000;
        let mut total = 0u64;
        for r in 0..replays {
            let mut h = CollisionHistory::new(
                RngStreamKey::new(99, r, StreamTag::CollisionHistory),
                n,
            )
            .unwrap();
            let mut t = 0.0;
            loop {
                let e = h.next_event(t);
                if e.time > t_end {
                    break;
                }
                t = e.time;
                total += 1;
            }
        }
        let mean = total as f64 / replays as f64;
        let tol = 3.0 * 8.0 / (replays as f64).sqrt();
        assert!((mean - 64.0).abs() < tol, "mean event count {mean}");
    }

    #[test]
    fn rotation_preserves_total_energy_per_event() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(
                &(
                    proptest::collection::vec(-50.0f64..50.0, 2..12),
                    -3.2f64..3.2,
                ),
                |(vs, angle)| {
                    let v = MasterVector::from_velocities(vs.clone()).unwrap();
                    let e = CollisionEvent {
                        time: 0.1,
                        pair: (0, vs.len() - 1),
                        angle,
                    };
                    let out = rotate_pair(&v, &e).unwrap();
                    let before: f64 = vs.iter().map(|&x| x * x).sum();
                    let after: f64 = out.velocities().iter().map(|&x| x * x).sum();
                    let pair_energy = vs[0] * vs[0] + vs[vs.len() - 1] * vs[vs.len() - 1];
                    prop_assert!((after - before).abs() <= 1e-10 * pair_energy.max(1e-300));
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn replay_reproduces_generated_events() {
        let mut a = history(21, 6);
        let mut t = 0.0;
        let mut events = Vec::new();
        for _ in 0..100 {
            let e = a.next_event(t);
            t = e.time;
            events.push(e);
        }
        let mut src = EventSource::replay(events.clone());
        let mut t = 0.0;
        for expected in &events {
            let got = src.next(t).unwrap();
            assert_eq!(&got, expected);
            t = got.time;
        }
        assert!(src.next(t).is_none());

        // Times are strictly increasing along a history.
        let mut prev = 0.0;
        for e in &events {
            assert!(e.time > prev);
            prev = e.time;
        }
    }
}
