//! Decohered cluster states as noisy virtual-time evolution.
//!
//! Measuring the bulk of a cluster state teleports the boundary qubit
//! through the lattice one site per step, picking up outcome-dependent
//! byproduct operators on the way.  Decoherence on a sublattice turns the
//! clean teleportation into a noisy virtual channel:
//!
//! * in 1D a single logical qubit hops through `2N−1` steps of alternating
//!   `X^m` / `Z^m` byproducts with an `X`-flip error of strength `p` at each
//!   decohered step — a classical flip-parity process once the byproducts
//!   are cancelled;
//! * on the 2D cylinder each column is one round of a length-`Ly` repetition
//!   code read out through noisy parity checks: data flips between rounds
//!   and measurement errors, both of strength `p` (a foliated repetition
//!   code under phenomenological noise).
//!
//! Both simulations are third estimators for the coherent information,
//! independent of the dense protocol and the matching decoder, and the 2D
//! event set maps one-to-one onto the decoder module's edge flips, so shared
//! noise produces identical syndrome histories by construction.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::decoder::{decode_2d_matching, ErrorModel, SyndromeGraph};
use crate::error::Error;
use crate::h2;
use crate::lattice::LiebCylinder2D;

// ---------------------------------------------------------------------------
// 1D virtual channel
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of the coherent information surviving the 1D
/// virtual channel.
#[derive(Clone, Copy, Debug)]
pub struct Virtual1DReport {
    /// `1 − h₂((1+b̂)/2)` with `b̂` the sampled mean flip bias, in bits.
    pub value: f64,
    /// Delta-method standard error.
    pub stderr: f64,
    pub n_samples: u64,
    /// Virtual time steps, `2N−1`.
    pub n_steps: usize,
    pub seed: u64,
}

/// Teleport one logical qubit through the bulk of a chain with `2N−1` sites
/// between the boundaries, with an `X` error of strength `p` at each of the
/// `N` decohered steps.  The byproduct frame accumulated from the random
/// outcomes is tracked on both the channel and the decoder side and must
/// cancel exactly — at `p = 0` the conditioned evolution is unitary and the
/// estimate is 1 bit with zero error.
///
/// ```
/// use cluster_ic::protocol::ic_dephasing_exact;
/// use cluster_ic::virtualchan::simulate_virtual_1d;
///
/// let r = simulate_virtual_1d(3, 0.0, 1_000, 7)?;
/// assert_eq!(r.value, 1.0);
///
/// let r = simulate_virtual_1d(3, 0.1, 20_000, 7)?;
/// assert!((r.value - ic_dephasing_exact(3, 0.1)).abs() < 3.0 * r.stderr);
/// # Ok::<(), cluster_ic::Error>(())
/// ```
pub fn simulate_virtual_1d(
    n_half: usize,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Virtual1DReport, Error> {
    if n_half == 0 {
        return Err(Error::InvalidLattice("need at least one unit cell".into()));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ParamOutOfRange { name: "p", value: p });
    }
    if n_samples == 0 {
        return Err(Error::ParamOutOfRange {
            name: "n_samples",
            value: 0.0,
        });
    }
    let n_steps = 2 * n_half - 1;
    let biases: Vec<Result<f64, Error>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ s.wrapping_mul(0x9e3779b97f4a7c15));
            // Byproduct frame (x, z) as seen by the channel and by the
            // decoder, and the accumulated error parity.
            let mut frame = (false, false);
            let mut decoder_frame = (false, false);
            let mut flips = false;
            for t in 1..=n_steps {
                let m = rng.random_bool(0.5);
                if t % 2 == 1 {
                    frame.0 ^= m;
                    decoder_frame.0 ^= m;
                    // the odd sublattice carries the decoherence
                    if rng.random_bool(p) {
                        flips = !flips;
                    }
                } else {
                    frame.1 ^= m;
                    decoder_frame.1 ^= m;
                }
            }
            if frame != decoder_frame {
                return Err(Error::Consistency(
                    "byproduct frames diverged between channel and decoder".into(),
                ));
            }
            Ok(if flips { -1.0 } else { 1.0 })
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for b in biases {
        let b = b?;
        sum += b;
        sum_sq += b * b;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0) / n
    } else {
        0.0
    };
    let value = 1.0 - h2((1.0 + mean) / 2.0);
    let stderr = if mean.abs() >= 1.0 {
        0.0
    } else {
        (mean.atanh() / std::f64::consts::LN_2).abs() * var.sqrt()
    };
    Ok(Virtual1DReport {
        value,
        stderr,
        n_samples,
        n_steps,
        seed,
    })
}

// ---------------------------------------------------------------------------
// 2D foliated repetition code
// ---------------------------------------------------------------------------

/// Round-by-round history of one foliated repetition-code run.
#[derive(Clone, Debug)]
pub struct FoliatedRun {
    /// Measured parity checks, `lx` rounds × `ly` checks.
    pub syndromes: Vec<Vec<bool>>,
    /// Defects (consecutive-round syndrome differences) indexed like the
    /// lattice plaquettes.
    pub defects: Vec<bool>,
}

/// Replay an edge-outcome vector of the 2D cluster decoder as a foliated
/// repetition-code history: horizontal edge `(c, y)` is a flip of data
/// qubit `y` between rounds `c` and `c+1`; vertical edge `(c, y)` is a
/// measurement error of parity check `y` in round `c`.
pub fn replay_edge_outcomes(lat: &LiebCylinder2D, m: &[i8]) -> Result<FoliatedRun, Error> {
    if m.len() != lat.n_qubits() {
        return Err(Error::SizeMismatch(lat.n_qubits(), m.len()));
    }
    let (lx, ly) = (lat.lx(), lat.ly());
    let mut data = vec![false; ly];
    let mut syndromes = Vec::with_capacity(lx);
    for c in 0..lx {
        let mut s: Vec<bool> = (0..ly).map(|y| data[y] ^ data[(y + 1) % ly]).collect();
        for (y, b) in s.iter_mut().enumerate() {
            if m[lat.vedge(c, y)] == -1 {
                *b = !*b;
            }
        }
        syndromes.push(s);
        if c + 1 < lx {
            for y in 0..ly {
                if m[lat.hedge(c, y)] == -1 {
                    data[y] = !data[y];
                }
            }
        }
    }
    let mut defects = vec![false; lat.n_plaquettes()];
    for c in 0..lx - 1 {
        for y in 0..ly {
            defects[lat.plaquette_index(c, y)] = syndromes[c][y] ^ syndromes[c + 1][y];
        }
    }
    Ok(FoliatedRun { syndromes, defects })
}

/// Failure-rate estimate of the foliated simulation.
#[derive(Clone, Copy, Debug)]
pub struct Virtual2DReport {
    pub lx: usize,
    pub ly: usize,
    pub p_data: f64,
    pub p_meas: f64,
    pub n_samples: u64,
    pub failure_rate: f64,
    pub stderr: f64,
    pub seed: u64,
}

/// Phenomenological repetition-code simulation with independent data-flip
/// and measurement-error strengths.  Each sample draws its events in
/// round order, maps them onto the 2D cluster decoder's edge set, and asks
/// the matching decoder for the logical parity; a sample fails when the
/// decoded parity is wrong.  First- and last-round checks are noiseless,
/// matching the decoder's default edge set.
pub fn simulate_virtual_2d_with(
    lx: usize,
    ly: usize,
    p_data: f64,
    p_meas: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Virtual2DReport, Error> {
    for (name, p) in [("p_data", p_data), ("p_meas", p_meas)] {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::ParamOutOfRange { name, value: p });
        }
    }
    let lat = LiebCylinder2D::new(lx, ly)?;
    // Matching weights follow the dominant strength when they differ; the
    // decoder stays a valid (if suboptimal) decoder either way.
    let model = ErrorModel::z_dephase(&lat, p_data.max(p_meas).max(f64::MIN_POSITIVE), false)?;
    let failures: Vec<Result<bool, Error>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ s.wrapping_mul(0x9e3779b97f4a7c15));
            let mut m = vec![1i8; lat.n_qubits()];
            for c in 0..lx {
                // noisy checks only in the interior rounds
                if c > 0 && c + 1 < lx {
                    for y in 0..ly {
                        if rng.random_bool(p_meas) {
                            m[lat.vedge(c, y)] = -1;
                        }
                    }
                }
                if c + 1 < lx {
                    for y in 0..ly {
                        if rng.random_bool(p_data) {
                            m[lat.hedge(c, y)] = -1;
                        }
                    }
                }
            }
            let graph = SyndromeGraph::build(&lat, &model, &m)?;
            let decode = decode_2d_matching(&lat, &graph, &model, &m)?;
            Ok(decode.gamma_hat != 1)
        })
        .collect();
    let mut n_failed = 0u64;
    for f in failures {
        if f? {
            n_failed += 1;
        }
    }
    let n = n_samples as f64;
    let rate = n_failed as f64 / n;
    Ok(Virtual2DReport {
        lx,
        ly,
        p_data,
        p_meas,
        n_samples,
        failure_rate: rate,
        stderr: (rate * (1.0 - rate) / n).sqrt(),
        seed,
    })
}

/// Equal-strength foliated simulation: bit flips and measurement errors at
/// the same `p`.
pub fn simulate_virtual_2d(
    lx: usize,
    ly: usize,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Virtual2DReport, Error> {
    simulate_virtual_2d_with(lx, ly, p, p, n_samples, seed)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{logical_failure_rate, plaquette_defects};
    use crate::protocol::ic_dephasing_exact;

    #[test]
    fn virtual_1d_is_exact_at_zero_noise() {
        let r = simulate_virtual_1d(5, 0.0, 500, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.n_steps, 9);
    }

    #[test]
    fn virtual_1d_matches_the_dephasing_closed_form() {
        let (n, p) = (10, 0.1);
        let r = simulate_virtual_1d(n, p, 40_000, 42).unwrap();
        let expect = ic_dephasing_exact(n, p);
        assert!(
            (r.value - expect).abs() < 3.0 * r.stderr.max(1e-6),
            "virtual {} ± {} vs closed form {}",
            r.value,
            r.stderr,
            expect
        );
    }

    #[test]
    fn virtual_1d_estimator_triangle() {
        // Dense-backed closed form, decoder-style entropy formula, and the
        // virtual channel agree pairwise for a single dephased sublattice.
        for p in [0.05, 0.2] {
            let closed = ic_dephasing_exact(3, p);
            let r = simulate_virtual_1d(3, p, 30_000, 7).unwrap();
            assert!(
                (r.value - closed).abs() < 3.0 * r.stderr.max(1e-6),
                "p={p}: virtual {} ± {} vs {}",
                r.value,
                r.stderr,
                closed
            );
        }
    }

    #[test]
    fn virtual_1d_scrambles_at_maximal_noise() {
        let r = simulate_virtual_1d(6, 0.5, 10_000, 3).unwrap();
        assert!(r.value.abs() < 5e-3, "value {}", r.value);
    }

    #[test]
    fn foliated_replay_reproduces_decoder_syndromes() {
        // Draw flips with the decoder module's own per-sample recipe and
        // check that the round-by-round repetition-code history produces
        // the identical defect pattern.
        let lat = LiebCylinder2D::new(5, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.12, false).unwrap();
        for s in 0..20u64 {
            let mut rng =
                ChaCha12Rng::seed_from_u64(99 ^ s.wrapping_mul(0x9e3779b97f4a7c15));
            let mut m = vec![1i8; lat.n_qubits()];
            for &e in &model.edges {
                if rng.random_bool(0.12) {
                    m[e] = -1;
                }
            }
            let run = replay_edge_outcomes(&lat, &m).unwrap();
            let direct = plaquette_defects(&lat, &m).unwrap();
            assert_eq!(run.defects, direct, "sample {s}");
            assert_eq!(run.syndromes.len(), lat.lx());
        }
    }

    #[test]
    fn foliated_boundary_rounds_are_clean() {
        // Interior measurement errors leave the first/last-round checks at
        // the true code syndrome of the accumulated data flips.
        let lat = LiebCylinder2D::new(4, 3).unwrap();
        let mut m = vec![1i8; lat.n_qubits()];
        m[lat.hedge(0, 1)] = -1; // one data flip after round 0
        m[lat.vedge(1, 2)] = -1; // one interior measurement error
        let run = replay_edge_outcomes(&lat, &m).unwrap();
        assert!(run.syndromes[0].iter().all(|&b| !b));
        // qubit 1 flipped: checks 0 and 1 show it in every later round
        let last = &run.syndromes[3];
        assert_eq!(last, &vec![true, true, false]);
    }

    #[test]
    fn virtual_2d_never_fails_without_noise() {
        let r = simulate_virtual_2d(4, 4, 0.0, 200, 5).unwrap();
        assert_eq!(r.failure_rate, 0.0);
    }

    #[test]
    fn virtual_2d_failure_drops_with_size_below_threshold() {
        let small = simulate_virtual_2d(4, 4, 0.06, 4_000, 11).unwrap();
        let large = simulate_virtual_2d(10, 10, 0.06, 4_000, 13).unwrap();
        assert!(
            large.failure_rate < small.failure_rate,
            "L=4: {}, L=10: {}",
            small.failure_rate,
            large.failure_rate
        );
    }

    #[test]
    fn virtual_2d_agrees_with_the_decoder_benchmark() {
        let (l, p, n) = (6, 0.09, 4_000u64);
        let v = simulate_virtual_2d(l, l, p, n, 17).unwrap();
        let d = logical_failure_rate(l, p, n, 23, false).unwrap();
        let sigma = (v.stderr.powi(2) + d.stderr.powi(2)).sqrt();
        assert!(
            (v.failure_rate - d.failure_rate).abs() < 3.0 * sigma.max(1e-4),
            "virtual {} ± {} vs decoder {} ± {}",
            v.failure_rate,
            v.stderr,
            d.failure_rate,
            d.stderr
        );
    }

    #[test]
    fn virtual_rejects_bad_parameters() {
        assert!(matches!(
            simulate_virtual_1d(0, 0.1, 10, 0),
            Err(Error::InvalidLattice(_))
        ));
        assert!(matches!(
            simulate_virtual_1d(3, 0.7, 10, 0),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            simulate_virtual_2d(4, 4, -0.1, 10, 0),
            Err(Error::ParamOutOfRange { .. })
        ));
    }
}
