//! The boundary-to-boundary communication protocol and its
//! coherent-information estimators.
//!
//! The protocol: (optionally) entangle an ancilla with the left boundary,
//! apply the decoherence channel to the masked bulk sites, measure every bulk
//! site in the `X` basis, and optionally measure the environment in the
//! outcome-conditioned charge basis. Coherent information between the left
//! boundary and the receiver's side is evaluated three independent ways:
//! exact dense enumeration, closed forms, and decoder-based Monte Carlo.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channels::{ChannelSpec, Mask, TransformedCharge};
use crate::dense::DenseState;
use crate::error::Error;
use crate::h2;
use crate::lattice::{Chain1D, LiebCylinder2D, Side};
use crate::pauli::{PauliKind, PauliOperator};
use crate::stab::StabilizerState;

/// A coherent-information estimate with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentInfoReport {
    /// Value in bits.
    pub value: f64,
    /// Which estimator produced it.
    pub estimator: &'static str,
    /// Standard error (Monte-Carlo estimators only).
    pub stderr: Option<f64>,
    /// Number of trajectories visited (or represented).
    pub n_traj: u64,
}

/// How trajectories of the pure-state protocol are visited.
#[derive(Clone, Copy, Debug)]
pub enum TrajectoryMode {
    /// Branch on every outcome explicitly.
    Exhaustive,
    /// Exploit that stabilizer entropies depend on the tableau's binary part
    /// only, never on generator signs: every trajectory of one structural
    /// class gives the same entropies and the same probability. One pass
    /// determines the value; `passes` independent passes re-derive it and
    /// must agree to 1e-9, as a guard on the structural argument.
    StructuralVerify { passes: usize, seed: u64 },
}

/// One trajectory of an exhaustive 1D run.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    /// Bulk outcomes, ordered by site index.
    pub m: Vec<i8>,
    /// Born probability.
    pub p: f64,
    /// Product of outcomes over even bulk sites.
    pub gamma_even: i8,
    /// Product of outcomes over odd sites.
    pub gamma_odd: i8,
}

// ---------------------------------------------------------------------------
// Pure-state protocol (stabilizer backend)
// ---------------------------------------------------------------------------

/// Coherent information of the pure protocol on an arbitrary stabilizer
/// state: measure `measured` in X, then average
/// `S(region_r) − S(region_l ∪ region_r)` over trajectories.
pub fn coherent_info_pure_stab(
    state: &StabilizerState,
    measured: &[usize],
    region_l: &[usize],
    region_r: &[usize],
    mode: TrajectoryMode,
) -> Result<CoherentInfoReport, Error> {
    let region_lr: Vec<usize> = region_l.iter().chain(region_r).copied().collect();
    let value_of = |st: &StabilizerState| -> Result<f64, Error> {
        Ok(st.entropy_bits(region_r)? - st.entropy_bits(&region_lr)?)
    };
    match mode {
        TrajectoryMode::Exhaustive => {
            let mut value = 0.0;
            let mut p_total = 0.0;
            let mut n_traj = 0u64;
            enumerate_x_stab(state, measured, &mut |_m, p, st| {
                value += p * value_of(st)?;
                p_total += p;
                n_traj += 1;
                Ok(())
            })?;
            if (p_total - 1.0).abs() > 1e-9 {
                return Err(Error::Consistency(format!(
                    "trajectory probabilities sum to {p_total}"
                )));
            }
            Ok(CoherentInfoReport {
                value,
                estimator: "exhaustive_stabilizer",
                stderr: None,
                n_traj,
            })
        }
        TrajectoryMode::StructuralVerify { passes, seed } => {
            let mut first: Option<(f64, u32)> = None;
            for k in 0..passes.max(1) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37));
                let mut st = state.clone();
                let mut n_random = 0u32;
                for &q in measured {
                    let x = PauliOperator::single(st.n_qubits(), q, PauliKind::X)?;
                    if !st.measure(&x, &mut rng)?.deterministic {
                        n_random += 1;
                    }
                }
                let v = value_of(&st)?;
                match first {
                    None => first = Some((v, n_random)),
                    Some((v0, r0)) => {
                        if (v - v0).abs() > 1e-9 || n_random != r0 {
                            return Err(Error::Consistency(format!(
                                "trajectory passes disagree: {v0} vs {v} \
                                 ({r0} vs {n_random} random outcomes)"
                            )));
                        }
                    }
                }
            }
            let (value, n_random) = first.expect("at least one pass");
            Ok(CoherentInfoReport {
                value,
                estimator: "structural_stabilizer",
                stderr: None,
                n_traj: 1u64 << n_random,
            })
        }
    }
}

/// Pure 1D protocol: no ancilla, boundaries are the chain ends, the whole
/// bulk is measured.
///
/// ```
/// use cluster_ic::lattice::Chain1D;
/// use cluster_ic::protocol::{coherent_info_pure_1d, TrajectoryMode};
///
/// let chain = Chain1D::new(4)?;
/// let r = coherent_info_pure_1d(&chain, TrajectoryMode::Exhaustive)?;
/// assert_eq!(r.value, 1.0);
/// # Ok::<(), cluster_ic::Error>(())
/// ```
pub fn coherent_info_pure_1d(
    chain: &Chain1D,
    mode: TrajectoryMode,
) -> Result<CoherentInfoReport, Error> {
    coherent_info_pure_stab(
        &chain.stabilizer_state(),
        &chain.bulk_sites(),
        &[chain.left()],
        &[chain.right()],
        mode,
    )
}

/// Pure 2D protocol: ancilla carries the logical qubit of the left boundary
/// column; everything except the ancilla and the right column is measured.
pub fn coherent_info_pure_2d(
    lat: &LiebCylinder2D,
    mode: TrajectoryMode,
) -> Result<CoherentInfoReport, Error> {
    let st = lat.stabilizer_state_with_ancilla(Side::Left);
    let right = lat.right_column();
    let mut measured: Vec<usize> = (0..lat.n_vertices())
        .filter(|v| !right.contains(v))
        .collect();
    measured.extend(lat.edge_qubits());
    coherent_info_pure_stab(&st, &measured, &[lat.ancilla_index()], &right, mode)
}

/// Visit all X-measurement trajectories of a stabilizer state.
fn enumerate_x_stab(
    state: &StabilizerState,
    sites: &[usize],
    visit: &mut dyn FnMut(&[i8], f64, &StabilizerState) -> Result<(), Error>,
) -> Result<(), Error> {
    fn rec(
        st: &StabilizerState,
        sites: &[usize],
        idx: usize,
        m: &mut Vec<i8>,
        p_acc: f64,
        visit: &mut dyn FnMut(&[i8], f64, &StabilizerState) -> Result<(), Error>,
    ) -> Result<(), Error> {
        if idx == sites.len() {
            return visit(m, p_acc, st);
        }
        let x = PauliOperator::single(st.n_qubits(), sites[idx], PauliKind::X)?;
        for outcome in [1i8, -1] {
            let mut next = st.clone();
            let p = next.measure_forced(&x, outcome)?;
            if p == 0.0 {
                continue;
            }
            m.push(outcome);
            rec(&next, sites, idx + 1, m, p_acc * p, visit)?;
            m.pop();
        }
        Ok(())
    }
    rec(state, sites, 0, &mut Vec::new(), 1.0, visit)
}

// ---------------------------------------------------------------------------
// Purified 1D pipeline (dense backend)
// ---------------------------------------------------------------------------

/// The bulk sites hit by a channel mask on a chain. Boundary sites are never
/// decohered.
pub fn decohered_sites_1d(chain: &Chain1D, mask: Mask) -> Result<Vec<usize>, Error> {
    Ok(match mask {
        Mask::Even => chain.sublattice_a_bulk(),
        Mask::Odd => chain.sublattice_b(),
        Mask::Both => {
            let mut v = chain.sublattice_a_bulk();
            v.extend(chain.sublattice_b());
            v.sort_unstable();
            v
        }
        Mask::Edges => {
            return Err(Error::EstimatorMismatch {
                estimator: "chain protocol",
                reason: "the edge mask applies to the 2D lattice only".into(),
            });
        }
    })
}

/// A chain with the channel's purification attached: one environment register
/// per decohered site, appended after the chain qubits.
pub struct PurifiedChain {
    pub state: DenseState,
    pub chain: Chain1D,
    pub sites: Vec<DecoheredSite>,
}

#[derive(Clone, Debug)]
pub struct DecoheredSite {
    pub site: usize,
    pub strength: f64,
    pub env: Vec<usize>,
}

pub fn build_purified_chain(chain: &Chain1D, spec: &ChannelSpec) -> Result<PurifiedChain, Error> {
    spec.validate()?;
    let mut state = chain.dense_state()?;
    let mut sites = Vec::new();
    let mut next = chain.n_sites();
    for site in decohered_sites_1d(chain, spec.mask)? {
        let strength = spec.site_strength(site % 2 == 0);
        let env: Vec<usize> = (next..next + spec.n_env()).collect();
        state.append_qubits(&spec.env_state())?;
        let mut targets = vec![site];
        targets.extend(&env);
        state.apply_unitary(&spec.purified_unitary(strength)?, &targets)?;
        sites.push(DecoheredSite {
            site,
            strength,
            env,
        });
        next += spec.n_env();
    }
    Ok(PurifiedChain {
        state,
        chain: *chain,
        sites,
    })
}

/// Visit all X-measurement trajectories of a dense state.
fn enumerate_x_dense(
    state: &DenseState,
    sites: &[usize],
    visit: &mut dyn FnMut(&[i8], f64, &DenseState) -> Result<(), Error>,
) -> Result<(), Error> {
    fn rec(
        st: &DenseState,
        sites: &[usize],
        idx: usize,
        m: &mut Vec<i8>,
        p_acc: f64,
        visit: &mut dyn FnMut(&[i8], f64, &DenseState) -> Result<(), Error>,
    ) -> Result<(), Error> {
        if idx == sites.len() {
            return visit(m, p_acc, st);
        }
        let x = PauliOperator::single(st.n_qubits(), sites[idx], PauliKind::X)?;
        for (p, outcome, next) in st.measure_pauli(&x)? {
            m.push(outcome);
            rec(&next, sites, idx + 1, m, p_acc * p, visit)?;
            m.pop();
        }
        Ok(())
    }
    rec(state, sites, 0, &mut Vec::new(), 1.0, visit)
}

/// `I_c(L:ERM)`: the bulk is measured in the X basis first, then each site's
/// environment register is measured in the eigenbasis of the
/// outcome-conditioned charge operator `O^(m)`. For channels whose
/// transformed charge does not decompose over the system outcome, the
/// environment falls back to the computational basis (no basis can recover
/// the charge there; the fallback keeps the estimator total).
pub fn coherent_info_with_env(
    chain: &Chain1D,
    spec: &ChannelSpec,
) -> Result<CoherentInfoReport, Error> {
    let pc = build_purified_chain(chain, spec)?;
    let bulk = chain.bulk_sites();
    let charges: Vec<TransformedCharge> = pc
        .sites
        .iter()
        .map(|ds| spec.transformed_charge(ds.strength))
        .collect::<Result<_, _>>()?;
    let bulk_pos: Vec<usize> = pc
        .sites
        .iter()
        .map(|ds| bulk.iter().position(|&b| b == ds.site).expect("bulk site"))
        .collect();
    let (mut value, mut p_total, mut n_traj) = (0.0, 0.0, 0u64);
    let (l, r) = (chain.left(), chain.right());
    enumerate_x_dense(&pc.state, &bulk, &mut |m, p, st| {
        // Environment measurement, site by site, branching on outcomes.
        let mut branches: Vec<(f64, DenseState)> = vec![(1.0, st.clone())];
        for (k, ds) in pc.sites.iter().enumerate() {
            let mi = m[bulk_pos[k]];
            let mut next = Vec::new();
            for (bp, bst) in &branches {
                match &charges[k] {
                    TransformedCharge::Decomposable { .. } => {
                        let o = charges[k].o_for(mi).expect("decomposable");
                        for (p2, _, st2) in bst.measure_hermitian(o, &ds.env)? {
                            next.push((bp * p2, st2));
                        }
                    }
                    TransformedCharge::NotDecomposable { .. } => {
                        let mut sub = vec![(*bp, bst.clone())];
                        for &e in &ds.env {
                            let z = PauliOperator::single(bst.n_qubits(), e, PauliKind::Z)?;
                            let mut finer = Vec::new();
                            for (sp, sst) in &sub {
                                for (p2, _, st2) in sst.measure_pauli(&z)? {
                                    finer.push((sp * p2, st2));
                                }
                            }
                            sub = finer;
                        }
                        next.extend(sub);
                    }
                }
            }
            branches = next;
        }
        for (bp, bst) in branches {
            let s_r = bst.entropy_bits(&[r])?;
            let s_lr = bst.entropy_bits(&[l, r])?;
            value += p * bp * (s_r - s_lr);
            p_total += p * bp;
            n_traj += 1;
        }
        Ok(())
    })?;
    if (p_total - 1.0).abs() > 1e-9 {
        return Err(Error::Consistency(format!(
            "trajectory probabilities sum to {p_total}"
        )));
    }
    Ok(CoherentInfoReport {
        value,
        estimator: "exact_dense_with_env",
        stderr: None,
        n_traj,
    })
}

/// `I_c(L:RM)` by exact dense enumeration: the environment is never
/// measured, so per bulk trajectory the value is `S(ρ_R) − S(ρ_LR)` with the
/// environment traced out.
pub fn coherent_info_exact_dense(
    chain: &Chain1D,
    spec: &ChannelSpec,
) -> Result<CoherentInfoReport, Error> {
    Ok(coherent_info_exact_dense_trajectories(chain, spec)?.0)
}

/// Same as [`coherent_info_exact_dense`], returning the trajectory table.
pub fn coherent_info_exact_dense_trajectories(
    chain: &Chain1D,
    spec: &ChannelSpec,
) -> Result<(CoherentInfoReport, Vec<TrajectoryRecord>), Error> {
    let pc = build_purified_chain(chain, spec)?;
    let bulk = chain.bulk_sites();
    let (l, r) = (chain.left(), chain.right());
    let mut value = 0.0;
    let mut p_total = 0.0;
    let mut records = Vec::new();
    enumerate_x_dense(&pc.state, &bulk, &mut |m, p, st| {
        let s_r = st.entropy_bits(&[r])?;
        let s_lr = st.entropy_bits(&[l, r])?;
        value += p * (s_r - s_lr);
        p_total += p;
        let (gamma_even, gamma_odd) = gamma_1d(&bulk, m);
        records.push(TrajectoryRecord {
            m: m.to_vec(),
            p,
            gamma_even,
            gamma_odd,
        });
        Ok(())
    })?;
    if (p_total - 1.0).abs() > 1e-9 {
        return Err(Error::Consistency(format!(
            "trajectory probabilities sum to {p_total}"
        )));
    }
    let n_traj = records.len() as u64;
    Ok((
        CoherentInfoReport {
            value,
            estimator: "exact_dense",
            stderr: None,
            n_traj,
        },
        records,
    ))
}

/// Bulk charge class: products of outcomes over the even and odd bulk sites.
pub fn gamma_1d(bulk_sites: &[usize], m: &[i8]) -> (i8, i8) {
    let mut even = 1i8;
    let mut odd = 1i8;
    for (&site, &o) in bulk_sites.iter().zip(m) {
        if site % 2 == 0 {
            even *= o;
        } else {
            odd *= o;
        }
    }
    (even, odd)
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Exact `I_c(L:RM)` for dephasing one group of `n_dec` sites at strength
/// `p`, as a function of the charge-guess success probability
/// `(1 + (1−2p)^{n_dec})/2`.
pub fn ic_dephasing_exact(n_dec: usize, p: f64) -> f64 {
    1.0 - h2((1.0 + (1.0 - 2.0 * p).powi(n_dec as i32)) / 2.0)
}

/// Large-size asymptote of [`ic_dephasing_exact`]:
/// `(1−2p)^{2 n_dec} / (2 ln 2)`.
pub fn ic_dephasing_asymptote(n_dec: usize, p: f64) -> f64 {
    (1.0 - 2.0 * p).powi(2 * n_dec as i32) / (2.0 * std::f64::consts::LN_2)
}

/// Decay length of the exact form in units of the decohered-site count:
/// `I_c ~ e^{−n/ξ}` with `ξ = −1/(2 ln(1−2p))`.
pub fn ic_decay_length(p: f64) -> f64 {
    -1.0 / (2.0 * (1.0 - 2.0 * p).ln())
}

/// Closed-form `I_c(L:RM)` for Pauli dephasing on a chain:
/// `1 − Σ_groups h₂((1+(1−2p)^n)/2)` with one group per decohered
/// sublattice.
pub fn coherent_info_closed_form(
    chain: &Chain1D,
    spec: &ChannelSpec,
) -> Result<CoherentInfoReport, Error> {
    if !spec.is_pauli() {
        return Err(Error::EstimatorMismatch {
            estimator: "closed_form",
            reason: format!("no closed form for channel kind {:?}", spec.kind),
        });
    }
    let mut value = 1.0;
    for (sites, p) in dephasing_groups(chain, spec)? {
        value -= h2((1.0 + (1.0 - 2.0 * p).powi(sites.len() as i32)) / 2.0);
    }
    Ok(CoherentInfoReport {
        value,
        estimator: "closed_form",
        stderr: None,
        n_traj: 0,
    })
}

/// Decohered site groups and their strengths, one per sublattice in the
/// mask.
fn dephasing_groups(
    chain: &Chain1D,
    spec: &ChannelSpec,
) -> Result<Vec<(Vec<usize>, f64)>, Error> {
    Ok(match spec.mask {
        Mask::Even => vec![(chain.sublattice_a_bulk(), spec.p_a)],
        Mask::Odd => vec![(chain.sublattice_b(), spec.p_b)],
        Mask::Both => vec![
            (chain.sublattice_a_bulk(), spec.p_a),
            (chain.sublattice_b(), spec.p_b),
        ],
        Mask::Edges => {
            return Err(Error::EstimatorMismatch {
                estimator: "closed_form",
                reason: "the edge mask applies to the 2D lattice only".into(),
            });
        }
    })
}

/// Asymptotic (large-N) region value of `I_c(L:RM)` for 1D dephasing at
/// strengths `(p_a, p_b)`: each decohered sublattice destroys one bit of
/// charge information, giving the three regions `{1, 0, −1}`.
pub fn asymptotic_region_1d(p_a: f64, p_b: f64) -> f64 {
    let lost = |p: f64| if p > 0.0 { 1.0 } else { 0.0 };
    1.0 - lost(p_a) - lost(p_b)
}

/// Asymptotic region value of `I_c(L:RM)` for the 2D protocol with edge
/// dephasing `p_edge` and vertex dephasing `p_vertex`. Below the decoding
/// threshold the 1-form charge is learnable; the 0-form charge is learnable
/// only at `p_vertex = 0`, where vertex outcomes are exact.
pub fn asymptotic_region_2d(p_edge: f64, p_vertex: f64, p_threshold: f64) -> f64 {
    let loop_lost = if p_edge > p_threshold { 1.0 } else { 0.0 };
    let vertex_lost = if p_vertex > 0.0 { 1.0 } else { 0.0 };
    1.0 - loop_lost - vertex_lost
}

// ---------------------------------------------------------------------------
// Decoder-based Monte Carlo
// ---------------------------------------------------------------------------

/// `I_c(L:RM) = I_c(L:ERM) − Σ_m p_m H(p_{γ|m})` with the charge-guess
/// entropy estimated by Monte Carlo. Supports Pauli dephasing (environment
/// flips sampled directly) and the symmetry-decoupling channel (per-site
/// outcome statistics folded into the charge bias).
pub fn coherent_info_decoder_mc(
    chain: &Chain1D,
    spec: &ChannelSpec,
    n_samples: u64,
    seed: u64,
) -> Result<CoherentInfoReport, Error> {
    if spec.is_pauli() {
        decoder_mc_pauli(chain, spec, n_samples, seed)
    } else if spec.kind == crate::channels::ChannelKind::Sdc {
        decoder_mc_sdc(chain, spec, n_samples, seed)
    } else {
        Err(Error::EstimatorMismatch {
            estimator: "decoder_mc",
            reason: format!("channel kind {:?} has no decoder model", spec.kind),
        })
    }
}

fn decoder_mc_pauli(
    chain: &Chain1D,
    spec: &ChannelSpec,
    n_samples: u64,
    seed: u64,
) -> Result<CoherentInfoReport, Error> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut value = 1.0;
    let mut var = 0.0;
    for (sites, p) in dephasing_groups(chain, spec)? {
        // The maximum-likelihood guess for the sublattice charge fails iff
        // an odd number of environment flips occurred; H(p_{γ|m}) is
        // outcome-independent, so the entropy of the empirical success rate
        // estimates it.
        let mut successes = 0u64;
        for _ in 0..n_samples {
            let mut flips = 0usize;
            for _ in 0..sites.len() {
                if spec.sample_flip(p, &mut rng)?.is_some() {
                    flips += 1;
                }
            }
            if flips.is_multiple_of(2) {
                successes += 1;
            }
        }
        let n = n_samples as f64;
        let p_hat = successes as f64 / n;
        value -= h2(p_hat);
        // Delta method on h2, with the rate clamped away from the endpoints
        // where the derivative diverges.
        let p_c = p_hat.clamp(0.5 / n, 1.0 - 0.5 / n);
        let dh = ((1.0 - p_c) / p_c).log2();
        var += dh * dh * p_c * (1.0 - p_c) / n;
    }
    Ok(CoherentInfoReport {
        value,
        estimator: "decoder_mc",
        stderr: Some(var.sqrt()),
        n_traj: n_samples,
    })
}

/// Per-site outcome statistics of the symmetry-decoupling channel on a
/// maximally mixed site: the probability of system outcome `m = +1` and the
/// bias `p(e=+1|m) − p(e=−1|m)` of the conditioned environment-charge
/// measurement for each system outcome.
pub fn sdc_site_statistics(spec: &ChannelSpec) -> Result<SdcSiteStats, Error> {
    // Purify the maximally mixed site with a reference qubit (index 1).
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = vec![
        crate::dense::C64::new(s, 0.0),
        crate::dense::C64::new(0.0, 0.0),
        crate::dense::C64::new(0.0, 0.0),
        crate::dense::C64::new(s, 0.0),
    ];
    let mut st = DenseState::from_amplitudes(bell)?;
    st.append_qubits(&spec.env_state())?;
    let env: Vec<usize> = (2..2 + spec.n_env()).collect();
    let mut targets = vec![0usize];
    targets.extend(&env);
    st.apply_unitary(&spec.purified_unitary(0.0)?, &targets)?;
    let charge = spec.transformed_charge(0.0)?;
    let x = PauliOperator::single(st.n_qubits(), 0, PauliKind::X)?;
    let mut p_plus = 0.0;
    let mut bias = [0.0f64; 2];
    for (pm, m, branch) in st.measure_pauli(&x)? {
        if m == 1 {
            p_plus = pm;
        }
        let o = charge.o_for(m).ok_or(Error::EstimatorMismatch {
            estimator: "decoder_mc",
            reason: "channel charge does not decompose over system outcomes".into(),
        })?;
        let mut b = 0.0;
        for (pe, e, _) in branch.measure_hermitian(o, &env)? {
            b += pe * e as f64;
        }
        bias[if m == 1 { 0 } else { 1 }] = b;
    }
    Ok(SdcSiteStats {
        p_plus,
        bias_given_plus: bias[0],
        bias_given_minus: bias[1],
    })
}

#[derive(Clone, Copy, Debug)]
pub struct SdcSiteStats {
    pub p_plus: f64,
    pub bias_given_plus: f64,
    pub bias_given_minus: f64,
}

fn decoder_mc_sdc(
    chain: &Chain1D,
    spec: &ChannelSpec,
    n_samples: u64,
    seed: u64,
) -> Result<CoherentInfoReport, Error> {
    let stats = sdc_site_statistics(spec)?;
    let sites = decohered_sites_1d(chain, spec.mask)?;
    // Sites decouple given the outcomes: the sublattice charge is the
    // product of the per-site environment outcomes, whose conditional
    // distributions have |bias| depending only on the local system outcome.
    // The guess succeeds with probability (1 + prod_i |b(m_i)|)/2, so
    // H(p_{γ|m}) = h2 of that; sample m to average it.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let mut prod = 1.0f64;
        for _ in &sites {
            let b = if rng.random_bool(stats.p_plus) {
                stats.bias_given_plus
            } else {
                stats.bias_given_minus
            };
            prod *= b.abs();
        }
        let h = h2((1.0 + prod) / 2.0);
        sum += h;
        sum_sq += h * h;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) / n;
    Ok(CoherentInfoReport {
        value: 1.0 - mean,
        estimator: "decoder_mc",
        stderr: Some(var.sqrt()),
        n_traj: n_samples,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelKind;

    #[test]
    fn pure_1d_is_one_bit_for_all_sizes() {
        for n in 1..=4 {
            let chain = Chain1D::new(n).unwrap();
            let rep = coherent_info_pure_1d(&chain, TrajectoryMode::Exhaustive).unwrap();
            assert!((rep.value - 1.0).abs() < 1e-12, "N={n}: {}", rep.value);
            assert_eq!(rep.n_traj, 1 << (2 * n - 1));
        }
    }

    #[test]
    fn pure_1d_structural_matches_exhaustive() {
        let chain = Chain1D::new(3).unwrap();
        let ex = coherent_info_pure_1d(&chain, TrajectoryMode::Exhaustive).unwrap();
        let st = coherent_info_pure_1d(
            &chain,
            TrajectoryMode::StructuralVerify {
                passes: 8,
                seed: 11,
            },
        )
        .unwrap();
        assert!((ex.value - st.value).abs() < 1e-12);
        assert_eq!(ex.n_traj, st.n_traj);
    }

    #[test]
    fn pure_2d_is_one_bit() {
        let lat = LiebCylinder2D::new(3, 3).unwrap();
        let rep = coherent_info_pure_2d(
            &lat,
            TrajectoryMode::StructuralVerify {
                passes: 6,
                seed: 3,
            },
        )
        .unwrap();
        assert!((rep.value - 1.0).abs() < 1e-12, "{}", rep.value);
    }

    #[test]
    fn gamma_alone_determines_the_boundary_state() {
        // Group the pure 1D trajectories by (γ_even, γ_odd) and check the
        // boundary density matrix is constant within each class.
        let chain = Chain1D::new(2).unwrap();
        let pc = build_purified_chain(
            &chain,
            &ChannelSpec::z_dephase(0.0, 0.0, Mask::Odd).unwrap(),
        )
        .unwrap();
        let bulk = chain.bulk_sites();
        let mut classes: std::collections::HashMap<(i8, i8), nalgebra::DMatrix<crate::dense::C64>> =
            std::collections::HashMap::new();
        enumerate_x_dense(&pc.state, &bulk, &mut |m, _p, st| {
            let rho = st.partial_trace(&[chain.left(), chain.right()])?;
            let gamma = gamma_1d(&bulk, m);
            match classes.get(&gamma) {
                None => {
                    classes.insert(gamma, rho);
                }
                Some(prev) => assert!((prev - &rho).norm() < 1e-10),
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(classes.len(), 4);
    }

    #[test]
    fn environment_readout_restores_one_bit_for_decomposable_channels() {
        let chain = Chain1D::new(2).unwrap();
        let specs = [
            ChannelSpec::z_dephase(0.3, 0.3, Mask::Odd).unwrap(),
            ChannelSpec::y_dephase(0.2, 0.2, Mask::Both).unwrap(),
            ChannelSpec::swap(Mask::Odd).unwrap(),
            ChannelSpec::sdc(0.3, 0.2, 1.0, Mask::Odd).unwrap(),
            ChannelSpec::sdc(0.8, 0.4, 0.5, Mask::Odd).unwrap(),
        ];
        for spec in specs {
            let rep = coherent_info_with_env(&chain, &spec).unwrap();
            assert!(
                (rep.value - 1.0).abs() < 1e-9,
                "kind {:?}: {}",
                spec.kind,
                rep.value
            );
        }
    }

    #[test]
    fn controlled_hadamard_destroys_env_assisted_information() {
        // At full strength the Hadamard is applied deterministically, the
        // transformed charge anticommutes with the bulk X measurements, and
        // no environment basis recovers it.
        let chain = Chain1D::new(2).unwrap();
        let spec =
            ChannelSpec::controlled_hadamard(std::f64::consts::FRAC_PI_2, Mask::Odd).unwrap();
        let rep = coherent_info_with_env(&chain, &spec).unwrap();
        assert!(rep.value.abs() < 1e-9, "{}", rep.value);
        // At partial strength the environment reading exposes the identity
        // branch, which still carries the charge: I_c(L:ERM) = cos^{2n}θ.
        let theta = 0.6f64;
        let spec = ChannelSpec::controlled_hadamard(theta, Mask::Odd).unwrap();
        let rep = coherent_info_with_env(&chain, &spec).unwrap();
        assert!((rep.value - theta.cos().powi(4)).abs() < 1e-9, "{}", rep.value);
    }

    #[test]
    fn exact_dense_matches_closed_form_for_dephasing() {
        for n in [1usize, 2, 3] {
            let chain = Chain1D::new(n).unwrap();
            for (p_a, p_b, mask) in [
                (0.0, 0.15, Mask::Odd),
                (0.3, 0.0, Mask::Even),
                (0.1, 0.25, Mask::Both),
            ] {
                let spec = ChannelSpec::z_dephase(p_a, p_b, mask).unwrap();
                let exact = coherent_info_exact_dense(&chain, &spec).unwrap();
                let closed = coherent_info_closed_form(&chain, &spec).unwrap();
                assert!(
                    (exact.value - closed.value).abs() < 1e-9,
                    "N={n} mask {mask:?}: {} vs {}",
                    exact.value,
                    closed.value
                );
            }
        }
    }

    #[test]
    fn closed_form_approaches_its_asymptote() {
        // p is kept moderate so the exact value stays far enough above the
        // 1 − h2(·) cancellation floor (~1e-16) for the relative comparison.
        let p = 0.1;
        for n_dec in [20usize, 35, 50] {
            let exact = ic_dephasing_exact(n_dec, p);
            let asym = ic_dephasing_asymptote(n_dec, p);
            assert!((1.0f64 - 2.0 * p).powi(n_dec as i32) < 0.1);
            assert!((exact - asym).abs() / asym < 0.05, "n={n_dec}");
        }
    }

    #[test]
    fn data_processing_inequality_across_estimators() {
        let chain = Chain1D::new(2).unwrap();
        let specs = [
            ChannelSpec::z_dephase(0.2, 0.2, Mask::Odd).unwrap(),
            ChannelSpec::z_dephase(0.15, 0.3, Mask::Both).unwrap(),
            ChannelSpec::sdc(0.4, 0.3, 1.0, Mask::Odd).unwrap(),
            ChannelSpec::controlled_hadamard(0.5, Mask::Odd).unwrap(),
        ];
        for spec in specs {
            let no_env = coherent_info_exact_dense(&chain, &spec).unwrap();
            let with_env = coherent_info_with_env(&chain, &spec).unwrap();
            assert!(
                no_env.value <= with_env.value + 1e-9,
                "kind {:?}: {} > {}",
                spec.kind,
                no_env.value,
                with_env.value
            );
        }
    }

    #[test]
    fn swap_on_both_sublattices_gives_minus_one() {
        // Replacing every bulk qubit leaves both boundaries maximally
        // mixed and uncorrelated, so S_R − S_LR = 1 − 2 = −1 — one might
        // naively expect 0 (the classical record survives), but the record
        // is destroyed together with the phase.
        let chain = Chain1D::new(2).unwrap();
        let spec = ChannelSpec::swap(Mask::Both).unwrap();
        let rep = coherent_info_exact_dense(&chain, &spec).unwrap();
        assert!((rep.value + 1.0).abs() < 1e-9, "{}", rep.value);
    }

    #[test]
    fn sdc_one_sublattice_transmits_no_quantum_information() {
        let chain = Chain1D::new(2).unwrap();
        let spec = ChannelSpec::sdc(0.3, 0.2, 1.0, Mask::Odd).unwrap();
        let rep = coherent_info_exact_dense(&chain, &spec).unwrap();
        assert!(rep.value.abs() < 1e-9, "{}", rep.value);
    }

    #[test]
    fn decoder_mc_agrees_with_closed_form() {
        let chain = Chain1D::new(4).unwrap();
        let spec = ChannelSpec::z_dephase(0.0, 0.12, Mask::Odd).unwrap();
        let mc = coherent_info_decoder_mc(&chain, &spec, 20_000, 42).unwrap();
        let cf = coherent_info_closed_form(&chain, &spec).unwrap();
        let sigma = mc.stderr.unwrap();
        assert!(
            (mc.value - cf.value).abs() < 3.0 * sigma.max(1e-4),
            "{} vs {} (σ={sigma})",
            mc.value,
            cf.value
        );
    }

    #[test]
    fn decoder_mc_sdc_agrees_with_exact_dense() {
        let chain = Chain1D::new(2).unwrap();
        for spec in [
            ChannelSpec::sdc(0.3, 0.2, 1.0, Mask::Odd).unwrap(),
            ChannelSpec::sdc(0.7, 0.9, 0.6, Mask::Odd).unwrap(),
        ] {
            let exact = coherent_info_exact_dense(&chain, &spec).unwrap();
            let mc = coherent_info_decoder_mc(&chain, &spec, 20_000, 7).unwrap();
            let tol = 3.0 * mc.stderr.unwrap().max(1e-6) + 1e-6;
            assert!(
                (mc.value - exact.value).abs() < tol,
                "{:?}: {} vs {}",
                spec,
                mc.value,
                exact.value
            );
        }
    }

    #[test]
    fn trajectory_records_are_consistent() {
        let chain = Chain1D::new(2).unwrap();
        let spec = ChannelSpec::z_dephase(0.0, 0.2, Mask::Odd).unwrap();
        let (rep, recs) = coherent_info_exact_dense_trajectories(&chain, &spec).unwrap();
        assert_eq!(rep.n_traj as usize, recs.len());
        let total: f64 = recs.iter().map(|r| r.p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for r in &recs {
            assert_eq!(r.m.len(), chain.bulk_sites().len());
            assert!(r.gamma_even == 1 || r.gamma_even == -1);
        }
    }

    #[test]
    fn region_classifiers_emit_the_three_plateaus() {
        assert_eq!(asymptotic_region_1d(0.0, 0.0), 1.0);
        assert_eq!(asymptotic_region_1d(0.0, 0.2), 0.0);
        assert_eq!(asymptotic_region_1d(0.1, 0.2), -1.0);
        assert_eq!(asymptotic_region_2d(0.05, 0.0, 0.109), 1.0);
        assert_eq!(asymptotic_region_2d(0.2, 0.0, 0.109), 0.0);
        assert_eq!(asymptotic_region_2d(0.05, 0.1, 0.109), 0.0);
        assert_eq!(asymptotic_region_2d(0.2, 0.1, 0.109), -1.0);
    }

    #[test]
    fn estimator_mismatches_are_typed() {
        let chain = Chain1D::new(2).unwrap();
        let spec = ChannelSpec::swap(Mask::Odd).unwrap();
        assert!(matches!(
            coherent_info_closed_form(&chain, &spec),
            Err(Error::EstimatorMismatch { .. })
        ));
        assert!(matches!(
            coherent_info_decoder_mc(&chain, &spec, 10, 0),
            Err(Error::EstimatorMismatch { .. })
        ));
        let spec = ChannelSpec::z_dephase(0.1, 0.1, Mask::Edges).unwrap();
        assert!(decohered_sites_1d(&chain, spec.mask).is_err());
        let _ = ChannelKind::ZDephase;
    }
}
