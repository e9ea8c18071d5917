//! Strange correlators of decohered cluster states.
//!
//! Two diagnostics probe how much symmetry-protected structure survives a
//! sublattice channel, both built from overlaps with a trivial reference
//! state rather than from entropies:
//!
//! * the **type-II** correlator compares the decohered state against the
//!   all-`|+>` product state with a two-point `Z_i Z_j` twist,
//!   `SC2 = Tr(ρ Z_iZ_j ρ₀ Z_iZ_j) / Tr(ρ ρ₀)`;
//! * the **type-I** correlator conditions on one measurement trajectory `m`
//!   of every site except `i, j` and reads the off-diagonal ratio
//!   `SC1 = Tr(ρ Z_iZ_j ρ_m) / Tr(ρ ρ_m)`, where `ρ_m` projects onto the
//!   observed `X`-basis outcome string.
//!
//! On the 2D cylinder the type-I correlator of a `Z`-dephased cluster state
//! maps onto a two-point function of a random-bond Ising model whose bond
//! signs are the edge outcomes, at coupling `β = atanh(1−2p)`; the module
//! exposes that route, an independent exact loop-expansion oracle for small
//! cylinders, and the perturbed-coupling variant.  The block-decomposition
//! route [`ic_from_sc`] turns per-trajectory correlators and charge
//! distributions back into the coherent information of the boundary pair.

use nalgebra::DMatrix;

use crate::channels::{ChannelKind, ChannelSpec};
use crate::dense::{C64, PURE_CAP};
use crate::error::Error;
use crate::gf2::BitVec;
use crate::h2;
use crate::lattice::LiebCylinder2D;
use crate::pauli::{PauliKind, PauliOperator};
use crate::statmech::{correlation, CorrMethod, Correlation, RBIMInstance};

/// Which strange correlator a report describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScKind {
    TypeI,
    TypeII,
}

/// One evaluated strange correlator.
#[derive(Clone, Debug)]
pub struct StrangeCorrelatorReport {
    pub kind: ScKind,
    pub sites: (usize, usize),
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Evaluation route for the type-II correlator.
#[derive(Clone, Copy, Debug)]
pub enum Type2Method {
    /// Kraus-string enumeration on the dense periodic chain.
    Dense,
    /// Closed forms (diluted symmetry-decoupling channel and `Z`-dephasing
    /// on the even sublattice only).
    ClosedForm,
}

/// Evaluation route for the 2D type-I correlator.
#[derive(Clone, Copy, Debug)]
pub enum Type2D {
    /// Random-bond Ising two-point function at `β = atanh(1−2p)` with bond
    /// signs given by the edge outcomes.
    IsingMap,
    /// Exact loop expansion over the cycle space of the vertex graph, with
    /// every term's sign fixed by a stabilizer-backend expectation value.
    ExactExpansion,
}

// ---------------------------------------------------------------------------
// Dense periodic-chain backend
// ---------------------------------------------------------------------------

/// Amplitudes of the periodic cluster state on `2·l_cells` sites:
/// `|+>^{⊗n}` with a `CZ` on every neighbouring pair of the ring.
pub fn periodic_chain_amplitudes(l_cells: usize) -> Result<Vec<C64>, Error> {
    let n = 2 * l_cells;
    if l_cells == 0 {
        return Err(Error::InvalidLattice("need at least one unit cell".into()));
    }
    if n > PURE_CAP {
        return Err(Error::SizeCap {
            n_qubits: n,
            cap: PURE_CAP,
            kind: "dense statevector",
        });
    }
    let dim = 1usize << n;
    let norm = 1.0 / (dim as f64).sqrt();
    let amps = (0..dim)
        .map(|x| {
            let mut pairs = 0u32;
            for k in 0..n {
                pairs += (x >> k & 1) as u32 * (x >> ((k + 1) % n) & 1) as u32;
            }
            C64::new(if pairs.is_multiple_of(2) { norm } else { -norm }, 0.0)
        })
        .collect();
    Ok(amps)
}

/// Even sites of the periodic chain — the sublattice the channel acts on in
/// every chain-level routine of this module.
fn even_sites(l_cells: usize) -> Vec<usize> {
    (0..l_cells).map(|k| 2 * k).collect()
}

fn apply_one_site(amps: &mut [C64], q: usize, op: &DMatrix<C64>) {
    let bit = 1usize << q;
    for x in 0..amps.len() {
        if x & bit == 0 {
            let (a0, a1) = (amps[x], amps[x | bit]);
            amps[x] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
            amps[x | bit] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
        }
    }
}

/// In-place `(1 + m·X_q)/2` projection.
fn project_x(amps: &mut [C64], q: usize, m: i8) {
    let bit = 1usize << q;
    let s = m as f64;
    for x in 0..amps.len() {
        if x & bit == 0 {
            let (a0, a1) = (amps[x], amps[x | bit]);
            let v = (a0 + a1 * s) * C64::new(0.5, 0.0);
            amps[x] = v;
            amps[x | bit] = v * s;
        }
    }
}

/// Visit `M|ψ>` for every Kraus string `M` over `sites`.
fn for_each_kraus_string(
    amps: &[C64],
    sites: &[usize],
    ops: &[DMatrix<C64>],
    f: &mut impl FnMut(&[C64]),
) {
    match sites.split_first() {
        None => f(amps),
        Some((&q, rest)) => {
            for op in ops {
                let mut next = amps.to_vec();
                apply_one_site(&mut next, q, op);
                for_each_kraus_string(&next, rest, ops, f);
            }
        }
    }
}

/// `<+…+| Z_i Z_j |φ>` up to the common `2^{−n/2}` factor dropped from both
/// numerator and denominator of a ratio; pass `None` for a plain overlap.
fn plus_overlap(amps: &[C64], twist: Option<(usize, usize)>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, &a) in amps.iter().enumerate() {
        let sign = match twist {
            Some((i, j)) => {
                let par = (x >> i & 1) ^ (x >> j & 1);
                if par == 1 {
                    -1.0
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        acc += a * sign;
    }
    acc
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<(), Error> {
    for q in [i, j] {
        if q >= n {
            return Err(Error::IndexOutOfRange {
                index: q,
                n_qubits: n,
            });
        }
    }
    if i == j {
        return Err(Error::DuplicateTarget(i));
    }
    Ok(())
}

fn check_outcomes(m: &[i8], expect: usize, what: &str) -> Result<(), Error> {
    if m.len() != expect {
        return Err(Error::SizeMismatch(expect, m.len()));
    }
    if m.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Consistency(format!(
            "{what} outcomes must be ±1"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Type-II strange correlator
// ---------------------------------------------------------------------------

/// Type-II strange correlator of the periodic chain with the channel acting
/// on the even sublattice.  `p` is the per-site strength of the dephasing
/// families; the diluted symmetry-decoupling channel reads its own `q`/`phi`.
///
/// The closed forms cover `Z`-dephasing (exactly 1 on either sublattice) and
/// the diluted symmetry-decoupling channel:
/// 1 on the odd sublattice, and the separation-independent value
/// `[(1+q·sin2φ)^{L−2}(1−q·sin2φ)² + (1−q)^L] / [(1+q·sin2φ)^L + (1−q)^L]`
/// on the even one.
pub fn type2_sc(
    spec: &ChannelSpec,
    p: f64,
    l_cells: usize,
    i: usize,
    j: usize,
    method: Type2Method,
) -> Result<StrangeCorrelatorReport, Error> {
    let n = 2 * l_cells;
    check_pair(n.max(1), i, j)?;
    let value = match method {
        Type2Method::Dense => {
            let base = periodic_chain_amplitudes(l_cells)?;
            let kraus = spec.kraus(p)?;
            let (mut num, mut den) = (0.0, 0.0);
            for_each_kraus_string(&base, &even_sites(l_cells), kraus.ops(), &mut |phi| {
                num += plus_overlap(phi, Some((i, j))).norm_sqr();
                den += plus_overlap(phi, None).norm_sqr();
            });
            num / den
        }
        Type2Method::ClosedForm => {
            if i % 2 != j % 2 {
                return Err(Error::EstimatorMismatch {
                    estimator: "type2_closed_form",
                    reason: "twist sites must sit on one sublattice".into(),
                });
            }
            match (spec.kind, i % 2) {
                (ChannelKind::ZDephase, _) => 1.0,
                // twist on the undisturbed sublattice
                (ChannelKind::Sdc, 1) => 1.0,
                (ChannelKind::Sdc, _) => {
                    let a = spec.q * (2.0 * spec.phi).sin();
                    let b = 1.0 - spec.q;
                    let l = l_cells as i32;
                    ((1.0 + a).powi(l - 2) * (1.0 - a).powi(2) + b.powi(l))
                        / ((1.0 + a).powi(l) + b.powi(l))
                }
                _ => {
                    return Err(Error::EstimatorMismatch {
                        estimator: "type2_closed_form",
                        reason: format!("no closed form for {:?}", spec.kind),
                    })
                }
            }
        }
    };
    // A ratio of state overlaps, not an expectation of a bounded
    // observable: it can exceed 1 in magnitude (e.g. for φ > π/2, where the
    // effective bias turns negative), so only finiteness is checked.
    if !value.is_finite() {
        return Err(Error::Consistency(format!(
            "strange correlator is not finite: {value}"
        )));
    }
    Ok(StrangeCorrelatorReport {
        kind: ScKind::TypeII,
        sites: (i, j),
        value,
        stderr: None,
    })
}

// ---------------------------------------------------------------------------
// Type-I strange correlator, 1D
// ---------------------------------------------------------------------------

/// Dense trajectory-resolved type-I correlator on the periodic chain.  The
/// channel acts on the even sublattice; `m` holds one `X`-basis outcome per
/// site (entries at `i`, `j` are ignored).
pub fn type1_sc_1d(
    spec: &ChannelSpec,
    p: f64,
    l_cells: usize,
    m: &[i8],
    i: usize,
    j: usize,
) -> Result<f64, Error> {
    let n = 2 * l_cells;
    check_pair(n.max(1), i, j)?;
    check_outcomes(m, n, "trajectory")?;
    let base = periodic_chain_amplitudes(l_cells)?;
    let kraus = spec.kraus(p)?;
    let measured: Vec<usize> = (0..n).filter(|&q| q != i && q != j).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for_each_kraus_string(&base, &even_sites(l_cells), kraus.ops(), &mut |phi| {
        let mut proj = phi.to_vec();
        for &q in &measured {
            project_x(&mut proj, q, m[q]);
        }
        for (x, a) in proj.iter().enumerate() {
            let par = (x >> i & 1) ^ (x >> j & 1);
            let w = a.norm_sqr();
            den += w;
            num += if par == 1 { -w } else { w };
        }
    });
    if den <= f64::EPSILON * base.len() as f64 {
        return Err(Error::ZeroProbabilityBranch(den));
    }
    Ok(num / den)
}

/// Closed form of [`type1_sc_1d`] for `Z`-dephasing of strength `p` on the
/// even sublattice with both probe sites odd.  Only two operator strings
/// connect `Z_i` to `Z_j` on the ring — one along each arc, supported on the
/// even sites it crosses — so with arc outcome products `a₁, a₂` and arc
/// lengths `n₁, n₂ = L − n₁`:
/// `SC1 = [a₁(1−2p)^{n₁} + a₂(1−2p)^{n₂}] / [1 + a₁a₂(1−2p)^L]`.
pub fn type1_sc_arc_1d(
    l_cells: usize,
    p: f64,
    m: &[i8],
    i: usize,
    j: usize,
) -> Result<f64, Error> {
    let n = 2 * l_cells;
    check_pair(n.max(1), i, j)?;
    check_outcomes(m, n, "trajectory")?;
    if i.is_multiple_of(2) || j.is_multiple_of(2) {
        return Err(Error::EstimatorMismatch {
            estimator: "type1_arc",
            reason: "arc form needs both probe sites on the odd sublattice".into(),
        });
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ParamOutOfRange {
            name: "p",
            value: p,
        });
    }
    let mut arc = Vec::new();
    let mut q = (i + 1) % n;
    while q != (j + 1) % n {
        arc.push(q);
        q = (q + 2) % n;
    }
    let a1: f64 = arc.iter().map(|&q| m[q] as f64).product();
    let a2: f64 = even_sites(l_cells)
        .iter()
        .filter(|q| !arc.contains(q))
        .map(|&q| m[q] as f64)
        .product();
    let x = 1.0 - 2.0 * p;
    let (n1, n2) = (arc.len() as i32, (l_cells - arc.len()) as i32);
    let den = 1.0 + a1 * a2 * x.powi(n1 + n2);
    if den.abs() <= f64::EPSILON {
        return Err(Error::ZeroProbabilityBranch(den));
    }
    Ok((a1 * x.powi(n1) + a2 * x.powi(n2)) / den)
}

// ---------------------------------------------------------------------------
// Type-I strange correlator, 2D
// ---------------------------------------------------------------------------

fn check_edges_2d(lat: &LiebCylinder2D, m_edges: &[i8], vi: usize, vj: usize) -> Result<(), Error> {
    check_pair(lat.n_vertices(), vi, vj)?;
    check_outcomes(m_edges, lat.n_edges(), "edge")?;
    Ok(())
}

/// Random-bond Ising instance matching one edge-outcome trajectory: spins on
/// vertices, one bond per edge with sign `m_e`, Nishimori coupling from `p`.
pub fn trajectory_instance(
    lat: &LiebCylinder2D,
    p: f64,
    lambda: f64,
    m_edges: &[i8],
) -> Result<RBIMInstance, Error> {
    RBIMInstance::new(lat.lx(), lat.ly(), p, lambda, m_edges.to_vec())
}

/// Trajectory-resolved type-I correlator of the `Z`-dephased 2D cluster
/// state between two vertices.  `m_edges` lists the `X`-outcomes of all edge
/// qubits in lattice order (horizontal block, then vertical block); the
/// vertex outcomes drop out of the ratio.
pub fn type1_sc_2d(
    lat: &LiebCylinder2D,
    p: f64,
    m_edges: &[i8],
    vi: usize,
    vj: usize,
    method: Type2D,
) -> Result<f64, Error> {
    check_edges_2d(lat, m_edges, vi, vj)?;
    match method {
        Type2D::IsingMap => {
            let inst = trajectory_instance(lat, p, 0.0, m_edges)?;
            let corr = if inst.n_spins() <= 16 {
                correlation(&inst, vi, vj, CorrMethod::Exact)?
            } else {
                correlation(&inst, vi, vj, CorrMethod::TransferMatrix)?
            };
            Ok(corr.value)
        }
        Type2D::ExactExpansion => type1_sc_2d_expansion(lat, p, m_edges, vi, vj),
    }
}

/// Largest cycle rank the loop-expansion oracle enumerates (`2^rank` terms).
pub const MAX_CYCLE_RANK: usize = 20;

/// Independent oracle for [`type1_sc_2d`]: expand both traces of the ratio
/// in `X`-operator strings.  The only strings with non-zero cluster-state
/// expectation are cycles of the vertex graph (denominator) and open strings
/// with boundary `{vi, vj}` (numerator); each carries weight
/// `∏_e (1−2p)·m_e` over its edges and a sign read off the stabilizer
/// backend rather than assumed.
fn type1_sc_2d_expansion(
    lat: &LiebCylinder2D,
    p: f64,
    m_edges: &[i8],
    vi: usize,
    vj: usize,
) -> Result<f64, Error> {
    let rank = (lat.lx() - 1) * lat.ly() + 1;
    if rank > MAX_CYCLE_RANK {
        return Err(Error::SizeCap {
            n_qubits: rank,
            cap: MAX_CYCLE_RANK,
            kind: "loop-expansion cycle rank",
        });
    }
    let n = lat.n_qubits();
    let nv = lat.n_vertices();
    let state = lat.stabilizer_state();
    // Cycle basis: every plaquette boundary plus one winding ring.
    let mut basis: Vec<BitVec> = Vec::with_capacity(rank);
    for c in 0..lat.lx() - 1 {
        for y in 0..lat.ly() {
            let mut b = BitVec::zeros(n);
            for e in lat.plaquette_edges(c, y) {
                b.flip(e);
            }
            basis.push(b);
        }
    }
    let mut ring = BitVec::zeros(n);
    for y in 0..lat.ly() {
        ring.flip(lat.vedge(0, y));
    }
    basis.push(ring);
    // Open reference string: horizontal leg at vi's row, vertical leg at
    // vj's column.
    let (ci, yi) = (vi / lat.ly(), vi % lat.ly());
    let (cj, yj) = (vj / lat.ly(), vj % lat.ly());
    let mut path = BitVec::zeros(n);
    for e in lat.horizontal_path(ci, cj, yi) {
        path.flip(e);
    }
    for y in yi.min(yj)..yi.max(yj) {
        path.flip(lat.vedge(cj, y));
    }
    let weight = |edges: &BitVec| -> f64 {
        edges
            .iter_ones()
            .map(|e| (1.0 - 2.0 * p) * m_edges[e - nv] as f64)
            .product()
    };
    let term = |edges: &BitVec, twist: bool| -> Result<f64, Error> {
        let mut sites: Vec<(usize, PauliKind)> =
            edges.iter_ones().map(|e| (e, PauliKind::X)).collect();
        if twist {
            sites.push((vi, PauliKind::Z));
            sites.push((vj, PauliKind::Z));
        }
        let op = PauliOperator::from_sites(n, &sites)?;
        Ok(match state.expectation(&op)? {
            Some(s) => s as f64 * weight(edges),
            None => 0.0,
        })
    };
    let (mut num, mut den) = (0.0, 0.0);
    for subset in 0u32..1 << rank {
        let mut cycle = BitVec::zeros(n);
        for (k, b) in basis.iter().enumerate() {
            if subset >> k & 1 == 1 {
                cycle.xor_assign(b);
            }
        }
        den += term(&cycle, false)?;
        cycle.xor_assign(&path);
        num += term(&cycle, true)?;
    }
    if den.abs() <= f64::EPSILON {
        return Err(Error::ZeroProbabilityBranch(den));
    }
    Ok(num / den)
}

/// Type-I correlator of the weakly perturbed 2D cluster state: same Ising
/// two-point function, with every coupling moved off the Nishimori value by
/// the perturbation strength `lambda`.
pub fn perturbed_type1_sc(
    lat: &LiebCylinder2D,
    p: f64,
    lambda: f64,
    m_edges: &[i8],
    vi: usize,
    vj: usize,
    method: CorrMethod,
) -> Result<Correlation, Error> {
    if lambda < 0.0 {
        return Err(Error::ParamOutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    check_edges_2d(lat, m_edges, vi, vj)?;
    let inst = trajectory_instance(lat, p, lambda, m_edges)?;
    correlation(&inst, vi, vj, method)
}

// ---------------------------------------------------------------------------
// Decay-length fit
// ---------------------------------------------------------------------------

/// Exponential decay length fitted from `(separation, SC)` samples.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub xi: f64,
    /// ±2·stderr band mapped through the slope.
    pub ci: (f64, f64),
    pub n_points: usize,
}

/// Least-squares fit of `ln|SC|` against separation.  Values at or below
/// ten machine epsilons sit in the cancellation floor of the dense backends
/// and are excluded; a non-negative slope reports an infinite length.
pub fn fit_decay_length(separations: &[f64], values: &[f64]) -> Result<DecayFit, Error> {
    if separations.len() != values.len() {
        return Err(Error::SizeMismatch(separations.len(), values.len()));
    }
    let pts: Vec<(f64, f64)> = separations
        .iter()
        .zip(values)
        .filter(|(_, &v)| v.abs() > 10.0 * f64::EPSILON)
        .map(|(&s, &v)| (s, v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EstimatorMismatch {
            estimator: "decay_fit",
            reason: format!("{} usable points, need at least 2", pts.len()),
        });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let var = sxx - sx * sx / n;
    if var <= 0.0 {
        return Err(Error::EstimatorMismatch {
            estimator: "decay_fit",
            reason: "separations are all equal".into(),
        });
    }
    let slope = (sxy - sx * sy / n) / var;
    let intercept = (sy - slope * sx) / n;
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if pts.len() > 2 {
        (ss_res / (n - 2.0) / var).sqrt()
    } else {
        0.0
    };
    let xi_of = |b: f64| if b < 0.0 { -1.0 / b } else { f64::INFINITY };
    Ok(DecayFit {
        xi: xi_of(slope),
        ci: (xi_of(slope - 2.0 * se), xi_of(slope + 2.0 * se)),
        n_points: pts.len(),
    })
}

// ---------------------------------------------------------------------------
// Coherent information from strange correlators
// ---------------------------------------------------------------------------

/// One symmetry-charge sector of the boundary pair in a fixed trajectory:
/// its Born weight, its diagonal in the charge eigenbasis (normalized inside
/// the block), and the normalized off-diagonal element the correlator
/// controls.
#[derive(Clone, Copy, Debug)]
pub struct ChargeBlock {
    pub p: f64,
    pub diag: (f64, f64),
    pub offdiag: f64,
}

impl ChargeBlock {
    /// Strange-correlator reading of the block, `SC = 2·offdiag`.
    pub fn sc(&self) -> f64 {
        2.0 * self.offdiag
    }

    fn entropy(&self) -> f64 {
        let (d0, d1) = self.diag;
        let gap = ((d0 - d1).powi(2) + 4.0 * self.offdiag * self.offdiag).sqrt();
        h2((1.0 + gap) / 2.0)
    }
}

/// Block data of one measurement trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryBlocks {
    pub p_m: f64,
    pub blocks: Vec<ChargeBlock>,
}

/// Result of the block-decomposition route.
#[derive(Clone, Copy, Debug)]
pub struct IcFromScReport {
    /// Coherent information between one boundary and the rest, in bits.
    pub value: f64,
    /// True when some block's diagonal asymmetry exceeded `1e-6` and the
    /// full block entropies were used instead of `h₂((1+SC)/2)`.
    pub dense_fallback: bool,
    pub max_diag_asymmetry: f64,
}

/// Assemble the coherent information from per-trajectory charge blocks:
/// each trajectory contributes `2 − Σ_b p_b S(ρ_b) − H({p_b}) − S(ρ_L)`,
/// weighted by its Born probability.  When every block has an equal
/// diagonal, `S(ρ_b) = h₂((1+SC_b)/2)` and `S(ρ_L) = 1`; otherwise the
/// entropies are taken from the blocks themselves and the report is flagged.
pub fn ic_from_sc(trajectories: &[TrajectoryBlocks]) -> Result<IcFromScReport, Error> {
    const DIAG_TOL: f64 = 1e-6;
    let total: f64 = trajectories.iter().map(|t| t.p_m).sum();
    if trajectories.is_empty() || (total - 1.0).abs() > 1e-6 {
        return Err(Error::Consistency(format!(
            "trajectory probabilities sum to {total}"
        )));
    }
    let mut value = 0.0;
    let mut max_asym = 0.0f64;
    for traj in trajectories {
        if traj.p_m < 0.0 {
            return Err(Error::ParamOutOfRange {
                name: "p_m",
                value: traj.p_m,
            });
        }
        let pb: f64 = traj.blocks.iter().map(|b| b.p).sum();
        if (pb - 1.0).abs() > 1e-6 {
            return Err(Error::Consistency(format!(
                "charge-sector probabilities sum to {pb}"
            )));
        }
        let mut asym = 0.0f64;
        for b in &traj.blocks {
            if b.p < -1e-12 || b.sc().abs() > 1.0 + 1e-9 {
                return Err(Error::Consistency(
                    "charge block is not a density operator".into(),
                ));
            }
            if b.p > DIAG_TOL {
                asym = asym.max((b.diag.0 - b.diag.1).abs());
            }
        }
        max_asym = max_asym.max(asym);
        let h_charge: f64 = traj
            .blocks
            .iter()
            .filter(|b| b.p > 0.0)
            .map(|b| -b.p * b.p.log2())
            .sum();
        let (mut s_blocks, mut p_left_up) = (0.0, 0.0);
        for b in traj.blocks.iter().filter(|b| b.p > 0.0) {
            s_blocks += b.p
                * if asym <= DIAG_TOL {
                    h2((1.0 + b.sc().clamp(-1.0, 1.0)) / 2.0)
                } else {
                    b.entropy()
                };
            p_left_up += b.p * b.diag.0;
        }
        let s_left = if asym <= DIAG_TOL { 1.0 } else { h2(p_left_up) };
        value += traj.p_m * (2.0 - s_blocks - h_charge - s_left);
    }
    Ok(IcFromScReport {
        value,
        dense_fallback: max_asym > DIAG_TOL,
        max_diag_asymmetry: max_asym,
    })
}

/// Split an (unnormalized) two-qubit boundary density operator into its two
/// charge blocks.  The input is given in the computational basis with the
/// left qubit first; the charge eigenbasis is the `X` basis, the sectors are
/// labelled by the product charge `X_L X_R = ±1`, and within each block the
/// first basis vector carries `X_L = +1`.
pub fn charge_blocks_from_density(rho: &DMatrix<C64>) -> Result<[ChargeBlock; 2], Error> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::SizeMismatch(4, rho.nrows().max(rho.ncols())));
    }
    let trace = (0..4).map(|k| rho[(k, k)].re).sum::<f64>();
    if trace <= 0.0 {
        return Err(Error::Consistency("density operator has no weight".into()));
    }
    // Rotate to the X basis with H⊗H: H2[i][j] = (−1)^{popcount(i&j)}/2.
    let h2m = DMatrix::from_fn(4, 4, |r, c| {
        C64::new(
            0.5 * if (r & c).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            },
            0.0,
        )
    });
    let rx = &h2m * rho * &h2m;
    // Sector bases: X_LX_R = +1 on {|++⟩, |−−⟩} = indices {0, 3};
    // X_LX_R = −1 on {|−+⟩? → X_L=+1 first} = indices {2, 1}.
    let leakage = [(0, 1), (0, 2), (3, 1), (3, 2)]
        .iter()
        .map(|&(a, b)| rx[(a, b)].norm())
        .fold(0.0f64, f64::max);
    if leakage > 1e-8 * trace {
        return Err(Error::Consistency(format!(
            "cross-sector coherence {leakage:.3e} breaks the charge split"
        )));
    }
    let block = |a: usize, b: usize| -> ChargeBlock {
        let p = rx[(a, a)].re + rx[(b, b)].re;
        if p <= 1e-12 * trace {
            return ChargeBlock {
                p: 0.0,
                diag: (0.5, 0.5),
                offdiag: 0.0,
            };
        }
        ChargeBlock {
            p: p / trace,
            diag: (rx[(a, a)].re / p, rx[(b, b)].re / p),
            offdiag: rx[(a, b)].re / p,
        }
    };
    Ok([block(0, 3), block(2, 1)])
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Mask;
    use crate::lattice::Chain1D;
    use crate::protocol::{coherent_info_closed_form, decohered_sites_1d};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sdc_spec(theta: f64, phi: f64, q: f64) -> ChannelSpec {
        ChannelSpec::sdc(theta, phi, q, Mask::Even).unwrap()
    }

    #[test]
    fn type2_closed_form_is_one_without_dilution_or_rotation() {
        for l in [3, 5, 8] {
            for (q, phi) in [(0.0, 0.8), (0.7, 0.0)] {
                let r = type2_sc(&sdc_spec(0.5, phi, q), 0.0, l, 0, 4, Type2Method::ClosedForm)
                    .unwrap();
                assert!((r.value - 1.0).abs() < 1e-12, "q={q} phi={phi}: {}", r.value);
            }
        }
    }

    #[test]
    fn type2_dense_matches_closed_form_on_the_disturbed_sublattice() {
        let spec = sdc_spec(0.7, 0.5, 0.6);
        let expect = type2_sc(&spec, 0.0, 6, 0, 4, Type2Method::ClosedForm)
            .unwrap()
            .value;
        for (i, j) in [(0, 4), (2, 8), (0, 6)] {
            let dense = type2_sc(&spec, 0.0, 6, i, j, Type2Method::Dense)
                .unwrap()
                .value;
            assert!(
                (dense - expect).abs() < 1e-10,
                "sites ({i},{j}): dense {dense} vs closed {expect}"
            );
        }
        // the disturbed-sublattice value is genuinely below one here
        assert!(expect < 0.999);
    }

    #[test]
    fn type2_is_one_on_the_undisturbed_sublattice() {
        for spec in [
            sdc_spec(0.7, 0.5, 0.6),
            sdc_spec(1.1, 0.9, 1.0),
            ChannelSpec::z_dephase(0.3, 0.3, Mask::Even).unwrap(),
        ] {
            for (i, j) in [(1, 5), (3, 9)] {
                let dense = type2_sc(&spec, 0.3, 5, i, j, Type2Method::Dense)
                    .unwrap()
                    .value;
                assert!(
                    (dense - 1.0).abs() < 1e-9,
                    "{:?} sites ({i},{j}): {dense}",
                    spec.kind
                );
            }
        }
    }

    #[test]
    fn type2_dephasing_is_one_on_both_sublattices() {
        let spec = ChannelSpec::z_dephase(0.25, 0.25, Mask::Even).unwrap();
        for (i, j) in [(0, 4), (1, 7)] {
            let dense = type2_sc(&spec, 0.25, 5, i, j, Type2Method::Dense)
                .unwrap()
                .value;
            assert!((dense - 1.0).abs() < 1e-10);
            let closed = type2_sc(&spec, 0.25, 5, i, j, Type2Method::ClosedForm)
                .unwrap()
                .value;
            assert_eq!(closed, 1.0);
        }
    }

    #[test]
    fn type2_closed_form_rejects_unsupported_channels() {
        let spec = ChannelSpec::swap(Mask::Even).unwrap();
        assert!(matches!(
            type2_sc(&spec, 0.0, 4, 0, 2, Type2Method::ClosedForm),
            Err(Error::EstimatorMismatch { .. })
        ));
        assert!(matches!(
            type2_sc(&sdc_spec(0.3, 0.2, 0.5), 0.0, 4, 0, 3, Type2Method::ClosedForm),
            Err(Error::EstimatorMismatch { .. })
        ));
    }

    #[test]
    fn type1_dense_matches_the_arc_form() {
        let l = 5;
        let spec = ChannelSpec::z_dephase(0.15, 0.15, Mask::Even).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..4 {
            let m: Vec<i8> = (0..2 * l)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            for (i, j) in [(1, 5), (1, 7), (3, 9)] {
                let dense = type1_sc_1d(&spec, 0.15, l, &m, i, j).unwrap();
                let arc = type1_sc_arc_1d(l, 0.15, &m, i, j).unwrap();
                assert!(
                    (dense - arc).abs() < 1e-10,
                    "sites ({i},{j}), m {m:?}: dense {dense} vs arc {arc}"
                );
                assert!(dense.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn type1_is_a_sign_at_zero_noise() {
        let l = 4;
        let spec = ChannelSpec::z_dephase(0.0, 0.0, Mask::Even).unwrap();
        let all_plus = vec![1i8; 2 * l];
        assert!((type1_sc_1d(&spec, 0.0, l, &all_plus, 1, 5).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut seen = 0;
        while seen < 6 {
            let m: Vec<i8> = (0..2 * l)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            match type1_sc_1d(&spec, 0.0, l, &m, 1, 5) {
                Ok(v) => {
                    assert!((v.abs() - 1.0).abs() < 1e-9, "m {m:?}: {v}");
                    seen += 1;
                }
                // half the outcome strings are Born-impossible on the pure state
                Err(Error::ZeroProbabilityBranch(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn type1_decay_length_matches_the_dephasing_scale() {
        let (l, p) = (40, 0.2);
        let m = vec![1i8; 2 * l];
        let seps: Vec<f64> = (1..=6).map(|n| n as f64).collect();
        let vals: Vec<f64> = (1..=6)
            .map(|n| type1_sc_arc_1d(l, p, &m, 1, 2 * n + 1).unwrap())
            .collect();
        for (n, v) in seps.iter().zip(&vals) {
            assert!((v - (1.0f64 - 2.0 * p).powf(*n)).abs() < 1e-7);
        }
        let fit = fit_decay_length(&seps, &vals).unwrap();
        let xi = 1.0 / (1.0 / (1.0 - 2.0 * p)).ln();
        assert!((fit.xi - xi).abs() < 1e-6, "fit {} vs {}", fit.xi, xi);
        assert_eq!(fit.n_points, 6);
    }

    #[test]
    fn rbim_bonds_line_up_with_lattice_edges() {
        let lat = LiebCylinder2D::new(4, 3).unwrap();
        let inst = trajectory_instance(&lat, 0.1, 0.0, &vec![1i8; lat.n_edges()]).unwrap();
        assert_eq!(inst.n_bonds(), lat.n_edges());
        for b in 0..inst.n_bonds() {
            let ends = inst.bond_endpoints(b);
            let (a, c) = lat.edge_endpoints(lat.n_vertices() + b).unwrap();
            assert_eq!((ends.0.min(ends.1), ends.0.max(ends.1)), (a.min(c), a.max(c)));
        }
    }

    #[test]
    fn ising_map_matches_the_loop_expansion_oracle() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = 0.12;
        let mut trajectories = vec![vec![1i8; lat.n_edges()]];
        trajectories.push(
            (0..lat.n_edges())
                .map(|_| if rng.random_bool(p) { -1 } else { 1 })
                .collect(),
        );
        for m in &trajectories {
            for (vi, vj) in [
                (lat.vertex(0, 1), lat.vertex(3, 2)),
                (lat.vertex(1, 0), lat.vertex(2, 3)),
            ] {
                let ising = type1_sc_2d(&lat, p, m, vi, vj, Type2D::IsingMap).unwrap();
                let oracle = type1_sc_2d(&lat, p, m, vi, vj, Type2D::ExactExpansion).unwrap();
                assert!(
                    (ising - oracle).abs() < 1e-9,
                    "({vi},{vj}): ising {ising} vs loops {oracle}"
                );
            }
        }
    }

    #[test]
    fn perturbation_reduces_to_the_plain_map_at_zero_strength() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let m: Vec<i8> = (0..lat.n_edges())
            .map(|_| if rng.random_bool(0.1) { -1 } else { 1 })
            .collect();
        let (vi, vj) = (lat.vertex(0, 0), lat.vertex(3, 1));
        let plain = type1_sc_2d(&lat, 0.1, &m, vi, vj, Type2D::IsingMap).unwrap();
        let pert = perturbed_type1_sc(&lat, 0.1, 0.0, &m, vi, vj, CorrMethod::Exact).unwrap();
        assert!((plain - pert.value).abs() < 1e-12);
    }

    #[test]
    fn perturbation_biases_the_correlator_ferromagnetically() {
        let lat = LiebCylinder2D::new(6, 6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let p = 0.05;
        let m: Vec<i8> = (0..lat.n_edges())
            .map(|_| if rng.random_bool(p) { -1 } else { 1 })
            .collect();
        let (vi, vj) = (lat.vertex(0, 2), lat.vertex(5, 2));
        let base = perturbed_type1_sc(&lat, p, 0.0, &m, vi, vj, CorrMethod::TransferMatrix)
            .unwrap()
            .value;
        let biased = perturbed_type1_sc(&lat, p, 0.1, &m, vi, vj, CorrMethod::TransferMatrix)
            .unwrap()
            .value;
        assert!(biased > base, "biased {biased} vs base {base}");
    }

    #[test]
    fn strong_noise_with_weak_perturbation_stays_disordered() {
        let lat = LiebCylinder2D::new(6, 6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let p = 0.45;
        let m: Vec<i8> = (0..lat.n_edges())
            .map(|_| if rng.random_bool(p) { -1 } else { 1 })
            .collect();
        let corr = perturbed_type1_sc(
            &lat,
            p,
            0.1,
            &m,
            lat.vertex(0, 0),
            lat.vertex(5, 3),
            CorrMethod::TransferMatrix,
        )
        .unwrap();
        assert!(corr.value.abs() < 0.05, "correlator {}", corr.value);
    }

    /// Born-weighted trajectory averages equal flat averages over
    /// independent Nishimori bond signs: the partition function of one bond
    /// configuration is itself a sum of independent-disorder weights over
    /// its gauge orbit, so for any gauge-invariant observable the two
    /// summations coincide term by term.
    #[test]
    fn born_weights_equal_independent_disorder_averaging() {
        let (lx, ly, p) = (3usize, 3usize, 0.109);
        let n_bonds = (lx - 1) * ly + lx * ly;
        let beta = (1.0f64 - 2.0 * p).atanh();
        let (mut born_num, mut born_den) = (0.0, 0.0);
        let (mut iid_num, mut iid_den) = (0.0, 0.0);
        let mut log_zs = Vec::with_capacity(1 << n_bonds);
        let mut obs = Vec::with_capacity(1 << n_bonds);
        let mut iid_w = Vec::with_capacity(1 << n_bonds);
        for cfg in 0u32..1 << n_bonds {
            let bonds: Vec<i8> = (0..n_bonds)
                .map(|b| if cfg >> b & 1 == 1 { -1 } else { 1 })
                .collect();
            let n_flipped = cfg.count_ones() as f64;
            let inst = RBIMInstance::new(lx, ly, p, 0.0, bonds).unwrap();
            let corr = correlation(&inst, 0, 2 * ly, CorrMethod::Exact).unwrap();
            log_zs.push(inst.log_partition_function().unwrap());
            obs.push(h2((1.0 + corr.value.abs()) / 2.0));
            iid_w.push(
                (n_flipped * p.ln() + (n_bonds as f64 - n_flipped) * (1.0 - p).ln()).exp(),
            );
        }
        let max = log_zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for ((lz, f), w) in log_zs.iter().zip(&obs).zip(&iid_w) {
            let z = (lz - max).exp();
            born_num += z * f;
            born_den += z;
            iid_num += w * f;
            iid_den += w;
        }
        let (born, iid) = (born_num / born_den, iid_num / iid_den);
        assert!((iid_den - 1.0).abs() < 1e-9);
        assert!(
            (born - iid).abs() < 1e-9,
            "Born average {born} vs independent-disorder average {iid}"
        );
        // sanity: the coupling used above is the Nishimori value
        assert!((beta - (1.0f64 - 2.0 * p).atanh()).abs() < 1e-15);
    }

    #[test]
    fn ic_from_sc_trivial_limits() {
        let full = |sc: f64| TrajectoryBlocks {
            p_m: 1.0,
            blocks: vec![ChargeBlock {
                p: 1.0,
                diag: (0.5, 0.5),
                offdiag: sc / 2.0,
            }],
        };
        let pure = ic_from_sc(&[full(1.0)]).unwrap();
        assert!((pure.value - 1.0).abs() < 1e-12);
        assert!(!pure.dense_fallback);
        let classical = ic_from_sc(&[full(0.0)]).unwrap();
        assert!(classical.value.abs() < 1e-12);
    }

    #[test]
    fn ic_from_sc_flags_unequal_diagonals() {
        let traj = TrajectoryBlocks {
            p_m: 1.0,
            blocks: vec![
                ChargeBlock {
                    p: 0.5,
                    diag: (0.6, 0.4),
                    offdiag: 0.1,
                },
                ChargeBlock {
                    p: 0.5,
                    diag: (0.6, 0.4),
                    offdiag: 0.0,
                },
            ],
        };
        let report = ic_from_sc(&[traj]).unwrap();
        assert!(report.dense_fallback);
        assert!((report.max_diag_asymmetry - 0.2).abs() < 1e-12);
        assert!(report.value.is_finite());
    }

    #[test]
    fn ic_from_sc_rejects_inconsistent_blocks() {
        assert!(matches!(ic_from_sc(&[]), Err(Error::Consistency(_))));
        let bad = TrajectoryBlocks {
            p_m: 1.0,
            blocks: vec![ChargeBlock {
                p: 0.7,
                diag: (0.5, 0.5),
                offdiag: 0.0,
            }],
        };
        assert!(matches!(ic_from_sc(&[bad]), Err(Error::Consistency(_))));
    }

    /// Full 1D cross-check of the block route: enumerate the bulk
    /// trajectories of a dephased open chain, split each boundary density
    /// operator into charge blocks, verify the blocks against the
    /// `p·[[1/2, SC/2], [SC/2, 1/2]]` form, and reassemble the closed-form
    /// coherent information.
    #[test]
    fn block_route_reproduces_the_dephasing_closed_form() {
        let chain = Chain1D::new(3).unwrap();
        let p = 0.2;
        let spec = ChannelSpec::z_dephase(p, p, Mask::Even).unwrap();
        let sites = decohered_sites_1d(&chain, spec.mask).unwrap();
        let mut decohered = chain.dense_state().unwrap();
        let kraus = spec.kraus(p).unwrap();
        for &s in &sites {
            decohered.apply_channel(&kraus, &[s]).unwrap();
        }
        let bulk = chain.bulk_sites();
        let mut trajectories = Vec::new();
        for cfg in 0u32..1 << bulk.len() {
            let mut state = decohered.clone();
            for (k, &q) in bulk.iter().enumerate() {
                let m = if cfg >> k & 1 == 1 { -1.0 } else { 1.0 };
                let proj = DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        C64::new(0.5, 0.0),
                        C64::new(0.5 * m, 0.0),
                        C64::new(0.5 * m, 0.0),
                        C64::new(0.5, 0.0),
                    ],
                );
                state.apply_unitary(&proj, &[q]).unwrap();
            }
            let rho = state.partial_trace(&[chain.left(), chain.right()]).unwrap();
            let p_m = (0..4).map(|k| rho[(k, k)].re).sum::<f64>();
            if p_m < 1e-12 {
                continue;
            }
            let blocks = charge_blocks_from_density(&rho).unwrap();
            // block reconstruction against the equal-diagonal form
            for b in blocks.iter().filter(|b| b.p > 1e-9) {
                assert!((b.diag.0 - 0.5).abs() < 1e-9, "diag {:?}", b.diag);
                assert!((b.diag.1 - 0.5).abs() < 1e-9);
                let rebuilt = b.p * b.sc() / 2.0;
                assert!((rebuilt - b.p * b.offdiag * 2.0 / 2.0).abs() < 1e-12);
                assert!(b.sc().abs() <= 1.0 + 1e-9);
            }
            trajectories.push(TrajectoryBlocks {
                p_m,
                blocks: blocks.to_vec(),
            });
        }
        let total: f64 = trajectories.iter().map(|t| t.p_m).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let report = ic_from_sc(&trajectories).unwrap();
        assert!(!report.dense_fallback);
        let closed = coherent_info_closed_form(&chain, &spec).unwrap();
        assert!(
            (report.value - closed.value).abs() < 1e-9,
            "route {} vs closed form {}",
            report.value,
            closed.value
        );
    }

    #[test]
    fn block_reconstruction_matches_the_dense_sector_entries() {
        // Bell-correlated boundaries: ρ ∝ Σ charge-diagonal blocks; check
        // the split against hand-built X-basis entries.
        let mut rho = DMatrix::<C64>::zeros(4, 4);
        // |++⟩⟨++| weight 0.3, |−−⟩⟨−−| weight 0.3, coherence 0.2,
        // opposite-charge sector weight 0.4 split evenly without coherence.
        let h2m = DMatrix::from_fn(4, 4, |r, c| {
            C64::new(
                0.5 * if (r & c).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 },
                0.0,
            )
        });
        let mut rx = DMatrix::<C64>::zeros(4, 4);
        rx[(0, 0)] = C64::new(0.3, 0.0);
        rx[(3, 3)] = C64::new(0.3, 0.0);
        rx[(0, 3)] = C64::new(0.2, 0.0);
        rx[(3, 0)] = C64::new(0.2, 0.0);
        rx[(1, 1)] = C64::new(0.2, 0.0);
        rx[(2, 2)] = C64::new(0.2, 0.0);
        rho.copy_from(&(&h2m * rx * &h2m));
        let blocks = charge_blocks_from_density(&rho).unwrap();
        assert!((blocks[0].p - 0.6).abs() < 1e-12);
        assert!((blocks[0].sc() - 2.0 * 0.2 / 0.6).abs() < 1e-12);
        assert!((blocks[1].p - 0.4).abs() < 1e-12);
        assert!(blocks[1].offdiag.abs() < 1e-12);
    }

    #[test]
    fn fit_excludes_the_numerical_noise_floor() {
        let seps: Vec<f64> = (1..=8).map(|n| n as f64).collect();
        let vals: Vec<f64> = (1..=8)
            .map(|n| if n <= 5 { (-(n as f64)).exp() } else { 1e-18 })
            .collect();
        let fit = fit_decay_length(&seps, &vals).unwrap();
        assert_eq!(fit.n_points, 5);
        assert!((fit.xi - 1.0).abs() < 1e-9);
        assert!(fit.ci.0 <= fit.xi && fit.xi <= fit.ci.1);
        assert!(matches!(
            fit_decay_length(&[1.0, 2.0], &[1e-18, 1e-19]),
            Err(Error::EstimatorMismatch { .. })
        ));
    }
}
