//! Invariant self-checks runnable from the command line.
//!
//! Each check re-verifies one structural property of the toolkit on small
//! instances: channel CPTP-ness, the data-processing inequality, gauge
//! invariance of the random-bond Ising machinery, homology soundness of the
//! matching decoder, the weak-symmetry classification of the
//! symmetry-decoupling channel at its special points, cross-estimator
//! agreement, and output determinism.  The whole suite is designed to run
//! in well under a minute.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channels::{ChannelSpec, Mask};
use crate::decoder::{
    decode_2d_matching, plaquette_defects, ErrorModel, SyndromeGraph,
};
use crate::dense::C64;
use crate::error::Error;
use crate::lattice::{Chain1D, LiebCylinder2D};
use crate::protocol::{
    coherent_info_closed_form, coherent_info_exact_dense, coherent_info_with_env,
    ic_dephasing_exact,
};
use crate::statmech::{correlation, CorrMethod, RBIMInstance};
use crate::strange::{type1_sc_1d, type1_sc_arc_1d, type2_sc, Type2Method};
use crate::virtualchan::{replay_edge_outcomes, simulate_virtual_1d, simulate_virtual_2d};

/// Outcome of one named check.
pub struct CheckResult {
    pub name: &'static str,
    pub result: Result<(), Error>,
}

fn ensure(ok: bool, what: &str) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::Consistency(what.into()))
    }
}

fn check_cptp() -> Result<(), Error> {
    let specs = [
        ChannelSpec::z_dephase(0.23, 0.11, Mask::Both)?,
        ChannelSpec::y_dephase(0.4, 0.4, Mask::Odd)?,
        ChannelSpec::swap(Mask::Odd)?,
        ChannelSpec::controlled_hadamard(0.7, Mask::Odd)?,
        ChannelSpec::sdc(0.9, 0.5, 0.35, Mask::Odd)?,
    ];
    for spec in &specs {
        // Kraus completeness is validated on construction; also check the
        // purification is an isometry on the joint space.
        let kraus = spec.kraus(spec.site_strength(false))?;
        let u = spec.purified_unitary(spec.site_strength(false))?;
        let dim = u.nrows();
        let dev = (u.adjoint() * &u - DMatrix::<C64>::identity(dim, dim)).norm();
        ensure(dev < 1e-9, "purified unitary is not an isometry")?;
        ensure(!kraus.ops().is_empty(), "channel has no Kraus operators")?;
    }
    Ok(())
}

fn check_dpi() -> Result<(), Error> {
    let chain = Chain1D::new(2)?;
    let mut last = f64::INFINITY;
    for p in [0.02, 0.1, 0.2, 0.35] {
        let spec = ChannelSpec::z_dephase(p, p, Mask::Odd)?;
        let rm = coherent_info_closed_form(&chain, &spec)?.value;
        let erm = coherent_info_with_env(&chain, &spec)?.value;
        ensure(erm >= rm - 1e-9, "environment readout decreased I_c")?;
        ensure(rm <= last + 1e-9, "I_c increased with noise strength")?;
        last = rm;
    }
    Ok(())
}

fn check_gauge_invariance() -> Result<(), Error> {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let bonds: Vec<i8> = (0..RBIMInstance::new(3, 3, 0.1, 0.0, vec![1; 15])?.n_bonds())
        .map(|_| if rng.random_bool(0.2) { -1 } else { 1 })
        .collect();
    let inst = RBIMInstance::new(3, 3, 0.1, 0.0, bonds)?;
    let tau: Vec<i8> = (0..inst.n_spins())
        .map(|_| if rng.random_bool(0.5) { -1 } else { 1 })
        .collect();
    let gauged = inst.gauge_transform(&tau)?;
    let dz = (inst.log_partition_function()? - gauged.log_partition_function()?).abs();
    ensure(dz < 1e-9, "ln Z changed under a gauge transform")?;
    let c0 = correlation(&inst, 0, 7, CorrMethod::Exact)?.value;
    let c1 = correlation(&gauged, 0, 7, CorrMethod::Exact)?.value;
    ensure(
        (c0.abs() - c1.abs()).abs() < 1e-9,
        "|correlation| changed under a gauge transform",
    )
}

fn check_homology() -> Result<(), Error> {
    let lat = LiebCylinder2D::new(4, 4)?;
    let model = ErrorModel::z_dephase(&lat, 0.08, false)?;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut m = vec![1i8; lat.n_qubits()];
    for &e in &model.edges {
        if rng.random_bool(0.08) {
            m[e] = -1;
        }
    }
    let base = decode_2d_matching(&lat, &SyndromeGraph::build(&lat, &model, &m)?, &model, &m)?;
    // A star of edges around an interior vertex is a contractible loop:
    // no syndrome change, no decode change.
    let (c, y) = (1, 2);
    let mut looped = m.clone();
    for e in [
        lat.hedge(c - 1, y),
        lat.hedge(c, y),
        lat.vedge(c, y),
        lat.vedge(c, (y + lat.ly() - 1) % lat.ly()),
    ] {
        looped[e] = -looped[e];
    }
    ensure(
        plaquette_defects(&lat, &looped)? == plaquette_defects(&lat, &m)?,
        "contractible loop changed the syndrome",
    )?;
    let dl = decode_2d_matching(
        &lat,
        &SyndromeGraph::build(&lat, &model, &looped)?,
        &model,
        &looped,
    )?;
    ensure(
        dl.gamma_hat == base.gamma_hat,
        "contractible loop changed the decoded charge",
    )?;
    // A full ring of horizontal edges at one column slot winds the
    // cylinder: every plaquette of that slot is hit twice, so the syndrome
    // is untouched while the horizontal charge string gains one factor.
    let mut wound = m.clone();
    for y in 0..lat.ly() {
        wound[lat.hedge(1, y)] = -wound[lat.hedge(1, y)];
    }
    ensure(
        plaquette_defects(&lat, &wound)? == plaquette_defects(&lat, &m)?,
        "winding loop changed the syndrome",
    )?;
    let dw = decode_2d_matching(
        &lat,
        &SyndromeGraph::build(&lat, &model, &wound)?,
        &model,
        &wound,
    )?;
    ensure(
        dw.gamma_hat == -base.gamma_hat,
        "winding loop failed to flip the decoded charge",
    )
}

fn check_weak_symmetry() -> Result<(), Error> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    // Special points: vanishing interaction-angle cosine, or environment
    // angle an odd multiple of π/4.
    for spec in [
        ChannelSpec::sdc(half_pi, 0.3, 1.0, Mask::Odd)?,
        ChannelSpec::sdc(0.4, quarter_pi, 1.0, Mask::Odd)?,
    ] {
        ensure(
            spec.is_weakly_symmetric(1.0)?,
            "special-point channel not classified weakly symmetric",
        )?;
    }
    let generic = ChannelSpec::sdc(0.4, 0.3, 1.0, Mask::Odd)?;
    ensure(
        !generic.is_weakly_symmetric(1.0)?,
        "generic channel misclassified as weakly symmetric",
    )?;
    let dephase = ChannelSpec::z_dephase(0.2, 0.2, Mask::Odd)?;
    ensure(
        dephase.is_weakly_symmetric(0.2)?,
        "dephasing misclassified",
    )
}

fn check_estimator_agreement() -> Result<(), Error> {
    let chain = Chain1D::new(2)?;
    let spec = ChannelSpec::z_dephase(0.15, 0.15, Mask::Odd)?;
    let dense = coherent_info_exact_dense(&chain, &spec)?.value;
    let closed = coherent_info_closed_form(&chain, &spec)?.value;
    ensure(
        (dense - closed).abs() < 1e-9,
        "dense and closed-form estimators disagree",
    )?;
    let virt = simulate_virtual_1d(2, 0.15, 20_000, 29)?;
    ensure(
        (virt.value - ic_dephasing_exact(2, 0.15)).abs() < 3.0 * virt.stderr.max(1e-6),
        "virtual-channel estimator outside 3σ",
    )
}

fn check_foliation_equivalence() -> Result<(), Error> {
    let lat = LiebCylinder2D::new(5, 4)?;
    let model = ErrorModel::z_dephase(&lat, 0.1, false)?;
    for s in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(31 ^ s);
        let mut m = vec![1i8; lat.n_qubits()];
        for &e in &model.edges {
            if rng.random_bool(0.1) {
                m[e] = -1;
            }
        }
        ensure(
            replay_edge_outcomes(&lat, &m)?.defects == plaquette_defects(&lat, &m)?,
            "foliated replay diverged from direct syndromes",
        )?;
    }
    Ok(())
}

fn check_determinism() -> Result<(), Error> {
    let a = simulate_virtual_2d(4, 4, 0.08, 500, 41)?;
    let b = simulate_virtual_2d(4, 4, 0.08, 500, 41)?;
    ensure(
        a.failure_rate == b.failure_rate,
        "same seed gave different failure rates",
    )?;
    let x = simulate_virtual_1d(3, 0.1, 2_000, 43)?;
    let y = simulate_virtual_1d(3, 0.1, 2_000, 43)?;
    ensure(x.value == y.value, "same seed gave different 1D estimates")
}

fn check_strange_goldens() -> Result<(), Error> {
    let spec = ChannelSpec::sdc(0.7, 0.5, 0.6, Mask::Even)?;
    let closed = type2_sc(&spec, 0.0, 4, 0, 4, Type2Method::ClosedForm)?.value;
    let dense = type2_sc(&spec, 0.0, 4, 0, 4, Type2Method::Dense)?.value;
    ensure(
        (closed - dense).abs() < 1e-10,
        "type-II closed form disagrees with dense",
    )?;
    let z = ChannelSpec::z_dephase(0.15, 0.15, Mask::Even)?;
    let m = vec![1i8; 8];
    let d1 = type1_sc_1d(&z, 0.15, 4, &m, 1, 5)?;
    let a1 = type1_sc_arc_1d(4, 0.15, &m, 1, 5)?;
    ensure(
        (d1 - a1).abs() < 1e-10,
        "type-I dense disagrees with the arc form",
    )
}

/// Run every invariant check, returning one result per named suite.
pub fn run_selftest() -> Vec<CheckResult> {
    let checks: Vec<(&'static str, fn() -> Result<(), Error>)> = vec![
        ("cptp-channels", check_cptp),
        ("data-processing-inequality", check_dpi),
        ("gauge-invariance", check_gauge_invariance),
        ("homology-soundness", check_homology),
        ("weak-symmetry-classification", check_weak_symmetry),
        ("estimator-agreement", check_estimator_agreement),
        ("foliation-equivalence", check_foliation_equivalence),
        ("determinism", check_determinism),
        ("strange-correlator-goldens", check_strange_goldens),
    ];
    checks
        .into_iter()
        .map(|(name, f)| CheckResult { name, result: f() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_selftest_suites_pass() {
        let results = run_selftest();
        assert_eq!(results.len(), 9);
        for r in &results {
            assert!(r.result.is_ok(), "{} failed: {:?}", r.name, r.result);
        }
    }
}
