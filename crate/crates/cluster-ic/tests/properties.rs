//! Property-based invariants over randomized inputs.
//!
//! Each property is a structural law the toolkit must satisfy for *every*
//! input, not just the hand-picked cases of the unit tests: channels stay
//! CPTP across their parameter space, reading out more can never lower the
//! coherent information, gauge transformations leave the disordered Ising
//! model's observables alone, contractible loops are invisible to the
//! decoder, and strange correlators stay bounded.

use proptest::prelude::*;

use nalgebra::DMatrix;

use cluster_ic::channels::{ChannelSpec, Mask};
use cluster_ic::decoder::plaquette_defects;
use cluster_ic::dense::C64;
use cluster_ic::lattice::{Chain1D, LiebCylinder2D};
use cluster_ic::protocol::{coherent_info_closed_form, coherent_info_with_env};
use cluster_ic::statmech::{correlation, CorrMethod, RBIMInstance};
use cluster_ic::strange::{type2_sc, Type2Method};

fn prob() -> impl Strategy<Value = f64> {
    0.0..=0.5f64
}

fn interaction_angle() -> impl Strategy<Value = f64> {
    0.0..=std::f64::consts::FRAC_PI_2
}

fn env_angle() -> impl Strategy<Value = f64> {
    0.0..std::f64::consts::PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every channel in the family is CPTP and purifies to an isometry,
    /// whatever its parameters.
    #[test]
    fn channels_stay_cptp(
        theta in interaction_angle(), phi in env_angle(), q in 0.0..=1.0f64, p in prob(),
    ) {
        for spec in [
            ChannelSpec::sdc(theta, phi, q, Mask::Odd).unwrap(),
            ChannelSpec::z_dephase(p, p, Mask::Both).unwrap(),
            ChannelSpec::y_dephase(p, p, Mask::Odd).unwrap(),
            ChannelSpec::controlled_hadamard(theta, Mask::Odd).unwrap(),
        ] {
            // KrausChannel::new re-validates completeness on construction.
            let kraus = spec.kraus(spec.site_strength(false)).unwrap();
            prop_assert!(!kraus.ops().is_empty());
            let u = spec.purified_unitary(spec.site_strength(false)).unwrap();
            let dim = u.nrows();
            let dev = (u.adjoint() * &u - DMatrix::<C64>::identity(dim, dim)).norm();
            prop_assert!(dev < 1e-9, "purification deviates by {dev}");
        }
    }

    /// Data processing: measuring the environment can only help, and the
    /// closed-form value is monotone non-increasing in the noise strength.
    #[test]
    fn environment_readout_never_hurts(p1 in 0.0..=0.4f64, dp in 0.0..=0.1f64) {
        let chain = Chain1D::new(2).unwrap();
        let weak = ChannelSpec::z_dephase(p1, p1, Mask::Odd).unwrap();
        let strong = ChannelSpec::z_dephase(p1 + dp, p1 + dp, Mask::Odd).unwrap();
        let rm_weak = coherent_info_closed_form(&chain, &weak).unwrap().value;
        let rm_strong = coherent_info_closed_form(&chain, &strong).unwrap().value;
        let erm = coherent_info_with_env(&chain, &weak).unwrap().value;
        prop_assert!(erm >= rm_weak - 1e-9);
        prop_assert!(rm_strong <= rm_weak + 1e-9);
    }

    /// Gauge transformations leave ln Z and |<ss>| of the random-bond Ising
    /// model invariant.
    #[test]
    fn gauge_invariance(
        bonds in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 15),
        tau in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 9),
        p in 0.02..=0.45f64,
    ) {
        let inst = RBIMInstance::new(3, 3, p, 0.0, bonds).unwrap();
        let gauged = inst.gauge_transform(&tau).unwrap();
        let dz = (inst.log_partition_function().unwrap()
            - gauged.log_partition_function().unwrap()).abs();
        prop_assert!(dz < 1e-8, "ln Z moved by {dz}");
        let c0 = correlation(&inst, 0, 7, CorrMethod::Exact).unwrap().value;
        let c1 = correlation(&gauged, 0, 7, CorrMethod::Exact).unwrap().value;
        prop_assert!((c0.abs() - c1.abs()).abs() < 1e-9);
    }

    /// Flipping a star of edges around any interior vertex is a contractible
    /// loop: the syndrome cannot change.
    #[test]
    fn contractible_loops_are_silent(
        c in 1usize..4,
        y in 0usize..4,
        flips in proptest::collection::vec(any::<bool>(), 36),
    ) {
        let lat = LiebCylinder2D::new(5, 4).unwrap();
        let mut m = vec![1i8; lat.n_qubits()];
        for (e, f) in flips.iter().enumerate() {
            if *f {
                m[lat.n_vertices() + e] = -1;
            }
        }
        let mut looped = m.clone();
        for e in [
            lat.hedge(c - 1, y),
            lat.hedge(c, y),
            lat.vedge(c, y),
            lat.vedge(c, (y + lat.ly() - 1) % lat.ly()),
        ] {
            looped[e] = -looped[e];
        }
        prop_assert_eq!(
            plaquette_defects(&lat, &looped).unwrap(),
            plaquette_defects(&lat, &m).unwrap()
        );
    }

    /// The closed-form type-II strange correlator agrees with dense
    /// Kraus-string enumeration across the channel's parameter space.
    #[test]
    fn type2_closed_form_matches_dense(
        theta in interaction_angle(), phi in env_angle(), q in 0.0..=1.0f64, sep in 1usize..4,
    ) {
        let spec = ChannelSpec::sdc(theta, phi, q, Mask::Even).unwrap();
        let closed = type2_sc(&spec, 0.0, 4, 0, 2 * sep, Type2Method::ClosedForm).unwrap();
        let dense = type2_sc(&spec, 0.0, 4, 0, 2 * sep, Type2Method::Dense).unwrap();
        prop_assert!(
            (closed.value - dense.value).abs() < 1e-9,
            "closed {} vs dense {}", closed.value, dense.value
        );
        // The undisturbed sublattice is exactly one whatever the channel.
        let odd = type2_sc(&spec, 0.0, 4, 1, 5, Type2Method::ClosedForm).unwrap();
        prop_assert_eq!(odd.value, 1.0);
    }

    /// Weak-symmetry classification: the two special-point families are
    /// always weakly symmetric, and a channel diluted to the identity
    /// (q = 0) trivially is.
    #[test]
    fn weak_symmetry_special_points(theta in interaction_angle(), phi in env_angle()) {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let quarter_pi = std::f64::consts::FRAC_PI_4;
        prop_assert!(ChannelSpec::sdc(half_pi, phi, 1.0, Mask::Odd)
            .unwrap().is_weakly_symmetric(1.0).unwrap());
        prop_assert!(ChannelSpec::sdc(theta, quarter_pi, 1.0, Mask::Odd)
            .unwrap().is_weakly_symmetric(1.0).unwrap());
        prop_assert!(ChannelSpec::sdc(theta, phi, 0.0, Mask::Odd)
            .unwrap().is_weakly_symmetric(1.0).unwrap());
    }
}
