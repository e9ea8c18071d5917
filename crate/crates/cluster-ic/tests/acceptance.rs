//! End-to-end acceptance gate: nine numbered criteria, one pass/fail line
//! each.  Every criterion checks a library result against an independent
//! target — closed forms against dense simulation, Monte-Carlo estimates
//! against exact values, decoders against syndrome replay — and prints
//! `criterion N: PASS|FAIL` before asserting.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use cluster_ic::channels::{ChannelSpec, Mask};
use cluster_ic::decoder::{plaquette_defects, ErrorModel};
use cluster_ic::h2;
use cluster_ic::lattice::{Chain1D, LiebCylinder2D};
use cluster_ic::protocol::{
    asymptotic_region_1d, coherent_info_closed_form, coherent_info_exact_dense,
    coherent_info_pure_1d, coherent_info_pure_2d, coherent_info_with_env, ic_dephasing_exact,
    TrajectoryMode,
};
use cluster_ic::selftest::run_selftest;
use cluster_ic::statmech::{correlation, threshold_scan, CorrMethod, RBIMInstance};
use cluster_ic::strange::{fit_decay_length, type1_sc_arc_1d, type2_sc, Type2Method};
use cluster_ic::virtualchan::{replay_edge_outcomes, simulate_virtual_1d};

/// Print the verdict line for one criterion, then fail the test if needed.
fn verdict(n: usize, what: &str, checks: &[(bool, String)]) {
    let failed: Vec<&String> = checks.iter().filter(|(ok, _)| !ok).map(|(_, d)| d).collect();
    if failed.is_empty() {
        println!("criterion {n}: PASS — {what}");
    } else {
        println!("criterion {n}: FAIL — {what}: {failed:?}");
    }
    assert!(failed.is_empty(), "criterion {n} failed: {failed:?}");
}

#[test]
fn criterion_1_pure_protocol_is_lossless() {
    let start = Instant::now();
    let mut checks = Vec::new();
    for n in 1..=6 {
        let chain = Chain1D::new(n).unwrap();
        let mode = if 2 * n - 1 <= 13 {
            TrajectoryMode::Exhaustive
        } else {
            TrajectoryMode::StructuralVerify { passes: 3, seed: 11 }
        };
        let r = coherent_info_pure_1d(&chain, mode).unwrap();
        checks.push((r.value == 1.0, format!("chain N={n} gave {}", r.value)));
    }
    for (lx, ly) in [(3, 3), (3, 4)] {
        let lat = LiebCylinder2D::new(lx, ly).unwrap();
        let r = coherent_info_pure_2d(&lat, TrajectoryMode::StructuralVerify { passes: 3, seed: 11 })
            .unwrap();
        checks.push((r.value == 1.0, format!("cylinder {lx}x{ly} gave {}", r.value)));
    }
    let elapsed = start.elapsed().as_secs_f64();
    checks.push((elapsed < 10.0, format!("took {elapsed:.1}s (budget 10s)")));
    verdict(1, "pure protocol recovers one bit exactly in 1D and 2D", &checks);
}

#[test]
fn criterion_2_environment_readout_restores_or_destroys_the_bit() {
    let start = Instant::now();
    let mut checks = Vec::new();
    let recoverable = [
        ChannelSpec::z_dephase(0.23, 0.23, Mask::Odd).unwrap(),
        ChannelSpec::y_dephase(0.37, 0.37, Mask::Odd).unwrap(),
        ChannelSpec::swap(Mask::Odd).unwrap(),
        ChannelSpec::sdc(0.9, 0.5, 0.35, Mask::Odd).unwrap(),
    ];
    for n in 1..=3 {
        let chain = Chain1D::new(n).unwrap();
        for spec in &recoverable {
            let r = coherent_info_with_env(&chain, spec).unwrap();
            checks.push((
                (r.value - 1.0).abs() < 1e-9,
                format!("N={n} {:?} gave {}", spec.kind, r.value),
            ));
        }
        // Maximal interaction angle: the environment qubit reads out the
        // charge itself, so even with the environment measured the bit is
        // gone on one sublattice.
        let ch = ChannelSpec::controlled_hadamard(std::f64::consts::FRAC_PI_2, Mask::Odd).unwrap();
        let r = coherent_info_with_env(&chain, &ch).unwrap();
        checks.push((
            r.value.abs() < 1e-9,
            format!("N={n} controlled-Hadamard gave {}", r.value),
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    checks.push((elapsed < 60.0, format!("took {elapsed:.1}s (budget 60s)")));
    verdict(
        2,
        "environment-resolved coherent information hits its channel-class value",
        &checks,
    );
}

#[test]
fn criterion_3_dephasing_closed_form_and_asymptote() {
    let mut checks = Vec::new();
    // Exact dense simulation against the closed form at small sizes.
    for n in 1..=4 {
        let chain = Chain1D::new(n).unwrap();
        for p in [0.05, 0.15, 0.3] {
            let spec = ChannelSpec::z_dephase(p, p, Mask::Odd).unwrap();
            let dense = coherent_info_exact_dense(&chain, &spec).unwrap().value;
            let exact = 1.0 - h2((1.0 + (1.0 - 2.0 * p).powi(n as i32)) / 2.0);
            checks.push((
                (dense - exact).abs() < 1e-9,
                format!("N={n} p={p}: dense {dense} vs closed {exact}"),
            ));
        }
    }
    // Large-N asymptote (1-2p)^{2N} / (2 ln 2), valid once (1-2p)^N < 0.1;
    // p = 0.1 keeps the closed form far from its cancellation floor.
    let p = 0.1f64;
    for n in 1..=50usize {
        let x = (1.0 - 2.0 * p).powi(n as i32);
        if x >= 0.1 {
            continue;
        }
        let exact = ic_dephasing_exact(n, p);
        let asym = x * x / (2.0 * std::f64::consts::LN_2);
        checks.push((
            (exact - asym).abs() <= 0.05 * asym,
            format!("N={n}: exact {exact} vs asymptote {asym}"),
        ));
    }
    verdict(3, "1D dephasing matches its closed form and large-N asymptote", &checks);
}

#[test]
fn criterion_4_phase_diagram_regions() {
    let mut checks = Vec::new();
    // Asymptotic values over the strength grid: one bit kept when both
    // sublattices are clean, zero when one decoheres, minus one when both do.
    for pa in [0.0, 0.05, 0.2, 0.4] {
        for pb in [0.0, 0.05, 0.2, 0.4] {
            let want = match (pa > 0.0, pb > 0.0) {
                (false, false) => 1.0,
                (true, true) => -1.0,
                _ => 0.0,
            };
            let got = asymptotic_region_1d(pa, pb);
            checks.push((got == want, format!("({pa},{pb}) gave {got}, want {want}")));
        }
    }
    // Dense spot-checks at N=3: the finite-size closed form agrees with the
    // exact density-operator computation towards every region.
    let chain = Chain1D::new(3).unwrap();
    for (pa, pb) in [(0.0, 0.0), (0.2, 0.0), (0.0, 0.2), (0.2, 0.2), (0.4, 0.1)] {
        let spec = ChannelSpec::z_dephase(pa, pb, Mask::Both).unwrap();
        let dense = coherent_info_exact_dense(&chain, &spec).unwrap().value;
        let closed = coherent_info_closed_form(&chain, &spec).unwrap().value;
        checks.push((
            (dense - closed).abs() < 1e-9,
            format!("N=3 ({pa},{pb}): dense {dense} vs closed {closed}"),
        ));
    }
    verdict(4, "two-sublattice phase diagram has the three asymptotic regions", &checks);
}

#[test]
fn criterion_5_threshold_near_the_nishimori_point() {
    let start = Instant::now();
    let p_grid = [0.08, 0.09, 0.10, 0.11, 0.12, 0.13];
    let est = threshold_scan(&p_grid, &[8, 12, 16], 10_000, 2024).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let checks = vec![
        (
            (0.08..=0.13).contains(&est.p_c),
            format!("p_c = {} outside [0.08, 0.13]", est.p_c),
        ),
        (
            est.ci_low <= est.p_c && est.p_c <= est.ci_high,
            format!("CI [{}, {}] does not bracket p_c {}", est.ci_low, est.ci_high, est.p_c),
        ),
        (elapsed < 1800.0, format!("took {elapsed:.0}s (budget 1800s)")),
    ];
    verdict(
        5,
        &format!(
            "decoder threshold p_c = {:.4} (CI [{:.4}, {:.4}])",
            est.p_c, est.ci_low, est.ci_high
        ),
        &checks,
    );
}

#[test]
fn criterion_6_strange_correlator_goldens_and_decay_length() {
    let mut checks = Vec::new();
    // Closed forms against dense Kraus-string enumeration at L = 6.
    let l = 6;
    let sdc = ChannelSpec::sdc(0.7, 0.5, 0.6, Mask::Even).unwrap();
    for (i, j) in [(1, 5), (1, 9), (3, 7)] {
        // Undisturbed (odd) sublattice: exactly one.
        let closed = type2_sc(&sdc, 0.0, l, i, j, Type2Method::ClosedForm).unwrap();
        let dense = type2_sc(&sdc, 0.0, l, i, j, Type2Method::Dense).unwrap();
        checks.push((
            closed.value == 1.0 && (dense.value - 1.0).abs() < 1e-10,
            format!("odd pair ({i},{j}): closed {} dense {}", closed.value, dense.value),
        ));
    }
    for (i, j) in [(0, 4), (0, 8), (2, 6)] {
        // Decohered (even) sublattice: area-law value from the closed form.
        let closed = type2_sc(&sdc, 0.0, l, i, j, Type2Method::ClosedForm).unwrap();
        let dense = type2_sc(&sdc, 0.0, l, i, j, Type2Method::Dense).unwrap();
        checks.push((
            (closed.value - dense.value).abs() < 1e-10,
            format!("even pair ({i},{j}): closed {} dense {}", closed.value, dense.value),
        ));
    }
    // Type-I decay length on a long ring: fit over cell separations <= 8.
    // The ring must be long enough that the complementary arc's
    // (1-2p)^{L-n} contribution is negligible next to the fitted decay.
    let l = 200;
    let m = vec![1i8; 2 * l];
    for p in [0.05, 0.1, 0.2] {
        let seps: Vec<f64> = (1..=8).map(|n| n as f64).collect();
        let vals: Vec<f64> = (1..=8)
            .map(|n| type1_sc_arc_1d(l, p, &m, 1, 2 * n + 1).unwrap())
            .collect();
        let fit = fit_decay_length(&seps, &vals).unwrap();
        let xi = 1.0 / (1.0 / (1.0 - 2.0 * p)).ln();
        checks.push((
            (fit.xi - xi).abs() <= 0.05 * xi,
            format!("p={p}: fitted xi {} vs {}", fit.xi, xi),
        ));
    }
    verdict(6, "strange-correlator closed forms and decay lengths check out", &checks);
}

#[test]
fn criterion_7_nishimori_identity() {
    let mut checks = Vec::new();
    let (lx, ly) = (6, 6);
    let n_disorder = 1_000;
    for (pi, p) in [0.05, 0.08].into_iter().enumerate() {
        let template = RBIMInstance::new(lx, ly, p, 0.0, vec![1; 2 * lx * ly - ly]).unwrap();
        let n_bonds = template.n_bonds();
        let (i, j) = (0, lx * ly - 1);
        let mut rng = ChaCha12Rng::seed_from_u64(600 + pi as u64);
        let mut diffs = Vec::with_capacity(n_disorder);
        for _ in 0..n_disorder {
            let bonds: Vec<i8> = (0..n_bonds)
                .map(|_| if rng.random_bool(p) { -1 } else { 1 })
                .collect();
            let inst = RBIMInstance::new(lx, ly, p, 0.0, bonds).unwrap();
            let c = correlation(&inst, i, j, CorrMethod::TransferMatrix).unwrap().value;
            // On the Nishimori line the disorder averages of <ss> and <ss>^2
            // coincide; record their per-sample difference.
            diffs.push(c * c - c);
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let z = mean / (var / n).sqrt();
        checks.push((z.abs() < 3.0, format!("p={p}: z = {z:.2}")));
    }
    verdict(7, "Nishimori identity [<ss>^2] = [<ss>] holds within 3 sigma", &checks);
}

#[test]
fn criterion_8_estimator_triangle_and_foliation() {
    let mut checks = Vec::new();
    // Three independent estimators of the same quantity: exact density
    // operator, closed form, and virtual-channel Monte Carlo.
    for (n, p) in [(2usize, 0.1), (3, 0.15)] {
        let chain = Chain1D::new(n).unwrap();
        let spec = ChannelSpec::z_dephase(p, p, Mask::Odd).unwrap();
        let dense = coherent_info_exact_dense(&chain, &spec).unwrap().value;
        let closed = coherent_info_closed_form(&chain, &spec).unwrap().value;
        let virt = simulate_virtual_1d(n, p, 40_000, 808).unwrap();
        let sigma = virt.stderr.max(1e-9);
        checks.push((
            (dense - closed).abs() < 1e-9,
            format!("N={n} p={p}: dense {dense} vs closed {closed}"),
        ));
        checks.push((
            (virt.value - dense).abs() < 3.0 * sigma,
            format!("N={n} p={p}: virtual {} vs dense {dense} (sigma {sigma})", virt.value),
        ));
        checks.push((
            (virt.value - closed).abs() < 3.0 * sigma,
            format!("N={n} p={p}: virtual {} vs closed {closed}", virt.value),
        ));
    }
    // The foliated (measurement-round) simulation must reproduce the direct
    // 2D syndrome extraction bit for bit under shared seeds.
    let lat = LiebCylinder2D::new(6, 4).unwrap();
    let model = ErrorModel::z_dephase(&lat, 0.1, false).unwrap();
    for s in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(909 ^ s.wrapping_mul(0x9e3779b97f4a7c15));
        let mut m = vec![1i8; lat.n_qubits()];
        for &e in &model.edges {
            if rng.random_bool(0.1) {
                m[e] = -1;
            }
        }
        let run = replay_edge_outcomes(&lat, &m).unwrap();
        checks.push((
            run.defects == plaquette_defects(&lat, &m).unwrap(),
            format!("sample {s}: foliated defects diverge from direct syndromes"),
        ));
    }
    verdict(8, "independent estimators agree; foliation replays syndromes exactly", &checks);
}

#[test]
fn criterion_9_invariant_selftests() {
    let start = Instant::now();
    let results = run_selftest();
    let mut checks: Vec<(bool, String)> = results
        .iter()
        .map(|r| (r.result.is_ok(), format!("{} ({:?})", r.name, r.result)))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    checks.push((elapsed < 300.0, format!("took {elapsed:.1}s (budget 300s)")));
    verdict(9, "all invariant self-checks pass in budget", &checks);
}
