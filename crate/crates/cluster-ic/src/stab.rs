//! Stabilizer states with tableau measurement and rank-based entropies.

use rand::{Rng, RngExt};

use crate::gf2::{self, BitVec};
use crate::pauli::{PauliKind, PauliOperator};
use crate::Error;

/// A state described by a list of independent commuting Hermitian Pauli
/// generators; pure iff there are exactly `n` of them.
#[derive(Clone, Debug)]
pub struct StabilizerState {
    n: usize,
    gens: Vec<PauliOperator>,
}

/// Result of one Pauli measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasureRecord {
    pub outcome: i8,
    pub deterministic: bool,
}

impl StabilizerState {
    /// |0…0⟩, stabilized by every `Z_q`.
    pub fn zero(n: usize) -> Self {
        let gens = (0..n)
            .map(|q| PauliOperator::single(n, q, PauliKind::Z).unwrap())
            .collect();
        StabilizerState { n, gens }
    }

    /// |+…+⟩, stabilized by every `X_q`.
    pub fn plus(n: usize) -> Self {
        let gens = (0..n)
            .map(|q| PauliOperator::single(n, q, PauliKind::X).unwrap())
            .collect();
        StabilizerState { n, gens }
    }

    pub fn from_generators(n: usize, gens: Vec<PauliOperator>) -> Result<Self, Error> {
        let state = StabilizerState { n, gens };
        state.validate()?;
        Ok(state)
    }

    /// Check the representation invariants: Hermitian, pairwise commuting,
    /// independent over GF(2) (which also rules out −Identity in the group).
    pub fn validate(&self) -> Result<(), Error> {
        for g in &self.gens {
            if g.n_qubits() != self.n {
                return Err(Error::SizeMismatch(g.n_qubits(), self.n));
            }
            g.sign()?;
        }
        for (i, g) in self.gens.iter().enumerate() {
            for h in &self.gens[i + 1..] {
                if !g.commutes(h) {
                    return Err(Error::Consistency(format!(
                        "generators do not commute: {g} vs {h}"
                    )));
                }
            }
        }
        let rank = gf2::rank(self.symplectic_rows());
        if rank != self.gens.len() {
            return Err(Error::Consistency(format!(
                "generators dependent: rank {rank} < {}",
                self.gens.len()
            )));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliOperator] {
        &self.gens
    }

    pub fn is_pure(&self) -> bool {
        self.gens.len() == self.n
    }

    fn symplectic_rows(&self) -> Vec<BitVec> {
        self.gens.iter().map(Self::symplectic_row).collect()
    }

    fn symplectic_row(p: &PauliOperator) -> BitVec {
        let n = p.n_qubits();
        let mut row = BitVec::zeros(2 * n);
        for i in p.x_bits().iter_ones() {
            row.set(i, true);
        }
        for i in p.z_bits().iter_ones() {
            row.set(n + i, true);
        }
        row
    }

    pub fn apply_h(&mut self, q: usize) {
        for g in &mut self.gens {
            g.conj_h(q);
        }
    }

    pub fn apply_s(&mut self, q: usize) {
        for g in &mut self.gens {
            g.conj_s(q);
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        for g in &mut self.gens {
            g.conj_cnot(control, target);
        }
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        for g in &mut self.gens {
            g.conj_cz(a, b);
        }
    }

    /// Conjugate by a Pauli: flips the sign of anticommuting generators.
    pub fn apply_pauli(&mut self, p: &PauliOperator) {
        for g in &mut self.gens {
            if !g.commutes(p) {
                g.negate();
            }
        }
    }

    /// Append a fresh qubit in |0⟩ (it gets index `n`).
    pub fn append_zero_qubit(&mut self) {
        let new_n = self.n + 1;
        let mut gens: Vec<PauliOperator> = self
            .gens
            .iter()
            .map(|g| g.embed(new_n).unwrap())
            .collect();
        gens.push(PauliOperator::single(new_n, self.n, PauliKind::Z).unwrap());
        self.n = new_n;
        self.gens = gens;
    }

    /// ⟨p⟩ when it is ±1; `None` when the expectation vanishes (p is not in
    /// ± the stabilizer group).
    pub fn expectation(&self, p: &PauliOperator) -> Result<Option<i8>, Error> {
        if p.n_qubits() != self.n {
            return Err(Error::SizeMismatch(p.n_qubits(), self.n));
        }
        p.sign()?;
        if self.gens.iter().any(|g| !g.commutes(p)) {
            return Ok(None);
        }
        let rows = self.symplectic_rows();
        let target = Self::symplectic_row(p);
        let Some(comb) = gf2::solve(&rows, &target) else {
            return Ok(None);
        };
        let mut prod = PauliOperator::identity(self.n);
        for (g, used) in self.gens.iter().zip(comb) {
            if used {
                prod = prod.mul(g)?;
            }
        }
        debug_assert_eq!(prod.x_bits(), p.x_bits());
        debug_assert_eq!(prod.z_bits(), p.z_bits());
        Ok(Some(prod.sign()? * p.sign()?))
    }

    /// Measure a Hermitian Pauli, drawing random outcomes from `rng`.
    pub fn measure(&mut self, p: &PauliOperator, rng: &mut impl Rng) -> Result<MeasureRecord, Error> {
        let random = self.gens.iter().any(|g| !g.commutes(p)) || self.expectation(p)?.is_none();
        let forced = if random && !rng.random_bool(0.5) { -1 } else { 1 };
        let (prob, deterministic, outcome) = self.measure_with(p, forced)?;
        debug_assert!(prob > 0.0);
        Ok(MeasureRecord {
            outcome,
            deterministic,
        })
    }

    /// Measure with a forced outcome, for exhaustive trajectory
    /// enumeration. Returns the Born probability of the branch (0, 1/2 or
    /// 1); on probability 0 the state is left unchanged.
    pub fn measure_forced(&mut self, p: &PauliOperator, outcome: i8) -> Result<f64, Error> {
        let (prob, _, got) = self.measure_with(p, outcome)?;
        if got != outcome {
            return Ok(0.0);
        }
        Ok(prob)
    }

    fn measure_with(&mut self, p: &PauliOperator, forced: i8) -> Result<(f64, bool, i8), Error> {
        if p.n_qubits() != self.n {
            return Err(Error::SizeMismatch(p.n_qubits(), self.n));
        }
        p.sign()?;
        let pivot = self.gens.iter().position(|g| !g.commutes(p));
        match pivot {
            Some(a) => {
                let ga = self.gens[a].clone();
                for j in 0..self.gens.len() {
                    if j != a && !self.gens[j].commutes(p) {
                        self.gens[j] = self.gens[j].mul(&ga)?;
                    }
                }
                let mut new_gen = p.clone();
                if forced == -1 {
                    new_gen.negate();
                }
                self.gens[a] = new_gen;
                Ok((0.5, false, forced))
            }
            None => match self.expectation(p)? {
                Some(v) => Ok((1.0, true, v)),
                None => {
                    // Commuting but independent: only possible on mixed
                    // states; the outcome is uniformly random and the
                    // measured operator joins the group.
                    let mut new_gen = p.clone();
                    if forced == -1 {
                        new_gen.negate();
                    }
                    self.gens.push(new_gen);
                    Ok((0.5, false, forced))
                }
            },
        }
    }

    /// Entanglement entropy of a region in bits, for pure states:
    /// `rank_GF2(generators restricted to region) − |region|`.
    pub fn entropy_bits(&self, region: &[usize]) -> Result<f64, Error> {
        if !self.is_pure() {
            return Err(Error::Consistency(
                "entanglement entropy requires a pure stabilizer state".into(),
            ));
        }
        let mut seen = vec![false; self.n];
        for &q in region {
            if q >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    n_qubits: self.n,
                });
            }
            if seen[q] {
                return Err(Error::DuplicateTarget(q));
            }
            seen[q] = true;
        }
        let k = region.len();
        let rows: Vec<BitVec> = self
            .gens
            .iter()
            .map(|g| {
                let xs = g.x_bits().select(region);
                let zs = g.z_bits().select(region);
                let mut row = BitVec::zeros(2 * k);
                for i in xs.iter_ones() {
                    row.set(i, true);
                }
                for i in zs.iter_ones() {
                    row.set(k + i, true);
                }
                row
            })
            .collect();
        Ok(gf2::rank(rows) as f64 - k as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pauli(label: &str) -> PauliOperator {
        PauliOperator::from_label(label).unwrap()
    }

    /// Path-graph cluster state on `n` qubits.
    fn cluster_chain(n: usize) -> StabilizerState {
        let mut s = StabilizerState::zero(n);
        for q in 0..n {
            s.apply_h(q);
        }
        for q in 0..n - 1 {
            s.apply_cz(q, q + 1);
        }
        s
    }

    #[test]
    fn z_on_zero_state_is_deterministic() {
        let mut s = StabilizerState::zero(1);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let rec = s.measure(&pauli("Z"), &mut rng).unwrap();
        assert_eq!(rec, MeasureRecord { outcome: 1, deterministic: true });
        assert_eq!(s.expectation(&pauli("Z")).unwrap(), Some(1));
    }

    #[test]
    fn x_on_zero_state_is_unbiased() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut plus = 0u32;
        let trials = 10_000;
        for _ in 0..trials {
            let mut s = StabilizerState::zero(1);
            if s.measure(&pauli("X"), &mut rng).unwrap().outcome == 1 {
                plus += 1;
            }
        }
        let freq = plus as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn repeated_measurement_is_stable() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for seed in 0..20 {
            let mut s = cluster_chain(4);
            let p = pauli("XZII");
            let _ = seed;
            let first = s.measure(&p, &mut rng).unwrap();
            let snapshot: Vec<String> = s.generators().iter().map(|g| g.to_string()).collect();
            let second = s.measure(&p, &mut rng).unwrap();
            assert_eq!(second.outcome, first.outcome);
            assert!(second.deterministic);
            let after: Vec<String> = s.generators().iter().map(|g| g.to_string()).collect();
            assert_eq!(snapshot, after);
        }
    }

    #[test]
    fn bell_pair_entropy() {
        let mut s = StabilizerState::zero(2);
        s.apply_h(0);
        s.apply_cnot(0, 1);
        assert_eq!(s.entropy_bits(&[0]).unwrap(), 1.0);
        assert_eq!(s.entropy_bits(&[1]).unwrap(), 1.0);
        assert_eq!(s.entropy_bits(&[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn product_state_entropy_vanishes() {
        let s = StabilizerState::plus(5);
        for region in [vec![0], vec![1, 3], vec![0, 1, 2, 3, 4]] {
            assert_eq!(s.entropy_bits(&region).unwrap(), 0.0);
        }
    }

    #[test]
    fn entropy_complement_symmetry() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for trial in 0..10 {
            let n = 6;
            let mut s = StabilizerState::zero(n);
            for _ in 0..40 {
                match rng.random_range(0..4u8) {
                    0 => s.apply_h(rng.random_range(0..n)),
                    1 => s.apply_s(rng.random_range(0..n)),
                    2 => {
                        let a = rng.random_range(0..n);
                        let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                        s.apply_cnot(a, b);
                    }
                    _ => {
                        let a = rng.random_range(0..n);
                        let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                        s.apply_cz(a, b);
                    }
                }
            }
            let region: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            let complement: Vec<usize> = (0..n).filter(|q| !region.contains(q)).collect();
            let sa = s.entropy_bits(&region).unwrap();
            let sb = s.entropy_bits(&complement).unwrap();
            assert_eq!(sa, sb, "trial {trial}");
        }
    }

    #[test]
    fn five_qubit_cluster_distills_bell_pair() {
        // Measure X on the three bulk sites of a 5-site chain; the
        // boundary pair must be a Bell state up to byproducts fixed by the
        // bulk symmetry charges.
        for branch in 0..8u8 {
            let mut s = cluster_chain(5);
            let mut m = [0i8; 3];
            for (i, q) in [1usize, 2, 3].iter().enumerate() {
                let outcome = if branch >> i & 1 == 1 { -1 } else { 1 };
                let p = PauliOperator::single(5, *q, PauliKind::X).unwrap();
                let prob = s.measure_forced(&p, outcome).unwrap();
                assert_eq!(prob, 0.5);
                m[i] = outcome;
            }
            let gamma_even = m[1]; // site 2
            let gamma_odd = m[0] * m[2]; // sites 1, 3
            assert_eq!(s.expectation(&pauli("XIIIX")).unwrap(), Some(gamma_even));
            assert_eq!(s.expectation(&pauli("ZIIIZ")).unwrap(), Some(gamma_odd));
            assert_eq!(s.entropy_bits(&[0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn forced_zero_probability_branch_reports_zero() {
        let mut s = StabilizerState::zero(1);
        let prob = s.measure_forced(&pauli("Z"), -1).unwrap();
        assert_eq!(prob, 0.0);
        assert_eq!(s.expectation(&pauli("Z")).unwrap(), Some(1));
    }

    #[test]
    fn validation_rejects_bad_groups() {
        let anti = StabilizerState {
            n: 1,
            gens: vec![pauli("X"), pauli("Z")],
        };
        assert!(anti.validate().is_err());
        let dependent = StabilizerState {
            n: 2,
            gens: vec![pauli("XX"), pauli("XX")],
        };
        assert!(dependent.validate().is_err());
        let non_hermitian = StabilizerState {
            n: 1,
            gens: vec![pauli("iX")],
        };
        assert!(non_hermitian.validate().is_err());
    }

    #[test]
    fn mixed_state_measurement_extends_group() {
        // Maximally mixed qubit: no generators.
        let mut s = StabilizerState { n: 1, gens: vec![] };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let rec = s.measure(&pauli("Z"), &mut rng).unwrap();
        assert!(!rec.deterministic);
        assert_eq!(s.expectation(&pauli("Z")).unwrap(), Some(rec.outcome));
    }
}
