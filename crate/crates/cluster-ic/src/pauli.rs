//! Phase-exact Pauli operators in the symplectic GF(2) representation.
//!
//! An operator is stored as `i^k · X^x Z^z` with `x`, `z` bit-vectors over
//! the qubits and `k ∈ {0,1,2,3}`. The full 4-element phase group is
//! tracked even though only ±1 is observable, so products stay exact.
//! In this convention the single-qubit `Y` is `(x=1, z=1, k=1)`.

use std::fmt;

use nalgebra::{Complex, DMatrix};

use crate::gf2::BitVec;
use crate::Error;

type C64 = Complex<f64>;

/// Single-qubit Pauli label.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PauliKind {
    I,
    X,
    Y,
    Z,
}

/// An n-qubit Pauli operator with exact phase.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliOperator {
    n: usize,
    x: BitVec,
    z: BitVec,
    /// Exponent k in the global phase i^k.
    phase_pow: u8,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        PauliOperator {
            n,
            x: BitVec::zeros(n),
            z: BitVec::zeros(n),
            phase_pow: 0,
        }
    }

    /// A single-qubit Pauli embedded in `n` qubits.
    pub fn single(n: usize, qubit: usize, kind: PauliKind) -> Result<Self, Error> {
        if qubit >= n {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                n_qubits: n,
            });
        }
        let mut p = Self::identity(n);
        match kind {
            PauliKind::I => {}
            PauliKind::X => p.x.set(qubit, true),
            PauliKind::Z => p.z.set(qubit, true),
            PauliKind::Y => {
                p.x.set(qubit, true);
                p.z.set(qubit, true);
                p.phase_pow = 1;
            }
        }
        Ok(p)
    }

    /// Parse a label like `"XIZ"`, `"-YY"`, `"iXZ"`, `"-iZ"`; leftmost
    /// character is qubit 0.
    pub fn from_label(label: &str) -> Result<Self, Error> {
        let mut k: u8 = 0;
        let mut rest = label;
        if let Some(s) = rest.strip_prefix("-i") {
            k = 3;
            rest = s;
        } else if let Some(s) = rest.strip_prefix('-') {
            k = 2;
            rest = s;
        } else if let Some(s) = rest.strip_prefix('i') {
            k = 1;
            rest = s;
        } else if let Some(s) = rest.strip_prefix('+') {
            rest = s;
        }
        let n = rest.chars().count();
        let mut p = Self::identity(n);
        for (q, c) in rest.chars().enumerate() {
            match c {
                'I' | '.' => {}
                'X' => p.x.set(q, true),
                'Z' => p.z.set(q, true),
                'Y' => {
                    p.x.set(q, true);
                    p.z.set(q, true);
                    k = (k + 1) % 4;
                }
                _ => {
                    return Err(Error::Config {
                        path: "pauli-label".into(),
                        message: format!("unknown Pauli letter {c:?}"),
                    })
                }
            }
        }
        p.phase_pow = k;
        Ok(p)
    }

    /// Product of single-site letters; sites not listed are identity.
    pub fn from_sites(n: usize, sites: &[(usize, PauliKind)]) -> Result<Self, Error> {
        let mut p = Self::identity(n);
        for &(q, kind) in sites {
            p = p.mul(&Self::single(n, q, kind)?)?;
        }
        Ok(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> &BitVec {
        &self.x
    }

    pub fn z_bits(&self) -> &BitVec {
        &self.z
    }

    pub fn phase_pow(&self) -> u8 {
        self.phase_pow
    }

    /// The letter acting on one qubit, ignoring the global phase.
    pub fn kind_at(&self, q: usize) -> PauliKind {
        match (self.x.get(q), self.z.get(q)) {
            (false, false) => PauliKind::I,
            (true, false) => PauliKind::X,
            (false, true) => PauliKind::Z,
            (true, true) => PauliKind::Y,
        }
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.x.count_ones() + self.z.count_ones() - self.x.count_common(&self.z)
    }

    /// Phase exponent relative to the canonical Hermitian word ∏ W_q with
    /// W ∈ {I,X,Y,Z}: `self = i^sign_pow · ∏ W_q`.
    fn sign_pow(&self) -> u8 {
        let y_count = self.x.count_common(&self.z) as u8;
        (self.phase_pow + 3 * (y_count % 4)) % 4
    }

    pub fn is_hermitian(&self) -> bool {
        self.sign_pow().is_multiple_of(2)
    }

    /// ±1 prefactor of a Hermitian operator.
    pub fn sign(&self) -> Result<i8, Error> {
        match self.sign_pow() {
            0 => Ok(1),
            2 => Ok(-1),
            k => Err(Error::NonHermitian { phase_pow: k }),
        }
    }

    pub fn negate(&mut self) {
        self.phase_pow = (self.phase_pow + 2) % 4;
    }

    /// Group product `self · other` with exact phase.
    pub fn mul(&self, other: &PauliOperator) -> Result<PauliOperator, Error> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        // (X^a Z^b)(X^c Z^d) = (-1)^{b·c} X^{a+c} Z^{b+d}
        let cross = self.z.count_common(&other.x) as u8;
        let mut x = self.x.clone();
        x.xor_assign(&other.x);
        let mut z = self.z.clone();
        z.xor_assign(&other.z);
        Ok(PauliOperator {
            n: self.n,
            x,
            z,
            phase_pow: (self.phase_pow + other.phase_pow + 2 * (cross % 2)) % 4,
        })
    }

    /// True iff the symplectic form of the two operators vanishes.
    pub fn commutes(&self, other: &PauliOperator) -> bool {
        !(self.x.dot(&other.z) ^ self.z.dot(&other.x))
    }

    // Clifford conjugations P -> U P U†, used to push circuits through
    // stabilizer generators.

    pub fn conj_h(&mut self, q: usize) {
        if self.x.get(q) && self.z.get(q) {
            self.phase_pow = (self.phase_pow + 2) % 4;
        }
        let (xq, zq) = (self.x.get(q), self.z.get(q));
        self.x.set(q, zq);
        self.z.set(q, xq);
    }

    pub fn conj_s(&mut self, q: usize) {
        if self.x.get(q) {
            self.z.flip(q);
            self.phase_pow = (self.phase_pow + 1) % 4;
        }
    }

    pub fn conj_cnot(&mut self, control: usize, target: usize) {
        if self.x.get(control) {
            self.x.flip(target);
        }
        if self.z.get(target) {
            self.z.flip(control);
        }
    }

    pub fn conj_cz(&mut self, a: usize, b: usize) {
        if self.x.get(a) && self.x.get(b) {
            self.phase_pow = (self.phase_pow + 2) % 4;
        }
        if self.x.get(a) {
            self.z.flip(b);
        }
        if self.x.get(b) {
            self.z.flip(a);
        }
    }

    /// Re-embed into a register with more qubits; existing qubits keep
    /// their indices, new ones are identity.
    pub fn embed(&self, new_n: usize) -> Result<PauliOperator, Error> {
        if new_n < self.n {
            return Err(Error::SizeMismatch(self.n, new_n));
        }
        let mut p = PauliOperator::identity(new_n);
        for i in self.x.iter_ones() {
            p.x.set(i, true);
        }
        for i in self.z.iter_ones() {
            p.z.set(i, true);
        }
        p.phase_pow = self.phase_pow;
        Ok(p)
    }

    /// Dense matrix form, for small-system oracles.
    pub fn to_matrix(&self) -> Result<DMatrix<C64>, Error> {
        const CAP: usize = 12;
        if self.n > CAP {
            return Err(Error::SizeCap {
                n_qubits: self.n,
                cap: CAP,
                kind: "pauli-to-matrix",
            });
        }
        let dim = 1usize << self.n;
        let phase = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ][self.phase_pow as usize];
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            // X^x flips bits; Z^z contributes (-1)^{z·col} acting first.
            let mut row = col;
            let mut amp = phase;
            for q in 0..self.n {
                let bit = col >> q & 1;
                if self.z.get(q) && bit == 1 {
                    amp = -amp;
                }
                if self.x.get(q) {
                    row ^= 1 << q;
                }
            }
            m[(row, col)] = amp;
        }
        Ok(m)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign_pow() {
            0 => write!(f, "+")?,
            1 => write!(f, "i")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i")?,
        }
        for q in 0..self.n {
            let c = match self.kind_at(q) {
                PauliKind::I => 'I',
                PauliKind::X => 'X',
                PauliKind::Y => 'Y',
                PauliKind::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_times_z_is_minus_i_y() {
        let x = PauliOperator::from_label("X").unwrap();
        let z = PauliOperator::from_label("Z").unwrap();
        let p = x.mul(&z).unwrap();
        assert_eq!(p, PauliOperator::from_label("-iY").unwrap());
        assert_eq!(p.to_string(), "-iY");
    }

    #[test]
    fn hermitian_square_is_identity() {
        for label in ["X", "Y", "Z", "XZ", "-YY", "XYZ", "-ZIZ"] {
            let p = PauliOperator::from_label(label).unwrap();
            assert!(p.is_hermitian(), "{label}");
            let sq = p.mul(&p).unwrap();
            assert_eq!(sq, PauliOperator::identity(p.n_qubits()), "{label}");
        }
    }

    #[test]
    fn commutation_matches_symplectic_form() {
        let labels = ["II", "XI", "IY", "ZZ", "XZ", "ZX", "YY", "XX", "YZ"];
        for a in labels {
            for b in labels {
                let p = PauliOperator::from_label(a).unwrap();
                let q = PauliOperator::from_label(b).unwrap();
                let (pm, qm) = (p.to_matrix().unwrap(), q.to_matrix().unwrap());
                let commutator_norm = (&pm * &qm - &qm * &pm).norm();
                assert_eq!(p.commutes(&q), commutator_norm < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn two_qubit_product_matches_matrix_oracle() {
        let p = PauliOperator::from_label("XZ").unwrap();
        let q = PauliOperator::from_label("ZX").unwrap();
        let prod = p.mul(&q).unwrap();
        let oracle = p.to_matrix().unwrap() * q.to_matrix().unwrap();
        let diff = (prod.to_matrix().unwrap() - oracle).norm();
        assert!(diff < 1e-14, "diff = {diff}");
    }

    #[test]
    fn product_phase_matches_matrix_oracle_exhaustively() {
        let labels = ["I", "X", "Y", "Z"];
        for a in labels {
            for b in labels {
                for c in labels {
                    for d in labels {
                        let p = PauliOperator::from_label(&format!("{a}{b}")).unwrap();
                        let q = PauliOperator::from_label(&format!("{c}{d}")).unwrap();
                        let prod = p.mul(&q).unwrap();
                        let oracle = p.to_matrix().unwrap() * q.to_matrix().unwrap();
                        let diff = (prod.to_matrix().unwrap() - oracle).norm();
                        assert!(diff < 1e-14, "{a}{b} * {c}{d}");
                    }
                }
            }
        }
    }

    #[test]
    fn conjugation_rules_match_matrix_oracle() {
        use nalgebra::dmatrix;
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64| C64::new(re, 0.0);
        let h = dmatrix![c(s2), c(s2); c(s2), -c(s2)];
        let s = dmatrix![c(1.0), c(0.0); c(0.0), C64::new(0.0, 1.0)];
        let eye = DMatrix::<C64>::identity(2, 2);
        let kron2 = |a: &DMatrix<C64>, first: bool| {
            // qubit 0 is the least-significant bit
            if first {
                eye.kronecker(a)
            } else {
                a.kronecker(&eye)
            }
        };
        let mut cnot = DMatrix::<C64>::zeros(4, 4);
        for col in 0..4usize {
            let (c0, t) = (col & 1, col >> 1 & 1);
            let row = c0 | ((t ^ c0) << 1);
            cnot[(row, col)] = C64::new(1.0, 0.0);
        }
        let mut cz = DMatrix::<C64>::identity(4, 4);
        cz[(3, 3)] = C64::new(-1.0, 0.0);

        let labels = ["I", "X", "Y", "Z"];
        for a in labels {
            for b in labels {
                let p = PauliOperator::from_label(&format!("{a}{b}")).unwrap();
                let m = p.to_matrix().unwrap();

                let mut ph = p.clone();
                ph.conj_h(0);
                let u = kron2(&h, true);
                assert!((ph.to_matrix().unwrap() - &u * &m * u.adjoint()).norm() < 1e-12);

                let mut ps = p.clone();
                ps.conj_s(1);
                let u = kron2(&s, false);
                assert!((ps.to_matrix().unwrap() - &u * &m * u.adjoint()).norm() < 1e-12);

                let mut pc = p.clone();
                pc.conj_cnot(0, 1);
                assert!((pc.to_matrix().unwrap() - &cnot * &m * cnot.adjoint()).norm() < 1e-12);

                let mut pz = p.clone();
                pz.conj_cz(0, 1);
                assert!((pz.to_matrix().unwrap() - &cz * &m * cz.adjoint()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_and_display() {
        let p = PauliOperator::from_label("XIYZ").unwrap();
        assert_eq!(p.weight(), 3);
        assert_eq!(p.to_string(), "+XIYZ");
        assert_eq!(PauliOperator::from_label("-Y").unwrap().to_string(), "-Y");
    }
}
