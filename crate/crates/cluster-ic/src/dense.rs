//! Exact state-vector / density-operator backend for small systems.
//!
//! This is the brute-force oracle behind every other module and the only
//! backend for non-Clifford channels. Qubit `q` corresponds to bit `q` of
//! the basis index (little-endian), so "appending" an environment qubit
//! gives it the next free index.

use nalgebra::{Complex, DMatrix};

use crate::pauli::PauliOperator;
use crate::Error;

pub type C64 = Complex<f64>;

/// Size cap for pure state vectors.
pub const PURE_CAP: usize = 22;
/// Size cap for density operators.
pub const MIXED_CAP: usize = 14;

const NORM_TOL: f64 = 1e-10;
/// Eigenvalues in [−EIG_CLIP, 0) are clipped to 0 before entropies;
/// anything more negative is an error.
const EIG_CLIP: f64 = 1e-10;

#[derive(Clone, Debug)]
enum Data {
    Pure(Vec<C64>),
    Mixed(DMatrix<C64>),
}

/// An exact quantum state, either a vector or a density operator.
#[derive(Clone, Debug)]
pub struct DenseState {
    n: usize,
    data: Data,
}

impl DenseState {
    pub fn zero(n: usize) -> Result<Self, Error> {
        check_cap(n, PURE_CAP, "pure")?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(DenseState {
            n,
            data: Data::Pure(amps),
        })
    }

    pub fn plus(n: usize) -> Result<Self, Error> {
        let mut s = Self::zero(n)?;
        for q in 0..n {
            s.apply_unitary(&gate_h(), &[q])?;
        }
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self, Error> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(Error::Consistency(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        check_cap(n, PURE_CAP, "pure")?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Consistency(format!("norm² = {norm}, not 1")));
        }
        Ok(DenseState {
            n,
            data: Data::Pure(amps),
        })
    }

    pub fn from_density(rho: DMatrix<C64>) -> Result<Self, Error> {
        let dim = rho.nrows();
        let n = dim.trailing_zeros() as usize;
        if rho.ncols() != dim || dim != 1 << n {
            return Err(Error::Consistency("density matrix must be square 2^n".into()));
        }
        check_cap(n, MIXED_CAP, "mixed")?;
        let herm_dev = (&rho - rho.adjoint()).norm();
        let trace_dev = (rho.trace() - C64::new(1.0, 0.0)).norm();
        if herm_dev > 1e-8 || trace_dev > 1e-8 {
            return Err(Error::Consistency(format!(
                "density matrix invalid: hermiticity dev {herm_dev:.2e}, trace dev {trace_dev:.2e}"
            )));
        }
        Ok(DenseState {
            n,
            data: Data::Mixed(rho),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, Data::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.data {
            Data::Pure(v) => Some(v),
            Data::Mixed(_) => None,
        }
    }

    pub fn to_density(&self) -> Result<DMatrix<C64>, Error> {
        match &self.data {
            Data::Pure(v) => {
                check_cap(self.n, MIXED_CAP, "mixed")?;
                let dim = v.len();
                let mut rho = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        rho[(i, j)] = v[i] * v[j].conj();
                    }
                }
                Ok(rho)
            }
            Data::Mixed(m) => Ok(m.clone()),
        }
    }

    /// Force the density-operator representation in place.
    pub fn make_mixed(&mut self) -> Result<(), Error> {
        if let Data::Pure(_) = &self.data {
            let rho = self.to_density()?;
            self.data = Data::Mixed(rho);
        }
        Ok(())
    }

    /// Append `k` fresh qubits in the given pure state (dimension 2^k);
    /// they receive the next indices. Used to purify channels.
    pub fn append_qubits(&mut self, env: &[C64]) -> Result<(), Error> {
        let k = env.len().trailing_zeros() as usize;
        if env.len() != 1 << k {
            return Err(Error::Consistency("environment dim not a power of two".into()));
        }
        match &mut self.data {
            Data::Pure(v) => {
                check_cap(self.n + k, PURE_CAP, "pure")?;
                let mut out = vec![C64::new(0.0, 0.0); v.len() << k];
                for (e, &amp_e) in env.iter().enumerate() {
                    for (i, &amp) in v.iter().enumerate() {
                        out[(e << self.n) | i] = amp * amp_e;
                    }
                }
                *v = out;
            }
            Data::Mixed(m) => {
                check_cap(self.n + k, MIXED_CAP, "mixed")?;
                let dim = m.nrows();
                let edim = env.len();
                let mut out = DMatrix::zeros(dim << k, dim << k);
                for er in 0..edim {
                    for ec in 0..edim {
                        let w = env[er] * env[ec].conj();
                        for r in 0..dim {
                            for c in 0..dim {
                                out[((er << self.n) | r, (ec << self.n) | c)] = w * m[(r, c)];
                            }
                        }
                    }
                }
                *m = out;
            }
        }
        self.n += k;
        Ok(())
    }

    fn check_targets(&self, targets: &[usize]) -> Result<(), Error> {
        let mut seen = vec![false; self.n];
        for &t in targets {
            if t >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    n_qubits: self.n,
                });
            }
            if seen[t] {
                return Err(Error::DuplicateTarget(t));
            }
            seen[t] = true;
        }
        Ok(())
    }

    /// Apply an arbitrary (not necessarily unitary) operator to the ket
    /// side; internal building block.
    fn apply_left(&mut self, op: &DMatrix<C64>, targets: &[usize]) {
        match &mut self.data {
            Data::Pure(v) => apply_op_vec(v, self.n, op, targets),
            Data::Mixed(m) => {
                for mut col in m.column_iter_mut() {
                    let mut v: Vec<C64> = col.iter().copied().collect();
                    apply_op_vec(&mut v, self.n, op, targets);
                    for (dst, src) in col.iter_mut().zip(v) {
                        *dst = src;
                    }
                }
            }
        }
    }

    /// U ρ U† (or U|ψ⟩); unitarity is the caller's responsibility.
    pub fn apply_unitary(&mut self, u: &DMatrix<C64>, targets: &[usize]) -> Result<(), Error> {
        self.check_targets(targets)?;
        if u.nrows() != 1 << targets.len() || u.ncols() != u.nrows() {
            return Err(Error::Consistency(format!(
                "operator dim {}×{} does not match {} targets",
                u.nrows(),
                u.ncols(),
                targets.len()
            )));
        }
        self.apply_left(u, targets);
        if let Data::Mixed(m) = &mut self.data {
            // right multiplication by U†: ρU† = (U ρ†)†
            let mut tmp = DenseState {
                n: self.n,
                data: Data::Mixed(m.adjoint()),
            };
            tmp.apply_left(u, targets);
            let Data::Mixed(t) = tmp.data else { unreachable!() };
            *m = t.adjoint();
        }
        Ok(())
    }

    /// ρ → Σ_a K_a ρ K_a†; converts pure → mixed when there is more than
    /// one Kraus operator.
    pub fn apply_channel(&mut self, ch: &KrausChannel, targets: &[usize]) -> Result<(), Error> {
        self.check_targets(targets)?;
        if ch.n_target_qubits() != targets.len() {
            return Err(Error::Consistency(format!(
                "channel acts on {} qubits, got {} targets",
                ch.n_target_qubits(),
                targets.len()
            )));
        }
        if ch.ops.len() == 1 {
            // trace preservation makes a single Kraus operator unitary
            return self.apply_unitary(&ch.ops[0], targets);
        }
        self.make_mixed()?;
        let Data::Mixed(rho) = &self.data else { unreachable!() };
        let mut acc = DMatrix::zeros(rho.nrows(), rho.ncols());
        for k in &ch.ops {
            let mut term = DenseState {
                n: self.n,
                data: self.data.clone(),
            };
            term.apply_left(k, targets);
            let Data::Mixed(m) = term.data else { unreachable!() };
            let mut adj = DenseState {
                n: self.n,
                data: Data::Mixed(m.adjoint()),
            };
            adj.apply_left(k, targets);
            let Data::Mixed(m) = adj.data else { unreachable!() };
            acc += m.adjoint();
        }
        self.data = Data::Mixed(acc);
        Ok(())
    }

    /// Apply a Pauli operator exactly (cheap permutation + phases).
    pub fn apply_pauli(&mut self, p: &PauliOperator) -> Result<(), Error> {
        if p.n_qubits() != self.n {
            return Err(Error::SizeMismatch(p.n_qubits(), self.n));
        }
        match &mut self.data {
            Data::Pure(v) => apply_pauli_vec(v, p),
            Data::Mixed(m) => {
                // PρP†: left by P, right by P†
                for mut col in m.column_iter_mut() {
                    let mut v: Vec<C64> = col.iter().copied().collect();
                    apply_pauli_vec(&mut v, p);
                    for (dst, src) in col.iter_mut().zip(v) {
                        *dst = src;
                    }
                }
                let mut adj = m.adjoint();
                for mut col in adj.column_iter_mut() {
                    let mut v: Vec<C64> = col.iter().copied().collect();
                    apply_pauli_vec(&mut v, p);
                    for (dst, src) in col.iter_mut().zip(v) {
                        *dst = src;
                    }
                }
                *m = adj.adjoint();
            }
        }
        Ok(())
    }

    /// Born-rule branches of a projective measurement of a Hermitian Pauli.
    /// Branches with probability below `NORM_TOL` are dropped.
    pub fn measure_pauli(&self, p: &PauliOperator) -> Result<Vec<(f64, i8, DenseState)>, Error> {
        if p.n_qubits() != self.n {
            return Err(Error::SizeMismatch(p.n_qubits(), self.n));
        }
        p.sign()?;
        let mut branches = Vec::new();
        match &self.data {
            Data::Pure(v) => {
                let mut pv = v.clone();
                apply_pauli_vec(&mut pv, p);
                for outcome in [1i8, -1] {
                    let s = outcome as f64;
                    let proj: Vec<C64> = v.iter().zip(&pv).map(|(a, b)| (a + s * b) * 0.5).collect();
                    let prob: f64 = proj.iter().map(|a| a.norm_sqr()).sum();
                    if prob < NORM_TOL {
                        continue;
                    }
                    let norm = prob.sqrt();
                    let renorm: Vec<C64> = proj.into_iter().map(|a| a / norm).collect();
                    branches.push((
                        prob,
                        outcome,
                        DenseState {
                            n: self.n,
                            data: Data::Pure(renorm),
                        },
                    ));
                }
            }
            Data::Mixed(rho) => {
                // P± ρ P± = (ρ ± Pρ ± ρP + PρP)/4, with ρP = (Pρ)† and
                // PρP = P·(ρP) for Hermitian P.
                let pr = left_pauli_mat(rho, p); // Pρ
                let rp = pr.adjoint(); // ρP
                let prp = left_pauli_mat(&rp, p); // PρP
                for outcome in [1i8, -1] {
                    let s = C64::new(outcome as f64, 0.0);
                    let proj = (rho + &pr * s + &rp * s + &prp) * c(0.25);
                    let prob = proj.trace().re;
                    if prob < NORM_TOL {
                        continue;
                    }
                    let renorm = proj / C64::new(prob, 0.0);
                    branches.push((
                        prob,
                        outcome,
                        DenseState {
                            n: self.n,
                            data: Data::Mixed(renorm),
                        },
                    ));
                }
            }
        }
        let total: f64 = branches.iter().map(|b| b.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Consistency(format!(
                "measurement branch probabilities sum to {total}"
            )));
        }
        Ok(branches)
    }

    /// Born-rule branches of measuring a Hermitian operator with ±1
    /// spectrum on a set of target qubits.
    pub fn measure_hermitian(
        &self,
        b: &DMatrix<C64>,
        targets: &[usize],
    ) -> Result<Vec<(f64, i8, DenseState)>, Error> {
        self.check_targets(targets)?;
        let dim = 1usize << targets.len();
        if b.nrows() != dim || b.ncols() != dim {
            return Err(Error::Consistency("basis operator dimension mismatch".into()));
        }
        if (b - b.adjoint()).norm() > 1e-9 {
            return Err(Error::Consistency("measurement basis is not Hermitian".into()));
        }
        if (b * b - DMatrix::<C64>::identity(dim, dim)).norm() > 1e-9 {
            return Err(Error::Consistency(
                "measurement basis does not square to identity (±1 spectrum required)".into(),
            ));
        }
        let eye = DMatrix::<C64>::identity(dim, dim);
        let mut branches = Vec::new();
        for outcome in [1i8, -1] {
            let proj = (&eye + b * C64::new(outcome as f64, 0.0)) * C64::new(0.5, 0.0);
            let (prob, state) = self.apply_projector(&proj, targets)?;
            if prob >= NORM_TOL {
                branches.push((prob, outcome, state));
            }
        }
        let total: f64 = branches.iter().map(|b| b.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Consistency(format!(
                "measurement branch probabilities sum to {total}"
            )));
        }
        Ok(branches)
    }

    fn apply_projector(
        &self,
        proj: &DMatrix<C64>,
        targets: &[usize],
    ) -> Result<(f64, DenseState), Error> {
        let mut s = self.clone();
        s.apply_left(proj, targets);
        match &mut s.data {
            Data::Pure(v) => {
                let prob: f64 = v.iter().map(|a| a.norm_sqr()).sum();
                if prob >= NORM_TOL {
                    let norm = prob.sqrt();
                    for a in v.iter_mut() {
                        *a /= norm;
                    }
                }
                Ok((prob, s))
            }
            Data::Mixed(m) => {
                // Π ρ Π with Π² = Π = Π†
                let mut tmp = DenseState {
                    n: self.n,
                    data: Data::Mixed(m.adjoint()),
                };
                tmp.apply_left(proj, targets);
                let Data::Mixed(t) = tmp.data else { unreachable!() };
                *m = t.adjoint();
                let prob = m.trace().re;
                if prob >= NORM_TOL {
                    *m /= C64::new(prob, 0.0);
                }
                Ok((prob, s))
            }
        }
    }

    /// ⟨P⟩ (real part; the imaginary part must vanish for Hermitian P).
    pub fn expectation_pauli(&self, p: &PauliOperator) -> Result<f64, Error> {
        if p.n_qubits() != self.n {
            return Err(Error::SizeMismatch(p.n_qubits(), self.n));
        }
        p.sign()?;
        match &self.data {
            Data::Pure(v) => {
                let mut pv = v.clone();
                apply_pauli_vec(&mut pv, p);
                let val: C64 = v.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum();
                Ok(val.re)
            }
            Data::Mixed(m) => {
                let mut acc = C64::new(0.0, 0.0);
                let dim = m.nrows();
                for j in 0..dim {
                    let mut col = vec![C64::new(0.0, 0.0); dim];
                    col[j] = C64::new(1.0, 0.0);
                    apply_pauli_vec(&mut col, p);
                    // (P e_j) gives column j of P; Tr(ρP) = Σ_ij ρ_ij P_ji
                    for i in 0..dim {
                        acc += m[(j, i)] * col[i];
                    }
                }
                Ok(acc.re)
            }
        }
    }

    /// Reduced density operator on `keep` (output qubit `j` = `keep[j]`).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DMatrix<C64>, Error> {
        self.check_targets(keep)?;
        let k = keep.len();
        check_cap(k, MIXED_CAP, "mixed")?;
        let rest: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let kdim = 1usize << k;
        let mut out = DMatrix::<C64>::zeros(kdim, kdim);
        let index = |local: usize, r: usize| -> usize {
            let mut i = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                if local >> j & 1 == 1 {
                    i |= 1 << q;
                }
            }
            for (j, &q) in rest.iter().enumerate() {
                if r >> j & 1 == 1 {
                    i |= 1 << q;
                }
            }
            i
        };
        match &self.data {
            Data::Pure(v) => {
                for r in 0..1usize << rest.len() {
                    let sub: Vec<C64> = (0..kdim).map(|l| v[index(l, r)]).collect();
                    for a in 0..kdim {
                        for b in 0..kdim {
                            out[(a, b)] += sub[a] * sub[b].conj();
                        }
                    }
                }
            }
            Data::Mixed(m) => {
                for r in 0..1usize << rest.len() {
                    for a in 0..kdim {
                        for b in 0..kdim {
                            out[(a, b)] += m[(index(a, r), index(b, r))];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Von Neumann entropy of a region, in bits.
    pub fn entropy_bits(&self, region: &[usize]) -> Result<f64, Error> {
        let rho = self.partial_trace(region)?;
        entropy_of_density(&rho)
    }

    /// S(A) + S(B) − S(A∪B) in bits; A and B must be disjoint.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64, Error> {
        for qa in a {
            if b.contains(qa) {
                return Err(Error::DuplicateTarget(*qa));
            }
        }
        let mut ab: Vec<usize> = a.to_vec();
        ab.extend_from_slice(b);
        let mi = self.entropy_bits(a)? + self.entropy_bits(b)? - self.entropy_bits(&ab)?;
        if mi < -1e-9 {
            return Err(Error::Consistency(format!("mutual information {mi} < 0")));
        }
        Ok(mi)
    }

    pub fn validate(&self) -> Result<(), Error> {
        match &self.data {
            Data::Pure(v) => {
                let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum();
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::Consistency(format!("pure norm² drifted to {norm}")));
                }
            }
            Data::Mixed(m) => {
                let herm = (m - m.adjoint()).norm();
                let tr = (m.trace() - C64::new(1.0, 0.0)).norm();
                if herm > 1e-8 || tr > 1e-8 {
                    return Err(Error::Consistency(format!(
                        "mixed state invalid: herm dev {herm:.2e}, trace dev {tr:.2e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// P·M for a Pauli P (column-wise permutation + phases).
fn left_pauli_mat(m: &DMatrix<C64>, p: &PauliOperator) -> DMatrix<C64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        apply_pauli_vec(&mut v, p);
        for (dst, src) in col.iter_mut().zip(v) {
            *dst = src;
        }
    }
    out
}

fn check_cap(n: usize, cap: usize, kind: &'static str) -> Result<(), Error> {
    if n > cap {
        return Err(Error::SizeCap {
            n_qubits: n,
            cap,
            kind,
        });
    }
    Ok(())
}

/// In-place P|v⟩ using the bit representation (permutation + phases).
fn apply_pauli_vec(v: &mut [C64], p: &PauliOperator) {
    let mut xmask = 0usize;
    for i in p.x_bits().iter_ones() {
        xmask |= 1 << i;
    }
    let mut zmask = 0usize;
    for i in p.z_bits().iter_ones() {
        zmask |= 1 << i;
    }
    let phase = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ][p.phase_pow() as usize];
    let old = v.to_vec();
    for (i, amp) in old.iter().enumerate() {
        // (X^x Z^z)|i⟩ = (−1)^{z·i} |i ⊕ x⟩
        let mut a = *amp * phase;
        if (i & zmask).count_ones() & 1 == 1 {
            a = -a;
        }
        v[i ^ xmask] = a;
    }
}

/// Apply a 2^k×2^k operator to the listed target qubits of a state vector.
fn apply_op_vec(v: &mut [C64], n: usize, op: &DMatrix<C64>, targets: &[usize]) {
    let k = targets.len();
    let kdim = 1usize << k;
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let mut idx = vec![0usize; kdim];
    let mut local = vec![C64::new(0.0, 0.0); kdim];
    for r in 0..1usize << rest.len() {
        let mut base = 0usize;
        for (j, &q) in rest.iter().enumerate() {
            if r >> j & 1 == 1 {
                base |= 1 << q;
            }
        }
        for (l, slot) in idx.iter_mut().enumerate() {
            let mut i = base;
            for (j, &q) in targets.iter().enumerate() {
                if l >> j & 1 == 1 {
                    i |= 1 << q;
                }
            }
            *slot = i;
        }
        for (l, dst) in local.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..kdim {
                let o = op[(l, m)];
                if o != C64::new(0.0, 0.0) {
                    acc += o * v[idx[m]];
                }
            }
            *dst = acc;
        }
        for (l, &i) in idx.iter().enumerate() {
            v[i] = local[l];
        }
    }
}

/// Von Neumann entropy (bits) of a density matrix, with the documented
/// negative-eigenvalue clipping policy.
pub fn entropy_of_density(rho: &DMatrix<C64>) -> Result<f64, Error> {
    let eig = rho.clone().symmetric_eigen();
    let mut s = 0.0;
    for &lambda in eig.eigenvalues.iter() {
        let l = if lambda < 0.0 {
            if lambda < -EIG_CLIP {
                return Err(Error::Consistency(format!(
                    "density eigenvalue {lambda} below clipping tolerance"
                )));
            }
            0.0
        } else {
            lambda
        };
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

/// A CPTP channel given by Kraus operators on `k` qubits.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<DMatrix<C64>>,
    k: usize,
}

impl KrausChannel {
    /// Validates shape and completeness (Σ K†K = 1 to 1e−10).
    pub fn new(ops: Vec<DMatrix<C64>>) -> Result<Self, Error> {
        if ops.is_empty() {
            return Err(Error::Consistency("empty Kraus set".into()));
        }
        let dim = ops[0].nrows();
        let k = dim.trailing_zeros() as usize;
        if dim != 1 << k {
            return Err(Error::Consistency("Kraus dimension not a power of two".into()));
        }
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for op in &ops {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::Consistency("ragged Kraus set".into()));
            }
            sum += op.adjoint() * op;
        }
        let dev = (sum - DMatrix::<C64>::identity(dim, dim)).norm();
        let tol = 1e-10;
        if dev > tol {
            return Err(Error::CptpViolation { deviation: dev, tol });
        }
        Ok(KrausChannel { ops, k })
    }

    pub fn n_target_qubits(&self) -> usize {
        self.k
    }

    pub fn ops(&self) -> &[DMatrix<C64>] {
        &self.ops
    }
}

// --- standard gates -------------------------------------------------------

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn gate_h() -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), -c(s)])
}

pub fn gate_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn gate_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), -C64::i(), C64::i(), c(0.0)])
}

pub fn gate_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), -c(1.0)])
}

pub fn gate_s() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), C64::i()])
}

/// e^{−iθX} = cosθ·1 − i sinθ·X.
pub fn gate_rx(theta: f64) -> DMatrix<C64> {
    let (s, co) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co), -C64::i() * s, -C64::i() * s, c(co)])
}

/// e^{iθY} = cosθ·1 + i sinθ·Y (a real rotation).
pub fn gate_exp_iy(theta: f64) -> DMatrix<C64> {
    let (s, co) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co), c(s), -c(s), c(co)])
}

/// Two-qubit gate on local qubits (0 = control = first target listed).
pub fn controlled(u: &DMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(4, 4);
    // local basis index = control_bit + 2*target_bit
    for tr in 0..2 {
        for tc in 0..2 {
            m[(1 + 2 * tr, 1 + 2 * tc)] = u[(tr, tc)];
        }
    }
    m
}

pub fn gate_cnot() -> DMatrix<C64> {
    controlled(&gate_x())
}

pub fn gate_cz() -> DMatrix<C64> {
    controlled(&gate_z())
}

pub fn gate_swap() -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(4, 4);
    m[(0, 0)] = c(1.0);
    m[(3, 3)] = c(1.0);
    m[(1, 2)] = c(1.0);
    m[(2, 1)] = c(1.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{PauliKind, PauliOperator};

    fn pauli(label: &str) -> PauliOperator {
        PauliOperator::from_label(label).unwrap()
    }

    fn z_dephase(p: f64) -> KrausChannel {
        KrausChannel::new(vec![
            DMatrix::<C64>::identity(2, 2) * c((1.0 - p).sqrt()),
            gate_z() * c(p.sqrt()),
        ])
        .unwrap()
    }

    #[test]
    fn zero_and_plus_states() {
        let z = DenseState::zero(2).unwrap();
        assert_eq!(z.expectation_pauli(&pauli("ZI")).unwrap(), 1.0);
        let p = DenseState::plus(2).unwrap();
        assert!((p.expectation_pauli(&pauli("XX")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_p0_is_identity() {
        let mut s = DenseState::plus(1).unwrap();
        let before = s.amplitudes().unwrap().to_vec();
        let ch = KrausChannel::new(vec![DMatrix::<C64>::identity(2, 2)]).unwrap();
        s.apply_channel(&ch, &[0]).unwrap();
        let after = s.amplitudes().unwrap().to_vec();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn half_dephasing_fully_mixes_plus() {
        let mut s = DenseState::plus(1).unwrap();
        s.apply_channel(&z_dephase(0.5), &[0]).unwrap();
        assert!(!s.is_pure());
        let ent = s.entropy_bits(&[0]).unwrap();
        assert!((ent - 1.0).abs() < 1e-9, "entropy = {ent}");
    }

    #[test]
    fn channel_preserves_trace_and_hermiticity() {
        let mut s = DenseState::plus(2).unwrap();
        s.apply_unitary(&gate_cnot(), &[0, 1]).unwrap();
        s.apply_channel(&z_dephase(0.3), &[1]).unwrap();
        s.validate().unwrap();
        s.apply_channel(&z_dephase(0.2), &[0]).unwrap();
        s.validate().unwrap();
    }

    #[test]
    fn cptp_violation_is_rejected() {
        let bad = KrausChannel::new(vec![gate_z() * c(0.9)]);
        assert!(matches!(bad, Err(Error::CptpViolation { .. })));
    }

    #[test]
    fn measure_x_on_plus_is_deterministic() {
        let s = DenseState::plus(1).unwrap();
        let branches = s.measure_pauli(&pauli("X")).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].1, 1);
        assert!((branches[0].0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_x_on_zero_is_unbiased() {
        let s = DenseState::zero(1).unwrap();
        let branches = s.measure_pauli(&pauli("X")).unwrap();
        assert_eq!(branches.len(), 2);
        for (prob, _, post) in &branches {
            assert!((prob - 0.5).abs() < 1e-12);
            post.validate().unwrap();
        }
    }

    #[test]
    fn bell_pair_mutual_information_is_two() {
        let mut s = DenseState::zero(2).unwrap();
        s.apply_unitary(&gate_h(), &[0]).unwrap();
        s.apply_unitary(&gate_cnot(), &[0, 1]).unwrap();
        let mi = s.mutual_information(&[0], &[1]).unwrap();
        assert!((mi - 2.0).abs() < 1e-9);
        let prod = DenseState::plus(3).unwrap();
        assert!(prod.mutual_information(&[0], &[2]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pure_state_global_entropy_vanishes() {
        let mut s = DenseState::plus(3).unwrap();
        s.apply_unitary(&gate_cz(), &[0, 1]).unwrap();
        s.apply_unitary(&gate_cz(), &[1, 2]).unwrap();
        assert!(s.entropy_bits(&[0, 1, 2]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn five_qubit_cluster_trajectories() {
        // Exhaustive bulk X-measurement on the 5-site chain cluster state:
        // 8 trajectories of probability 1/8, each leaving the boundary
        // pair maximally entangled.
        let mut s = DenseState::plus(5).unwrap();
        for q in 0..4 {
            s.apply_unitary(&gate_cz(), &[q, q + 1]).unwrap();
        }
        let mut stack = vec![(1.0f64, s, 0usize)];
        let bulk = [1usize, 2, 3];
        let mut leaves = Vec::new();
        while let Some((prob, state, depth)) = stack.pop() {
            if depth == bulk.len() {
                leaves.push((prob, state));
                continue;
            }
            let p = PauliOperator::single(5, bulk[depth], PauliKind::X).unwrap();
            for (bp, _, post) in state.measure_pauli(&p).unwrap() {
                stack.push((prob * bp, post, depth + 1));
            }
        }
        assert_eq!(leaves.len(), 8);
        let total: f64 = leaves.iter().map(|l| l.0).sum();
        assert!((total - 1.0).abs() < 1e-10);
        for (prob, state) in &leaves {
            assert!((prob - 0.125).abs() < 1e-10);
            assert!((state.entropy_bits(&[0]).unwrap() - 1.0).abs() < 1e-9);
            assert!(state.entropy_bits(&[0, 4]).unwrap() < 1e-9);
        }
    }

    #[test]
    fn block_density_mutual_information_matches_formula() {
        // Two equal-probability 2×2 charge blocks with off-diagonal 0.6:
        // I(L:R) = 2 − H({p_m}) − Σ p_m S(block).
        let sc = 0.6;
        let mut rho = DMatrix::<C64>::zeros(4, 4);
        // block on {|00⟩, |11⟩}
        for (a, b) in [(0usize, 0usize), (0, 3), (3, 0), (3, 3)] {
            rho[(a, b)] = c(0.25 * if a == b { 1.0 } else { sc });
        }
        // block on {|01⟩, |10⟩}
        for (a, b) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
            rho[(a, b)] = c(0.25 * if a == b { 1.0 } else { sc });
        }
        let s = DenseState::from_density(rho).unwrap();
        let mi = s.mutual_information(&[0], &[1]).unwrap();
        let block = DMatrix::<C64>::from_row_slice(2, 2, &[c(0.5), c(0.5 * sc), c(0.5 * sc), c(0.5)]);
        let expected = 2.0 - 1.0 - entropy_of_density(&block).unwrap();
        assert!((mi - expected).abs() < 1e-9, "mi={mi}, expected={expected}");
    }

    #[test]
    fn data_processing_inequality_under_local_channels() {
        let mut s = DenseState::plus(3).unwrap();
        s.apply_unitary(&gate_cz(), &[0, 1]).unwrap();
        s.apply_unitary(&gate_cz(), &[1, 2]).unwrap();
        let mut cur = s.clone();
        let mut last = cur.mutual_information(&[0], &[1, 2]).unwrap();
        for p in [0.05, 0.15, 0.3] {
            cur.apply_channel(&z_dephase(p), &[2]).unwrap();
            let mi = cur.mutual_information(&[0], &[1, 2]).unwrap();
            assert!(mi <= last + 1e-9, "I increased: {last} -> {mi}");
            last = mi;
        }
    }

    #[test]
    fn size_caps_are_enforced() {
        assert!(matches!(
            DenseState::zero(23),
            Err(Error::SizeCap { kind: "pure", .. })
        ));
        let s = DenseState::plus(16).unwrap();
        assert!(matches!(
            s.partial_trace(&(0..15).collect::<Vec<_>>()),
            Err(Error::SizeCap { kind: "mixed", .. })
        ));
    }

    #[test]
    fn measure_hermitian_general_basis() {
        // Measure (X+Z)/√2 on |0⟩: probabilities cos²(π/8), sin²(π/8).
        let s = DenseState::zero(1).unwrap();
        let b = (gate_x() + gate_z()) * c(std::f64::consts::FRAC_1_SQRT_2);
        let branches = s.measure_hermitian(&b, &[0]).unwrap();
        assert_eq!(branches.len(), 2);
        let p_plus = branches.iter().find(|x| x.1 == 1).unwrap().0;
        let expect = (std::f64::consts::PI / 8.0).cos().powi(2);
        assert!((p_plus - expect).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_of_mixed_states() {
        let mut s = DenseState::plus(2).unwrap();
        s.apply_unitary(&gate_cz(), &[0, 1]).unwrap();
        s.apply_channel(&z_dephase(0.25), &[1]).unwrap();
        let r0 = s.partial_trace(&[0]).unwrap();
        assert!((r0.trace().re - 1.0).abs() < 1e-10);
        let full = s.partial_trace(&[0, 1]).unwrap();
        assert!((&full - s.to_density().unwrap()).norm() < 1e-10);
    }
}
