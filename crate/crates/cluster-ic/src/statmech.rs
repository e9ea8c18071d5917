//! Quenched-disorder Ising machinery backing the 2D analysis: random-bond
//! Ising model (RBIM) instances on a cylinder, Nishimori-line disorder,
//! three mutually checking correlation estimators, the perturbed-coupling
//! ensemble, and threshold scans.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::decoder::{BenchmarkRow, logical_failure_rate};
use crate::error::Error;

/// Couplings are capped at this magnitude so the zero-temperature limit
/// (`p = 0`, `β = ∞`) stays finite in arithmetic.
const BETA_MAX: f64 = 30.0;

/// Spins live on an `lx × ly` cylinder: open in the column direction,
/// periodic around `y`. Horizontal bonds join neighbouring columns, vertical
/// bonds close each ring.
#[derive(Clone, Debug)]
pub struct RBIMInstance {
    lx: usize,
    ly: usize,
    /// Bond signs, horizontal block then vertical block.
    pub bonds: Vec<i8>,
    /// Flip strength defining the temperature, `β = atanh(1−2p)`.
    pub p: f64,
    /// Ferromagnetic coupling perturbation.
    pub lambda: f64,
}

impl RBIMInstance {
    pub fn new(lx: usize, ly: usize, p: f64, lambda: f64, bonds: Vec<i8>) -> Result<Self, Error> {
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidLattice(format!(
                "RBIM cylinder needs at least 2×2 spins, got {lx}×{ly}"
            )));
        }
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::ParamOutOfRange { name: "p", value: p });
        }
        if lambda < 0.0 {
            return Err(Error::ParamOutOfRange {
                name: "lambda",
                value: lambda,
            });
        }
        let expected = (lx - 1) * ly + lx * ly;
        if bonds.len() != expected {
            return Err(Error::SizeMismatch(expected, bonds.len()));
        }
        Ok(Self {
            lx,
            ly,
            bonds,
            p,
            lambda,
        })
    }

    /// All-ferromagnetic instance.
    pub fn ferromagnetic(lx: usize, ly: usize, p: f64) -> Result<Self, Error> {
        let n = (lx - 1) * ly + lx * ly;
        Self::new(lx, ly, p, 0.0, vec![1; n])
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_spins(&self) -> usize {
        self.lx * self.ly
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn spin(&self, c: usize, y: usize) -> usize {
        debug_assert!(c < self.lx && y < self.ly);
        c * self.ly + y
    }

    pub fn hbond(&self, c: usize, y: usize) -> usize {
        debug_assert!(c < self.lx - 1 && y < self.ly);
        c * self.ly + y
    }

    pub fn vbond(&self, c: usize, y: usize) -> usize {
        debug_assert!(c < self.lx && y < self.ly);
        (self.lx - 1) * self.ly + c * self.ly + y
    }

    /// The two spins joined by a bond.
    pub fn bond_endpoints(&self, bond: usize) -> (usize, usize) {
        let nh = (self.lx - 1) * self.ly;
        if bond < nh {
            let (c, y) = (bond / self.ly, bond % self.ly);
            (self.spin(c, y), self.spin(c + 1, y))
        } else {
            let b = bond - nh;
            let (c, y) = (b / self.ly, b % self.ly);
            (self.spin(c, y), self.spin(c, (y + 1) % self.ly))
        }
    }

    /// Nishimori inverse temperature, capped for arithmetic.
    pub fn beta(&self) -> f64 {
        (1.0 - 2.0 * self.p).atanh().min(BETA_MAX)
    }

    /// Effective coupling `βJ` of one bond. Unperturbed: `β·m`. Perturbed:
    /// `atanh[(tanh λ + (1−2p)m) / (1 + tanh λ (1−2p) m)]`.
    pub fn coupling(&self, bond: usize) -> f64 {
        let m = self.bonds[bond] as f64;
        if self.lambda == 0.0 {
            self.beta() * m
        } else {
            let t = self.lambda.tanh();
            let x = 1.0 - 2.0 * self.p;
            ((t + x * m) / (1.0 + t * x * m))
                .atanh()
                .clamp(-BETA_MAX, BETA_MAX)
        }
    }

    fn couplings(&self) -> Vec<f64> {
        (0..self.n_bonds()).map(|b| self.coupling(b)).collect()
    }

    /// Gauge transform: `σ_i → τ_i σ_i`, `m_ij → τ_i τ_j m_ij`.
    pub fn gauge_transform(&self, tau: &[i8]) -> Result<Self, Error> {
        if tau.len() != self.n_spins() {
            return Err(Error::SizeMismatch(self.n_spins(), tau.len()));
        }
        let mut bonds = self.bonds.clone();
        for (b, m) in bonds.iter_mut().enumerate() {
            let (i, j) = self.bond_endpoints(b);
            *m *= tau[i] * tau[j];
        }
        Self::new(self.lx, self.ly, self.p, self.lambda, bonds)
    }

    /// Exact `ln Z` by enumeration (≤ 16 spins).
    pub fn log_partition_function(&self) -> Result<f64, Error> {
        let n = self.n_spins();
        if n > 16 {
            return Err(Error::SizeCap {
                n_qubits: n,
                cap: 16,
                kind: "exact Ising enumeration",
            });
        }
        let couplings = self.couplings();
        let endpoints: Vec<(usize, usize)> =
            (0..self.n_bonds()).map(|b| self.bond_endpoints(b)).collect();
        let mut energies = Vec::with_capacity(1 << n);
        for s in 0u32..1 << n {
            let sigma = |i: usize| 1.0 - 2.0 * ((s >> i & 1) as f64);
            let e: f64 = couplings
                .iter()
                .zip(&endpoints)
                .map(|(&k, &(i, j))| k * sigma(i) * sigma(j))
                .sum();
            energies.push(e);
        }
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = energies.iter().map(|e| (e - max).exp()).sum();
        Ok(max + z.ln())
    }
}

// ---------------------------------------------------------------------------
// Disorder sampling
// ---------------------------------------------------------------------------

/// One quenched-disorder draw.
#[derive(Clone, Debug)]
pub struct DisorderSample {
    pub instance: RBIMInstance,
    /// Bond indices drawn antiferromagnetic.
    pub flipped: Vec<usize>,
}

/// I.i.d. Nishimori-line disorder: each bond is antiferromagnetic with
/// probability `1/(1+e^{2β})`, which equals `p` identically on the line.
pub fn sample_nishimori(
    lx: usize,
    ly: usize,
    p: f64,
    rng: &mut impl rand::Rng,
) -> Result<DisorderSample, Error> {
    let mut instance = RBIMInstance::ferromagnetic(lx, ly, p)?;
    let flip_prob = 1.0 / (1.0 + (2.0 * instance.beta()).exp());
    debug_assert!((flip_prob - p).abs() < 1e-12 || p == 0.0);
    let mut flipped = Vec::new();
    for b in 0..instance.n_bonds() {
        if rng.random_bool(flip_prob) {
            instance.bonds[b] = -1;
            flipped.push(b);
        }
    }
    Ok(DisorderSample { instance, flipped })
}

/// Disorder from the perturbed ensemble `P(m) ∝ Z(m, λ)`, sampled by a
/// joint `(m, σ)` Markov chain: Metropolis spin sweeps alternated with
/// heat-bath bond updates under the joint weight
/// `exp(Σ_b (β m_b + λ) σ_i σ_j)`.
pub fn sample_perturbed(
    lx: usize,
    ly: usize,
    p: f64,
    lambda: f64,
    n_sweeps: usize,
    rng: &mut impl rand::Rng,
) -> Result<DisorderSample, Error> {
    let mut instance = RBIMInstance::ferromagnetic(lx, ly, p)?;
    instance.lambda = lambda;
    let beta = instance.beta();
    let n = instance.n_spins();
    let mut sigma: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let neighbours = neighbour_table(&instance);
    for _ in 0..n_sweeps {
        // Spin sweep at fixed bonds under the joint weight.
        for s in 0..n {
            let field: f64 = neighbours[s]
                .iter()
                .map(|&(nbr, b)| (beta * instance.bonds[b] as f64 + lambda) * sigma[nbr])
                .sum();
            let d = -2.0 * sigma[s] * field;
            if d >= 0.0 || rng.random::<f64>() < d.exp() {
                sigma[s] = -sigma[s];
            }
        }
        // Heat-bath bond resample at fixed spins:
        // P(m=+1|σ) = e^{βσσ} / (e^{βσσ} + e^{−βσσ}).
        for b in 0..instance.n_bonds() {
            let (i, j) = instance.bond_endpoints(b);
            let a = beta * sigma[i] * sigma[j];
            let p_plus = 1.0 / (1.0 + (-2.0 * a).exp());
            instance.bonds[b] = if rng.random_bool(p_plus) { 1 } else { -1 };
        }
    }
    let flipped = instance
        .bonds
        .iter()
        .enumerate()
        .filter_map(|(b, &m)| (m == -1).then_some(b))
        .collect();
    Ok(DisorderSample { instance, flipped })
}

fn neighbour_table(inst: &RBIMInstance) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); inst.n_spins()];
    for b in 0..inst.n_bonds() {
        let (i, j) = inst.bond_endpoints(b);
        out[i].push((j, b));
        out[j].push((i, b));
    }
    out
}

// ---------------------------------------------------------------------------
// Correlation estimators
// ---------------------------------------------------------------------------

/// How `⟨σ_i σ_j⟩` is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum CorrMethod {
    /// Full enumeration, ≤ 16 spins.
    Exact,
    /// Column-to-column transfer matrix, circumference ≤ 8.
    TransferMatrix,
    /// Single-spin-flip Metropolis: 10³ thermalization sweeps, one
    /// measurement every 2 sweeps.
    Metropolis { n_measure: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Correlation {
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Two-point function `⟨σ_i σ_j⟩` of an instance.
pub fn correlation(
    inst: &RBIMInstance,
    i: usize,
    j: usize,
    method: CorrMethod,
) -> Result<Correlation, Error> {
    if i >= inst.n_spins() || j >= inst.n_spins() {
        return Err(Error::IndexOutOfRange {
            index: i.max(j),
            n_qubits: inst.n_spins(),
        });
    }
    match method {
        CorrMethod::Exact => correlation_exact(inst, i, j),
        CorrMethod::TransferMatrix => correlation_transfer(inst, i, j),
        CorrMethod::Metropolis { n_measure, seed } => {
            correlation_metropolis(inst, i, j, n_measure, seed)
        }
    }
}

fn correlation_exact(inst: &RBIMInstance, i: usize, j: usize) -> Result<Correlation, Error> {
    let n = inst.n_spins();
    if n > 16 {
        return Err(Error::SizeCap {
            n_qubits: n,
            cap: 16,
            kind: "exact Ising enumeration",
        });
    }
    let couplings = inst.couplings();
    let endpoints: Vec<(usize, usize)> =
        (0..inst.n_bonds()).map(|b| inst.bond_endpoints(b)).collect();
    let mut energies = Vec::with_capacity(1 << n);
    for s in 0u32..1 << n {
        let sigma = |q: usize| 1.0 - 2.0 * ((s >> q & 1) as f64);
        let e: f64 = couplings
            .iter()
            .zip(&endpoints)
            .map(|(&k, &(a, b))| k * sigma(a) * sigma(b))
            .sum();
        energies.push(e);
    }
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, &e) in energies.iter().enumerate() {
        let sigma = |q: usize| 1.0 - 2.0 * ((s >> q & 1) as f64);
        let w = (e - max).exp();
        num += sigma(i) * sigma(j) * w;
        den += w;
    }
    Ok(Correlation {
        value: num / den,
        stderr: None,
    })
}

fn correlation_transfer(inst: &RBIMInstance, i: usize, j: usize) -> Result<Correlation, Error> {
    let ly = inst.ly;
    if ly > 8 {
        return Err(Error::SizeCap {
            n_qubits: ly,
            cap: 8,
            kind: "transfer-matrix circumference",
        });
    }
    let dim = 1usize << ly;
    let sigma = |state: usize, y: usize| 1.0 - 2.0 * ((state >> y & 1) as f64);
    // Two vectors sharing the same normalization sequence: the plain
    // partition sum and the one with σ insertions; the ratio is exact.
    let mut den = vec![1.0f64; dim];
    let mut num = vec![1.0f64; dim];
    for c in 0..inst.lx {
        // Intra-column ring couplings plus any σ insertion in this column.
        for s in 0..dim {
            let mut e = 0.0;
            for y in 0..ly {
                e += inst.coupling(inst.vbond(c, y)) * sigma(s, y) * sigma(s, (y + 1) % ly);
            }
            let w = e.exp();
            den[s] *= w;
            num[s] *= w;
            if i / ly == c {
                num[s] *= sigma(s, i % ly);
            }
            if j / ly == c {
                num[s] *= sigma(s, j % ly);
            }
        }
        // Shared rescale keeps the ratio stable.
        let scale = den.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        den.iter_mut().for_each(|x| *x /= scale);
        num.iter_mut().for_each(|x| *x /= scale);
        if c + 1 < inst.lx {
            let mut t = vec![0.0f64; dim * dim];
            for s in 0..dim {
                for s2 in 0..dim {
                    let mut e = 0.0;
                    for y in 0..ly {
                        e += inst.coupling(inst.hbond(c, y)) * sigma(s, y) * sigma(s2, y);
                    }
                    t[s * dim + s2] = e.exp();
                }
            }
            let apply = |v: &[f64]| -> Vec<f64> {
                (0..dim)
                    .map(|s2| (0..dim).map(|s| v[s] * t[s * dim + s2]).sum())
                    .collect()
            };
            den = apply(&den);
            num = apply(&num);
            let scale = den.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
            den.iter_mut().for_each(|x| *x /= scale);
            num.iter_mut().for_each(|x| *x /= scale);
        }
    }
    let z: f64 = den.iter().sum();
    let zn: f64 = num.iter().sum();
    Ok(Correlation {
        value: zn / z,
        stderr: None,
    })
}

const THERMALIZATION_SWEEPS: usize = 1000;
const SWEEPS_PER_MEASUREMENT: usize = 2;

fn correlation_metropolis(
    inst: &RBIMInstance,
    i: usize,
    j: usize,
    n_measure: usize,
    seed: u64,
) -> Result<Correlation, Error> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = inst.n_spins();
    let neighbours = neighbour_table(inst);
    let couplings = inst.couplings();
    let mut sigma: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let sweep = |sigma: &mut Vec<f64>, rng: &mut ChaCha12Rng| {
        for s in 0..n {
            let field: f64 = neighbours[s]
                .iter()
                .map(|&(nbr, b)| couplings[b] * sigma[nbr])
                .sum();
            let d = -2.0 * sigma[s] * field;
            if d >= 0.0 || rng.random::<f64>() < d.exp() {
                sigma[s] = -sigma[s];
            }
        }
    };
    for _ in 0..THERMALIZATION_SWEEPS {
        sweep(&mut sigma, &mut rng);
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_measure {
        for _ in 0..SWEEPS_PER_MEASUREMENT {
            sweep(&mut sigma, &mut rng);
        }
        let v = sigma[i] * sigma[j];
        sum += v;
        sum_sq += v * v;
    }
    let nm = n_measure as f64;
    let mean = sum / nm;
    let var = (sum_sq / nm - mean * mean).max(0.0) / nm;
    Ok(Correlation {
        value: mean,
        stderr: Some(var.sqrt()),
    })
}

// ---------------------------------------------------------------------------
// Nishimori identity
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct IdentityCheck {
    /// Disorder average of `⟨σσ⟩²`.
    pub lhs: f64,
    /// Disorder average of `⟨σσ⟩`.
    pub rhs: f64,
    /// Paired z-score of the difference.
    pub z: f64,
}

/// On the Nishimori line the disorder averages satisfy
/// `[⟨σ_iσ_j⟩²] = [⟨σ_iσ_j⟩]`; checked by Monte Carlo over disorder with
/// per-sample thermal averages evaluated exactly.
pub fn nishimori_identity_check(
    lx: usize,
    ly: usize,
    p: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<IdentityCheck, Error> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut diff_sq = 0.0;
    let n = n_disorder as f64;
    for _ in 0..n_disorder {
        let sample = sample_nishimori(lx, ly, p, &mut rng)?;
        let inst = &sample.instance;
        let (i, j) = (inst.spin(0, 0), inst.spin(lx - 1, 0));
        let method = if inst.n_spins() <= 16 {
            CorrMethod::Exact
        } else {
            CorrMethod::TransferMatrix
        };
        let c = correlation(inst, i, j, method)?.value;
        lhs += c * c / n;
        rhs += c / n;
        let d = c * c - c;
        diff_sq += d * d / n;
    }
    let mean_diff = lhs - rhs;
    let var = (diff_sq - mean_diff * mean_diff).max(0.0) / n;
    let z = if var > 0.0 {
        mean_diff / var.sqrt()
    } else {
        0.0
    };
    Ok(IdentityCheck { lhs, rhs, z })
}

// ---------------------------------------------------------------------------
// Threshold scans
// ---------------------------------------------------------------------------

/// One row of a scan output.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ScanRow {
    pub model: String,
    pub l: usize,
    pub p: f64,
    pub lambda: f64,
    pub observable: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ThresholdEstimate {
    pub p_c: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rows: Vec<ScanRow>,
}

/// Crossing point of two finite-size curves on a grid; linear interpolation
/// of the first sign change of their difference.
fn find_crossing(p_grid: &[f64], small: &[f64], large: &[f64]) -> Option<f64> {
    for w in 0..p_grid.len() - 1 {
        let d0 = large[w] - small[w];
        let d1 = large[w + 1] - small[w + 1];
        if d0 == 0.0 {
            return Some(p_grid[w]);
        }
        if d0 * d1 < 0.0 {
            let t = d0 / (d0 - d1);
            return Some(p_grid[w] + t * (p_grid[w + 1] - p_grid[w]));
        }
    }
    None
}

const BOOTSTRAP_REPS: usize = 200;

/// Decoder-failure threshold: failure-rate curves per size, crossing of
/// adjacent-size pairs, bootstrap confidence interval from resampled counts.
pub fn threshold_scan(
    p_grid: &[f64],
    sizes: &[usize],
    n_samples: u64,
    seed: u64,
) -> Result<ThresholdEstimate, Error> {
    if sizes.len() < 2 {
        return Err(Error::Consistency(
            "threshold scan needs at least two sizes".into(),
        ));
    }
    let mut curves: Vec<Vec<BenchmarkRow>> = Vec::new();
    for (si, &l) in sizes.iter().enumerate() {
        let mut row = Vec::new();
        for (pi, &p) in p_grid.iter().enumerate() {
            row.push(logical_failure_rate(
                l,
                p,
                n_samples,
                seed ^ ((si as u64) << 32) ^ pi as u64,
                false,
            )?);
        }
        curves.push(row);
    }
    let rates: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| c.iter().map(|r| r.failure_rate).collect())
        .collect();
    let p_c = crossing_from_rates(p_grid, sizes, &rates)
        .ok_or_else(|| Error::NoBracketing(format!("grid {p_grid:?} shows no size crossing")))?;
    // Bootstrap: binomial resample of each point's failure count.
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(0xb007));
    let mut boot = Vec::new();
    for _ in 0..BOOTSTRAP_REPS {
        let resampled: Vec<Vec<f64>> = rates
            .iter()
            .map(|curve| {
                curve
                    .iter()
                    .map(|&r| {
                        let mut hits = 0u64;
                        for _ in 0..n_samples {
                            if rng.random_bool(r) {
                                hits += 1;
                            }
                        }
                        hits as f64 / n_samples as f64
                    })
                    .collect()
            })
            .collect();
        if let Some(x) = crossing_from_rates(p_grid, sizes, &resampled) {
            boot.push(x);
        }
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let (ci_low, ci_high) = if boot.is_empty() {
        (p_c, p_c)
    } else {
        (
            boot[boot.len() * 25 / 1000],
            boot[(boot.len() * 975 / 1000).min(boot.len() - 1)],
        )
    };
    let rows = curves
        .iter()
        .flatten()
        .map(|r| ScanRow {
            model: "z_dephase_edges".into(),
            l: r.l,
            p: r.p,
            lambda: 0.0,
            observable: "decoder_failure_rate".into(),
            value: r.failure_rate,
            stderr: r.stderr,
            n_samples: r.n_samples,
            seed: r.seed,
        })
        .collect();
    Ok(ThresholdEstimate {
        p_c,
        ci_low,
        ci_high,
        rows,
    })
}

fn crossing_from_rates(p_grid: &[f64], sizes: &[usize], rates: &[Vec<f64>]) -> Option<f64> {
    let mut found = Vec::new();
    for w in 0..sizes.len() - 1 {
        if let Some(x) = find_crossing(p_grid, &rates[w], &rates[w + 1]) {
            found.push(x);
        }
    }
    if found.is_empty() {
        None
    } else {
        Some(found.iter().sum::<f64>() / found.len() as f64)
    }
}

/// Order-parameter scan of the (possibly perturbed) disorder ensemble:
/// `[⟨σσ⟩²]` between the two boundary columns, per size and grid point.
/// The transition estimate is where each size's monotone curve crosses the
/// 1/2 level (interpolated, then averaged over sizes); at desk-scale sizes
/// the raw curves of different sizes need not intersect each other, so a
/// level crossing is the stable choice.
pub fn order_parameter_scan(
    p_grid: &[f64],
    sizes: &[usize],
    lambda: f64,
    n_disorder: usize,
    seed: u64,
) -> Result<ThresholdEstimate, Error> {
    if sizes.len() < 2 {
        return Err(Error::Consistency(
            "order-parameter scan needs at least two sizes".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (si, &l) in sizes.iter().enumerate() {
        let mut per_size = Vec::new();
        for (pi, &p) in p_grid.iter().enumerate() {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed ^ ((si as u64) << 32) ^ ((pi as u64) << 16));
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n_disorder {
                let sample = if lambda == 0.0 {
                    sample_nishimori(l, l.min(8), p, &mut rng)?
                } else {
                    sample_perturbed(l, l.min(8), p, lambda, 400, &mut rng)?
                };
                let inst = &sample.instance;
                let (i, j) = (inst.spin(0, 0), inst.spin(l - 1, 0));
                let method = if inst.n_spins() <= 16 {
                    CorrMethod::Exact
                } else {
                    CorrMethod::TransferMatrix
                };
                let c = correlation(inst, i, j, method)?.value;
                sum += c * c;
                sum_sq += c.powi(4);
            }
            let n = n_disorder as f64;
            let mean = sum / n;
            let stderr = ((sum_sq / n - mean * mean).max(0.0) / n).sqrt();
            per_size.push(mean);
            rows.push(ScanRow {
                model: if lambda == 0.0 {
                    "nishimori_rbim".into()
                } else {
                    "perturbed_rbim".into()
                },
                l,
                p,
                lambda,
                observable: "sigma_sigma_squared".into(),
                value: mean,
                stderr,
                n_samples: n_disorder as u64,
                seed,
            });
        }
        values.push(per_size);
    }
    let mut crossings = Vec::new();
    for per_size in &values {
        let level: Vec<f64> = vec![0.5; per_size.len()];
        if let Some(x) = find_crossing(p_grid, per_size, &level) {
            crossings.push(x);
        }
    }
    if crossings.is_empty() {
        return Err(Error::NoBracketing(format!(
            "grid {p_grid:?} does not bracket the 1/2 level of [⟨σσ⟩²]"
        )));
    }
    let p_c = crossings.iter().sum::<f64>() / crossings.len() as f64;
    Ok(ThresholdEstimate {
        p_c,
        ci_low: p_c,
        ci_high: p_c,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nishimori_flip_probability_equals_p() {
        for p in [0.01, 0.109, 0.3, 0.49] {
            let beta = (1.0f64 - 2.0 * p).atanh();
            let flip = 1.0 / (1.0 + (2.0 * beta).exp());
            assert!((flip - p).abs() < 1e-12, "p={p}: {flip}");
        }
    }

    #[test]
    fn nishimori_limits_and_empirical_frequency() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let s = sample_nishimori(4, 4, 0.0, &mut rng).unwrap();
        assert!(s.flipped.is_empty());
        let p = 0.109;
        let mut flips = 0u64;
        let mut total = 0u64;
        for _ in 0..2000 {
            let s = sample_nishimori(6, 6, p, &mut rng).unwrap();
            flips += s.flipped.len() as u64;
            total += s.instance.n_bonds() as u64;
        }
        let rate = flips as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * sigma, "{rate} vs {p}");
    }

    #[test]
    fn ferromagnet_limits() {
        let inst = RBIMInstance::ferromagnetic(3, 3, 0.0).unwrap();
        let c = correlation(&inst, 0, 8, CorrMethod::Exact).unwrap();
        assert!((c.value - 1.0).abs() < 1e-9);
        let inst = RBIMInstance::ferromagnetic(3, 3, 0.5).unwrap();
        let c = correlation(&inst, 0, 8, CorrMethod::Exact).unwrap();
        assert!(c.value.abs() < 1e-9, "{}", c.value);
    }

    #[test]
    fn three_methods_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let sample = sample_nishimori(4, 4, 0.05, &mut rng).unwrap();
        let inst = &sample.instance;
        let (i, j) = (inst.spin(0, 0), inst.spin(3, 2));
        let exact = correlation(inst, i, j, CorrMethod::Exact).unwrap().value;
        let tm = correlation(inst, i, j, CorrMethod::TransferMatrix)
            .unwrap()
            .value;
        assert!((exact - tm).abs() < 1e-9, "{exact} vs {tm}");
        let mc = correlation(
            inst,
            i,
            j,
            CorrMethod::Metropolis {
                n_measure: 20_000,
                seed: 99,
            },
        )
        .unwrap();
        let sigma = mc.stderr.unwrap();
        assert!(
            (mc.value - exact).abs() < 4.0 * sigma.max(5e-3),
            "{} vs {exact} (σ={sigma})",
            mc.value
        );
    }

    #[test]
    fn metropolis_matches_boltzmann_on_two_by_two() {
        let inst = RBIMInstance::ferromagnetic(2, 2, 0.2).unwrap();
        let exact = correlation(&inst, 0, 3, CorrMethod::Exact).unwrap().value;
        let mc = correlation(
            &inst,
            0,
            3,
            CorrMethod::Metropolis {
                n_measure: 40_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!((mc.value - exact).abs() < 3.0 * mc.stderr.unwrap().max(4e-3));
    }

    #[test]
    fn gauge_transform_preserves_z_and_correlation_magnitude() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let sample = sample_nishimori(3, 4, 0.15, &mut rng).unwrap();
        let inst = &sample.instance;
        let tau: Vec<i8> = (0..inst.n_spins())
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        let gauged = inst.gauge_transform(&tau).unwrap();
        let z0 = inst.log_partition_function().unwrap();
        let z1 = gauged.log_partition_function().unwrap();
        assert!((z0 - z1).abs() < 1e-9);
        let (i, j) = (0, inst.n_spins() - 1);
        let c0 = correlation(inst, i, j, CorrMethod::Exact).unwrap().value;
        let c1 = correlation(&gauged, i, j, CorrMethod::Exact).unwrap().value;
        assert!((c0.abs() - c1.abs()).abs() < 1e-9);
        assert!((c1 - c0 * (tau[i] * tau[j]) as f64).abs() < 1e-9);
    }

    #[test]
    fn perturbed_couplings_linearize_at_small_lambda() {
        let p = 0.12;
        let beta = (1.0f64 - 2.0 * p).atanh();
        for lambda in [1e-3, 5e-4, 1e-4] {
            for m in [1i8, -1] {
                let inst = RBIMInstance::new(2, 2, p, lambda, vec![m; 6]).unwrap();
                let coupling = inst.coupling(0);
                let linear = beta * m as f64 + lambda;
                assert!(
                    (coupling - linear).abs() < 10.0 * lambda * lambda,
                    "λ={lambda}, m={m}: {coupling} vs {linear}"
                );
            }
        }
    }

    #[test]
    fn identity_check_limits_and_mc() {
        let clean = nishimori_identity_check(4, 4, 0.0, 10, 2).unwrap();
        assert!((clean.lhs - 1.0).abs() < 1e-9 && (clean.rhs - 1.0).abs() < 1e-9);
        let hot = nishimori_identity_check(6, 4, 0.5, 200, 2).unwrap();
        assert!(hot.lhs.abs() < 0.05 && hot.rhs.abs() < 0.05);
        let mid = nishimori_identity_check(6, 6, 0.08, 400, 2).unwrap();
        assert!(mid.z.abs() < 3.0, "z = {}", mid.z);
    }

    #[test]
    fn perturbed_ensemble_favors_ferromagnetic_bonds() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let p = 0.2;
        let frac = |lambda: f64, rng: &mut ChaCha12Rng| {
            let mut flips = 0usize;
            let mut total = 0usize;
            for _ in 0..60 {
                let s = sample_perturbed(4, 4, p, lambda, 300, rng).unwrap();
                flips += s.flipped.len();
                total += s.instance.n_bonds();
            }
            flips as f64 / total as f64
        };
        let f0 = frac(1e-9, &mut rng);
        let f1 = frac(0.5, &mut rng);
        assert!(f1 < f0, "flip fraction {f1} !< {f0}");
    }

    #[test]
    fn threshold_scan_brackets_and_errors() {
        let grid = [0.05, 0.09, 0.13, 0.17];
        let est = threshold_scan(&grid, &[4, 6], 1500, 19).unwrap();
        assert!(est.p_c > grid[0] && est.p_c < grid[3], "p_c = {}", est.p_c);
        assert!(est.ci_low <= est.p_c && est.p_c <= est.ci_high);
        assert_eq!(est.rows.len(), 8);
        // A grid entirely deep in the failing phase has no crossing.
        assert!(matches!(
            threshold_scan(&[0.35, 0.4, 0.45], &[4, 6], 400, 19),
            Err(Error::NoBracketing(_))
        ));
    }

    #[test]
    fn perturbation_moves_the_order_parameter_crossing_up() {
        let grid = [0.08, 0.13, 0.18, 0.23, 0.28];
        let sizes = [4, 6];
        let base = order_parameter_scan(&grid, &sizes, 0.0, 150, 21).unwrap();
        let shifted = order_parameter_scan(&grid, &sizes, 0.4, 150, 21).unwrap();
        assert!(
            shifted.p_c > base.p_c,
            "p_c(λ=0.4) = {} !> p_c(0) = {}",
            shifted.p_c,
            base.p_c
        );
    }
}
