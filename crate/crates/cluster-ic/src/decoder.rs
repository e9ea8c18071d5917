//! Charge decoders: learn the leaked symmetry charge from measurement
//! outcomes.
//!
//! 1D: a maximum-likelihood majority guess per sublattice, with its exact
//! conditional entropy. 2D: the edge-dephasing problem reduces to toric-code
//! syndrome decoding — plaquettes with odd outcome parity are defects,
//! minimum-weight perfect matching proposes a correction, and on small
//! lattices the homology-class probabilities are summed exhaustively.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::h2;
use crate::lattice::{Chain1D, LiebCylinder2D};

// ---------------------------------------------------------------------------
// 1D maximum likelihood
// ---------------------------------------------------------------------------

/// Result of the 1D charge decode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decode1D {
    /// Best guess for the even-sublattice charge.
    pub gamma_even: i8,
    /// Best guess for the odd-sublattice charge.
    pub gamma_odd: i8,
    /// Exact conditional entropy `H(p_{γ|m})` in bits, summed over
    /// sublattices.
    pub entropy: f64,
}

/// Maximum-likelihood decode of the two sublattice charges of a chain from
/// the bulk X outcomes `m` (full-length vector indexed by site).
///
/// Each decohered site's environment reads the true per-site charge
/// correctly with probability `1−p`, so the sublattice charge estimate is
/// the measured product times `sign((1−2p)^n)`, and the exact guess entropy
/// is `h₂((1+(1−2p)^n)/2)` per sublattice with `n` decohered sites.
pub fn decode_1d_ml(chain: &Chain1D, m: &[i8], p_a: f64, p_b: f64) -> Result<Decode1D, Error> {
    if m.len() < chain.n_sites() {
        return Err(Error::SizeMismatch(chain.n_sites(), m.len()));
    }
    for &(p, name) in &[(p_a, "p_a"), (p_b, "p_b")] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParamOutOfRange { name, value: p });
        }
    }
    let product = |sites: &[usize]| sites.iter().map(|&i| m[i] as i64).product::<i64>() as i8;
    let bias_a = (1.0 - 2.0 * p_a).powi(chain.sublattice_a_bulk().len() as i32);
    let bias_b = (1.0 - 2.0 * p_b).powi(chain.sublattice_b().len() as i32);
    let sign = |x: f64| if x < 0.0 { -1i8 } else { 1 };
    Ok(Decode1D {
        gamma_even: product(&chain.sublattice_a_bulk()) * sign(bias_a),
        gamma_odd: product(&chain.sublattice_b()) * sign(bias_b),
        entropy: h2((1.0 + bias_a) / 2.0) + h2((1.0 + bias_b) / 2.0),
    })
}

// ---------------------------------------------------------------------------
// 2D error model and syndrome graph
// ---------------------------------------------------------------------------

/// Per-edge flip probabilities for the 2D decoding problem.
#[derive(Clone, Debug)]
pub struct ErrorModel {
    /// Edge qubits carrying noise, in a fixed order.
    pub edges: Vec<usize>,
    /// Flip probability per entry of `edges`.
    pub flip_prob: Vec<f64>,
    /// Whether boundary-column vertical edges are included.
    pub includes_boundary: bool,
}

impl ErrorModel {
    /// Uniform dephasing at strength `p` on the decohered edge set.
    pub fn z_dephase(lat: &LiebCylinder2D, p: f64, include_boundary: bool) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParamOutOfRange {
                name: "p",
                value: p,
                });
        }
        let edges = lat.decohered_edges(include_boundary);
        let flip_prob = vec![p; edges.len()];
        Ok(Self {
            edges,
            flip_prob,
            includes_boundary: include_boundary,
        })
    }

    /// Outcome-dependent flip probabilities of the symmetry-decoupling
    /// channel: `q_i = q (1 + r·m_i)/2` with `r` the environment-charge
    /// expectation and `m_i` the system outcome at edge `i`.
    pub fn sdc(
        lat: &LiebCylinder2D,
        q: f64,
        r: f64,
        m: &[i8],
        include_boundary: bool,
    ) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::ParamOutOfRange {
                name: "q",
                value: q,
                });
        }
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::ParamOutOfRange {
                name: "r",
                value: r,
                });
        }
        if m.len() < lat.n_qubits() {
            return Err(Error::SizeMismatch(lat.n_qubits(), m.len()));
        }
        let edges = lat.decohered_edges(include_boundary);
        let flip_prob = edges
            .iter()
            .map(|&e| q * (1.0 + r * m[e] as f64) / 2.0)
            .collect();
        Ok(Self {
            edges,
            flip_prob,
            includes_boundary: include_boundary,
        })
    }

    fn weight(&self, idx: usize) -> f64 {
        let q = self.flip_prob[idx];
        if q <= 0.0 {
            // Unflippable edge: effectively infinite cost.
            f64::INFINITY
        } else {
            -(q / (1.0 - q)).ln()
        }
    }
}

/// Plaquette indices adjacent to a given edge qubit; the second entry is
/// `None` for boundary-column vertical edges, which touch one plaquette
/// only.
fn edge_plaquettes(lat: &LiebCylinder2D, edge: usize) -> (usize, Option<usize>) {
    let v = lat.n_vertices();
    let h = lat.n_hedges();
    let ly = lat.ly();
    let e = edge - v;
    if e < h {
        let (c, y) = (e / ly, e % ly);
        (
            lat.plaquette_index(c, y),
            Some(lat.plaquette_index(c, (y + ly - 1) % ly)),
        )
    } else {
        let e = e - h;
        let (c, y) = (e / ly, e % ly);
        match (c > 0, c < lat.lx() - 1) {
            (true, true) => (
                lat.plaquette_index(c - 1, y),
                Some(lat.plaquette_index(c, y)),
            ),
            (false, true) => (lat.plaquette_index(c, y), None),
            (true, false) => (lat.plaquette_index(c - 1, y), None),
            (false, false) => unreachable!("lx >= 3"),
        }
    }
}

/// The matching graph of one syndrome: defect plaquettes plus pairwise
/// minus-log-likelihood path costs through the plaquette adjacency graph.
#[derive(Clone, Debug)]
pub struct SyndromeGraph {
    /// Defect plaquette indices.
    pub defects: Vec<usize>,
    /// `cost[i][j]`: cheapest path cost between defects `i` and `j`.
    pub cost: Vec<Vec<f64>>,
    /// `path[i][j]`: the model-edge indices realizing `cost[i][j]`.
    pub path: Vec<Vec<Vec<usize>>>,
    /// Per-defect cheapest cost and path to the lattice boundary (present
    /// only when the model carries boundary noise).
    pub boundary: Option<Vec<(f64, Vec<usize>)>>,
    n_nodes: usize,
    adj: Vec<Vec<(usize, usize)>>,
}

/// Parity of each plaquette under the edge outcomes `m` (full-length qubit
/// vector); `true` marks a defect.
pub fn plaquette_defects(lat: &LiebCylinder2D, m: &[i8]) -> Result<Vec<bool>, Error> {
    if m.len() < lat.n_qubits() {
        return Err(Error::SizeMismatch(lat.n_qubits(), m.len()));
    }
    let mut out = Vec::with_capacity(lat.n_plaquettes());
    for c in 0..lat.lx() - 1 {
        for y in 0..lat.ly() {
            let parity: i64 = lat
                .plaquette_edges(c, y)
                .iter()
                .map(|&e| m[e] as i64)
                .product();
            out.push(parity == -1);
        }
    }
    Ok(out)
}

impl SyndromeGraph {
    /// Build the matching graph for outcomes `m` under `model`.
    pub fn build(lat: &LiebCylinder2D, model: &ErrorModel, m: &[i8]) -> Result<Self, Error> {
        let n_nodes = lat.n_plaquettes();
        let mut adj = vec![Vec::new(); n_nodes];
        // Boundary is represented as a virtual node reached through the
        // single-plaquette edges.
        let mut boundary_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes];
        let mut weights = Vec::with_capacity(model.edges.len());
        for (idx, &edge) in model.edges.iter().enumerate() {
            weights.push(model.weight(idx));
            match edge_plaquettes(lat, edge) {
                (a, Some(b)) => {
                    adj[a].push((b, idx));
                    adj[b].push((a, idx));
                }
                (a, None) => boundary_adj[a].push((a, idx)),
            }
        }
        let defects: Vec<usize> = plaquette_defects(lat, m)?
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| if d { Some(i) } else { None })
            .collect();
        let k = defects.len();
        let mut cost = vec![vec![f64::INFINITY; k]; k];
        let mut path = vec![vec![Vec::new(); k]; k];
        let mut boundary = if model.includes_boundary {
            Some(vec![(f64::INFINITY, Vec::new()); k])
        } else {
            None
        };
        for (i, &src) in defects.iter().enumerate() {
            let (dist, pred) = dijkstra(n_nodes, &adj, &weights, src);
            for (j, &dst) in defects.iter().enumerate() {
                if j == i {
                    cost[i][j] = 0.0;
                    continue;
                }
                cost[i][j] = dist[dst];
                path[i][j] = walk_back(&pred, src, dst);
            }
            if let Some(b) = boundary.as_mut() {
                // Cheapest exit: reach any plaquette, then take its boundary
                // edge.
                let mut best = (f64::INFINITY, Vec::new());
                for (node, out_edges) in boundary_adj.iter().enumerate() {
                    for &(_, idx) in out_edges {
                        let total = dist[node] + weights[idx];
                        if total < best.0 {
                            let mut p = walk_back(&pred, src, node);
                            p.push(idx);
                            best = (total, p);
                        }
                    }
                }
                b[i] = best;
            }
        }
        Ok(Self {
            defects,
            cost,
            path,
            boundary,
            n_nodes,
            adj,
        })
    }
}

fn dijkstra(
    n: usize,
    adj: &[Vec<(usize, usize)>],
    weights: &[f64],
    src: usize,
) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((ordered_float(0.0), src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = f64::from_bits(d);
        if d > dist[u] {
            continue;
        }
        for &(v, idx) in &adj[u] {
            let nd = d + weights[idx];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some((u, idx));
                heap.push(Reverse((ordered_float(nd), v)));
            }
        }
    }
    (dist, pred)
}

/// Non-negative f64 keys ordered through their bit patterns.
fn ordered_float(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    x.to_bits()
}

fn walk_back(pred: &[Option<(usize, usize)>], src: usize, dst: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = dst;
    while cur != src {
        let (prev, idx) = pred[cur].expect("path exists");
        out.push(idx);
        cur = prev;
    }
    out
}

// ---------------------------------------------------------------------------
// Matching decoder
// ---------------------------------------------------------------------------

/// Result of the matching decode.
#[derive(Clone, Debug)]
pub struct Match2D {
    /// Edge qubits flipped by the correction.
    pub correction: Vec<usize>,
    /// Decoded 1-form charge along the reference horizontal string.
    pub gamma_hat: i8,
    /// Total correction cost.
    pub weight: f64,
}

/// Minimum-weight perfect matching over the defect graph; the decoded charge
/// is the measured string product with correction signs applied.
pub fn decode_2d_matching(
    lat: &LiebCylinder2D,
    graph: &SyndromeGraph,
    model: &ErrorModel,
    m: &[i8],
) -> Result<Match2D, Error> {
    let k = graph.defects.len();
    if !k.is_multiple_of(2) && graph.boundary.is_none() {
        return Err(Error::OddDefectParity(k));
    }
    let pairs = match &graph.boundary {
        None => min_weight_pairs(&graph.cost)?,
        Some(b) => min_weight_pairs_with_boundary(&graph.cost, b)?,
    };
    let mut correction_idx: Vec<usize> = Vec::new();
    let mut weight = 0.0;
    for pair in &pairs {
        match *pair {
            Pairing::Defects(i, j) => {
                weight += graph.cost[i][j];
                correction_idx.extend(&graph.path[i][j]);
            }
            Pairing::Boundary(i) => {
                let b = graph.boundary.as_ref().expect("boundary costs");
                weight += b[i].0;
                correction_idx.extend(&b[i].1);
            }
        }
    }
    // An edge used twice cancels.
    correction_idx.sort_unstable();
    let mut correction = Vec::new();
    let mut iter = correction_idx.iter().peekable();
    while let Some(&idx) = iter.next() {
        if iter.peek() == Some(&&idx) {
            iter.next();
        } else {
            correction.push(model.edges[idx]);
        }
    }
    let gamma_hat = string_product(lat, m, &correction)?;
    Ok(Match2D {
        correction,
        gamma_hat,
        weight,
    })
}

/// Product of (sign-corrected) outcomes along the reference horizontal
/// string at ring 0.
fn string_product(lat: &LiebCylinder2D, m: &[i8], correction: &[usize]) -> Result<i8, Error> {
    let mut gamma = 1i8;
    for e in lat.horizontal_string_edges(0) {
        gamma *= m[e];
        if correction.contains(&e) {
            gamma = -gamma;
        }
    }
    Ok(gamma)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Pairing {
    Defects(usize, usize),
    Boundary(usize),
}

/// Exact minimum-weight perfect matching on the complete defect graph via
/// blossom; weights are negated and scaled to integers since the backend
/// maximizes.
fn min_weight_pairs(cost: &[Vec<f64>]) -> Result<Vec<Pairing>, Error> {
    let k = cost.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let scale = integer_scale(cost.iter().flatten().copied());
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            edges.push((i, j, -(cost[i][j] * scale).round() as i32));
        }
    }
    let mates = mwmatching::Matching::new(edges).max_cardinality().solve();
    let mut pairs = Vec::new();
    for i in 0..k {
        let j = mates[i];
        if j == mwmatching::SENTINEL {
            return Err(Error::OddDefectParity(k));
        }
        if i < j {
            pairs.push(Pairing::Defects(i, j));
        }
    }
    Ok(pairs)
}

/// Matching with boundary absorption: each defect gets a virtual partner at
/// its boundary cost, and virtual nodes pair off freely.
fn min_weight_pairs_with_boundary(
    cost: &[Vec<f64>],
    boundary: &[(f64, Vec<usize>)],
) -> Result<Vec<Pairing>, Error> {
    let k = cost.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let scale = integer_scale(
        cost.iter()
            .flatten()
            .copied()
            .chain(boundary.iter().map(|b| b.0)),
    );
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            edges.push((i, j, -(cost[i][j] * scale).round() as i32));
            // Virtual-virtual pairs are free.
            edges.push((k + i, k + j, 0));
        }
        edges.push((i, k + i, -(boundary[i].0 * scale).round() as i32));
    }
    let mates = mwmatching::Matching::new(edges).max_cardinality().solve();
    let mut pairs = Vec::new();
    for i in 0..k {
        let j = mates[i];
        if j == mwmatching::SENTINEL {
            return Err(Error::OddDefectParity(k));
        }
        if j == k + i {
            pairs.push(Pairing::Boundary(i));
        } else if i < j && j < k {
            pairs.push(Pairing::Defects(i, j));
        }
    }
    Ok(pairs)
}

/// Scale factor mapping path costs into i32 range with headroom.
fn integer_scale(costs: impl Iterator<Item = f64>) -> f64 {
    let max = costs.filter(|c| c.is_finite()).fold(1.0f64, f64::max);
    (i32::MAX as f64 / 16.0) / max
}

// ---------------------------------------------------------------------------
// Exact class probabilities (small lattices)
// ---------------------------------------------------------------------------

/// Log-likelihood gap between the two homology classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delta {
    Finite(f64),
    /// The losing class has probability zero.
    Infinite,
}

/// Exact homology-class likelihoods of one syndrome.
#[derive(Clone, Debug)]
pub struct ClassLikelihoods {
    /// `P(m, class)` for string-crossing parity 0 and 1.
    pub p_class: [f64; 2],
    /// Winning parity.
    pub decided_parity: u8,
    /// Maximum-likelihood charge estimate.
    pub gamma_hat: i8,
    /// `ln(P_max / P_other)`.
    pub delta: Delta,
}

const MAX_CYCLE_RANK: usize = 24;

/// Sum the error distribution over every flip set consistent with the
/// syndrome of `m`, split by how often the set crosses the reference
/// horizontal string; feasible only while the cycle space is small.
pub fn class_probability_exact(
    lat: &LiebCylinder2D,
    model: &ErrorModel,
    m: &[i8],
) -> Result<ClassLikelihoods, Error> {
    let graph = SyndromeGraph::build(lat, model, m)?;
    // Reference error from the matching decoder.
    let matched = decode_2d_matching(lat, &graph, model, m)?;
    let in_reference: Vec<bool> = model
        .edges
        .iter()
        .map(|e| matched.correction.contains(e))
        .collect();
    // Cycle space of the plaquette graph (plus a virtual boundary node when
    // boundary edges carry noise): spanning-forest fundamental cycles.
    let n_edges = model.edges.len();
    let n_nodes = graph.n_nodes + 1; // last node = boundary
    let mut adj: Vec<Vec<(usize, usize)>> = graph.adj.clone();
    adj.push(Vec::new());
    for (idx, &edge) in model.edges.iter().enumerate() {
        if let (a, None) = edge_plaquettes(lat, edge) {
            adj[a].push((graph.n_nodes, idx));
            adj[graph.n_nodes].push((a, idx));
        }
    }
    let generators = cycle_basis(n_nodes, &adj, n_edges)?;
    // String-crossing parity per edge and per generator.
    let string = lat.horizontal_string_edges(0);
    let edge_crosses: Vec<bool> = model.edges.iter().map(|e| string.contains(e)).collect();
    let parity_of = |set: &[bool]| -> u8 {
        set.iter()
            .zip(&edge_crosses)
            .filter(|(&s, &c)| s && c)
            .count() as u8
            % 2
    };
    let mut p_class = [0.0f64; 2];
    let mut current = in_reference.clone();
    enumerate_subsets(&generators, &mut current, &mut |set| {
        let mut p = 1.0;
        for (i, &flipped) in set.iter().enumerate() {
            let q = model.flip_prob[i];
            p *= if flipped { q } else { 1.0 - q };
        }
        p_class[parity_of(set) as usize] += p;
    });
    let decided_parity = if p_class[1] > p_class[0] { 1u8 } else { 0 };
    let (p_max, p_other) = (
        p_class[decided_parity as usize],
        p_class[1 - decided_parity as usize],
    );
    let delta = if p_other > 0.0 {
        Delta::Finite((p_max / p_other).ln())
    } else {
        Delta::Infinite
    };
    let mut gamma_hat = string.iter().map(|&e| m[e] as i64).product::<i64>() as i8;
    if decided_parity == 1 {
        gamma_hat = -gamma_hat;
    }
    Ok(ClassLikelihoods {
        p_class,
        decided_parity,
        gamma_hat,
        delta,
    })
}

/// Fundamental cycles of a spanning forest, as edge-index sets.
fn cycle_basis(
    n_nodes: usize,
    adj: &[Vec<(usize, usize)>],
    n_edges: usize,
) -> Result<Vec<Vec<bool>>, Error> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
    let mut visited = vec![false; n_nodes];
    let mut in_tree = vec![false; n_edges];
    for root in 0..n_nodes {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, idx) in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = Some((u, idx));
                    in_tree[idx] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let depth_path = |mut u: usize| -> Vec<usize> {
        let mut edges = Vec::new();
        while let Some((p, idx)) = parent[u] {
            edges.push(idx);
            u = p;
        }
        edges
    };
    let mut generators = Vec::new();
    let mut seen = vec![false; n_edges];
    for (u, nbrs) in adj.iter().enumerate() {
        for &(v, idx) in nbrs {
            if in_tree[idx] || seen[idx] {
                continue;
            }
            seen[idx] = true;
            let mut cycle = vec![false; n_edges];
            cycle[idx] = true;
            // Symmetric difference of the two tree paths to the forest root.
            for e in depth_path(u).into_iter().chain(depth_path(v)) {
                cycle[e] ^= true;
            }
            generators.push(cycle);
        }
    }
    if generators.len() > MAX_CYCLE_RANK {
        return Err(Error::SizeCap {
            n_qubits: generators.len(),
            cap: MAX_CYCLE_RANK,
            kind: "cycle-rank (exhaustive class enumeration)",
        });
    }
    Ok(generators)
}

/// Gray-code walk over all XOR combinations of the generators.
fn enumerate_subsets(
    generators: &[Vec<bool>],
    current: &mut [bool],
    visit: &mut dyn FnMut(&[bool]),
) {
    visit(current);
    let total = 1u64 << generators.len();
    for i in 1..total {
        let g = i.trailing_zeros() as usize;
        for (slot, &on) in current.iter_mut().zip(&generators[g]) {
            *slot ^= on;
        }
        visit(current);
    }
}

// ---------------------------------------------------------------------------
// Benchmarking
// ---------------------------------------------------------------------------

/// One row of the decoder benchmark.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BenchmarkRow {
    pub l: usize,
    pub p: f64,
    pub n_samples: u64,
    pub failure_rate: f64,
    pub stderr: f64,
    /// Mean log-likelihood gap (exact enumeration; small lattices only).
    pub mean_delta: Option<f64>,
    pub seed: u64,
}

/// Monte-Carlo logical failure rate of the matching decoder on an `l × l`
/// cylinder with uniform edge dephasing `p`. Flips are sampled directly;
/// the decode fails when correction plus error crosses the reference string
/// an odd number of times. `with_delta` additionally averages the exact
/// class-likelihood gap (small lattices only).
pub fn logical_failure_rate(
    l: usize,
    p: f64,
    n_samples: u64,
    seed: u64,
    with_delta: bool,
) -> Result<BenchmarkRow, Error> {
    let lat = LiebCylinder2D::new(l, l)?;
    let model = ErrorModel::z_dephase(&lat, p, false)?;
    let results: Vec<Result<(bool, Option<f64>), Error>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ s.wrapping_mul(0x9e3779b97f4a7c15));
            let mut m = vec![1i8; lat.n_qubits()];
            for &e in &model.edges {
                if rng.random_bool(p) {
                    m[e] = -1;
                }
            }
            let graph = SyndromeGraph::build(&lat, &model, &m)?;
            let decode = decode_2d_matching(&lat, &graph, &model, &m)?;
            // The sampled environment charge is +1, so a decode succeeds
            // exactly when gamma_hat is +1.
            let failed = decode.gamma_hat != 1;
            let delta = if with_delta {
                match class_probability_exact(&lat, &model, &m)?.delta {
                    Delta::Finite(d) => Some(d),
                    Delta::Infinite => None,
                }
            } else {
                None
            };
            Ok((failed, delta))
        })
        .collect();
    let mut failures = 0u64;
    let mut delta_sum = 0.0;
    let mut delta_n = 0u64;
    for r in results {
        let (failed, delta) = r?;
        if failed {
            failures += 1;
        }
        if let Some(d) = delta {
            delta_sum += d;
            delta_n += 1;
        }
    }
    let n = n_samples as f64;
    let rate = failures as f64 / n;
    Ok(BenchmarkRow {
        l,
        p,
        n_samples,
        failure_rate: rate,
        stderr: (rate * (1.0 - rate) / n).sqrt(),
        mean_delta: (delta_n > 0).then(|| delta_sum / delta_n as f64),
        seed,
    })
}

/// 0-form charge readout: with clean vertex outcomes the product over bulk
/// vertices is the charge itself, with zero guess entropy.
pub fn decode_vertex_charge(lat: &LiebCylinder2D, m: &[i8]) -> Result<i8, Error> {
    if m.len() < lat.n_qubits() {
        return Err(Error::SizeMismatch(lat.n_qubits(), m.len()));
    }
    Ok(lat
        .bulk_vertices()
        .iter()
        .map(|&v| m[v] as i64)
        .product::<i64>() as i8)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn clean_outcomes(lat: &LiebCylinder2D) -> Vec<i8> {
        vec![1i8; lat.n_qubits()]
    }

    fn apply_flips(m: &mut [i8], flips: &[usize]) {
        for &e in flips {
            m[e] = -m[e];
        }
    }

    #[test]
    fn ml_1d_limits() {
        let chain = Chain1D::new(3).unwrap();
        let m = vec![1i8; chain.n_sites()];
        let d = decode_1d_ml(&chain, &m, 0.0, 0.0).unwrap();
        assert_eq!((d.gamma_even, d.gamma_odd), (1, 1));
        assert_eq!(d.entropy, 0.0);
        let d = decode_1d_ml(&chain, &m, 0.0, 0.5).unwrap();
        assert!((d.entropy - 1.0).abs() < 1e-12);
        let d = decode_1d_ml(&chain, &m, 0.5, 0.5).unwrap();
        assert!((d.entropy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ml_1d_success_rate_matches_sampled_environments() {
        // The guess succeeds iff the environment flipped an even number of
        // odd-sublattice readings.
        let chain = Chain1D::new(5).unwrap();
        let p = 0.1;
        let n_dec = chain.sublattice_b().len();
        let expected = (1.0 + (1.0f64 - 2.0 * p).powi(n_dec as i32)) / 2.0;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 100_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let flips = (0..n_dec).filter(|_| rng.random_bool(p)).count();
            if flips.is_multiple_of(2) {
                hits += 1;
            }
        }
        let rate = hits as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() < 3.0 * sigma);
        let m = vec![1i8; chain.n_sites()];
        let d = decode_1d_ml(&chain, &m, 0.0, p).unwrap();
        assert!((d.entropy - h2(expected)).abs() < 1e-12);
    }

    #[test]
    fn single_flip_creates_adjacent_defect_pair() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.1, false).unwrap();
        let mut m = clean_outcomes(&lat);
        apply_flips(&mut m, &[lat.hedge(1, 2)]);
        let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
        assert_eq!(
            graph.defects,
            vec![lat.plaquette_index(1, 1), lat.plaquette_index(1, 2)]
        );
        let decode = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
        assert_eq!(decode.correction, vec![lat.hedge(1, 2)]);
        assert_eq!(decode.gamma_hat, 1);
    }

    #[test]
    fn zero_defects_give_empty_correction() {
        let lat = LiebCylinder2D::new(3, 3).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.1, false).unwrap();
        let m = clean_outcomes(&lat);
        let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
        assert!(graph.defects.is_empty());
        let decode = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
        assert!(decode.correction.is_empty());
        assert_eq!(decode.gamma_hat, 1);
    }

    #[test]
    fn matching_cost_equals_brute_force_pairing() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.12, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut tested = 0;
        while tested < 20 {
            let mut m = clean_outcomes(&lat);
            for &e in &model.edges {
                if rng.random_bool(0.12) {
                    m[e] = -1;
                }
            }
            let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
            let k = graph.defects.len();
            if k == 0 || k > 8 {
                continue;
            }
            tested += 1;
            let decode = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
            let brute = brute_force_pairing_cost(&graph.cost);
            assert!(
                (decode.weight - brute).abs() < 1e-6,
                "{} vs {brute}",
                decode.weight
            );
        }
    }

    fn brute_force_pairing_cost(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], left: &mut Vec<usize>) -> f64 {
            if left.is_empty() {
                return 0.0;
            }
            let a = left[0];
            let mut best = f64::INFINITY;
            for i in 1..left.len() {
                let b = left[i];
                let mut rest: Vec<usize> = left
                    .iter()
                    .copied()
                    .filter(|&x| x != a && x != b)
                    .collect();
                best = best.min(cost[a][b] + rec(cost, &mut rest));
            }
            best
        }
        let mut all: Vec<usize> = (0..cost.len()).collect();
        rec(cost, &mut all)
    }

    #[test]
    fn contractible_loops_never_change_the_decode() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.08, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..10 {
            let mut m = clean_outcomes(&lat);
            for &e in &model.edges {
                if rng.random_bool(0.08) {
                    m[e] = -1;
                }
            }
            let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
            let base = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
            // The elementary syndrome-neutral loop: the star of edges
            // around an interior vertex (each surrounding plaquette holds
            // exactly two of them).
            for c in 1..lat.lx() - 1 {
                for y in 0..lat.ly() {
                    let star = [
                        lat.hedge(c - 1, y),
                        lat.hedge(c, y),
                        lat.vedge(c, y),
                        lat.vedge(c, (y + lat.ly() - 1) % lat.ly()),
                    ];
                    let mut m2 = m.clone();
                    apply_flips(&mut m2, &star);
                    let g2 = SyndromeGraph::build(&lat, &model, &m2).unwrap();
                    assert_eq!(g2.defects, graph.defects, "star at ({c},{y})");
                    let d2 = decode_2d_matching(&lat, &g2, &model, &m2).unwrap();
                    assert_eq!(d2.gamma_hat, base.gamma_hat);
                }
            }
        }
    }

    #[test]
    fn winding_loop_flips_the_charge_silently() {
        // A column of horizontal-edge flips commutes with every plaquette
        // but flips the string charge: the undetectable logical error.
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.05, false).unwrap();
        let mut m = clean_outcomes(&lat);
        let winding: Vec<usize> = (0..lat.ly()).map(|y| lat.hedge(1, y)).collect();
        apply_flips(&mut m, &winding);
        let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
        assert!(graph.defects.is_empty());
        let decode = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
        assert_eq!(decode.gamma_hat, -1);
    }

    #[test]
    fn class_probabilities_partition_the_syndrome_ensemble() {
        // Brute force over every flip subset on a 3x3 cylinder: the two
        // class likelihoods must sum to the total probability of the
        // observed syndrome.
        let lat = LiebCylinder2D::new(3, 3).unwrap();
        let p = 0.15;
        let model = ErrorModel::z_dephase(&lat, p, false).unwrap();
        let mut m = clean_outcomes(&lat);
        apply_flips(&mut m, &[lat.hedge(0, 1), lat.vedge(1, 2)]);
        let target = plaquette_defects(&lat, &m).unwrap();
        let cl = class_probability_exact(&lat, &model, &m).unwrap();
        let mut total = 0.0;
        let n_e = model.edges.len();
        for bits in 0u64..1 << n_e {
            let mut trial = clean_outcomes(&lat);
            let mut prob = 1.0;
            for (i, &e) in model.edges.iter().enumerate() {
                if bits >> i & 1 == 1 {
                    trial[e] = -1;
                    prob *= p;
                } else {
                    prob *= 1.0 - p;
                }
            }
            if plaquette_defects(&lat, &trial).unwrap() == target {
                total += prob;
            }
        }
        assert!(
            (cl.p_class[0] + cl.p_class[1] - total).abs() < 1e-12,
            "{} vs {total}",
            cl.p_class[0] + cl.p_class[1]
        );
        match cl.delta {
            Delta::Finite(d) => assert!(d >= 0.0),
            Delta::Infinite => panic!("both classes reachable at p=0.15"),
        }
    }

    #[test]
    fn sdc_model_with_zero_bias_reduces_to_dephasing() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let q = 0.2;
        let mut m = clean_outcomes(&lat);
        apply_flips(&mut m, &[lat.hedge(0, 0), lat.hedge(2, 3)]);
        let sdc = ErrorModel::sdc(&lat, q, 0.0, &m, false).unwrap();
        let deph = ErrorModel::z_dephase(&lat, q / 2.0, false).unwrap();
        for (a, b) in sdc.flip_prob.iter().zip(&deph.flip_prob) {
            assert!((a - b).abs() < 1e-12);
        }
        let ca = class_probability_exact(&lat, &sdc, &m).unwrap();
        let cb = class_probability_exact(&lat, &deph, &m).unwrap();
        assert!((ca.p_class[0] - cb.p_class[0]).abs() < 1e-12);
        assert!((ca.p_class[1] - cb.p_class[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_tagged_infinite_gap() {
        let lat = LiebCylinder2D::new(3, 3).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.0, false).unwrap();
        let m = clean_outcomes(&lat);
        let cl = class_probability_exact(&lat, &model, &m).unwrap();
        assert_eq!(cl.delta, Delta::Infinite);
        assert_eq!(cl.gamma_hat, 1);
    }

    #[test]
    fn likelihood_gap_grows_with_size_below_threshold() {
        let p = 0.04;
        let d3 = logical_failure_rate(3, p, 300, 11, true).unwrap();
        let d4 = logical_failure_rate(4, p, 300, 11, true).unwrap();
        assert!(d4.mean_delta.unwrap() > d3.mean_delta.unwrap());
    }

    #[test]
    fn matching_agrees_with_exact_class_decision_at_low_noise() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.05, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut agree = 0;
        let n = 200;
        for _ in 0..n {
            let mut m = clean_outcomes(&lat);
            for &e in &model.edges {
                if rng.random_bool(0.05) {
                    m[e] = -1;
                }
            }
            let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
            let matched = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
            let exact = class_probability_exact(&lat, &model, &m).unwrap();
            if matched.gamma_hat == exact.gamma_hat {
                agree += 1;
            }
        }
        assert!(agree as f64 / n as f64 > 0.95, "agreement {agree}/{n}");
    }

    #[test]
    fn failure_rate_is_monotone_in_noise() {
        let low = logical_failure_rate(6, 0.05, 2000, 3, false).unwrap();
        let high = logical_failure_rate(6, 0.15, 2000, 3, false).unwrap();
        let sigma = (low.stderr.powi(2) + high.stderr.powi(2)).sqrt();
        assert!(high.failure_rate > low.failure_rate - 3.0 * sigma);
        assert!(high.failure_rate > low.failure_rate);
    }

    #[test]
    fn boundary_noise_is_decodable_via_virtual_nodes() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.05, true).unwrap();
        // A single boundary-column flip creates one defect.
        let mut m = clean_outcomes(&lat);
        apply_flips(&mut m, &[lat.vedge(0, 1)]);
        let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
        assert_eq!(graph.defects.len(), 1);
        let decode = decode_2d_matching(&lat, &graph, &model, &m).unwrap();
        assert_eq!(decode.correction, vec![lat.vedge(0, 1)]);
        assert_eq!(decode.gamma_hat, 1);
    }

    #[test]
    fn odd_parity_without_boundary_is_an_error() {
        let lat = LiebCylinder2D::new(4, 4).unwrap();
        let model = ErrorModel::z_dephase(&lat, 0.05, false).unwrap();
        let mut m = clean_outcomes(&lat);
        // Flip a boundary edge even though the model says it is noiseless.
        apply_flips(&mut m, &[lat.vedge(0, 1)]);
        let graph = SyndromeGraph::build(&lat, &model, &m).unwrap();
        assert!(matches!(
            decode_2d_matching(&lat, &graph, &model, &m),
            Err(Error::OddDefectParity { .. })
        ));
    }

    #[test]
    fn vertex_charge_is_exact_without_vertex_noise() {
        let lat = LiebCylinder2D::new(4, 3).unwrap();
        let mut m = clean_outcomes(&lat);
        assert_eq!(decode_vertex_charge(&lat, &m).unwrap(), 1);
        m[lat.vertex(1, 1)] = -1;
        assert_eq!(decode_vertex_charge(&lat, &m).unwrap(), -1);
    }
}
