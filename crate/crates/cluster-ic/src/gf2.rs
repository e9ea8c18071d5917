//! Bit-packed GF(2) vectors and Gaussian elimination.
//!
//! Entanglement entropies of stabilizer states reduce to GF(2) ranks of
//! restricted generator matrices, which makes this the inner loop of every
//! large-system sweep; everything here works on machine words.

const WORD: usize = 64;

/// A fixed-length vector over GF(2), packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct BitVec {
    nbits: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(nbits: usize) -> Self {
        BitVec {
            nbits,
            words: vec![0; nbits.div_ceil(WORD)],
        }
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.nbits == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.nbits);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.nbits);
        let mask = 1u64 << (i % WORD);
        if v {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / WORD] ^= 1 << (i % WORD);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// In-place XOR with another vector of the same length.
    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Parity of the AND of two vectors (the GF(2) inner product).
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.nbits, other.nbits);
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    /// Number of positions set in both vectors.
    pub fn count_common(&self, other: &BitVec) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&i| self.get(i))
    }

    /// Keep only the positions listed in `keep` (in order), producing a
    /// shorter vector; used to restrict generators to a region.
    pub fn select(&self, keep: &[usize]) -> BitVec {
        let mut out = BitVec::zeros(keep.len());
        for (j, &i) in keep.iter().enumerate() {
            if self.get(i) {
                out.set(j, true);
            }
        }
        out
    }

    fn leading_one(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * WORD + w.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Rank of a set of GF(2) row vectors, by destructive elimination.
pub fn rank(mut rows: Vec<BitVec>) -> usize {
    let mut rank = 0;
    let mut pivots: Vec<(usize, BitVec)> = Vec::new();
    while let Some(mut row) = rows.pop() {
        loop {
            match row.leading_one() {
                None => break,
                Some(lead) => {
                    if let Some((_, p)) = pivots.iter().find(|(l, _)| *l == lead) {
                        let p = p.clone();
                        row.xor_assign(&p);
                    } else {
                        pivots.push((lead, row));
                        rank += 1;
                        break;
                    }
                }
            }
        }
    }
    rank
}

/// Solve `sum_{i in S} rows[i] = target` over GF(2).
///
/// Returns the indicator of one solution set `S`, or `None` if the target is
/// not in the row span. Used to express a measured Pauli as a product of
/// stabilizer generators.
pub fn solve(rows: &[BitVec], target: &BitVec) -> Option<Vec<bool>> {
    let n = rows.len();
    // Augment each row with an indicator of which original rows combined
    // into it, then eliminate.
    let mut basis: Vec<(BitVec, BitVec)> = Vec::new(); // (vector, combination)
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.clone();
        let mut c = BitVec::zeros(n);
        c.set(i, true);
        loop {
            match v.leading_one() {
                None => break, // dependent row; skip
                Some(lead) => {
                    if let Some((bv, bc)) = basis.iter().find(|(bv, _)| bv.leading_one() == Some(lead)) {
                        let (bv, bc) = (bv.clone(), bc.clone());
                        v.xor_assign(&bv);
                        c.xor_assign(&bc);
                    } else {
                        basis.push((v, c));
                        break;
                    }
                }
            }
        }
    }
    let mut t = target.clone();
    let mut comb = BitVec::zeros(n);
    loop {
        match t.leading_one() {
            None => return Some((0..n).map(|i| comb.get(i)).collect()),
            Some(lead) => match basis.iter().find(|(bv, _)| bv.leading_one() == Some(lead)) {
                Some((bv, bc)) => {
                    let (bv, bc) = (bv.clone(), bc.clone());
                    t.xor_assign(&bv);
                    comb.xor_assign(&bc);
                }
                None => return None,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b == 1);
        }
        v
    }

    #[test]
    fn rank_of_independent_rows() {
        let rows = vec![bv(&[1, 0, 0]), bv(&[0, 1, 0]), bv(&[1, 1, 1])];
        assert_eq!(rank(rows), 3);
    }

    #[test]
    fn rank_counts_dependencies() {
        let rows = vec![bv(&[1, 1, 0]), bv(&[0, 1, 1]), bv(&[1, 0, 1])];
        assert_eq!(rank(rows), 2);
        assert_eq!(rank(vec![bv(&[0, 0, 0])]), 0);
    }

    #[test]
    fn solve_finds_combination() {
        let rows = vec![bv(&[1, 1, 0]), bv(&[0, 1, 1])];
        let sol = solve(&rows, &bv(&[1, 0, 1])).unwrap();
        assert_eq!(sol, vec![true, true]);
        assert!(solve(&rows, &bv(&[0, 0, 1])).is_none());
    }

    #[test]
    fn select_restricts_positions() {
        let v = bv(&[1, 0, 1, 1, 0]);
        assert_eq!(v.select(&[0, 3, 4]), bv(&[1, 1, 0]));
    }

    #[test]
    fn dot_is_overlap_parity() {
        assert!(bv(&[1, 1, 0]).dot(&bv(&[1, 0, 0])));
        assert!(!bv(&[1, 1, 0]).dot(&bv(&[1, 1, 0])));
    }

    #[test]
    fn wide_vectors_cross_word_boundaries() {
        let mut v = BitVec::zeros(130);
        v.set(0, true);
        v.set(64, true);
        v.set(129, true);
        assert_eq!(v.count_ones(), 3);
        assert_eq!(v.iter_ones().collect::<Vec<_>>(), vec![0, 64, 129]);
        let mut w = BitVec::zeros(130);
        w.set(64, true);
        assert!(v.dot(&w));
        v.xor_assign(&w);
        assert!(!v.get(64));
    }
}
