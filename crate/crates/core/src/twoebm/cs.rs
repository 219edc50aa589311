use crate::error::{Error, Result};
use crate::model::Matching;

use super::assignment::perfect_matching;

/// Bijection between ordered pairs of distinct indices of `0..n` and
/// positions `0..n(n-1)`. Pairs `(i, k)` with `i < k` fill the first half in
/// row-major order; `(k, i)` sits at the mirrored position, so
/// `index(i, k) + index(k, i) = n(n-1) - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairIndexMap {
    n: usize,
    forward: Vec<usize>,
    inverse: Vec<(usize, usize)>,
}

impl PairIndexMap {
    pub fn new(n: usize) -> Self {
        let size = n * n.saturating_sub(1);
        let mut forward = vec![usize::MAX; n * n];
        let mut inverse = vec![(0, 0); size];
        for i in 0..n {
            for k in (i + 1)..n {
                // one-based: sum_{h < i} (n - h) + k - i, with i, k one-based
                let (i1, k1) = (i + 1, k + 1);
                let pos = (1..i1).map(|h| n - h).sum::<usize>() + k1 - i1;
                forward[i * n + k] = pos - 1;
                forward[k * n + i] = size - pos;
                inverse[pos - 1] = (i, k);
                inverse[size - pos] = (k, i);
            }
        }
        Self { n, forward, inverse }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `N = n(n-1)`.
    pub fn size(&self) -> usize {
        self.inverse.len()
    }

    /// Zero-based position of the ordered pair `(i, k)`, `i != k`.
    pub fn index(&self, i: usize, k: usize) -> usize {
        debug_assert!(i != k);
        self.forward[i * self.n + k]
    }

    pub fn pair(&self, pos: usize) -> (usize, usize) {
        self.inverse[pos]
    }

    /// Position of the reversed pair.
    pub fn mirror(&self, pos: usize) -> usize {
        self.size() - 1 - pos
    }
}

pub const CS_SUM_TOL: f64 = 1e-7;
pub const CS_ENTRY_TOL: f64 = 1e-9;

/// Doubly stochastic, centro-symmetric `N x N` matrix (`N` even).
#[derive(Clone, Debug, PartialEq)]
pub struct CsDsMatrix {
    size: usize,
    data: Vec<f64>,
}

impl CsDsMatrix {
    /// Validates row and column sums, nonnegativity and centro-symmetry.
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::DimensionMismatch(format!("{} entries for a {size}x{size} matrix", data.len())));
        }
        if size % 2 != 0 {
            return Err(Error::InvariantViolation(format!("size {size} is odd")));
        }
        let at = |u: usize, v: usize| data[u * size + v];
        for u in 0..size {
            for v in 0..size {
                if at(u, v) < -CS_ENTRY_TOL {
                    return Err(Error::InvariantViolation(format!("negative cell ({u},{v}) = {}", at(u, v))));
                }
                let mirror = at(size - 1 - u, size - 1 - v);
                if (at(u, v) - mirror).abs() > CS_ENTRY_TOL {
                    return Err(Error::InvariantViolation(format!(
                        "cell ({u},{v}) = {} differs from its centro-symmetric partner {mirror}",
                        at(u, v)
                    )));
                }
            }
        }
        for u in 0..size {
            let row: f64 = (0..size).map(|v| at(u, v)).sum();
            if (row - 1.0).abs() > CS_SUM_TOL {
                return Err(Error::InvariantViolation(format!("row {u} sums to {row}")));
            }
            let col: f64 = (0..size).map(|v| at(v, u)).sum();
            if (col - 1.0).abs() > CS_SUM_TOL {
                return Err(Error::InvariantViolation(format!("column {u} sums to {col}")));
            }
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.size + v]
    }

    /// Largest distance of an entry from {0, 1}.
    pub fn fractionality(&self) -> f64 {
        self.data.iter().map(|x| x.abs().min((x - 1.0).abs())).fold(0.0, f64::max)
    }

    pub fn is_integral(&self, tol: f64) -> bool {
        self.fractionality() <= tol
    }

    /// The centro-symmetric permutation matrix of a row-to-column map.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let size = perm.len();
        let mut data = vec![0.0; size * size];
        for (u, &v) in perm.iter().enumerate() {
            data[u * size + v] = 1.0;
        }
        Self::new(size, data)
    }
}

/// Builds `T[index(i,k)][index(j,l)] = t(i, j, k, l)` from a dense quadruple
/// table indexed `((i n + j) n + k) n + l`.
pub fn to_cs_matrix(t: &[f64], map: &PairIndexMap) -> Result<CsDsMatrix> {
    let n = map.n();
    if t.len() != n * n * n * n {
        return Err(Error::DimensionMismatch(format!("t has {} entries, expected {}", t.len(), n * n * n * n)));
    }
    let size = map.size();
    let mut data = vec![0.0; size * size];
    for u in 0..size {
        let (i, k) = map.pair(u);
        for v in 0..size {
            let (j, l) = map.pair(v);
            data[u * size + v] = t[((i * n + j) * n + k) * n + l];
        }
    }
    CsDsMatrix::new(size, data)
}

/// The CS permutation matrix induced by a matching: row `(i,k)` to column
/// `(b(i), b(k))`.
pub fn matching_permutation(b: &Matching, map: &PairIndexMap) -> Vec<usize> {
    (0..map.size())
        .map(|u| {
            let (i, k) = map.pair(u);
            map.index(b.item_of(i), b.item_of(k))
        })
        .collect()
}

/// The matching a CS permutation encodes, if it encodes one.
pub fn permutation_to_matching(perm: &[usize], map: &PairIndexMap) -> Option<Matching> {
    let n = map.n();
    let mut item: Vec<Option<usize>> = vec![None; n];
    for (u, &v) in perm.iter().enumerate() {
        let (i, k) = map.pair(u);
        let (j, l) = map.pair(v);
        for (agent, it) in [(i, j), (k, l)] {
            match item[agent] {
                None => item[agent] = Some(it),
                Some(prev) if prev != it => return None,
                _ => {}
            }
        }
    }
    let assignment: Option<Vec<usize>> = item.into_iter().collect();
    let b = Matching::new(assignment?).ok()?;
    (matching_permutation(&b, map) == perm).then_some(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeelTerm {
    /// Row `u` maps to column `perm[u]`.
    pub perm: Vec<usize>,
    pub weight: f64,
}

const PEEL_SUPPORT_TOL: f64 = 1e-12;
const PEEL_MASS_TOL: f64 = 1e-9;

/// Decomposes a CS doubly stochastic matrix into a convex combination of CS
/// permutation matrices.
///
/// Each round folds `T` into the `N/2 x N/2` matrix `M[u][v] = T[u][v] +
/// T[u][N-1-v]` (rows and columns of the first half), which is doubly
/// stochastic; a perfect matching in the support of `M` lifts to a CS
/// permutation inside the support of `T`.
pub fn peel_cs_permutation(t: &CsDsMatrix) -> Result<Vec<PeelTerm>> {
    let size = t.size();
    let half = size / 2;
    let mut rest: Vec<f64> = (0..size * size).map(|idx| t.data[idx].max(0.0)).collect();
    let mut mass = 1.0;
    let mut terms = Vec::new();
    while mass > PEEL_MASS_TOL {
        let allowed: Vec<Vec<bool>> = (0..half)
            .map(|u| {
                (0..half)
                    .map(|v| rest[u * size + v] > PEEL_SUPPORT_TOL || rest[u * size + size - 1 - v] > PEEL_SUPPORT_TOL)
                    .collect()
            })
            .collect();
        let Some(sigma) = perfect_matching(&allowed) else {
            return Err(Error::InvariantViolation(format!(
                "no centro-symmetric perfect matching in the support with remaining mass {mass:e}"
            )));
        };
        let mut perm = vec![0; size];
        let mut weight = f64::INFINITY;
        for u in 0..half {
            let v = sigma.item_of(u);
            let (a, b) = (rest[u * size + v], rest[u * size + size - 1 - v]);
            let w = if a >= b { v } else { size - 1 - v };
            perm[u] = w;
            perm[size - 1 - u] = size - 1 - w;
            weight = weight.min(rest[u * size + w]);
        }
        for (u, &w) in perm.iter().enumerate() {
            let cell = &mut rest[u * size + w];
            *cell -= weight;
            if *cell < PEEL_SUPPORT_TOL {
                *cell = 0.0;
            }
        }
        mass -= weight;
        terms.push(PeelTerm { perm, weight });
    }
    Ok(terms)
}

/// `max |T - sum_r weight_r P_r|` over all cells.
pub fn reconstruction_error(t: &CsDsMatrix, terms: &[PeelTerm]) -> f64 {
    let size = t.size();
    let mut acc = vec![0.0; size * size];
    for term in terms {
        for (u, &v) in term.perm.iter().enumerate() {
            acc[u * size + v] += term.weight;
        }
    }
    (0..size * size).map(|idx| (acc[idx] - t.data[idx]).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twoebm::assignment::all_matchings;

    #[test]
    fn pair_index_is_a_centro_bijection() {
        for n in 2..=12 {
            let map = PairIndexMap::new(n);
            let size = n * (n - 1);
            let mut seen = vec![false; size];
            for i in 0..n {
                for k in (0..n).filter(|&k| k != i) {
                    let pos = map.index(i, k);
                    assert!(!seen[pos]);
                    seen[pos] = true;
                    assert_eq!(pos + map.index(k, i), size - 1);
                    assert_eq!(map.pair(pos), (i, k));
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn one_based_formula_for_n3() {
        let map = PairIndexMap::new(3);
        // pi(1,2) = 1, pi(1,3) = 2, pi(2,3) = 3, pi(3,2) = 4, pi(3,1) = 5, pi(2,1) = 6
        assert_eq!(map.index(0, 1), 0);
        assert_eq!(map.index(0, 2), 1);
        assert_eq!(map.index(1, 2), 2);
        assert_eq!(map.index(2, 1), 3);
        assert_eq!(map.index(2, 0), 4);
        assert_eq!(map.index(1, 0), 5);
    }

    fn t_of_matching(b: &Matching) -> Vec<f64> {
        let n = b.len();
        let mut t = vec![0.0; n * n * n * n];
        for i in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                t[((i * n + b.item_of(i)) * n + k) * n + b.item_of(k)] = 1.0;
            }
        }
        t
    }

    #[test]
    fn matching_gives_cs_permutation() {
        let map = PairIndexMap::new(3);
        let b = Matching::identity(3);
        let t = to_cs_matrix(&t_of_matching(&b), &map).unwrap();
        assert_eq!(t.size(), 6);
        assert!(t.is_integral(0.0));
        let terms = peel_cs_permutation(&t).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(permutation_to_matching(&terms[0].perm, &map), Some(b));
    }

    #[test]
    fn uniform_mixture_is_doubly_stochastic() {
        let n = 3;
        let map = PairIndexMap::new(n);
        let mut t = vec![0.0; n.pow(4)];
        let all: Vec<_> = all_matchings(n).collect();
        for b in &all {
            for (acc, x) in t.iter_mut().zip(t_of_matching(b)) {
                *acc += x / all.len() as f64;
            }
        }
        let m = to_cs_matrix(&t, &map).unwrap();
        let terms = peel_cs_permutation(&m).unwrap();
        assert!(reconstruction_error(&m, &terms) < 1e-9);
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_term_mixture_n4() {
        let p1 = vec![0, 1, 2, 3];
        let p2 = vec![1, 0, 3, 2];
        let mut data = vec![0.0; 16];
        for (u, (&a, &b)) in p1.iter().zip(&p2).enumerate() {
            data[u * 4 + a] += 0.5;
            data[u * 4 + b] += 0.5;
        }
        let m = CsDsMatrix::new(4, data).unwrap();
        let mut terms = peel_cs_permutation(&m).unwrap();
        terms.sort_by(|a, b| a.perm.cmp(&b.perm));
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].perm, p1);
        assert_eq!(terms[1].perm, p2);
        assert!((terms[0].weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invariant_violations_are_named() {
        let err = CsDsMatrix::new(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("cell"));
        let err = CsDsMatrix::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap_err();
        assert!(err.to_string().contains("row 0"));
    }
}
