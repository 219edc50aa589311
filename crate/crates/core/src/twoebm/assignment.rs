use crate::model::Matching;

/// Maximum-weight perfect matching on a complete bipartite graph
/// (Hungarian method with potentials, O(n^3)).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (Matching, f64) {
    let n = weights.len();
    if n == 0 {
        return (Matching::identity(0), 0.0);
    }
    let cost: Vec<Vec<f64>> = weights.iter().map(|row| row.iter().map(|w| -w).collect()).collect();
    let assignment = hungarian_min(&cost);
    let value = (0..n).map(|i| weights[i][assignment[i]]).sum();
    (Matching::new(assignment).expect("hungarian yields a permutation"), value)
}

/// As [`max_weight_assignment`] but restricted to `allowed` edges; `None`
/// when no perfect matching uses only allowed edges.
pub fn max_weight_assignment_masked(weights: &[Vec<f64>], allowed: &[Vec<bool>]) -> Option<(Matching, f64)> {
    let n = weights.len();
    perfect_matching(allowed)?;
    let scale = weights.iter().flatten().fold(1.0f64, |a, w| a.max(w.abs()));
    let big = 1e6 * scale * (n as f64 + 1.0);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if allowed[i][j] { -weights[i][j] } else { big }).collect())
        .collect();
    let assignment = hungarian_min(&cost);
    if (0..n).any(|i| !allowed[i][assignment[i]]) {
        return None;
    }
    let value = (0..n).map(|i| weights[i][assignment[i]]).sum();
    Some((Matching::new(assignment).expect("hungarian yields a permutation"), value))
}

/// Row-to-column assignment minimizing total cost.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Some perfect matching within `allowed` (Kuhn's augmenting paths), or
/// `None` if there is none.
pub fn perfect_matching(allowed: &[Vec<bool>]) -> Option<Matching> {
    let n = allowed.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, allowed, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut assignment = vec![0; n];
    for (j, o) in owner.iter().enumerate() {
        assignment[o.expect("perfect")] = j;
    }
    Some(Matching::new(assignment).expect("perfect matching is a permutation"))
}

fn augment(i: usize, allowed: &[Vec<bool>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for j in 0..allowed.len() {
        if !allowed[i][j] || seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none_or(|o| augment(o, allowed, owner, seen)) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_matchings(n: usize) -> impl Iterator<Item = Matching> {
    let mut current: Option<Vec<usize>> = Some((0..n).collect());
    std::iter::from_fn(move || {
        let out = current.take()?;
        let mut next = out.clone();
        if next_permutation(&mut next) {
            current = Some(next);
        }
        Some(Matching::new(out).expect("permutation"))
    })
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(weights: &[Vec<f64>]) -> f64 {
        all_matchings(weights.len())
            .map(|b| (0..weights.len()).map(|i| weights[i][b.item_of(i)]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn diagonal_dominant() {
        let w = vec![vec![5.0, 1.0, 0.0], vec![1.0, 4.0, 2.0], vec![0.0, 1.0, 3.0]];
        let (b, v) = max_weight_assignment(&w);
        assert_eq!(b, Matching::identity(3));
        assert_eq!(v, 12.0);
    }

    #[test]
    fn constant_weights() {
        let w = vec![vec![-2.5; 4]; 4];
        let (_, v) = max_weight_assignment(&w);
        assert!((v + 10.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_n5() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let (_, v) = max_weight_assignment(&w);
            assert!((v - brute(&w)).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_assignment_and_perfect_matching() {
        let allowed = vec![vec![true, false], vec![true, false]];
        assert!(perfect_matching(&allowed).is_none());
        assert!(max_weight_assignment_masked(&[vec![1.0, 1.0], vec![1.0, 1.0]], &allowed).is_none());
        let allowed = vec![vec![false, true], vec![true, true]];
        let (b, v) = max_weight_assignment_masked(&[vec![9.0, 1.0], vec![1.0, 9.0]], &allowed).unwrap();
        assert_eq!(b.as_slice(), &[1, 0]);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(all_matchings(1).count(), 1);
        assert_eq!(all_matchings(3).count(), 6);
        assert_eq!(all_matchings(4).count(), 24);
        let first: Vec<_> = all_matchings(3).take(2).map(|b| b.as_slice().to_vec()).collect();
        assert_eq!(first, vec![vec![0, 1, 2], vec![0, 2, 1]]);
    }
}
