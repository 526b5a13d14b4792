//! Maximum-weight perfect matching on square integer matrices.

use crate::error::{Error, Result};

/// Permutation `π` maximizing `Σ_r weights[r][π(r)]`.
///
/// Among all optimal permutations the lexicographically smallest one is
/// returned, which makes the result independent of solver internals.
pub fn hungarian_match(weights: &[Vec<u64>]) -> Result<Vec<usize>> {
    let n = weights.len();
    if let Some(row) = weights.iter().find(|r| r.len() != n) {
        return Err(Error::invalid(format!(
            "hungarian: expected a square matrix, got a row of length {} in a {n}-row matrix",
            row.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max = weights.iter().flatten().copied().max().unwrap_or(0);
    if max > i64::MAX as u64 / (n as u64 + 1) {
        return Err(Error::invalid("hungarian: weights too large"));
    }
    let best = optimum(weights, &(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>());

    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut fixed = 0u64;
    let mut perm = vec![0usize; n];
    while let Some(&r) = rows.first() {
        rows.remove(0);
        let mut chosen = None;
        for (pos, &c) in cols.iter().enumerate() {
            let mut rest = cols.clone();
            rest.remove(pos);
            let total = fixed + weights[r][c] + optimum(weights, &rows, &rest);
            if total == best {
                chosen = Some((pos, c));
                break;
            }
        }
        let (pos, c) = chosen.expect("some column completes an optimal matching");
        perm[r] = c;
        fixed += weights[r][c];
        cols.remove(pos);
    }
    Ok(perm)
}

/// Optimal matched total on the submatrix `rows × cols` (equal lengths).
fn optimum(weights: &[Vec<u64>], rows: &[usize], cols: &[usize]) -> u64 {
    let n = rows.len();
    if n == 0 {
        return 0;
    }
    let max = rows.iter().flat_map(|&r| cols.iter().map(move |&c| weights[r][c])).max().unwrap_or(0) as i64;
    // Minimize cost = max - weight with the potential-based O(n³) method;
    // indices are 1-based with 0 as the virtual source column.
    let cost = |i: usize, j: usize| max - weights[rows[i - 1]][cols[j - 1]] as i64;
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
    (1..=n).map(|j| weights[rows[p[j] - 1]][cols[j - 1]]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(w: &[Vec<u64>]) -> (u64, Vec<usize>) {
        fn rec(w: &[Vec<u64>], r: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Option<(u64, Vec<usize>)>) {
            if r == w.len() {
                let total = cur.iter().enumerate().map(|(i, &c)| w[i][c]).sum();
                // permutations are visited in lexicographic order, so keep the first maximum
                if best.as_ref().is_none_or(|(b, _)| total > *b) {
                    *best = Some((total, cur.clone()));
                }
                return;
            }
            for c in 0..w.len() {
                if !used[c] {
                    used[c] = true;
                    cur.push(c);
                    rec(w, r + 1, used, cur, best);
                    cur.pop();
                    used[c] = false;
                }
            }
        }
        let mut best = None;
        rec(w, 0, &mut vec![false; w.len()], &mut Vec::new(), &mut best);
        best.unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(hungarian_match(&[vec![5, 0], vec![0, 5]]).unwrap(), vec![0, 1]);
        assert_eq!(hungarian_match(&[vec![0, 5], vec![5, 0]]).unwrap(), vec![1, 0]);
        assert_eq!(hungarian_match(&[]).unwrap(), Vec::<usize>::new());
        assert_eq!(hungarian_match(&[vec![0, 0], vec![0, 0]]).unwrap(), vec![0, 1]);
    }

    #[test]
    fn non_square_rejected() {
        assert!(hungarian_match(&[vec![1, 2, 3], vec![4, 5, 6]]).is_err());
    }

    #[test]
    fn matches_exhaustive_search_including_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..400 {
            let n = 1 + trial % 7;
            // small value range forces many ties
            let hi = if trial % 2 == 0 { 3 } else { 1000 };
            let w: Vec<Vec<u64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0..hi)).collect()).collect();
            let perm = hungarian_match(&w).unwrap();
            let (best, lex) = brute_force(&w);
            let total: u64 = perm.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
            assert_eq!(total, best, "{w:?}");
            assert_eq!(perm, lex, "{w:?}");
        }
    }
}
