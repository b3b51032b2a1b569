//! Maximum-weight bipartite assignment on dense `f64` matrices.

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials, O(n^3)). Returns `row -> column`.
fn min_cost_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // col_row[j] = row assigned to column j (1-based; 0 = free).
    let mut col_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
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
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_col = vec![0; n];
    for j in 1..=n {
        if col_row[j] != 0 {
            row_col[col_row[j] - 1] = j - 1;
        }
    }
    row_col
}

/// Best total weight over matchings that use only allowed (`Some`, and
/// non-negative) entries, each row and column at most once.
pub(crate) fn max_weight_total(weights: &[Vec<Option<f64>>], rows: &[bool], cols: &[bool]) -> f64 {
    let live_rows: Vec<usize> = (0..weights.len()).filter(|&r| rows[r]).collect();
    let live_cols: Vec<usize> = (0..cols.len()).filter(|&c| cols[c]).collect();
    let n = live_rows.len().max(live_cols.len());
    if n == 0 {
        return 0.0;
    }
    let gain = |r: usize, c: usize| -> f64 {
        match (live_rows.get(r), live_cols.get(c)) {
            (Some(&r), Some(&c)) => weights[r][c].unwrap_or(0.0).max(0.0),
            _ => 0.0,
        }
    };
    let max = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| gain(r, c)).fold(0.0, f64::max);
    let cost: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| max - gain(r, c)).collect()).collect();
    let assign = min_cost_square(&cost);
    assign.iter().enumerate().map(|(r, &c)| gain(r, c)).sum()
}

/// Maximum-weight matching over allowed entries of a `rows x cols` matrix.
///
/// Entries must be non-negative. Among optimal matchings the one whose pair
/// sequence (sorted by row) is lexicographically smallest is returned, with a
/// matched row preferred over leaving it free.
pub(crate) fn max_weight_matching(weights: &[Vec<Option<f64>>], cols: usize) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let mut row_live = vec![true; rows];
    let mut col_live = vec![true; cols];
    let mut remaining = max_weight_total(weights, &row_live, &col_live);
    let tol = |v: f64| 1e-12 * v.abs().max(1.0);
    let mut pairs = Vec::new();
    for r in 0..rows {
        row_live[r] = false;
        let mut chosen = None;
        for c in 0..cols {
            let Some(w) = weights[r][c] else { continue };
            if !col_live[c] {
                continue;
            }
            col_live[c] = false;
            let rest = max_weight_total(weights, &row_live, &col_live);
            if (w + rest - remaining).abs() <= tol(remaining) {
                chosen = Some((c, rest));
                break;
            }
            col_live[c] = true;
        }
        match chosen {
            Some((c, rest)) => {
                pairs.push((r, c));
                remaining = rest;
            }
            None => {
                // Row stays free; the remaining optimum is unchanged.
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(weights: &[Vec<Option<f64>>], cols: usize) -> f64 {
        fn go(r: usize, w: &[Vec<Option<f64>>], used: &mut Vec<bool>) -> f64 {
            if r == w.len() {
                return 0.0;
            }
            let mut best = go(r + 1, w, used);
            for c in 0..used.len() {
                if let (false, Some(v)) = (used[c], w[r][c]) {
                    used[c] = true;
                    best = best.max(v + go(r + 1, w, used));
                    used[c] = false;
                }
            }
            best
        }
        go(0, weights, &mut vec![false; cols])
    }

    #[test]
    fn two_by_two() {
        let w = vec![vec![Some(0.9), Some(0.1)], vec![Some(0.2), Some(0.8)]];
        assert_eq!(max_weight_matching(&w, 2), vec![(0, 0), (1, 1)]);
        assert!((max_weight_total(&w, &[true; 2], &[true; 2]) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn rectangular_and_forbidden() {
        let w = vec![vec![None, Some(0.5), Some(0.4)]];
        assert_eq!(max_weight_matching(&w, 3), vec![(0, 1)]);
        let w = vec![vec![None], vec![Some(0.3)], vec![Some(0.6)]];
        assert_eq!(max_weight_matching(&w, 1), vec![(2, 0)]);
        assert!(max_weight_matching(&[vec![None, None]], 2).is_empty());
        assert!(max_weight_matching(&[], 0).is_empty());
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        let w = vec![vec![Some(1.0), Some(1.0)], vec![Some(1.0), Some(1.0)]];
        assert_eq!(max_weight_matching(&w, 2), vec![(0, 0), (1, 1)]);
        // Both (0,1) alone and (1,1) alone total 0.5; row 0 goes first.
        let w = vec![vec![None, Some(0.5)], vec![None, Some(0.5)]];
        assert_eq!(max_weight_matching(&w, 2), vec![(0, 1)]);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_brute_force(
            r in 1usize..6, c in 1usize..6,
            vals in proptest::collection::vec(proptest::option::weighted(0.8, 0.0f64..1.0), 36),
        ) {
            let w: Vec<Vec<Option<f64>>> = (0..r).map(|i| vals[i * 6..i * 6 + c].to_vec()).collect();
            let pairs = max_weight_matching(&w, c);
            let total: f64 = pairs.iter().map(|&(i, j)| w[i][j].unwrap()).sum();
            proptest::prop_assert!((total - brute(&w, c)).abs() < 1e-9);
            let mut seen_c = vec![false; c];
            for &(_, j) in &pairs {
                proptest::prop_assert!(!seen_c[j]);
                seen_c[j] = true;
            }
        }
    }
}
