//! Optimal linear assignment (Hungarian method with row/column potentials).

use crate::Matrix;

/// Minimum-cost perfect matching of a square cost matrix.
///
/// Returns `cols` with `cols[i]` the column assigned to row `i`.
pub fn min_cost_assignment(cost: &Matrix) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0; n];
    for j in 1..=n {
        cols[owner[j] - 1] = j - 1;
    }
    cols
}

fn total(score: &Matrix, cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum()
}

/// Best achievable score over the given rows and columns.
fn best_subscore(score: &Matrix, rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let sub = Matrix::from_fn(rows.len(), cols.len(), |i, j| -score[(rows[i], cols[j])]);
    let picks = min_cost_assignment(&sub);
    let value = picks
        .iter()
        .enumerate()
        .map(|(i, &j)| score[(rows[i], cols[j])])
        .sum();
    (value, picks.into_iter().map(|j| cols[j]).collect())
}

/// Maximum-score perfect matching, ties resolved toward the
/// lexicographically smallest column sequence.
pub fn max_score_assignment(score: &Matrix) -> Vec<usize> {
    let n = score.nrows();
    let mut cols = min_cost_assignment(&(-score));
    let best = total(score, &cols);
    let tol = 1e-12 * best.abs().max(1.0);

    // Walk rows in order and move each onto the smallest column that still
    // admits an optimal completion.
    let mut fixed = 0.0;
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut free: Vec<usize> = cols[row..].to_vec();
        free.sort_unstable();
        for &cand in free.iter().take_while(|&&c| c < cols[row]) {
            let others: Vec<usize> = free.iter().copied().filter(|&c| c != cand).collect();
            let (sub, picks) = best_subscore(score, &rest_rows, &others);
            if fixed + score[(row, cand)] + sub >= best - tol {
                cols[row] = cand;
                cols[row + 1..].copy_from_slice(&picks);
                break;
            }
        }
        fixed += score[(row, cols[row])];
    }
    cols
}
