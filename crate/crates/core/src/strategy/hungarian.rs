//! Minimum-cost perfect assignment on a square matrix, O(n^3), using row and
//! column potentials with shortest augmenting paths.

/// Returns `col[i]`, the column assigned to row `i`, minimising the total
/// cost. `cost` must be square with finite entries.
pub fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based arrays; row 0 and column 0 are the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col = vec![0; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

/// Maximum-benefit injective assignment of rows to columns on a possibly
/// rectangular matrix. `None` entries are forbidden pairs; they are scored
/// with `sentinel`, which must be below every real entry, and reported as
/// unassigned if the optimum still uses them.
pub fn assign_max(benefit: &[Vec<Option<f64>>], sentinel: f64) -> Vec<Option<usize>> {
    let rows = benefit.len();
    let cols = benefit.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    let mut cost = vec![vec![0.0; n]; n];
    for (i, row) in benefit.iter().enumerate() {
        assert_eq!(row.len(), cols, "benefit matrix rows must have equal length");
        for (j, b) in row.iter().enumerate() {
            cost[i][j] = -b.unwrap_or(sentinel);
        }
    }
    let col = solve(&cost);
    (0..rows)
        .map(|i| {
            let j = col[i];
            (j < cols && benefit[i][j].is_some()).then_some(j)
        })
        .collect()
}
