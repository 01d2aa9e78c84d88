//! Exact minimum-cost assignment for square cost matrices.
//!
//! Shortest-augmenting-path algorithm with dual potentials (the
//! Jonker-Volgenant / Hungarian family), O(n^3). Distances produced from the
//! returned assignment are re-summed from the original matrix entries, so the
//! reported optimum never depends on the internal dual arithmetic.

/// Row-major square cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn build<F: FnMut(usize, usize) -> f64>(n: usize, mut cost: F) -> Self {
        assert!(n > 0, "cost matrix must be nonempty");
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(cost(i, j));
            }
        }
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    /// Sum of `c[i][perm[i]]` accumulated in row order. Every Wasserstein
    /// value of this crate is derived through this one accumulation order.
    pub fn assignment_sum(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.at(i, j)).sum()
    }
}

const UNASSIGNED: usize = usize::MAX;

/// Returns the row-to-column assignment minimizing the total cost.
pub fn min_cost_assignment(cost: &CostMatrix) -> Vec<usize> {
    let n = cost.size();
    // col_to_row[n] is a virtual column used to seed each augmentation.
    let mut col_to_row = vec![UNASSIGNED; n + 1];
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![n; n + 1];
    let mut min_slack = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 0..n {
        col_to_row[n] = row;
        let mut j0 = n;
        min_slack[..n].fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let reduced = cost.at(i0, j) - u[i0] - v[j];
                    if reduced < min_slack[j] {
                        min_slack[j] = reduced;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == UNASSIGNED {
                break;
            }
        }
        // walk the alternating tree back to the virtual column
        loop {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut row_to_col = vec![UNASSIGNED; n];
    for j in 0..n {
        row_to_col[col_to_row[j]] = j;
    }
    row_to_col
}
