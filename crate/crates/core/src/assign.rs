//! Minimum-cost bipartite assignment with forbidden edges.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Rectangular cost matrix over candidate rows and detection columns.
///
/// Masked-off entries are never assigned; non-finite costs are treated as
/// masked as well.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cost: Vec<f64>,
    mask: Vec<bool>,
}

impl CostMatrix {
    /// All entries start forbidden; `set` opens them.
    pub fn new(rows: usize, cols: usize) -> Self {
        CostMatrix { rows, cols, cost: vec![0.0; rows * cols], mask: vec![false; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, cost: f64) {
        let i = self.index(r, c);
        self.cost[i] = cost;
        self.mask[i] = cost.is_finite();
    }

    pub fn forbid(&mut self, r: usize, c: usize) {
        let i = self.index(r, c);
        self.mask[i] = false;
    }

    pub fn cost(&self, r: usize, c: usize) -> f64 {
        self.cost[self.index(r, c)]
    }

    pub fn allowed(&self, r: usize, c: usize) -> bool {
        self.mask[self.index(r, c)]
    }

    pub fn any_allowed(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }

    fn index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.rows && c < self.cols);
        r * self.cols + c
    }

    /// Finite stand-in for forbidden edges, clear of every real total.
    fn big(&self) -> f64 {
        let sum_abs: f64 = self
            .cost
            .iter()
            .zip(&self.mask)
            .filter(|(c, &m)| m && c.is_finite())
            .map(|(c, _)| math::abs(*c))
            .sum();
        4.0 * (sum_abs + 1.0)
    }
}

/// A feasible assignment: pairs use each row and column at most once and
/// touch no forbidden edge. `total_cost` sums the paired entries in row
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Solves minimum-cost assignment on `m` by the Hungarian method with row
/// and column potentials, padding rectangular input to a square internally.
///
/// Among mask-feasible assignments the result has maximum cardinality first
/// and minimum total cost second. With everything forbidden the assignment
/// is empty.
pub fn hungarian(m: &CostMatrix) -> Assignment {
    let (rows, cols) = (m.rows(), m.cols());
    let n = rows.max(cols);
    if n == 0 {
        return Assignment { pairs: Vec::new(), total_cost: 0.0 };
    }

    let big = m.big();
    let at = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols && m.allowed(r, c) {
            m.cost(r, c)
        } else {
            big
        }
    };

    // Potentials over the padded square matrix, 1-based with column 0 as
    // the staging slot for the row currently being inserted.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1]; // row assigned to each column, 0 = none
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_to[j] {
                    min_to[j] = cur;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for j in 1..=n {
        let i = row_of[j];
        if i == 0 {
            continue;
        }
        let (r, c) = (i - 1, j - 1);
        if r < rows && c < cols && m.allowed(r, c) {
            pairs.push((r, c));
        }
    }
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(r, c)| m.cost(r, c)).sum();
    Assignment { pairs, total_cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(entries: &[&[f64]]) -> CostMatrix {
        let rows = entries.len();
        let cols = entries.first().map_or(0, |r| r.len());
        let mut m = CostMatrix::new(rows, cols);
        for (r, row) in entries.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Exhaustive minimum over all maximum-cardinality assignments.
    /// Independent of the solver above; shared with the acceptance suite in
    /// spirit, duplicated so each stays self-contained.
    fn brute_force(m: &CostMatrix) -> f64 {
        fn recurse(m: &CostMatrix, r: usize, used: &mut [bool], depth_cost: f64, best: &mut (usize, f64), taken: usize) {
            if r == m.rows() {
                let cardinality = taken;
                if cardinality > best.0 || (cardinality == best.0 && depth_cost < best.1) {
                    *best = (cardinality, depth_cost);
                }
                return;
            }
            // Leave row r unassigned.
            recurse(m, r + 1, used, depth_cost, best, taken);
            for c in 0..m.cols() {
                if !used[c] && m.allowed(r, c) {
                    used[c] = true;
                    recurse(m, r + 1, used, depth_cost + m.cost(r, c), best, taken + 1);
                    used[c] = false;
                }
            }
        }
        let mut best = (0usize, f64::INFINITY);
        let mut used = vec![false; m.cols()];
        recurse(m, 0, &mut used, 0.0, &mut best, 0);
        if best.0 == 0 {
            0.0
        } else {
            best.1
        }
    }

    #[test]
    fn one_by_one() {
        let a = hungarian(&matrix(&[&[4.0]]));
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.total_cost, 4.0);
    }

    #[test]
    fn two_by_two_diagonal() {
        let a = hungarian(&matrix(&[&[1.0, 2.0], &[2.0, 1.0]]));
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn three_by_three_antidiagonal() {
        let a = hungarian(&matrix(&[
            &[1.0, 2.0, 3.0],
            &[2.0, 4.0, 6.0],
            &[3.0, 6.0, 9.0],
        ]));
        assert_eq!(a.pairs, vec![(0, 2), (1, 1), (2, 0)]);
        assert_eq!(a.total_cost, 10.0);
    }

    #[test]
    fn fully_forbidden_matrix_yields_empty_assignment() {
        let mut m = CostMatrix::new(2, 2);
        m.set(0, 0, 1.0);
        m.forbid(0, 0);
        let a = hungarian(&m);
        assert!(a.pairs.is_empty());
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn forbidden_edges_are_never_assigned() {
        let mut m = matrix(&[&[0.1, 5.0], &[0.2, 9.0]]);
        m.forbid(0, 0);
        m.forbid(1, 0);
        let a = hungarian(&m);
        for &(r, c) in &a.pairs {
            assert!(m.allowed(r, c));
        }
        // Column 0 is gone, so exactly one pair survives on column 1.
        assert_eq!(a.pairs, vec![(0, 1)]);
    }

    #[test]
    fn non_finite_costs_are_masked() {
        let mut m = CostMatrix::new(1, 2);
        m.set(0, 0, f64::INFINITY);
        m.set(0, 1, 3.0);
        assert!(!m.allowed(0, 0));
        assert_eq!(hungarian(&m).pairs, vec![(0, 1)]);
    }

    #[test]
    fn matches_brute_force_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let mut m = CostMatrix::new(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    if rng.gen_bool(0.9) {
                        m.set(r, c, rng.gen_range(0.0..10.0));
                    }
                }
            }
            let a = hungarian(&m);
            let expect = brute_force(&m);
            if a.pairs.is_empty() {
                assert_eq!(expect, 0.0);
            } else {
                assert_eq!(a.total_cost, expect, "matrix {m:?}");
            }
        }
    }

    #[test]
    fn no_row_or_column_used_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=7);
            let cols = rng.gen_range(1..=7);
            let mut m = CostMatrix::new(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen_range(0.0..1.0));
                }
            }
            let a = hungarian(&m);
            assert_eq!(a.pairs.len(), rows.min(cols));
            let mut rs: Vec<_> = a.pairs.iter().map(|p| p.0).collect();
            let mut cs: Vec<_> = a.pairs.iter().map(|p| p.1).collect();
            rs.dedup();
            cs.sort_unstable();
            cs.dedup();
            assert_eq!(rs.len(), a.pairs.len());
            assert_eq!(cs.len(), a.pairs.len());
        }
    }

    #[test]
    fn positive_scaling_leaves_the_assignment_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(2..=6);
            let mut m = CostMatrix::new(n, n);
            for r in 0..n {
                for c in 0..n {
                    m.set(r, c, rng.gen_range(0.0..10.0));
                }
            }
            // Power-of-two scale keeps the arithmetic exact.
            let mut scaled = CostMatrix::new(n, n);
            for r in 0..n {
                for c in 0..n {
                    scaled.set(r, c, m.cost(r, c) * 8.0);
                }
            }
            assert_eq!(hungarian(&m).pairs, hungarian(&scaled).pairs);
        }
    }
}
