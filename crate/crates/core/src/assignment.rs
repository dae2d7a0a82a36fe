//! Exact solvers for the rectangular linear assignment problem and the
//! balanced transportation problem with uniform marginals.

use num_rational::Ratio;

use crate::error::AssignmentError;

/// Dense row-major matrix of finite, non-negative costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::Shape {
                rows,
                cols,
                len: data.len(),
            });
        }
        for (idx, &value) in data.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(AssignmentError::InvalidEntry {
                    row: idx / cols.max(1),
                    col: idx % cols.max(1),
                    value,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, AssignmentError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(n_rows, n_cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Injective row-to-column map covering `min(rows, cols)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the assigned costs, accumulated in row order.
    pub total_cost: f64,
}

impl Assignment {
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&row, |&(r, _)| r)
            .ok()
            .map(|i| self.pairs[i].1)
    }
}

/// Minimum-cost assignment, O(r²·c) shortest augmenting path with dual
/// potentials (r = smaller side).
///
/// Rectangular inputs are handled without padding: every row of the
/// smaller dimension is assigned. The result is deterministic: among
/// equal-cost augmenting paths the lowest column index is taken.
pub fn optimal_assignment(cost: &CostMatrix) -> Result<Assignment, AssignmentError> {
    if cost.is_empty() {
        return Err(AssignmentError::Empty);
    }
    let pairs = if cost.rows <= cost.cols {
        solve_wide(cost)
    } else {
        let mut pairs: Vec<(usize, usize)> = solve_wide(&cost.transpose()).into_iter().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        pairs
    };
    let total_cost = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Requires rows <= cols. Returns pairs sorted by row.
fn solve_wide(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let n = cost.rows;
    let m = cost.cols;
    // 1-based indices; column 0 is a virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| row_of_col[j] != 0)
        .map(|j| (row_of_col[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Optimal transport plan between uniform row masses `1/m` and uniform
/// column masses `1/n`.
///
/// Masses are scaled by `lcm(m, n)` so that every row supplies
/// `lcm/m` integer units and every column absorbs `lcm/n`. The flow is
/// therefore exact and the marginals hold with no rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    scale: u64,
    units: Vec<u64>,
    /// Optimal cost `sum_ij plan_ij * C_ij`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Common denominator of all masses.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// Integer flow units on cell `(i, j)`; the mass is `units / scale`.
    pub fn units(&self, i: usize, j: usize) -> u64 {
        self.units[i * self.cols + j]
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.units(i, j) as f64 / self.scale as f64
    }

    pub fn exact_mass(&self, i: usize, j: usize) -> Ratio<u64> {
        Ratio::new(self.units(i, j), self.scale)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

/// Balanced transportation problem with uniform marginals, solved exactly as
/// a min-cost flow by successive shortest paths (Bellman-Ford on the
/// residual graph).
pub fn min_cost_transport(cost: &CostMatrix) -> Result<TransportPlan, AssignmentError> {
    if cost.is_empty() {
        return Err(AssignmentError::Empty);
    }
    let (m, n) = (cost.rows, cost.cols);
    let scale = (m as u64 / gcd(m as u64, n as u64)) * n as u64;
    let supply = scale / m as u64;
    let demand = scale / n as u64;

    // Nodes: 0 = source, 1..=m rows, m+1..=m+n columns, m+n+1 = sink.
    let source = 0;
    let sink = m + n + 1;
    let node_count = m + n + 2;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    let mut add_edge = |edges: &mut Vec<Edge>, from: usize, to: usize, cap: u64, c: f64| {
        adjacency[from].push(edges.len());
        edges.push(Edge { to, cap, cost: c });
        adjacency[to].push(edges.len());
        edges.push(Edge {
            to: from,
            cap: 0,
            cost: -c,
        });
    };
    for i in 0..m {
        add_edge(&mut edges, source, 1 + i, supply, 0.0);
    }
    let mut cell_edge = vec![0usize; m * n];
    for i in 0..m {
        for j in 0..n {
            cell_edge[i * n + j] = edges.len();
            add_edge(&mut edges, 1 + i, 1 + m + j, scale, cost.get(i, j));
        }
    }
    for j in 0..n {
        add_edge(&mut edges, 1 + m + j, sink, demand, 0.0);
    }

    let mut remaining = scale;
    while remaining > 0 {
        let mut dist = vec![f64::INFINITY; node_count];
        let mut via: Vec<Option<usize>> = vec![None; node_count];
        dist[source] = 0.0;
        for _ in 0..node_count - 1 {
            let mut changed = false;
            for from in 0..node_count {
                if dist[from] == f64::INFINITY {
                    continue;
                }
                for &e in &adjacency[from] {
                    let edge = &edges[e];
                    if edge.cap == 0 {
                        continue;
                    }
                    let candidate = dist[from] + edge.cost;
                    if candidate < dist[edge.to] - 1e-12 {
                        dist[edge.to] = candidate;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // The network is complete bipartite, so a path always exists while
        // flow remains.
        let mut bottleneck = remaining;
        let mut node = sink;
        while node != source {
            let e = via[node].expect("residual path to sink");
            bottleneck = bottleneck.min(edges[e].cap);
            node = edges[e ^ 1].to;
        }
        let mut node = sink;
        while node != source {
            let e = via[node].expect("residual path to sink");
            edges[e].cap -= bottleneck;
            edges[e ^ 1].cap += bottleneck;
            node = edges[e ^ 1].to;
        }
        remaining -= bottleneck;
    }

    let units: Vec<u64> = cell_edge.iter().map(|&e| edges[e ^ 1].cap).collect();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let u = units[i * n + j];
            if u > 0 {
                total += u as f64 * cost.get(i, j);
            }
        }
    }
    Ok(TransportPlan {
        rows: m,
        cols: n,
        scale,
        units,
        cost: total / scale as f64,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive enumeration, used only by tests.
    use super::CostMatrix;

    /// Minimum over all injections of the smaller side into the larger one,
    /// summing in row order.
    pub fn brute_force_min(cost: &CostMatrix) -> f64 {
        let (r, c) = (cost.rows(), cost.cols());
        let mut best = f64::INFINITY;
        if r <= c {
            let mut used = vec![false; c];
            let mut chosen = Vec::with_capacity(r);
            rec(cost, false, 0, &mut used, &mut chosen, &mut best);
        } else {
            let mut used = vec![false; r];
            let mut chosen = Vec::with_capacity(c);
            rec(cost, true, 0, &mut used, &mut chosen, &mut best);
        }
        best
    }

    fn rec(
        cost: &CostMatrix,
        transposed: bool,
        depth: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        best: &mut f64,
    ) {
        let small = if transposed { cost.cols() } else { cost.rows() };
        if depth == small {
            // sum in row order of the original matrix
            let mut pairs: Vec<(usize, usize)> = chosen
                .iter()
                .enumerate()
                .map(|(s, &l)| if transposed { (l, s) } else { (s, l) })
                .collect();
            pairs.sort_unstable();
            let total: f64 = pairs.iter().map(|&(i, j)| cost.get(i, j)).sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                chosen.push(l);
                rec(cost, transposed, depth + 1, used, chosen, best);
                chosen.pop();
                used[l] = false;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::brute_force_min;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_two_by_two() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let a = optimal_assignment(&c).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost, 2.0);
        assert_eq!(brute_force_min(&c), 2.0);
    }

    #[test]
    fn single_cell() {
        let c = CostMatrix::from_rows(&[vec![5.0]]).unwrap();
        let a = optimal_assignment(&c).unwrap();
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.total_cost, 5.0);
    }

    #[test]
    fn tall_matrix_leaves_row_unassigned() {
        let c = CostMatrix::from_rows(&[vec![0.0, 9.0], vec![9.0, 0.0], vec![9.0, 9.0]]).unwrap();
        let a = optimal_assignment(&c).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.col_of(2), None);
        assert_eq!(a.total_cost, 0.0);
        assert_eq!(brute_force_min(&c), 0.0);
    }

    #[test]
    fn empty_matrix_rejected() {
        let c = CostMatrix::new(0, 3, vec![]).unwrap();
        assert_eq!(optimal_assignment(&c), Err(AssignmentError::Empty));
        assert_eq!(min_cost_transport(&c), Err(AssignmentError::Empty));
    }

    #[test]
    fn invalid_entries_rejected() {
        assert!(CostMatrix::from_rows(&[vec![1.0, -1.0]]).is_err());
        assert!(CostMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(CostMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn ties_are_deterministic() {
        let c = CostMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let a = optimal_assignment(&c).unwrap();
        let b = optimal_assignment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_cost, 3.0);
    }

    #[test]
    fn matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let r = rng.random_range(1..=6);
            let c = rng.random_range(1..=6);
            let integer = rng.random_bool(0.5);
            let m = CostMatrix::from_fn(r, c, |_, _| {
                if integer {
                    rng.random_range(0..5) as f64
                } else {
                    rng.random_range(0.0..100.0)
                }
            })
            .unwrap();
            let a = optimal_assignment(&m).unwrap();
            assert_eq!(a.pairs.len(), r.min(c));
            assert_eq!(a.total_cost, brute_force_min(&m), "{m:?}");
        }
    }

    #[test]
    fn transport_single_cell() {
        let c = CostMatrix::from_rows(&[vec![3.5]]).unwrap();
        let p = min_cost_transport(&c).unwrap();
        assert_eq!(p.exact_mass(0, 0), Ratio::new(1, 1));
        assert_eq!(p.cost, 3.5);
    }

    #[test]
    fn transport_two_by_one() {
        let c = CostMatrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        let p = min_cost_transport(&c).unwrap();
        assert_eq!(p.exact_mass(0, 0), Ratio::new(1, 2));
        assert_eq!(p.exact_mass(1, 0), Ratio::new(1, 2));
        assert_eq!(p.cost, 2.0);
    }

    #[test]
    fn transport_square_equals_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = 4;
            let c = CostMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..50.0)).unwrap();
            let p = min_cost_transport(&c).unwrap();
            let a = optimal_assignment(&c).unwrap();
            assert!((p.cost - a.total_cost / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn transport_rectangular_known_value() {
        // rows {0, 2}, column {1}, |x - y| costs: plan is forced to 1/2, 1/2.
        let c = CostMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(min_cost_transport(&c).unwrap().cost, 1.0);
        // 2x3 hand-solved: row masses 1/2, column masses 1/3.
        // Optimal: row0 -> col0 (1/3), col1 (1/6); row1 -> col1 (1/6), col2 (1/3).
        let c = CostMatrix::from_rows(&[vec![0.0, 1.0, 4.0], vec![4.0, 1.0, 0.0]]).unwrap();
        let p = min_cost_transport(&c).unwrap();
        assert!((p.cost - 1.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn transport_marginals_are_exact(
            m in 1usize..6, n in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = CostMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..10.0)).unwrap();
            let p = min_cost_transport(&c).unwrap();
            for i in 0..m {
                let row: Ratio<u64> = (0..n).map(|j| p.exact_mass(i, j)).sum();
                prop_assert_eq!(row, Ratio::new(1, m as u64));
            }
            for j in 0..n {
                let col: Ratio<u64> = (0..m).map(|i| p.exact_mass(i, j)).sum();
                prop_assert_eq!(col, Ratio::new(1, n as u64));
            }
        }

        #[test]
        fn assignment_cost_invariant_under_permutation(
            r in 1usize..6, c in 1usize..6, seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = CostMatrix::from_fn(r, c, |_, _| rng.random_range(0..20) as f64).unwrap();
            let mut rp: Vec<usize> = (0..r).collect();
            let mut cp: Vec<usize> = (0..c).collect();
            rp.shuffle(&mut rng);
            cp.shuffle(&mut rng);
            let permuted = CostMatrix::from_fn(r, c, |i, j| m.get(rp[i], cp[j])).unwrap();
            let a = optimal_assignment(&m).unwrap();
            let b = optimal_assignment(&permuted).unwrap();
            prop_assert_eq!(a.total_cost, b.total_cost);
        }
    }
}
