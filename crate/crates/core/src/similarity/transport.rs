//! Exact transportation problem solver (the transportation simplex with
//! u-v potentials on a spanning-tree basis).

use crate::error::{Error, Result};

/// An optimal flow between `supply` rows and `demand` columns.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(row, col, flow)`; exactly `rows + cols - 1` of them,
    /// some possibly carrying zero flow.
    pub basis: Vec<(usize, usize, f64)>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

/// Residuals of the optimality conditions for a plan.
#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    /// Largest |row/column sum − marginal|.
    pub primal_residual: f64,
    /// Most negative flow.
    pub min_flow: f64,
    /// Most negative reduced cost `c_ij − u_i − v_j` over all cells.
    pub min_reduced_cost: f64,
    /// Largest |reduced cost| over cells carrying positive flow.
    pub slackness_violation: f64,
}

impl Certificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.min_flow >= -tol
            && self.min_reduced_cost >= -tol
            && self.slackness_violation <= tol
    }
}

const MAX_PIVOTS_PER_CELL: usize = 50;

/// Minimizes `Σ cost[i*cols + j] · x_ij` subject to row sums `supply` and
/// column sums `demand`. Both marginals must be non-negative with equal
/// totals (up to rounding; the last demand absorbs the difference).
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let rows = supply.len();
    let cols = demand.len();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyDistribution);
    }
    assert_eq!(cost.len(), rows * cols, "cost matrix shape");
    debug_assert!(supply.iter().chain(demand).all(|&x| x >= 0.0));

    let mut demand = demand.to_vec();
    let drift = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    demand[cols - 1] = (demand[cols - 1] + drift).max(0.0);

    let mut basis = least_cost_basis(supply, &demand, cost);
    let scale = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let tol = 1e-12 * (1.0 + scale);

    let mut u = vec![0.0; rows];
    let mut v = vec![0.0; cols];
    let max_pivots = MAX_PIVOTS_PER_CELL * rows * cols + 100;
    let mut pivots = 0;
    let mut tree = Tree::new(rows, cols);
    loop {
        tree.rebuild(&basis);
        tree.potentials(&basis, cost, &mut u, &mut v);

        let mut entering = None;
        let mut best = -tol;
        for i in 0..rows {
            for j in 0..cols {
                let r = cost[i * cols + j] - u[i] - v[j];
                if r < best {
                    best = r;
                    entering = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = entering else { break };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverStalled(pivots));
        }

        let path = tree.path(ei, ej);
        // path[k] is a basis index; the edge adjacent to the entering cell's
        // column is last. Signs alternate starting with − at the end.
        let k = path.len();
        let minus = |t: usize| (k - 1 - t) % 2 == 0;
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (t, &b) in path.iter().enumerate() {
            if minus(t) && basis[b].2 < theta {
                theta = basis[b].2;
                leaving = b;
            }
        }
        for (t, &b) in path.iter().enumerate() {
            if minus(t) {
                basis[b].2 -= theta;
            } else {
                basis[b].2 += theta;
            }
        }
        basis[leaving] = (ei, ej, theta);
    }

    for cell in &mut basis {
        cell.2 = cell.2.max(0.0);
    }
    let total = basis.iter().map(|&(i, j, x)| x * cost[i * cols + j]).sum();
    Ok(TransportPlan { cost: total, basis, row_potential: u, col_potential: v })
}

impl TransportPlan {
    pub fn certify(&self, supply: &[f64], demand: &[f64], cost: &[f64]) -> Certificate {
        let rows = supply.len();
        let cols = demand.len();
        let mut row_sum = vec![0.0; rows];
        let mut col_sum = vec![0.0; cols];
        let mut min_flow = 0.0f64;
        let mut slackness = 0.0f64;
        for &(i, j, x) in &self.basis {
            row_sum[i] += x;
            col_sum[j] += x;
            min_flow = min_flow.min(x);
            if x > 0.0 {
                let r = cost[i * cols + j] - self.row_potential[i] - self.col_potential[j];
                slackness = slackness.max(r.abs());
            }
        }
        let primal_residual = row_sum
            .iter()
            .zip(supply)
            .chain(col_sum.iter().zip(demand))
            .map(|(s, t)| (s - t).abs())
            .fold(0.0, f64::max);
        let mut min_reduced_cost = f64::INFINITY;
        for i in 0..rows {
            for j in 0..cols {
                let r = cost[i * cols + j] - self.row_potential[i] - self.col_potential[j];
                min_reduced_cost = min_reduced_cost.min(r);
            }
        }
        Certificate { primal_residual, min_flow, min_reduced_cost, slackness_violation: slackness }
    }
}

/// Least-cost starting basis: cells in increasing cost order, each
/// allocation crossing out exactly one row or column, so the result is a
/// spanning tree of `rows + cols - 1` cells.
fn least_cost_basis(supply: &[f64], demand: &[f64], cost: &[f64]) -> Vec<(usize, usize, f64)> {
    let (rows, cols) = (supply.len(), demand.len());
    let mut rs = supply.to_vec();
    let mut cs = demand.to_vec();
    let mut order: Vec<usize> = (0..rows * cols).collect();
    order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
    let mut row_out = vec![false; rows];
    let mut col_out = vec![false; cols];
    let (mut rows_left, mut cols_left) = (rows, cols);
    let mut basis = Vec::with_capacity(rows + cols - 1);
    for cell in order {
        let (i, j) = (cell / cols, cell % cols);
        if row_out[i] || col_out[j] {
            continue;
        }
        let x = rs[i].min(cs[j]);
        rs[i] -= x;
        cs[j] -= x;
        basis.push((i, j, x));
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        if rows_left > 1 && (rs[i] <= cs[j] || cols_left == 1) {
            row_out[i] = true;
            rows_left -= 1;
        } else {
            col_out[j] = true;
            cols_left -= 1;
        }
    }
    basis
}

/// Adjacency of the basis tree, rebuilt in place every pivot. Nodes
/// `0..rows` are rows, `rows..rows + cols` are columns.
struct Tree {
    rows: usize,
    adj: Vec<Vec<(usize, usize)>>,
    via: Vec<Option<(usize, usize)>>,
    seen: Vec<bool>,
    queue: std::collections::VecDeque<usize>,
}

impl Tree {
    fn new(rows: usize, cols: usize) -> Self {
        let n = rows + cols;
        Tree {
            rows,
            adj: vec![Vec::new(); n],
            via: vec![None; n],
            seen: vec![false; n],
            queue: std::collections::VecDeque::with_capacity(n),
        }
    }

    fn rebuild(&mut self, basis: &[(usize, usize, f64)]) {
        self.adj.iter_mut().for_each(Vec::clear);
        for (b, &(i, j, _)) in basis.iter().enumerate() {
            self.adj[i].push((self.rows + j, b));
            self.adj[self.rows + j].push((i, b));
        }
    }

    /// Solves `u_i + v_j = c_ij` over the basis with `u_0 = 0`.
    fn potentials(&mut self, basis: &[(usize, usize, f64)], cost: &[f64], u: &mut [f64], v: &mut [f64]) {
        let cols = v.len();
        self.seen.iter_mut().for_each(|s| *s = false);
        self.queue.clear();
        self.queue.push_back(0);
        self.seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = self.queue.pop_front() {
            for &(next, b) in &self.adj[node] {
                if self.seen[next] {
                    continue;
                }
                self.seen[next] = true;
                let (i, j, _) = basis[b];
                let c = cost[i * cols + j];
                if next < self.rows {
                    u[i] = c - v[j];
                } else {
                    v[j] = c - u[i];
                }
                self.queue.push_back(next);
            }
        }
    }

    /// Basis indices along the tree path from row `from_row` to column
    /// `to_col`.
    fn path(&mut self, from_row: usize, to_col: usize) -> Vec<usize> {
        self.seen.iter_mut().for_each(|s| *s = false);
        self.via.iter_mut().for_each(|v| *v = None);
        self.queue.clear();
        self.queue.push_back(from_row);
        self.seen[from_row] = true;
        let target = self.rows + to_col;
        while let Some(node) = self.queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, b) in &self.adj[node] {
                if !self.seen[next] {
                    self.seen[next] = true;
                    self.via[next] = Some((node, b));
                    self.queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while let Some((prev, b)) = self.via[node] {
            path.push(b);
            node = prev;
        }
        path.reverse();
        path
    }
}
