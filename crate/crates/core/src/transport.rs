//! Exact linear transport: transportation simplex, assignment, and basic
//! solution enumeration for the oracle.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure};

/// Optimal plan of `min Σ P_ij c_ij` over couplings of `mu` and `nu`.
///
/// Uniform measures with equal atom counts go through the assignment
/// solver; everything else through the transportation simplex. Both return
/// vertices of the transportation polytope.
pub fn solve_linear(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &[f64]) -> Result<Coupling> {
    let (m, k) = (mu.len(), nu.len());
    if cost.len() != m * k {
        return Err(Error::InvalidArgument(format!("cost has {} entries, expected {}", cost.len(), m * k)));
    }
    if m == k && mu.is_uniform() && nu.is_uniform() {
        let perm = assignment(m, cost);
        return Coupling::from_permutation(&perm);
    }
    let flows = transport_simplex(&mu.weights(), &nu.weights(), cost)?;
    Coupling::from_dense(m, k, flows)
}

/// Minimum-cost perfect matching on an `n × n` cost matrix (row major).
/// Returns `perm` with row `i` matched to column `perm[i]`.
pub fn assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    // Shortest augmenting paths with potentials, 1-based with a virtual column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
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
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

/// Spanning tree basis over the bipartite graph rows ∪ cols.
struct Basis {
    m: usize,
    k: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        // node ids: rows 0..m, cols m..m+k; payload is the basis slot.
        let mut adj = vec![Vec::new(); self.m + self.k];
        for (slot, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, slot));
            adj[self.m + j].push((i, slot));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>], cost: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (m, k) = (self.m, self.k);
        let mut pot = vec![f64::NAN; m + k];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(next, slot) in &adj[node] {
                if !pot[next].is_nan() {
                    continue;
                }
                let (i, j) = self.cells[slot];
                let c = cost[i * k + j];
                // u_i + v_j = c_ij
                pot[next] = c - pot[node];
                queue.push_back(next);
            }
        }
        if pot.iter().any(|p| p.is_nan()) {
            return None;
        }
        Some((pot[..m].to_vec(), pot[m..].to_vec()))
    }

    /// Tree path from `from` to `to` as a list of basis slots.
    fn path(&self, adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Option<Vec<usize>> {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.k];
        let mut seen = vec![false; self.m + self.k];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &(next, slot) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, slot));
                    queue.push_back(next);
                }
            }
        }
        if !seen[to] {
            return None;
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let (prev, slot) = parent[node]?;
            out.push(slot);
            node = prev;
        }
        out.reverse();
        Some(out)
    }
}

fn northwest_corner(a: &[f64], b: &[f64]) -> Basis {
    let (m, k) = (a.len(), b.len());
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(m + k - 1);
    let mut flow = Vec::with_capacity(m + k - 1);
    while cells.len() < m + k - 1 {
        let q = ra[i].min(rb[j]).max(0.0);
        cells.push((i, j));
        flow.push(q);
        ra[i] -= q;
        rb[j] -= q;
        let down = if i == m - 1 {
            false
        } else if j == k - 1 {
            true
        } else {
            ra[i] <= rb[j]
        };
        if down {
            i += 1;
        } else {
            j += 1;
        }
    }
    Basis { m, k, cells, flow }
}

/// Transportation simplex with Bland's rule. Supplies `a` and demands `b`
/// must be nonnegative with (nearly) equal totals; `b` is rescaled to the
/// total of `a`. Returns the dense row-major flow matrix.
pub fn transport_simplex(a: &[f64], b: &[f64], cost: &[f64]) -> Result<Vec<f64>> {
    let (m, k) = (a.len(), b.len());
    if m == 0 || k == 0 {
        return Err(Error::EmptyMeasure);
    }
    if cost.len() != m * k {
        return Err(Error::InvalidArgument(format!("cost has {} entries, expected {}", cost.len(), m * k)));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("transport cost"));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if !(sa > 0.0) || !(sb > 0.0) || (sa - sb).abs() > 1e-9 * sa.max(sb) {
        return Err(Error::LpFailure(format!("unbalanced marginals {sa} vs {sb}")));
    }
    let b: Vec<f64> = b.iter().map(|x| x * sa / sb).collect();
    let mut basis = northwest_corner(a, &b);
    let cmax = cost.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-12 * (1.0 + cmax);
    let guard = 1000 + 100 * m * k;
    let mut in_basis = vec![false; m * k];
    for &(i, j) in &basis.cells {
        in_basis[i * k + j] = true;
    }
    for _ in 0..guard {
        let adj = basis.adjacency();
        let (u, v) = basis
            .potentials(&adj, cost)
            .ok_or_else(|| Error::LpFailure("basis is not a spanning tree".into()))?;
        let entering = (0..m * k).find(|&idx| !in_basis[idx] && cost[idx] - u[idx / k] - v[idx % k] < -eps);
        let Some(idx) = entering else {
            let mut dense = vec![0.0; m * k];
            for (&(i, j), &q) in basis.cells.iter().zip(&basis.flow) {
                dense[i * k + j] += q.max(0.0);
            }
            return Ok(dense);
        };
        let (ei, ej) = (idx / k, idx % k);
        let path = basis
            .path(&adj, ei, m + ej)
            .ok_or_else(|| Error::LpFailure("no cycle for entering cell".into()))?;
        // Signs along the path alternate starting with a decrease.
        let mut theta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        for (pos, &slot) in path.iter().enumerate() {
            if pos % 2 != 0 {
                continue;
            }
            let q = basis.flow[slot];
            let (i, j) = basis.cells[slot];
            let better = match leave {
                None => true,
                Some(l) => {
                    let (li, lj) = basis.cells[l];
                    q < theta || (q == theta && i * k + j < li * k + lj)
                }
            };
            if better {
                theta = q;
                leave = Some(slot);
            }
        }
        let leave = leave.ok_or_else(|| Error::LpFailure("empty cycle".into()))?;
        let theta = theta.max(0.0);
        for (pos, &slot) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[slot] -= theta;
            } else {
                basis.flow[slot] += theta;
            }
        }
        let (li, lj) = basis.cells[leave];
        in_basis[li * k + lj] = false;
        in_basis[idx] = true;
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
    }
    Err(Error::LpFailure(format!("no convergence after {guard} pivots")))
}

/// Flows of the basic solution supported on `cells`, if those cells form a
/// spanning tree; flows may be negative (infeasible basis).
pub(crate) fn tree_flows(a: &[f64], b: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let (m, k) = (a.len(), b.len());
    let mut rem: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut deg = vec![0usize; m + k];
    for &(i, j) in cells {
        deg[i] += 1;
        deg[m + j] += 1;
    }
    let mut flow = vec![f64::NAN; cells.len()];
    let mut done = vec![false; cells.len()];
    for _ in 0..cells.len() {
        // Any leaf fixes the flow on its only remaining edge.
        let (slot, leaf) = cells.iter().enumerate().find_map(|(s, &(i, j))| {
            if done[s] {
                None
            } else if deg[i] == 1 {
                Some((s, i))
            } else if deg[m + j] == 1 {
                Some((s, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[slot];
        let other = if leaf == i { m + j } else { i };
        let q = rem[leaf];
        flow[slot] = q;
        done[slot] = true;
        rem[leaf] = 0.0;
        rem[other] -= q;
        deg[i] -= 1;
        deg[m + j] -= 1;
    }
    // A cycle among the cells leaves some edge unfixed or a node unbalanced.
    if deg.iter().any(|&d| d != 0) || rem.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(flow)
}

/// Every vertex of the transportation polytope, as dense row-major plans.
/// Degenerate vertices arising from several bases are reported once.
pub fn enumerate_vertices(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let (m, k) = (a.len(), b.len());
    let size = m + k - 1;
    let total = m * k;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut pick: Vec<usize> = (0..size).collect();
    if size > total {
        return out;
    }
    loop {
        let cells: Vec<(usize, usize)> = pick.iter().map(|&c| (c / k, c % k)).collect();
        if let Some(flow) = tree_flows(a, b, &cells) {
            if flow.iter().all(|q| *q >= -1e-12) {
                let mut dense = vec![0.0; total];
                for (&c, q) in pick.iter().zip(&flow) {
                    dense[c] = q.max(0.0);
                }
                let dup = out
                    .iter()
                    .any(|p| p.iter().zip(&dense).all(|(x, y)| (x - y).abs() <= 1e-12));
                if !dup {
                    out.push(dense);
                }
            }
        }
        // next combination in lexicographic order
        let mut pos = size;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if pick[pos] < total - size + pos {
                break;
            }
        }
        pick[pos] += 1;
        for q in pos + 1..size {
            pick[q] = pick[q - 1] + 1;
        }
    }
}
