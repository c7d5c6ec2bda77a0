//! Backtrack-downweighted walk counts.
//!
//! `q_k(A)` counts walks of length k where every backtracking step (one that
//! immediately retraces the previous edge) carries weight `1 - mu`. The two
//! extremes recover familiar objects: `mu = 0` gives plain walk counts
//! `A^k`, `mu = 1` gives nonbacktracking walk counts. The whole family
//! satisfies a three-term recurrence
//!
//! ```text
//! q_0 = I,  q_1 = A,  q_2 = A^2 - mu D,
//! q_{k+1} = A q_k + mu (mu I - D) q_{k-1}    for k >= 2,
//! ```
//!
//! which is what every downstream operator uses; the combinatorial
//! definition survives only in the brute-force enumerator kept around as a
//! test oracle.

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::DENSE_LIMIT;

/// Dense walk-count matrices q_0..q_kmax for one value of mu.
pub struct WalkCountSequence {
    pub mu: f64,
    counts: Vec<Mat>,
}

impl WalkCountSequence {
    /// Compute the sequence by the three-term recurrence using dense
    /// matrix products. Guarded by the dense limit.
    pub fn compute(graph: &Graph, mu: f64, kmax: usize) -> Result<WalkCountSequence> {
        let n = graph.num_nodes();
        if n > DENSE_LIMIT {
            return Err(Error::DenseLimit { n, limit: DENSE_LIMIT });
        }
        let a = graph.adjacency_dense();
        let deg = graph.degrees();
        let mut counts = Vec::with_capacity(kmax + 1);
        counts.push(Mat::identity(n));
        if kmax >= 1 {
            counts.push(a.clone());
        }
        if kmax >= 2 {
            let mut q2 = a.matmul(&a);
            for i in 0..n {
                q2[(i, i)] -= mu * deg[i];
            }
            counts.push(q2);
        }
        for k in 2..kmax {
            let mut next = a.matmul(&counts[k]);
            let prev = &counts[k - 1];
            for i in 0..n {
                let w = mu * (mu - deg[i]);
                for j in 0..n {
                    next[(i, j)] += w * prev[(i, j)];
                }
            }
            counts.push(next);
        }
        Ok(WalkCountSequence { mu, counts })
    }

    pub fn kmax(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn count(&self, k: usize) -> &Mat {
        &self.counts[k]
    }
}

/// Plain walk counts A^k (the mu = 0 member), computed independently of the
/// recurrence by repeated multiplication.
pub fn adjacency_power_counts(graph: &Graph, kmax: usize) -> Result<Vec<Mat>> {
    let n = graph.num_nodes();
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimit { n, limit: DENSE_LIMIT });
    }
    let a = graph.adjacency_dense();
    let mut out = vec![Mat::identity(n)];
    for k in 0..kmax {
        out.push(out[k].matmul(&a));
    }
    Ok(out)
}

/// Brute-force oracle: total weight of length-k walks from `from` to `to`,
/// where each backtracking step contributes a factor `1 - mu`. Walk
/// extension steps are counted against `budget`; exceeding it aborts.
pub fn brute_force_walk_weight(
    graph: &Graph,
    mu: f64,
    k: usize,
    from: usize,
    to: usize,
    budget: u64,
) -> Result<f64> {
    let n = graph.num_nodes();
    if from >= n || to >= n {
        return Err(Error::IndexOutOfBounds { index: from.max(to), size: n });
    }
    if k == 0 {
        return Ok(if from == to { 1.0 } else { 0.0 });
    }
    let mut steps: u64 = 0;
    // stack of (node, previous node or MAX, remaining steps, weight so far)
    let mut total = 0.0;
    let mut stack: Vec<(usize, usize, usize, f64)> = vec![(from, usize::MAX, k, 1.0)];
    while let Some((u, prev, rem, w)) = stack.pop() {
        for &v in graph.neighbors(u) {
            steps += 1;
            if steps > budget {
                return Err(Error::EnumerationBudget(budget));
            }
            let w2 = if v == prev { w * (1.0 - mu) } else { w };
            if rem == 1 {
                if v == to {
                    total += w2;
                }
            } else {
                stack.push((v, u, rem - 1, w2));
            }
        }
    }
    Ok(total)
}

/// The companion operator of the walk-count recurrence, acting on stacked
/// vectors of length 2n:
///
/// ```text
/// Z (x; y) = (y; mu (mu I - D) x + A y)
/// ```
///
/// Its spectral radius governs convergence of weighted walk series.
pub struct ZOperator<'g> {
    graph: &'g Graph,
    mu: f64,
    shift: Vec<f64>,
}

impl<'g> ZOperator<'g> {
    pub fn new(graph: &'g Graph, mu: f64) -> ZOperator<'g> {
        let shift = graph.degrees().iter().map(|&d| mu * (mu - d)).collect();
        ZOperator { graph, mu, shift }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Dimension of the stacked space.
    pub fn dim(&self) -> usize {
        2 * self.graph.num_nodes()
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.graph.num_nodes();
        debug_assert_eq!(v.len(), 2 * n);
        debug_assert_eq!(out.len(), 2 * n);
        let (x, y) = v.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        o1.copy_from_slice(y);
        self.graph.adj_matvec_into(y, o2);
        for i in 0..n {
            o2[i] += self.shift[i] * x[i];
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// Dense 2n x 2n representation, for eigenvalue cross-checks.
    pub fn dense(&self) -> Result<Mat> {
        let n = self.graph.num_nodes();
        if 2 * n > DENSE_LIMIT {
            return Err(Error::DenseLimit { n: 2 * n, limit: DENSE_LIMIT });
        }
        let mut z = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            z[(i, n + i)] = 1.0;
            z[(n + i, i)] = self.shift[i];
            for &j in self.graph.neighbors(i) {
                z[(n + i, n + j)] = 1.0;
            }
        }
        Ok(z)
    }
}
