//! The walk-based Laplacian operator family.
//!
//! Every operator here has the form `L = diag(phi 1) - phi` for some
//! symmetric nonnegative-off-diagonal `phi` built from walk counts:
//!
//! * `Standard`: phi = A, the combinatorial Laplacian,
//! * `KWalk`: phi = q_k(A), counts of length-k backtrack-downweighted walks,
//! * `Transformed`: phi = sum_k c_k q_k(A) for a coefficient sequence c,
//! * `KPath` / `KPathTransformed`: phi built from shortest-path distance
//!   rather than walk counts, as a comparison baseline.
//!
//! Applies are matrix-free. The resolvent coefficient family collapses the
//! series into a single symmetric positive definite solve
//!
//! ```text
//! phi = (1 - alpha^2 mu^2) (I - alpha A - alpha^2 mu (mu I - D))^{-1}
//! ```
//!
//! handled by Jacobi-preconditioned CG, and the exponential family goes
//! through the companion operator Z: with f1(x) = sum_k c_{k+1} x^k,
//!
//! ```text
//! phi x = c_0 x + [I 0] f1(Z) (q_1 x; q_2 x),
//! ```
//!
//! evaluated with an Arnoldi approximation of f1(Z) = beta phi1(beta Z).

use crate::error::{Error, Result};
use crate::dense::Mat;
use crate::graph::Graph;
use crate::krylov::{arnoldi_fun_apply, pcg_solve, LinOp, MatFun};
use crate::spectral::spectral_radius_z;
use crate::walks::ZOperator;
use crate::DENSE_LIMIT;

/// Coefficient sequence c_k weighting walk length k.
#[derive(Clone, Debug)]
pub enum CoefficientFunction {
    /// c_k = alpha^k (geometric series, resolvent function)
    Resolvent { alpha: f64 },
    /// c_k = beta^k / k! (exponential)
    Exponential { beta: f64 },
    /// explicit c_0..c_K, zero beyond
    TruncatedSeries { coeffs: Vec<f64> },
    /// c_k = 1 at a single k (recovers the k-walk Laplacian)
    Monomial { k: usize },
}

impl CoefficientFunction {
    pub fn coeff(&self, k: usize) -> f64 {
        match self {
            CoefficientFunction::Resolvent { alpha } => alpha.powi(k as i32),
            CoefficientFunction::Exponential { beta } => {
                let mut c = 1.0;
                for j in 1..=k {
                    c *= beta / j as f64;
                }
                c
            }
            CoefficientFunction::TruncatedSeries { coeffs } => {
                coeffs.get(k).copied().unwrap_or(0.0)
            }
            CoefficientFunction::Monomial { k: kk } => {
                if k == *kk {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CoefficientFunction::Resolvent { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "resolvent parameter must be positive, got {alpha}"
                    )));
                }
            }
            CoefficientFunction::Exponential { beta } => {
                if !(*beta > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential parameter must be positive, got {beta}"
                    )));
                }
            }
            CoefficientFunction::TruncatedSeries { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter(
                        "truncated series needs at least one coefficient".into(),
                    ));
                }
            }
            CoefficientFunction::Monomial { .. } => {}
        }
        Ok(())
    }
}

/// Which member of the family an operator represents.
#[derive(Clone, Debug)]
pub enum OperatorKind {
    Standard,
    KWalk { k: usize },
    Transformed { f: CoefficientFunction },
    KPath { k: usize },
    KPathTransformed { f: CoefficientFunction, kmax: usize },
}

/// A walk-based Laplacian, ready for matrix-free application.
pub struct LaplacianOperator<'g> {
    graph: &'g Graph,
    kind: OperatorKind,
    mu: f64,
    /// diag(phi 1), the diagonal shift making row sums vanish
    shift: Vec<f64>,
    /// mu (mu - d_i), the companion recurrence weights
    zweights: Vec<f64>,
    /// spectral radius of Z, computed when the resolvent family needs it
    rho_z: Option<f64>,
    /// distance-k neighbor lists for the path families, paired with weights
    kpath: Vec<(f64, Vec<Vec<usize>>)>,
}

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITER: usize = 100_000;

impl<'g> LaplacianOperator<'g> {
    pub fn new(graph: &'g Graph, kind: OperatorKind, mu: f64) -> Result<LaplacianOperator<'g>> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!(
                "backtracking penalty must lie in [0, 1], got {mu}"
            )));
        }
        let n = graph.num_nodes();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let zweights: Vec<f64> = graph.degrees().iter().map(|&d| mu * (mu - d)).collect();
        let mut op = LaplacianOperator {
            graph,
            kind,
            mu,
            shift: vec![0.0; n],
            zweights,
            rho_z: None,
            kpath: Vec::new(),
        };
        match &op.kind {
            OperatorKind::Standard => {
                op.shift = graph.degrees();
            }
            OperatorKind::KWalk { .. } => {
                let ones = vec![1.0; n];
                op.shift = op.phi_apply(&ones)?;
            }
            OperatorKind::Transformed { f } => {
                f.validate()?;
                if let CoefficientFunction::Resolvent { alpha } = f {
                    let rho = spectral_radius_z(graph, mu, 1e-10, 100_000)?;
                    if *alpha * rho >= 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "resolvent parameter {alpha} is outside the convergence region \
                             (needs alpha < 1/rho(Z) = {})",
                            1.0 / rho
                        )));
                    }
                    op.rho_z = Some(rho);
                }
                let ones = vec![1.0; n];
                op.shift = op.phi_apply(&ones)?;
            }
            OperatorKind::KPath { k } => {
                let k = *k;
                if k == 0 {
                    return Err(Error::InvalidParameter("path length must be positive".into()));
                }
                op.kpath = build_kpath_lists(graph, &[(k, 1.0)])?;
                op.shift = kpath_row_sums(&op.kpath, n);
            }
            OperatorKind::KPathTransformed { f, kmax } => {
                f.validate()?;
                let weights: Vec<(usize, f64)> =
                    (1..=*kmax).map(|k| (k, f.coeff(k))).collect();
                op.kpath = build_kpath_lists(graph, &weights)?;
                op.shift = kpath_row_sums(&op.kpath, n);
            }
        }
        Ok(op)
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// diag(phi 1): the diagonal shift, also the total communicability
    /// t(f) = f-weighted walk counts leaving each node.
    pub fn shift_diagonal(&self) -> &[f64] {
        &self.shift
    }

    /// Spectral radius of the companion operator, if the construction
    /// needed it.
    pub fn rho_z(&self) -> Option<f64> {
        self.rho_z
    }

    /// y = phi x.
    pub fn phi_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.graph.num_nodes();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        match &self.kind {
            OperatorKind::Standard => Ok(self.graph.adj_matvec(x)),
            OperatorKind::KWalk { k } => Ok(self.walk_count_apply(*k, x)),
            OperatorKind::Transformed { f } => match f {
                CoefficientFunction::Resolvent { alpha } => self.resolvent_phi(*alpha, x),
                CoefficientFunction::Exponential { beta } => self.exponential_phi(*beta, x),
                CoefficientFunction::TruncatedSeries { coeffs } => Ok(self.series_phi(coeffs, x)),
                CoefficientFunction::Monomial { k } => Ok(self.walk_count_apply(*k, x)),
            },
            OperatorKind::KPath { .. } | OperatorKind::KPathTransformed { .. } => {
                let mut y = vec![0.0; n];
                for (w, lists) in &self.kpath {
                    for (i, nbrs) in lists.iter().enumerate() {
                        let mut s = 0.0;
                        for &j in nbrs {
                            s += x[j];
                        }
                        y[i] += w * s;
                    }
                }
                Ok(y)
            }
        }
    }

    /// q_k(A) x by the three-term recurrence on vectors.
    fn walk_count_apply(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let n = self.graph.num_nodes();
        match k {
            0 => x.to_vec(),
            1 => self.graph.adj_matvec(x),
            _ => {
                let q1 = self.graph.adj_matvec(x);
                let mut q2 = self.graph.adj_matvec(&q1);
                let deg = self.graph.degrees();
                for i in 0..n {
                    q2[i] -= self.mu * deg[i] * x[i];
                }
                let mut prev = q1;
                let mut cur = q2;
                for _ in 2..k {
                    let mut next = self.graph.adj_matvec(&cur);
                    for i in 0..n {
                        next[i] += self.zweights[i] * prev[i];
                    }
                    prev = std::mem::replace(&mut cur, next);
                }
                cur
            }
        }
    }

    /// Stacked (q_1 x; q_2 x) vector feeding the companion operator.
    fn stacked_seed(&self, x: &[f64]) -> Vec<f64> {
        let n = self.graph.num_nodes();
        let q1 = self.graph.adj_matvec(x);
        let mut q2 = self.graph.adj_matvec(&q1);
        let deg = self.graph.degrees();
        for i in 0..n {
            q2[i] -= self.mu * deg[i] * x[i];
        }
        let mut v = q1;
        v.extend_from_slice(&q2);
        v
    }

    fn resolvent_phi(&self, alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.graph.num_nodes();
        let mu = self.mu;
        let graph = self.graph;
        let deg = graph.degrees();
        // A_mu(alpha) = I - alpha A - alpha^2 mu (mu I - D)
        let diag: Vec<f64> = deg
            .iter()
            .map(|&d| 1.0 - alpha * alpha * mu * (mu - d))
            .collect();
        let op = crate::krylov::FnOp {
            dim: n,
            f: |v: &[f64], y: &mut [f64]| {
                graph.adj_matvec_into(v, y);
                for i in 0..n {
                    y[i] = diag[i] * v[i] - alpha * y[i];
                }
            },
        };
        let (sol, _) = pcg_solve(&op, x, Some(&diag), INNER_TOL, INNER_MAX_ITER)?;
        let c = 1.0 - alpha * alpha * mu * mu;
        Ok(sol.into_iter().map(|v| c * v).collect())
    }

    fn exponential_phi(&self, beta: f64, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.graph.num_nodes();
        let z = ZOperator::new(self.graph, self.mu);
        let zop = crate::krylov::FnOp {
            dim: 2 * n,
            f: |v: &[f64], y: &mut [f64]| z.apply_into(v, y),
        };
        let seed = self.stacked_seed(x);
        let fz = arnoldi_fun_apply(
            &zop,
            &seed,
            MatFun::Phi1Scaled { beta },
            INNER_TOL,
            (2 * n).min(300),
        )?;
        Ok((0..n).map(|i| x[i] + fz[i]).collect())
    }

    fn series_phi(&self, coeffs: &[f64], x: &[f64]) -> Vec<f64> {
        let n = self.graph.num_nodes();
        let deg = self.graph.degrees();
        let mut acc: Vec<f64> = x.iter().map(|v| coeffs[0] * v).collect();
        if coeffs.len() == 1 {
            return acc;
        }
        let q1 = self.graph.adj_matvec(x);
        for i in 0..n {
            acc[i] += coeffs[1] * q1[i];
        }
        if coeffs.len() == 2 {
            return acc;
        }
        let mut q2 = self.graph.adj_matvec(&q1);
        for i in 0..n {
            q2[i] -= self.mu * deg[i] * x[i];
        }
        for i in 0..n {
            acc[i] += coeffs[2] * q2[i];
        }
        let mut prev = q1;
        let mut cur = q2;
        for c in coeffs.iter().skip(3) {
            let mut next = self.graph.adj_matvec(&cur);
            for i in 0..n {
                next[i] += self.zweights[i] * prev[i];
            }
            for i in 0..n {
                acc[i] += c * next[i];
            }
            prev = std::mem::replace(&mut cur, next);
        }
        acc
    }

    /// Dense n x n representation via n basis applies; gated by the dense
    /// limit.
    pub fn materialize(&self) -> Result<Mat> {
        let n = self.graph.num_nodes();
        if n > DENSE_LIMIT {
            return Err(Error::DenseLimit { n, limit: DENSE_LIMIT });
        }
        let mut m = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.try_apply_into(&e, &mut y)?;
            m.set_col(j, &y);
            e[j] = 0.0;
        }
        Ok(m)
    }

    /// Diagonal of L itself (not the shift): needs one dense
    /// materialization for the transformed families, so it is gated by the
    /// dense limit.
    pub fn operator_diagonal(&self) -> Result<Vec<f64>> {
        match &self.kind {
            OperatorKind::Standard => Ok(self.graph.degrees()),
            // phi has zero diagonal for these when walks cannot return,
            // but in general diag(phi) != 0, so go dense
            _ => Ok(self.materialize()?.diag()),
        }
    }

    fn try_apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let phi = self.phi_apply(x)?;
        for i in 0..x.len() {
            y[i] = self.shift[i] * x[i] - phi[i];
        }
        Ok(())
    }
}

impl LinOp for LaplacianOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.num_nodes()
    }

    /// L x = diag(phi 1) x - phi x. Inner-solver failures cannot surface
    /// through the infallible operator interface; construction already
    /// validated the convergence region, so a failure here means the inner
    /// tolerance is unreachable and is a bug worth a panic.
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.try_apply_into(x, y).expect("inner solve failed inside validated region")
    }
}

/// The deformed-Laplacian matrix `A_mu(alpha) = I - alpha A - alpha^2 mu
/// (mu I - D)` as a symmetric operator, positive definite for alpha inside
/// the convergence region of the walk series.
pub struct DeformedOperator<'g> {
    graph: &'g Graph,
    alpha: f64,
    diag: Vec<f64>,
}

impl<'g> DeformedOperator<'g> {
    pub fn new(graph: &'g Graph, mu: f64, alpha: f64) -> DeformedOperator<'g> {
        let diag = graph
            .degrees()
            .iter()
            .map(|&d| 1.0 - alpha * alpha * mu * (mu - d))
            .collect();
        DeformedOperator { graph, alpha, diag }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

impl LinOp for DeformedOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.num_nodes()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.graph.adj_matvec_into(x, y);
        for i in 0..x.len() {
            y[i] = self.diag[i] * x[i] - self.alpha * y[i];
        }
    }
}

fn build_kpath_lists(
    graph: &Graph,
    weights: &[(usize, f64)],
) -> Result<Vec<(f64, Vec<Vec<usize>>)>> {
    let n = graph.num_nodes();
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimit { n, limit: DENSE_LIMIT });
    }
    let kmax = weights.iter().map(|&(k, _)| k).max().unwrap_or(0);
    let mut lists: Vec<(usize, f64, Vec<Vec<usize>>)> = weights
        .iter()
        .filter(|&&(_, w)| w != 0.0)
        .map(|&(k, w)| (k, w, vec![Vec::new(); n]))
        .collect();
    for i in 0..n {
        let dist = graph.bfs_distances(i)?;
        for (j, &d) in dist.iter().enumerate() {
            if d == usize::MAX || d == 0 || d > kmax {
                continue;
            }
            for (k, _, l) in &mut lists {
                if d == *k {
                    l[i].push(j);
                }
            }
        }
    }
    Ok(lists.into_iter().map(|(_, w, l)| (w, l)).collect())
}

fn kpath_row_sums(kpath: &[(f64, Vec<Vec<usize>>)], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for (w, lists) in kpath {
        for (i, nbrs) in lists.iter().enumerate() {
            s[i] += w * nbrs.len() as f64;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::lu_solve;
    use crate::graph::{generate, trap_graph};
    use crate::walks::WalkCountSequence;

    #[test]
    fn standard_matches_dense_laplacian() {
        let g = generate("random:15:8:2").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let m = op.materialize().unwrap();
        assert!(m.max_abs_diff(&g.laplacian_dense()) < 1e-14);
    }

    #[test]
    fn kwalk_matches_walk_counts() {
        let g = trap_graph(5, 4).unwrap();
        let n = g.num_nodes();
        for &mu in &[0.0, 0.5, 1.0] {
            let seq = WalkCountSequence::compute(&g, mu, 4).unwrap();
            let op = LaplacianOperator::new(&g, OperatorKind::KWalk { k: 4 }, mu).unwrap();
            let m = op.materialize().unwrap();
            let q = seq.count(4);
            let rowsum: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| q[(i, j)]).sum::<f64>())
                .collect();
            let expected = Mat::from_fn(n, n, |i, j| {
                (if i == j { rowsum[i] } else { 0.0 }) - q[(i, j)]
            });
            assert!(m.max_abs_diff(&expected) < 1e-10, "mu {mu}");
        }
    }

    #[test]
    fn resolvent_phi_matches_dense_solve() {
        let g = generate("random:18:10:7").unwrap();
        let n = g.num_nodes();
        for &mu in &[0.0, 0.5, 1.0] {
            let rho = spectral_radius_z(&g, mu, 1e-12, 100_000).unwrap();
            let alpha = 0.6 / rho;
            let f = CoefficientFunction::Resolvent { alpha };
            let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, mu).unwrap();
            // dense phi: (1 - alpha^2 mu^2) * inv(I - alpha A - alpha^2 mu (mu I - D))
            let a = g.adjacency_dense();
            let deg = g.degrees();
            let mut sys = Mat::from_fn(n, n, |i, j| -alpha * a[(i, j)]);
            for i in 0..n {
                sys[(i, i)] += 1.0 - alpha * alpha * mu * (mu - deg[i]);
            }
            let phi_dense = {
                let mut inv = lu_solve(&sys, &Mat::identity(n)).unwrap();
                inv.scale(1.0 - alpha * alpha * mu * mu);
                inv
            };
            let x: Vec<f64> = (0..n).map(|i| ((i * 3 + 1) as f64 * 0.31).sin()).collect();
            let got = op.phi_apply(&x).unwrap();
            let want = phi_dense.matvec(&x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9, "mu {mu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn resolvent_phi_is_walk_series() {
        // phi should equal sum alpha^k q_k; compare against the dense
        // truncated series with enough terms to converge
        let g = trap_graph(5, 3).unwrap();
        let mu = 0.7;
        let rho = spectral_radius_z(&g, mu, 1e-12, 100_000).unwrap();
        let alpha = 0.4 / rho;
        let f = CoefficientFunction::Resolvent { alpha };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, mu).unwrap();
        let seq = WalkCountSequence::compute(&g, mu, 120).unwrap();
        let n = g.num_nodes();
        let mut series = Mat::zeros(n, n);
        for k in 0..=120 {
            series.add_assign_scaled(seq.count(k), alpha.powi(k as i32));
        }
        let x = vec![1.0; n];
        let got = op.phi_apply(&x).unwrap();
        let want = series.matvec(&x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn exponential_phi_matches_series() {
        let g = trap_graph(5, 3).unwrap();
        let n = g.num_nodes();
        for &mu in &[0.0, 0.5, 1.0] {
            let beta = 0.8;
            let f = CoefficientFunction::Exponential { beta };
            let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, mu).unwrap();
            let seq = WalkCountSequence::compute(&g, mu, 60).unwrap();
            let mut series = Mat::zeros(n, n);
            let mut c = 1.0;
            for k in 0..=60 {
                if k > 0 {
                    c *= beta / k as f64;
                }
                series.add_assign_scaled(seq.count(k), c);
            }
            let x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
            let got = op.phi_apply(&x).unwrap();
            let want = series.matvec(&x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "mu {mu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn row_sums_vanish() {
        let g = generate("random:20:12:11").unwrap();
        let ones = vec![1.0; 20];
        let cases: Vec<(OperatorKind, f64)> = vec![
            (OperatorKind::Standard, 0.0),
            (OperatorKind::KWalk { k: 3 }, 0.6),
            (
                OperatorKind::Transformed {
                    f: CoefficientFunction::Exponential { beta: 0.5 },
                },
                1.0,
            ),
            (OperatorKind::KPath { k: 2 }, 0.0),
            (
                OperatorKind::KPathTransformed {
                    f: CoefficientFunction::Exponential { beta: 1.0 },
                    kmax: 4,
                },
                0.0,
            ),
        ];
        for (kind, mu) in cases {
            let op = LaplacianOperator::new(&g, kind.clone(), mu).unwrap();
            let y = op.apply(&ones);
            let err = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-8, "{kind:?}: row sum error {err}");
        }
    }

    #[test]
    fn resolvent_rejects_divergent_alpha() {
        let g = generate("complete:6").unwrap();
        let f = CoefficientFunction::Resolvent { alpha: 1.0 };
        let err = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, 0.0)
            .err()
            .unwrap();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn kpath_distance_structure() {
        // on a path graph, the 2-path Laplacian links nodes two apart
        let g = generate("path:5").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::KPath { k: 2 }, 0.0).unwrap();
        let m = op.materialize().unwrap();
        assert_eq!(m[(0, 2)], -1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(2, 2)], 2.0);
    }
}
