//! Continuous diffusion and discrete Markov chains driven by walk-based
//! Laplacians.

use crate::error::{Error, Result};
use crate::krylov::{lanczos_fun_apply, LinOp};
use crate::operators::LaplacianOperator;
use crate::dense::{sym_eigvals, Mat};
use crate::DENSE_LIMIT;

/// Solve the diffusion equation x'(t) = -L x(t), returning
/// x(t) = exp(-t L) x0 by a Lanczos approximation.
pub fn diffuse(
    op: &LaplacianOperator,
    x0: &[f64],
    t: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("diffusion time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    lanczos_fun_apply(op, x0, |lam| (-t * lam).exp(), tol, max_iter)
}

/// How the Laplacian is turned into a row-stochastic transition matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// P = I - D^{-1} L with D = diag(L). The walker always moves
    /// (diag(P) = 0) and the stationary distribution is proportional to
    /// the operator diagonal.
    DiagOperator,
    /// P = D^{-1} phi with D = diag(phi 1), the total communicability.
    /// Lazy in general (diag(P) = diag(phi)/t(f)), stationary distribution
    /// proportional to total communicability.
    TotalCommunicability,
}

/// A discrete-time Markov chain built from a walk-based Laplacian.
pub struct MarkovChain<'a, 'g> {
    op: &'a LaplacianOperator<'g>,
    normalization: Normalization,
    /// the normalizing diagonal D
    d: Vec<f64>,
}

impl<'a, 'g> MarkovChain<'a, 'g> {
    pub fn new(
        op: &'a LaplacianOperator<'g>,
        normalization: Normalization,
    ) -> Result<MarkovChain<'a, 'g>> {
        let d = match normalization {
            Normalization::DiagOperator => op.operator_diagonal()?,
            Normalization::TotalCommunicability => op.shift_diagonal().to_vec(),
        };
        if d.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidParameter(
                "normalizing diagonal has nonpositive entries; \
                 the chain is not well defined"
                    .into(),
            ));
        }
        Ok(MarkovChain { op, normalization, d })
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn num_states(&self) -> usize {
        self.d.len()
    }

    /// One step of the distribution dynamics: x <- P^T x. Both transition
    /// matrices keep this matrix-free: P^T x = x - L D^{-1} x for the
    /// diagonal normalization and P^T x = phi D^{-1} x for the total
    /// communicability one (L and phi are symmetric).
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.d.len();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let scaled: Vec<f64> = x.iter().zip(&self.d).map(|(xi, di)| xi / di).collect();
        match self.normalization {
            Normalization::DiagOperator => {
                let lx = self.op.apply(&scaled);
                Ok(x.iter().zip(&lx).map(|(xi, li)| xi - li).collect())
            }
            Normalization::TotalCommunicability => self.op.phi_apply(&scaled),
        }
    }

    /// The stationary distribution, known in closed form: both chains are
    /// reversible with pi proportional to the normalizing diagonal.
    pub fn stationary(&self) -> Vec<f64> {
        let s: f64 = self.d.iter().sum();
        self.d.iter().map(|x| x / s).collect()
    }

    /// Spectral gap 1 - |lambda_2| of the transition matrix, computed from
    /// the symmetrized similar matrix D^{1/2} P D^{-1/2}. Dense-gated.
    pub fn spectral_gap(&self) -> Result<f64> {
        let n = self.d.len();
        if n > DENSE_LIMIT {
            return Err(Error::DenseLimit { n, limit: DENSE_LIMIT });
        }
        let sqrt_d: Vec<f64> = self.d.iter().map(|x| x.sqrt()).collect();
        let dense = self.op.materialize()?;
        // phi = diag(shift) - L
        let shift = self.op.shift_diagonal();
        let sym = match self.normalization {
            Normalization::DiagOperator => {
                // I - D^{-1/2} L D^{-1/2}
                Mat::from_fn(n, n, |i, j| {
                    let l = dense[(i, j)] / (sqrt_d[i] * sqrt_d[j]);
                    (if i == j { 1.0 } else { 0.0 }) - l
                })
            }
            Normalization::TotalCommunicability => Mat::from_fn(n, n, |i, j| {
                let phi = (if i == j { shift[i] } else { 0.0 }) - dense[(i, j)];
                phi / (sqrt_d[i] * sqrt_d[j])
            }),
        };
        let mut vals = sym_eigvals(&sym)?;
        vals.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        if vals.len() < 2 {
            return Ok(1.0);
        }
        Ok(1.0 - vals[1].abs())
    }
}

/// Trace of a chain run from a point mass: support sizes per step and
/// distribution snapshots at requested checkpoints.
pub struct ExplorationHistory {
    /// support_sizes[s] = number of states with mass above the threshold
    /// after s steps (index 0 is the initial distribution)
    pub support_sizes: Vec<usize>,
    /// (step, distribution) pairs for each requested checkpoint
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

/// Run `steps` steps of the chain from a point mass at `start`. A state
/// counts toward the support when its mass exceeds `support_tol` times the
/// current maximum mass.
pub fn exploration_history(
    chain: &MarkovChain,
    start: usize,
    steps: usize,
    support_tol: f64,
    checkpoints: &[usize],
) -> Result<ExplorationHistory> {
    let n = chain.num_states();
    if start >= n {
        return Err(Error::IndexOutOfBounds { index: start, size: n });
    }
    let support = |x: &[f64]| -> usize {
        let mx = x.iter().fold(0.0f64, |m, v| m.max(*v));
        x.iter().filter(|&&v| v > support_tol * mx).count()
    };
    let mut x = vec![0.0; n];
    x[start] = 1.0;
    let mut history = ExplorationHistory {
        support_sizes: vec![support(&x)],
        snapshots: Vec::new(),
    };
    if checkpoints.contains(&0) {
        history.snapshots.push((0, x.clone()));
    }
    for s in 1..=steps {
        x = chain.step(&x)?;
        history.support_sizes.push(support(&x));
        if checkpoints.contains(&s) {
            history.snapshots.push((s, x.clone()));
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::expm;
    use crate::graph::{generate, trap_graph};
    use crate::operators::{CoefficientFunction, OperatorKind};

    #[test]
    fn diffuse_matches_dense_exponential() {
        let g = generate("random:20:10:6").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let mut x0 = vec![0.0; 20];
        x0[3] = 1.0;
        let t = 1.7;
        let y = diffuse(&op, &x0, t, 1e-12, 200).unwrap();
        let mut l = g.laplacian_dense();
        l.scale(-t);
        let exact = expm(&l).unwrap().matvec(&x0);
        for (a, b) in y.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn diffusion_conserves_mass() {
        let g = trap_graph(5, 8).unwrap();
        let f = CoefficientFunction::Exponential { beta: 1.0 };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, 1.0).unwrap();
        let n = g.num_nodes();
        let mut x0 = vec![0.0; n];
        x0[0] = 1.0;
        let y = diffuse(&op, &x0, 2.0, 1e-11, 200).unwrap();
        let mass: f64 = y.iter().sum();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn standard_chain_stationary_is_degrees() {
        let g = trap_graph(5, 8).unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let chain = MarkovChain::new(&op, Normalization::DiagOperator).unwrap();
        let pi = chain.stationary();
        // degree-proportional: middle node has degree 10, total degree 24
        assert!((pi[2] - 10.0 / 24.0).abs() < 1e-12);
        assert!((pi[5] - 1.0 / 24.0).abs() < 1e-12);
        // stationarity under one step
        let next = chain.step(&pi).unwrap();
        for (a, b) in next.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_step_preserves_probability() {
        let g = generate("random:16:6:3").unwrap();
        let f = CoefficientFunction::Exponential { beta: 0.7 };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, 1.0).unwrap();
        for norm in [Normalization::DiagOperator, Normalization::TotalCommunicability] {
            let chain = MarkovChain::new(&op, norm).unwrap();
            let mut x = vec![0.0; 16];
            x[5] = 1.0;
            for _ in 0..10 {
                x = chain.step(&x).unwrap();
            }
            let mass: f64 = x.iter().sum();
            assert!((mass - 1.0).abs() < 1e-9, "{norm:?}: mass {mass}");
            assert!(x.iter().all(|&v| v >= -1e-12), "{norm:?}: negative mass");
            // stationary is fixed
            let pi = chain.stationary();
            let next = chain.step(&pi).unwrap();
            for (a, b) in next.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-9, "{norm:?}");
            }
        }
    }

    #[test]
    fn diag_normalization_never_lazy() {
        // diag(P) = 0 by construction for the DiagOperator normalization
        let g = generate("random:12:5:9").unwrap();
        let f = CoefficientFunction::Exponential { beta: 0.5 };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, 0.5).unwrap();
        let chain = MarkovChain::new(&op, Normalization::DiagOperator).unwrap();
        for i in 0..12 {
            let mut e = vec![0.0; 12];
            e[i] = 1.0;
            let p = chain.step(&e).unwrap();
            assert!(p[i].abs() < 1e-10, "diag(P)[{i}] = {}", p[i]);
        }
    }

    #[test]
    fn spectral_gap_complete_graph() {
        // random walk on K_n: P = (J - I)/(n-1), eigenvalues 1 and
        // -1/(n-1), so the gap is 1 - 1/(n-1)
        let g = generate("complete:6").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let chain = MarkovChain::new(&op, Normalization::DiagOperator).unwrap();
        let gap = chain.spectral_gap().unwrap();
        assert!((gap - (1.0 - 0.2)).abs() < 1e-10, "gap {gap}");
    }

    #[test]
    fn exploration_tracks_support_growth() {
        let g = generate("grid:6x6").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let chain = MarkovChain::new(&op, Normalization::DiagOperator).unwrap();
        let h = exploration_history(&chain, 0, 20, 1e-3, &[10, 20]).unwrap();
        assert_eq!(h.support_sizes[0], 1);
        assert!(h.support_sizes[10] > 4);
        assert_eq!(h.snapshots.len(), 2);
        assert_eq!(h.snapshots[1].0, 20);
    }
}
