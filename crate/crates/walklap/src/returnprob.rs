//! Average return probability of continuous diffusion,
//! p(t) = tr(exp(-t L)) / n, exactly for dense-sized graphs and through a
//! randomized Nystrom trace estimator with rational Krylov exponentials for
//! everything else.

use crate::error::{Error, Result};
use crate::dense::{sym_eig, sym_eigvals, Mat};
use crate::krylov::{aaa, LinOp, RationalKrylov};
use crate::operators::LaplacianOperator;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A randomized trace estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct TraceEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Exact average return probability through the full spectrum of the
/// materialized operator. Dense-gated by the materialization.
pub fn exact_return_probability(op: &LaplacianOperator, ts: &[f64]) -> Result<Vec<f64>> {
    let dense = op.materialize()?;
    let n = dense.nrows;
    let vals = sym_eigvals(&dense)?;
    Ok(ts
        .iter()
        .map(|&t| vals.iter().map(|&l| (-t * l).exp()).sum::<f64>() / n as f64)
        .collect())
}

/// Core of the XNysTrace estimator: given probe block Omega and the
/// operator's action Y = A Omega on it, form per-probe leave-one-out
/// Nystrom trace estimates and average them. Each probe i combines the
/// trace of the Nystrom approximation built from the other probes with a
/// quadratic-form correction in probe i, making the estimator exact
/// whenever rank(A) < number of probes.
pub fn xnystrace_core(omega: &Mat, y: &Mat) -> Result<TraceEstimate> {
    let m = omega.ncols;
    if m < 2 {
        return Err(Error::DegenerateSamples("need at least 2 probes".into()));
    }
    if y.nrows != omega.nrows || y.ncols != m {
        return Err(Error::DimensionMismatch { expected: omega.nrows * m, got: y.nrows * y.ncols });
    }
    let h = omega.transpose().matmul(y);
    let hs = Mat::from_fn(m, m, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
    let g = y.transpose().matmul(y);
    let mut estimates = Vec::with_capacity(m);
    for i in 0..m {
        let keep: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let k = keep.len();
        let hi = Mat::from_fn(k, k, |r, c| hs[(keep[r], keep[c])]);
        let gi = Mat::from_fn(k, k, |r, c| g[(keep[r], keep[c])]);
        let (vals, q) = sym_eig(&hi)?;
        let vmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cutoff = 1e-12 * vmax.max(1e-300);
        // tr(Hi^+ Gi) through the eigendecomposition, dropping directions
        // below the cutoff (including negative pivots from solver noise,
        // since the target operator is positive semidefinite)
        let mut tr = 0.0;
        for l in 0..k {
            if vals[l] <= cutoff {
                continue;
            }
            // (Q^T Gi Q)_{ll}
            let ql = q.col(l);
            let gq = gi.matvec(&ql);
            let qgq: f64 = ql.iter().zip(&gq).map(|(a, b)| a * b).sum();
            tr += qgq / vals[l];
        }
        // correction: H[i,i] - h^T Hi^+ h with h = Hs[i, keep]
        let hrow: Vec<f64> = keep.iter().map(|&j| hs[(i, j)]).collect();
        let mut corr = hs[(i, i)];
        for l in 0..k {
            if vals[l] <= cutoff {
                continue;
            }
            let ql = q.col(l);
            let proj: f64 = ql.iter().zip(&hrow).map(|(a, b)| a * b).sum();
            corr -= proj * proj / vals[l];
        }
        // The Nystrom residual vanishes on span(Omega_{-i}), so the
        // quadratic form only sees the deflated part of omega_i. Rescale by
        // (n - k) / ||(I - P_{-i}) omega_i||^2 so the correction estimates
        // the residual trace at the right effective dimension.
        let n = omega.nrows;
        let mut w: Vec<f64> = (0..n).map(|r| omega[(r, i)]).collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &j in &keep {
            let mut col: Vec<f64> = (0..n).map(|r| omega[(r, j)]).collect();
            for b in &basis {
                let c: f64 = b.iter().zip(&col).map(|(a, x)| a * x).sum();
                for (xi, bi) in col.iter_mut().zip(b) {
                    *xi -= c * bi;
                }
            }
            let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-12 {
                for x in &mut col {
                    *x /= nrm;
                }
                basis.push(col);
            }
        }
        for b in &basis {
            let c: f64 = b.iter().zip(&w).map(|(a, x)| a * x).sum();
            for (xi, bi) in w.iter_mut().zip(b) {
                *xi -= c * bi;
            }
        }
        let on2: f64 = (0..n).map(|r| omega[(r, i)] * omega[(r, i)]).sum();
        let wn2: f64 = w.iter().map(|x| x * x).sum();
        if wn2 > 1e-12 * on2 {
            corr *= (n - k) as f64 / wn2;
        } else {
            // omega_i lies in span(Omega_{-i}): the deflated test vector
            // carries no information about the residual
            corr = 0.0;
        }
        estimates.push(tr + corr);
    }
    let mean = estimates.iter().sum::<f64>() / m as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (m as f64 - 1.0);
    Ok(TraceEstimate { estimate: mean, std_error: (var / m as f64).sqrt() })
}

/// Crude upper estimate of the spectral radius: a fixed number of power
/// iterations with a safety margin, good enough to bound the spectral
/// interval for the rational approximation.
fn rho_upper(op: &dyn LinOp, iters: usize) -> f64 {
    let n = op.dim();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64 * 0.7391).sin())).collect();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut x {
        *v /= nx;
    }
    let mut est = 1.0f64;
    let mut y = vec![0.0; n];
    for _ in 0..iters {
        op.apply_into(&x, &mut y);
        est = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if est == 0.0 {
            return 1.0;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / est;
        }
    }
    est * 1.1
}

/// Settings for the randomized estimator.
#[derive(Clone, Copy, Debug)]
pub struct XNysTraceConfig {
    pub num_probes: usize,
    pub seed: u64,
    /// relative accuracy target of the rational approximation to exp
    pub aaa_tol: f64,
    pub aaa_max_degree: usize,
    pub solve_tol: f64,
    pub solve_max_iter: usize,
}

impl Default for XNysTraceConfig {
    fn default() -> Self {
        XNysTraceConfig {
            num_probes: 4,
            seed: 0,
            aaa_tol: 1e-13,
            aaa_max_degree: 18,
            solve_tol: 1e-10,
            solve_max_iter: 200_000,
        }
    }
}

/// Randomized average return probability p(t) = tr(exp(-t A)) / n at every
/// requested time.
///
/// One AAA fit of exp on the spectral interval `[0, t_max * rho]` supplies
/// a pole set; for each time the poles rescale by 1/t, a block rational
/// Krylov space is built on a shared Gaussian probe block (deterministic in
/// `seed`), exp(-t A) Omega is approximated by a Rayleigh-Ritz projection, and
/// the XNysTrace core turns the block into a trace estimate. Times are
/// processed in parallel; results are collected in input order.
pub fn xnystrace_exp<O: LinOp + Sync>(
    op: &O,
    ts: &[f64],
    config: &XNysTraceConfig,
) -> Result<Vec<TraceEstimate>> {
    let n = op.dim();
    let m = config.num_probes;
    if m < 2 {
        return Err(Error::InvalidParameter("need at least 2 probes".into()));
    }
    if ts.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("times must be nonnegative".into()));
    }
    let t_max = ts.iter().cloned().fold(0.0f64, f64::max);
    if t_max == 0.0 {
        return Ok(vec![TraceEstimate { estimate: 1.0, std_error: 0.0 }; ts.len()]);
    }
    let rho = rho_upper(op, 50);
    let b = (t_max * rho).max(1.0);
    let npts = 500;
    let points: Vec<f64> = (0..npts).map(|i| b * i as f64 / (npts - 1) as f64).collect();
    let fvals: Vec<f64> = points.iter().map(|x| (-x).exp()).collect();
    let approx = aaa(&points, &fvals, config.aaa_tol, config.aaa_max_degree)?;
    let poles = approx.poles()?;
    if poles.is_empty() {
        return Err(Error::DegenerateSamples("rational fit produced no poles".into()));
    }
    // cap the space so (steps + 1) * m stays within the dimension
    let steps = poles.len().min(n / m.max(1) - 1);
    if steps == 0 {
        return Err(Error::InvalidParameter(format!(
            "graph with {n} nodes is too small for {m} probes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut omega = Mat::zeros(n, m);
    // Box-Muller (both outputs of each pair) keeps us off rand_distr
    let mut spare: Option<f64> = None;
    let mut gauss = |rng: &mut ChaCha8Rng| -> f64 {
        if let Some(z) = spare.take() {
            return z;
        }
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        spare = Some(r * th.sin());
        r * th.cos()
    };
    for i in 0..n {
        for j in 0..m {
            omega[(i, j)] = gauss(&mut rng);
        }
    }
    let results: Vec<Result<TraceEstimate>> = ts
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(TraceEstimate { estimate: 1.0, std_error: 0.0 });
            }
            let poles_t: Vec<Complex64> = poles.iter().map(|&p| p / t).collect();
            let rk = RationalKrylov::build(
                op,
                &omega,
                &poles_t,
                steps,
                config.solve_tol,
                config.solve_max_iter,
            )?;
            let y = rk.expm_block(&omega, t)?;
            let est = xnystrace_core(&omega, &y)?;
            Ok(TraceEstimate {
                estimate: est.estimate / n as f64,
                std_error: est.std_error / n as f64,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Baseline estimator: plain Hutchinson with Lanczos quadrature. One
/// Lanczos tridiagonalization per probe serves every requested time.
pub fn hutchinson_exp<O: LinOp + Sync>(
    op: &O,
    ts: &[f64],
    num_probes: usize,
    lanczos_iters: usize,
    seed: u64,
) -> Result<Vec<TraceEstimate>> {
    let n = op.dim();
    if num_probes < 2 {
        return Err(Error::InvalidParameter("need at least 2 probes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<f64>> = (0..num_probes)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();
    // per probe: (beta0^2, ritz values, first-row weights)
    let quads: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = probes
        .par_iter()
        .map(|w0| {
            let beta0: f64 = w0.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut basis: Vec<Vec<f64>> = vec![w0.iter().map(|v| v / beta0).collect()];
            let mut alphas = Vec::new();
            let mut betas = Vec::new();
            let mut w = vec![0.0; n];
            for j in 0..lanczos_iters.min(n) {
                op.apply_into(&basis[j], &mut w);
                let alpha: f64 = w.iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                alphas.push(alpha);
                for _ in 0..2 {
                    for q in &basis {
                        let c: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                        for (wi, qi) in w.iter_mut().zip(q) {
                            *wi -= c * qi;
                        }
                    }
                }
                let beta: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if beta <= 1e-13 * beta0 || j + 1 == lanczos_iters.min(n) {
                    break;
                }
                betas.push(beta);
                basis.push(w.iter().map(|v| v / beta).collect());
            }
            let k = alphas.len();
            let mut t = Mat::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let (vals, q) = sym_eig(&t)?;
            let weights: Vec<f64> = (0..k).map(|l| q[(0, l)] * q[(0, l)]).collect();
            Ok((beta0 * beta0, vals, weights))
        })
        .collect();
    let quads: Vec<(f64, Vec<f64>, Vec<f64>)> = quads.into_iter().collect::<Result<_>>()?;
    Ok(ts
        .iter()
        .map(|&t| {
            let samples: Vec<f64> = quads
                .iter()
                .map(|(b2, vals, wts)| {
                    b2 * vals
                        .iter()
                        .zip(wts)
                        .map(|(&l, &w)| w * (-t * l).exp())
                        .sum::<f64>()
                        / n as f64
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
                / (samples.len() as f64 - 1.0);
            TraceEstimate { estimate: mean, std_error: (var / samples.len() as f64).sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;
    use crate::operators::OperatorKind;

    #[test]
    fn core_is_exact_for_low_rank() {
        // A = B B^T with rank 2 < 4 probes
        let n = 12;
        let b = Mat::from_fn(n, 2, |i, j| ((i * (j + 1)) as f64 * 0.43).sin());
        let a = b.matmul(&b.transpose());
        let omega = Mat::from_fn(n, 4, |i, j| ((i * 7 + j * 3 + 1) as f64 * 0.29).cos());
        let y = a.matmul(&omega);
        let est = xnystrace_core(&omega, &y).unwrap();
        assert!((est.estimate - a.trace()).abs() < 1e-8 * a.trace());
        assert!(est.std_error < 1e-8 * a.trace());
    }

    #[test]
    fn exact_curve_starts_at_one() {
        let g = generate("random:18:9:13").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let p = exact_return_probability(&op, &[0.0, 1.0, 50.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1.0 && p[1] > 0.0);
        // long-time limit is 1/n for a connected graph
        assert!((p[2] - 1.0 / 18.0).abs() < 1e-6);
    }

    #[test]
    fn xnystrace_tracks_exact_curve() {
        let g = generate("random:30:20:21").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let ts: Vec<f64> = (0..8).map(|i| i as f64 * 0.8).collect();
        let exact = exact_return_probability(&op, &ts).unwrap();
        let est = xnystrace_exp(&op, &ts, &XNysTraceConfig::default()).unwrap();
        for (i, (e, x)) in est.iter().zip(&exact).enumerate() {
            assert!(
                (e.estimate - x).abs() < 0.05,
                "t = {}: {} vs {}",
                ts[i],
                e.estimate,
                x
            );
        }
    }

    #[test]
    fn xnystrace_deterministic_in_seed() {
        let g = generate("random:25:12:2").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let ts = [0.5, 2.0];
        let cfg = XNysTraceConfig { seed: 42, ..Default::default() };
        let a = xnystrace_exp(&op, &ts, &cfg).unwrap();
        let b = xnystrace_exp(&op, &ts, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.estimate, y.estimate);
        }
    }

    #[test]
    fn hutchinson_baseline_is_sane() {
        let g = generate("random:30:20:5").unwrap();
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0).unwrap();
        let ts = [0.0, 0.5, 2.0];
        let exact = exact_return_probability(&op, &ts).unwrap();
        let est = hutchinson_exp(&op, &ts, 30, 30, 7).unwrap();
        for (e, x) in est.iter().zip(&exact) {
            assert!((e.estimate - x).abs() < 0.1, "{} vs {}", e.estimate, x);
        }
    }
}
