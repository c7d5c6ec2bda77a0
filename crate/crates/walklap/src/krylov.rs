//! Krylov subspace machinery: Lanczos and Arnoldi matrix functions,
//! preconditioned CG, MINRES with real or complex shifts, AAA rational
//! approximation, and block rational Arnoldi for exponential actions.

use crate::dense::{eigvals, expm, phi1_times, sym_eig, jacobi_svd_right, CMat, Mat};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// A real linear operator given by its action.
pub trait LinOp {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<T: LinOp + ?Sized> LinOp for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// Wrap a closure as an operator.
pub struct FnOp<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scalar matrix functions used through their Krylov projections.
#[derive(Clone, Copy, Debug)]
pub enum MatFun {
    /// exp(s x)
    Exp { scale: f64 },
    /// b * phi1(b x) where phi1(x) = (e^x - 1) / x
    Phi1Scaled { beta: f64 },
}

impl MatFun {
    /// Pointwise evaluation, handy for spectral-oracle checks.
    pub fn scalar(&self, x: f64) -> f64 {
        match *self {
            MatFun::Exp { scale } => (scale * x).exp(),
            MatFun::Phi1Scaled { beta } => {
                let y = beta * x;
                if y.abs() < 1e-8 {
                    beta * (1.0 + y / 2.0 + y * y / 6.0)
                } else {
                    beta * (y.exp() - 1.0) / y
                }
            }
        }
    }

    /// f(H) e_1 for a small dense (not necessarily symmetric) H.
    fn dense_e1(&self, h: &Mat) -> Result<Vec<f64>> {
        let k = h.nrows;
        match *self {
            MatFun::Exp { scale } => {
                let mut hs = h.clone();
                hs.scale(scale);
                let e = expm(&hs)?;
                Ok(e.col(0))
            }
            MatFun::Phi1Scaled { beta } => {
                let mut hs = h.clone();
                hs.scale(beta);
                let mut e1 = Mat::zeros(k, 1);
                e1[(0, 0)] = 1.0;
                let p = phi1_times(&hs, &e1)?;
                Ok(p.col(0).iter().map(|x| beta * x).collect())
            }
        }
    }
}

/// f(A) v for symmetric A by the Lanczos process with full
/// reorthogonalization. The projected f(T) e_1 is evaluated through the
/// tridiagonal eigendecomposition; iteration stops when two successive
/// approximations agree to `tol` relative to the current norm.
pub fn lanczos_fun_apply(
    op: &dyn LinOp,
    v: &[f64],
    f: impl Fn(f64) -> f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = op.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    let beta0 = norm2(v);
    if beta0 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mmax = max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(mmax);
    basis.push(v.iter().map(|x| x / beta0).collect());
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev_result: Option<Vec<f64>> = None;
    let mut w = vec![0.0; n];
    for j in 0..mmax {
        op.apply_into(&basis[j], &mut w);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        // full reorthogonalization, twice for safety
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm2(&w);
        // projected approximation y = beta0 * V f(T) e1
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
        let mut coef = vec![0.0; k];
        for (c, &lam) in coef.iter_mut().zip(&vals) {
            *c = f(lam);
        }
        // f(T) e1 = Q f(Lambda) Q^T e1
        let mut fte1 = vec![0.0; k];
        for (i, fi) in fte1.iter_mut().enumerate() {
            let mut s = 0.0;
            for l in 0..k {
                s += q[(i, l)] * coef[l] * q[(0, l)];
            }
            *fi = s;
        }
        let mut y = vec![0.0; n];
        for (i, qv) in basis.iter().enumerate() {
            let c = beta0 * fte1[i];
            for (yi, qi) in y.iter_mut().zip(qv) {
                *yi += c * qi;
            }
        }
        let ynorm = norm2(&y).max(1e-300);
        if let Some(prev) = &prev_result {
            let diff: f64 = y
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if diff <= tol * ynorm {
                return Ok(y);
            }
        }
        if beta <= 1e-14 * beta0 || k == n {
            // invariant subspace reached: projection is exact
            return Ok(y);
        }
        prev_result = Some(y);
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(Error::NoConvergence { iterations: mmax, residual: f64::NAN })
}

/// f(A) v for a general (nonsymmetric) operator by the Arnoldi process.
/// The projected f(H) e_1 uses the dense matrix exponential.
pub fn arnoldi_fun_apply(
    op: &dyn LinOp,
    v: &[f64],
    fun: MatFun,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = op.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    let beta0 = norm2(v);
    if beta0 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mmax = max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(mmax);
    basis.push(v.iter().map(|x| x / beta0).collect());
    let mut h = Mat::zeros(mmax + 1, mmax);
    let mut prev_result: Option<Vec<f64>> = None;
    let mut w = vec![0.0; n];
    for j in 0..mmax {
        op.apply_into(&basis[j], &mut w);
        for (i, q) in basis.iter().enumerate() {
            let c = dot(&w, q);
            h[(i, j)] += c;
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        // second orthogonalization pass
        for (i, q) in basis.iter().enumerate() {
            let c = dot(&w, q);
            h[(i, j)] += c;
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        let hnext = norm2(&w);
        h[(j + 1, j)] = hnext;
        let k = j + 1;
        let hk = Mat::from_fn(k, k, |r, c| h[(r, c)]);
        let fe1 = fun.dense_e1(&hk)?;
        let mut y = vec![0.0; n];
        for (i, qv) in basis.iter().enumerate() {
            let c = beta0 * fe1[i];
            for (yi, qi) in y.iter_mut().zip(qv) {
                *yi += c * qi;
            }
        }
        let ynorm = norm2(&y).max(1e-300);
        if let Some(prev) = &prev_result {
            let diff: f64 = y
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if diff <= tol * ynorm {
                return Ok(y);
            }
        }
        if hnext <= 1e-14 * beta0 || k == n {
            return Ok(y);
        }
        prev_result = Some(y);
        basis.push(w.iter().map(|x| x / hnext).collect());
    }
    Err(Error::NoConvergence { iterations: mmax, residual: f64::NAN })
}

/// Preconditioned conjugate gradient for symmetric positive definite
/// systems. `jacobi` holds the operator diagonal when diagonal
/// preconditioning is wanted. Detects loss of positive definiteness through
/// negative curvature.
pub fn pcg_solve(
    op: &dyn LinOp,
    b: &[f64],
    jacobi: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    if let Some(d) = jacobi {
        if d.iter().any(|&x| x <= 0.0) {
            return Err(Error::NotPositiveDefinite(0));
        }
    }
    let precond = |r: &[f64]| -> Vec<f64> {
        match jacobi {
            Some(d) => r.iter().zip(d).map(|(ri, di)| ri / di).collect(),
            None => r.to_vec(),
        }
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite(it));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: norm2(&r) / bnorm })
}

/// MINRES for symmetric (possibly indefinite) systems A x = b.
pub fn minres_solve(
    op: &dyn LinOp,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let beta1 = norm2(b);
    if beta1 == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut v: Vec<f64> = b.iter().map(|x| x / beta1).collect();
    let mut v_prev = vec![0.0; n];
    let mut beta = 0.0;
    let (mut c, mut s) = (1.0, 0.0);
    let (mut c_old, mut s_old) = (1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut eta = beta1;
    let mut av = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply_into(&v, &mut av);
        let alpha = dot(&v, &av);
        for i in 0..n {
            av[i] -= alpha * v[i] + beta * v_prev[i];
        }
        let beta_new = norm2(&av);
        // apply the two previous Givens rotations, then compute a new one
        let delta = c * alpha - c_old * s * beta;
        let rho2 = s * alpha + c_old * c * beta;
        let rho3 = s_old * beta;
        let rho1 = delta.hypot(beta_new);
        if rho1 == 0.0 {
            break;
        }
        c_old = c;
        s_old = s;
        c = delta / rho1;
        s = beta_new / rho1;
        let mut w_new = vec![0.0; n];
        for i in 0..n {
            w_new[i] = (v[i] - rho3 * w_old[i] - rho2 * w[i]) / rho1;
        }
        let step = c * eta;
        for i in 0..n {
            x[i] += step * w_new[i];
        }
        eta = -s * eta;
        if eta.abs() <= tol * beta1 {
            return Ok((x, it));
        }
        w_old = std::mem::replace(&mut w, w_new);
        v_prev = std::mem::replace(
            &mut v,
            av.iter().map(|y| y / if beta_new == 0.0 { 1.0 } else { beta_new }).collect(),
        );
        beta = beta_new;
        if beta_new == 0.0 {
            // Krylov space exhausted; x solves the projected system exactly
            return Ok((x, it));
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: eta.abs() / beta1 })
}

/// Solve (A - sigma I) x = b for symmetric A and a complex shift/right-hand
/// side, through the symmetric 2n x 2n real embedding
///
/// ```text
/// [ A - a I     b I     ] [xr]   [ br ]
/// [   b I   -(A - a I)  ] [xi] = [-bi ]
/// ```
///
/// with sigma = a + b i, solved by MINRES.
pub fn shifted_solve_complex(
    op: &dyn LinOp,
    sigma: Complex64,
    b_re: &[f64],
    b_im: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = op.dim();
    if sigma.im == 0.0 && b_im.iter().all(|&x| x == 0.0) {
        let shifted = FnOp {
            dim: n,
            f: |x: &[f64], y: &mut [f64]| {
                op.apply_into(x, y);
                for i in 0..n {
                    y[i] -= sigma.re * x[i];
                }
            },
        };
        let (x, _) = minres_solve(&shifted, b_re, tol, max_iter)?;
        return Ok((x, vec![0.0; n]));
    }
    let a = sigma.re;
    let b = sigma.im;
    let emb = FnOp {
        dim: 2 * n,
        f: |x: &[f64], y: &mut [f64]| {
            let (xr, xi) = x.split_at(n);
            let (yr, yi) = y.split_at_mut(n);
            op.apply_into(xr, yr);
            for i in 0..n {
                yr[i] += -a * xr[i] + b * xi[i];
            }
            op.apply_into(xi, yi);
            for i in 0..n {
                yi[i] = -(yi[i] - a * xi[i]) + b * xr[i];
            }
        },
    };
    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend_from_slice(b_re);
    rhs.extend(b_im.iter().map(|x| -x));
    let (sol, _) = minres_solve(&emb, &rhs, tol, max_iter)?;
    let (xr, xi) = sol.split_at(n);
    Ok((xr.to_vec(), xi.to_vec()))
}

/// Barycentric rational approximation produced by the AAA algorithm.
#[derive(Clone, Debug)]
pub struct AaaApproximation {
    pub support: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Maximum absolute error over the sample points at termination.
    pub max_error: f64,
}

impl AaaApproximation {
    pub fn degree(&self) -> usize {
        self.support.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&zj, &fj), &wj) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let d = x - zj;
            if d == 0.0 {
                return fj;
            }
            num += wj * fj / d;
            den += wj / d;
        }
        num / den
    }

    /// Poles of the approximant. The pole pencil is deflated onto the
    /// orthogonal complement of the weight vector with one Householder
    /// reflection, after which an ordinary eigenvalue solve applies.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        let m = self.support.len();
        if m < 2 {
            return Ok(vec![]);
        }
        let wsum: f64 = self.weights.iter().sum();
        let wnorm: f64 = self.weights.iter().map(|w| w.abs()).sum();
        if wsum.abs() < 1e-13 * wnorm {
            return Err(Error::DegenerateSamples(
                "pole pencil is degenerate (weights sum to zero)".into(),
            ));
        }
        // M = diag(z) - (1/sum w) * ones * (w .* z)^T  has M^T w = 0, so its
        // range lies in the complement of w; the m-1 eigenvalues there are
        // the poles.
        let mut mm = Mat::zeros(m, m);
        for i in 0..m {
            mm[(i, i)] = self.support[i];
            for j in 0..m {
                mm[(i, j)] -= self.weights[j] * self.support[j] / wsum;
            }
        }
        // Householder u with H w = ||w|| e1, H = I - 2 u u^T / (u^T u)
        let wl2: f64 = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let mut u = self.weights.clone();
        u[0] += if u[0] >= 0.0 { wl2 } else { -wl2 };
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let reflect = |a: &Mat| -> Mat {
            // H a H with H = I - 2 u u^T / uu
            let mut b = a.clone();
            // left: rows -= (2 u_i / uu) (u^T a)
            let uta: Vec<f64> = (0..m)
                .map(|j| (0..m).map(|i| u[i] * b[(i, j)]).sum::<f64>())
                .collect();
            for i in 0..m {
                let f = 2.0 * u[i] / uu;
                for j in 0..m {
                    b[(i, j)] -= f * uta[j];
                }
            }
            let au: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|j| b[(i, j)] * u[j]).sum::<f64>())
                .collect();
            for j in 0..m {
                let f = 2.0 * u[j] / uu;
                for i in 0..m {
                    b[(i, j)] -= f * au[i];
                }
            }
            b
        };
        let deflated = reflect(&mm);
        let sub = Mat::from_fn(m - 1, m - 1, |i, j| deflated[(i + 1, j + 1)]);
        eigvals(&sub)
    }
}

/// AAA greedy rational approximation of samples `fvals` at `points`.
/// Stops when the maximum error drops below `tol * max|f|` or the degree
/// cap is hit; in the latter case the best approximant found is still
/// returned with its achieved error.
pub fn aaa(points: &[f64], fvals: &[f64], tol: f64, max_degree: usize) -> Result<AaaApproximation> {
    let np = points.len();
    if np != fvals.len() {
        return Err(Error::DimensionMismatch { expected: np, got: fvals.len() });
    }
    if np < 3 {
        return Err(Error::DegenerateSamples("need at least 3 sample points".into()));
    }
    let fscale = fvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if fscale == 0.0 {
        return Err(Error::DegenerateSamples("all samples are zero".into()));
    }
    let mean = fvals.iter().sum::<f64>() / np as f64;
    let mut in_support = vec![false; np];
    let mut support: Vec<usize> = Vec::new();
    let mut residual: Vec<f64> = fvals.iter().map(|f| f - mean).collect();
    let mut best: Option<AaaApproximation> = None;
    let mut best_err = f64::INFINITY;
    for _deg in 1..=max_degree.min(np - 2) {
        // add the worst point to the support
        let (next, _) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_support[*i])
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("free points remain");
        in_support[next] = true;
        support.push(next);
        let m = support.len();
        let free: Vec<usize> = (0..np).filter(|&i| !in_support[i]).collect();
        // Loewner matrix over the free points
        let loewner = Mat::from_fn(free.len(), m, |r, c| {
            let i = free[r];
            let j = support[c];
            (fvals[i] - fvals[j]) / (points[i] - points[j])
        });
        let (_, v) = jacobi_svd_right(&loewner);
        let weights: Vec<f64> = (0..m).map(|i| v[(i, m - 1)]).collect();
        let approx = AaaApproximation {
            support: support.iter().map(|&i| points[i]).collect(),
            values: support.iter().map(|&i| fvals[i]).collect(),
            weights,
            max_error: 0.0,
        };
        let mut err = 0.0f64;
        for &i in &free {
            let e = fvals[i] - approx.eval(points[i]);
            residual[i] = e;
            err = err.max(e.abs());
        }
        let approx = AaaApproximation { max_error: err, ..approx };
        if err < best_err {
            best_err = err;
            best = Some(approx);
        }
        if err <= tol * fscale {
            break;
        }
    }
    best.ok_or_else(|| Error::DegenerateSamples("aaa produced no approximant".into()))
}

/// Orthonormal block rational Krylov basis built from shifted solves,
/// together with the Rayleigh-Ritz projection G = V^H A V of the operator.
pub struct RationalKrylov {
    n: usize,
    /// basis columns, length (steps + 1) * block
    v: Vec<Vec<Complex64>>,
    /// projected operator, Hermitian for symmetric A
    g: CMat,
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl RationalKrylov {
    /// Build a block rational Krylov space for symmetric `op` from the
    /// starting block `omega` (n x m), running `steps` iterations cycling
    /// through `poles`. Inner shifted systems are solved with MINRES to
    /// `solve_tol`.
    pub fn build(
        op: &dyn LinOp,
        omega: &Mat,
        poles: &[Complex64],
        steps: usize,
        solve_tol: f64,
        solve_max_iter: usize,
    ) -> Result<RationalKrylov> {
        let n = op.dim();
        let m = omega.ncols;
        if omega.nrows != n {
            return Err(Error::DimensionMismatch { expected: n, got: omega.nrows });
        }
        if poles.is_empty() || m == 0 {
            return Err(Error::InvalidParameter("need at least one pole and one probe".into()));
        }
        if (steps + 1) * m > n {
            return Err(Error::InvalidParameter(format!(
                "rational Krylov space of {} blocks of {} exceeds dimension {}",
                steps + 1,
                m,
                n
            )));
        }
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity((steps + 1) * m);
        // initial block: complex MGS QR of omega
        for j in 0..m {
            let mut col: Vec<Complex64> =
                (0..n).map(|i| Complex64::new(omega[(i, j)], 0.0)).collect();
            let scale0 = cnorm(&col).max(1e-300);
            for _ in 0..2 {
                for q in &v {
                    let c = cdot(q, &col);
                    for (ci, qi) in col.iter_mut().zip(q) {
                        *ci -= c * qi;
                    }
                }
            }
            let nrm = cnorm(&col);
            if nrm <= 1e-12 * scale0 {
                return Err(Error::RankDeficient(j));
            }
            for c in &mut col {
                *c /= nrm;
            }
            v.push(col);
        }
        let mut au_re = vec![0.0; n];
        let mut au_im = vec![0.0; n];
        for step in 0..steps {
            let xi = poles[step % poles.len()];
            for jb in 0..m {
                // continuation vector: column jb of the latest block
                let vsrc = &v[step * m + jb];
                let vr: Vec<f64> = vsrc.iter().map(|z| z.re).collect();
                let vi: Vec<f64> = vsrc.iter().map(|z| z.im).collect();
                op.apply_into(&vr, &mut au_re);
                op.apply_into(&vi, &mut au_im);
                // w = xi (xi I - A)^-1 A v, via (A - xi I) w = -xi (A v)
                let rhs_re: Vec<f64> =
                    au_re.iter().zip(&au_im).map(|(r, i)| -(xi.re * r - xi.im * i)).collect();
                let rhs_im: Vec<f64> =
                    au_re.iter().zip(&au_im).map(|(r, i)| -(xi.re * i + xi.im * r)).collect();
                let (wr, wi) =
                    shifted_solve_complex(op, xi, &rhs_re, &rhs_im, solve_tol, solve_max_iter)?;
                let mut w: Vec<Complex64> =
                    wr.iter().zip(&wi).map(|(&r, &i)| Complex64::new(r, i)).collect();
                let scale0 = cnorm(&w).max(1e-300);
                for _ in 0..2 {
                    for q in v.iter() {
                        let c = cdot(q, &w);
                        for (ci, qv) in w.iter_mut().zip(q) {
                            *ci -= c * qv;
                        }
                    }
                }
                let nrm = cnorm(&w);
                if nrm <= 1e-12 * scale0 {
                    return Err(Error::RankDeficient(step * m + jb));
                }
                for c in &mut w {
                    *c /= nrm;
                }
                v.push(w);
            }
        }
        // Rayleigh-Ritz projection of the operator onto the basis
        let km = v.len();
        let mut g = CMat::zeros(km, km);
        for j in 0..km {
            let qr: Vec<f64> = v[j].iter().map(|z| z.re).collect();
            let qi: Vec<f64> = v[j].iter().map(|z| z.im).collect();
            op.apply_into(&qr, &mut au_re);
            op.apply_into(&qi, &mut au_im);
            let aq: Vec<Complex64> = au_re
                .iter()
                .zip(&au_im)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect();
            for i in 0..km {
                g[(i, j)] = cdot(&v[i], &aq);
            }
        }
        Ok(RationalKrylov { n, v, g })
    }

    /// Number of basis columns used for projections.
    pub fn projection_size(&self) -> usize {
        self.v.len()
    }

    /// Approximate exp(-t A) Omega as Re(V exp(-t G) V^H Omega) for the
    /// original starting block.
    pub fn expm_block(&self, omega: &Mat, t: f64) -> Result<Mat> {
        let km = self.v.len();
        let m = omega.ncols;
        // C = V^H Omega
        let mut c = CMat::zeros(km, m);
        for (qi, q) in self.v.iter().take(km).enumerate() {
            for j in 0..m {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..self.n {
                    s += q[i].conj() * omega[(i, j)];
                }
                c[(qi, j)] = s;
            }
        }
        let mut g = self.g.clone();
        for z in &mut g.data {
            *z *= -t;
        }
        let e = g.expm()?;
        let ec = e.matmul(&c);
        let mut out = Mat::zeros(self.n, m);
        for (qi, q) in self.v.iter().take(km).enumerate() {
            for j in 0..m {
                let w = ec[(qi, j)];
                for i in 0..self.n {
                    out[(i, j)] += (q[i] * w).re;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Graph};

    fn lap_op(g: &Graph) -> FnOp<impl Fn(&[f64], &mut [f64]) + '_> {
        let deg = g.degrees();
        FnOp {
            dim: g.num_nodes(),
            f: move |x: &[f64], y: &mut [f64]| {
                g.adj_matvec_into(x, y);
                for i in 0..x.len() {
                    y[i] = deg[i] * x[i] - y[i];
                }
            },
        }
    }

    #[test]
    fn lanczos_exp_matches_dense() {
        let g = generate("random:25:12:3").unwrap();
        let op = lap_op(&g);
        let v: Vec<f64> = (0..25).map(|i| ((i as f64) * 0.37).cos()).collect();
        let y = lanczos_fun_apply(&op, &v, |x| (-0.8 * x).exp(), 1e-12, 200).unwrap();
        let mut l = g.laplacian_dense();
        l.scale(-0.8);
        let e = expm(&l).unwrap();
        let exact = e.matvec(&v);
        let err: f64 = y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn arnoldi_exp_matches_dense_nonsymmetric() {
        // simple nonsymmetric operator: shifted cyclic permutation + diag
        let n = 20;
        let a = Mat::from_fn(n, n, |i, j| {
            let mut v = 0.0;
            if (i + 1) % n == j {
                v += 1.0;
            }
            if i == j {
                v += 0.1 * i as f64;
            }
            v
        });
        let op = FnOp {
            dim: n,
            f: |x: &[f64], y: &mut [f64]| {
                let t = a.matvec(x);
                y.copy_from_slice(&t);
            },
        };
        let v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let y = arnoldi_fun_apply(&op, &v, MatFun::Exp { scale: 0.5 }, 1e-12, 60).unwrap();
        let mut asc = a.clone();
        asc.scale(0.5);
        let exact = expm(&asc).unwrap().matvec(&v);
        let err: f64 = y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn pcg_solves_spd_and_detects_indefinite() {
        let g = generate("random:30:15:9").unwrap();
        let deg = g.degrees();
        // L + I is SPD
        let op = FnOp {
            dim: 30,
            f: |x: &[f64], y: &mut [f64]| {
                g.adj_matvec_into(x, y);
                for i in 0..30 {
                    y[i] = (deg[i] + 1.0) * x[i] - y[i];
                }
            },
        };
        let b: Vec<f64> = (0..30).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let diag: Vec<f64> = deg.iter().map(|d| d + 1.0).collect();
        let (x, _) = pcg_solve(&op, &b, Some(&diag), 1e-12, 1000).unwrap();
        let mut r = op.apply(&x);
        for i in 0..30 {
            r[i] -= b[i];
        }
        assert!(norm2(&r) < 1e-9 * norm2(&b));
        // -(L + I) is negative definite
        let neg = FnOp {
            dim: 30,
            f: |x: &[f64], y: &mut [f64]| {
                op.apply_into(x, y);
                for v in y.iter_mut() {
                    *v = -*v;
                }
            },
        };
        assert!(matches!(
            pcg_solve(&neg, &b, None, 1e-12, 1000),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn minres_solves_indefinite_shift() {
        let g = generate("random:24:10:1").unwrap();
        let deg = g.degrees();
        let sigma = 0.7; // inside the Laplacian spectrum: indefinite system
        let op = FnOp {
            dim: 24,
            f: |x: &[f64], y: &mut [f64]| {
                g.adj_matvec_into(x, y);
                for i in 0..24 {
                    y[i] = (deg[i] - sigma) * x[i] - y[i];
                }
            },
        };
        let b: Vec<f64> = (0..24).map(|i| (i as f64 * 1.3).sin()).collect();
        let (x, _) = minres_solve(&op, &b, 1e-12, 2000).unwrap();
        let mut r = op.apply(&x);
        for i in 0..24 {
            r[i] -= b[i];
        }
        assert!(norm2(&r) < 1e-8 * norm2(&b), "res {}", norm2(&r));
    }

    #[test]
    fn complex_shift_matches_dense_solve() {
        let g = generate("random:12:6:4").unwrap();
        let n = 12;
        let l = g.laplacian_dense();
        let op = lap_op(&g);
        let sigma = Complex64::new(0.4, 1.1);
        let br: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let bi = vec![0.0; n];
        let (xr, xi) =
            shifted_solve_complex(&op, sigma, &br, &bi, 1e-13, 5000).unwrap();
        // dense complex check
        let mut a = CMat::from_real(&l);
        for i in 0..n {
            a[(i, i)] -= sigma;
        }
        let mut b = CMat::zeros(n, 1);
        for i in 0..n {
            b[(i, 0)] = Complex64::new(br[i], 0.0);
        }
        let x = a.lu_solve(&b).unwrap();
        for i in 0..n {
            assert!((x[(i, 0)].re - xr[i]).abs() < 1e-7);
            assert!((x[(i, 0)].im - xi[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn aaa_recovers_exact_pole() {
        let points: Vec<f64> = (0..200).map(|i| 10.0 * i as f64 / 199.0).collect();
        let fvals: Vec<f64> = points.iter().map(|x| 1.0 / (1.0 + x)).collect();
        let approx = aaa(&points, &fvals, 1e-13, 16).unwrap();
        let poles = approx.poles().unwrap();
        let hit = poles
            .iter()
            .any(|p| (p.re + 1.0).abs() < 1e-8 && p.im.abs() < 1e-8);
        assert!(hit, "poles {poles:?}");
    }

    #[test]
    fn aaa_exp_accuracy() {
        let points: Vec<f64> = (0..500).map(|i| 10.0 * i as f64 / 499.0).collect();
        let fvals: Vec<f64> = points.iter().map(|x| (-x).exp()).collect();
        let approx = aaa(&points, &fvals, 1e-10, 20).unwrap();
        let err = (0..1000)
            .map(|i| 10.0 * i as f64 / 999.0)
            .map(|x| (approx.eval(x) - (-x).exp()).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn rational_krylov_exp_block() {
        let g = generate("random:40:25:8").unwrap();
        let n = 40;
        let op = lap_op(&g);
        // poles of an AAA fit of exp(-x) over the spectrum range
        let rho = 2.0 * g.max_degree() as f64;
        let points: Vec<f64> = (0..400).map(|i| rho * i as f64 / 399.0).collect();
        let fvals: Vec<f64> = points.iter().map(|x| (-x).exp()).collect();
        let approx = aaa(&points, &fvals, 1e-12, 16).unwrap();
        let poles = approx.poles().unwrap();
        let m = 3;
        let omega = Mat::from_fn(n, m, |i, j| ((i * (j + 2) + 1) as f64 * 0.61).sin());
        let steps = poles.len().min(n / m - 1);
        let rk = RationalKrylov::build(&op, &omega, &poles, steps, 1e-12, 20000).unwrap();
        for &t in &[0.3, 1.0] {
            let y = rk.expm_block(&omega, t).unwrap();
            let mut l = g.laplacian_dense();
            l.scale(-t);
            let exact = expm(&l).unwrap().matmul(&omega);
            let err = y.max_abs_diff(&exact);
            assert!(err < 1e-6, "t {t} err {err}");
        }
    }
}
