//! Dense matrix kernels: LU, symmetric and nonsymmetric eigensolvers,
//! matrix exponential, one-sided Jacobi SVD, and a small complex matrix
//! type used by the rational Krylov pencil.
//!
//! Everything here is self-contained; sizes are bounded by the dense limit
//! so O(n^3) algorithms with full accuracy are the right tradeoff.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut m = Mat::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            m.data[i * ncols..(i + 1) * ncols].copy_from_slice(r);
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.nrows);
        for i in 0..self.nrows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Mat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.ncols..(k + 1) * other.ncols];
                let out_row = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for j in 0..other.ncols {
                    out_row[j] += a * orow[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn norm_one(&self) -> f64 {
        (0..self.ncols)
            .map(|j| (0..self.nrows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn symmetry_error(&self) -> f64 {
        let mut e = 0.0f64;
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                e = e.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        e
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// LU factorization with partial pivoting; factors stored packed.
pub struct Lu {
    n: usize,
    lu: Mat,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > pmax {
                    pmax = lu[(i, k)].abs();
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::Singular("lu"));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                piv.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in (k + 1)..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let mut out = Mat::zeros(b.nrows, b.ncols);
        for j in 0..b.ncols {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }
}

pub fn lu_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    Ok(Lu::factor(a)?.solve_mat(b))
}

fn sign_of(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Householder tridiagonalization. Overwrites `a` with the accumulated
/// transform when `with_vectors`, returning (diagonal, subdiagonal).
fn tred2(a: &mut Mat, with_vectors: bool) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    if with_vectors {
                        a[(j, i)] = a[(i, j)] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    e[j] -= hh * f;
                    let g = e[j];
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if with_vectors {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[(i, k)] * a[(k, j)];
                    }
                    for k in 0..i {
                        a[(k, j)] -= g * a[(k, i)];
                    }
                }
            }
        }
        d[i] = a[(i, i)];
        if with_vectors {
            a[(i, i)] = 1.0;
            for j in 0..i {
                a[(j, i)] = 0.0;
                a[(i, j)] = 0.0;
            }
        }
    }
    (d, e)
}

/// Implicit QL with shifts on a symmetric tridiagonal; rotations applied to
/// `z` columns when provided.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Mat>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence { iterations: iter, residual: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + sign_of(r, g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = zm[(k, i + 1)];
                        zm[(k, i + 1)] = s * zm[(k, i)] + c * f;
                        zm[(k, i)] = c * zm[(k, i)] - s * f;
                    }
                }
            }
            if r == 0.0 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix: eigenvalues ascending, columns
/// of the returned matrix are the matching orthonormal eigenvectors.
pub fn sym_eig(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    assert_eq!(a.nrows, a.ncols);
    let mut work = a.clone();
    let (mut d, mut e) = tred2(&mut work, true);
    tql(&mut d, &mut e, Some(&mut work))?;
    // sort ascending, permute columns
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let vals: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let n = a.nrows;
    let mut q = Mat::zeros(n, n);
    for (jnew, &jold) in idx.iter().enumerate() {
        for i in 0..n {
            q[(i, jnew)] = work[(i, jold)];
        }
    }
    Ok((vals, q))
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals(a: &Mat) -> Result<Vec<f64>> {
    assert_eq!(a.nrows, a.ncols);
    let mut work = a.clone();
    let (mut d, mut e) = tred2(&mut work, false);
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a general real matrix via balancing, elimination to
/// Hessenberg form, and the Francis double-shift QR iteration.
pub fn eigvals(a: &Mat) -> Result<Vec<Complex64>> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut m = a.clone();
    balance(&mut m);
    elmhes(&mut m);
    hqr(&mut m)
}

fn balance(a: &mut Mat) {
    let n = a.nrows;
    let radix = 2.0f64;
    let sqrdx = radix * radix;
    loop {
        let mut last = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                while c2 < g {
                    f *= radix;
                    c2 *= sqrdx;
                }
                g = r * radix;
                while c2 > g {
                    f /= radix;
                    c2 /= sqrdx;
                }
                if (c2 + r) / f < 0.95 * s {
                    last = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if last {
            break;
        }
    }
}

fn elmhes(a: &mut Mat) {
    let n = a.nrows;
    if n < 3 {
        return;
    }
    for m in 1..(n - 1) {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                let t = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        let t = y * a[(m, j)];
                        a[(i, j)] -= t;
                    }
                    for j in 0..n {
                        let t = y * a[(j, i)];
                        a[(j, m)] += t;
                    }
                }
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
#[allow(clippy::needless_range_loop)]
fn hqr(a: &mut Mat) -> Result<Vec<Complex64>> {
    let n = a.nrows as i64;
    let idx = |i: i64, j: i64| (i as usize) * (a.ncols) + (j as usize);
    let mut wr = vec![0.0; n as usize];
    let mut wi = vec![0.0; n as usize];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a.data[idx(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n as usize]);
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = a.data[idx(l - 1, l - 1)].abs() + a.data[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a.data[idx(l, l - 1)].abs() <= f64::EPSILON * s {
                    a.data[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a.data[idx(nn, nn)];
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a.data[idx(nn - 1, nn - 1)];
            let mut w = a.data[idx(nn, nn - 1)] * a.data[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign_of(z, p);
                    wr[(nn - 1) as usize] = x + z;
                    wr[nn as usize] = x + z;
                    if z != 0.0 {
                        wr[nn as usize] = x - w / z;
                    }
                    wi[(nn - 1) as usize] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[(nn - 1) as usize] = x + p;
                    wr[nn as usize] = x + p;
                    wi[nn as usize] = z;
                    wi[(nn - 1) as usize] = -z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::NoConvergence {
                    iterations: its,
                    residual: a.data[idx(nn, nn - 1)].abs(),
                });
            }
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                t += x;
                for i in 0..=nn {
                    a.data[idx(i, i)] -= x;
                }
                let s = a.data[idx(nn, nn - 1)].abs() + a.data[idx(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let z = a.data[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a.data[idx(m + 1, m)] + a.data[idx(m, m + 1)];
                q = a.data[idx(m + 1, m + 1)] - z - rr - ss;
                r = a.data[idx(m + 2, m + 1)];
                let sc = p.abs() + q.abs() + r.abs();
                p /= sc;
                q /= sc;
                r /= sc;
                if m == l {
                    break;
                }
                let u = a.data[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a.data[idx(m - 1, m - 1)].abs()
                        + a.data[idx(m, m)].abs()
                        + a.data[idx(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a.data[idx(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a.data[idx(i, i - 3)] = 0.0;
                }
            }
            for k in m..nn {
                if k != m {
                    p = a.data[idx(k, k - 1)];
                    q = a.data[idx(k + 1, k - 1)];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a.data[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a.data[idx(k, k - 1)] = -a.data[idx(k, k - 1)];
                        }
                    } else {
                        a.data[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    let yf = q / s;
                    let zf = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a.data[idx(k, j)] + q * a.data[idx(k + 1, j)];
                        if k != nn - 1 {
                            pp += r * a.data[idx(k + 2, j)];
                            a.data[idx(k + 2, j)] -= pp * zf;
                        }
                        a.data[idx(k + 1, j)] -= pp * yf;
                        a.data[idx(k, j)] -= pp * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a.data[idx(i, k)] + yf * a.data[idx(i, k + 1)];
                        if k != nn - 1 {
                            pp += zf * a.data[idx(i, k + 2)];
                            a.data[idx(i, k + 2)] -= pp * r;
                        }
                        a.data[idx(i, k + 1)] -= pp * q;
                        a.data[idx(i, k)] -= pp;
                    }
                }
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling-and-squaring with a degree-13 Pade
/// approximant.
pub fn expm(a: &Mat) -> Result<Mat> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let theta13 = 5.371920351148152;
    let norm = a.norm_one();
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let mut m = a.clone();
    if s > 0 {
        m.scale(1.0 / 2f64.powi(s as i32));
    }
    let ident = Mat::identity(n);
    let m2 = m.matmul(&m);
    let m4 = m2.matmul(&m2);
    let m6 = m4.matmul(&m2);
    let b = &PADE13;
    // U = M (M6 (b13 M6 + b11 M4 + b9 M2) + b7 M6 + b5 M4 + b3 M2 + b1 I)
    let mut inner = Mat::zeros(n, n);
    inner.add_assign_scaled(&m6, b[13]);
    inner.add_assign_scaled(&m4, b[11]);
    inner.add_assign_scaled(&m2, b[9]);
    let mut u = m6.matmul(&inner);
    u.add_assign_scaled(&m6, b[7]);
    u.add_assign_scaled(&m4, b[5]);
    u.add_assign_scaled(&m2, b[3]);
    u.add_assign_scaled(&ident, b[1]);
    let u = m.matmul(&u);
    // V = M6 (b12 M6 + b10 M4 + b8 M2) + b6 M6 + b4 M4 + b2 M2 + b0 I
    let mut inner = Mat::zeros(n, n);
    inner.add_assign_scaled(&m6, b[12]);
    inner.add_assign_scaled(&m4, b[10]);
    inner.add_assign_scaled(&m2, b[8]);
    let mut v = m6.matmul(&inner);
    v.add_assign_scaled(&m6, b[6]);
    v.add_assign_scaled(&m4, b[4]);
    v.add_assign_scaled(&m2, b[2]);
    v.add_assign_scaled(&ident, b[0]);
    // (V - U) X = (V + U)
    let mut vm = v.clone();
    vm.add_assign_scaled(&u, -1.0);
    let mut vp = v;
    vp.add_assign_scaled(&u, 1.0);
    let mut x = lu_solve(&vm, &vp)?;
    for _ in 0..s {
        x = x.matmul(&x);
    }
    Ok(x)
}

/// phi1(A) B where phi1(x) = (e^x - 1)/x, via the augmented-matrix identity
/// exp([[A, B], [0, 0]]) = [[e^A, phi1(A) B], [0, I]].
pub fn phi1_times(a: &Mat, b: &Mat) -> Result<Mat> {
    assert_eq!(a.nrows, a.ncols);
    assert_eq!(a.ncols, b.nrows);
    let n = a.nrows;
    let m = b.ncols;
    let mut aug = Mat::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        for j in 0..m {
            aug[(i, n + j)] = b[(i, j)];
        }
    }
    let e = expm(&aug)?;
    Ok(Mat::from_fn(n, m, |i, j| e[(i, n + j)]))
}

/// One-sided Jacobi SVD. Returns (singular values descending, right singular
/// vectors as columns, in the same order). Accurate for small singular
/// values, which is what the AAA weight computation needs.
pub fn jacobi_svd_right(a: &Mat) -> (Vec<f64>, Mat) {
    let m = a.nrows;
    let nc = a.ncols;
    let mut w = a.clone();
    let mut v = Mat::identity(nc);
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..nc {
            for q in (p + 1)..nc {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let x = w[(i, p)];
                    let y = w[(i, q)];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = sign_of(1.0, zeta) / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = w[(i, p)];
                    let y = w[(i, q)];
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..nc {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<(f64, usize)> = (0..nc)
        .map(|j| ((0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt(), j))
        .collect();
    sv.sort_by(|a, b| b.0.total_cmp(&a.0));
    let vals: Vec<f64> = sv.iter().map(|x| x.0).collect();
    let mut vs = Mat::zeros(nc, nc);
    for (jnew, &(_, jold)) in sv.iter().enumerate() {
        for i in 0..nc {
            vs[(i, jnew)] = v[(i, jold)];
        }
    }
    (vals, vs)
}

/// Dense complex matrix, row-major. Used by the block rational Arnoldi
/// pencil; kept minimal.
#[derive(Clone, Debug)]
pub struct CMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMat { nrows, ncols, data: vec![Complex64::new(0.0, 0.0); nrows * ncols] }
    }

    pub fn from_real(a: &Mat) -> Self {
        CMat {
            nrows: a.nrows,
            ncols: a.ncols,
            data: a.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn re(&self) -> Mat {
        Mat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> Mat {
        Mat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.ncols, other.nrows);
        let mut out = CMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.ncols {
                    let t = a * other[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CMat {
        let mut out = CMat::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Solve self * X = B by complex LU with partial pivoting.
    pub fn lu_solve(&self, b: &CMat) -> Result<CMat> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut lu = self.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[(k, k)].norm();
            for i in (k + 1)..n {
                if lu[(i, k)].norm() > pmax {
                    pmax = lu[(i, k)].norm();
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::Singular("complex lu"));
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in (k + 1)..n {
                    let t = m * lu[(k, j)];
                    lu[(i, j)] -= t;
                }
            }
        }
        let mut out = CMat::zeros(n, b.ncols);
        for c in 0..b.ncols {
            let mut x: Vec<Complex64> = piv.iter().map(|&p| b[(p, c)]).collect();
            for i in 1..n {
                let mut s = x[i];
                for j in 0..i {
                    s -= lu[(i, j)] * x[j];
                }
                x[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[i];
                for j in (i + 1)..n {
                    s -= lu[(i, j)] * x[j];
                }
                x[i] = s / lu[(i, i)];
            }
            for i in 0..n {
                out[(i, c)] = x[i];
            }
        }
        Ok(out)
    }

    /// exp(self) via the real 2n x 2n embedding [[Re, -Im], [Im, Re]].
    pub fn expm(&self) -> Result<CMat> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut emb = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self[(i, j)];
                emb[(i, j)] = z.re;
                emb[(i, j + n)] = -z.im;
                emb[(i + n, j)] = z.im;
                emb[(i + n, j + n)] = z.re;
            }
        }
        let e = expm(&emb)?;
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = Complex64::new(e[(i, j)], e[(i + n, j)]);
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.ncols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn lu_solves_small_system() {
        let a = Mat::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve_vec(&[1.0, 2.0]);
        // solution of [[4,1],[1,3]] x = [1,2]
        approx(x[0], 1.0 / 11.0, 1e-14);
        approx(x[1], 7.0 / 11.0, 1e-14);
    }

    #[test]
    fn sym_eig_p3_laplacian() {
        // path graph Laplacian: eigenvalues 0, 1, 3
        let l = Mat::from_rows(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ]);
        let (vals, q) = sym_eig(&l).unwrap();
        approx(vals[0], 0.0, 1e-12);
        approx(vals[1], 1.0, 1e-12);
        approx(vals[2], 3.0, 1e-12);
        // reconstruction
        let lam = Mat::from_fn(3, 3, |i, j| if i == j { vals[i] } else { 0.0 });
        let rec = q.matmul(&lam).matmul(&q.transpose());
        assert!(rec.max_abs_diff(&l) < 1e-12);
    }

    #[test]
    fn sym_eig_random_reconstruction() {
        let n = 40;
        let mut a = Mat::zeros(n, n);
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = rnd();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let (vals, q) = sym_eig(&a).unwrap();
        let lam = Mat::from_fn(n, n, |i, j| if i == j { vals[i] } else { 0.0 });
        let rec = q.matmul(&lam).matmul(&q.transpose());
        assert!(rec.max_abs_diff(&a) < 1e-10 * a.max_abs().max(1.0));
        let qtq = q.transpose().matmul(&q);
        assert!(qtq.max_abs_diff(&Mat::identity(n)) < 1e-10);
    }

    #[test]
    fn eigvals_companion() {
        // companion of x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let a = Mat::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let mut ev: Vec<f64> = eigvals(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        approx(ev[0], 1.0, 1e-9);
        approx(ev[1], 2.0, 1e-9);
        approx(ev[2], 3.0, 1e-9);
    }

    #[test]
    fn eigvals_rotation_complex_pair() {
        // rotation by 90 degrees: eigenvalues +-i
        let a = Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let ev = eigvals(&a).unwrap();
        let mut ims: Vec<f64> = ev.iter().map(|z| z.im).collect();
        ims.sort_by(f64::total_cmp);
        approx(ims[0], -1.0, 1e-12);
        approx(ims[1], 1.0, 1e-12);
        for z in ev {
            approx(z.re, 0.0, 1e-12);
        }
    }

    #[test]
    fn expm_diagonal_and_nilpotent() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let e = expm(&a).unwrap();
        approx(e[(0, 0)], 1f64.exp(), 1e-13);
        approx(e[(1, 1)], 2f64.exp(), 1e-12);
        approx(e[(0, 1)], 0.0, 1e-14);
        // nilpotent: exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        let n = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let e = expm(&n).unwrap();
        approx(e[(0, 1)], 1.0, 1e-14);
    }

    #[test]
    fn expm_large_norm_scaling() {
        // exp of [[0, t],[t, 0]] = [[cosh t, sinh t],[sinh t, cosh t]]
        let t = 20.0;
        let a = Mat::from_rows(&[vec![0.0, t], vec![t, 0.0]]);
        let e = expm(&a).unwrap();
        approx(e[(0, 0)] / t.cosh(), 1.0, 1e-12);
        approx(e[(0, 1)] / t.sinh(), 1.0, 1e-12);
    }

    #[test]
    fn phi1_identity_argument() {
        // phi1(0) = 1 so phi1(O) B = B
        let z = Mat::zeros(3, 3);
        let b = Mat::from_fn(3, 2, |i, j| (i + j) as f64);
        let p = phi1_times(&z, &b).unwrap();
        assert!(p.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn jacobi_svd_rank_and_nullvec() {
        // rank-1 matrix: second right singular vector spans the null space
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let (s, v) = jacobi_svd_right(&a);
        assert!(s[1] < 1e-12 * s[0]);
        // null vector proportional to (2, -1)/sqrt(5)
        let nv = [v[(0, 1)], v[(1, 1)]];
        let t = (nv[0] * 1.0 + nv[1] * 2.0).abs();
        assert!(t < 1e-12);
    }

    #[test]
    fn cmat_solve_and_expm() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = Complex64::new(0.0, 1.0);
        a[(1, 1)] = Complex64::new(0.0, -1.0);
        let e = a.expm().unwrap();
        approx(e[(0, 0)].re, 1f64.cos(), 1e-13);
        approx(e[(0, 0)].im, 1f64.sin(), 1e-13);
        let mut b = CMat::zeros(2, 1);
        b[(0, 0)] = Complex64::new(1.0, 0.0);
        b[(1, 0)] = Complex64::new(0.0, 2.0);
        let x = a.lu_solve(&b).unwrap();
        // (i)^-1 * 1 = -i ; (-i)^-1 * 2i = -2
        approx(x[(0, 0)].im, -1.0, 1e-14);
        approx(x[(1, 0)].re, -2.0, 1e-14);
    }
}
