//! Symmetric-definite generalized eigenproblem `A alpha = lambda B alpha`.
//!
//! `B = L L^T` (Cholesky), then the standard problem for `L^-1 A L^-T` is
//! solved with cyclic Jacobi rotations and the eigenvectors are mapped back
//! with `alpha = L^-T v`, which leaves them `B`-orthonormal. When `B` is
//! numerically singular the highest orders are dropped until the
//! factorization succeeds.

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

/// Jacobi stops when every off-diagonal entry is below this times `||C||_F`.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 30;
/// Eigenvalues this close (relative to `|lambda_max|`) count as tied for the top state.
pub const TOP_TIE_TOL: f64 = 1e-10;

/// `psi(x) = sum_k alpha_k Q_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub alpha: Vec<f64>,
    pub basis: Basis,
}

impl WaveFunction {
    pub fn constant(basis: Basis, n: usize) -> Self {
        let mut alpha = vec![0.0; n.max(1)];
        alpha[0] = 1.0;
        WaveFunction { alpha, basis }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let mut q = Vec::with_capacity(self.alpha.len());
        self.basis.evaluate_into(x, self.alpha.len(), &mut q);
        q.iter().zip(&self.alpha).map(|(a, b)| a * b).sum()
    }

    /// `<psi|M|psi>` using the leading block of `m`.
    pub fn expectation(&self, m: &OperatorMatrix) -> f64 {
        m.quadratic_form(&self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub lambdas: Vec<f64>,
    pub states: Vec<WaveFunction>,
    pub i_ih: usize,
    pub i_il: usize,
    /// Dimension actually solved; below the requested `n` when the Gram
    /// matrix was rank deficient.
    pub effective_n: usize,
}

impl SpectralDecomposition {
    pub fn lambda_ih(&self) -> f64 {
        self.lambdas[self.i_ih]
    }

    pub fn lambda_il(&self) -> f64 {
        self.lambdas[self.i_il]
    }

    pub fn top(&self) -> &WaveFunction {
        &self.states[self.i_ih]
    }

    /// Among states whose eigenvalue ties the maximum, picks the one with
    /// the smallest `key`. Exact key ties keep the highest index.
    pub fn resolve_top_tie<F: Fn(&WaveFunction) -> f64>(&mut self, key: F) {
        let lmax = self.lambdas[self.lambdas.len() - 1];
        let tol = TOP_TIE_TOL * lmax.abs();
        let mut best = self.lambdas.len() - 1;
        let mut best_key = key(&self.states[best]);
        for i in (0..best).rev() {
            if lmax - self.lambdas[i] > tol {
                break;
            }
            let k = key(&self.states[i]);
            if k < best_key {
                best = i;
                best_key = k;
            }
        }
        self.i_ih = best;
    }
}

/// Solves `A alpha = lambda B alpha` for symmetric `A` and positive
/// definite (or reducible) `B`.
pub fn solve_pencil(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<SpectralDecomposition> {
    if a.n != b.n {
        return Err(Error::input(format!(
            "pencil dimensions differ: {} vs {}",
            a.n, b.n
        )));
    }
    if a.basis != b.basis {
        return Err(Error::input("pencil matrices in different bases"));
    }
    if a.n == 0 {
        return Err(Error::input("empty pencil"));
    }
    let mut m = a.n;
    let l = loop {
        let bm = if m == b.n { b.clone() } else { b.leading(m) };
        match bm.cholesky() {
            Ok(l) => break l,
            Err(_) if m > 1 => m -= 1,
            Err(_) => return Err(Error::EmptyWindow),
        }
    };
    let am = if m == a.n { a.clone() } else { a.leading(m) };

    // C = L^-1 A L^-T.
    let mut x = am.entries.clone();
    for col in 0..m {
        forward_substitute(&l, m, &mut x, col, m);
    }
    // x = L^-1 A; now C = L^-1 x^T.
    let mut c = transpose(&x, m);
    for col in 0..m {
        forward_substitute(&l, m, &mut c, col, m);
    }
    for j in 0..m {
        for k in 0..j {
            let v = 0.5 * (c[j * m + k] + c[k * m + j]);
            c[j * m + k] = v;
            c[k * m + j] = v;
        }
    }

    let (values, vectors) = jacobi_eigen(&c, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut lambdas = Vec::with_capacity(m);
    let mut states = Vec::with_capacity(m);
    for &i in &order {
        let mut v: Vec<f64> = (0..m).map(|r| vectors[r * m + i]).collect();
        back_substitute_transposed(&l, m, &mut v);
        lambdas.push(values[i]);
        states.push(WaveFunction {
            alpha: v,
            basis: a.basis,
        });
    }
    Ok(SpectralDecomposition {
        lambdas,
        states,
        i_ih: m - 1,
        i_il: 0,
        effective_n: m,
    })
}

/// `(alpha^T A alpha) / (alpha^T B alpha)`.
pub fn rayleigh(psi: &WaveFunction, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    if psi.len() > a.n || psi.len() > b.n {
        return Err(Error::input(format!(
            "wavefunction of length {} exceeds matrix dimension {}",
            psi.len(),
            a.n.min(b.n)
        )));
    }
    let den = psi.expectation(b);
    if !(den > 0.0) && !(den < 0.0) {
        return Err(Error::DegenerateState(den));
    }
    Ok(psi.expectation(a) / den)
}

/// Solves `L y = x[:, col]` in place for lower-triangular `L`.
fn forward_substitute(l: &[f64], n: usize, x: &mut [f64], col: usize, stride: usize) {
    for i in 0..n {
        let mut s = x[i * stride + col];
        for p in 0..i {
            s -= l[i * n + p] * x[p * stride + col];
        }
        x[i * stride + col] = s / l[i * n + i];
    }
}

/// Solves `L^T y = v` in place.
fn back_substitute_transposed(l: &[f64], n: usize, v: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = v[i];
        for p in i + 1..n {
            s -= l[p * n + i] * v[p];
        }
        v[i] = s / l[i * n + i];
    }
}

fn transpose(x: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = x[i * n + j];
        }
    }
    t
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix.
///
/// Returns unsorted eigenvalues and the row-major matrix whose columns are
/// the orthonormal eigenvectors.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_OFF_DIAGONAL_TOL * norm;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= threshold {
                    continue;
                }
                rotated = true;
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    (values, v)
}
