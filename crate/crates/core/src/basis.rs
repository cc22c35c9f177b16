//! Polynomial bases, product linearization and operator-matrix assembly.
//!
//! Every basis is handled through its three-term recurrence in a
//! *recurrence variable* `u`:
//!
//! ```text
//! u Q_m(u) = A_m Q_{m+1}(u) + B_m Q_m(u) + C_m Q_{m-1}(u)
//! ```
//!
//! | basis            | time variable `x`         | `u`        | `Q_m`        |
//! |------------------|---------------------------|------------|--------------|
//! | Laguerre         | `(t - t_now)/tau` (<= 0)  | `-x`       | `L_m(-x)`    |
//! | shifted Legendre | `exp(-(t_now - t)/tau)`   | `2x - 1`   | `P_m(2x-1)`  |
//! | Chebyshev        | `exp(-(t_now - t)/tau)`   | `2x - 1`   | `T_m(2x-1)`  |
//!
//! The same recurrence drives point evaluation, the product linearization
//! `Q_j Q_k = sum_m c_m^{jk} Q_m`, and affine argument substitutions used to
//! move moment vectors forward in time.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::measure::MomentVector;
use crate::operators::{OperatorMatrix, MOMENT_NOISE};

/// Largest `n` accepted for the Laguerre basis; its linearization
/// coefficients diverge beyond moment order ~50.
pub const LAGUERRE_MAX_N: usize = 25;
/// Largest `n` accepted for the exponential-variable bases (moments ~150).
pub const EXPONENTIAL_MAX_N: usize = 75;
/// Default table size.
pub const DEFAULT_N_MAX: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Laguerre,
    ShiftedLegendre,
    Chebyshev,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Laguerre, Basis::ShiftedLegendre, Basis::Chebyshev];

    pub fn name(self) -> &'static str {
        match self {
            Basis::Laguerre => "laguerre",
            Basis::ShiftedLegendre => "legendre",
            Basis::Chebyshev => "chebyshev",
        }
    }

    /// True when `x(t)` is the exponential map onto `(0, 1]`.
    pub fn is_exponential(self) -> bool {
        !matches!(self, Basis::Laguerre)
    }

    pub fn max_n(self) -> usize {
        match self {
            Basis::Laguerre => LAGUERRE_MAX_N,
            _ => EXPONENTIAL_MAX_N,
        }
    }

    pub fn check_n(self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::input("basis dimension n must be at least 1"));
        }
        if n > self.max_n() {
            return Err(Error::Capability {
                basis: self.name(),
                limit: self.max_n(),
                requested: n,
            });
        }
        Ok(())
    }

    /// Maps the time variable `x` onto the recurrence variable `u`.
    #[inline]
    pub fn recurrence_variable(self, x: f64) -> f64 {
        match self {
            Basis::Laguerre => -x,
            _ => 2.0 * x - 1.0,
        }
    }

    /// Coefficients `(A_m, B_m, C_m)` of `u Q_m = A_m Q_{m+1} + B_m Q_m + C_m Q_{m-1}`.
    #[inline]
    pub fn recurrence(self, m: usize) -> (f64, f64, f64) {
        let mf = m as f64;
        match self {
            Basis::Laguerre => (-(mf + 1.0), 2.0 * mf + 1.0, -mf),
            Basis::ShiftedLegendre => {
                let d = 2.0 * mf + 1.0;
                ((mf + 1.0) / d, 0.0, mf / d)
            }
            Basis::Chebyshev => {
                if m == 0 {
                    (1.0, 0.0, 0.0)
                } else {
                    (0.5, 0.0, 0.5)
                }
            }
        }
    }

    /// Evaluates `Q_0(x) .. Q_{n-1}(x)` into `out` (cleared first).
    pub fn evaluate_into(self, x: f64, n: usize, out: &mut Vec<f64>) {
        out.clear();
        if n == 0 {
            return;
        }
        let u = self.recurrence_variable(x);
        out.push(1.0);
        let mut prev = 0.0;
        let mut cur = 1.0;
        for m in 0..n - 1 {
            let (a, b, c) = self.recurrence(m);
            let next = ((u - b) * cur - c * prev) / a;
            out.push(next);
            prev = cur;
            cur = next;
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laguerre" => Ok(Basis::Laguerre),
            "legendre" | "shifted-legendre" | "shiftedlegendre" => Ok(Basis::ShiftedLegendre),
            "chebyshev" => Ok(Basis::Chebyshev),
            other => Err(Error::input(format!("unknown basis '{other}'"))),
        }
    }
}

/// `Q_0(x) .. Q_{n-1}(x)` by forward recurrence.
pub fn evaluate_all(basis: Basis, n: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::input(format!("non-finite basis argument {x}")));
    }
    let mut out = Vec::with_capacity(n);
    basis.evaluate_into(x, n, &mut out);
    Ok(out)
}

/// Multiplies a coefficient vector by the recurrence variable `u`.
///
/// `src` has length `len`; the result has length `len + 1`.
fn multiply_by_u(basis: Basis, src: &[f64], dst: &mut Vec<f64>) {
    dst.clear();
    dst.resize(src.len() + 1, 0.0);
    for (m, &c) in src.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let (a, b, cm) = basis.recurrence(m);
        dst[m + 1] += a * c;
        dst[m] += b * c;
        if m > 0 {
            dst[m - 1] += cm * c;
        }
    }
}

/// Product-linearization coefficients `c_m^{jk}` for all `j, k < n_max`.
///
/// Immutable once built; share it through [`LinearizationTable::shared`].
#[derive(Debug, Clone)]
pub struct LinearizationTable {
    basis: Basis,
    n_max: usize,
    // Lower-triangular storage, index j(j+1)/2 + k for k <= j.
    coeffs: Vec<Vec<f64>>,
}

#[inline]
fn tri(j: usize, k: usize) -> usize {
    let (j, k) = if j >= k { (j, k) } else { (k, j) };
    j * (j + 1) / 2 + k
}

impl LinearizationTable {
    pub fn new(basis: Basis, n_max: usize) -> Result<Self> {
        basis.check_n(n_max)?;
        let coeffs = match basis {
            Basis::Chebyshev => chebyshev_table(n_max),
            _ => recurrence_table(basis, n_max),
        };
        Ok(Self {
            basis,
            n_max,
            coeffs,
        })
    }

    /// Process-wide cache keyed by `(basis, n_max)`.
    pub fn shared(basis: Basis, n_max: usize) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(Basis, usize), Arc<LinearizationTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().unwrap().get(&(basis, n_max)) {
            return Ok(Arc::clone(t));
        }
        // Built outside the lock; a racing builder produces an identical table.
        let table = Arc::new(Self::new(basis, n_max)?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry((basis, n_max)).or_insert(table)))
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `c_m^{jk}` for `m = 0 ..= j + k`.
    ///
    /// # Panics
    /// If `j` or `k` is not below `n_max`.
    pub fn coeffs(&self, j: usize, k: usize) -> &[f64] {
        assert!(
            j < self.n_max && k < self.n_max,
            "order ({j}, {k}) outside table n_max = {}",
            self.n_max
        );
        &self.coeffs[tri(j, k)]
    }
}

fn chebyshev_table(n_max: usize) -> Vec<Vec<f64>> {
    let mut coeffs = Vec::with_capacity(n_max * (n_max + 1) / 2);
    for j in 0..n_max {
        for k in 0..=j {
            let mut c = vec![0.0; j + k + 1];
            if k == 0 {
                c[j] = 1.0;
            } else {
                c[j + k] += 0.5;
                c[j - k] += 0.5;
            }
            coeffs.push(c);
        }
    }
    coeffs
}

/// Builds `Q_{j+1} Q_k = ((u - B_j) Q_j Q_k - C_j Q_{j-1} Q_k) / A_j` row by row.
fn recurrence_table(basis: Basis, n_max: usize) -> Vec<Vec<f64>> {
    let mut coeffs: Vec<Vec<f64>> = vec![Vec::new(); n_max * (n_max + 1) / 2];
    coeffs[0] = vec![1.0];
    let mut scratch = Vec::new();
    for j in 0..n_max - 1 {
        let (a, b, c) = basis.recurrence(j);
        // Products with k <= j first, then the diagonal (j+1, j+1).
        for k in 0..=j + 1 {
            let (jj, kk) = if k <= j { (j, k) } else { (k, j) };
            // Q_{j+1} Q_k with k <= j uses Q_j Q_k and Q_{j-1} Q_k;
            // Q_{j+1} Q_{j+1} uses Q_j Q_{j+1} and Q_{j-1} Q_{j+1}.
            let base = coeffs[tri(jj, kk)].clone();
            multiply_by_u(basis, &base, &mut scratch);
            for (m, &v) in base.iter().enumerate() {
                scratch[m] -= b * v;
            }
            if j > 0 {
                let lower = &coeffs[tri(j - 1, k)];
                for (m, &v) in lower.iter().enumerate() {
                    scratch[m] -= c * v;
                }
            }
            let len = j + 1 + k + 1;
            let row: Vec<f64> = scratch[..len].iter().map(|v| v / a).collect();
            coeffs[tri(j + 1, k)] = row;
        }
    }
    coeffs
}

/// Single-pair convenience over the shared table.
pub fn linearization(basis: Basis, j: usize, k: usize) -> Result<Vec<f64>> {
    let n = j.max(k) + 1;
    let n_max = n.max(DEFAULT_N_MAX.min(basis.max_n()));
    let table = LinearizationTable::shared(basis, n_max)?;
    Ok(table.coeffs(j, k).to_vec())
}

/// Assembles `M[j][k] = sum_m c_m^{jk} <Q_m f>` for `j, k < n`.
pub fn matrix_from_moments(
    moments: &MomentVector,
    n: usize,
    table: &LinearizationTable,
) -> Result<OperatorMatrix> {
    let entries = assemble(&moments.values, moments.basis, n, table)?;
    let pivot_floor = (0..n)
        .map(|j| {
            let c = table.coeffs(j, j);
            let size = moments.values[..c.len()]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            MOMENT_NOISE * size * c.iter().map(|v| v.abs()).sum::<f64>()
        })
        .collect();
    Ok(OperatorMatrix {
        n,
        entries,
        pivot_floor,
        measure: moments.measure,
        basis: moments.basis,
        t_now: moments.t_now,
        tau: moments.tau,
    })
}

pub(crate) fn assemble(
    values: &[f64],
    basis: Basis,
    n: usize,
    table: &LinearizationTable,
) -> Result<Vec<f64>> {
    if basis != table.basis() {
        return Err(Error::input(format!(
            "moments in {basis} basis, table in {}",
            table.basis()
        )));
    }
    if n == 0 || n > table.n_max() {
        return Err(Error::input(format!(
            "matrix dimension {n} outside table range 1..={}",
            table.n_max()
        )));
    }
    if values.len() < 2 * n - 1 {
        return Err(Error::input(format!(
            "{} moment orders supplied, {} required for n = {n}",
            values.len(),
            2 * n - 1
        )));
    }
    let mut entries = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..=j {
            let v: f64 = table
                .coeffs(j, k)
                .iter()
                .zip(values)
                .map(|(c, m)| c * m)
                .sum();
            entries[j * n + k] = v;
            entries[k * n + j] = v;
        }
    }
    Ok(entries)
}

/// Expansion of `Q_m(a u + b)` in `Q_i(u)` for `m < orders`.
///
/// Returns a row-major lower-triangular `orders x orders` matrix `S` with
/// `Q_m(a u + b) = sum_i S[m][i] Q_i(u)`.
pub fn affine_substitution(basis: Basis, orders: usize, a: f64, b: f64) -> Vec<f64> {
    let mut s = vec![0.0; orders * orders];
    if orders == 0 {
        return s;
    }
    s[0] = 1.0;
    let mut prev: Vec<f64> = Vec::new();
    let mut cur: Vec<f64> = vec![1.0];
    let mut scratch = Vec::new();
    for m in 0..orders - 1 {
        let (am, bm, cm) = basis.recurrence(m);
        multiply_by_u(basis, &cur, &mut scratch);
        for v in scratch.iter_mut() {
            *v *= a;
        }
        for (i, &v) in cur.iter().enumerate() {
            scratch[i] += (b - bm) * v;
        }
        for (i, &v) in prev.iter().enumerate() {
            scratch[i] -= cm * v;
        }
        let next: Vec<f64> = scratch.iter().map(|v| v / am).collect();
        s[(m + 1) * orders..(m + 1) * orders + next.len()].copy_from_slice(&next);
        prev = std::mem::replace(&mut cur, next);
    }
    s
}

/// Expands `Phi = psi^2` with `psi = sum_k alpha_k Q_k` into `sum_m phi_m Q_m`.
pub fn square_expansion(alpha: &[f64], table: &LinearizationTable) -> Vec<f64> {
    let n = alpha.len();
    let mut phi = vec![0.0; (2 * n).saturating_sub(1)];
    for j in 0..n {
        for k in 0..=j {
            let w = if j == k {
                alpha[j] * alpha[j]
            } else {
                2.0 * alpha[j] * alpha[k]
            };
            for (p, c) in phi.iter_mut().zip(table.coeffs(j, k)) {
                *p += w * c;
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_legendre(m: usize, y: f64) -> f64 {
        // P_m(y) = 2^-m sum_k (-1)^k C(m,k) C(2m-2k, m) y^(m-2k)
        let binom = |n: usize, k: usize| -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        let mut s = 0.0;
        for k in 0..=m / 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom(m, k) * binom(2 * m - 2 * k, m) * y.powi((m - 2 * k) as i32);
        }
        s / 2f64.powi(m as i32)
    }

    #[test]
    fn laguerre_first_orders() {
        let v = evaluate_all(Basis::Laguerre, 2, -1.0).unwrap();
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn chebyshev_endpoint() {
        assert_eq!(
            evaluate_all(Basis::Chebyshev, 3, 1.0).unwrap(),
            vec![1.0; 3]
        );
    }

    #[test]
    fn shifted_legendre_matches_explicit_coefficients() {
        let v = evaluate_all(Basis::ShiftedLegendre, 6, 0.3).unwrap();
        for (m, got) in v.iter().enumerate() {
            let want = monomial_legendre(m, 2.0 * 0.3 - 1.0);
            assert!((got - want).abs() < 1e-12, "m={m}: {got} vs {want}");
        }
    }

    #[test]
    fn non_finite_argument_rejected() {
        assert!(evaluate_all(Basis::Chebyshev, 3, f64::NAN).is_err());
        assert!(evaluate_all(Basis::Laguerre, 3, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn chebyshev_closed_form() {
        assert_eq!(
            linearization(Basis::Chebyshev, 3, 2).unwrap(),
            vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.5]
        );
        assert_eq!(
            linearization(Basis::Chebyshev, 2, 2).unwrap(),
            vec![0.5, 0.0, 0.0, 0.0, 0.5]
        );
    }

    #[test]
    fn product_with_q0_is_identity() {
        for basis in Basis::ALL {
            for j in 0..10 {
                let c = linearization(basis, j, 0).unwrap();
                for (m, v) in c.iter().enumerate() {
                    let want = if m == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-14, "{basis} j={j} m={m}: {v}");
                }
            }
        }
    }

    #[test]
    fn legendre_square_of_first_order() {
        let c = linearization(Basis::ShiftedLegendre, 1, 1).unwrap();
        for x in [0.03, 0.27, 0.5, 0.81, 0.99] {
            let q = evaluate_all(Basis::ShiftedLegendre, 3, x).unwrap();
            let lhs = q[1] * q[1];
            let rhs: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn capability_bounds() {
        assert!(matches!(
            LinearizationTable::new(Basis::Laguerre, 26),
            Err(Error::Capability { .. })
        ));
        assert!(LinearizationTable::new(Basis::Laguerre, 25).is_ok());
        assert!(LinearizationTable::new(Basis::ShiftedLegendre, 76).is_err());
    }

    #[test]
    fn chebyshev_unit_moment_matrix() {
        let table = LinearizationTable::new(Basis::Chebyshev, 6).unwrap();
        let mut values = vec![0.0; 11];
        values[0] = 1.0;
        let m = assemble(&values, Basis::Chebyshev, 6, &table).unwrap();
        for j in 0..6 {
            for k in 0..6 {
                let want = match (j, k) {
                    (0, 0) => 1.0,
                    _ if j == k => 0.5,
                    _ => 0.0,
                };
                assert_eq!(m[j * 6 + k], want);
            }
        }
    }

    #[test]
    fn insufficient_moments_rejected() {
        let table = LinearizationTable::new(Basis::ShiftedLegendre, 6).unwrap();
        assert!(assemble(&[1.0; 10], Basis::ShiftedLegendre, 6, &table).is_err());
        assert!(assemble(&[1.0; 11], Basis::Chebyshev, 6, &table).is_err());
    }

    #[test]
    fn affine_substitution_pointwise() {
        for basis in Basis::ALL {
            let (a, b) = (0.83, -0.17);
            let s = affine_substitution(basis, 9, a, b);
            for &u in &[-0.9, -0.2, 0.4, 0.95] {
                let x_of = |u: f64| match basis {
                    Basis::Laguerre => -u,
                    _ => (u + 1.0) / 2.0,
                };
                let q_new = evaluate_all(basis, 9, x_of(a * u + b)).unwrap();
                let q_old = evaluate_all(basis, 9, x_of(u)).unwrap();
                for m in 0..9 {
                    let rhs: f64 = (0..9).map(|i| s[m * 9 + i] * q_old[i]).sum();
                    assert!((q_new[m] - rhs).abs() < 1e-12, "{basis} m={m}");
                }
            }
        }
    }
}
