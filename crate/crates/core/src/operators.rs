//! Operator matrices `<Q_j|f|Q_k>` built from moment vectors.

use crate::basis::{matrix_from_moments, Basis, LinearizationTable};
use crate::error::{Error, Result};
use crate::measure::{MeasureKind, MomentVector};

/// Relative pivot threshold for the positive-definiteness check.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-13;

/// Scale of the noise floor for Cholesky pivots: a pivot must exceed this
/// times the largest moment times the absolute linearization weight of its row.
pub const MOMENT_NOISE: f64 = 1e-7;

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    pub measure: MeasureKind,
    pub basis: Basis,
    pub t_now: f64,
    pub tau: f64,
    /// Per-row rounding bound on the diagonal; empty for exact matrices.
    pub pivot_floor: Vec<f64>,
}

impl OperatorMatrix {
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.n + k]
    }

    /// Leading principal `m x m` block.
    pub fn leading(&self, m: usize) -> OperatorMatrix {
        assert!(m <= self.n);
        let mut entries = Vec::with_capacity(m * m);
        for j in 0..m {
            entries.extend_from_slice(&self.entries[j * self.n..j * self.n + m]);
        }
        OperatorMatrix {
            n: m,
            entries,
            pivot_floor: self.pivot_floor.iter().take(m).copied().collect(),
            ..self.clone()
        }
    }

    /// `v^T M v` over the leading `v.len()` block.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let m = v.len();
        debug_assert!(m <= self.n);
        let mut s = 0.0;
        for j in 0..m {
            let row = &self.entries[j * self.n..j * self.n + m];
            let rv: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            s += v[j] * rv;
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|j| (0..j).all(|k| self.get(j, k) == self.get(k, j)))
    }

    /// Lower Cholesky factor, or the index of the first pivot that falls
    /// below `CHOLESKY_PIVOT_TOL * max diag` or below its row's `pivot_floor`.
    pub fn cholesky(&self) -> std::result::Result<Vec<f64>, usize> {
        let n = self.n;
        let max_diag = (0..n).map(|i| self.get(i, i)).fold(0.0f64, f64::max);
        let tol = CHOLESKY_PIVOT_TOL * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for p in 0..j {
                d -= l[j * n + p] * l[j * n + p];
            }
            let floor = self.pivot_floor.get(j).copied().unwrap_or(0.0);
            if !(d > tol && d > floor) {
                return Err(j);
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(l)
    }
}

fn build(
    moments: &MomentVector,
    n: usize,
    table: &LinearizationTable,
    allowed: &[MeasureKind],
    role: &str,
) -> Result<OperatorMatrix> {
    if !allowed.contains(&moments.measure) {
        return Err(Error::input(format!(
            "{role} operator cannot be built from {:?} moments",
            moments.measure
        )));
    }
    matrix_from_moments(moments, n, table)
}

/// Gram matrix `<Q_j|Q_k>` under `omega dt`.
pub fn gram(
    moments_time: &MomentVector,
    n: usize,
    table: &LinearizationTable,
) -> Result<OperatorMatrix> {
    build(moments_time, n, table, &[MeasureKind::TimeDt], "gram")
}

/// Execution-flow matrix `<Q_j|I|Q_k>` under `omega dV`.
pub fn flow(
    moments_volume: &MomentVector,
    n: usize,
    table: &LinearizationTable,
) -> Result<OperatorMatrix> {
    build(moments_volume, n, table, &[MeasureKind::VolumeDV], "flow")
}

/// `<Q_j|pI|Q_k>` or `<Q_j|(t_now - t)I|Q_k>`.
pub fn weighted(
    moments: &MomentVector,
    n: usize,
    table: &LinearizationTable,
) -> Result<OperatorMatrix> {
    build(
        moments,
        n,
        table,
        &[MeasureKind::PriceVolume, MeasureKind::AgeVolume],
        "weighted",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{resample_set, Tick};

    fn stream() -> Vec<Tick> {
        (0..200)
            .map(|i| {
                let t = i as f64 * 2.0 + (i as f64 * 0.7).sin();
                Tick::new(t, 50.0, 3.0 + (i % 4) as f64).unwrap()
            })
            .collect()
    }

    #[test]
    fn measure_role_mismatch_rejected() {
        let ticks = stream();
        let set = resample_set(&ticks, None, 400.0, 100.0, Basis::Chebyshev, 9).unwrap();
        let table = LinearizationTable::new(Basis::Chebyshev, 5).unwrap();
        assert!(gram(&set.volume, 5, &table).is_err());
        assert!(flow(&set.time, 5, &table).is_err());
        assert!(weighted(&set.volume, 5, &table).is_err());
        assert!(weighted(&set.age_volume, 5, &table).is_ok());
    }

    #[test]
    fn scalar_operators_are_masses() {
        let ticks = stream();
        let set = resample_set(&ticks, None, 400.0, 100.0, Basis::Laguerre, 1).unwrap();
        let table = LinearizationTable::new(Basis::Laguerre, 1).unwrap();
        assert_eq!(
            gram(&set.time, 1, &table).unwrap().entries,
            vec![set.time.values[0]]
        );
        assert_eq!(
            flow(&set.volume, 1, &table).unwrap().entries,
            vec![set.volume.values[0]]
        );
    }

    #[test]
    fn constant_price_weighted_is_scaled_flow() {
        let ticks = stream();
        for basis in Basis::ALL {
            let set = resample_set(&ticks, None, 400.0, 100.0, basis, 11).unwrap();
            let table = LinearizationTable::new(basis, 6).unwrap();
            let f = flow(&set.volume, 6, &table).unwrap();
            let w = weighted(&set.price_volume, 6, &table).unwrap();
            let scale = w.frobenius_norm();
            for (a, b) in f.entries.iter().zip(&w.entries) {
                assert!((50.0 * a - b).abs() <= 1e-12 * scale, "{basis}");
            }
        }
    }

    #[test]
    fn gram_is_symmetric_and_positive_definite() {
        let ticks = stream();
        for basis in Basis::ALL {
            let set = resample_set(&ticks, None, 400.0, 100.0, basis, 15).unwrap();
            let table = LinearizationTable::new(basis, 8).unwrap();
            let mut g = gram(&set.time, 8, &table).unwrap();
            assert!(g.is_symmetric());
            assert_eq!(g.pivot_floor.len(), 8);
            g.pivot_floor.clear();
            assert!(g.cholesky().is_ok(), "{basis}");
        }
    }

    #[test]
    fn cholesky_reports_rank_deficiency() {
        let m = OperatorMatrix {
            n: 2,
            entries: vec![1.0, 1.0, 1.0, 1.0],
            measure: MeasureKind::TimeDt,
            basis: Basis::Chebyshev,
            t_now: 0.0,
            tau: 1.0,
            pivot_floor: Vec::new(),
        };
        assert_eq!(m.cholesky(), Err(1));
    }

    #[test]
    fn pivot_floor_rejects_small_pivots() {
        let mut m = OperatorMatrix {
            n: 2,
            entries: vec![1.0, 0.0, 0.0, 1e-6],
            measure: MeasureKind::TimeDt,
            basis: Basis::Chebyshev,
            t_now: 0.0,
            tau: 1.0,
            pivot_floor: vec![0.0, 1e-5],
        };
        assert_eq!(m.cholesky(), Err(1));
        m.pivot_floor[1] = 1e-7;
        assert!(m.cholesky().is_ok());
    }
}
