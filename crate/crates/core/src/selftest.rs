//! Independent reference computations and a quick self-check suite.
//!
//! Nothing here goes through the recurrences, the linearization tables, the
//! incremental moment state or the Cholesky/Jacobi solver. Basis values come
//! from closed forms, operator entries from direct sums over ticks, and
//! pencil eigenvalues from sign changes of `det(A - lambda B)`.

use crate::basis::{matrix_from_moments, Basis, LinearizationTable};
use crate::engine::{run_series, EngineConfig, Grid};
use crate::error::Result;
use crate::gev::{rayleigh, solve_pencil, WaveFunction};
use crate::indicators::evaluate_at;
use crate::measure::{omega, resample_set, MeasureKind, Tick};
use crate::operators::OperatorMatrix;
use crate::synth::{spike, SplitMix64, SteadyParams};

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `Q_m(x)` from closed forms. Intended for moderate `m` (roughly <= 12).
///
/// * Laguerre: `L_m(y) = sum_k (-1)^k C(m,k) y^k / k!` at `y = -x`.
/// * shifted Legendre: `P_m(2x-1) = sum_k C(m,k)^2 (x-1)^(m-k) x^k`.
/// * Chebyshev: `cos(m acos(2x-1))`, or its `cosh` form just outside `[0, 1]`.
pub fn basis_value(basis: Basis, m: usize, x: f64) -> f64 {
    match basis {
        Basis::Laguerre => {
            let y = -x;
            (0..=m)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(m, k) * y.powi(k as i32) / factorial(k)
                })
                .sum()
        }
        Basis::ShiftedLegendre => (0..=m)
            .map(|k| binomial(m, k).powi(2) * (x - 1.0).powi((m - k) as i32) * x.powi(k as i32))
            .sum(),
        Basis::Chebyshev => {
            let y = 2.0 * x - 1.0;
            if y.abs() <= 1.0 {
                (m as f64 * y.acos()).cos()
            } else if y > 1.0 {
                (m as f64 * y.acosh()).cosh()
            } else {
                let v = (m as f64 * (-y).acosh()).cosh();
                if m.is_multiple_of(2) {
                    v
                } else {
                    -v
                }
            }
        }
    }
}

fn x_direct(basis: Basis, t: f64, t_now: f64, tau: f64) -> f64 {
    match basis {
        Basis::Laguerre => (t - t_now) / tau,
        _ => (-(t_now - t) / tau).exp(),
    }
}

/// Per-tick weight of one measure, first tick's interval taken from `prev_t`
/// (zero when absent).
fn tick_weights(
    ticks: &[Tick],
    prev_t: Option<f64>,
    t_now: f64,
    tau: f64,
    measure: MeasureKind,
) -> Vec<f64> {
    let mut last = prev_t;
    ticks
        .iter()
        .map(|tick| {
            let w = (-(t_now - tick.t) / tau).exp();
            let dt = last.map_or(0.0, |p| tick.t - p);
            last = Some(tick.t);
            w * match measure {
                MeasureKind::TimeDt => dt,
                MeasureKind::VolumeDV => tick.dv,
                MeasureKind::PriceVolume => tick.p * tick.dv,
                MeasureKind::AgeVolume => (t_now - tick.t) * tick.dv,
            }
        })
        .collect()
}

/// `<Q_j|f|Q_k>` as a direct sum of `Q_j(x_l) Q_k(x_l) w_l` over ticks,
/// row-major `n x n`.
pub fn direct_operator(
    ticks: &[Tick],
    prev_t: Option<f64>,
    t_now: f64,
    tau: f64,
    basis: Basis,
    n: usize,
    measure: MeasureKind,
) -> Vec<f64> {
    let weights = tick_weights(ticks, prev_t, t_now, tau, measure);
    let mut out = vec![0.0; n * n];
    for (tick, w) in ticks.iter().zip(weights) {
        let x = x_direct(basis, tick.t, t_now, tau);
        let q: Vec<f64> = (0..n).map(|m| basis_value(basis, m, x)).collect();
        for j in 0..n {
            for k in 0..n {
                out[j * n + k] += w * q[j] * q[k];
            }
        }
    }
    out
}

/// `sum psi^2 omega dV value / sum psi^2 omega dV` over raw ticks.
pub fn direct_psi_ratio<F: Fn(&Tick) -> f64>(
    ticks: &[Tick],
    t_now: f64,
    tau: f64,
    basis: Basis,
    alpha: &[f64],
    value: F,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for tick in ticks {
        let x = x_direct(basis, tick.t, t_now, tau);
        let psi: f64 = alpha
            .iter()
            .enumerate()
            .map(|(m, a)| a * basis_value(basis, m, x))
            .sum();
        let w = psi * psi * (-(t_now - tick.t) / tau).exp() * tick.dv;
        num += w * value(tick);
        den += w;
    }
    num / den
}

/// `(P_tau, T_tau)` as exponentially weighted sums over raw ticks.
pub fn direct_ema(ticks: &[Tick], t_now: f64, tau: f64) -> (f64, f64) {
    let (mut m, mut p, mut a) = (0.0, 0.0, 0.0);
    for tick in ticks {
        let w = (-(t_now - tick.t) / tau).exp() * tick.dv;
        m += w;
        p += w * tick.p;
        a += w * (t_now - tick.t);
    }
    (p / m, a / m)
}

/// Determinant by LU with partial pivoting.
pub fn determinant(mut m: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&a, &b| m[a * n + c].abs().total_cmp(&m[b * n + c].abs()))
            .expect("non-empty");
        if m[pivot * n + c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            for k in 0..n {
                m.swap(c * n + k, pivot * n + k);
            }
            det = -det;
        }
        let d = m[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = m[r * n + c] / d;
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    det
}

/// Gauss-Jordan inverse, `None` when singular.
pub fn inverse(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let pivot = (c..n).max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs()))?;
        if a[pivot * n + c] == 0.0 {
            return None;
        }
        for k in 0..n {
            a.swap(c * n + k, pivot * n + k);
            inv.swap(c * n + k, pivot * n + k);
        }
        let d = a[c * n + c];
        for k in 0..n {
            a[c * n + k] /= d;
            inv[c * n + k] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r * n + c];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[c * n + k];
                        inv[r * n + k] -= f * inv[c * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn shifted_det(a: &[f64], b: &[f64], n: usize, lambda: f64) -> f64 {
    determinant(a.iter().zip(b).map(|(x, y)| x - lambda * y).collect(), n)
}

/// Generalized eigenvalues of `A v = lambda B v` (`B` positive definite) by
/// scanning `det(A - lambda B)` for sign changes and bisecting each bracket.
/// Ascending. The scan is refined until `n` brackets are found, so clusters
/// closer than about `1e-6` of the spectral radius may be missed.
pub fn pencil_eigenvalues(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let frob = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let b_inv = inverse(b, n).expect("B must be invertible");
    let bound = frob(a) * frob(&b_inv) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let mut cells = 1024usize;
    loop {
        let h = 2.0 * bound / cells as f64;
        let mut roots = Vec::new();
        let mut lo = -bound;
        let mut f_lo = shifted_det(a, b, n, lo);
        for i in 1..=cells {
            let hi = if i == cells {
                bound
            } else {
                -bound + i as f64 * h
            };
            let f_hi = shifted_det(a, b, n, hi);
            if f_lo == 0.0 {
                roots.push(lo);
            } else if f_lo.signum() != f_hi.signum() && f_hi != 0.0 {
                roots.push(bisect(a, b, n, lo, hi, f_lo));
            }
            lo = hi;
            f_lo = f_hi;
        }
        if roots.len() >= n || cells >= 1 << 22 {
            roots.truncate(n);
            return roots;
        }
        cells *= 4;
    }
}

fn bisect(a: &[f64], b: &[f64], n: usize, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = shifted_det(a, b, n, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Random symmetric `A` and well-conditioned SPD `B`, both row-major.
pub fn random_pencil(rng: &mut SplitMix64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sym = |shift: f64| {
        let g: Vec<f64> = (0..n * n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = if shift > 0.0 {
                    (0..n).map(|k| g[k * n + i] * g[k * n + j]).sum::<f64>() / n as f64
                } else {
                    0.5 * (g[i * n + j] + g[j * n + i])
                };
            }
            m[i * n + i] += shift;
        }
        m
    };
    let a = sym(0.0);
    let b = sym(0.5);
    (a, b)
}

/// Wraps a raw matrix as an operator for the solver.
pub fn as_operator(entries: Vec<f64>, n: usize, measure: MeasureKind) -> OperatorMatrix {
    OperatorMatrix {
        n,
        entries,
        measure,
        basis: Basis::ShiftedLegendre,
        t_now: 0.0,
        tau: 1.0,
        pivot_floor: Vec::new(),
    }
}

/// Largest `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, err: f64, tol: f64) -> Self {
        Check {
            name,
            passed: err <= tol,
            detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
        }
    }
}

fn sample_stream(seed: u64) -> Result<Vec<Tick>> {
    let base = SteadyParams::new(0.5, 20.0, 50.0, 600.0, seed)
        .with_volatility(0.01)
        .generate()?;
    spike(&base, 300.0, 6.0, 20.0, 1.5)
}

fn check_basis_values() -> Check {
    let mut rng = SplitMix64::new(1);
    let mut err: f64 = 0.0;
    for basis in Basis::ALL {
        for _ in 0..20 {
            let x = match basis {
                Basis::Laguerre => -4.0 * rng.next_f64(),
                _ => rng.next_f64(),
            };
            let q = crate::basis::evaluate_all(basis, 10, x).expect("finite x");
            for (m, v) in q.iter().enumerate() {
                let r = basis_value(basis, m, x);
                err = err.max((v - r).abs() / r.abs().max(1.0));
            }
        }
    }
    Check::new("basis values vs closed forms", err, 1e-11)
}

fn check_operators() -> Result<Check> {
    let ticks = sample_stream(2)?;
    let t_now = ticks.last().map_or(0.0, |t| t.t);
    let tau = 150.0;
    let n = 6;
    let mut err: f64 = 0.0;
    for basis in Basis::ALL {
        let table = LinearizationTable::new(basis, n)?;
        let set = resample_set(&ticks, None, t_now, tau, basis, 2 * n - 1)?;
        for kind in MeasureKind::ALL {
            let m = matrix_from_moments(set.get(kind), n, &table)?;
            let direct = direct_operator(&ticks, None, t_now, tau, basis, n, kind);
            let scale = direct.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = m
                .entries
                .iter()
                .zip(&direct)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            err = err.max(diff / scale);
        }
    }
    Ok(Check::new(
        "operator matrices vs direct tick sums",
        err,
        1e-10,
    ))
}

fn check_pencils() -> Check {
    let mut rng = SplitMix64::new(3);
    let n = 8;
    let mut err: f64 = 0.0;
    for _ in 0..10 {
        let (a, b) = random_pencil(&mut rng, n);
        let oracle = pencil_eigenvalues(&a, &b, n);
        let Ok(spec) = solve_pencil(
            &as_operator(a, n, MeasureKind::VolumeDV),
            &as_operator(b, n, MeasureKind::TimeDt),
        ) else {
            return Check {
                name: "pencil eigenvalues vs determinant scan",
                passed: false,
                detail: "solver failed".into(),
            };
        };
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if oracle.len() != spec.lambdas.len() {
            err = f64::INFINITY;
            continue;
        }
        err = err.max(max_rel_diff(&spec.lambdas, &oracle, scale));
    }
    Check::new("pencil eigenvalues vs determinant scan", err, 1e-8)
}

fn check_indicators() -> Result<Vec<Check>> {
    let ticks = sample_stream(4)?;
    let t_now = ticks.last().map_or(0.0, |t| t.t);
    let tau = 200.0;
    let n = 5;
    let basis = Basis::Chebyshev;
    let table = LinearizationTable::new(basis, n)?;
    let set = resample_set(&ticks, None, t_now, tau, basis, 2 * n - 1)?;
    let s = evaluate_at(&set, n, &table, ticks.last().map_or(1.0, |t| t.p))?;
    let (p_tau, t_tau) = direct_ema(&ticks, t_now, tau);
    let ema_err = ((s.p_tau - p_tau) / p_tau)
        .abs()
        .max(((s.t_tau - t_tau) / t_tau).abs());

    // Top state recomputed by brute force Rayleigh ascent would depend on the
    // solver; instead weight the raw ticks with the state the solver found.
    let m_t = crate::operators::gram(&set.time, n, &table)?;
    let m_i = crate::operators::flow(&set.volume, n, &table)?;
    let spec = solve_pencil(&m_i, &m_t)?;
    let mut best = spec.top().clone();
    let mut best_age = f64::INFINITY;
    for (l, state) in spec.lambdas.iter().zip(&spec.states) {
        if spec.lambda_ih() - l <= crate::gev::TOP_TIE_TOL * spec.lambda_ih().abs() {
            let age = direct_psi_ratio(&ticks, t_now, tau, basis, &state.alpha, |t| t_now - t.t);
            if age < best_age {
                best_age = age;
                best = state.clone();
            }
        }
    }
    let p_direct = direct_psi_ratio(&ticks, t_now, tau, basis, &best.alpha, |t| t.p);
    let psi_err = ((s.p_ih - p_direct) / p_direct)
        .abs()
        .max(((s.p_aver - p_direct) / p_direct).abs())
        .max(((s.t_ih - best_age) / tau).abs());

    let flows: Vec<f64> = spec.lambdas.clone();
    let mut rng = SplitMix64::new(5);
    let mut bound_err: f64 = 0.0;
    for _ in 0..200 {
        let alpha: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let r = rayleigh(&WaveFunction { alpha, basis }, &m_i, &m_t)?;
        bound_err = bound_err.max(flows[0] - r).max(r - flows[n - 1]);
    }
    Ok(vec![
        Check::new("P_tau and T_tau vs raw tick sums", ema_err, 1e-10),
        Check::new(
            "P_IH, P_aver and T_IH vs psi^2-weighted tick sums",
            psi_err,
            1e-8,
        ),
        Check::new("Rayleigh quotients within the spectrum", bound_err, 1e-9),
    ])
}

fn check_incremental() -> Result<Check> {
    let ticks = sample_stream(6)?;
    let mut err: f64 = 0.0;
    for basis in [Basis::ShiftedLegendre, Basis::Chebyshev] {
        let config = EngineConfig::new(8, 120.0, basis);
        let a = run_series(
            &ticks,
            config.with_path(crate::MomentPath::Incremental),
            Grid::Fixed(25.0),
        )?;
        let b = run_series(
            &ticks,
            config.with_path(crate::MomentPath::Full),
            Grid::Fixed(25.0),
        )?;
        for ((_, x), (_, y)) in a.iter().zip(&b).skip(a.len() / 2) {
            if let (Ok(x), Ok(y)) = (x, y) {
                err = err.max(max_rel_diff(
                    &[x.p_tau, x.p_ih, x.t_tau, x.p_aver],
                    &[y.p_tau, y.p_ih, y.t_tau, y.p_aver],
                    1.0,
                ));
            }
        }
    }
    Ok(Check::new("incremental vs full resampling", err, 1e-7))
}

fn check_weights() -> Check {
    let err = [0.0, 0.3, 1.0, 2.5]
        .iter()
        .map(|&age| match omega(10.0 - age, 10.0, 1.0) {
            Ok(w) => (w - (-age).exp()).abs(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    Check::new("omega", err, 1e-15)
}

/// Runs every check. Takes well under a second in release builds.
pub fn run() -> Vec<Check> {
    let mut out = vec![check_weights(), check_basis_values()];
    let failed = |name: &'static str, e: crate::Error| Check {
        name,
        passed: false,
        detail: e.to_string(),
    };
    out.push(
        check_operators().unwrap_or_else(|e| failed("operator matrices vs direct tick sums", e)),
    );
    out.push(check_pencils());
    match check_indicators() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(failed("indicators vs raw tick sums", e)),
    }
    out.push(check_incremental().unwrap_or_else(|e| failed("incremental vs full resampling", e)));
    out
}
