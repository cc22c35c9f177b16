//! Observables evaluated at one `t_now`.
//!
//! * `P_tau = <pI>/<I>`: regular exponential moving average of price.
//! * `P_IH = <psi|pI|psi>/<psi|I|psi>` in the top execution-flow state.
//! * `lambda_IH`, `lambda_IL`: extreme eigenvalues of the flow pencil.
//! * `T_IH`, `T_tau`: average age `t_now - t` of traded volume, in the
//!   top state and under the plain exponential weight.
//! * `P_aver`: price averaged with weight `dV Phi(x) omega`, `Phi = psi_IH^2`,
//!   evaluated from the moment vectors through the expansion of `Phi`.

use crate::basis::{square_expansion, LinearizationTable};
use crate::error::{Error, Result};
use crate::gev::{rayleigh, solve_pencil, SpectralDecomposition, WaveFunction};
use crate::measure::{MomentSet, MomentVector};
use crate::operators::{flow, gram, weighted, OperatorMatrix};

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSample {
    pub t_now: f64,
    pub p_last: f64,
    pub p_tau: f64,
    pub p_ih: f64,
    pub lambda_ih: f64,
    pub lambda_il: f64,
    pub t_ih: f64,
    pub t_tau: f64,
    pub p_aver: f64,
    pub effective_n: usize,
    /// `sqrt(<p^2 I>/<I> - P_tau^2)`.
    pub p_tau_std: f64,
}

fn volume_mass(moments: &MomentVector) -> Result<f64> {
    let mass = moments.mass();
    if mass > 0.0 {
        Ok(mass)
    } else {
        Err(Error::NoVolume)
    }
}

/// `P_tau = <Q_0 pI>/<Q_0 I>`.
pub fn ema_price(price_volume: &MomentVector, volume: &MomentVector) -> Result<f64> {
    Ok(price_volume.mass() / volume_mass(volume)?)
}

/// `T_tau = <(t_now - t) I>/<I>`.
pub fn age_tau(age_volume: &MomentVector, volume: &MomentVector) -> Result<f64> {
    Ok(age_volume.mass() / volume_mass(volume)?)
}

/// EMA standard deviation of price under the same weight as `P_tau`.
pub fn ema_price_std(
    price_sq_mass: f64,
    price_volume: &MomentVector,
    volume: &MomentVector,
) -> Result<f64> {
    let mass = volume_mass(volume)?;
    let mean = price_volume.mass() / mass;
    Ok((price_sq_mass / mass - mean * mean).max(0.0).sqrt())
}

/// `<psi|num|psi>/<psi|den|psi>`.
pub fn f_psi(psi: &WaveFunction, num: &OperatorMatrix, den: &OperatorMatrix) -> Result<f64> {
    rayleigh(psi, num, den)
}

/// `P_IH` with `num = <Q_j|pI|Q_k>`, `den = <Q_j|I|Q_k>`.
pub fn price_ih(
    spec: &SpectralDecomposition,
    m_pi: &OperatorMatrix,
    m_i: &OperatorMatrix,
) -> Result<f64> {
    f_psi(spec.top(), m_pi, m_i)
}

/// `T_IH` with `num = <Q_j|(t_now - t)I|Q_k>`.
pub fn age_ih(
    spec: &SpectralDecomposition,
    m_age_i: &OperatorMatrix,
    m_i: &OperatorMatrix,
) -> Result<f64> {
    f_psi(spec.top(), m_age_i, m_i)
}

/// `P_aver = sum_m phi_m <Q_m pI> / sum_m phi_m <Q_m I>` with
/// `psi_IH^2 = sum_m phi_m Q_m`.
pub fn phi_average(
    spec: &SpectralDecomposition,
    price_volume: &MomentVector,
    volume: &MomentVector,
    table: &LinearizationTable,
) -> Result<f64> {
    phi_weighted_ratio(spec.top(), price_volume, volume, table)
}

pub(crate) fn phi_weighted_ratio(
    psi: &WaveFunction,
    num: &MomentVector,
    den: &MomentVector,
    table: &LinearizationTable,
) -> Result<f64> {
    let phi = square_expansion(&psi.alpha, table);
    if num.orders() < phi.len() || den.orders() < phi.len() {
        return Err(Error::input("moment vectors too short for psi^2 expansion"));
    }
    let n: f64 = phi.iter().zip(&num.values).map(|(a, b)| a * b).sum();
    let d: f64 = phi.iter().zip(&den.values).map(|(a, b)| a * b).sum();
    if !(d > 0.0) && !(d < 0.0) {
        return Err(Error::DegenerateState(d));
    }
    Ok(n / d)
}

/// Everything derived from one moment snapshot.
pub fn evaluate_at(
    moments: &MomentSet,
    n: usize,
    table: &LinearizationTable,
    p_last: f64,
) -> Result<IndicatorSample> {
    if moments.volume.orders() < 2 * n - 1 {
        return Err(Error::input(format!(
            "{} moment orders available, {} needed for n = {n}",
            moments.volume.orders(),
            2 * n - 1
        )));
    }
    let volume_mass = moments.volume.mass();
    let time_mass = moments.time.mass();
    if !(volume_mass > 0.0) {
        return if time_mass > 0.0 {
            Err(Error::NoVolume)
        } else {
            Err(Error::EmptyWindow)
        };
    }
    let p_tau = ema_price(&moments.price_volume, &moments.volume)?;
    let t_tau = age_tau(&moments.age_volume, &moments.volume)?;
    let p_tau_std = ema_price_std(
        moments.price_sq_mass,
        &moments.price_volume,
        &moments.volume,
    )?;

    let m_t = gram(&moments.time, n, table)?;
    let m_i = flow(&moments.volume, n, table)?;
    let m_pi = weighted(&moments.price_volume, n, table)?;
    let m_age = weighted(&moments.age_volume, n, table)?;

    let mut spec = match solve_pencil(&m_i, &m_t) {
        Ok(spec) => spec,
        Err(Error::EmptyWindow) => {
            // Volume without time-measure mass (e.g. a lone first trade):
            // only the constant state exists and its flow is unbounded.
            return Ok(IndicatorSample {
                t_now: moments.t_now(),
                p_last,
                p_tau,
                p_ih: p_tau,
                lambda_ih: f64::INFINITY,
                lambda_il: f64::INFINITY,
                t_ih: t_tau,
                t_tau,
                p_aver: p_tau,
                effective_n: 1,
                p_tau_std,
            });
        }
        Err(e) => return Err(e),
    };
    spec.resolve_top_tie(|psi| {
        let den = psi.expectation(&m_i);
        if den > 0.0 {
            psi.expectation(&m_age) / den
        } else {
            f64::INFINITY
        }
    });

    let p_ih = price_ih(&spec, &m_pi, &m_i)?;
    let t_ih = age_ih(&spec, &m_age, &m_i)?;
    let p_aver = phi_average(&spec, &moments.price_volume, &moments.volume, table)?;
    let sample = IndicatorSample {
        t_now: moments.t_now(),
        p_last,
        p_tau,
        p_ih,
        lambda_ih: spec.lambda_ih(),
        lambda_il: spec.lambda_il(),
        t_ih,
        t_tau,
        p_aver,
        effective_n: spec.effective_n,
        p_tau_std,
    };
    if [p_ih, t_ih, p_aver, sample.lambda_ih, sample.lambda_il]
        .iter()
        .any(|v| v.is_nan())
    {
        return Err(Error::DegenerateState(f64::NAN));
    }
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;
    use crate::measure::{resample_set, Tick};

    #[test]
    fn two_equal_ticks_average() {
        let ticks = [
            Tick::new(100.0, 10.0, 5.0).unwrap(),
            Tick::new(100.0, 20.0, 5.0).unwrap(),
        ];
        let set = resample_set(&ticks, None, 100.0, 30.0, Basis::ShiftedLegendre, 3).unwrap();
        assert_eq!(ema_price(&set.price_volume, &set.volume).unwrap(), 15.0);
    }

    #[test]
    fn zero_volume_is_an_error() {
        let ticks = [
            Tick::new(0.0, 10.0, 0.0).unwrap(),
            Tick::new(1.0, 10.0, 0.0).unwrap(),
        ];
        let set = resample_set(&ticks, None, 1.0, 30.0, Basis::ShiftedLegendre, 3).unwrap();
        assert_eq!(
            ema_price(&set.price_volume, &set.volume),
            Err(Error::NoVolume)
        );
        let table = LinearizationTable::new(Basis::ShiftedLegendre, 2).unwrap();
        assert_eq!(evaluate_at(&set, 2, &table, 10.0), Err(Error::NoVolume));
    }

    #[test]
    fn single_tick_history() {
        let ticks = [Tick::new(3.0, 42.0, 7.0).unwrap()];
        let set = resample_set(&ticks, None, 3.0, 256.0, Basis::Chebyshev, 23).unwrap();
        let table = LinearizationTable::new(Basis::Chebyshev, 12).unwrap();
        let s = evaluate_at(&set, 12, &table, 42.0).unwrap();
        assert_eq!((s.p_tau, s.p_ih, s.p_aver), (42.0, 42.0, 42.0));
        assert_eq!((s.t_ih, s.t_tau), (0.0, 0.0));
        assert_eq!(s.effective_n, 1);
    }

    #[test]
    fn psi_squared_expansion_matches_pointwise() {
        let table = LinearizationTable::new(Basis::ShiftedLegendre, 5).unwrap();
        let psi = WaveFunction {
            alpha: vec![0.3, -1.2, 0.7, 0.05, -0.4],
            basis: Basis::ShiftedLegendre,
        };
        let phi = square_expansion(&psi.alpha, &table);
        for x in [0.0, 0.2, 0.65, 1.0] {
            let mut q = Vec::new();
            Basis::ShiftedLegendre.evaluate_into(x, phi.len(), &mut q);
            let lhs = psi.evaluate(x).powi(2);
            let rhs: f64 = phi.iter().zip(&q).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
