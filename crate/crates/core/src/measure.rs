//! Exponentially weighted moments `<Q_m f>` over a tick history.
//!
//! Four measures are tracked:
//!
//! * [`MeasureKind::TimeDt`]: `omega dt`, sampled as `omega(t_l) (t_l - t_{l-1})`;
//! * [`MeasureKind::VolumeDV`]: `omega dV`, sampled as `omega(t_l) dV_l`;
//! * [`MeasureKind::PriceVolume`]: `p omega dV`;
//! * [`MeasureKind::AgeVolume`]: `(t_now - t) omega dV`.
//!
//! The first tick of a history has no predecessor and contributes a zero
//! interval to the time measure.

use crate::basis::{affine_substitution, Basis};
use crate::error::{Error, Result};

/// One trade: time in seconds, execution price, shares traded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub p: f64,
    pub dv: f64,
}

impl Tick {
    pub fn new(t: f64, p: f64, dv: f64) -> Result<Self> {
        let tick = Tick { t, p, dv };
        tick.validate()?;
        Ok(tick)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::input(format!("non-finite time {}", self.t)));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::input(format!(
                "price must be finite and > 0, got {}",
                self.p
            )));
        }
        if !(self.dv.is_finite() && self.dv >= 0.0) {
            return Err(Error::input(format!(
                "shares must be finite and >= 0, got {}",
                self.dv
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureKind {
    TimeDt,
    VolumeDV,
    PriceVolume,
    AgeVolume,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 4] = [
        MeasureKind::TimeDt,
        MeasureKind::VolumeDV,
        MeasureKind::PriceVolume,
        MeasureKind::AgeVolume,
    ];

    fn index(self) -> usize {
        match self {
            MeasureKind::TimeDt => 0,
            MeasureKind::VolumeDV => 1,
            MeasureKind::PriceVolume => 2,
            MeasureKind::AgeVolume => 3,
        }
    }

    /// Per-tick integrand weight (before `omega` and `Q_m`).
    #[inline]
    fn weight(self, tick: &Tick, interval: f64, t_now: f64) -> f64 {
        match self {
            MeasureKind::TimeDt => interval,
            MeasureKind::VolumeDV => tick.dv,
            MeasureKind::PriceVolume => tick.p * tick.dv,
            MeasureKind::AgeVolume => (t_now - tick.t) * tick.dv,
        }
    }
}

/// `<Q_m f>` for `m = 0 .. orders`, under one measure at one `t_now`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub basis: Basis,
    pub tau: f64,
    pub t_now: f64,
    pub measure: MeasureKind,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn zeros(basis: Basis, tau: f64, t_now: f64, measure: MeasureKind, orders: usize) -> Self {
        Self {
            basis,
            tau,
            t_now,
            measure,
            values: vec![0.0; orders],
        }
    }

    pub fn orders(&self) -> usize {
        self.values.len()
    }

    /// Zeroth moment: the `omega`-weighted mass of the measure.
    pub fn mass(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// The moment vectors of all four measures plus the `p^2 dV` mass used by
/// the EMA variance.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub time: MomentVector,
    pub volume: MomentVector,
    pub price_volume: MomentVector,
    pub age_volume: MomentVector,
    pub price_sq_mass: f64,
}

impl MomentSet {
    pub fn get(&self, kind: MeasureKind) -> &MomentVector {
        match kind {
            MeasureKind::TimeDt => &self.time,
            MeasureKind::VolumeDV => &self.volume,
            MeasureKind::PriceVolume => &self.price_volume,
            MeasureKind::AgeVolume => &self.age_volume,
        }
    }

    pub fn t_now(&self) -> f64 {
        self.time.t_now
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!(
            "tau must be finite and > 0, got {tau}"
        )))
    }
}

/// Basis argument `x(t)`.
pub fn x_of_t(basis: Basis, t: f64, t_now: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(match basis {
        Basis::Laguerre => (t - t_now) / tau,
        _ => (-(t_now - t) / tau).exp(),
    })
}

/// `omega(t) = exp(-(t_now - t)/tau)`.
pub fn omega(t: f64, t_now: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok((-(t_now - t) / tau).exp())
}

fn check_sorted(ticks: &[Tick], prev_t: Option<f64>, t_now: f64) -> Result<()> {
    let mut last = prev_t.unwrap_or(f64::NEG_INFINITY);
    for (i, tick) in ticks.iter().enumerate() {
        if tick.t < last {
            return Err(Error::input(format!(
                "tick {i} at t = {} precedes its predecessor at t = {last}",
                tick.t
            )));
        }
        if tick.t > t_now {
            return Err(Error::input(format!(
                "tick {i} at t = {} lies after t_now = {t_now}",
                tick.t
            )));
        }
        last = tick.t;
    }
    Ok(())
}

/// Direct sampling of one measure over every tick.
pub fn resample_full(
    ticks: &[Tick],
    t_now: f64,
    tau: f64,
    basis: Basis,
    orders: usize,
    measure: MeasureKind,
) -> Result<MomentVector> {
    resample_full_after(ticks, None, t_now, tau, basis, orders, measure)
}

/// As [`resample_full`], with an explicit predecessor time for the first
/// tick (a pruned history still knows the interval of its oldest tick).
pub fn resample_full_after(
    ticks: &[Tick],
    prev_t: Option<f64>,
    t_now: f64,
    tau: f64,
    basis: Basis,
    orders: usize,
    measure: MeasureKind,
) -> Result<MomentVector> {
    let set = resample_set(ticks, prev_t, t_now, tau, basis, orders)?;
    Ok(set.get(measure).clone())
}

/// All four measures in one pass.
pub fn resample_set(
    ticks: &[Tick],
    prev_t: Option<f64>,
    t_now: f64,
    tau: f64,
    basis: Basis,
    orders: usize,
) -> Result<MomentSet> {
    check_tau(tau)?;
    if !t_now.is_finite() {
        return Err(Error::input("t_now must be finite"));
    }
    check_sorted(ticks, prev_t, t_now)?;
    let mut acc = [
        vec![0.0; orders],
        vec![0.0; orders],
        vec![0.0; orders],
        vec![0.0; orders],
    ];
    let mut price_sq = 0.0;
    let mut q = Vec::with_capacity(orders);
    let mut prev = prev_t;
    for tick in ticks {
        let interval = prev.map_or(0.0, |p| tick.t - p);
        prev = Some(tick.t);
        let w = (-(t_now - tick.t) / tau).exp();
        if w == 0.0 {
            continue;
        }
        let x = match basis {
            Basis::Laguerre => (tick.t - t_now) / tau,
            _ => w,
        };
        basis.evaluate_into(x, orders, &mut q);
        for kind in MeasureKind::ALL {
            let f = kind.weight(tick, interval, t_now) * w;
            if f == 0.0 {
                continue;
            }
            for (a, qm) in acc[kind.index()].iter_mut().zip(&q) {
                *a += f * qm;
            }
        }
        price_sq += w * tick.p * tick.p * tick.dv;
    }
    let [time, volume, price_volume, age_volume] = acc;
    let mk = |measure, values| MomentVector {
        basis,
        tau,
        t_now,
        measure,
        values,
    };
    Ok(MomentSet {
        time: mk(MeasureKind::TimeDt, time),
        volume: mk(MeasureKind::VolumeDV, volume),
        price_volume: mk(MeasureKind::PriceVolume, price_volume),
        age_volume: mk(MeasureKind::AgeVolume, age_volume),
        price_sq_mass: price_sq,
    })
}

/// Streaming moment state, advanced tick by tick without resampling.
///
/// Moving `t_now` forward by `delta` rescales the basis argument of every
/// past tick (`x -> r x` with `r = exp(-delta/tau)` for the exponential
/// bases, `x -> x - delta/tau` for Laguerre) and multiplies `omega` by
/// `exp(-delta/tau)`. Both are affine maps of the recurrence variable, so
/// the basis-form moments transform through a lower-triangular matrix built
/// from the recurrence itself. The age measure also picks up `delta` times
/// the volume moments.
#[derive(Debug, Clone)]
pub struct IncrementalMoments {
    basis: Basis,
    tau: f64,
    t_now: f64,
    last_t: Option<f64>,
    values: [Vec<f64>; 4],
    price_sq_mass: f64,
    // Contribution of a tick at age zero: Q_m(x(t_now)).
    q_now: Vec<f64>,
    scratch: Vec<f64>,
}

impl IncrementalMoments {
    pub fn new(basis: Basis, tau: f64, t_now: f64, orders: usize) -> Result<Self> {
        check_tau(tau)?;
        let x_now = match basis {
            Basis::Laguerre => 0.0,
            _ => 1.0,
        };
        let mut q_now = Vec::new();
        basis.evaluate_into(x_now, orders, &mut q_now);
        Ok(Self {
            basis,
            tau,
            t_now,
            last_t: None,
            values: std::array::from_fn(|_| vec![0.0; orders]),
            price_sq_mass: 0.0,
            q_now,
            scratch: vec![0.0; orders],
        })
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    pub fn orders(&self) -> usize {
        self.q_now.len()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances to `new_t_now`, folding in `new_ticks` (sorted, all within
    /// `(t_now, new_t_now]`, or at `t_now` itself for simultaneous trades).
    pub fn advance(&mut self, new_ticks: &[Tick], new_t_now: f64) -> Result<()> {
        if !(new_t_now >= self.t_now) {
            return Err(Error::input(format!(
                "time going backwards: {new_t_now} < {}",
                self.t_now
            )));
        }
        for tick in new_ticks {
            self.push(tick)?;
        }
        self.shift_to(new_t_now)
    }

    /// Adds one tick at its own timestamp, moving `t_now` up to it.
    pub fn push(&mut self, tick: &Tick) -> Result<()> {
        tick.validate()?;
        if tick.t < self.t_now {
            return Err(Error::input(format!(
                "tick at t = {} precedes state time {}",
                tick.t, self.t_now
            )));
        }
        self.shift_to(tick.t)?;
        let interval = self.last_t.map_or(0.0, |p| tick.t - p);
        self.last_t = Some(tick.t);
        for kind in MeasureKind::ALL {
            let f = kind.weight(tick, interval, tick.t);
            if f == 0.0 {
                continue;
            }
            for (v, q) in self.values[kind.index()].iter_mut().zip(&self.q_now) {
                *v += f * q;
            }
        }
        self.price_sq_mass += tick.p * tick.p * tick.dv;
        Ok(())
    }

    fn shift_to(&mut self, new_t_now: f64) -> Result<()> {
        if !new_t_now.is_finite() {
            return Err(Error::input("t_now must be finite"));
        }
        let delta = new_t_now - self.t_now;
        if delta < 0.0 {
            return Err(Error::input(format!(
                "time going backwards: {new_t_now} < {}",
                self.t_now
            )));
        }
        if delta == 0.0 {
            return Ok(());
        }
        let decay = (-delta / self.tau).exp();
        let (a, b) = match self.basis {
            Basis::Laguerre => (1.0, delta / self.tau),
            _ => (decay, decay - 1.0),
        };
        let orders = self.orders();
        let s = affine_substitution(self.basis, orders, a, b);

        // Age moments: (t_now + delta - t) dV = age dV + delta dV.
        let (head, tail) = self.values.split_at_mut(3);
        for (age, vol) in tail[0].iter_mut().zip(&head[1]) {
            *age += delta * vol;
        }
        for values in self.values.iter_mut() {
            for m in (0..orders).rev() {
                let row = &s[m * orders..m * orders + m + 1];
                self.scratch[m] = decay
                    * row
                        .iter()
                        .zip(values.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
            values.copy_from_slice(&self.scratch);
        }
        self.price_sq_mass *= decay;
        self.t_now = new_t_now;
        Ok(())
    }

    pub fn snapshot(&self) -> MomentSet {
        let mk = |kind: MeasureKind| MomentVector {
            basis: self.basis,
            tau: self.tau,
            t_now: self.t_now,
            measure: kind,
            values: self.values[kind.index()].clone(),
        };
        MomentSet {
            time: mk(MeasureKind::TimeDt),
            volume: mk(MeasureKind::VolumeDV),
            price_volume: mk(MeasureKind::PriceVolume),
            age_volume: mk(MeasureKind::AgeVolume),
            price_sq_mass: self.price_sq_mass,
        }
    }
}

/// Age beyond which `omega < 1e-16`, in units of `tau`.
pub const PRUNE_AGE_TAUS: f64 = 36.841_361_487_904_734; // ln(1e16)
