//! Deterministic synthetic trade streams.
//!
//! Arrivals are Poisson; every draw comes from SplitMix64 so the streams are
//! reproducible bit for bit in any language:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15            (wrapping u64)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB      (wrapping)
//! z = z ^ (z >> 31)
//! u = (z >> 11) * 2^-53                         (uniform in [0, 1))
//! ```
//!
//! Each trade consumes two draws: `gap = -ln(1 - u1) / rate`, then `u2`
//! for the price step `p *= exp(volatility * sqrt(3 gap) * (2 u2 - 1))`.
//! Trade size is `flow * gap`, so the traded volume integrates the flow
//! exactly up to the last trade.

use crate::error::{Error, Result};
use crate::measure::Tick;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Parameters of a steady Poisson stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyParams {
    /// Trades per second.
    pub rate: f64,
    /// Shares per second.
    pub flow: f64,
    pub price: f64,
    pub duration: f64,
    pub seed: u64,
    pub start: f64,
    /// Log-price diffusion per sqrt(second); zero keeps the price constant.
    pub volatility: f64,
}

impl SteadyParams {
    pub fn new(rate: f64, flow: f64, price: f64, duration: f64, seed: u64) -> Self {
        Self {
            rate,
            flow,
            price,
            duration,
            seed,
            start: 0.0,
            volatility: 0.0,
        }
    }

    pub fn starting_at(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn with_volatility(mut self, volatility: f64) -> Self {
        self.volatility = volatility;
        self
    }

    pub fn generate(&self) -> Result<Vec<Tick>> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{what} must be finite and > 0, got {v}"
                )))
            }
        };
        positive(self.rate, "rate")?;
        positive(self.price, "price")?;
        positive(self.duration, "duration")?;
        if !(self.flow.is_finite() && self.flow >= 0.0) {
            return Err(Error::input(format!(
                "flow must be >= 0, got {}",
                self.flow
            )));
        }
        if !(self.volatility.is_finite() && self.volatility >= 0.0) {
            return Err(Error::input("volatility must be >= 0"));
        }
        if !self.start.is_finite() {
            return Err(Error::input("start must be finite"));
        }

        let mut rng = SplitMix64::new(self.seed);
        let end = self.start + self.duration;
        let mut t = self.start;
        let mut p = self.price;
        let mut out = Vec::with_capacity((self.rate * self.duration * 1.1) as usize + 16);
        loop {
            let gap = -(1.0 - rng.next_f64()).ln() / self.rate;
            let step = 2.0 * rng.next_f64() - 1.0;
            if t + gap > end {
                break;
            }
            t += gap;
            p *= (self.volatility * (3.0 * gap).sqrt() * step).exp();
            out.push(Tick {
                t,
                p,
                dv: self.flow * gap,
            });
        }
        Ok(out)
    }
}

/// Steady stream at constant price starting at `t = 0`.
pub fn steady(rate: f64, flow: f64, price: f64, duration: f64, seed: u64) -> Result<Vec<Tick>> {
    SteadyParams::new(rate, flow, price, duration, seed).generate()
}

/// Multiplies the flow by `magnitude` on `[at, at + width)` and shifts the
/// price there by `price_shift`.
pub fn spike(
    base: &[Tick],
    at: f64,
    magnitude: f64,
    width: f64,
    price_shift: f64,
) -> Result<Vec<Tick>> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::input(format!(
            "spike width must be > 0, got {width}"
        )));
    }
    if !at.is_finite() || !price_shift.is_finite() {
        return Err(Error::input(
            "spike position and price shift must be finite",
        ));
    }
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(Error::input(format!(
            "spike magnitude {magnitude} would make the flow negative"
        )));
    }
    base.iter()
        .map(|tick| {
            if tick.t >= at && tick.t < at + width {
                Tick::new(tick.t, tick.p + price_shift, tick.dv * magnitude)
            } else {
                Ok(*tick)
            }
        })
        .collect()
}
