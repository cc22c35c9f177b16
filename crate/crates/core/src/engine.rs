//! Streaming driver: owns the tick history and the moment state, and
//! evaluates indicators at the current `t_now`.

use std::sync::Arc;

use log::debug;

use crate::basis::{Basis, LinearizationTable};
use crate::error::{Error, Result};
use crate::indicators::{evaluate_at, IndicatorSample};
use crate::measure::{resample_set, IncrementalMoments, MomentSet, Tick, PRUNE_AGE_TAUS};

/// Largest `n` for which [`MomentPath::Auto`] keeps moments incrementally.
pub const INCREMENTAL_MAX_N: usize = 12;
pub const DEFAULT_TAU: f64 = 256.0;
pub const DEFAULT_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentPath {
    /// Incremental for `n <= INCREMENTAL_MAX_N`, full resampling above.
    Auto,
    Incremental,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub n: usize,
    pub tau: f64,
    pub basis: Basis,
    pub path: MomentPath,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            tau: DEFAULT_TAU,
            basis: Basis::ShiftedLegendre,
            path: MomentPath::Auto,
        }
    }
}

impl EngineConfig {
    pub fn new(n: usize, tau: f64, basis: Basis) -> Self {
        Self {
            n,
            tau,
            basis,
            path: MomentPath::Auto,
        }
    }

    pub fn with_path(mut self, path: MomentPath) -> Self {
        self.path = path;
        self
    }

    pub fn orders(&self) -> usize {
        2 * self.n - 1
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    table: Arc<LinearizationTable>,
    // Retained ticks are history[start..].
    history: Vec<Tick>,
    start: usize,
    // Time of the tick preceding history[start], if one was seen.
    prev_t: Option<f64>,
    incremental: Option<IncrementalMoments>,
    t_now: Option<f64>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.basis.check_n(config.n)?;
        if !(config.tau.is_finite() && config.tau > 0.0) {
            return Err(Error::input(format!(
                "tau must be finite and > 0, got {}",
                config.tau
            )));
        }
        let table = LinearizationTable::shared(config.basis, config.n)?;
        Ok(Self {
            config,
            table,
            history: Vec::new(),
            start: 0,
            prev_t: None,
            incremental: None,
            t_now: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn table(&self) -> &LinearizationTable {
        &self.table
    }

    pub fn uses_incremental(&self) -> bool {
        match self.config.path {
            MomentPath::Auto => self.config.n <= INCREMENTAL_MAX_N,
            MomentPath::Incremental => true,
            MomentPath::Full => false,
        }
    }

    pub fn t_now(&self) -> Option<f64> {
        self.t_now
    }

    /// Ticks still inside the window (older ones have `omega < 1e-16`).
    pub fn window(&self) -> &[Tick] {
        &self.history[self.start..]
    }

    pub fn last_price(&self) -> Option<f64> {
        self.window().last().map(|t| t.p)
    }

    /// Appends a trade and moves `t_now` to its timestamp.
    pub fn push(&mut self, tick: Tick) -> Result<()> {
        tick.validate()?;
        if let Some(now) = self.t_now {
            if tick.t < now {
                return Err(Error::input(format!(
                    "tick at t = {} precedes current time {now}",
                    tick.t
                )));
            }
        }
        if self.uses_incremental() {
            let state = match self.incremental.as_mut() {
                Some(s) => s,
                None => self.incremental.insert(IncrementalMoments::new(
                    self.config.basis,
                    self.config.tau,
                    tick.t,
                    self.config.orders(),
                )?),
            };
            state.push(&tick)?;
        }
        self.history.push(tick);
        self.t_now = Some(tick.t);
        self.prune();
        Ok(())
    }

    /// Moves `t_now` forward without new trades.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let now = self.t_now.ok_or(Error::EmptyWindow)?;
        if !(t >= now) {
            return Err(Error::input(format!("time going backwards: {t} < {now}")));
        }
        if let Some(state) = self.incremental.as_mut() {
            state.advance(&[], t)?;
        }
        self.t_now = Some(t);
        self.prune();
        Ok(())
    }

    fn prune(&mut self) {
        let Some(now) = self.t_now else { return };
        let horizon = now - PRUNE_AGE_TAUS * self.config.tau;
        let keep_from = self.history[self.start..]
            .iter()
            .position(|t| t.t >= horizon)
            .map_or(self.history.len(), |p| self.start + p);
        if keep_from > self.start {
            self.prev_t = Some(self.history[keep_from - 1].t);
            self.start = keep_from;
        }
        if self.start > 4096 && self.start * 2 > self.history.len() {
            self.history.drain(..self.start);
            self.start = 0;
        }
    }

    pub fn moments(&self) -> Result<MomentSet> {
        let now = self.t_now.ok_or(Error::EmptyWindow)?;
        match &self.incremental {
            Some(state) => Ok(state.snapshot()),
            None => resample_set(
                self.window(),
                self.prev_t,
                now,
                self.config.tau,
                self.config.basis,
                self.config.orders(),
            ),
        }
    }

    pub fn evaluate(&self) -> Result<IndicatorSample> {
        let p_last = self.last_price().ok_or(Error::EmptyWindow)?;
        let moments = self.moments()?;
        evaluate_at(&moments, self.config.n, &self.table, p_last)
    }
}

/// Evaluation schedule for batch runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    /// After every trade, at the trade's timestamp.
    PerTick,
    /// Every `step` seconds starting at the first trade.
    Fixed(f64),
}

/// Runs the engine over a sorted tick series, one result per evaluation time.
pub fn run_series(
    ticks: &[Tick],
    config: EngineConfig,
    grid: Grid,
) -> Result<Vec<(f64, Result<IndicatorSample>)>> {
    let mut engine = Engine::new(config)?;
    let mut out = Vec::new();
    match grid {
        Grid::PerTick => {
            for tick in ticks {
                engine.push(*tick)?;
                out.push((tick.t, engine.evaluate()));
            }
        }
        Grid::Fixed(step) => {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::input(format!("grid step must be > 0, got {step}")));
            }
            let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
                return Ok(out);
            };
            let mut i = 0;
            let mut k = 0u64;
            loop {
                let t = first.t + k as f64 * step;
                if t > last.t {
                    break;
                }
                while i < ticks.len() && ticks[i].t <= t {
                    engine.push(ticks[i])?;
                    i += 1;
                }
                engine.advance_to(t)?;
                out.push((t, engine.evaluate()));
                k += 1;
            }
        }
    }
    debug!("evaluated {} samples", out.len());
    Ok(out)
}
