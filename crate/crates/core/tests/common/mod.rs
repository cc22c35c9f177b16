#![allow(dead_code)]

use psima::synth::{spike, SplitMix64, SteadyParams};
use psima::Tick;

pub const TAU: f64 = 256.0;

/// Steady flow of 50 sh/s with an old, very large burst at `t* - 10 tau`
/// (2000x the base flow for 10 s) and, from `t*` on, a new regime at five
/// times the base flow lasting past the end of the stream.
pub struct TwoSpike {
    pub ticks: Vec<Tick>,
    pub t_star: f64,
    pub old_spike: f64,
}

pub fn two_spike() -> TwoSpike {
    let t_star = 20.0 * TAU;
    let old_spike = t_star - 10.0 * TAU;
    let base = SteadyParams::new(1.0, 50.0, 100.0, 24.0 * TAU, 5)
        .generate()
        .unwrap();
    let s = spike(&base, old_spike, 2000.0, 10.0, 0.0).unwrap();
    let ticks = spike(&s, t_star, 5.0, 10.0 * TAU, 0.0).unwrap();
    TwoSpike {
        ticks,
        t_star,
        old_spike,
    }
}

/// Light trading (1 sh/s) with one burst of 100x flow for 10 s at
/// `12 tau`, followed by 4 tau of the same light trading.
pub struct Isolated {
    pub ticks: Vec<Tick>,
    pub start: f64,
    pub end: f64,
    pub price: f64,
}

pub fn isolated_spike() -> Isolated {
    let start = 12.0 * TAU;
    let base = SteadyParams::new(1.0, 1.0, 100.0, 16.0 * TAU, 9)
        .generate()
        .unwrap();
    let ticks = spike(&base, start, 100.0, 10.0, 7.0).unwrap();
    let end = ticks
        .iter()
        .rfind(|t| t.t >= start && t.t < start + 10.0)
        .unwrap()
        .t;
    Isolated {
        ticks,
        start,
        end,
        price: 107.0,
    }
}

/// Random walk with bursty volume, for property checks.
pub fn random_stream(seed: u64, len: usize, mean_gap: f64) -> Vec<Tick> {
    let mut rng = SplitMix64::new(seed);
    let mut t = 0.0;
    let mut p = 50.0;
    (0..len)
        .map(|_| {
            t += -(1.0 - rng.next_f64()).ln() * mean_gap;
            p *= (0.01 * (2.0 * rng.next_f64() - 1.0)).exp();
            let dv = if rng.next_f64() < 0.1 {
                200.0 * rng.next_f64()
            } else {
                10.0 * rng.next_f64()
            };
            Tick::new(t, p, dv).unwrap()
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares fit of `a + b exp(-s/theta)`: linear in `(a, b)` for each
/// `theta` on a geometric grid over `[lo, hi]`, best residual wins.
/// Returns `(a, b, theta, rms)`.
pub fn fit_relaxation(s: &[f64], y: &[f64], lo: f64, hi: f64) -> (f64, f64, f64, f64) {
    let n = s.len() as f64;
    let solve = |theta: f64| {
        let e: Vec<f64> = s.iter().map(|v| (-v / theta).exp()).collect();
        let se: f64 = e.iter().sum();
        let see: f64 = e.iter().map(|v| v * v).sum();
        let sy: f64 = y.iter().sum();
        let sey: f64 = e.iter().zip(y).map(|(a, b)| a * b).sum();
        let det = n * see - se * se;
        let a = (see * sy - se * sey) / det;
        let b = (n * sey - se * sy) / det;
        let r: f64 = e
            .iter()
            .zip(y)
            .map(|(ev, yv)| (a + b * ev - yv).powi(2))
            .sum();
        (a, b, r)
    };
    let mut best = (0.0, 0.0, lo, f64::INFINITY);
    let mut theta = lo;
    while theta <= hi {
        let (a, b, r) = solve(theta);
        if r < best.3 {
            best = (a, b, theta, r);
        }
        theta *= 1.001;
    }
    (best.0, best.1, best.2, (best.3 / n).sqrt())
}
