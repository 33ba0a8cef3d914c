//! Fractional delay by a 64-tap Blackman-windowed sinc, tabulated over 1024
//! sub-sample phases.

use std::f64::consts::PI;

pub const TAPS: usize = 64;
/// Tap `i` weights input sample `n - n0 - (i - CENTER)`.
const CENTER: i64 = 31;
const PHASES: usize = 1024;

#[derive(Debug, Clone)]
pub struct FracDelayTable {
    rows: Vec<[f64; TAPS]>,
}

impl Default for FracDelayTable {
    fn default() -> Self {
        Self::new()
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

fn blackman(t: f64) -> f64 {
    let half = (TAPS / 2) as f64;
    if t.abs() > half {
        return 0.0;
    }
    let a = PI * t / half;
    0.42 + 0.5 * a.cos() + 0.08 * (2.0 * a).cos()
}

impl FracDelayTable {
    pub fn new() -> Self {
        let rows = (0..=PHASES)
            .map(|p| {
                let frac = p as f64 / PHASES as f64;
                let mut row = [0.0; TAPS];
                for (i, c) in row.iter_mut().enumerate() {
                    let t = (i as i64 - CENTER) as f64 - frac;
                    *c = sinc(t) * blackman(t);
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|c| *c /= sum);
                row
            })
            .collect();
        Self { rows }
    }

    /// Taps for a fractional delay in `[0, 1]`, rounded to the nearest phase.
    pub fn taps(&self, frac: f64) -> &[f64; TAPS] {
        let p = (frac.clamp(0.0, 1.0) * PHASES as f64).round() as usize;
        &self.rows[p]
    }

    /// Samples of input history needed before the output start, for delays up
    /// to `max_delay` samples.
    pub fn history(max_delay: f64) -> usize {
        max_delay.ceil() as usize + TAPS
    }

    /// `x(n - delay)` evaluated from `x`, where index `offset` of `x` is
    /// time zero. The caller guarantees enough history and lookahead.
    #[inline]
    pub fn sample(&self, x: &[f64], offset: usize, n: usize, delay: f64) -> f64 {
        let n0 = delay.floor();
        let taps = self.taps(delay - n0);
        // first input index: n - n0 - (TAPS - 1 - CENTER)
        let start = (offset + n) as i64 - n0 as i64 - (TAPS as i64 - 1 - CENTER);
        let start = start as usize;
        let window = &x[start..start + TAPS];
        // window[m] pairs with tap TAPS - 1 - m
        let mut acc = 0.0;
        for (xv, c) in window.iter().zip(taps.iter().rev()) {
            acc += xv * c;
        }
        acc
    }
}
