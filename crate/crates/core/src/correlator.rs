//! Frame segmentation and frame-level TDOA measurement.
//!
//! Each channel frame is windowed, zero-padded to twice its length and
//! transformed once. For every microphone pair the cross-power spectrum
//! `C = conj(X_i) X_j` is partially whitened,
//!
//! ```text
//! G(f) = T(f) C(f) / (|C(f)|^gamma + eps * mean|C|)
//! ```
//!
//! with a spectral taper `T`, inverse-transformed and scaled by `1 / sum|G|`
//! so a perfectly coherent pure delay peaks at exactly 1. With this
//! convention `R(l) = sum_n x_i[n] x_j[n + l]`: a positive peak lag means
//! channel `j` lags channel `i`. The peak is refined by a three-point
//! parabolic fit.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::fft::Fft;
use crate::geometry::{ArrayGeometry, Pair, TdoaTriple};
use crate::math::{ceil, cos, pow, sqrt};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorrelatorError {
    #[error("frame length must be a power of two >= 4, got {0}")]
    InvalidFrameLength(usize),
    #[error("frame has {got} samples, expected {expected}")]
    FrameLengthMismatch { expected: usize, got: usize },
    #[error("max lag {max_lag} must be below half the frame length {frame_len}")]
    MaxLagTooLarge { max_lag: usize, frame_len: usize },
    #[error("channel lengths differ: {0} / {1} / {2}")]
    ChannelLengthMismatch(usize, usize, usize),
    #[error("invalid weighting: exponent {exponent} must be in [0, 1], floor {floor} must be >= 0")]
    InvalidWeighting { exponent: f64, floor: f64 },
    #[error("sample rate {fs} Hz and speed of sound {c} m/s must be positive")]
    InvalidRates { fs: f64, c: f64 },
}

/// Spectral taper applied on top of the whitening weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SpectralTaper {
    /// Flat weighting up to Nyquist.
    None,
    /// Raised cosine from 1 at DC to 0 at Nyquist. Broadens the correlation
    /// peak enough for the parabolic refinement to be nearly unbiased.
    #[default]
    Hann,
}

/// Time-domain analysis window applied to each frame before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnalysisWindow {
    #[default]
    Hann,
    Rectangular,
}

/// Partial-whitening (modified CPSP) parameters. `exponent = 1` with a flat
/// taper is the classic phase transform.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Weighting {
    pub exponent: f64,
    /// Regularization relative to the mean cross-power magnitude.
    pub floor: f64,
    pub taper: SpectralTaper,
}

impl Default for Weighting {
    fn default() -> Self {
        Self {
            exponent: 0.75,
            floor: 1e-9,
            taper: SpectralTaper::Hann,
        }
    }
}

impl Weighting {
    pub fn validate(&self) -> Result<(), CorrelatorError> {
        if !(0.0..=1.0).contains(&self.exponent) || !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(CorrelatorError::InvalidWeighting {
                exponent: self.exponent,
                floor: self.floor,
            });
        }
        Ok(())
    }
}

/// Weighted cross-correlation over the lags `-max_lag..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    max_lag: usize,
    values: Vec<f64>,
    peak_lag: i64,
}

impl CorrelationFunction {
    /// Wraps `values[l + max_lag] = R(l)`; the peak is the first maximum.
    pub fn new(max_lag: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 2 * max_lag + 1, "expected 2 * max_lag + 1 values");
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        Self {
            max_lag,
            values,
            peak_lag: best as i64 - max_lag as i64,
        }
    }

    /// All-zero correlation (silent input); the peak is reported at lag 0.
    pub fn zeros(max_lag: usize) -> Self {
        Self {
            max_lag,
            values: vec![0.0; 2 * max_lag + 1],
            peak_lag: 0,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, lag: i64) -> Option<f64> {
        let i = lag + self.max_lag as i64;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    pub fn peak_lag(&self) -> i64 {
        self.peak_lag
    }

    pub fn peak_value(&self) -> f64 {
        self.values[(self.peak_lag + self.max_lag as i64) as usize]
    }

    /// `(lag, value)` pairs in ascending lag order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let m = self.max_lag as i64;
        self.values.iter().enumerate().map(move |(i, &v)| (i as i64 - m, v))
    }
}

/// Sub-sample peak position from a parabola through the peak and its two
/// neighbors. Peaks on the range edge are returned unrefined.
pub fn refine_peak_qi(corr: &CorrelationFunction) -> f64 {
    let l = corr.peak_lag();
    let (Some(prev), Some(next)) = (corr.value(l - 1), corr.value(l + 1)) else {
        return l as f64;
    };
    let peak = corr.peak_value();
    let denom = prev - 2.0 * peak + next;
    if denom.abs() < 1e-12 {
        return l as f64;
    }
    let delta = (0.5 * (prev - next) / denom).clamp(-0.5, 0.5);
    l as f64 + delta
}

/// `ceil(d fs / c) + 1`: the plausible lag range of a pair `d` meters apart,
/// with one bin of slack.
pub fn max_lag_for(distance: f64, fs: f64, c: f64) -> usize {
    ceil(distance * fs / c) as usize + 1
}

/// Windowed one-sided spectrum of one frame plus the magnitude powers the
/// weighting needs.
#[derive(Debug, Clone, Default)]
pub struct FrameSpectrum {
    bins: Vec<Complex64>,
    magnitude: Vec<f64>,
    magnitude_pow: Vec<f64>,
}

/// Reusable FFT plan, window and scratch space for one frame length.
#[derive(Debug, Clone)]
pub struct Correlator {
    frame_len: usize,
    weighting: Weighting,
    fft: Fft,
    window: Vec<f64>,
    taper: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Correlator {
    pub fn new(
        frame_len: usize,
        weighting: Weighting,
        window: AnalysisWindow,
    ) -> Result<Self, CorrelatorError> {
        if frame_len < 4 || !frame_len.is_power_of_two() {
            return Err(CorrelatorError::InvalidFrameLength(frame_len));
        }
        weighting.validate()?;
        let n = 2 * frame_len;
        let fft = Fft::new(n).ok_or(CorrelatorError::InvalidFrameLength(frame_len))?;
        let window = match window {
            AnalysisWindow::Hann => (0..frame_len)
                .map(|i| 0.5 - 0.5 * cos(2.0 * PI * i as f64 / (frame_len - 1) as f64))
                .collect(),
            AnalysisWindow::Rectangular => vec![1.0; frame_len],
        };
        let half = n / 2;
        let taper = (0..=half)
            .map(|k| match weighting.taper {
                SpectralTaper::None => 1.0,
                SpectralTaper::Hann => 0.5 * (1.0 + cos(PI * k as f64 / half as f64)),
            })
            .collect();
        Ok(Self {
            frame_len,
            weighting,
            fft,
            window,
            taper,
            scratch: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn weighting(&self) -> &Weighting {
        &self.weighting
    }

    /// Transforms one frame into `out`, reusing its allocations.
    pub fn spectrum_into(
        &mut self,
        frame: &[f64],
        out: &mut FrameSpectrum,
    ) -> Result<(), CorrelatorError> {
        if frame.len() != self.frame_len {
            return Err(CorrelatorError::FrameLengthMismatch {
                expected: self.frame_len,
                got: frame.len(),
            });
        }
        let n = 2 * self.frame_len;
        let half = n / 2;
        for (dst, (&x, &w)) in self.scratch.iter_mut().zip(frame.iter().zip(&self.window)) {
            *dst = Complex64::new(x * w, 0.0);
        }
        for dst in &mut self.scratch[self.frame_len..] {
            *dst = Complex64::new(0.0, 0.0);
        }
        self.fft.forward(&mut self.scratch);

        out.bins.clear();
        out.bins.extend_from_slice(&self.scratch[..=half]);
        out.magnitude.clear();
        out.magnitude.extend(out.bins.iter().map(|c| c.norm()));
        let gamma = self.weighting.exponent;
        out.magnitude_pow.clear();
        out.magnitude_pow
            .extend(out.magnitude.iter().map(|&m| fast_pow(m, gamma)));
        Ok(())
    }

    pub fn spectrum(&mut self, frame: &[f64]) -> Result<FrameSpectrum, CorrelatorError> {
        let mut s = FrameSpectrum::default();
        self.spectrum_into(frame, &mut s)?;
        Ok(s)
    }

    /// Weighted cross-correlation of two precomputed spectra.
    pub fn correlate_spectra(
        &mut self,
        xi: &FrameSpectrum,
        xj: &FrameSpectrum,
        max_lag: usize,
    ) -> Result<CorrelationFunction, CorrelatorError> {
        if 2 * max_lag >= self.frame_len {
            return Err(CorrelatorError::MaxLagTooLarge {
                max_lag,
                frame_len: self.frame_len,
            });
        }
        let n = 2 * self.frame_len;
        let half = n / 2;

        // Bins 0 and n/2 appear once in the full spectrum, the rest twice.
        let mut mean_mag = 0.0;
        for k in 0..=half {
            let m = xi.magnitude[k] * xj.magnitude[k];
            mean_mag += if k == 0 || k == half { m } else { 2.0 * m };
        }
        mean_mag /= n as f64;
        if !(mean_mag > 0.0) || !mean_mag.is_finite() {
            return Ok(CorrelationFunction::zeros(max_lag));
        }
        let floor = self.weighting.floor * mean_mag;

        let mut total = 0.0;
        for k in 0..=half {
            let cross = xi.bins[k].conj() * xj.bins[k];
            let mag = xi.magnitude[k] * xj.magnitude[k];
            let denom = xi.magnitude_pow[k] * xj.magnitude_pow[k] + floor;
            let scale = if denom > 0.0 { self.taper[k] / denom } else { 0.0 };
            let g = cross * scale;
            self.scratch[k] = g;
            let w = mag * scale;
            total += if k == 0 || k == half { w } else { 2.0 * w };
            if k != 0 && k != half {
                self.scratch[n - k] = g.conj();
            }
        }
        if !(total > 0.0) {
            return Ok(CorrelationFunction::zeros(max_lag));
        }
        self.fft.inverse_unscaled(&mut self.scratch);

        let values = (-(max_lag as i64)..=max_lag as i64)
            .map(|l| self.scratch[l.rem_euclid(n as i64) as usize].re / total)
            .collect();
        Ok(CorrelationFunction::new(max_lag, values))
    }

    pub fn cross_correlate(
        &mut self,
        fi: &[f64],
        fj: &[f64],
        max_lag: usize,
    ) -> Result<CorrelationFunction, CorrelatorError> {
        let xi = self.spectrum(fi)?;
        let xj = self.spectrum(fj)?;
        self.correlate_spectra(&xi, &xj, max_lag)
    }
}

/// `m^gamma` with fast paths for the common exponents.
#[inline]
fn fast_pow(m: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        m
    } else if gamma == 0.5 {
        sqrt(m)
    } else if gamma == 0.75 {
        let s = sqrt(m);
        s * sqrt(s)
    } else if gamma == 0.0 {
        1.0
    } else {
        pow(m, gamma)
    }
}

/// One-shot cross-correlation of two frames with a Hann analysis window.
pub fn cross_correlate(
    fi: &[f64],
    fj: &[f64],
    max_lag: usize,
    weighting: Weighting,
) -> Result<CorrelationFunction, CorrelatorError> {
    Correlator::new(fi.len(), weighting, AnalysisWindow::Hann)?.cross_correlate(fi, fj, max_lag)
}

/// TDOA estimate for one microphone pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasurement {
    pub pair: Pair,
    /// Refined peak lag in (fractional) samples.
    pub refined_lag: f64,
    /// `r_ij` in meters.
    pub tdoa: f64,
    pub peak_value: f64,
    pub corr: CorrelationFunction,
}

/// The measured triple of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TdoaMeasurement {
    pub k: usize,
    pub q: TdoaTriple,
    /// Pairs in the order `(1,2), (1,3), (2,3)`.
    pub pairs: [PairMeasurement; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub frame_len: usize,
    pub sample_rate: f64,
    pub speed_of_sound: f64,
    pub weighting: Weighting,
    pub window: AnalysisWindow,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            sample_rate: 48_000.0,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            weighting: Weighting::default(),
            window: AnalysisWindow::Hann,
        }
    }
}

/// Per-stream TDOA estimator: one spectrum per channel per frame, shared by
/// the three pair correlations.
#[derive(Debug, Clone)]
pub struct TdoaEstimator {
    correlator: Correlator,
    geometry: ArrayGeometry,
    sample_rate: f64,
    speed_of_sound: f64,
    max_lags: [usize; 3],
    spectra: [FrameSpectrum; 3],
}

impl TdoaEstimator {
    pub fn new(cfg: &EstimatorConfig, geometry: ArrayGeometry) -> Result<Self, CorrelatorError> {
        let (fs, c) = (cfg.sample_rate, cfg.speed_of_sound);
        if !(fs > 0.0 && fs.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(CorrelatorError::InvalidRates { fs, c });
        }
        let correlator = Correlator::new(cfg.frame_len, cfg.weighting, cfg.window)?;
        let max_lags = Pair::ALL.map(|p| max_lag_for(geometry.pair_distance(p), fs, c));
        for &max_lag in &max_lags {
            if 2 * max_lag >= cfg.frame_len {
                return Err(CorrelatorError::MaxLagTooLarge {
                    max_lag,
                    frame_len: cfg.frame_len,
                });
            }
        }
        Ok(Self {
            correlator,
            geometry,
            sample_rate: fs,
            speed_of_sound: c,
            max_lags,
            spectra: Default::default(),
        })
    }

    pub fn max_lags(&self) -> [usize; 3] {
        self.max_lags
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn frame_len(&self) -> usize {
        self.correlator.frame_len()
    }

    /// Measures the TDOA triple of frame `k` from the three channel frames.
    pub fn measure(
        &mut self,
        k: usize,
        frames: [&[f64]; 3],
    ) -> Result<TdoaMeasurement, CorrelatorError> {
        for (frame, spectrum) in frames.iter().zip(self.spectra.iter_mut()) {
            self.correlator.spectrum_into(frame, spectrum)?;
        }
        let meters_per_sample = self.speed_of_sound / self.sample_rate;
        let mut pairs = Vec::with_capacity(3);
        for pair in Pair::ALL {
            let (i, j) = pair.mics();
            let max_lag = self.max_lags[pair.index()];
            let corr = self
                .correlator
                .correlate_spectra(&self.spectra[i], &self.spectra[j], max_lag)?;
            let refined_lag = refine_peak_qi(&corr);
            // channel j lagging channel i means the source is closer to mic i
            let bound = self.geometry.pair_distance(pair) * (1.0 + 1.0 / max_lag as f64);
            let tdoa = (-refined_lag * meters_per_sample).clamp(-bound, bound);
            pairs.push(PairMeasurement {
                pair,
                refined_lag,
                tdoa,
                peak_value: corr.peak_value(),
                corr,
            });
        }
        let pairs: [PairMeasurement; 3] = pairs.try_into().expect("three pairs");
        let q = TdoaTriple::new(pairs[0].tdoa, pairs[1].tdoa, pairs[2].tdoa);
        Ok(TdoaMeasurement { k, q, pairs })
    }
}

/// One-shot measurement of a single frame triple.
pub fn measure_frame(
    k: usize,
    frames: [&[f64]; 3],
    g: ArrayGeometry,
    fs: f64,
    c: f64,
    weighting: Weighting,
) -> Result<TdoaMeasurement, CorrelatorError> {
    let cfg = EstimatorConfig {
        frame_len: frames[0].len(),
        sample_rate: fs,
        speed_of_sound: c,
        weighting,
        window: AnalysisWindow::Hann,
    };
    TdoaEstimator::new(&cfg, g)?.measure(k, frames)
}

/// Number of frames of length `frame_len` and hop `frame_len / 2` in a stream
/// of `len` samples; the trailing partial frame is dropped.
pub fn frame_count(len: usize, frame_len: usize) -> usize {
    let hop = (frame_len / 2).max(1);
    if len < frame_len || frame_len == 0 {
        0
    } else {
        (len - frame_len) / hop + 1
    }
}

/// Three time-aligned channel frames.
#[derive(Debug, Clone, Copy)]
pub struct FrameTriple<'a> {
    pub k: usize,
    /// First sample index of the frame.
    pub start: usize,
    pub channels: [&'a [f64]; 3],
}

/// Iterator over 50 %-overlapping frames of a three-channel stream.
#[derive(Debug, Clone)]
pub struct FrameSegmenter<'a> {
    channels: [&'a [f64]; 3],
    frame_len: usize,
    k: usize,
    count: usize,
}

impl<'a> Iterator for FrameSegmenter<'a> {
    type Item = FrameTriple<'a>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.k >= self.count {
            return None;
        }
        let start = self.k * (self.frame_len / 2).max(1);
        let end = start + self.frame_len;
        let item = FrameTriple {
            k: self.k,
            start,
            channels: self.channels.map(|c| &c[start..end]),
        };
        self.k += 1;
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count - self.k;
        (n, Some(n))
    }
}

impl ExactSizeIterator for FrameSegmenter<'_> {}

pub fn segment_stream(
    channels: [&[f64]; 3],
    frame_len: usize,
) -> Result<FrameSegmenter<'_>, CorrelatorError> {
    let lens = channels.map(<[f64]>::len);
    if lens[0] != lens[1] || lens[0] != lens[2] {
        return Err(CorrelatorError::ChannelLengthMismatch(lens[0], lens[1], lens[2]));
    }
    if frame_len < 2 {
        return Err(CorrelatorError::InvalidFrameLength(frame_len));
    }
    Ok(FrameSegmenter {
        channels,
        frame_len,
        k: 0,
        count: frame_count(lens[0], frame_len),
    })
}
