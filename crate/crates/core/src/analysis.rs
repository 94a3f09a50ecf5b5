//! Post-processing of traces and frequency responses.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numlin::FrequencyResponse;

/// Default Welch segment length.
pub const DEFAULT_SEGMENT: usize = 8192;

/// Cumulative power spectral density.
#[derive(Clone, Debug, PartialEq)]
pub struct CpsdCurve {
    /// Hz, increasing from 0 to the Nyquist frequency.
    pub frequency: Vec<f64>,
    /// Power accumulated from 0 Hz, non-decreasing.
    pub cumulative: Vec<f64>,
}

impl CpsdCurve {
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Cumulative power at `f` Hz, linearly interpolated and clamped to
    /// the ends of the curve.
    pub fn at(&self, f: f64) -> f64 {
        let fr = &self.frequency;
        if fr.is_empty() {
            return 0.0;
        }
        if f <= fr[0] {
            return self.cumulative[0];
        }
        if f >= fr[fr.len() - 1] {
            return self.total();
        }
        let i = fr.partition_point(|x| *x <= f) - 1;
        let s = (f - fr[i]) / (fr[i + 1] - fr[i]);
        self.cumulative[i] + s * (self.cumulative[i + 1] - self.cumulative[i])
    }

    /// Power between `lo` and `hi` Hz.
    pub fn band(&self, lo: f64, hi: f64) -> f64 {
        self.at(hi) - self.at(lo)
    }
}

/// Welch CPSD with [`DEFAULT_SEGMENT`]-sample segments.
pub fn cpsd(signal: &[f64], fs: f64) -> Result<CpsdCurve> {
    cpsd_with(signal, fs, DEFAULT_SEGMENT)
}

/// Welch estimate (periodic Hann window, 50 % overlap, per-segment mean
/// removed, one-sided density) integrated over frequency by the
/// trapezoidal rule.
pub fn cpsd_with(signal: &[f64], fs: f64, segment: usize) -> Result<CpsdCurve> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {fs}"
        )));
    }
    if segment < 4 {
        return Err(Error::InvalidParameter("segment length must be at least 4".into()));
    }
    if signal.len() < 2 * segment {
        return Err(Error::TooShort(format!(
            "{} samples; need at least two segments of {segment}",
            signal.len()
        )));
    }
    let step = segment / 2;
    let window: Vec<f64> = (0..segment)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut psd = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut start = 0;
    while start + segment <= signal.len() {
        let seg = &signal[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * count as f64);
    for (k, p) in psd.iter_mut().enumerate() {
        *p *= scale;
        let edge = k == 0 || (segment.is_multiple_of(2) && k == bins - 1);
        if !edge {
            *p *= 2.0;
        }
    }
    let df = fs / segment as f64;
    let frequency: Vec<f64> = (0..bins).map(|k| k as f64 * df).collect();
    let mut cumulative = Vec::with_capacity(bins);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for k in 1..bins {
        acc += 0.5 * (psd[k] + psd[k - 1]) * df;
        cumulative.push(acc);
    }
    Ok(CpsdCurve { frequency, cumulative })
}

/// Steady-state input-output loop.
#[derive(Clone, Debug, PartialEq)]
pub struct HysteresisLoop {
    /// Last complete cycle as `(u, y)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Mean enclosed area over the retained cycles.
    pub area: f64,
    /// Number of cycles averaged.
    pub cycles: usize,
}

/// Absolute shoelace area of a closed polygon.
pub fn shoelace(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

/// Upward crossings of the mean with a Schmitt trigger at ±10 % of the
/// half range, so noise near the mean does not split a cycle.
fn cycle_starts(u: &[f64]) -> Vec<usize> {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let mid = 0.5 * (lo + hi);
    let band = 0.1 * 0.5 * (hi - lo);
    let mut armed = false;
    let mut starts = Vec::new();
    for (i, x) in u.iter().enumerate() {
        if *x < mid - band {
            armed = true;
        } else if armed && *x >= mid {
            starts.push(i);
            armed = false;
        }
    }
    starts
}

/// Loop of `y` against `u`. Cycles are delimited by upward crossings of
/// `u`; the first cycle is treated as transient and dropped.
pub fn hysteresis_loop(u: &[f64], y: &[f64]) -> Result<HysteresisLoop> {
    if u.len() != y.len() {
        return Err(Error::Dimension(format!("{} inputs vs {} outputs", u.len(), y.len())));
    }
    let starts = cycle_starts(u);
    // full cycles are intervals between consecutive starts
    if starts.len() < 4 {
        return Err(Error::TooShort(format!(
            "{} complete cycles; need at least 2 after the transient",
            starts.len().saturating_sub(1)
        )));
    }
    let mut areas = Vec::new();
    let mut last = Vec::new();
    for w in starts[1..].windows(2) {
        let pts: Vec<(f64, f64)> = (w[0]..=w[1]).map(|i| (u[i], y[i])).collect();
        areas.push(shoelace(&pts));
        last = pts;
    }
    Ok(HysteresisLoop {
        area: areas.iter().sum::<f64>() / areas.len() as f64,
        cycles: areas.len(),
        points: last,
    })
}

/// Grid maximum of `|value|`; the lowest frequency wins ties.
pub fn peak(fr: &FrequencyResponse) -> Result<(f64, f64)> {
    if fr.is_empty() {
        return Err(Error::TooShort("empty frequency response".into()));
    }
    let mut best = (fr.omega[0], fr.values[0].norm());
    for (w, v) in fr.omega.iter().zip(&fr.values).skip(1) {
        let m = v.norm();
        if m > best.1 {
            best = (*w, m);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_unit_square() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert_eq!(shoelace(&sq), 1.0);
    }

    #[test]
    fn linear_map_has_no_area() {
        let u: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.01).sin()).collect();
        let y: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        let l = hysteresis_loop(&u, &y).unwrap();
        assert!(l.area < 1e-12);
    }

    #[test]
    fn too_few_cycles() {
        let u: Vec<f64> = (0..300).map(|i| (i as f64 * 0.01).sin()).collect();
        assert!(matches!(hysteresis_loop(&u, &u), Err(Error::TooShort(_))));
    }

    #[test]
    fn short_signal_rejected() {
        assert!(matches!(cpsd_with(&[0.0; 10], 1.0, 8), Err(Error::TooShort(_))));
    }
}
