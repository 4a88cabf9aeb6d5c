//! Fourth-order Butterworth filters as cascades of biquads.
//!
//! Analog prototypes are designed on pre-warped frequencies `tan(π f / fs)`
//! and mapped with the bilinear transform `s = (1 - z⁻¹) / (1 + z⁻¹)`.
//! A band with a zero lower edge becomes a lowpass.

use crate::error::{Error, Result};

/// Normalised second-order section, `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Bilinear map of `(b2 s² + b1 s + b0) / (s² + a1 s + a0)`.
    fn from_analog(b2: f64, b1: f64, b0: f64, a1: f64, a0: f64) -> Self {
        let d0 = 1.0 + a1 + a0;
        Self {
            b: [(b2 + b1 + b0) / d0, 2.0 * (b0 - b2) / d0, (b2 - b1 + b0) / d0],
            a: [1.0, 2.0 * (a0 - 1.0) / d0, (1.0 - a1 + a0) / d0],
        }
    }

    /// Complex response at normalised angular frequency `w` (rad/sample).
    fn response(&self, w: f64) -> (f64, f64) {
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re, im)
        };
        let (nr, ni) = eval(&self.b);
        let (dr, di) = eval(&self.a);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

const PASSBAND_ORDER: usize = 2;
const LOWPASS_ORDER: usize = 4;

fn prewarp(f_hz: f64, fs: f64) -> f64 {
    (std::f64::consts::PI * f_hz / fs).tan()
}

/// Upper-half-plane poles of the unit Butterworth prototype of even `order`.
fn prototype_poles(order: usize) -> Vec<(f64, f64)> {
    (0..order / 2)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            (theta.cos(), theta.sin())
        })
        .collect()
}

fn csqrt(re: f64, im: f64) -> (f64, f64) {
    let r = re.hypot(im);
    let sr = ((r + re) / 2.0).sqrt();
    let si = ((r - re) / 2.0).sqrt().copysign(im);
    (sr, si)
}

impl SosFilter {
    /// Bandpass for `low_hz > 0`, lowpass at `high_hz` for `low_hz == 0`.
    /// Either way the filter has four poles.
    pub fn butterworth(low_hz: f64, high_hz: f64, fs_hz: f64) -> Result<Self> {
        if !(low_hz >= 0.0 && low_hz < high_hz && high_hz < fs_hz / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "band {low_hz}..{high_hz} Hz is invalid at sample rate {fs_hz} Hz"
            )));
        }
        let wh = prewarp(high_hz, fs_hz);
        if low_hz == 0.0 {
            let sections = prototype_poles(LOWPASS_ORDER)
                .into_iter()
                .map(|(pr, _)| Biquad::from_analog(0.0, 0.0, wh * wh, -2.0 * pr * wh, wh * wh))
                .collect();
            return Ok(Self { sections });
        }

        let wl = prewarp(low_hz, fs_hz);
        let bw = wh - wl;
        let w0_sq = wl * wh;
        let mut sections = Vec::with_capacity(PASSBAND_ORDER);
        for (pr, pi) in prototype_poles(PASSBAND_ORDER) {
            // roots of s² - p·bw·s + w0² = 0
            let (hr, hi) = (pr * bw / 2.0, pi * bw / 2.0);
            let (dr, di) = csqrt(hr * hr - hi * hi - w0_sq, 2.0 * hr * hi);
            for (rr, ri) in [(hr + dr, hi + di), (hr - dr, hi - di)] {
                sections.push(Biquad::from_analog(0.0, bw, 0.0, -2.0 * rr, rr * rr + ri * ri));
            }
        }
        Ok(Self { sections })
    }

    /// Forward pass from rest (transposed direct form II per section).
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut y = signal.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let x = *v;
                let out = s.b[0] * x + z1;
                z1 = s.b[1] * x - s.a[1] * out + z2;
                z2 = s.b[2] * x - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Magnitude of the cascade's transfer function at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, fs_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / fs_hz;
        let (mut re, mut im) = (1.0, 0.0);
        for s in &self.sections {
            let (r, i) = s.response(w);
            (re, im) = (re * r - im * i, re * i + im * r);
        }
        re.hypot(im)
    }
}

pub fn bandpass_filter(signal: &[f64], low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptyInput("filter signal"));
    }
    Ok(SosFilter::butterworth(low_hz, high_hz, sample_rate_hz)?.apply(signal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EEG_SAMPLE_RATE_HZ as FS;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Closed-form magnitude of the bilinear-mapped Butterworth designs.
    fn oracle(low: f64, high: f64, f: f64) -> f64 {
        let w = (PI * f / FS).tan();
        let wh = (PI * high / FS).tan();
        if low == 0.0 {
            1.0 / (1.0 + (w / wh).powi(8)).sqrt()
        } else {
            let wl = (PI * low / FS).tan();
            let x = (w * w - wl * wh) / (w * (wh - wl));
            1.0 / (1.0 + x.powi(4)).sqrt()
        }
    }

    fn tone(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * f * t as f64 / FS).sin()).collect()
    }

    fn tail_peak(y: &[f64], n: usize) -> f64 {
        y[y.len() - n..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn matches_closed_form_response() {
        for (lo, hi) in [(0.53, 40.0), (0.0, 3.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0)] {
            let f = SosFilter::butterworth(lo, hi, FS).unwrap();
            for k in 1..170 {
                let hz = k as f64 * 0.5;
                assert_relative_eq!(f.magnitude(hz, FS), oracle(lo, hi, hz), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn passband_and_stopband_tones() {
        let x20 = bandpass_filter(&tone(20.0, 4096), 0.53, 40.0, FS).unwrap();
        let a20 = tail_peak(&x20, 500);
        assert!((0.7..=1.05).contains(&a20), "20 Hz amplitude {a20}");
        let x80 = bandpass_filter(&tone(80.0, 4096), 0.53, 40.0, FS).unwrap();
        assert!(tail_peak(&x80, 500) < 0.1);
    }

    #[test]
    fn dc_rejected_by_theta_band() {
        let y = bandpass_filter(&vec![3.0; 4096], 4.0, 8.0, FS).unwrap();
        assert!(tail_peak(&y, 100) < 0.01 * 3.0);
    }

    #[test]
    fn lowpass_keeps_dc() {
        let y = bandpass_filter(&vec![1.0; 4096], 0.0, 3.0, FS).unwrap();
        assert_relative_eq!(y[4095], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn invalid_bands() {
        assert!(bandpass_filter(&[1.0], 5.0, 4.0, FS).is_err());
        assert!(bandpass_filter(&[1.0], 1.0, 90.0, FS).is_err());
        assert!(bandpass_filter(&[1.0], -1.0, 4.0, FS).is_err());
        assert!(bandpass_filter(&[], 1.0, 4.0, FS).is_err());
    }
}
