//! Synthetic two-class EEG surrogate.
//!
//! Class 0 is low-amplitude band-limited background: a handful of random
//! 1–30 Hz sinusoids plus small white noise. Class 1 is the same kind of
//! background with two to four Hann-windowed 3–6 Hz bursts of several
//! hundred units on top. The background never exceeds 130 units in
//! magnitude and bursts reach at least 400, so class 1 always peaks higher.

use std::f64::consts::PI;

use rand::Rng;

use super::dataset::{preprocess, split_stratified, Dataset, PreprocessMode, RawSample, SAMPLE_LENGTH, TRAIN_FRACTION};
use crate::dynamics::EEG_SAMPLE_RATE_HZ;
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, STREAM_SPLIT, STREAM_SYNTH};

const N_TONES: usize = 8;
const TONE_AMPLITUDE: (f64, f64) = (5.0, 15.0);
const NOISE_AMPLITUDE: f64 = 10.0;
const BURST_AMPLITUDE: (f64, f64) = (400.0, 550.0);
const BURST_HZ: (f64, f64) = (3.0, 6.0);
const BURST_SECONDS: (f64, f64) = (1.0, 3.0);

fn background(rng: &mut SimRng) -> Vec<f64> {
    let tones: Vec<(f64, f64, f64)> = (0..N_TONES)
        .map(|_| {
            (
                rng.gen_range(TONE_AMPLITUDE.0..TONE_AMPLITUDE.1),
                rng.gen_range(1.0..30.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    (0..SAMPLE_LENGTH)
        .map(|t| {
            let time = t as f64 / EEG_SAMPLE_RATE_HZ;
            let tone: f64 = tones
                .iter()
                .map(|&(a, f, phase)| a * (2.0 * PI * f * time + phase).sin())
                .sum();
            tone + rng.gen_range(-NOISE_AMPLITUDE..NOISE_AMPLITUDE)
        })
        .collect()
}

fn add_bursts(signal: &mut [f64], rng: &mut SimRng) {
    let n_bursts = rng.gen_range(2..=4);
    for _ in 0..n_bursts {
        let len = (rng.gen_range(BURST_SECONDS.0..BURST_SECONDS.1) * EEG_SAMPLE_RATE_HZ) as usize | 1;
        let start = rng.gen_range(0..SAMPLE_LENGTH - len);
        let amp = rng.gen_range(BURST_AMPLITUDE.0..BURST_AMPLITUDE.1);
        let hz = rng.gen_range(BURST_HZ.0..BURST_HZ.1);
        // cosine carrier peaks at the window centre
        let centre = (len / 2) as f64;
        for k in 0..len {
            let window = 0.5 - 0.5 * (2.0 * PI * k as f64 / (len - 1) as f64).cos();
            let carrier = (2.0 * PI * hz * (k as f64 - centre) / EEG_SAMPLE_RATE_HZ).cos();
            signal[start + k] += amp * window * carrier;
        }
    }
}

/// Raw integer-valued recordings, `n_per_class` of each label, class 0 first.
pub fn synth_raw_samples(n_per_class: usize, seed: u64) -> Result<Vec<RawSample>> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be at least 1".into()));
    }
    let mut rng = stream(seed, STREAM_SYNTH);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for label in [0u8, 1] {
        for i in 0..n_per_class {
            let mut values = background(&mut rng);
            if label == 1 {
                add_bursts(&mut values, &mut rng);
            }
            values.iter_mut().for_each(|v| *v = v.round());
            out.push(RawSample {
                name: format!("synth-{label}-{i:03}"),
                values,
                label,
            });
        }
    }
    Ok(out)
}

pub fn synth_dataset(n_per_class: usize, mode: PreprocessMode, seed: u64) -> Result<Dataset> {
    let samples = preprocess(&synth_raw_samples(n_per_class, seed)?, mode)?;
    split_stratified(samples, TRAIN_FRACTION, &mut stream(seed, STREAM_SPLIT))
}
