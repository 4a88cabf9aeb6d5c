//! EEG input pipeline: Butterworth filtering, per-sample scaling, loading of
//! the two-class recording tree, stratified splitting and a synthetic
//! surrogate with the same shape.

mod dataset;
mod filter;
mod synth;

pub use dataset::{
    load_dataset, load_raw_samples, preprocess, preprocess_one, split_stratified, Dataset, EegSample,
    PreprocessMode, RawSample, SAMPLE_LENGTH, TRAIN_FRACTION,
};
pub use filter::{bandpass_filter, Biquad, SosFilter};
pub use synth::{synth_dataset, synth_raw_samples};
