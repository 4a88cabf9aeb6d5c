use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::SosFilter;
use crate::dynamics::EEG_SAMPLE_RATE_HZ;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const SAMPLE_LENGTH: usize = 4096;
pub const TRAIN_FRACTION: f64 = 0.7;

const PREFILTER_BAND: (f64, f64) = (0.53, 40.0);
const SUB_BANDS: [(f64, f64); 4] = [(0.0, 3.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0)];

/// Class directories and their labels: healthy eyes-open and seizure.
const CLASS_DIRS: [(&str, u8); 2] = [("Z", 0), ("S", 1)];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessMode {
    #[default]
    Single,
    Four,
}

impl PreprocessMode {
    pub fn n_channels(self) -> usize {
        match self {
            PreprocessMode::Single => 1,
            PreprocessMode::Four => 4,
        }
    }
}

impl std::str::FromStr for PreprocessMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "1" => Ok(Self::Single),
            "four" | "four_channel" | "4" => Ok(Self::Four),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    pub name: String,
    pub values: Vec<f64>,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EegSample {
    pub name: String,
    /// Channel-major series, all of equal length.
    pub channels: Vec<Vec<f64>>,
    pub label: u8,
    pub sample_rate: f64,
}

impl EegSample {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<EegSample>,
    pub test: Vec<EegSample>,
    pub n_channels: usize,
}

impl Dataset {
    pub fn all(&self) -> impl Iterator<Item = &EegSample> {
        self.train.iter().chain(&self.test)
    }
}

fn scale_by_peak(values: &mut [f64]) {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
}

/// Prefilters `0.53–40 Hz`, divides by the peak magnitude and, in four-channel
/// mode, splits the scaled signal into the four sub-bands.
pub fn preprocess_one(raw: &RawSample, mode: PreprocessMode) -> Result<EegSample> {
    let fs = EEG_SAMPLE_RATE_HZ;
    let mut base = SosFilter::butterworth(PREFILTER_BAND.0, PREFILTER_BAND.1, fs)?.apply(&raw.values);
    scale_by_peak(&mut base);
    let channels = match mode {
        PreprocessMode::Single => vec![base],
        PreprocessMode::Four => SUB_BANDS
            .iter()
            .map(|&(lo, hi)| SosFilter::butterworth(lo, hi, fs).map(|f| f.apply(&base)))
            .collect::<Result<_>>()?,
    };
    Ok(EegSample {
        name: raw.name.clone(),
        channels,
        label: raw.label,
        sample_rate: fs,
    })
}

pub fn preprocess(raws: &[RawSample], mode: PreprocessMode) -> Result<Vec<EegSample>> {
    raws.par_iter().map(|r| preprocess_one(r, mode)).collect()
}

/// Stratified shuffle split: each class contributes `round(fraction · size)`
/// samples to training.
pub fn split_stratified<R: Rng + ?Sized>(
    samples: Vec<EegSample>,
    train_fraction: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("dataset samples"));
    }
    let n_channels = samples[0].channels.len();
    let mut by_label: Vec<Vec<EegSample>> = vec![Vec::new(), Vec::new()];
    for s in samples {
        if s.label > 1 {
            return Err(Error::InvalidConfig(format!("sample {} has label {}", s.name, s.label)));
        }
        if s.channels.len() != n_channels {
            return Err(Error::DimensionMismatch {
                context: "sample channels",
                expected: n_channels,
                actual: s.channels.len(),
            });
        }
        by_label[s.label as usize].push(s);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut class in by_label {
        class.shuffle(rng);
        let n_train = (class.len() as f64 * train_fraction).round() as usize;
        let rest = class.split_off(n_train);
        train.extend(class);
        test.extend(rest);
    }
    train.shuffle(rng);
    test.shuffle(rng);
    Ok(Dataset {
        train,
        test,
        n_channels,
    })
}

fn load_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(SAMPLE_LENGTH + 1);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| load_error(path, format!("line {}: {line:?} is not an integer", lineno + 1)))?;
        values.push(v as f64);
    }
    // Published recordings carry one extra trailing sample.
    if values.len() == SAMPLE_LENGTH + 1 {
        values.truncate(SAMPLE_LENGTH);
    }
    if values.len() != SAMPLE_LENGTH {
        return Err(load_error(
            path,
            format!("expected {SAMPLE_LENGTH} samples, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// Reads every file of the `Z/` and `S/` class directories in name order.
pub fn load_raw_samples(root: &Path) -> Result<Vec<RawSample>> {
    let mut out = Vec::new();
    for (dir, label) in CLASS_DIRS {
        let class_dir = root.join(dir);
        if !class_dir.is_dir() {
            return Err(load_error(&class_dir, "missing class directory"));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&class_dir)
            .map_err(|e| Error::io(&class_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(load_error(&class_dir, "class directory holds no files"));
        }
        for f in files {
            out.push(RawSample {
                name: f
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                values: read_series(&f)?,
                label,
            });
        }
    }
    Ok(out)
}

pub fn load_dataset(root: &Path, mode: PreprocessMode, seed: u64) -> Result<Dataset> {
    let samples = preprocess(&load_raw_samples(root)?, mode)?;
    split_stratified(samples, TRAIN_FRACTION, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_sample(dir: &Path, name: &str, n: usize, k: i64) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        for t in 0..n as i64 {
            writeln!(f, "{}", (t * 7 + k) % 200 - 100).unwrap();
        }
    }

    fn tree(per_class: usize) -> tempfile::TempDir {
        let root = tempfile::tempdir().unwrap();
        for (d, _) in CLASS_DIRS {
            fs::create_dir(root.path().join(d)).unwrap();
            for i in 0..per_class {
                write_sample(&root.path().join(d), &format!("{d}{i:03}.txt"), SAMPLE_LENGTH, i as i64);
            }
        }
        root
    }

    #[test]
    fn scaled_peak_is_one() {
        let raw = RawSample {
            name: "x".into(),
            values: (0..SAMPLE_LENGTH).map(|t| ((t as f64) * 0.3).sin() * 50.0).collect(),
            label: 0,
        };
        let s = preprocess_one(&raw, PreprocessMode::Single).unwrap();
        let peak = s.channels[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(peak, 1.0);

        let four = preprocess_one(&raw, PreprocessMode::Four).unwrap();
        assert_eq!(four.channels.len(), 4);
        assert!(four.channels.iter().all(|c| c.len() == SAMPLE_LENGTH));
    }

    #[test]
    fn zero_sample_passes_through() {
        let raw = RawSample {
            name: "z".into(),
            values: vec![0.0; SAMPLE_LENGTH],
            label: 1,
        };
        for mode in [PreprocessMode::Single, PreprocessMode::Four] {
            let s = preprocess_one(&raw, mode).unwrap();
            assert!(s.channels.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn loads_and_splits_seventy_thirty() {
        let root = tree(10);
        let a = load_dataset(root.path(), PreprocessMode::Single, 9).unwrap();
        assert_eq!(a.train.len(), 14);
        assert_eq!(a.test.len(), 6);
        for split in [&a.train, &a.test] {
            assert!(split.iter().any(|s| s.label == 0));
            assert!(split.iter().any(|s| s.label == 1));
        }
        let b = load_dataset(root.path(), PreprocessMode::Single, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_file_names_the_file() {
        let root = tree(2);
        write_sample(&root.path().join("S"), "S001.txt", SAMPLE_LENGTH - 1, 0);
        let err = load_raw_samples(root.path()).unwrap_err().to_string();
        assert!(err.contains("S001.txt"), "{err}");
        assert!(err.contains("4095"), "{err}");
    }

    #[test]
    fn trailing_extra_sample_is_dropped() {
        let root = tree(1);
        write_sample(&root.path().join("Z"), "Z000.txt", SAMPLE_LENGTH + 1, 0);
        let raws = load_raw_samples(root.path()).unwrap();
        assert!(raws.iter().all(|r| r.values.len() == SAMPLE_LENGTH));
    }

    #[test]
    fn non_integer_line_rejected() {
        let root = tree(1);
        fs::write(root.path().join("Z").join("Z000.txt"), "1\n2.5\n").unwrap();
        let err = load_raw_samples(root.path()).unwrap_err().to_string();
        assert!(err.contains("not an integer"), "{err}");
    }

    #[test]
    fn missing_directory() {
        let root = tempfile::tempdir().unwrap();
        fs::create_dir(root.path().join("Z")).unwrap();
        assert!(load_raw_samples(root.path()).is_err());
    }
}
