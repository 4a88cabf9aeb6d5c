//! Reservoir quality measures: class separation and a one-spike Lyapunov
//! estimate, both computed on trace vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Reservoir, RunOptions};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationResult {
    /// Mean pairwise distance between class centres (diagonal included).
    pub sep_d: f64,
    /// Mean over classes of the mean distance to the class centre.
    pub sep_v: f64,
    /// `sep_d / (sep_v + 1)`.
    pub separation: f64,
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn center_of_mass(states: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = states.first().ok_or(Error::EmptyInput("center of mass"))?;
    let mut c = vec![0.0; first.len()];
    for s in states {
        if s.len() != c.len() {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: c.len(),
                actual: s.len(),
            });
        }
        for (acc, v) in c.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let m = states.len() as f64;
    c.iter_mut().for_each(|v| *v /= m);
    Ok(c)
}

pub fn separation(states_by_class: &[Vec<Vec<f64>>]) -> Result<SeparationResult> {
    if states_by_class.is_empty() {
        return Err(Error::EmptyInput("separation classes"));
    }
    let centers = states_by_class
        .iter()
        .map(|class| center_of_mass(class))
        .collect::<Result<Vec<_>>>()?;
    let dim = centers[0].len();
    if let Some(c) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "class state dimension",
            expected: dim,
            actual: c.len(),
        });
    }
    let n = centers.len() as f64;

    let mut sep_d = 0.0;
    for a in &centers {
        for b in &centers {
            sep_d += l2_distance(a, b);
        }
    }
    sep_d /= n * n;

    let sep_v = states_by_class
        .iter()
        .zip(&centers)
        .map(|(class, c)| class.iter().map(|o| l2_distance(c, o)).sum::<f64>() / class.len() as f64)
        .sum::<f64>()
        / n;

    Ok(SeparationResult {
        sep_d,
        sep_v,
        separation: sep_d / (sep_v + 1.0),
    })
}

/// Lyapunov estimate; `NegInfinity` when the perturbation left no trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LyapunovValue {
    Finite(f64),
    NegInfinity,
}

impl LyapunovValue {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            LyapunovValue::Finite(v) => Some(v),
            LyapunovValue::NegInfinity => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_neg_infinity(&self) -> bool {
        matches!(self, LyapunovValue::NegInfinity)
    }
}

impl Serialize for LyapunovValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LyapunovValue::Finite(v) => s.serialize_f64(*v),
            LyapunovValue::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LyapunovValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(LyapunovValue::Finite(v)),
            Repr::Text(t) if t == "-inf" => Ok(LyapunovValue::NegInfinity),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad lyapunov value {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: LyapunovValue,
    pub delta_0: f64,
    pub delta_t: f64,
    /// Seconds.
    pub horizon: f64,
}

/// `ln(delta_t / delta_0) / horizon`.
pub fn lyapunov_from_distances(delta_0: f64, delta_t: f64, horizon: f64) -> Result<LyapunovEstimate> {
    if !(delta_0 > 0.0) {
        return Err(Error::DegeneratePerturbation);
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig("Lyapunov horizon must be positive".into()));
    }
    let value = if delta_t == 0.0 {
        LyapunovValue::NegInfinity
    } else {
        LyapunovValue::Finite((delta_t / delta_0).ln() / horizon)
    };
    Ok(LyapunovEstimate {
        value,
        delta_0,
        delta_t,
        horizon,
    })
}

/// Runs `sample` twice, once with a forced spike in a uniformly chosen neuron
/// before the first step, and compares the trace vectors.
pub fn lyapunov_estimate<R: Rng + ?Sized>(
    reservoir: &Reservoir<'_>,
    sample: &[Vec<f64>],
    rng: &mut R,
) -> Result<LyapunovEstimate> {
    let n_steps = sample.first().map_or(0, Vec::len);
    if n_steps == 0 {
        return Err(Error::EmptyInput("Lyapunov sample"));
    }
    let neuron = rng.gen_range(0..reservoir.graph().n_neurons());
    lyapunov_for_neuron(reservoir, sample, neuron)
}

pub fn lyapunov_for_neuron(
    reservoir: &Reservoir<'_>,
    sample: &[Vec<f64>],
    neuron: usize,
) -> Result<LyapunovEstimate> {
    let n_steps = sample.first().map_or(0, Vec::len);
    let base = reservoir.run(sample, RunOptions::default())?;
    let perturbed = reservoir.run(
        sample,
        RunOptions {
            record_raster: false,
            perturb: Some(neuron),
        },
    )?;
    let delta_0 = l2_distance(&base.initial_trace, &perturbed.initial_trace);
    let delta_t = l2_distance(&base.final_trace, &perturbed.final_trace);
    lyapunov_from_distances(delta_0, delta_t, n_steps as f64 * reservoir.params().dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centers() {
        assert_eq!(
            center_of_mass(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            vec![2.0, 3.0]
        );
        assert_eq!(center_of_mass(&[vec![5.0, -1.0]]).unwrap(), vec![5.0, -1.0]);
        assert_eq!(
            center_of_mass(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]).unwrap(),
            vec![2.0, 0.0]
        );
        assert!(center_of_mass(&[]).is_err());
    }

    #[test]
    fn two_singleton_classes() {
        let r = separation(&[vec![vec![0.0, 0.0]], vec![vec![3.0, 4.0]]]).unwrap();
        assert_eq!(r.sep_d, 2.5);
        assert_eq!(r.sep_v, 0.0);
        assert_eq!(r.separation, 2.5);
    }

    #[test]
    fn two_spread_classes() {
        let r = separation(&[
            vec![vec![0.0, 0.0], vec![2.0, 0.0]],
            vec![vec![10.0, 0.0], vec![12.0, 0.0]],
        ])
        .unwrap();
        assert_eq!(r.sep_d, 5.0);
        assert_eq!(r.sep_v, 1.0);
        assert_eq!(r.separation, 2.5);
    }

    #[test]
    fn single_class_has_no_separation() {
        let r = separation(&[vec![vec![1.0, 7.0], vec![3.0, -2.0]]]).unwrap();
        assert_eq!(r.sep_d, 0.0);
        assert_eq!(r.separation, 0.0);
        assert!(r.sep_v > 0.0);
    }

    #[test]
    fn empty_class_rejected() {
        assert!(separation(&[vec![vec![1.0]], vec![]]).is_err());
        assert!(separation(&[]).is_err());
    }

    #[test]
    fn lyapunov_formula() {
        let e = lyapunov_from_distances(0.5, 0.25, 10.0).unwrap();
        assert_relative_eq!(e.value.as_f64(), 0.5f64.ln() / 10.0, epsilon = 1e-15);
        assert_relative_eq!(e.value.as_f64(), -0.0693, epsilon = 1e-4);
        assert_eq!(lyapunov_from_distances(0.7, 0.7, 3.0).unwrap().value, LyapunovValue::Finite(0.0));
        assert!(lyapunov_from_distances(1.0, 0.0, 3.0).unwrap().value.is_neg_infinity());
        assert!(lyapunov_from_distances(0.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn lyapunov_value_serde() {
        let json = serde_json::to_string(&[LyapunovValue::Finite(-0.5), LyapunovValue::NegInfinity]).unwrap();
        assert_eq!(json, r#"[-0.5,"-inf"]"#);
        let back: Vec<LyapunovValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![LyapunovValue::Finite(-0.5), LyapunovValue::NegInfinity]);
    }
}
