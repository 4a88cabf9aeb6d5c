//! Summary statistics and Student's t-tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for fewer than two values.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }

    pub fn standard_error(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.std / (n as f64).sqrt()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    /// Mean of the first sample is greater.
    Greater,
    Less,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularised incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

fn p_value(t: f64, df: f64, alternative: Alternative) -> f64 {
    let two = student_t_two_sided_p(t, df);
    match alternative {
        Alternative::TwoSided => two,
        Alternative::Greater if t > 0.0 => two / 2.0,
        Alternative::Greater => 1.0 - two / 2.0,
        Alternative::Less if t < 0.0 => two / 2.0,
        Alternative::Less => 1.0 - two / 2.0,
    }
}

/// Two-sample Student's t-test with pooled variance.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    t_test_with(a, b, Alternative::TwoSided)
}

pub fn t_test_with(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::UndefinedTest("each sample needs at least two values"));
    }
    let (sa, sb) = (Stat::of(a).unwrap(), Stat::of(b).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sa.std.powi(2) + (nb - 1.0) * sb.std.powi(2)) / df;
    if !(pooled > 0.0) {
        return Err(Error::UndefinedTest("pooled variance is zero"));
    }
    let t = (sa.mean - sb.mean) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTestResult {
        t_statistic: t,
        df,
        p_value: p_value(t, df, alternative),
    })
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "paired samples",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedTest("paired test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Stat::of(&diffs).unwrap();
    if !(s.std > 0.0) {
        return Err(Error::UndefinedTest("paired differences have zero variance"));
    }
    let n = diffs.len() as f64;
    let t = s.mean / (s.std / n.sqrt());
    Ok(TTestResult {
        t_statistic: t,
        df: n - 1.0,
        p_value: p_value(t, n - 1.0, alternative),
    })
}
