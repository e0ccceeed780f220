use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::student_t_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Integral for the pooled test, fractional for Welch.
    pub df: f64,
}

fn moments(xs: &[f64], which: &str) -> Result<(f64, f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Precondition(format!(
            "sample {which} needs at least 2 values, has {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("sample {which}")));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((n, mean, ss))
}

fn finish(diff: f64, se: f64, df: f64) -> Result<TTestResult> {
    // zero spread: equal means are no evidence at all, unequal ones are certain
    let t = if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / se
    };
    Ok(TTestResult {
        t_statistic: t,
        p_value: student_t_two_sided_p(t, df)?,
        df,
    })
}

/// Two-sample Student t-test with pooled variance, `df = n_a + n_b - 2`.
pub fn ttest_ind(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    let (na, ma, ssa) = moments(a, "a")?;
    let (nb, mb, ssb) = moments(b, "b")?;
    let df = na + nb - 2.0;
    let pooled = (ssa + ssb) / df;
    finish(ma - mb, (pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn ttest_welch(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    let (na, ma, ssa) = moments(a, "a")?;
    let (nb, mb, ssb) = moments(b, "b")?;
    let va = ssa / (na - 1.0) / na;
    let vb = ssb / (nb - 1.0) / nb;
    let se2 = va + vb;
    let df = if se2 == 0.0 {
        na + nb - 2.0
    } else {
        se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0))
    };
    finish(ma - mb, se2.sqrt(), df)
}
