use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    /// `None` for an empty sample; the deviation of a single value is 0.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanSd { mean, sd, n: xs.len() })
    }
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Stats("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // Relative to the data scale, so tiny rounding noise around a constant
    // vector still counts as zero variance.
    let scale = |v: &[f64], m: f64| v.iter().map(|a| a * a).sum::<f64>().max(m * m * n) * 1e-28;
    if sxx <= scale(x, mx) || syy <= scale(y, my) {
        return Err(Error::Stats("correlation is undefined for a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under the null of no correlation, from the t
/// distribution on `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Stats(format!("a p-value needs at least 3 points, got {n}")));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Stats(e.to_string()))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub label: String,
    pub n: usize,
    pub r: f64,
    pub p_value: f64,
}

/// Correlation of `observed` (one value per summary) with `reference`.
pub fn correlation_report(observed: &[f64], reference: &[f64], label: impl Into<String>) -> Result<CorrelationReport> {
    let r = pearson(observed, reference)?;
    Ok(CorrelationReport {
        label: label.into(),
        n: observed.len(),
        r,
        p_value: correlation_p_value(r, observed.len())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_formula() {
        // Means 2.5 and 5; deviations (-1.5,-0.5,0.5,1.5) and (-3,-1,0,4).
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 5.0, 9.0]).unwrap();
        let expected = 11.0 / (5.0f64.sqrt() * 26.0f64.sqrt());
        assert!((r - expected).abs() < 1e-15);
    }

    #[test]
    fn extremes_and_constants() {
        let x = [0.3, 1.0, -2.0, 5.5];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[2.0; 4]), Err(Error::Stats(_))));
        assert!(matches!(pearson(&x, &[1.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(pearson(&[0.1 + 0.2, 0.3, 0.3], &[1.0, 2.0, 3.0]), Err(Error::Stats(_))));
    }

    #[test]
    fn p_value_matches_t_table() {
        // n = 7, r = 0.9: t = 0.9 * sqrt(5 / 0.19) = 4.6169; two-sided p = 0.0057515 (scipy).
        let p = correlation_p_value(0.9, 7).unwrap();
        assert!((p - 0.005751515181902881).abs() < 1e-9, "{p}");
        assert!((correlation_p_value(0.0, 10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_sd() {
        let s = MeanSd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[7.0]).unwrap().sd, 0.0);
        assert!(MeanSd::of(&[]).is_none());
    }
}
