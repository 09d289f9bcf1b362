//! Final regression fits and the integrated squared error.

use crate::distortion::DistortedSample;
use crate::error::{Error, Result};
use crate::predictors::{Method, PredictorSet};
use crate::smoothing::{fit_curve, Curve, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodTag {
    Oracle,
    Naive,
    New1,
    New2,
    New3,
}

impl MethodTag {
    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Oracle => "ORACLE",
            MethodTag::Naive => "NAIVE",
            MethodTag::New1 => "NEW1",
            MethodTag::New2 => "NEW2",
            MethodTag::New3 => "NEW3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "ORACLE" => MethodTag::Oracle,
            "NAIVE" => MethodTag::Naive,
            "NEW1" => MethodTag::New1,
            "NEW2" => MethodTag::New2,
            "NEW3" => MethodTag::New3,
            _ => return None,
        })
    }
}

impl From<Method> for MethodTag {
    fn from(m: Method) -> Self {
        match m {
            Method::New1 => MethodTag::New1,
            Method::New2 => MethodTag::New2,
            Method::New3 => MethodTag::New3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub grid: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub valid_mask: Vec<bool>,
    pub h: f64,
    pub method_tag: MethodTag,
    /// 0 for Nadaraya–Watson, 1 for local linear.
    pub degree: usize,
}

impl RegressionFit {
    fn from_curve(c: Curve, h: f64, method_tag: MethodTag, degree: usize) -> Self {
        Self {
            grid: c.grid,
            m_hat: c.values,
            valid_mask: c.valid_mask,
            h,
            method_tag,
            degree,
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth {h} must be positive")))
    }
}

/// Local polynomial fit on the retained generated pairs.
pub fn fit_mhat(pred: &PredictorSet, grid: &[f64], h: f64, degree: usize) -> Result<RegressionFit> {
    check_h(h)?;
    if pred.retained.is_empty() {
        return Err(Error::EmptyRetainedSet);
    }
    let (xs, ys) = pred.retained_pairs();
    let curve = fit_curve(&xs, &ys, grid, degree, h, KernelSpec::TRIWEIGHT)?;
    Ok(RegressionFit::from_curve(curve, h, pred.method.into(), degree))
}

/// Fit on the undistorted data.
pub fn fit_oracle(x: &[f64], y: &[f64], grid: &[f64], h: f64, degree: usize) -> Result<RegressionFit> {
    check_h(h)?;
    let curve = fit_curve(x, y, grid, degree, h, KernelSpec::TRIWEIGHT)?;
    Ok(RegressionFit::from_curve(curve, h, MethodTag::Oracle, degree))
}

/// Fit on the distorted data, ignoring the distortion.
pub fn fit_naive(sample: &DistortedSample, grid: &[f64], h: f64, degree: usize) -> Result<RegressionFit> {
    check_h(h)?;
    let curve = fit_curve(
        &sample.x_tilde,
        &sample.y_tilde,
        grid,
        degree,
        h,
        KernelSpec::TRIWEIGHT,
    )?;
    Ok(RegressionFit::from_curve(curve, h, MethodTag::Naive, degree))
}

/// Trapezoid rule for the squared error over the grid points in `[a, b]`.
pub fn ise<F: Fn(f64) -> f64>(fit: &RegressionFit, truth: F, a: f64, b: f64) -> Result<f64> {
    let (&lo, &hi) = match (fit.grid.first(), fit.grid.last()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::InvalidInput("empty grid".into())),
    };
    // allow a hair of rounding at the ends
    let slack = 1e-12 * (hi - lo).abs().max(1.0);
    if !(a <= b) || a < lo - slack || b > hi + slack {
        return Err(Error::InvalidInput(format!(
            "integration range [{a}, {b}] outside grid [{lo}, {hi}]"
        )));
    }
    let inside: Vec<usize> = (0..fit.grid.len())
        .filter(|&k| fit.grid[k] >= a - slack && fit.grid[k] <= b + slack)
        .collect();
    let bad = inside.iter().filter(|&&k| !fit.valid_mask[k]).count();
    if bad > 0 {
        return Err(Error::InvalidGridPoints { count: bad });
    }
    let sq = |k: usize| {
        let e = fit.m_hat[k] - truth(fit.grid[k]);
        e * e
    };
    Ok(inside
        .windows(2)
        .map(|w| 0.5 * (fit.grid[w[1]] - fit.grid[w[0]]) * (sq(w[0]) + sq(w[1])))
        .sum())
}
