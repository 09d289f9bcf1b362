//! End-to-end fitting of the covariate-adjusted estimators with data-driven
//! tuning.

use crate::bandwidth::{
    empirical_quantile, plugin_bandwidth, plugin_details, ridge_threshold, BandwidthSet,
    PluginConfig, RidgeFlavor, RidgePair, DISTORTION_SHRINK_EXPONENT, REGRESSION_PILOT_BLOCKS,
};
use crate::distortion::{
    detect_sign_changes_with, distortion_grid, estimate_abs_curve, estimate_for, DistortedSample,
    DistortionFit, DistortionMethod, SignChange, ZeroDetection,
};
use crate::error::{Error, Result};
use crate::estimator::{fit_mhat, fit_naive, fit_oracle, RegressionFit};
use crate::predictors::{build_predictors, PredictorSet, DENSITY_TRIM_FRACTION};
use crate::smoothing::uniform_grid;

/// Optional overrides of the data-driven choices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuning {
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub h: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub trim_fraction: f64,
    pub degree: usize,
    pub detection: ZeroDetection,
    /// Block cap of the quartic pilot behind the final regression
    /// bandwidth.
    pub pilot_blocks: usize,
}

impl Tuning {
    fn final_bandwidth(&self, xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
        match self.h {
            Some(h) => Ok((h, h)),
            None => {
                let cfg = PluginConfig {
                    max_blocks: self.pilot_blocks,
                    ..PluginConfig::default()
                };
                let d = plugin_details(xs, ys, &cfg)?;
                Ok((d.bandwidth, d.pilot))
            }
        }
    }
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            g1: None,
            g2: None,
            h: None,
            rho1: None,
            rho2: None,
            trim_fraction: DENSITY_TRIM_FRACTION,
            degree: 1,
            detection: ZeroDetection::default(),
            pilot_blocks: REGRESSION_PILOT_BLOCKS,
        }
    }
}

/// Evaluation grid of a final fit.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Points(Vec<f64>),
    /// Equally spaced points between empirical quantiles of the predictor
    /// actually used, with optional fixed ends.
    Quantiles {
        lo_p: f64,
        hi_p: f64,
        points: usize,
        lo: Option<f64>,
        hi: Option<f64>,
    },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Quantiles {
            lo_p: 0.025,
            hi_p: 0.975,
            points: 101,
            lo: None,
            hi: None,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, xs: &[f64]) -> Result<Vec<f64>> {
        match self {
            GridSpec::Points(g) => Ok(g.clone()),
            &GridSpec::Quantiles {
                lo_p,
                hi_p,
                points,
                lo,
                hi,
            } => {
                let mut sorted: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
                if sorted.is_empty() {
                    return Err(Error::EmptyRetainedSet);
                }
                sorted.sort_by(f64::total_cmp);
                let a = lo.unwrap_or_else(|| empirical_quantile(&sorted, lo_p));
                let b = hi.unwrap_or_else(|| empirical_quantile(&sorted, hi_p));
                if !(b > a) || points < 2 {
                    return Err(Error::InvalidInput(format!("empty grid range [{a}, {b}]")));
                }
                Ok(uniform_grid(a, b, points))
            }
        }
    }
}

/// Everything produced by one adjusted fit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedFit {
    pub fit: RegressionFit,
    pub bandwidths: BandwidthSet,
    pub phi: DistortionFit,
    pub psi: DistortionFit,
    pub predictors: PredictorSet,
}

fn shrink(n: usize) -> f64 {
    (n as f64).powf(DISTORTION_SHRINK_EXPONENT)
}

/// Plug-in bandwidth for the distortion smoother of one variable. The
/// positive and sign-recovering pipelines smooth `|z|`, so their pilot is
/// computed on `|z|`; the signed pipeline uses `z`.
pub fn distortion_pilot(u: &[f64], z: &[f64], method: DistortionMethod) -> Result<f64> {
    match method {
        DistortionMethod::Signed => plugin_bandwidth(u, z),
        DistortionMethod::Basic | DistortionMethod::General => {
            let abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
            plugin_bandwidth(u, &abs)
        }
    }
}

/// A fitted distortion with the tuning that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableFit {
    pub fit: DistortionFit,
    pub g: f64,
    pub rho: f64,
}

/// Distortion fit of one variable with plug-in smoothing and ridge
/// threshold unless overridden.
pub fn fit_variable(
    u: &[f64],
    z: &[f64],
    method: DistortionMethod,
    g_override: Option<f64>,
    rho_override: Option<f64>,
    detection: &ZeroDetection,
) -> Result<VariableFit> {
    let grid = distortion_grid(u)?;
    let n = u.len();
    let gpi = match g_override {
        Some(g) => g / shrink(n),
        None => distortion_pilot(u, z, method)?,
    };
    let g = g_override.unwrap_or(shrink(n) * gpi);
    let fit = estimate_for(u, z, method, g, &grid, detection)?;
    let rho = match (rho_override, method) {
        (Some(r), _) => r,
        (None, DistortionMethod::Basic) => 0.0,
        (None, DistortionMethod::Signed) => ridge_threshold(u, z, RidgeFlavor::Signed, gpi)?,
        (None, DistortionMethod::General) => ridge_threshold(u, z, RidgeFlavor::Absolute, gpi)?,
    };
    Ok(VariableFit { fit, g, rho })
}

/// Smoothing bandwidth the sign-change detector uses for one variable.
pub fn detection_bandwidth(u: &[f64], z: &[f64], g_override: Option<f64>) -> Result<f64> {
    match g_override {
        Some(g) => Ok(g),
        None => Ok(shrink(u.len()) * distortion_pilot(u, z, DistortionMethod::General)?),
    }
}

/// Sign changes of one distortion with their slope-jump evidence.
pub fn detect_zeros(
    u: &[f64],
    z: &[f64],
    g_override: Option<f64>,
    detection: &ZeroDetection,
) -> Result<(f64, Vec<SignChange>)> {
    let g = detection_bandwidth(u, z, g_override)?;
    let grid = distortion_grid(u)?;
    let star = estimate_abs_curve(u, z, g, &grid)?;
    let abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    Ok((g, detect_sign_changes_with(&star, u, &abs, g, detection)))
}

/// Distortion fits, predictors and the trimmed final regression.
pub fn fit_adjusted(
    sample: &DistortedSample,
    x_method: DistortionMethod,
    y_method: DistortionMethod,
    grid: &GridSpec,
    tuning: &Tuning,
) -> Result<AdjustedFit> {
    let u = &sample.u;
    let det = &tuning.detection;
    let x = fit_variable(u, &sample.x_tilde, x_method, tuning.g1, tuning.rho1, det)?;
    let y = fit_variable(u, &sample.y_tilde, y_method, tuning.g2, tuning.rho2, det)?;
    let rho = RidgePair {
        rho1: x.rho,
        rho2: y.rho,
    };
    let mut predictors = build_predictors(sample, &x.fit, &y.fit, rho)?;
    if tuning.trim_fraction > 0.0 {
        predictors = predictors.with_density_trim(&sample.u, tuning.trim_fraction)?;
    }
    let (xs, ys) = predictors.retained_pairs();
    let (h, h2) = tuning.final_bandwidth(&xs, &ys)?;
    let grid = grid.resolve(&xs)?;
    let fit = fit_mhat(&predictors, &grid, h, tuning.degree)?;
    Ok(AdjustedFit {
        fit,
        bandwidths: BandwidthSet {
            g1: x.g,
            g2: y.g,
            h,
            h2,
        },
        phi: x.fit,
        psi: y.fit,
        predictors,
    })
}

/// Naive fit with a plug-in bandwidth on the distorted pairs.
pub fn fit_naive_auto(sample: &DistortedSample, grid: &GridSpec, tuning: &Tuning) -> Result<RegressionFit> {
    let (h, _) = tuning.final_bandwidth(&sample.x_tilde, &sample.y_tilde)?;
    fit_naive(sample, &grid.resolve(&sample.x_tilde)?, h, tuning.degree)
}

/// Oracle fit with a plug-in bandwidth on the undistorted pairs.
pub fn fit_oracle_auto(x: &[f64], y: &[f64], grid: &GridSpec, tuning: &Tuning) -> Result<RegressionFit> {
    let (h, _) = tuning.final_bandwidth(x, y)?;
    fit_oracle(x, y, &grid.resolve(x)?, h, tuning.degree)
}
