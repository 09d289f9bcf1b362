//! Generated predictors and responses, and the index sets that trim them.

use crate::bandwidth::RidgePair;
use crate::distortion::{DistortedSample, DistortionFit, DistortionMethod};
use crate::error::{Error, Result};
use crate::smoothing::{kde, KdeBandwidth, KernelSpec};

/// Default share of low-density `u` observations excluded from the final fit.
pub const DENSITY_TRIM_FRACTION: f64 = 0.05;

/// The three covariate-adjusted estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Positive distortions, no ridge trimming.
    New1,
    /// Signed distortions estimated through the variable means.
    New2,
    /// Sign-recovering piecewise distortion estimate.
    New3,
}

impl Method {
    pub fn distortion_method(self) -> DistortionMethod {
        match self {
            Method::New1 => DistortionMethod::Basic,
            Method::New2 => DistortionMethod::Signed,
            Method::New3 => DistortionMethod::General,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::New1 => "NEW1",
            Method::New2 => "NEW2",
            Method::New3 => "NEW3",
        }
    }

    fn rank(m: DistortionMethod) -> Method {
        match m {
            DistortionMethod::Basic => Method::New1,
            DistortionMethod::Signed => Method::New2,
            DistortionMethod::General => Method::New3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    /// Sorted indices used by the final regression.
    pub retained: Vec<usize>,
    /// The most general method among the two distortion fits.
    pub method: Method,
    pub rho: RidgePair,
    /// Sorted indices removed for low `u` density.
    pub density_trimmed: Vec<usize>,
}

impl PredictorSet {
    /// Removes the low-density observations from the retained set.
    pub fn with_density_trim(mut self, u: &[f64], fraction: f64) -> Result<Self> {
        let removed = density_trim(u, fraction)?;
        self.retained.retain(|i| removed.binary_search(i).is_err());
        if self.retained.is_empty() {
            return Err(Error::EmptyRetainedSet);
        }
        self.density_trimmed = removed;
        Ok(self)
    }

    pub fn retained_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        self.retained
            .iter()
            .map(|&i| (self.x_hat[i], self.y_hat[i]))
            .unzip()
    }
}

/// Divides the observations by the estimated distortions and keeps the
/// indices whose trimming statistics clear the ridge thresholds.
///
/// The trimming statistic is the magnitude of the unscaled distortion
/// estimate at `u_i`. Fits from the basic pipeline are never trimmed.
pub fn build_predictors(
    sample: &DistortedSample,
    phifit: &DistortionFit,
    psifit: &DistortionFit,
    rho: RidgePair,
) -> Result<PredictorSet> {
    let n = sample.n();
    if phifit.at_sample.len() != n || psifit.at_sample.len() != n {
        return Err(Error::InvalidInput("distortion fits do not match the sample".into()));
    }
    let x_hat: Vec<f64> = sample
        .x_tilde
        .iter()
        .zip(&phifit.at_sample)
        .map(|(x, p)| x / p)
        .collect();
    let y_hat: Vec<f64> = sample
        .y_tilde
        .iter()
        .zip(&psifit.at_sample)
        .map(|(y, p)| y / p)
        .collect();
    let passes = |fit: &DistortionFit, threshold: f64, i: usize| {
        fit.method == DistortionMethod::Basic || fit.pre_scale_at_sample[i].abs() >= threshold
    };
    let retained: Vec<usize> = (0..n)
        .filter(|&i| x_hat[i].is_finite() && y_hat[i].is_finite())
        .filter(|&i| passes(phifit, rho.rho1, i) && passes(psifit, rho.rho2, i))
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyRetainedSet);
    }
    let method = Method::rank(phifit.method).max(Method::rank(psifit.method));
    Ok(PredictorSet {
        x_hat,
        y_hat,
        retained,
        method,
        rho,
        density_trimmed: Vec::new(),
    })
}

/// Indices of the `floor(fraction * n)` observations with the smallest
/// kernel density estimate at `u_i`, sorted. Ties go to the smaller index.
pub fn density_trim(u: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "trim fraction {fraction} outside [0, 0.5)"
        )));
    }
    let count = (fraction * u.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    let dens = kde(u, KdeBandwidth::Auto, KernelSpec::TRIWEIGHT, u)?;
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| dens[a].total_cmp(&dens[b]).then(a.cmp(&b)));
    let mut out = order[..count].to_vec();
    out.sort_unstable();
    Ok(out)
}
