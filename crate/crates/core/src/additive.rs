//! Additive covariate-adjusted model fitted by backfitting on generated
//! predictors and responses.

use crate::bandwidth::{min_max, plugin_bandwidth};
use crate::distortion::{DistortionMethod, ZeroDetection};
use crate::error::{Error, Result};
use crate::pipeline::{fit_variable, VariableFit};
use crate::predictors::{density_trim, DENSITY_TRIM_FRACTION};
use crate::smoothing::{mean, uniform_grid, Curve, KernelSpec, LocalSmoother};

/// Observations `(u, x~_1..x~_d, y~)`. The first `d1` predictor columns are
/// observed without distortion; at least one column is distorted.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveSample {
    pub u: Vec<f64>,
    /// Predictor columns.
    pub x_tilde: Vec<Vec<f64>>,
    pub y_tilde: Vec<f64>,
    pub d1: usize,
}

impl AdditiveSample {
    pub fn new(u: Vec<f64>, x_tilde: Vec<Vec<f64>>, y_tilde: Vec<f64>, d1: usize) -> Result<Self> {
        let n = u.len();
        if x_tilde.is_empty() {
            return Err(Error::InvalidInput("at least one predictor is required".into()));
        }
        if d1 >= x_tilde.len() {
            return Err(Error::InvalidInput(format!(
                "d1 = {d1} leaves none of the {} predictors distorted",
                x_tilde.len()
            )));
        }
        if y_tilde.len() != n || x_tilde.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("sample columns differ in length".into()));
        }
        if n < 20 {
            return Err(Error::TooFewPoints { needed: 20, got: n });
        }
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("u must lie in [0, 1]".into()));
        }
        Ok(Self {
            u,
            x_tilde,
            y_tilde,
            d1,
        })
    }

    pub fn d(&self) -> usize {
        self.x_tilde.len()
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }
}

/// Distortion pipelines for the distorted predictors (in column order)
/// and the response.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMethods {
    pub columns: Vec<DistortionMethod>,
    pub response: DistortionMethod,
}

impl VariableMethods {
    pub fn uniform(d2: usize, method: DistortionMethod) -> Self {
        Self {
            columns: vec![method; d2],
            response: method,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveConfig {
    pub max_iter: usize,
    /// Relative sup-norm change below which the sweeps stop.
    pub tol: f64,
    pub grid_points: usize,
    pub trim_fraction: f64,
    /// Fixed component bandwidths; plug-in on the first sweep otherwise.
    pub bandwidths: Option<Vec<f64>>,
    pub detection: ZeroDetection,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-4,
            grid_points: 101,
            trim_fraction: DENSITY_TRIM_FRACTION,
            bandwidths: None,
            detection: ZeroDetection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveFit {
    pub m0_hat: f64,
    pub components: Vec<Curve>,
    pub iterations: usize,
    pub converged: bool,
    pub bandwidths: Vec<f64>,
    /// Generated predictor columns at every sample index.
    pub x_hat: Vec<Vec<f64>>,
    pub y_hat: Vec<f64>,
    /// Sorted indices used by the backfit.
    pub retained: Vec<usize>,
    /// Residual sum of squares over the retained indices after each sweep.
    pub objective: Vec<f64>,
}

impl AdditiveFit {
    /// `m0 + sum_j m_j(x_j)`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.m0_hat
            + self
                .components
                .iter()
                .zip(x)
                .map(|(c, &v)| c.interpolate(v))
                .sum::<f64>()
    }
}

/// Replaces invalid entries by linear interpolation between the nearest
/// valid neighbours (constant beyond the outermost valid ones).
fn fill_invalid(values: &mut [f64], valid: &[bool], grid: &[f64]) {
    let idx: Vec<usize> = (0..values.len()).filter(|&k| valid[k]).collect();
    if idx.is_empty() {
        return;
    }
    for k in 0..values.len() {
        if valid[k] {
            continue;
        }
        let hi = idx.partition_point(|&i| i < k);
        values[k] = if hi == 0 {
            values[idx[0]]
        } else if hi == idx.len() {
            values[idx[idx.len() - 1]]
        } else {
            let (a, b) = (idx[hi - 1], idx[hi]);
            let w = (grid[k] - grid[a]) / (grid[b] - grid[a]);
            values[a] * (1.0 - w) + values[b] * w
        };
    }
}

fn smooth_component(xs: &[f64], rs: &[f64], grid: &[f64], h: f64) -> Result<Curve> {
    let smoother = LocalSmoother::new(xs, rs, KernelSpec::TRIWEIGHT)?;
    let mut curve = smoother.curve(grid, 1, h)?;
    let mask = curve.valid_mask.clone();
    fill_invalid(&mut curve.values, &mask, grid);
    Ok(curve)
}

fn rss(y: &[f64], m0: f64, fitted: &[Vec<f64>]) -> f64 {
    (0..y.len())
        .map(|i| {
            let r = y[i] - m0 - fitted.iter().map(|f| f[i]).sum::<f64>();
            r * r
        })
        .sum()
}

/// Zero-initialized backfitting with recentred components.
pub fn backfit(
    sample: &AdditiveSample,
    methods: &VariableMethods,
    config: &AdditiveConfig,
) -> Result<AdditiveFit> {
    let d = sample.d();
    let d2 = d - sample.d1;
    if methods.columns.len() != d2 {
        return Err(Error::InvalidInput(format!(
            "{} column methods for {d2} distorted predictors",
            methods.columns.len()
        )));
    }
    let n = sample.n();
    let u = &sample.u;
    let det = &config.detection;

    let mut fits: Vec<VariableFit> = Vec::with_capacity(d2);
    for (k, &m) in methods.columns.iter().enumerate() {
        fits.push(fit_variable(u, &sample.x_tilde[sample.d1 + k], m, None, None, det)?);
    }
    let yfit = fit_variable(u, &sample.y_tilde, methods.response, None, None, det)?;

    let x_hat: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            if j < sample.d1 {
                sample.x_tilde[j].clone()
            } else {
                let f = &fits[j - sample.d1].fit;
                sample.x_tilde[j].iter().zip(&f.at_sample).map(|(x, p)| x / p).collect()
            }
        })
        .collect();
    let y_hat: Vec<f64> = sample
        .y_tilde
        .iter()
        .zip(&yfit.fit.at_sample)
        .map(|(y, p)| y / p)
        .collect();
    let passes = |v: &VariableFit, i: usize| {
        v.fit.method == DistortionMethod::Basic || v.fit.pre_scale_at_sample[i].abs() >= v.rho
    };
    let trimmed = if config.trim_fraction > 0.0 {
        density_trim(u, config.trim_fraction)?
    } else {
        Vec::new()
    };
    let retained: Vec<usize> = (0..n)
        .filter(|&i| y_hat[i].is_finite() && x_hat.iter().all(|c| c[i].is_finite()))
        .filter(|&i| passes(&yfit, i) && fits.iter().all(|f| passes(f, i)))
        .filter(|i| trimmed.binary_search(i).is_err())
        .collect();
    if retained.len() < 20 {
        return Err(if retained.is_empty() {
            Error::EmptyRetainedSet
        } else {
            Error::TooFewPoints {
                needed: 20,
                got: retained.len(),
            }
        });
    }

    let y: Vec<f64> = retained.iter().map(|&i| y_hat[i]).collect();
    let xs: Vec<Vec<f64>> = x_hat
        .iter()
        .map(|c| retained.iter().map(|&i| c[i]).collect())
        .collect();
    let core = backfit_generated(&xs, &y, config)?;
    Ok(AdditiveFit {
        m0_hat: core.m0_hat,
        components: core.components,
        iterations: core.iterations,
        converged: core.converged,
        bandwidths: core.bandwidths,
        x_hat,
        y_hat,
        retained,
        objective: core.objective,
    })
}

/// Result of the sweeps on fixed predictor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BackfitCore {
    pub m0_hat: f64,
    pub components: Vec<Curve>,
    pub iterations: usize,
    pub converged: bool,
    pub bandwidths: Vec<f64>,
    pub objective: Vec<f64>,
}

/// Backfitting sweeps of `y` on the predictor columns `xs`.
pub fn backfit_generated(xs: &[Vec<f64>], y: &[f64], config: &AdditiveConfig) -> Result<BackfitCore> {
    let d = xs.len();
    if d == 0 || xs.iter().any(|c| c.len() != y.len()) {
        return Err(Error::InvalidInput("predictor columns and response differ in length".into()));
    }
    let grids: Vec<Vec<f64>> = xs
        .iter()
        .map(|c| {
            let (lo, hi) = min_max(c);
            if hi > lo {
                Ok(uniform_grid(lo, hi, config.grid_points))
            } else {
                Err(Error::DegenerateDesign)
            }
        })
        .collect::<Result<_>>()?;

    let mut m0 = mean(y);
    let mut components: Vec<Curve> = grids
        .iter()
        .map(|g| Curve {
            grid: g.clone(),
            values: vec![0.0; g.len()],
            valid_mask: vec![true; g.len()],
        })
        .collect();
    let mut fitted: Vec<Vec<f64>> = vec![vec![0.0; y.len()]; d];
    let mut bandwidths = config.bandwidths.clone().unwrap_or_default();
    if !bandwidths.is_empty() && bandwidths.len() != d {
        return Err(Error::InvalidInput(format!("{} bandwidths for {d} components", bandwidths.len())));
    }
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let partial: Vec<f64> = (0..y.len())
                .map(|i| {
                    y[i] - m0 - (0..d).filter(|&k| k != j).map(|k| fitted[k][i]).sum::<f64>()
                })
                .collect();
            if bandwidths.len() < d {
                bandwidths.push(plugin_bandwidth(&xs[j], &partial)?);
            }
            let mut curve = smooth_component(&xs[j], &partial, &grids[j], bandwidths[j])?;
            let mut at: Vec<f64> = xs[j].iter().map(|&x| curve.interpolate(x)).collect();
            let shift = mean(&at);
            curve.values.iter_mut().for_each(|v| *v -= shift);
            at.iter_mut().for_each(|v| *v -= shift);
            m0 += shift;

            let old = &components[j].values;
            let change = old
                .iter()
                .zip(&curve.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let size = curve.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let rel = if change == 0.0 { 0.0 } else { change / size.max(1e-10) };
            worst = worst.max(rel);
            components[j] = curve;
            fitted[j] = at;
        }
        objective.push(rss(&y, m0, &fitted));
        if worst < config.tol {
            converged = true;
            break;
        }
    }

    Ok(BackfitCore {
        m0_hat: m0,
        components,
        iterations,
        converged,
        bandwidths,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_sample(n: usize, seed: u64) -> AdditiveSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + x1[i] + 2.0 * x2[i] + 0.1 * (rng.random::<f64>() - 0.5))
            .collect();
        AdditiveSample::new(u, vec![x1, x2], y, 0).unwrap()
    }

    #[test]
    fn components_are_centred() {
        let s = linear_sample(400, 1);
        let methods = VariableMethods::uniform(2, DistortionMethod::Basic);
        let fit = backfit(&s, &methods, &AdditiveConfig::default()).unwrap();
        assert!(fit.converged);
        for (j, c) in fit.components.iter().enumerate() {
            let m: f64 = fit
                .retained
                .iter()
                .map(|&i| c.interpolate(fit.x_hat[j][i]))
                .sum::<f64>()
                / fit.retained.len() as f64;
            assert!(m.abs() < 1e-10, "{m}");
        }
    }

    #[test]
    fn fill_invalid_interpolates() {
        let grid = [0.0, 1.0, 2.0, 3.0, 4.0];
        let mut v = [f64::NAN, 1.0, f64::NAN, 3.0, f64::NAN];
        fill_invalid(&mut v, &[false, true, false, true, false], &grid);
        assert_eq!(v, [1.0, 1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let u = vec![0.5; 30];
        assert!(AdditiveSample::new(u.clone(), vec![], vec![0.0; 30], 0).is_err());
        assert!(AdditiveSample::new(u.clone(), vec![vec![0.0; 30]], vec![0.0; 30], 1).is_err());
        assert!(AdditiveSample::new(u, vec![vec![0.0; 29]], vec![0.0; 30], 0).is_err());
        let s = linear_sample(100, 2);
        let err = backfit(
            &s,
            &VariableMethods::uniform(1, DistortionMethod::Signed),
            &AdditiveConfig::default(),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
