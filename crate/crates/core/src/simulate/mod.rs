//! Simulation designs, sampling and the Monte Carlo study runner.

mod models;
mod study;

pub use models::{
    catalog, distortion_mean, find_model, m1, m2, m3, normalizing_constant,
    normalizing_constant_fn, BaseCurve, BetaDist, DistortionShape, Family, NoiseFn,
    RegressionFn, SimModel, XDist,
};
pub use study::{
    check_applicable, quartiles, replication_rng, run_study, run_study_detailed, write_summary_csv,
    MethodSummary, Replicate, StudyConfig, StudySummary,
};

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};

use crate::distortion::DistortedSample;
use crate::error::{Error, Result};

/// A generated sample together with the unobserved undistorted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub sample: DistortedSample,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draws `n` observations from `model` with the stream derived from
/// `seed`.
pub fn generate_sample(model: &SimModel, n: usize, seed: u64) -> Result<SimSample> {
    let mut rng = replication_rng(seed, 0);
    generate_with(model, n, &mut rng)
}

pub fn generate_with<R: Rng>(model: &SimModel, n: usize, rng: &mut R) -> Result<SimSample> {
    if n < 20 {
        return Err(Error::TooFewPoints { needed: 20, got: n });
    }
    let beta = Beta::new(model.u_dist.a, model.u_dist.b)
        .map_err(|e| Error::InvalidInput(format!("beta: {e}")))?;
    let u: Vec<f64> = (0..n).map(|_| beta.sample(rng)).collect();
    let x: Vec<f64> = match model.x_dist {
        XDist::Normal { mean, sd } => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            })
            .collect(),
        XDist::ShiftedChiSq { df, shift, scale } => {
            let chi = ChiSquared::new(df).map_err(|e| Error::InvalidInput(format!("chi2: {e}")))?;
            (0..n).map(|_| (chi.sample(rng) - shift) / scale).collect()
        }
    };
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let e: f64 = StandardNormal.sample(rng);
            model.m.eval(xi) + model.sigma.eval(xi) * e
        })
        .collect();
    let x_tilde = u.iter().zip(&x).map(|(&ui, xi)| model.phi(ui) * xi).collect();
    let y_tilde = u.iter().zip(&y).map(|(&ui, yi)| model.psi(ui) * yi).collect();
    Ok(SimSample {
        sample: DistortedSample::new(u, x_tilde, y_tilde)?,
        x,
        y,
    })
}
