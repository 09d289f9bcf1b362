//! Monte Carlo replication of the integrated squared error.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::models::SimModel;
use super::{generate_with, Family};
use crate::bandwidth::empirical_quantile;
use crate::distortion::DistortionMethod;
use crate::error::{Error, Result};
use crate::estimator::{ise, MethodTag, RegressionFit};
use crate::pipeline::{fit_adjusted, fit_naive_auto, fit_oracle_auto, GridSpec, Tuning};
use crate::smoothing::uniform_grid;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for replication `rep` of a study seeded by `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ rep))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<MethodTag>,
    pub tuning: Tuning,
    /// Points of the ISE grid over the central 95% of X.
    pub grid_points: usize,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl StudyConfig {
    pub fn new(n: usize, reps: usize, seed: u64, methods: Vec<MethodTag>) -> Self {
        Self {
            n,
            reps,
            seed,
            methods,
            tuning: Tuning::default(),
            grid_points: 101,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: MethodTag,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub model: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<MethodSummary>,
}

impl StudySummary {
    pub fn row(&self, method: MethodTag) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// `100 * ISE` of every requested method for one replication, in the order
/// of the configured methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub values: Vec<std::result::Result<f64, Error>>,
}

/// Errors with `MethodInapplicable` when the design rules out `method`:
/// the positive-distortion estimator needs positive distortions and the
/// mean-based estimator needs variables with means away from zero.
pub fn check_applicable(model: &SimModel, method: MethodTag) -> Result<()> {
    let ok = match method {
        MethodTag::New1 => model.has_positive_distortions(),
        MethodTag::New2 => model.family <= Family::III,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::MethodInapplicable {
            method: method.name().to_string(),
            model: model.id.to_string(),
        })
    }
}

fn fit_method(
    method: MethodTag,
    sim: &super::SimSample,
    grid: &GridSpec,
    tuning: &Tuning,
) -> Result<RegressionFit> {
    let both = |m| fit_adjusted(&sim.sample, m, m, grid, tuning).map(|f| f.fit);
    match method {
        MethodTag::Oracle => fit_oracle_auto(&sim.x, &sim.y, grid, tuning),
        MethodTag::Naive => fit_naive_auto(&sim.sample, grid, tuning),
        MethodTag::New1 => both(DistortionMethod::Basic),
        MethodTag::New2 => both(DistortionMethod::Signed),
        MethodTag::New3 => both(DistortionMethod::General),
    }
}

fn replicate(model: &SimModel, cfg: &StudyConfig, rep: usize) -> Replicate {
    let mut rng = replication_rng(cfg.seed, rep as u64);
    let sim = match generate_with(model, cfg.n, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            return Replicate {
                values: cfg.methods.iter().map(|_| Err(e.clone())).collect(),
            }
        }
    };
    let (a, b) = model.ise_range();
    let grid = GridSpec::Points(uniform_grid(a, b, cfg.grid_points));
    let values = cfg
        .methods
        .iter()
        .map(|&method| {
            let fit = fit_method(method, &sim, &grid, &cfg.tuning)?;
            Ok(100.0 * ise(&fit, |x| model.m.eval(x), a, b)?)
        })
        .collect();
    Replicate { values }
}

/// Per-replication results, independent of the worker count.
pub fn run_study_detailed(model: &SimModel, cfg: &StudyConfig) -> Result<Vec<Replicate>> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    for &m in &cfg.methods {
        check_applicable(model, m)?;
    }
    let run = || -> Vec<Replicate> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| replicate(model, cfg, r))
            .collect()
    };
    if cfg.workers == 0 {
        Ok(run())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        Ok(pool.install(run))
    }
}

/// First quartile, median and third quartile with linear interpolation;
/// NaN for an empty input.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (
        empirical_quantile(&v, 0.25),
        empirical_quantile(&v, 0.5),
        empirical_quantile(&v, 0.75),
    )
}

pub fn run_study(model: &SimModel, cfg: &StudyConfig) -> Result<StudySummary> {
    let reps = run_study_detailed(model, cfg)?;
    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut ok = Vec::with_capacity(reps.len());
            let mut failures = 0;
            for (r, rep) in reps.iter().enumerate() {
                match &rep.values[k] {
                    Ok(v) => ok.push(*v),
                    Err(e) => {
                        failures += 1;
                        log::debug!("{} rep {r} {}: {e}", model.id, method.name());
                    }
                }
            }
            let (q1, median, q3) = quartiles(&ok);
            MethodSummary {
                method,
                q1,
                median,
                q3,
                failures,
            }
        })
        .collect();
    Ok(StudySummary {
        model: model.id.to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        rows,
    })
}

/// Writes `model,n,method,q1,median,q3,failures,reps,seed` rows.
pub fn write_summary_csv<W: Write>(summaries: &[StudySummary], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(format!("writing csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "n", "method", "q1", "median", "q3", "failures", "reps", "seed"])
        .map_err(io)?;
    for s in summaries {
        for r in &s.rows {
            w.write_record([
                s.model.clone(),
                s.n.to_string(),
                r.method.name().to_string(),
                format!("{:.16e}", r.q1),
                format!("{:.16e}", r.median),
                format!("{:.16e}", r.q3),
                r.failures.to_string(),
                s.reps.to_string(),
                s.seed.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("writing csv: {e}")))?;
    Ok(())
}
