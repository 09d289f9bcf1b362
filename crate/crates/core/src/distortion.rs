//! Estimation of the multiplicative distortion curves.
//!
//! Three pipelines are offered, in increasing generality:
//!
//! * [`DistortionMethod::Basic`] smooths `|z|` on `u` and divides by the
//!   mean of `|z|`. Valid when the distortion is strictly positive.
//! * [`DistortionMethod::Signed`] smooths `z` on `u` and divides by the mean
//!   of `z`. Valid when the undistorted variable has a mean away from zero.
//! * [`DistortionMethod::General`] smooths `|z|`, locates the sign changes
//!   of the distortion as kinked local minima of that curve, refits each
//!   piece separately, alternates signs across the pieces, orients the
//!   result so its mean is positive and rescales it to mean one.

use crate::bandwidth::{empirical_quantile, min_max};
use crate::error::{Error, Result};
use crate::smoothing::{mean, sample_sd, uniform_grid, Curve, KernelSpec, LocalSmoother};

/// Number of grid points used for distortion curves.
pub const DISTORTION_GRID_POINTS: usize = 201;
/// Minimum sample points a piecewise segment must contain.
pub const MIN_SEGMENT_POINTS: usize = 5;
const MIN_SAMPLE: usize = 20;
const MEAN_GUARD: f64 = 1e-8;

/// The observed triples `(u_i, x~_i, y~_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortedSample {
    pub u: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
}

impl DistortedSample {
    pub fn new(u: Vec<f64>, x_tilde: Vec<f64>, y_tilde: Vec<f64>) -> Result<Self> {
        let n = u.len();
        if x_tilde.len() != n || y_tilde.len() != n {
            return Err(Error::InvalidInput("sample columns differ in length".into()));
        }
        if n < MIN_SAMPLE {
            return Err(Error::TooFewPoints {
                needed: MIN_SAMPLE,
                got: n,
            });
        }
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("u must lie in [0, 1]".into()));
        }
        if x_tilde.iter().chain(&y_tilde).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        Ok(Self { u, x_tilde, y_tilde })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn column(&self, target: Target) -> &[f64] {
        match target {
            Target::X => &self.x_tilde,
            Target::Y => &self.y_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistortionMethod {
    Basic,
    Signed,
    General,
}

/// An estimated distortion curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionFit {
    /// Final estimate on a grid over the observed `u` range.
    pub curve: Curve,
    /// Final estimate at each `u_i`; NaN where the local fit was ill-posed.
    pub at_sample: Vec<f64>,
    /// The estimate before division by its scale, at each `u_i`. This is the
    /// curve the ridge thresholds are compared against.
    pub pre_scale_at_sample: Vec<f64>,
    /// Estimated sign-change points.
    pub tau: Vec<f64>,
    pub scale: f64,
    pub orientation: f64,
    pub method: DistortionMethod,
}

/// 201 equally spaced points on `[min u, max u]`.
pub fn distortion_grid(u: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = min_max(u);
    if !(hi > lo) {
        return Err(Error::DegenerateDesign);
    }
    Ok(uniform_grid(lo, hi, DISTORTION_GRID_POINTS))
}

fn local_linear(u: &[f64], z: &[f64], g: f64, grid: &[f64]) -> Result<(Curve, Vec<f64>)> {
    let smoother = LocalSmoother::new(u, z, KernelSpec::TRIWEIGHT)?;
    let curve = smoother.curve(grid, 1, g)?;
    let at = smoother
        .values_at(u, 1, g)?
        .into_iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect();
    Ok((curve, at))
}

fn scaled(curve: &Curve, factor: f64) -> Curve {
    Curve {
        grid: curve.grid.clone(),
        values: curve.values.iter().map(|v| v * factor).collect(),
        valid_mask: curve.valid_mask.clone(),
    }
}

/// Local linear fit of `z` on `u` divided by the sample mean of `z`.
pub fn estimate_signed(u: &[f64], z_tilde: &[f64], g: f64, grid: &[f64]) -> Result<DistortionFit> {
    let m = mean(z_tilde);
    let sd = sample_sd(z_tilde);
    if !(m.abs() > MEAN_GUARD * sd) || m == 0.0 {
        return Err(Error::MeanNearZero { mean: m, sd });
    }
    let (curve, raw) = local_linear(u, z_tilde, g, grid)?;
    Ok(DistortionFit {
        curve: scaled(&curve, 1.0 / m),
        at_sample: raw.iter().map(|v| v / m).collect(),
        pre_scale_at_sample: raw,
        tau: Vec::new(),
        scale: m.abs(),
        orientation: m.signum(),
        method: DistortionMethod::Signed,
    })
}

fn absolute(z: &[f64]) -> Result<Vec<f64>> {
    if z.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSample("distorted variable is identically zero"));
    }
    Ok(z.iter().map(|v| v.abs()).collect())
}

/// Local linear fit of `|z|` on `u` divided by the sample mean of `|z|`.
pub fn estimate_basic(u: &[f64], z_tilde: &[f64], g: f64, grid: &[f64]) -> Result<DistortionFit> {
    let abs_z = absolute(z_tilde)?;
    let m = mean(&abs_z);
    let (curve, raw) = local_linear(u, &abs_z, g, grid)?;
    Ok(DistortionFit {
        curve: scaled(&curve, 1.0 / m),
        at_sample: raw.iter().map(|v| v / m).collect(),
        pre_scale_at_sample: raw,
        tau: Vec::new(),
        scale: m,
        orientation: 1.0,
        method: DistortionMethod::Basic,
    })
}

/// Raw local linear fit of `|z|` on `u`, neither signed nor scaled.
pub fn estimate_abs_curve(u: &[f64], z_tilde: &[f64], g: f64, grid: &[f64]) -> Result<Curve> {
    let abs_z = absolute(z_tilde)?;
    LocalSmoother::new(u, &abs_z, KernelSpec::TRIWEIGHT)?.curve(grid, 1, g)
}

/// Knobs of the sign-change detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDetection {
    /// Slope-jump threshold in standard errors.
    pub kappa: f64,
    /// Candidates must lie below this quantile of the curve values.
    pub value_quantile: f64,
    /// Candidates closer than `merge_factor * g` are merged.
    pub merge_factor: f64,
}

impl Default for ZeroDetection {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            value_quantile: 0.25,
            merge_factor: 2.0,
        }
    }
}

/// One accepted sign change with its evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignChange {
    pub tau: f64,
    /// `|slope_right - slope_left| / SE`.
    pub statistic: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    /// Value of the absolute curve at `tau`.
    pub star_value: f64,
}

struct OneSided {
    slope: f64,
    rss: f64,
    sxx: f64,
    n: usize,
}

fn ols<'a>(pts: impl Iterator<Item = (&'a f64, &'a f64)>) -> Option<OneSided> {
    let pts: Vec<(f64, f64)> = pts.map(|(a, b)| (*a, *b)).collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss = pts
        .iter()
        .map(|p| {
            let r = p.1 - my - slope * (p.0 - mx);
            r * r
        })
        .sum();
    Some(OneSided { slope, rss, sxx, n })
}

/// Slope-jump test at `tau` from one-sided straight-line fits on
/// `(tau - g, tau]` and `[tau, tau + g)`.
fn slope_jump(u: &[f64], abs_z: &[f64], tau: f64, g: f64) -> Option<(f64, f64, f64)> {
    let pairs = || u.iter().zip(abs_z);
    let left = ols(pairs().filter(|(&x, _)| x > tau - g && x <= tau))?;
    let right = ols(pairs().filter(|(&x, _)| x >= tau && x < tau + g))?;
    let df = (left.n + right.n) as f64 - 4.0;
    if df <= 0.0 {
        return None;
    }
    let s2 = (left.rss + right.rss) / df;
    let se = (s2 * (1.0 / left.sxx + 1.0 / right.sxx)).sqrt();
    let jump = (right.slope - left.slope).abs();
    let stat = if se > 0.0 {
        jump / se
    } else if jump > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Some((stat, left.slope, right.slope))
}

/// Sign-change points of the distortion estimated from the absolute curve.
pub fn detect_sign_changes(star: &Curve, u: &[f64], abs_z: &[f64], g: f64) -> Vec<f64> {
    detect_sign_changes_with(star, u, abs_z, g, &ZeroDetection::default())
        .into_iter()
        .map(|c| c.tau)
        .collect()
}

pub fn detect_sign_changes_with(
    star: &Curve,
    u: &[f64],
    abs_z: &[f64],
    g: f64,
    cfg: &ZeroDetection,
) -> Vec<SignChange> {
    let vals = &star.values;
    let ok = &star.valid_mask;
    let mut finite: Vec<f64> = vals
        .iter()
        .zip(ok)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if finite.len() < 3 || u.is_empty() {
        return Vec::new();
    }
    finite.sort_by(f64::total_cmp);
    let threshold = empirical_quantile(&finite, cfg.value_quantile);
    let (ulo, uhi) = min_max(u);

    let mut kept: Vec<SignChange> = Vec::new();
    for i in 1..star.len().saturating_sub(1) {
        if !(ok[i - 1] && ok[i] && ok[i + 1]) {
            continue;
        }
        if !(vals[i] < vals[i - 1] && vals[i] < vals[i + 1]) {
            continue;
        }
        let tau = star.grid[i];
        if tau - ulo <= g || uhi - tau <= g || !(vals[i] < threshold) {
            continue;
        }
        let Some((statistic, slope_left, slope_right)) = slope_jump(u, abs_z, tau, g) else {
            continue;
        };
        if statistic > cfg.kappa {
            kept.push(SignChange {
                tau,
                statistic,
                slope_left,
                slope_right,
                star_value: vals[i],
            });
        }
    }

    let radius = cfg.merge_factor * g;
    let mut merged: Vec<SignChange> = Vec::new();
    for c in kept {
        match merged.last_mut() {
            Some(last) if c.tau - last.tau < radius => {
                if c.star_value < last.star_value {
                    *last = c;
                }
            }
            _ => merged.push(c),
        }
    }
    merged
}

/// Index `j` of the interval containing `x`: `I_0 = (-inf, tau_1)`,
/// `I_j = [tau_j, tau_{j+1})`, `I_M = [tau_M, inf)`.
pub fn segment_index(tau: &[f64], x: f64) -> usize {
    tau.partition_point(|&t| t <= x)
}

/// Absolute-curve fit computed from the sample points of one interval only.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFit {
    /// Values on the full distortion grid; `None` outside the interval or
    /// where ill-posed.
    pub on_grid: Vec<Option<f64>>,
    /// Values at every sample point; `None` outside the interval or where
    /// ill-posed.
    pub at_sample: Vec<Option<f64>>,
}

/// Separate local linear fits of `|z|` on each interval delimited by `tau`.
pub fn refit_segments(
    u: &[f64],
    abs_z: &[f64],
    tau: &[f64],
    g: f64,
    grid: &[f64],
) -> Result<Vec<SegmentFit>> {
    let members: Vec<usize> = u.iter().map(|&x| segment_index(tau, x)).collect();
    (0..=tau.len())
        .map(|j| {
            let idx: Vec<usize> = (0..u.len()).filter(|&i| members[i] == j).collect();
            if idx.len() < MIN_SEGMENT_POINTS {
                return Err(Error::EmptySegment {
                    segment: j,
                    count: idx.len(),
                    min: MIN_SEGMENT_POINTS,
                });
            }
            let su: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
            let sz: Vec<f64> = idx.iter().map(|&i| abs_z[i]).collect();
            let smoother = LocalSmoother::new(&su, &sz, KernelSpec::TRIWEIGHT)?;
            let eval = |x: f64| smoother.fit(x, 1, g).ok().map(|f| f.value());
            let on_grid = grid
                .iter()
                .map(|&x| (segment_index(tau, x) == j).then(|| eval(x)).flatten())
                .collect();
            let at_sample = (0..u.len())
                .map(|i| (members[i] == j).then(|| eval(u[i])).flatten())
                .collect();
            Ok(SegmentFit { on_grid, at_sample })
        })
        .collect()
}

/// Alternating-sign assembly, orientation and scaling of segment fits.
pub fn assemble_general(
    segments: &[SegmentFit],
    tau: &[f64],
    u: &[f64],
    grid: &[f64],
) -> Result<DistortionFit> {
    if segments.len() != tau.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} segments for {} sign changes",
            segments.len(),
            tau.len()
        )));
    }
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let grid_vals: Vec<Option<f64>> = grid
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let j = segment_index(tau, x);
            segments[j].on_grid[k].map(|v| sign(j) * v)
        })
        .collect();
    let sample_vals: Vec<Option<f64>> = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let j = segment_index(tau, x);
            segments[j].at_sample[i].map(|v| sign(j) * v)
        })
        .collect();
    let valid: Vec<f64> = sample_vals.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::AllPointsIllPosed);
    }
    let total: f64 = valid.iter().sum();
    let orientation = if total < 0.0 { -1.0 } else { 1.0 };
    let scale = (total / valid.len() as f64).abs();
    if !(scale > 0.0) {
        return Err(Error::DegenerateSample("assembled distortion has zero mean"));
    }
    let pre_scale_at_sample: Vec<f64> = sample_vals
        .iter()
        .map(|v| v.map_or(f64::NAN, |v| orientation * v))
        .collect();
    let at_sample = pre_scale_at_sample.iter().map(|v| v / scale).collect();
    let curve = Curve::new(
        grid.to_vec(),
        grid_vals
            .iter()
            .map(|v| v.map_or(f64::NAN, |v| orientation * v / scale))
            .collect(),
        grid_vals.iter().map(Option::is_some).collect(),
    )?;
    Ok(DistortionFit {
        curve,
        at_sample,
        pre_scale_at_sample,
        tau: tau.to_vec(),
        scale,
        orientation,
        method: DistortionMethod::General,
    })
}

/// Full sign-recovering pipeline for one distorted variable.
pub fn estimate_general(
    u: &[f64],
    z_tilde: &[f64],
    g: f64,
    grid: &[f64],
    cfg: &ZeroDetection,
) -> Result<DistortionFit> {
    let star = estimate_abs_curve(u, z_tilde, g, grid)?;
    let abs_z: Vec<f64> = z_tilde.iter().map(|z| z.abs()).collect();
    let tau: Vec<f64> = detect_sign_changes_with(&star, u, &abs_z, g, cfg)
        .into_iter()
        .map(|c| c.tau)
        .collect();
    let segments = refit_segments(u, &abs_z, &tau, g, grid)?;
    assemble_general(&segments, &tau, u, grid)
}

/// Dispatches to the requested pipeline.
pub fn estimate_distortion(
    sample: &DistortedSample,
    target: Target,
    method: DistortionMethod,
    g: f64,
    grid: &[f64],
) -> Result<DistortionFit> {
    estimate_distortion_with(sample, target, method, g, grid, &ZeroDetection::default())
}

pub fn estimate_distortion_with(
    sample: &DistortedSample,
    target: Target,
    method: DistortionMethod,
    g: f64,
    grid: &[f64],
    cfg: &ZeroDetection,
) -> Result<DistortionFit> {
    estimate_for(&sample.u, sample.column(target), method, g, grid, cfg)
}

/// Dispatch on raw columns.
pub fn estimate_for(
    u: &[f64],
    z_tilde: &[f64],
    method: DistortionMethod,
    g: f64,
    grid: &[f64],
    cfg: &ZeroDetection,
) -> Result<DistortionFit> {
    match method {
        DistortionMethod::Basic => estimate_basic(u, z_tilde, g, grid),
        DistortionMethod::Signed => estimate_signed(u, z_tilde, g, grid),
        DistortionMethod::General => estimate_general(u, z_tilde, g, grid, cfg),
    }
}
