//! Data-driven tuning parameters.
//!
//! The plug-in bandwidth minimizes an estimate of the weighted asymptotic
//! mean integrated squared error of a local linear smoother,
//!
//! ```text
//! AMISE_w(g) = mu2^2 g^4 / 4 * theta2 + nu0 / (n g) * sigma2 * omega_mass
//! ```
//!
//! with `sigma2` from first differences of the concomitant-ordered
//! responses and `theta2` the average squared second derivative of a local
//! cubic pilot fit. The pilot bandwidth comes from quartic least-squares
//! fits, either global or on blocks of the sorted covariate with the block
//! count chosen by Mallows' Cp. The same machinery evaluated at a fixed bandwidth
//! yields the ridge thresholds used to trim generated predictors.

use std::sync::OnceLock;

use crate::distortion::DistortedSample;
use crate::error::{Error, Result};
use crate::smoothing::{kernel_integral, KernelSpec, LocalSmoother};

/// Smallest admissible ridge threshold.
pub const RHO_FLOOR: f64 = 0.1;
/// Quantile defining the low-magnitude region for the ridge weight.
pub const RIDGE_QUANTILE: f64 = 0.2;
/// Shrinkage exponent applied to plug-in bandwidths of distortion fits.
pub const DISTORTION_SHRINK_EXPONENT: f64 = -0.1;

const MIN_PLUGIN_POINTS: usize = 20;
/// Default block cap of the quartic pilot: a single global fit.
pub const PILOT_MAX_BLOCKS: usize = 1;
/// Block cap of the pilot behind the final regression bandwidth.
pub const REGRESSION_PILOT_BLOCKS: usize = 5;

/// Bandwidths of one estimation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSet {
    /// Distortion fit for the covariate.
    pub g1: f64,
    /// Distortion fit for the response.
    pub g2: f64,
    /// Final regression.
    pub h: f64,
    /// Pilot for the curvature functional of the final regression.
    pub h2: f64,
}

impl BandwidthSet {
    pub fn is_valid(&self) -> bool {
        [self.g1, self.g2, self.h, self.h2]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RidgePair {
    pub rho1: f64,
    pub rho2: f64,
}

impl RidgePair {
    pub const ZERO: RidgePair = RidgePair {
        rho1: 0.0,
        rho2: 0.0,
    };
}

/// Which curve the ridge threshold protects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeFlavor {
    /// The signed local linear fit of the distorted variable on `u`.
    Signed,
    /// The local linear fit of the absolute distorted variable on `u`.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmiseInputs {
    pub sigma2_hat: f64,
    pub theta2_hat: f64,
    pub omega_mass: f64,
    pub n: usize,
    pub kernel: KernelSpec,
}

/// Difference-based variance estimate of responses already ordered by
/// their covariate.
pub fn diff_variance(zs_ordered_by_v: &[f64]) -> Result<f64> {
    let n = zs_ordered_by_v.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let ss: f64 = zs_ordered_by_v
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum();
    Ok(ss / (2.0 * (n - 1) as f64))
}

/// Orders `zs` as concomitants of sorted `vs` (ties by input position).
pub fn concomitants(vs: &[f64], zs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..vs.len()).collect();
    idx.sort_by(|&a, &b| vs[a].total_cmp(&vs[b]).then(a.cmp(&b)));
    idx.into_iter().map(|i| zs[i]).collect()
}

/// `n^{-1} sum_i gamma''(V_i)^2 omega(V_i)` with `gamma''` from local cubic
/// fits at bandwidth `h2`.
///
/// Points whose fit is ill-posed are skipped and the average is taken over
/// the weighted points that succeeded, rescaled to the `1/n` convention.
pub fn theta2_hat(vs: &[f64], zs: &[f64], h2: f64, omega: &[bool]) -> Result<f64> {
    if vs.len() != zs.len() || vs.len() != omega.len() {
        return Err(Error::InvalidInput("theta2 inputs differ in length".into()));
    }
    let weighted = omega.iter().filter(|&&w| w).count();
    if weighted == 0 {
        return Err(Error::AllPointsExcluded);
    }
    let smoother = LocalSmoother::new(vs, zs, KernelSpec::TRIWEIGHT)?;
    let mut sum = 0.0;
    let mut ok = 0usize;
    for (&v, _) in vs.iter().zip(omega).filter(|(_, &w)| w) {
        if let Ok(fit) = smoother.fit_strict(v, 3, h2) {
            let d2 = fit.coefficients[2];
            sum += d2 * d2;
            ok += 1;
        }
    }
    if ok == 0 {
        return Err(Error::AllPointsIllPosed);
    }
    Ok(sum / ok as f64 * weighted as f64 / vs.len() as f64)
}

pub fn amise_w(inp: &AmiseInputs, g: f64) -> f64 {
    let mu2 = inp.kernel.moment(2);
    let nu0 = inp.kernel.sq_moment(0);
    mu2 * mu2 * g.powi(4) / 4.0 * inp.theta2_hat
        + nu0 / (inp.n as f64 * g) * inp.sigma2_hat * inp.omega_mass
}

/// Closed-form minimizer of [`amise_w`] in `g`; infinite when `theta2 = 0`.
pub fn amise_minimizer(inp: &AmiseInputs) -> f64 {
    let mu2 = inp.kernel.moment(2);
    let nu0 = inp.kernel.sq_moment(0);
    (nu0 * inp.sigma2_hat * inp.omega_mass / (inp.n as f64 * mu2 * mu2 * inp.theta2_hat)).powf(0.2)
}

/// Knobs of the plug-in rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginConfig {
    /// Central fraction of the covariate range over which curvature is
    /// averaged.
    pub inner_fraction: f64,
    /// Fixed pilot bandwidth; `None` selects the blocked quartic rule.
    pub pilot: Option<f64>,
    /// Largest number of blocks of the quartic pilot; 1 is a single
    /// global fit.
    pub max_blocks: usize,
}

impl Default for PluginConfig {
    fn default() -> Self {
        Self {
            inner_fraction: 0.9,
            pilot: None,
            max_blocks: PILOT_MAX_BLOCKS,
        }
    }
}

/// Diagnostics of one plug-in bandwidth computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginDetails {
    pub bandwidth: f64,
    pub sigma2: f64,
    pub theta2: f64,
    pub pilot: f64,
    pub omega_mass: f64,
    /// True when the curvature estimate was degenerate and the ceiling was
    /// returned.
    pub clamped: bool,
}

pub fn plugin_bandwidth(vs: &[f64], zs: &[f64]) -> Result<f64> {
    plugin_details(vs, zs, &PluginConfig::default()).map(|d| d.bandwidth)
}

/// Direct plug-in bandwidth for local linear regression of `zs` on `vs`.
pub fn plugin_details(vs: &[f64], zs: &[f64], cfg: &PluginConfig) -> Result<PluginDetails> {
    let n = vs.len();
    if zs.len() != n {
        return Err(Error::InvalidInput("plug-in inputs differ in length".into()));
    }
    if n < MIN_PLUGIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_PLUGIN_POINTS,
            got: n,
        });
    }
    let (lo, hi) = min_max(vs);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let sigma2 = diff_variance(&concomitants(vs, zs))?;
    let pilot = match cfg.pilot {
        Some(p) => p,
        None => quartic_pilot(vs, zs, lo, hi, cfg.max_blocks)?,
    };
    let margin = 0.5 * (1.0 - cfg.inner_fraction) * range;
    let omega: Vec<bool> = vs
        .iter()
        .map(|&v| v >= lo + margin && v <= hi - margin)
        .collect();
    let omega_mass = cfg.inner_fraction * range;
    let theta2 = theta2_hat(vs, zs, pilot, &omega)?;
    let ceiling = 0.5 * range;
    let inp = AmiseInputs {
        sigma2_hat: sigma2,
        theta2_hat: theta2,
        omega_mass,
        n,
        kernel: KernelSpec::TRIWEIGHT,
    };
    let raw = amise_minimizer(&inp);
    let clamped = !(theta2 > 1e-8 * sigma2) || !(raw.is_finite() && raw > 0.0);
    Ok(PluginDetails {
        bandwidth: if clamped { ceiling } else { raw },
        sigma2,
        theta2,
        pilot,
        omega_mass,
        clamped,
    })
}

/// Equivalent-kernel constants of the local cubic second-derivative
/// estimator: `(int K*^2, int t^4 K*)`.
fn cubic_second_derivative_constants() -> (f64, f64) {
    static CONSTS: OnceLock<(f64, f64)> = OnceLock::new();
    *CONSTS.get_or_init(|| {
        let k = KernelSpec::TRIWEIGHT;
        let mu = |l: usize| if l % 2 == 1 { 0.0 } else { k.moment(l) };
        let s: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|c| mu(j + c)).collect()).collect();
        let mut e = vec![0.0; 4];
        e[2] = 1.0;
        // S is symmetric, so row 3 of S^-1 equals the solution of S c = e3.
        let c = solve_dense(s, e).expect("kernel moment matrix is nonsingular");
        let equiv = |t: f64| (c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t) * k.eval(t);
        let r = k.support_radius;
        let sq = kernel_integral(r, |t| equiv(t).powi(2));
        let m4 = kernel_integral(r, |t| t.powi(4) * equiv(t));
        (sq, m4)
    })
}

/// Residual sum of squares and summed product of second and fourth
/// derivatives of a quartic least-squares fit; `None` when the block
/// cannot carry one.
fn quartic_block(vs: &[f64], zs: &[f64]) -> Option<(f64, f64)> {
    if vs.len() < 6 {
        return None;
    }
    let (lo, hi) = min_max(vs);
    if !(hi > lo) {
        return None;
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut ata = vec![vec![0.0; 5]; 5];
    let mut atb = vec![0.0; 5];
    for (&v, &z) in vs.iter().zip(zs) {
        let s = (v - mid) / half;
        let p = [1.0, s, s * s, s * s * s, s * s * s * s];
        for j in 0..5 {
            atb[j] += p[j] * z;
            for c in 0..5 {
                ata[j][c] += p[j] * p[c];
            }
        }
    }
    let a = solve_dense(ata, atb)?;
    let mut rss = 0.0;
    let mut theta24 = 0.0;
    let d4 = 24.0 * a[4] / half.powi(4);
    for (&v, &z) in vs.iter().zip(zs) {
        let s = (v - mid) / half;
        let fitted = a[0] + s * (a[1] + s * (a[2] + s * (a[3] + s * a[4])));
        rss += (z - fitted) * (z - fitted);
        let d2 = (2.0 * a[2] + 6.0 * a[3] * s + 12.0 * a[4] * s * s) / (half * half);
        theta24 += d2 * d4;
    }
    Some((rss, theta24))
}

/// Pilot bandwidth for the local cubic curvature fit from quartic
/// least-squares fits on up to `max_blocks` blocks of consecutive `vs`,
/// with the block count picked by Mallows' Cp. The result is clamped to
/// `[min(0.5, 8/n) * range, range]`.
pub fn quartic_pilot(vs: &[f64], zs: &[f64], lo: f64, hi: f64, max_blocks: usize) -> Result<f64> {
    let n = vs.len();
    if n < 6 {
        return Err(Error::TooFewPoints { needed: 6, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vs[a].total_cmp(&vs[b]));
    let sv: Vec<f64> = order.iter().map(|&i| vs[i]).collect();
    let sz: Vec<f64> = order.iter().map(|&i| zs[i]).collect();
    let n_max = (n / 20).min(max_blocks).max(1);
    // (blocks, rss, summed theta24)
    let mut fits: Vec<(usize, f64, f64)> = Vec::new();
    for blocks in 1..=n_max {
        let mut rss = 0.0;
        let mut t24 = 0.0;
        let mut ok = true;
        for b in 0..blocks {
            let (s, e) = (b * n / blocks, (b + 1) * n / blocks);
            match quartic_block(&sv[s..e], &sz[s..e]) {
                Some((r, t)) => {
                    rss += r;
                    t24 += t;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            fits.push((blocks, rss, t24));
        }
    }
    let &(nm, rss_max, _) = fits.last().ok_or(Error::DegenerateDesign)?;
    let scale = rss_max / (n - 5 * nm) as f64;
    let cp = |f: &(usize, f64, f64)| f.1 / scale - (n as f64 - 10.0 * f.0 as f64);
    let &(blocks, rss, t24) = if scale > 0.0 {
        fits.iter()
            .min_by(|a, b| cp(a).total_cmp(&cp(b)))
            .expect("at least one block fit")
    } else {
        &fits[0]
    };
    let theta24 = t24 / n as f64;
    let sigma2_q = rss / (n - 5 * blocks) as f64;
    let range = hi - lo;
    let (sq, m4) = cubic_second_derivative_constants();
    let c2 = (24.0 * sq / m4.abs()).powf(1.0 / 7.0);
    let raw = c2 * (sigma2_q * range / (theta24.abs() * n as f64)).powf(1.0 / 7.0);
    let floor = range * (8.0 / n as f64).min(0.5);
    Ok(if raw.is_finite() { raw.clamp(floor, range) } else { range })
}

/// Ridge thresholds for the two distorted variables of `sample`.
pub fn ridge_params(
    sample: &DistortedSample,
    flavor: RidgeFlavor,
    g1pi: f64,
    g2pi: f64,
) -> Result<RidgePair> {
    Ok(RidgePair {
        rho1: ridge_threshold(&sample.u, &sample.x_tilde, flavor, g1pi)?,
        rho2: ridge_threshold(&sample.u, &sample.y_tilde, flavor, g2pi)?,
    })
}

/// `max(0.1, sqrt(AMISE_w))` for one distorted variable, where the weight
/// selects the points at which the estimated distortion curve has its 20%
/// smallest magnitudes. The curve is fitted at `n^{-1/10} * gpi`, the
/// AMISE is evaluated at `gpi`.
pub fn ridge_threshold(u: &[f64], z_tilde: &[f64], flavor: RidgeFlavor, gpi: f64) -> Result<f64> {
    let n = u.len();
    if n < MIN_PLUGIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_PLUGIN_POINTS,
            got: n,
        });
    }
    let response: Vec<f64> = match flavor {
        RidgeFlavor::Signed => z_tilde.to_vec(),
        RidgeFlavor::Absolute => z_tilde.iter().map(|z| z.abs()).collect(),
    };
    let (lo, hi) = min_max(u);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let g = gpi * (n as f64).powf(DISTORTION_SHRINK_EXPONENT);
    let smoother = LocalSmoother::new(u, &response, KernelSpec::TRIWEIGHT)?;
    let mags: Vec<f64> = smoother
        .values_at(u, 1, g)?
        .into_iter()
        .map(|v| v.map_or(f64::NAN, f64::abs))
        .collect();
    let mut finite: Vec<f64> = mags.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::AllPointsIllPosed);
    }
    finite.sort_by(f64::total_cmp);
    let q = empirical_quantile(&finite, RIDGE_QUANTILE);
    let omega: Vec<bool> = mags.iter().map(|&m| m.is_finite() && m <= q).collect();
    let frac = omega.iter().filter(|&&w| w).count() as f64 / n as f64;
    let sigma2 = diff_variance(&concomitants(u, &response))?;
    let pilot = quartic_pilot(u, &response, lo, hi, PILOT_MAX_BLOCKS)?;
    let theta2 = theta2_hat(u, &response, pilot, &omega)?;
    let inp = AmiseInputs {
        sigma2_hat: sigma2,
        theta2_hat: theta2,
        omega_mass: frac * range,
        n,
        kernel: KernelSpec::TRIWEIGHT,
    };
    Ok(rho_from_amise(amise_w(&inp, gpi)))
}

/// `max(0.1, sqrt(amise))`.
pub fn rho_from_amise(amise: f64) -> f64 {
    amise.max(0.0).sqrt().max(RHO_FLOOR)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub(crate) fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Dense Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let acc: f64 = b[r] - ((r + 1)..n).map(|c| a[r][c] * x[c]).sum::<f64>();
        x[r] = acc / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_inputs() -> AmiseInputs {
        AmiseInputs {
            sigma2_hat: 1.0,
            theta2_hat: 1.0,
            omega_mass: 1.0,
            n: 100,
            kernel: KernelSpec::TRIWEIGHT,
        }
    }

    #[test]
    fn diff_variance_examples() {
        assert_eq!(diff_variance(&[3.0; 10]).unwrap(), 0.0);
        assert_eq!(diff_variance(&[-1.0, 1.0, -1.0]).unwrap(), 2.0);
        assert_eq!(
            diff_variance(&[1.0]),
            Err(Error::TooFewPoints { needed: 2, got: 1 })
        );
    }

    #[test]
    fn diff_variance_shift_and_scale() {
        let z: Vec<f64> = (0..50).map(|i| (i as f64 * 1.7).sin()).collect();
        let base = diff_variance(&z).unwrap();
        let shifted: Vec<f64> = z.iter().map(|v| v + 12.5).collect();
        let scaled: Vec<f64> = z.iter().map(|v| -3.0 * v).collect();
        assert!((diff_variance(&shifted).unwrap() - base).abs() < 1e-12);
        assert!((diff_variance(&scaled).unwrap() - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn theta2_quadratic_and_linear() {
        let n = 300;
        let vs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let omega = vec![true; n];
        let quad: Vec<f64> = vs.iter().map(|v| v * v).collect();
        let t = theta2_hat(&vs, &quad, 0.05, &omega).unwrap();
        assert!((t - 4.0).abs() < 0.2, "{t}");
        let lin: Vec<f64> = vs.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!(theta2_hat(&vs, &lin, 0.05, &omega).unwrap() < 1e-6);
        assert_eq!(
            theta2_hat(&vs, &lin, 0.05, &vec![false; n]),
            Err(Error::AllPointsExcluded)
        );
    }

    #[test]
    fn amise_examples() {
        let zero = AmiseInputs {
            sigma2_hat: 0.0,
            theta2_hat: 0.0,
            ..unit_inputs()
        };
        assert_eq!(amise_w(&zero, 0.3), 0.0);
        let v = amise_w(&unit_inputs(), 1.0);
        let expected = (1.0f64 / 81.0) / 4.0 + (350.0 / 429.0) / 100.0;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.011245).abs() < 1e-6);
        assert!((amise_minimizer(&unit_inputs()) - 0.9205).abs() < 1e-4);
    }

    #[test]
    fn closed_form_n_dependence() {
        let a = amise_minimizer(&unit_inputs());
        let b = amise_minimizer(&AmiseInputs {
            n: 200,
            ..unit_inputs()
        });
        assert!((b / a - 2f64.powf(-0.2)).abs() < 1e-14);
    }

    #[test]
    fn linear_data_hits_ceiling() {
        let vs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).fract() * 4.0).collect();
        let zs: Vec<f64> = vs.iter().map(|v| 2.0 * v + 1.0).collect();
        let d = plugin_details(&vs, &zs, &PluginConfig::default()).unwrap();
        assert!(d.clamped);
        let (lo, hi) = min_max(&vs);
        assert_eq!(d.bandwidth, 0.5 * (hi - lo));
    }

    #[test]
    fn plugin_rejects_bad_designs() {
        let vs = vec![1.0; 30];
        let zs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(plugin_bandwidth(&vs, &zs), Err(Error::DegenerateDesign));
        assert!(matches!(
            plugin_bandwidth(&vs[..10], &zs[..10]),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn plugin_shift_invariance() {
        let vs: Vec<f64> = (0..150).map(|i| (i as f64 * 0.618_034).fract()).collect();
        let zs: Vec<f64> = vs
            .iter()
            .enumerate()
            .map(|(i, v)| (6.0 * v).sin() + 0.2 * ((i as f64 * 12.9898).sin() * 43758.5453).fract())
            .collect();
        let shifted: Vec<f64> = zs.iter().map(|z| z + 5.0).collect();
        let a = plugin_bandwidth(&vs, &zs).unwrap();
        let b = plugin_bandwidth(&vs, &shifted).unwrap();
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn rho_floor_and_sqrt() {
        assert_eq!(rho_from_amise(0.009), RHO_FLOOR);
        assert!((rho_from_amise(0.09) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_quantile(&s, 0.0), 1.0);
        assert_eq!(empirical_quantile(&s, 0.5), 3.0);
        assert_eq!(empirical_quantile(&s, 0.2), 1.8);
    }

    #[test]
    fn equivalent_kernel_has_unit_second_moment() {
        // sanity: the equivalent kernel reproduces t^2 with weight one
        let (sq, m4) = cubic_second_derivative_constants();
        assert!(sq > 0.0 && m4.is_finite() && m4 != 0.0);
    }
}
