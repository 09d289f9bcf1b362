//! Kernels, local polynomial regression and kernel density estimation.
//!
//! Every estimator in the crate is a local polynomial fit of some response
//! on some covariate. Fits are computed in the standardized coordinate
//! `t = (x - x0) / h`, which keeps the normal equations well scaled for any
//! bandwidth, and the coefficients are converted back to derivative units
//! before they are returned.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Highest local polynomial degree supported by the engine.
pub const MAX_DEGREE: usize = 3;

const PIVOT_TOL: f64 = 1e-12;
const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelId {
    /// `(35/32)(1 - t^2)^3` on [-1, 1].
    Triweight,
}

/// A compactly supported symmetric kernel density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub id: KernelId,
    pub support_radius: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::TRIWEIGHT
    }
}

impl KernelSpec {
    pub const TRIWEIGHT: KernelSpec = KernelSpec {
        id: KernelId::Triweight,
        support_radius: 1.0,
    };

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self.id {
            KernelId::Triweight => {
                if t.abs() > 1.0 {
                    0.0
                } else {
                    let s = 1.0 - t * t;
                    35.0 / 32.0 * s * s * s
                }
            }
        }
    }

    /// `mu_{K,l} = \int t^l K(t) dt` for `l <= 6`.
    pub fn moment(&self, ell: usize) -> f64 {
        assert!(ell <= 6, "kernel moments are tabulated up to order 6");
        self.tables().moments[ell]
    }

    /// `nu_{K,k} = \int t^k K(t)^2 dt` for `k <= 2`.
    pub fn sq_moment(&self, korder: usize) -> f64 {
        assert!(korder <= 2, "squared-kernel moments are tabulated up to order 2");
        self.tables().sq_moments[korder]
    }

    fn tables(&self) -> &'static MomentTables {
        match self.id {
            KernelId::Triweight => {
                static TABLE: OnceLock<MomentTables> = OnceLock::new();
                TABLE.get_or_init(|| MomentTables::build(*self))
            }
        }
    }
}

struct MomentTables {
    moments: [f64; 7],
    sq_moments: [f64; 3],
}

impl MomentTables {
    fn build(k: KernelSpec) -> Self {
        let r = k.support_radius;
        let mut moments = [0.0; 7];
        for (ell, m) in moments.iter_mut().enumerate() {
            *m = kernel_integral(r, |t| t.powi(ell as i32) * k.eval(t));
        }
        let mut sq_moments = [0.0; 3];
        for (kk, m) in sq_moments.iter_mut().enumerate() {
            *m = kernel_integral(r, |t| {
                let v = k.eval(t);
                t.powi(kk as i32) * v * v
            });
        }
        Self {
            moments,
            sq_moments,
        }
    }
}

/// Integral of `f` over the kernel support with the 64-node rule.
pub(crate) fn kernel_integral<F: Fn(f64) -> f64>(radius: f64, f: F) -> f64 {
    GaussLegendre::n64().integrate(-radius, radius, f)
}

/// A function tabulated on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl Curve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, valid_mask: Vec<bool>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() != valid_mask.len() {
            return Err(Error::InvalidInput("curve arrays differ in length".into()));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("curve grid is not strictly increasing".into()));
        }
        Ok(Self {
            grid,
            values,
            valid_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn all_valid(&self) -> bool {
        self.valid_mask.iter().all(|&v| v)
    }

    /// Linear interpolation between grid points, constant beyond the ends.
    /// Invalid grid points are interpolated over using their neighbours'
    /// values as stored; callers that care check `valid_mask` first.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if n == 0 {
            return f64::NAN;
        }
        if x <= g[0] {
            return self.values[0];
        }
        if x >= g[n - 1] {
            return self.values[n - 1];
        }
        let hi = g.partition_point(|&v| v <= x);
        let lo = hi - 1;
        let w = (x - g[lo]) / (g[hi] - g[lo]);
        self.values[lo] * (1.0 - w) + self.values[hi] * w
    }
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && b > a, "grid needs n >= 2 points on a nonempty interval");
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

/// Result of one local polynomial fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    /// `coefficients[nu]` estimates the `nu`-th derivative at `x0`.
    pub coefficients: Vec<f64>,
    pub effective_points: usize,
}

impl LocalFit {
    pub fn value(&self) -> f64 {
        self.coefficients[0]
    }
}

/// Kernel-weighted moment sums `S_jk = sum w t^(j+k)`, `T_j = sum w t^j y`.
#[derive(Debug, Clone, Copy)]
struct NormalEquations {
    s: [[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1],
    t: [f64; MAX_DEGREE + 1],
    dim: usize,
    effective: usize,
}

impl NormalEquations {
    fn new(degree: usize) -> Self {
        Self {
            s: [[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1],
            t: [0.0; MAX_DEGREE + 1],
            dim: degree + 1,
            effective: 0,
        }
    }

    #[inline]
    fn add(&mut self, t: f64, w: f64, y: f64) {
        if w <= 0.0 {
            return;
        }
        self.effective += 1;
        let mut pw = [1.0; 2 * MAX_DEGREE + 1];
        for k in 1..(2 * self.dim - 1) {
            pw[k] = pw[k - 1] * t;
        }
        for j in 0..self.dim {
            self.t[j] += w * pw[j] * y;
            for k in 0..self.dim {
                self.s[j][k] += w * pw[j + k];
            }
        }
    }

    /// Gaussian elimination with partial pivoting; `None` when a pivot falls
    /// below the relative guard.
    fn solve(&self, ridge: f64) -> Option<[f64; MAX_DEGREE + 1]> {
        let d = self.dim;
        let mut a = self.s;
        let mut b = self.t;
        let mut max_diag = 0.0f64;
        for (j, row) in a.iter_mut().enumerate().take(d) {
            row[j] += ridge;
            max_diag = max_diag.max(row[j].abs());
        }
        if !(max_diag > 0.0) {
            return None;
        }
        let tol = PIVOT_TOL * max_diag;
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            if !(a[piv][col].abs() >= tol) {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in (col + 1)..d {
                let f = a[r][col] / a[col][col];
                if f == 0.0 {
                    continue;
                }
                for c in col..d {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = [0.0; MAX_DEGREE + 1];
        for r in (0..d).rev() {
            let mut acc = b[r];
            for c in (r + 1)..d {
                acc -= a[r][c] * x[c];
            }
            x[r] = acc / a[r][r];
        }
        Some(x)
    }

    fn trace(&self) -> f64 {
        (0..self.dim).map(|j| self.s[j][j]).sum()
    }

    fn into_fit(self, beta: [f64; MAX_DEGREE + 1], h: f64) -> LocalFit {
        let mut coefficients = Vec::with_capacity(self.dim);
        let mut scale = 1.0;
        for (nu, &b) in beta.iter().enumerate().take(self.dim) {
            if nu > 0 {
                scale *= nu as f64 / h;
            }
            coefficients.push(b * scale);
        }
        LocalFit {
            coefficients,
            effective_points: self.effective,
        }
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "local polynomial degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    Ok(())
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

fn finish(
    eq: NormalEquations,
    x0: f64,
    degree: usize,
    h: f64,
    allow_ridge: bool,
) -> Result<LocalFit> {
    if eq.effective < degree + 1 {
        return Err(Error::IllPosedFit { x0 });
    }
    if let Some(beta) = eq.solve(0.0) {
        return Ok(eq.into_fit(beta, h));
    }
    if allow_ridge {
        let lambda = RIDGE_SCALE * eq.trace() / eq.dim as f64;
        if let Some(beta) = eq.solve(lambda) {
            return Ok(eq.into_fit(beta, h));
        }
    }
    Err(Error::IllPosedFit { x0 })
}

/// Kernel-weighted least squares fit of degree `degree` centered at `x0`.
///
/// Returns `IllPosedFit` when fewer than `degree + 1` observations carry
/// positive weight or when elimination meets a pivot below `1e-12` times
/// the largest diagonal entry. No ridge fallback is applied here.
pub fn local_poly_fit(
    xs: &[f64],
    ys: &[f64],
    x0: f64,
    degree: usize,
    h: f64,
    k: KernelSpec,
) -> Result<LocalFit> {
    check_degree(degree)?;
    check_bandwidth(h)?;
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("xs and ys differ in length".into()));
    }
    if xs.len() < degree + 1 {
        return Err(Error::TooFewPoints {
            needed: degree + 1,
            got: xs.len(),
        });
    }
    let mut eq = NormalEquations::new(degree);
    for (&x, &y) in xs.iter().zip(ys) {
        let t = (x - x0) / h;
        eq.add(t, k.eval(t), y);
    }
    finish(eq, x0, degree, h, false)
}

/// Data sorted by covariate for repeated windowed local fits.
#[derive(Debug, Clone)]
pub struct LocalSmoother {
    xs: Vec<f64>,
    ys: Vec<f64>,
    kernel: KernelSpec,
}

impl LocalSmoother {
    pub fn new(xs: &[f64], ys: &[f64], kernel: KernelSpec) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput("xs and ys differ in length".into()));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in smoother input".into()));
        }
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
        Ok(Self {
            xs: idx.iter().map(|&i| xs[i]).collect(),
            ys: idx.iter().map(|&i| ys[i]).collect(),
            kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn equations(&self, x0: f64, degree: usize, h: f64) -> NormalEquations {
        let r = self.kernel.support_radius * h;
        let lo = self.xs.partition_point(|&x| x < x0 - r);
        let hi = self.xs.partition_point(|&x| x <= x0 + r);
        let mut eq = NormalEquations::new(degree);
        for i in lo..hi {
            let t = (self.xs[i] - x0) / h;
            eq.add(t, self.kernel.eval(t), self.ys[i]);
        }
        eq
    }

    /// Local fit with the single ridge retry used for curve evaluation.
    pub fn fit(&self, x0: f64, degree: usize, h: f64) -> Result<LocalFit> {
        check_degree(degree)?;
        check_bandwidth(h)?;
        finish(self.equations(x0, degree, h), x0, degree, h, true)
    }

    /// Local fit without the ridge retry.
    pub fn fit_strict(&self, x0: f64, degree: usize, h: f64) -> Result<LocalFit> {
        check_degree(degree)?;
        check_bandwidth(h)?;
        finish(self.equations(x0, degree, h), x0, degree, h, false)
    }

    /// Fitted values at each point of `at`; `None` where ill-posed.
    pub fn values_at(&self, at: &[f64], degree: usize, h: f64) -> Result<Vec<Option<f64>>> {
        check_degree(degree)?;
        check_bandwidth(h)?;
        Ok(at
            .iter()
            .map(|&x0| self.fit(x0, degree, h).ok().map(|f| f.value()))
            .collect())
    }

    pub fn curve(&self, grid: &[f64], degree: usize, h: f64) -> Result<Curve> {
        let fitted = self.values_at(grid, degree, h)?;
        if fitted.iter().all(Option::is_none) {
            return Err(Error::AllPointsIllPosed);
        }
        let values = fitted.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let valid_mask = fitted.iter().map(Option::is_some).collect();
        Curve::new(grid.to_vec(), values, valid_mask)
    }
}

/// Evaluates a local polynomial fit of degree 0 (Nadaraya–Watson) or 1
/// (local linear) on every grid point.
pub fn fit_curve(
    xs: &[f64],
    ys: &[f64],
    grid: &[f64],
    degree: usize,
    h: f64,
    k: KernelSpec,
) -> Result<Curve> {
    if degree > 1 {
        return Err(Error::InvalidInput("curve fits use degree 0 or 1".into()));
    }
    if xs.len() < degree + 1 {
        return Err(Error::TooFewPoints {
            needed: degree + 1,
            got: xs.len(),
        });
    }
    LocalSmoother::new(xs, ys, k)?.curve(grid, degree, h)
}

/// Bandwidth choice for [`kde`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KdeBandwidth {
    /// `1.06 * sd * n^(-1/5)`.
    Auto,
    Fixed(f64),
}

pub fn silverman_bandwidth(us: &[f64]) -> Result<f64> {
    let sd = sample_sd(us);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("zero spread in density sample"));
    }
    Ok(1.06 * sd * (us.len() as f64).powf(-0.2))
}

/// Kernel density estimate of `us` evaluated at `eval_at`.
pub fn kde(us: &[f64], bandwidth: KdeBandwidth, k: KernelSpec, eval_at: &[f64]) -> Result<Vec<f64>> {
    if us.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: us.len(),
        });
    }
    let h = match bandwidth {
        KdeBandwidth::Auto => silverman_bandwidth(us)?,
        KdeBandwidth::Fixed(h) => {
            check_bandwidth(h)?;
            h
        }
    };
    let mut sorted = us.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = k.support_radius * h;
    let norm = 1.0 / (us.len() as f64 * h);
    Ok(eval_at
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&u| u < x - r);
            let hi = sorted.partition_point(|&u| u <= x + r);
            sorted[lo..hi].iter().map(|&u| k.eval((x - u) / h)).sum::<f64>() * norm
        })
        .collect())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: KernelSpec = KernelSpec::TRIWEIGHT;

    #[test]
    fn triweight_values() {
        assert_eq!(K.eval(1.5), 0.0);
        assert_eq!(K.eval(-1.0000001), 0.0);
        assert_eq!(K.eval(0.0), 1.09375);
        assert!((K.eval(0.5) - 35.0 / 32.0 * 0.75f64.powi(3)).abs() < 1e-15);
        assert!((K.eval(0.5) - 0.4614257813).abs() < 1e-10);
    }

    #[test]
    fn kernel_is_symmetric_and_normalized() {
        for i in 0..200 {
            let t = -1.3 + 0.013 * i as f64;
            assert_eq!(K.eval(t), K.eval(-t));
        }
        assert!((K.moment(0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kernel_is_twice_differentiable_at_support_edge() {
        // one-sided second differences at +-1 must both vanish
        let d = 1e-8;
        for edge in [-1.0f64, 1.0] {
            let inside = edge - edge.signum() * d;
            let inside2 = edge - edge.signum() * 2.0 * d;
            let outside = edge + edge.signum() * d;
            let outside2 = edge + edge.signum() * 2.0 * d;
            let left = (K.eval(edge) - 2.0 * K.eval(inside) + K.eval(inside2)) / (d * d);
            let right = (K.eval(edge) - 2.0 * K.eval(outside) + K.eval(outside2)) / (d * d);
            assert!((left - right).abs() < 1e-6, "{left} vs {right}");
        }
    }

    #[test]
    fn moments_match_closed_forms() {
        assert!((K.moment(0) - 1.0).abs() < 1e-12);
        assert!(K.moment(1).abs() < 1e-15);
        assert!((K.moment(2) - 1.0 / 9.0).abs() < 1e-12);
        assert!(K.sq_moment(1).abs() < 1e-15);
        assert!((K.sq_moment(0) - 350.0 / 429.0).abs() < 1e-12);
    }

    #[test]
    fn sq_moment_scaling_law() {
        let c = 1.7;
        let base = kernel_integral(1.0, |t| K.eval(t).powi(2));
        let scaled = kernel_integral(1.0, |t| (c * K.eval(t)).powi(2));
        assert!((scaled - c * c * base).abs() < 1e-12);
    }

    #[test]
    fn linear_reproduction() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        for &x0 in &[0.0, 0.31, 0.5, 1.0] {
            let f = local_poly_fit(&xs, &ys, x0, 1, 0.2, K).unwrap();
            assert!((f.coefficients[0] - (2.0 * x0 + 1.0)).abs() < 1e-12);
            assert!((f.coefficients[1] - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_reproduction_degree_zero() {
        let xs = [0.1, 0.2, 0.4, 0.45, 0.9];
        let ys = [3.5; 5];
        let f = local_poly_fit(&xs, &ys, 0.3, 0, 0.5, K).unwrap();
        assert!((f.coefficients[0] - 3.5).abs() < 1e-14);
    }

    #[test]
    fn cubic_reproduction_with_derivatives() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + 2.0 * i as f64 / 39.0).collect();
        let p = |x: f64| 0.5 - x + 2.0 * x * x + 0.75 * x * x * x;
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let x0 = 0.2;
        let f = local_poly_fit(&xs, &ys, x0, 3, 0.6, K).unwrap();
        let d1 = -1.0 + 4.0 * x0 + 2.25 * x0 * x0;
        let d2 = 4.0 + 4.5 * x0;
        let d3 = 4.5;
        assert!((f.coefficients[0] - p(x0)).abs() < 1e-10);
        assert!((f.coefficients[1] - d1).abs() < 1e-9);
        assert!((f.coefficients[2] - d2).abs() < 1e-9);
        assert!((f.coefficients[3] - d3).abs() < 1e-8);
    }

    #[test]
    fn five_point_example_matches_dense_solve() {
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ys = [0.0, 1.0, 0.0, 1.0, 0.0];
        let f = local_poly_fit(&xs, &ys, 0.5, 1, 0.6, K).unwrap();
        // weighted least squares by hand: intercept and slope around 0.5
        let w: Vec<f64> = xs.iter().map(|x| K.eval((x - 0.5) / 0.6)).collect();
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..5 {
            let d = xs[i] - 0.5;
            s0 += w[i];
            s1 += w[i] * d;
            s2 += w[i] * d * d;
            t0 += w[i] * ys[i];
            t1 += w[i] * d * ys[i];
        }
        let det = s0 * s2 - s1 * s1;
        let b0 = (s2 * t0 - s1 * t1) / det;
        let b1 = (s0 * t1 - s1 * t0) / det;
        assert!((f.coefficients[0] - b0).abs() < 1e-12);
        assert!((f.coefficients[1] - b1).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_ill_posed() {
        let xs = [0.0, 0.1, 0.2];
        let ys = [1.0, 2.0, 3.0];
        assert!(matches!(
            local_poly_fit(&xs, &ys, 5.0, 1, 0.5, K),
            Err(Error::IllPosedFit { .. })
        ));
        // one point in window cannot carry a line
        assert!(matches!(
            local_poly_fit(&xs, &ys, 0.0, 1, 0.05, K),
            Err(Error::IllPosedFit { .. })
        ));
    }

    #[test]
    fn duplicated_design_points_trigger_ridge_only_in_curve_fits() {
        let xs = [0.5, 0.5, 0.5, 0.5];
        let ys = [1.0, 2.0, 3.0, 4.0];
        assert!(local_poly_fit(&xs, &ys, 0.5, 1, 0.3, K).is_err());
        let c = fit_curve(&xs, &ys, &[0.4, 0.5, 0.6], 1, 0.3, K).unwrap();
        assert!(c.valid_mask.iter().all(|&v| v));
        assert!((c.values[1] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn fit_curve_all_invalid() {
        let xs = [0.0, 0.1, 0.2];
        let ys = [1.0, 2.0, 3.0];
        assert_eq!(
            fit_curve(&xs, &ys, &[5.0, 6.0], 1, 0.1, K),
            Err(Error::AllPointsIllPosed)
        );
    }

    #[test]
    fn nw_is_convex_combination() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let ys: Vec<f64> = (0..50).map(|i| (i as f64 * 1.3).cos() * 3.0).collect();
        let grid = uniform_grid(-1.0, 1.0, 41);
        let h = 0.3;
        let c = fit_curve(&xs, &ys, &grid, 0, h, K).unwrap();
        for (g, (&v, &ok)) in grid.iter().zip(c.values.iter().zip(&c.valid_mask)) {
            if !ok {
                continue;
            }
            let window: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, _)| ((*x - g) / h).abs() < 1.0)
                .map(|(_, y)| *y)
                .collect();
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn fit_curve_is_deterministic() {
        let xs: Vec<f64> = (0..80).map(|i| (i as f64 * 0.71).sin()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + 0.1 * (x * 40.0).sin()).collect();
        let grid = uniform_grid(-0.9, 0.9, 31);
        let a = fit_curve(&xs, &ys, &grid, 1, 0.25, K).unwrap();
        let b = fit_curve(&xs, &ys, &grid, 1, 0.25, K).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kde_examples() {
        let v = kde(&[0.0, 1.0], KdeBandwidth::Fixed(1.0), K, &[0.5]).unwrap();
        assert!((v[0] - K.eval(0.5)).abs() < 1e-15);
        let far = kde(&[0.0, 0.3, 1.0], KdeBandwidth::Auto, K, &[50.0, -50.0]).unwrap();
        assert_eq!(far, vec![0.0, 0.0]);
        let us: Vec<f64> = (0..300).map(|i| (i as f64 * 0.618).fract()).collect();
        let grid = uniform_grid(-1.0, 2.0, 3001);
        let step = grid[1] - grid[0];
        let dens = kde(&us, KdeBandwidth::Auto, K, &grid).unwrap();
        let mass: f64 = dens.iter().sum::<f64>() * step;
        assert!((mass - 1.0).abs() < 1e-2);
        assert_eq!(
            kde(&[2.0, 2.0, 2.0], KdeBandwidth::Auto, K, &[2.0]),
            Err(Error::DegenerateSample("zero spread in density sample"))
        );
    }

    #[test]
    fn curve_interpolation() {
        let c = Curve::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0], vec![true; 3]).unwrap();
        assert_eq!(c.interpolate(0.5), 1.0);
        assert_eq!(c.interpolate(1.5), 1.0);
        assert_eq!(c.interpolate(-3.0), 0.0);
        assert_eq!(c.interpolate(7.0), 0.0);
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![true; 2]).is_err());
    }
}
