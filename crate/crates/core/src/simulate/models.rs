//! The simulation designs.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::distribution::{Beta as BetaPdf, ChiSquared as ChiSqCdf, Continuous, ContinuousCDF, Normal as NormalCdf};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// `sin{pi (x-1)/2} / [1 + 2 (x-1)^2 {sign(x-1) + 1}]`.
pub fn m1(x: f64) -> f64 {
    let d = x - 1.0;
    let sign = if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    };
    (PI * d / 2.0).sin() / (1.0 + 2.0 * d * d * (sign + 1.0))
}

fn normal_density(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// `x^2` times the standard normal density.
pub fn m2(x: f64) -> f64 {
    x * x * normal_density(x, 0.0, 1.0)
}

/// `2x` plus the N(0.5, 0.1^2) density.
pub fn m3(x: f64) -> f64 {
    2.0 * x + normal_density(x, 0.5, 0.1)
}

/// `base(x + shift) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFn {
    pub base: BaseCurve,
    pub shift: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseCurve {
    M1,
    M2,
    M3,
}

impl RegressionFn {
    pub fn eval(&self, x: f64) -> f64 {
        let t = x + self.shift;
        self.offset
            + match self.base {
                BaseCurve::M1 => m1(t),
                BaseCurve::M2 => m2(t),
                BaseCurve::M3 => m3(t),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFn {
    Constant(f64),
    /// `s * sqrt(1 + x^2)`.
    Heteroscedastic(f64),
}

impl NoiseFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            NoiseFn::Constant(s) => s,
            NoiseFn::Heteroscedastic(s) => s * (1.0 + x * x).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XDist {
    Normal { mean: f64, sd: f64 },
    /// `(chi2(df) - shift) / scale`.
    ShiftedChiSq { df: f64, shift: f64, scale: f64 },
}

impl XDist {
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            XDist::Normal { mean, sd } => NormalCdf::new(mean, sd)
                .expect("valid normal")
                .inverse_cdf(p),
            XDist::ShiftedChiSq { df, shift, scale } => {
                (ChiSqCdf::new(df).expect("valid chi-square").inverse_cdf(p) - shift) / scale
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            XDist::Normal { mean, .. } => mean,
            XDist::ShiftedChiSq { df, shift, scale } => (df - shift) / scale,
        }
    }
}

/// Unnormalized distortion shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionShape {
    /// `(u + offset)^2`.
    Quadratic { offset: f64 },
    /// `m1(5u - 2)`, with sign changes at 0.2 and 0.6.
    Wave,
}

impl DistortionShape {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DistortionShape::Quadratic { offset } => (u + offset) * (u + offset),
            DistortionShape::Wave => m1(5.0 * u - 2.0),
        }
    }

    /// Points in (0, 1) where the shape is not smooth.
    fn kinks(&self) -> &'static [f64] {
        match self {
            DistortionShape::Quadratic { .. } => &[],
            DistortionShape::Wave => &[0.6],
        }
    }

    /// Interior zeros at which the shape changes sign.
    pub fn sign_changes(&self) -> &'static [f64] {
        match self {
            DistortionShape::Quadratic { .. } => &[],
            DistortionShape::Wave => &[0.2, 0.6],
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign_changes().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDist {
    pub a: f64,
    pub b: f64,
}

/// The regression-curve families of the study, numbered i to vi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub id: &'static str,
    pub family: Family,
    pub m: RegressionFn,
    pub sigma: NoiseFn,
    pub x_dist: XDist,
    pub u_dist: BetaDist,
    pub phi_raw: DistortionShape,
    pub psi_raw: DistortionShape,
    /// Normalizers making the distortions mean one. They are negative when
    /// the raw shape has a negative mean.
    pub c_phi: f64,
    pub c_psi: f64,
}

impl SimModel {
    pub fn phi(&self, u: f64) -> f64 {
        self.c_phi * self.phi_raw.eval(u)
    }

    pub fn psi(&self, u: f64) -> f64 {
        self.c_psi * self.psi_raw.eval(u)
    }

    /// Analytic 2.5% and 97.5% quantiles of X.
    pub fn ise_range(&self) -> (f64, f64) {
        (self.x_dist.quantile(0.025), self.x_dist.quantile(0.975))
    }

    pub fn has_positive_distortions(&self) -> bool {
        self.phi_raw.is_positive() && self.psi_raw.is_positive()
    }
}

/// `E{raw(U)}` by Gauss–Legendre quadrature against the Beta density,
/// split at the kinks of the shape.
pub fn distortion_mean(raw: DistortionShape, u_dist: BetaDist, rule: &GaussLegendre) -> f64 {
    let pdf = BetaPdf::new(u_dist.a, u_dist.b).expect("valid beta parameters");
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(raw.kinks());
    cuts.push(1.0);
    cuts.windows(2)
        .map(|w| rule.integrate(w[0], w[1], |u| raw.eval(u) * pdf.pdf(u)))
        .sum()
}

/// `1 / E{raw(U)}` with the 128-node rule.
pub fn normalizing_constant(raw: DistortionShape, u_dist: BetaDist) -> Result<f64> {
    normalizing_constant_fn(|u| raw.eval(u), raw.kinks(), u_dist)
}

/// As [`normalizing_constant`] for an arbitrary shape, with optional
/// breakpoints.
pub fn normalizing_constant_fn<F: Fn(f64) -> f64>(
    raw: F,
    kinks: &[f64],
    u_dist: BetaDist,
) -> Result<f64> {
    let pdf = BetaPdf::new(u_dist.a, u_dist.b)
        .map_err(|e| Error::InvalidInput(format!("beta parameters: {e}")))?;
    let rule = GaussLegendre::n128();
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(kinks);
    cuts.push(1.0);
    let e: f64 = cuts
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |u| raw(u) * pdf.pdf(u)))
        .sum();
    if !(e.abs() >= 1e-10) {
        return Err(Error::ZeroMeanDistortion(e));
    }
    Ok(1.0 / e)
}

struct Design {
    id: &'static str,
    family: Family,
    m: RegressionFn,
    sigma: NoiseFn,
    x_dist: XDist,
    u_dist: BetaDist,
    phi_raw: DistortionShape,
    psi_raw: DistortionShape,
}

fn build(d: Design) -> SimModel {
    let c_phi = normalizing_constant(d.phi_raw, d.u_dist).expect("catalog distortions have nonzero mean");
    let c_psi = normalizing_constant(d.psi_raw, d.u_dist).expect("catalog distortions have nonzero mean");
    SimModel {
        id: d.id,
        family: d.family,
        m: d.m,
        sigma: d.sigma,
        x_dist: d.x_dist,
        u_dist: d.u_dist,
        phi_raw: d.phi_raw,
        psi_raw: d.psi_raw,
        c_phi,
        c_psi,
    }
}

fn rf(base: BaseCurve, shift: f64, offset: f64) -> RegressionFn {
    RegressionFn { base, shift, offset }
}

fn make_catalog() -> Vec<SimModel> {
    use BaseCurve::*;
    use Family::*;
    let normal = |mean, sd| XDist::Normal { mean, sd };
    let chisq = |scale| XDist::ShiftedChiSq {
        df: 4.0,
        shift: 4.0,
        scale,
    };
    let beta25 = BetaDist { a: 2.0, b: 5.0 };
    let beta35 = BetaDist { a: 3.0, b: 5.0 };
    let quad_phi = DistortionShape::Quadratic { offset: 0.25 };
    let quad_psi = DistortionShape::Quadratic { offset: 0.5 };
    let wave = DistortionShape::Wave;

    // (family, m, X, sigma) for the .a and .b settings of families i-iii
    let first: [(&str, &str, Family, RegressionFn, XDist, RegressionFn, XDist, f64); 3] = [
        ("i.a", "i.b", I, rf(M1, 0.0, 0.0), normal(1.0, 1.5), rf(M1, -1.0, 2.0), normal(2.0, 1.5), 0.3),
        ("ii.a", "ii.b", II, rf(M2, 0.0, 0.0), normal(1.0, 1.5), rf(M2, -1.0, 0.0), normal(2.0, 1.5), 0.05),
        ("iii.a", "iii.b", III, rf(M3, 0.0, 0.0), normal(0.5, 0.75), rf(M3, -1.0, 0.0), normal(1.5, 0.75), 0.55),
    ];
    let c_ids = [("i.c", "i.d"), ("ii.c", "ii.d"), ("iii.c", "iii.d")];

    let mut out = Vec::with_capacity(21);
    for &(ida, idb, family, ma, xa, mb, xb, s) in &first {
        for (id, m, x) in [(ida, ma, xa), (idb, mb, xb)] {
            out.push(build(Design {
                id,
                family,
                m,
                sigma: NoiseFn::Constant(s),
                x_dist: x,
                u_dist: beta25,
                phi_raw: quad_phi,
                psi_raw: quad_psi,
            }));
        }
    }
    for (k, &(_, _, family, ma, xa, mb, xb, s)) in first.iter().enumerate() {
        for (id, m, x) in [(c_ids[k].0, ma, xa), (c_ids[k].1, mb, xb)] {
            out.push(build(Design {
                id,
                family,
                m,
                sigma: NoiseFn::Constant(s),
                x_dist: x,
                u_dist: beta35,
                phi_raw: wave,
                psi_raw: wave,
            }));
        }
    }
    let last: [(&str, &str, &str, Family, RegressionFn, XDist, RegressionFn, XDist, f64); 3] = [
        ("iv.a", "iv.b", "iv.c", IV, rf(M1, 1.0, 0.0), normal(0.0, 1.5), rf(M1, 0.0, 0.0), chisq(2.0), 0.3),
        ("v.a", "v.b", "v.c", V, rf(M2, 1.0, 0.0), normal(0.0, 1.5), rf(M2, 0.0, 0.0), chisq(2.0), 0.05),
        ("vi.a", "vi.b", "vi.c", VI, rf(M3, 0.5, 0.0), normal(0.0, 0.75), rf(M3, 0.0, 0.0), chisq(3.5), 0.55),
    ];
    let wave_model = |id, family, m, x, sigma| {
        build(Design {
            id,
            family,
            m,
            sigma,
            x_dist: x,
            u_dist: beta35,
            phi_raw: wave,
            psi_raw: wave,
        })
    };
    for &(ida, idb, _, family, ma, xa, mb, xb, s) in &last {
        out.push(wave_model(ida, family, ma, xa, NoiseFn::Constant(s)));
        out.push(wave_model(idb, family, mb, xb, NoiseFn::Constant(s)));
    }
    for &(_, _, idc, family, ma, xa, _, _, s) in &last {
        out.push(wave_model(idc, family, ma, xa, NoiseFn::Heteroscedastic(s / 2.0)));
    }
    // keep the conventional ordering: a, b, c, d within i-iii; a, b, c within iv-vi
    let order = |m: &SimModel| {
        let (fam, var) = m.id.split_once('.').expect("ids have a variant");
        let fam_rank = ["i", "ii", "iii", "iv", "v", "vi"].iter().position(|f| *f == fam).unwrap_or(99);
        let block = if fam_rank < 3 { 0 } else { 1 };
        (block, var.to_string(), fam_rank)
    };
    out.sort_by_key(order);
    out
}

/// All 21 designs.
pub fn catalog() -> &'static [SimModel] {
    static CATALOG: OnceLock<Vec<SimModel>> = OnceLock::new();
    CATALOG.get_or_init(make_catalog)
}

pub fn find_model(id: &str) -> Result<&'static SimModel> {
    catalog()
        .iter()
        .find(|m| m.id == id)
        .ok_or_else(|| Error::UnknownModel(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_all_designs() {
        let c = catalog();
        assert_eq!(c.len(), 21);
        let ids: Vec<&str> = c.iter().map(|m| m.id).collect();
        for id in ["i.a", "iii.d", "iv.b", "vi.c", "ii.c"] {
            assert!(ids.contains(&id), "{id}");
        }
        assert_eq!(&ids[..3], &["i.a", "ii.a", "iii.a"]);
        assert!(matches!(find_model("vii.a"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn normalizers_give_unit_means() {
        for m in catalog() {
            let e_phi = m.c_phi * distortion_mean(m.phi_raw, m.u_dist, GaussLegendre::n128());
            let e_psi = m.c_psi * distortion_mean(m.psi_raw, m.u_dist, GaussLegendre::n128());
            assert!((e_phi - 1.0).abs() < 1e-8, "{}", m.id);
            assert!((e_psi - 1.0).abs() < 1e-8, "{}", m.id);
        }
    }

    #[test]
    fn normalizer_examples() {
        let b25 = BetaDist { a: 2.0, b: 5.0 };
        assert!((normalizing_constant_fn(|_| 2.0, &[], b25).unwrap() - 0.5).abs() < 1e-13);
        let c = normalizing_constant(DistortionShape::Quadratic { offset: 0.5 }, b25).unwrap();
        assert!((c - 14.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            normalizing_constant_fn(|u| u - 0.5, &[], BetaDist { a: 2.0, b: 2.0 }),
            Err(Error::ZeroMeanDistortion(_))
        ));
    }

    #[test]
    fn wave_normalizer_is_stable_and_negative() {
        let b35 = BetaDist { a: 3.0, b: 5.0 };
        let e64 = distortion_mean(DistortionShape::Wave, b35, GaussLegendre::n64());
        let e128 = distortion_mean(DistortionShape::Wave, b35, GaussLegendre::n128());
        assert!((e64 - e128).abs() < 1e-8);
        // the raw shape has a negative mean under Beta(3, 5)
        assert!((e128 + 0.42759).abs() < 1e-4);
        let c = normalizing_constant(DistortionShape::Wave, b35).unwrap();
        assert!(c.is_finite() && c < 0.0);
    }

    #[test]
    fn curve_values() {
        assert_eq!(m1(1.0), 0.0);
        assert!((m1(2.0) - 1.0 / 5.0).abs() < 1e-15);
        assert!((m1(0.0) + 1.0).abs() < 1e-15);
        assert!((m2(1.0) - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((m3(0.5) - (1.0 + 1.0 / (0.1 * (2.0 * PI).sqrt()))).abs() < 1e-12);
        let vi_c = find_model("vi.c").unwrap();
        assert!((vi_c.sigma.eval(0.0) - 0.275).abs() < 1e-15);
        assert_eq!(find_model("i.a").unwrap().sigma.eval(3.0), 0.3);
        let ib = find_model("i.b").unwrap();
        assert!((ib.m.eval(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn wave_changes_sign_at_known_points() {
        let w = DistortionShape::Wave;
        assert!(w.eval(0.19) * w.eval(0.21) < 0.0);
        assert!(w.eval(0.59) * w.eval(0.61) < 0.0);
        assert!(w.eval(0.2).abs() < 1e-15 && w.eval(0.6).abs() < 1e-15);
    }

    #[test]
    fn ise_range_is_analytic() {
        let m = find_model("i.a").unwrap();
        let (a, b) = m.ise_range();
        assert!((a - (1.0 - 1.959_963_985 * 1.5)).abs() < 1e-6);
        assert!((b - (1.0 + 1.959_963_985 * 1.5)).abs() < 1e-6);
        let ivb = find_model("iv.b").unwrap();
        let (a, b) = ivb.ise_range();
        // chi2(4) quantiles 0.484419 and 11.143287
        assert!((a - (0.484_419 - 4.0) / 2.0).abs() < 1e-5);
        assert!((b - (11.143_287 - 4.0) / 2.0).abs() < 1e-5);
        assert_eq!(ivb.x_dist.mean(), 0.0);
    }
}
