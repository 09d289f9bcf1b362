//! Worked examples that need more than one module.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covadj::additive::{backfit, backfit_generated, AdditiveConfig, AdditiveSample, VariableMethods};
use covadj::bandwidth::plugin_bandwidth;
use covadj::distortion::{
    distortion_grid, estimate_basic, estimate_distortion, estimate_for, DistortedSample,
    DistortionMethod, Target, ZeroDetection,
};
use covadj::estimator::MethodTag;
use covadj::pipeline::{detect_zeros, fit_adjusted, fit_variable, GridSpec, Tuning};
use covadj::quadrature::GaussLegendre;
use covadj::simulate::{find_model, generate_sample, generate_with, replication_rng, run_study, StudyConfig};
use covadj::smoothing::{kde, local_poly_fit, KdeBandwidth, KernelSpec};

/// Grid positions between the empirical 2.5% and 97.5% quantiles of `u`,
/// away from the sparse ends of the design.
fn central(grid: &[f64], u: &[f64]) -> Vec<bool> {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let lo = s[(0.025 * s.len() as f64) as usize];
    let hi = s[(0.975 * s.len() as f64) as usize];
    grid.iter().map(|&g| g >= lo && g <= hi).collect()
}

fn masked(v: &[f64], keep: &[bool]) -> Vec<f64> {
    v.iter().zip(keep).map(|(&x, &k)| if k { x } else { f64::NAN }).collect()
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn five_point_local_linear_matches_normal_equations() {
    let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
    let ys = [0.0, 1.0, 0.0, 1.0, 0.0];
    let k = KernelSpec::TRIWEIGHT;
    let fit = local_poly_fit(&xs, &ys, 0.5, 1, 0.6, k).unwrap();
    // 2x2 normal equations in (x - 0.5), solved by Cramer's rule
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(&ys) {
        let d: f64 = x - 0.5;
        let w = 35.0 / 32.0 * (1.0 - (d / 0.6).powi(2)).powi(3);
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y;
        t1 += w * d * y;
    }
    let det = s0 * s2 - s1 * s1;
    let b0 = (t0 * s2 - s1 * t1) / det;
    let b1 = (s0 * t1 - s1 * t0) / det;
    assert!((fit.coefficients[0] - b0).abs() < 1e-14);
    assert!((fit.coefficients[1] - b1).abs() < 1e-14);
}

#[test]
fn kde_two_points_hand_value() {
    let k = KernelSpec::TRIWEIGHT;
    let v = kde(&[0.0, 1.0], KdeBandwidth::Fixed(1.0), k, &[0.5]).unwrap();
    assert!((v[0] - k.eval(0.5)).abs() < 1e-15);
}

#[test]
fn basic_recovers_quadratic_distortion() {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let z: Vec<f64> = u
        .iter()
        .map(|&ui| (ui + 0.5f64).powi(2) * rng.random_range(1.5..2.5))
        .collect();
    let grid = distortion_grid(&u).unwrap();
    let fit = estimate_basic(&u, &z, 0.08, &grid).unwrap();
    let norm = GaussLegendre::n128().integrate(0.0, 1.0, |v| (v + 0.5).powi(2));
    let truth: Vec<f64> = grid.iter().map(|&v| (v + 0.5f64).powi(2) / norm).collect();
    let keep = central(&grid, &u);
    let err = sup_distance(&masked(&fit.curve.values, &keep), &truth);
    assert!(err < 0.05, "sup error {err}");
}

#[test]
fn basic_on_identity_distortion_is_flat() {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    let vf = fit_variable(&u, &x, DistortionMethod::Basic, None, None, &ZeroDetection::default()).unwrap();
    let keep = central(&vf.fit.curve.grid, &u);
    let err = sup_distance(&masked(&vf.fit.curve.values, &keep), &vec![1.0; keep.len()]);
    assert!(err < 0.05, "sup error {err}");
}

#[test]
fn general_and_signed_agree_without_zeros() {
    let model = find_model("i.b").unwrap();
    let det = ZeroDetection::default();
    for seed in 0..10 {
        let sim = generate_sample(model, 2000, seed).unwrap();
        let u = &sim.sample.u;
        let z = &sim.sample.x_tilde;
        let g = plugin_bandwidth(u, z).unwrap();
        let grid = distortion_grid(u).unwrap();
        let general = estimate_for(u, z, DistortionMethod::General, g, &grid, &det).unwrap();
        assert!(general.tau.is_empty(), "seed {seed}: {:?}", general.tau);
        let signed = estimate_distortion(&sim.sample, Target::X, DistortionMethod::Signed, g, &grid).unwrap();
        // the noise of both estimates is proportional to the distortion level
        let keep = central(&grid, u);
        let worst = (0..grid.len())
            .filter(|&k| keep[k])
            .map(|k| (general.curve.values[k] - signed.curve.values[k]).abs() / signed.curve.values[k].abs().max(1.0))
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "seed {seed}: {worst}");
    }
}

#[test]
fn wave_sign_changes_recovered_in_most_seeds() {
    let model = find_model("iv.a").unwrap();
    let det = ZeroDetection::default();
    let seeds = 50;
    let mut hits = 0;
    for s in 0..seeds {
        let sim = generate_with(model, 1000, &mut replication_rng(31, s)).unwrap();
        let (_, found) = detect_zeros(&sim.sample.u, &sim.sample.x_tilde, None, &det).unwrap();
        let near = |t: f64| found.iter().any(|c| (c.tau - t).abs() <= 0.05);
        if near(0.2) && near(0.6) {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.9 * seeds as f64, "{hits}/{seeds}");
}

#[test]
fn assembled_sign_pattern_matches_truth() {
    let det = ZeroDetection::default();
    for id in ["iv.a", "v.a", "vi.a"] {
        let model = find_model(id).unwrap();
        let mut agreement = Vec::new();
        for s in 0..20 {
            let sim = generate_with(model, 1000, &mut replication_rng(13, s)).unwrap();
            let fit = fit_variable(&sim.sample.u, &sim.sample.x_tilde, DistortionMethod::General, None, None, &det);
            let Ok(vf) = fit else {
                agreement.push(0.0);
                continue;
            };
            let c = &vf.fit.curve;
            let (mut agree, mut total) = (0, 0);
            for k in 0..c.len() {
                let t = c.grid[k];
                if !c.valid_mask[k] || [0.2, 0.6].iter().any(|tau| (t - tau).abs() <= 0.05) {
                    continue;
                }
                total += 1;
                if c.values[k].signum() == model.phi(t).signum() {
                    agree += 1;
                }
            }
            agreement.push(agree as f64 / total as f64);
        }
        agreement.sort_by(f64::total_cmp);
        let median = 0.5 * (agreement[9] + agreement[10]);
        assert!(median >= 0.95, "{id}: {agreement:?}");
    }
}

#[test]
fn study_examples_on_model_ia() {
    use MethodTag::*;
    let model = find_model("i.a").unwrap();
    let s = run_study(model, &StudyConfig::new(200, 500, 7, vec![Oracle, Naive])).unwrap();
    let oracle = s.row(Oracle).unwrap().median;
    let naive = s.row(Naive).unwrap().median;
    assert!((3.0..=8.0).contains(&oracle), "oracle {oracle}");
    assert!((52.0..=77.0).contains(&naive), "naive {naive}");

    let s = run_study(model, &StudyConfig::new(500, 200, 7, vec![Oracle, Naive])).unwrap();
    // printed 2 [2,3] and 56 [49,64], widened by half an IQR
    let oracle = s.row(Oracle).unwrap().median;
    let naive = s.row(Naive).unwrap().median;
    assert!((1.5..=3.5).contains(&oracle), "oracle {oracle}");
    assert!((41.5..=71.5).contains(&naive), "naive {naive}");
}

fn univariate_sample(n: usize, seed: u64) -> (AdditiveSample, DistortedSample) {
    let sim = generate_sample(find_model("i.a").unwrap(), n, seed).unwrap();
    let s = sim.sample;
    let add = AdditiveSample::new(s.u.clone(), vec![s.x_tilde.clone()], s.y_tilde.clone(), 0).unwrap();
    (add, s)
}

#[test]
fn single_component_backfit_is_the_univariate_fit() {
    for method in [DistortionMethod::Basic, DistortionMethod::Signed] {
        let (add, sample) = univariate_sample(400, 5);
        let fit = backfit(&add, &VariableMethods::uniform(1, method), &AdditiveConfig::default()).unwrap();
        assert!(fit.converged);
        let comp = &fit.components[0];
        let tuning = Tuning {
            h: Some(fit.bandwidths[0]),
            ..Tuning::default()
        };
        let uni = fit_adjusted(&sample, method, method, &GridSpec::Points(comp.grid.clone()), &tuning).unwrap();
        assert_eq!(uni.predictors.retained, fit.retained);
        let mut worst = 0.0f64;
        for k in 0..comp.len() {
            if uni.fit.valid_mask[k] {
                worst = worst.max((comp.values[k] + fit.m0_hat - uni.fit.m_hat[k]).abs());
            }
        }
        assert!(worst < 1e-8, "{method:?}: {worst}");
    }
}

#[test]
fn backfit_absorbs_response_shift_into_intercept() {
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| (2.0 * x1[i]).sin() + x2[i] * x2[i] + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 3.0).collect();
    let xs = vec![x1, x2];
    let cfg = AdditiveConfig::default();
    let a = backfit_generated(&xs, &y, &cfg).unwrap();
    let b = backfit_generated(&xs, &shifted, &cfg).unwrap();
    assert!((b.m0_hat - a.m0_hat - 3.0).abs() < 1e-8);
    for j in 0..2 {
        let d = sup_distance(&a.components[j].values, &b.components[j].values);
        assert!(d < 1e-8, "component {j}: {d}");
    }
}
