//! Cross-model agreement and structural properties of the analytical models.

use farchan_core::channel::{
    hit_n, hit_n_asymptotic, hit_single, hit_symmetric, hit_three, hit_two, hitting_curve, n_far_transforms,
    three_far_transform, Model, NFarSystem, SeriesConfig,
};
use farchan_core::geometry::{uca_geometry, validate, SystemGeometry};
use farchan_core::laplace::{invert, p_bar, InversionConfig, Inverter, LaplaceFn};
use num_complex::Complex64;
use proptest::prelude::*;

const A: f64 = 5.0;
const D: f64 = 100.0;

fn scene() -> SystemGeometry {
    SystemGeometry::new([[25.0, 0.0, 0.0], [-25.0, 5.0, 0.0], [20.0, -15.0, 10.0]], A, D).unwrap()
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

#[test]
fn inversion_reproduces_closed_form_pairs() {
    let cfg = InversionConfig::default();
    let erfc_pair = |x: f64| move |t: f64| A / x * libm::erfc((x - A) / (4.0 * D * t).sqrt());
    let pairs: Vec<(Box<dyn Fn(Complex64) -> Complex64 + Sync>, Box<dyn Fn(f64) -> f64>)> = vec![
        (Box::new(|s: Complex64| s.inv()), Box::new(|_| 1.0)),
        (Box::new(|s: Complex64| (s * s).inv()), Box::new(|t| t)),
        (Box::new(|s: Complex64| (s + 0.7).inv()), Box::new(|t: f64| (-0.7 * t).exp())),
        (Box::new(|s: Complex64| p_bar(s, 25.0, A, D)), Box::new(erfc_pair(25.0))),
        (Box::new(|s: Complex64| p_bar(s, 6.0, A, D)), Box::new(erfc_pair(6.0))),
    ];
    for (f, exact) in &pairs {
        for t in log_times(1e-3, 10.0, 60) {
            let got = invert(f.as_ref(), t, &cfg).unwrap();
            assert!((got - exact(t)).abs() < 1e-6, "t={t}: {got} vs {}", exact(t));
        }
    }
}

#[test]
fn inversion_is_linear() {
    let cfg = InversionConfig::default();
    let f = |s: Complex64| p_bar(s, 25.0, A, D);
    let g = |s: Complex64| (s + 0.7).inv();
    let (alpha, beta) = (0.3, -1.7);
    let combo = |s: Complex64| f(s) * alpha + g(s) * beta;
    for t in log_times(1e-3, 10.0, 30) {
        let lhs = invert(&combo, t, &cfg).unwrap();
        let rhs = alpha * invert(&f, t, &cfg).unwrap() + beta * invert(&g, t, &cfg).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "t={t}");
    }
}

#[test]
fn gaver_stehfest_and_talbot_agree_on_three_receivers() {
    let talbot = Inverter::new(InversionConfig::default()).unwrap();
    let stehfest = Inverter::new(InversionConfig::gaver_stehfest(14)).unwrap();
    let g = scene();
    for target in 0..3 {
        let h = three_far_transform(&g, target).unwrap();
        for t in [0.02, 0.1, 0.5, 1.0, 5.0] {
            let a = talbot.invert(&h, t).unwrap();
            let b = stehfest.invert(&h, t).unwrap();
            assert!((a - b).abs() < 5e-5, "target {target} t {t}: {a} vs {b}");
        }
    }
}

#[test]
fn three_receiver_solution_equals_general_system() {
    let inv = InversionConfig::default();
    let g = scene();
    for t in log_times(0.01, 10.0, 25) {
        for target in 0..3 {
            let three = hit_three(t, &g, target, &inv).unwrap();
            let general = hit_n(t, &g, target, &inv).unwrap();
            assert!((three - general).abs() < 1e-9, "t={t} target={target}");
        }
    }
}

#[test]
fn two_receiver_series_equals_inverted_system() {
    let inv = InversionConfig::default();
    let series = SeriesConfig::default();
    let g = scene().subset(&[0, 1]).unwrap();
    for t in log_times(0.01, 10.0, 40) {
        for target in 0..2 {
            let closed = hit_two(t, &g, target, &series).unwrap().value;
            let general = hit_n(t, &g, target, &inv).unwrap();
            assert!((closed - general).abs() < 1e-4, "t={t} target={target}: {closed} vs {general}");
        }
    }
}

#[test]
fn symmetric_series_equals_inverted_transform() {
    let inv = InversionConfig::default();
    let series = SeriesConfig::default();
    for a in [2.0, 4.0, 6.0] {
        let g = uca_geometry(10.0, 20.0, a, D).unwrap();
        let (r, big_r) = g.symmetric_distances(1e-9).unwrap();
        for t in log_times(0.01, 10.0, 20) {
            let closed = hit_symmetric(t, r, big_r, a, D, &series).unwrap().value;
            for target in 0..3 {
                let three = hit_three(t, &g, target, &inv).unwrap();
                assert!((closed - three).abs() < 1e-4);
            }
            let all = NFarSystem::new(&g).hit_all(t, &Inverter::new(inv).unwrap()).unwrap();
            assert!((all[0] - all[1]).abs() < 1e-12 && (all[0] - all[2]).abs() < 1e-12);
        }
    }
}

#[test]
fn single_receiver_general_system_is_closed_form() {
    let inv = InversionConfig::default();
    let g = SystemGeometry::new([[25.0, 0.0, 0.0]], A, D).unwrap();
    for t in log_times(0.01, 10.0, 15) {
        let closed = hit_single(t, 25.0, A, D).unwrap();
        assert!((hit_n(t, &g, 0, &inv).unwrap() - closed).abs() < 1e-9);
    }
}

#[test]
fn eventual_values_are_approached() {
    let inv = InversionConfig::default();
    for g in [scene(), uca_geometry(10.0, 20.0, A, D).unwrap()] {
        let asym = hit_n_asymptotic(&g).unwrap();
        let r_max = g.radial_distances().into_iter().fold(0.0, f64::max);
        // (r - a) / sqrt(4 D T) < 0.01 for every receiver.
        let t = ((r_max - A) / 0.009).powi(2) / (4.0 * D);
        for (target, eventual) in asym.iter().enumerate() {
            let late = hit_n(t, &g, target, &inv).unwrap();
            assert!((late - eventual).abs() < 5e-3, "{late} vs {eventual}");
        }
    }
}

#[test]
fn analytical_curves_are_monotone_probabilities() {
    let inv = InversionConfig::default();
    let series = SeriesConfig::default();
    let times = log_times(0.005, 20.0, 60);
    let uca = uca_geometry(10.0, 20.0, A, D).unwrap();
    let cases = [
        (SystemGeometry::new([[25.0, 0.0, 0.0]], A, D).unwrap(), Model::Single),
        (scene().subset(&[0, 1]).unwrap(), Model::Two),
        (scene(), Model::Three),
        (uca.clone(), Model::Symmetric),
        (scene(), Model::NGeneral),
        (uca, Model::NGeneral),
    ];
    for (g, model) in cases {
        let curve = hitting_curve(&g, &times, model, &inv, &series).unwrap();
        assert!(curve.is_monotone(1e-9), "{model}: max decrease {}", curve.max_decrease());
        assert!(curve.in_unit_interval(1e-12), "{model}");
    }
}

#[test]
fn n_far_transforms_scene_within_isolated_bound() {
    let g = scene();
    for s in [0.01, 1.0, 100.0] {
        for (i, h) in n_far_transforms(&g, s).unwrap().into_iter().enumerate() {
            let isolated = p_bar(Complex64::new(s, 0.0), g.radial_distance(i).unwrap(), A, D).re;
            assert!(h > 0.0 && h <= isolated, "s={s} i={i}: {h} vs {isolated}");
        }
    }
}

#[test]
fn final_value_of_each_receiver_is_bounded_by_isolated_fraction() {
    let cfg = InversionConfig::default();
    let g = scene();
    for target in 0..3 {
        let h = three_far_transform(&g, target).unwrap();
        let fv = farchan_core::laplace::final_value(&h, &cfg).unwrap();
        let r = g.radial_distance(target).unwrap();
        assert!(fv <= A / r);
        assert!((fv - hit_n_asymptotic(&g).unwrap()[target]).abs() < 1e-8);
        assert!(h.eval(Complex64::new(1.0, 0.0)).re.is_finite());
    }
}

fn arb_geometry() -> impl Strategy<Value = SystemGeometry> {
    (prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 2..=5), 1.0f64..5.0, 20.0f64..300.0)
        .prop_filter_map("invalid or warned geometry", |(centers, a, d)| {
            SystemGeometry::new(centers, a, d).ok().filter(|g| !validate(g).is_warned())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn removing_a_competitor_never_hurts(g in arb_geometry(), drop_seed in 0usize..100) {
        let inv = InversionConfig::default();
        let n = g.len();
        let target = 0;
        let dropped = 1 + drop_seed % (n - 1);
        let keep: Vec<usize> = (0..n).filter(|&i| i != dropped).collect();
        let reduced = g.subset(&keep).unwrap();
        let full_sys = NFarSystem::new(&g);
        let reduced_sys = NFarSystem::new(&reduced);
        let inverter = Inverter::new(inv).unwrap();
        for t in [0.05, 0.3, 1.0, 5.0] {
            let full = full_sys.hit_all(t, &inverter).unwrap()[target];
            let fewer = reduced_sys.hit_all(t, &inverter).unwrap()[target];
            prop_assert!(fewer >= full - 1e-6, "t={} full={} fewer={}", t, full, fewer);
        }
        let asym = hit_n_asymptotic(&g).unwrap();
        prop_assert!(asym.iter().sum::<f64>() < 1.0);
    }
}
