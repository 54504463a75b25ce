//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use farchan::parallel;
use farchan_core::channel::{
    hit_n, hit_n_asymptotic, hit_single, hit_symmetric, hit_three, hit_two, NFarSystem, SeriesConfig,
};
use farchan_core::geometry::{angle_layout, uca_geometry, SystemGeometry};
use farchan_core::laplace::{invert, p_bar, InversionConfig, Inverter};
use farchan_core::metrics::{array_gain_asymptotic_symmetric, competitor_gap, malicious_influence, with_malicious};
use farchan_core::simulator::{CellStatus, GridFamily, SimConfig};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const A: f64 = 5.0;
const D: f64 = 100.0;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo * (hi / lo).powf(k as f64 / (n - 1) as f64) }).collect()
}

fn lin_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

fn scene() -> SystemGeometry {
    SystemGeometry::new([[25.0, 0.0, 0.0], [-25.0, 5.0, 0.0], [20.0, -15.0, 10.0]], A, D).unwrap()
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

fn inversion_oracle() -> Outcome {
    let cfg = InversionConfig::default();
    let erfc_pair = |x: f64| move |t: f64| A / x * libm::erfc((x - A) / (4.0 * D * t).sqrt());
    type Pair = (&'static str, Box<dyn Fn(Complex64) -> Complex64 + Sync>, Box<dyn Fn(f64) -> f64>);
    let pairs: Vec<Pair> = vec![
        ("1/s", Box::new(|s: Complex64| s.inv()), Box::new(|_| 1.0)),
        ("1/s^2", Box::new(|s: Complex64| (s * s).inv()), Box::new(|t| t)),
        ("1/(s+0.7)", Box::new(|s: Complex64| (s + 0.7).inv()), Box::new(|t: f64| (-0.7 * t).exp())),
        (
            "1/sqrt(s)",
            Box::new(|s: Complex64| s.sqrt().inv()),
            Box::new(|t: f64| 1.0 / (std::f64::consts::PI * t).sqrt()),
        ),
        ("P(s,25)", Box::new(|s: Complex64| p_bar(s, 25.0, A, D)), Box::new(erfc_pair(25.0))),
        ("P(s,6)", Box::new(|s: Complex64| p_bar(s, 6.0, A, D)), Box::new(erfc_pair(6.0))),
    ];
    let times = log_times(1e-3, 10.0, 60);
    let start = Instant::now();
    let mut worst = (0.0_f64, "", 0.0);
    for (name, f, exact) in &pairs {
        for &t in &times {
            let err = (invert(f.as_ref(), t, &cfg).map_err(|e| e.to_string())? - exact(t)).abs();
            if err > worst.0 {
                worst = (err, name, t);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst.0 < 1e-6 && elapsed < 1.0,
        format!(
            "max error {:.2e} ({} at t={:.3e}) over {} pairs x {} times, {:.3} s",
            worst.0,
            worst.1,
            worst.2,
            pairs.len(),
            times.len(),
            elapsed
        ),
    )
}

fn cross_model_identity() -> Outcome {
    let inv = InversionConfig::default();
    let series = SeriesConfig::default();
    let times = log_times(0.01, 10.0, 50);
    let start = Instant::now();
    let (mut three_vs_n, mut sym_vs_three) = (0.0_f64, 0.0_f64);
    for a in [2.0, 4.0, 6.0] {
        let g = uca_geometry(10.0, 20.0, a, D).map_err(|e| e.to_string())?;
        let (r, big_r) = g.symmetric_distances(1e-9).ok_or("UCA not recognised as symmetric")?;
        for &t in &times {
            let three = hit_three(t, &g, 0, &inv).map_err(|e| e.to_string())?;
            let general = hit_n(t, &g, 0, &inv).map_err(|e| e.to_string())?;
            let sym = hit_symmetric(t, r, big_r, a, D, &series).map_err(|e| e.to_string())?.value;
            three_vs_n = three_vs_n.max((three - general).abs());
            sym_vs_three = sym_vs_three.max((sym - three).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        three_vs_n < 1e-9 && sym_vs_three < 1e-4 && elapsed < 10.0,
        format!("three vs n {three_vs_n:.2e}, symmetric vs three {sym_vs_three:.2e}, {elapsed:.2} s"),
    )
}

fn two_receiver_consistency() -> Outcome {
    let pair = scene().subset(&[0, 1]).map_err(|e| e.to_string())?;
    let inv = Inverter::new(InversionConfig::default()).map_err(|e| e.to_string())?;
    let system = NFarSystem::new(&pair);
    let series = SeriesConfig::default();
    let mut worst = 0.0_f64;
    for t in log_times(0.01, 1.0, 50) {
        let inverted = system.hit_all(t, &inv).map_err(|e| e.to_string())?;
        for (target, h) in inverted.iter().enumerate() {
            let s = hit_two(t, &pair, target, &series).map_err(|e| e.to_string())?.value;
            worst = worst.max((s - h).abs());
        }
    }
    check(worst < 1e-4, format!("max |series - inverted 2x2| {worst:.2e} over 50 times, both receivers"))
}

fn three_receiver_simulation() -> Outcome {
    let g = scene();
    let times = lin_times(0.05, 1.0, 10);
    let cfg = SimConfig { dt: 1e-4, t_max: 1.0, trials: 200_000, seed: 2024, record_times: times.clone() };
    let inv = InversionConfig::default();
    let start = Instant::now();
    let est = parallel::simulate(&g, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let (mut worst_err, mut worst_excess, mut fails) = (0.0_f64, f64::NEG_INFINITY, 0);
    for (k, &t) in times.iter().enumerate() {
        for i in 0..3 {
            let analytical = hit_three(t, &g, i, &inv).map_err(|e| e.to_string())?;
            let err = (analytical - est.prob(i, k)).abs();
            let bound = 0.01_f64.max(3.0 * est.ci_halfwidth[i][k]);
            worst_err = worst_err.max(err);
            worst_excess = worst_excess.max(err - bound);
            if err >= bound {
                fails += 1;
            }
        }
    }
    check(
        fails == 0 && elapsed < 300.0,
        format!(
            "max |analytical - sim| {worst_err:.4} (worst margin to bound {worst_excess:.4}), {fails} of 30 over, \
             2e5 trials in {elapsed:.1} s"
        ),
    )
}

fn moving_receiver_error_map() -> Outcome {
    let grid = vec![-30.0, -15.0, 0.0, 15.0, 30.0];
    let family = GridFamily {
        moving: 0,
        x: 10.0,
        fixed: vec![[10.0, 14.14, 14.14], [10.0, 14.14, -14.14]],
        ys: grid.clone(),
        zs: grid,
        radius_a: A,
        diffusion_d: D,
    };
    let cfg = SimConfig { dt: 1e-4, t_max: 1.0, trials: 10_000, seed: 33, record_times: vec![1.0] };
    let cells = parallel::error_map(&family, 1.0, &cfg, &InversionConfig::default()).map_err(|e| e.to_string())?;
    let (mut excluded, mut warned, mut checked) = (0, 0, 0);
    let mut worst = (0.0_f64, 0.0, 0.0);
    let mut warned_worst = 0.0_f64;
    for cell in &cells {
        let errs = cell.abs_errors();
        match (&cell.status, errs) {
            (CellStatus::Excluded(_), _) => excluded += 1,
            (CellStatus::Evaluated { warned: true, .. }, Some(e)) => {
                warned += 1;
                warned_worst = warned_worst.max(e.iter().copied().fold(0.0, f64::max));
            }
            (_, Some(e)) => {
                checked += 1;
                let m = e.iter().copied().fold(0.0, f64::max);
                if m > worst.0 {
                    worst = (m, cell.y, cell.z);
                }
            }
            _ => unreachable!(),
        }
    }
    check(
        worst.0 < 0.02 && checked > 0,
        format!(
            "{checked} cells checked, {warned} warned (worst {warned_worst:.4}), {excluded} excluded; \
             max error {:.4} at y={}, z={} (1e4 trials per cell)",
            worst.0, worst.1, worst.2
        ),
    )
}

fn symmetric_eventual_fraction() -> Outcome {
    let a = 5.0;
    let g = uca_geometry(10.0, 20.0, a, D).map_err(|e| e.to_string())?;
    let c: Vec<[f64; 3]> = g.centers().collect();
    let r = dist(c[0], [0.0; 3]);
    // Nearest surface point of receiver 1 to the transmitter, then its distance to receiver 2's center.
    let b1 = [c[0][0] * (1.0 - a / r), c[0][1] * (1.0 - a / r), c[0][2] * (1.0 - a / r)];
    let big_r = dist(b1, c[1]);
    let expected = (a / r) / (1.0 + 2.0 * a / big_r);
    let got = hit_n_asymptotic(&g).map_err(|e| e.to_string())?;
    let err = got.iter().map(|h| (h - expected).abs()).fold(0.0, f64::max);
    let geom_ok = (r - 22.3607).abs() < 1e-4
        && (big_r - 30.93).abs() < 5e-3
        && (g.radial_distance(0).unwrap() - r).abs() < 1e-12
        && (g.proxy_distance(0, 1).unwrap() - big_r).abs() < 1e-12;
    check(err < 1e-10 && geom_ok, format!("r = {r:.4}, R = {big_r:.4}, h_inf = {expected:.10}, max error {err:.2e}"))
}

fn array_gain_bound() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut max_gain = 0.0_f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(0.1..10.0);
        let excess = 10f64.powf(rng.random_range(-6.0..3.0));
        let big_r = 2.0 * a * (1.0 + excess);
        max_gain = max_gain.max(array_gain_asymptotic_symmetric(a, big_r).map_err(|e| e.to_string())?.s_gain);
    }
    let far = array_gain_asymptotic_symmetric(1.0, 1e4).map_err(|e| e.to_string())?.s_gain;
    check(
        max_gain < 3.0 && (far - 3.0).abs() < 1e-3,
        format!("max s_inf over 100 pairs {max_gain:.6}, s_inf at R = 1e4 a is {far:.6}"),
    )
}

fn influence_over_angle() -> Outcome {
    let (r, a, t) = (20.0_f64, 5.0_f64, 1.0);
    let lo = 2.0 * (a / r).asin() + 0.1;
    let inv = InversionConfig::default();
    let mut qs = Vec::new();
    let mut excluded = Vec::new();
    for k in 0..20 {
        let theta = lo + (std::f64::consts::PI - lo) * (k + 1) as f64 / 20.0;
        match angle_layout(r, theta, a, D) {
            Ok(g) => qs.push((theta, malicious_influence(t, &g, 0, &inv).map_err(|e| e.to_string())?.q)),
            Err(_) => excluded.push(theta),
        }
    }
    let violations = qs.windows(2).filter(|w| w[1].1 > w[0].1 + 1e-12).count();
    check(
        violations == 0 && qs.len() >= 2,
        format!(
            "q from {:.4} to {:.4} over {} valid angles, {violations} increases; {} angles excluded \
             (competitors overlap for theta > {:.4})",
            qs.first().map_or(f64::NAN, |q| q.1),
            qs.last().map_or(f64::NAN, |q| q.1),
            qs.len(),
            excluded.len(),
            std::f64::consts::PI - (a / r).asin()
        ),
    )
}

fn malicious_ordering() -> Outcome {
    let inv = InversionConfig::default();
    let g = uca_geometry(10.0, 20.0, 4.0, D).map_err(|e| e.to_string())?;
    let g1 = with_malicious(&g, 1).map_err(|e| e.to_string())?;
    let r = g.radial_distance(0).unwrap();
    let times = lin_times(0.1, 1.0, 10);
    let (mut strict, mut direct) = (true, true);
    let mut gaps = Vec::new();
    for &t in &times {
        let h0 = hit_single(t, r, 4.0, D).map_err(|e| e.to_string())?;
        let h1 = hit_n(t, &g1, 0, &inv).map_err(|e| e.to_string())?;
        let h2 = hit_n(t, &g, 0, &inv).map_err(|e| e.to_string())?;
        let gap01 = competitor_gap(t, &g1, 0, 1, &inv).map_err(|e| e.to_string())?;
        let gap12 = competitor_gap(t, &g, 0, 2, &inv).map_err(|e| e.to_string())?;
        strict &= gap01 > 0.0 && gap12 > 0.0;
        direct &= h0 >= h1 - 1e-12 && h1 >= h2 - 1e-12;
        gaps.push((gap01, gap12));
    }
    let (first, last) = (gaps[0], gaps[gaps.len() - 1]);
    let widening = last.0 > first.0 && last.1 > first.1;
    check(
        strict && direct && widening,
        format!(
            "gaps m0-m1 / m1-m2: {:.2e} / {:.2e} at t=0.1, {:.2e} / {:.2e} at t=1 (all positive: {strict})",
            first.0, first.1, last.0, last.1
        ),
    )
}

fn dominance_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let inv = Inverter::new(InversionConfig::default()).map_err(|e| e.to_string())?;
    let times = [0.05, 0.3, 1.0, 5.0];
    let (mut geometries, mut violations, mut worst_increase, mut max_total) = (0, 0, f64::NEG_INFINITY, 0.0_f64);
    while geometries < 50 {
        let n = rng.random_range(2..=5);
        let a: f64 = rng.random_range(1.0..5.0);
        let d: f64 = rng.random_range(10.0..300.0);
        let centers: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)])
            .collect();
        let Ok(g) = SystemGeometry::new(centers, a, d) else { continue };
        geometries += 1;
        max_total = max_total.max(hit_n_asymptotic(&g).map_err(|e| e.to_string())?.iter().sum());
        let full = NFarSystem::new(&g);
        for &t in &times {
            let with_all = full.hit_all(t, &inv).map_err(|e| e.to_string())?;
            for removed in 0..n {
                let keep: Vec<usize> = (0..n).filter(|&i| i != removed).collect();
                let fewer = NFarSystem::new(&g.subset(&keep).unwrap()).hit_all(t, &inv).map_err(|e| e.to_string())?;
                for (h_fewer, &i) in fewer.iter().zip(&keep) {
                    let increase = with_all[i] - h_fewer;
                    worst_increase = worst_increase.max(increase);
                    if increase > 1e-6 {
                        violations += 1;
                    }
                }
            }
        }
    }
    check(
        violations == 0 && max_total < 1.0,
        format!(
            "{geometries} geometries, {violations} violations (largest gain from a competitor {worst_increase:.2e}), \
             max total eventual absorption {max_total:.4}"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let geom = dir.path().join("scene.json");
    std::fs::write(&geom, r#"{"receivers": [[25,0,0],[-25,5,0],[20,-15,10]], "radius_a": 5, "diffusion_d": 100}"#)
        .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in ["1", "2", "8"] {
        let raw = dir.path().join(format!("raw{workers}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_farchan"))
            .arg("sim")
            .arg(&geom)
            .args(["--dt", "1e-4", "--trials", "3000", "--seed", "99", "--record", "0.1:1:10", "--workers", workers])
            .arg("--raw")
            .arg(&raw)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("sim with {workers} workers failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push((out.stdout, std::fs::read(&raw).map_err(|e| e.to_string())?));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        same,
        format!(
            "summary CSV ({} bytes) and raw CSV ({} bytes) identical under 1, 2 and 8 workers: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("inversion oracle", inversion_oracle),
        ("cross-model identity", cross_model_identity),
        ("two-receiver series consistency", two_receiver_consistency),
        ("three-receiver simulation agreement", three_receiver_simulation),
        ("error map away from near contact", moving_receiver_error_map),
        ("symmetric eventual fraction", symmetric_eventual_fraction),
        ("array gain below receiver count", array_gain_bound),
        ("influence nonincreasing in angle", influence_over_angle),
        ("malicious receiver ordering", malicious_ordering),
        ("dominance and escape", dominance_suite),
        ("simulator determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.1} s]", k + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
