//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p beb-core --test acceptance -- --nocapture` to see all of them.

use beb_core::analysis::{attractor_points, sweep_gamma_l, sweep_mu, settled_equilibrium, trap_check, SweepConfig, SweepRecord, TrapRegion};
use beb_core::hybrid::{extract_section_sequence, simulate, SimOptions};
use beb_core::onedmap::{covering_check, critical_points, eval_f};
use beb_core::retmap::SectionPoint;
use beb_core::system::{derive_traces, equilibria};
use beb_core::{Mat3, ReturnMap, Settings, System, SystemParams, Vec3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

fn verdict(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let in_time = elapsed < limit;
    let ok = pass && in_time;
    println!(
        "[{}] criterion {id} {name}: {detail}; {:.2?} (limit {:?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded {limit:?}: {elapsed:.2?}");
}

fn default_map() -> ReturnMap {
    ReturnMap::new(SystemParams::default(), Settings::default()).unwrap()
}

/// Roots of a monic cubic `z^3 + a z^2 + b z + c` by Durand-Kerner iteration.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let p = |z: Complex64| ((z + a) * z + b) * z + c;
    let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
    let seed = Complex64::new(0.4, 0.9);
    let mut z = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..3 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = p(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-16 * scale {
            break;
        }
    }
    // polish each root with Newton steps
    for zi in &mut z {
        for _ in 0..3 {
            let dp = (3.0 * *zi + 2.0 * a) * *zi + b;
            if dp.norm() > 0.0 {
                *zi -= p(*zi) / dp;
            }
        }
    }
    z
}

/// Characteristic polynomial coefficients from the matrix entries.
fn char_poly(m: &Mat3) -> (f64, f64, f64) {
    let a = m.0;
    let tr = a[0][0] + a[1][1] + a[2][2];
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    (-tr, minors, -det)
}

/// Largest distance from an expected eigenvalue to its nearest computed root,
/// relative to `max(1, |lambda|)`.
fn spectrum_error(m: &Mat3, expected: [Complex64; 3]) -> f64 {
    let (a, b, c) = char_poly(m);
    let roots = cubic_roots(a, b, c);
    expected
        .iter()
        .map(|e| roots.iter().map(|r| (r - e).norm()).fold(f64::INFINITY, f64::min) / e.norm().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_eigen_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut draw = || 5.0 * (1.0 - rng.gen::<f64>());
        let params = SystemParams {
            alpha_l: draw(),
            beta_l: draw(),
            gamma_l: draw(),
            alpha_r: draw(),
            beta_r: draw(),
            gamma_r: draw(),
            ..SystemParams::default()
        };
        let t = derive_traces(&params);
        let left = [
            Complex64::new(-params.alpha_l, params.beta_l),
            Complex64::new(-params.alpha_l, -params.beta_l),
            Complex64::new(-params.gamma_l, 0.0),
        ];
        let right = [
            Complex64::new(params.alpha_r, params.beta_r),
            Complex64::new(params.alpha_r, -params.beta_r),
            Complex64::new(-params.gamma_r, 0.0),
        ];
        worst = worst.max(spectrum_error(&t.left_matrix(), left)).max(spectrum_error(&t.right_matrix(), right));
    }
    let elapsed = start.elapsed();
    verdict(1, "eigen round-trip", worst <= 1e-10, elapsed, Duration::from_secs(1), format!("worst relative error {worst:.2e} over 1000 draws"));
}

/// `exp(t C)` by scaling and squaring of a truncated Taylor series.
fn expm_taylor(c: &Mat3, t: f64) -> Mat3 {
    let norm = c.0.iter().flatten().map(|v| v.abs()).sum::<f64>() * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let a = c.scale(t / 2f64.powi(squarings));
    let mut term = Mat3::identity();
    let mut sum = Mat3::identity();
    for k in 1..30 {
        term = term.matmul(&a).scale(1.0 / k as f64);
        sum = sum + term;
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

#[test]
fn criterion_2_global_map() {
    let map = default_map();
    let params = *map.params();
    let sys = System::new(params).unwrap();
    let (_, x_r) = equilibria(&params);
    let period = 2.0 * PI / params.beta_r;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let propagator = expm_taylor(&sys.c_right, period);
    let (growth, decay) = ((2.0 * PI * params.alpha_r / params.beta_r).exp(), (-2.0 * PI * params.gamma_r / params.beta_r).exp());
    let (mut residual, mut chart_err, mut oracle_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let s = SectionPoint { c1: rng.gen_range(-1.0..1.0), c2: rng.gen_range(-1.0..1.0) };
        let p = map.unchart(s);
        let image = map.right_flow().flow(period, p);
        let oracle = x_r.location + propagator.mul_vec(p - x_r.location);
        oracle_err = oracle_err.max((image - oracle).norm() / oracle.norm().max(1.0));
        residual = residual.max(map.section_plane().value(image).abs());
        let expected = map.global_map(s);
        let got = map.chart(image).unwrap();
        chart_err = chart_err.max((got.c1 - expected.c1).abs().max((got.c2 - expected.c2).abs()));
    }
    let (m1, m2) = map.global_multipliers();
    let multipliers_ok = (m1 - 1.13390).abs() < 5e-6 && (m2 - 0.0018674).abs() < 5e-8 && (m1 - growth).abs() < 1e-14 && (m2 - decay).abs() < 1e-16;
    let elapsed = start.elapsed();
    verdict(
        2,
        "global map",
        residual <= 1e-10 && chart_err <= 1e-9 && oracle_err <= 1e-10 && multipliers_ok,
        elapsed,
        Duration::from_secs(1),
        format!("residual {residual:.2e}, chart error {chart_err:.2e}, flow vs Taylor {oracle_err:.2e}, multipliers {m1:.5} {m2:.7}"),
    );
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d): (usize, usize, f64) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn criterion_3_conjugacy() {
    let map = default_map();
    let sys = System::new(*map.params()).unwrap();
    let start = Instant::now();
    let seed = map.g(-0.001).unwrap();
    let from_map: Vec<f64> = attractor_points(&map, seed, 1000, 10_000).unwrap().iter().map(|p| p.x).collect();
    let seq = extract_section_sequence(&map, &sys, seed, 11_001, 1e7).unwrap();
    let from_flow: Vec<f64> = seq[1001..].iter().map(|s| s.point.x).collect();
    let d = ks_statistic(&from_map, &from_flow);
    let elapsed = start.elapsed();
    let gap = from_map.iter().zip(&from_flow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(
        3,
        "conjugacy",
        from_flow.len() == 10_000 && d < 0.05,
        elapsed,
        Duration::from_secs(60),
        format!("KS statistic {d:.4}, largest pointwise gap {gap:.2e}"),
    );
}

fn attractor(map: &ReturnMap, n: usize) -> Vec<Vec3> {
    attractor_points(map, map.g(-0.001 * map.params().mu).unwrap(), 1000, n).unwrap()
}

fn trapping_region(map: &ReturnMap) -> TrapRegion {
    TrapRegion::around_balanced(map, &attractor(map, 10_000), 0.2).unwrap().unwrap()
}

#[test]
fn criterion_4_trapping_region() {
    let map = default_map();
    let start = Instant::now();
    let region = trapping_region(&map);
    let report = trap_check(&map, &region, 2000);
    let elapsed = start.elapsed();
    verdict(
        4,
        "trapping region",
        report.contained && report.min_margin > 0.0 && report.boundary_points >= 2000,
        elapsed,
        Duration::from_secs(60),
        format!("{} boundary points, {} failures, min relative margin {:.4}", report.boundary_points, report.failures.len(), report.min_margin),
    )
}

#[test]
fn criterion_5_reduction_quality() {
    let map = default_map();
    let start = Instant::now();
    let pts = attractor(&map, 10_001);
    let mut errs: Vec<f64> = pts.windows(2).map(|w| (w[1].x - eval_f(&map, w[0].x).unwrap()).abs()).collect();
    errs.sort_by(f64::total_cmp);
    let p95 = errs[(0.95 * errs.len() as f64).ceil() as usize - 1];
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let width = hi - lo;
    let elapsed = start.elapsed();
    verdict(
        5,
        "reduction quality",
        p95 < 0.01 * width,
        elapsed,
        Duration::from_secs(120),
        format!("p95 {p95:.3e} = {:.3}% of width {width:.4}", 100.0 * p95 / width),
    );
}

#[test]
fn criterion_6_unimodality_and_covering() {
    let map = default_map();
    let start = Instant::now();
    let region = trapping_region(&map);
    let critical = critical_points(&map, region.x_min, region.x_max, 2001).unwrap();
    let cover = covering_check(&map, -0.0045, 0.0015, 5, 2001);
    let elapsed = start.elapsed();
    verdict(
        6,
        "unimodality and covering",
        critical.len() == 1 && cover.confirmed(),
        elapsed,
        Duration::from_secs(120),
        format!(
            "{} critical point(s) on [{:.4}, {:.4}]; f^5 endpoints {:.4} {:.4}, f^5(I) = [{:.4}, {:.4}] vs I = [-0.0045, 0.0015]",
            critical.len(),
            region.x_min,
            region.x_max,
            cover.image_a,
            cover.image_b,
            cover.min,
            cover.max
        ),
    );
}

/// Maximal runs of equal detected period as `(period, low param, high param)`.
fn runs(records: &[SweepRecord]) -> Vec<(Option<usize>, f64, f64)> {
    let mut out: Vec<(Option<usize>, f64, f64)> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(last) if last.0 == r.period => last.2 = r.param,
            _ => out.push((r.period, r.param, r.param)),
        }
    }
    out
}

/// Longest run with the given period.
fn main_band(runs: &[(Option<usize>, f64, f64)], period: usize) -> Option<(f64, f64)> {
    runs.iter()
        .filter(|r| r.0 == Some(period))
        .max_by(|a, b| (a.2 - a.1).total_cmp(&(b.2 - b.1)))
        .map(|r| (r.1, r.2))
}

#[test]
fn criterion_7_cascade() {
    let base = SystemParams::default();
    let cfg = SweepConfig::default();
    let start = Instant::now();
    let main = sweep_gamma_l(base, Settings::default(), (0.05, 0.35), 600, &cfg);
    let near = sweep_gamma_l(base, Settings::default(), (0.04, 0.06), 401, &SweepConfig { lyapunov_n: 0, ..cfg });
    let elapsed = start.elapsed();

    let top = main.last().unwrap();
    let runs = runs(&main);
    let bands: Vec<Option<(f64, f64)>> = [1, 2, 4].iter().map(|&k| main_band(&runs, k)).collect();
    let ordered = match bands[..] {
        [Some(b1), Some(b2), Some(b4)] => b1.0 > b2.1 && b2.0 > b4.1,
        _ => false,
    };
    let window: Vec<f64> = main.iter().chain(&near).filter(|r| r.period == Some(5) && (0.04..=0.06).contains(&r.param)).map(|r| r.param).collect();
    let at_005 = &main[0];
    let lyap = at_005.lyapunov.unwrap_or(f64::NAN);
    let failures = main.iter().chain(&near).filter(|r| r.error.is_some()).count();
    let shown: Vec<String> = [1, 2, 4]
        .iter()
        .zip(&bands)
        .map(|(k, b)| b.map_or(format!("{k}: absent"), |(lo, hi)| format!("{k}: [{lo:.4}, {hi:.4}]")))
        .collect();
    verdict(
        7,
        "period-doubling cascade",
        top.period == Some(1) && ordered && !window.is_empty() && lyap > 0.0,
        elapsed,
        Duration::from_secs(600),
        format!(
            "period {:?} at 0.35; main bands {}; ordered {ordered}; {} period-5 points in [0.04, 0.06]; period {:?} and Lyapunov {lyap:.4} at 0.05; {failures} failed points",
            top.period,
            shown.join(", "),
            window.len(),
            at_005.period
        ),
    );
}

#[test]
fn criterion_8_nonlinear_branch() {
    let base = SystemParams { nonlinear: true, ..SystemParams::default() };
    let settings = Settings::default();
    let cfg = SweepConfig::default();
    let start = Instant::now();
    let err = |mu: f64| {
        let p = base.with_mu(mu);
        let settled = settled_equilibrium(p, settings, cfg.settle_time).unwrap();
        (settled - equilibria(&p).0.location).norm()
    };
    let ratio = err(-0.5) / err(-0.05);
    let records = sweep_mu(base, settings, (-1.0, 1.5), 600, &cfg);
    let elapsed = start.elapsed();

    let positive: Vec<&SweepRecord> = records.iter().filter(|r| r.param > 0.0).collect();
    let first5 = positive.iter().find(|r| r.period == Some(5)).map(|r| r.param);
    let quiet_left = first5.is_some_and(|m| positive.iter().filter(|r| r.param < m).all(|r| r.period.is_none() && r.error.is_none()));
    let mut periods: Vec<usize> = positive.iter().filter_map(|r| r.period).collect();
    periods.sort_unstable();
    periods.dedup();
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    verdict(
        8,
        "nonlinear branch",
        (50.0..=200.0).contains(&ratio) && first5.is_some() && quiet_left,
        elapsed,
        Duration::from_secs(900),
        format!("equilibrium error ratio {ratio:.1}; first period-5 mu {first5:?}; periods seen for mu > 0 {periods:?}; {failures} failed points"),
    );
}

#[test]
fn criterion_9_integrator_and_scaling() {
    let map = default_map();
    let sys = System::new(*map.params()).unwrap();
    let start = Instant::now();
    let x0 = Vec3::new(0.4, 0.3, 1.2);
    let opts = SimOptions { sample_dt: 0.01, force_rk: true };
    let segs = simulate(&sys, Settings::default(), opts, x0, map.right_period()).unwrap();
    let rk_err = segs
        .iter()
        .flat_map(|s| s.samples.iter())
        .map(|(t, p)| (*p - map.right_flow().flow(*t, x0)).norm())
        .fold(0.0, f64::max);
    let one_piece = segs.len() == 1;

    let pts = attractor(&map, 50);
    let mut scale_err: f64 = 0.0;
    for c in [0.5, 2.0] {
        let scaled = ReturnMap::new(map.params().with_mu(c * map.params().mu), Settings::default()).unwrap();
        for &p in &pts {
            let a = map.apply(p).unwrap() * c;
            let b = scaled.apply(p * c).unwrap();
            scale_err = scale_err.max((a - b).norm() / a.norm());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        9,
        "integrator cross-check and scaling",
        one_piece && rk_err < 1e-8 && scale_err <= 1e-10,
        elapsed,
        Duration::from_secs(1),
        format!("RK vs exact {rk_err:.2e} over one revolution; scaling relative error {scale_err:.2e}"),
    );
}
