use std::f64::consts::PI;

use colombeau_core::embedding::{fourier_at, window, Cutoff, FourierOptions, Mollifier};
use colombeau_core::experiments::*;
use colombeau_core::nets::mul;
use colombeau_core::Error;
use proptest::prelude::*;

fn small() -> HSConfig {
    HSConfig { nt: 48, nx: 48, eps_levels: (3, 10), ..HSConfig::default() }
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n).map(|k| if k == 0 || k == n { 0.5 } else { 1.0 } * f(a + h * k as f64)).sum::<f64>() * h
}

#[test]
fn theta_values() {
    let g = GammaChoice::InverseLog;
    for rho in [Mollifier::Gaussian, Mollifier::Bump] {
        assert!((theta(1e-3, 0.0, g, rho) - 0.5).abs() < 1e-12);
        assert!((theta(1e-3, -50.0, g, rho) - 1.0).abs() < 1e-15);
        assert_eq!(theta(1e-3, 50.0, g, rho), 0.0);
    }
    let eps = 0.01;
    let at_gamma = theta(eps, g.value(eps), g, Mollifier::Gaussian);
    // erfc(1)/2 from tables, and an independent quadrature of the tail
    assert!((at_gamma - 0.078_649_603_525_142_5).abs() < 1e-11);
    let quad = trapezoid(|z| (-z * z).exp() / PI.sqrt(), 1.0, 12.0, 400_000);
    assert!((at_gamma - quad).abs() < 1e-9);
    // the tail is resolved far past where 1 − cdf would cancel
    let deep = theta(eps, 8.0 * g.value(eps), g, Mollifier::Gaussian);
    assert!(deep > 0.0 && deep < 1e-28);
}

#[test]
fn theta_prime_matches_differences() {
    let g = GammaChoice::InverseLog;
    for &x in &[-0.3, -0.05, 0.0, 0.1, 0.4] {
        let h = 1e-6;
        let fd = (theta(1e-4, x + h, g, Mollifier::Gaussian) - theta(1e-4, x - h, g, Mollifier::Gaussian)) / (2.0 * h);
        let exact = theta_prime(1e-4, x, g, Mollifier::Gaussian);
        assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "{x}: {fd} vs {exact}");
    }
}

#[test]
fn config_validation() {
    assert!(HSConfig::default().validate().is_ok());
    assert!(HSConfig { gamma: GammaChoice::Log, ..HSConfig::default() }.validate().is_ok());
    assert!(matches!(HSConfig { gamma: GammaChoice::Sqrt, ..HSConfig::default() }.validate(), Err(Error::Precondition(_))));
    assert!(HSConfig::new(-1.0).validate().is_err());
    assert!(HSConfig { tol: 0.0, ..HSConfig::default() }.validate().is_err());
    let cfg = HSConfig::new(0.5);
    assert_eq!((cfg.t_range, cfg.x_range), ((0.0, 1.0), (-1.0, 0.5)));
    let back: HSConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let partial: HSConfig = serde_json::from_str(r#"{"s0": 1.0, "gamma": "inverse_log"}"#).unwrap();
    assert_eq!(partial, HSConfig::default());
    assert!(serde_json::from_str::<HSConfig>(r#"{"s_zero": 1.0}"#).is_err());
}

#[test]
fn flow_grid_and_bounds() {
    let cfg = small();
    let flow = solve_characteristics(&cfg).unwrap();
    for e in 0..flow.eps.len() {
        for j in 0..flow.x.len() {
            let k = flow.index(e, 0, j);
            assert_eq!(flow.sigma[k], flow.x[j]);
            assert_eq!(flow.dx_sigma[k], 1.0);
        }
    }
    let r = verify_flow_bounds(&flow);
    assert!(r.pass, "{r:?}");
    assert!(r.worst_coarse <= 1e-7 && r.worst_fine <= 1e-7);
    assert!(r.worst_amplitude_gap <= 10.0 * cfg.tol, "{}", r.worst_amplitude_gap);
    let bad = verify_flow_bounds(&flow.corrupted(1e-3));
    assert!(!bad.pass && bad.coarse_violations > 0 && bad.fine_violations > 0);
}

#[test]
fn flow_limits_away_from_the_kink() {
    let cfg = HSConfig::default();
    let eps = 2f64.powi(-10);
    let g = cfg.gamma.value(eps);
    // far left Θ ≈ 1 along the whole path
    for &(t, x) in &[(0.5, -1.9), (1.0, -1.8), (0.3, -1.1)] {
        assert!(x <= -t - 5.0 * g);
        let (s, _) = characteristic_foot(&cfg, eps, t, x, cfg.tol).unwrap();
        assert!((s - (x - t)).abs() < 1e-6, "{s} vs {}", x - t);
    }
    // far right Θ ≈ 0 and the characteristic barely moves
    for &(t, x) in &[(0.2, 0.9), (2.0, 0.95)] {
        assert!(t <= (x - 5.0 * g) / theta(eps, x, cfg.gamma, cfg.rho));
        let (s, _) = characteristic_foot(&cfg, eps, t, x, cfg.tol).unwrap();
        assert!((s - x).abs() < 1e-6);
    }
}

#[test]
fn collapsed_steps_report_the_point() {
    let cfg = HSConfig::default();
    match characteristic_foot(&cfg, 1e-3, 1.5, 0.02, 1e-300) {
        Err(Error::StiffFailure { eps, t, x, .. }) => assert_eq!((eps, t, x), (1e-3, 1.5, 0.02)),
        other => panic!("expected a stiff failure, got {other:?}"),
    }
}

#[test]
fn solution_slices_and_derivatives() {
    let cfg = HSConfig::default();
    let u = hs_solution(&cfg).unwrap();
    let eps = 2f64.powi(-6);
    for k in -8..=8 {
        let x = -1.0 + 0.5 * eps * k as f64;
        let u0 = Mollifier::Gaussian.rho((x + 1.0) / eps) / eps;
        assert_eq!(u.value(eps, &[0.0, x]), u0);
    }
    for &(t, a) in &[(0.4, -1.0), (0.9, -1.01), (1.3, -0.99), (1.8, -1.0)] {
        let x = forward_characteristic(&cfg, eps, a, &[t], 1e-12).unwrap()[0];
        let amp = characteristic_foot(&cfg, eps, t, x, 1e-12).unwrap().1.exp();
        let (ht, hx) = (1e-3 * eps, 1e-3 * eps / amp);
        let v = |tt: f64, xx: f64| u.value(eps, &[tt, xx]);
        let fd_t = (v(t + ht, x) - v(t - ht, x)) / (2.0 * ht);
        let fd_x = (v(t, x + hx) - v(t, x - hx)) / (2.0 * hx);
        let dt = u.partial(0, eps, &[t, x], &[1, 0]);
        let dx = u.partial(0, eps, &[t, x], &[0, 1]);
        let scale = v(t, x) * amp / eps;
        assert!((fd_t - dt).abs() < 1e-5 * scale, "t {t}: {fd_t} vs {dt}");
        assert!((fd_x - dx).abs() < 1e-5 * scale, "x {t}: {fd_x} vs {dx}");
    }
}

#[test]
fn mass_is_conserved_and_stable_under_doubling() {
    let cfg = HSConfig::default();
    for &j in &[3, 7, 11, 14] {
        let eps = 2f64.powi(-j);
        for &t in &[0.0, 0.6, 1.0, 1.4, 2.0] {
            let m = hs_mass(&cfg, eps, t, cfg.mass_nodes).unwrap();
            let m2 = hs_mass(&cfg, eps, t, 2 * cfg.mass_nodes - 1).unwrap();
            assert!((m - 1.0).abs() < 1e-4, "ε = 2^-{j}, t = {t}: {m}");
            assert!((m - m2).abs() < 1e-3);
        }
    }
}

#[test]
fn peak_follows_the_characteristic() {
    let cfg = HSConfig::default();
    let step = (cfg.x_range.1 - cfg.x_range.0) / (cfg.nx - 1) as f64;
    for &j in &[3, 6, 10, 14] {
        let eps = 2f64.powi(-j);
        for &t in &[0.25, 0.75, 1.0, 1.5, 2.0] {
            let p = peak_location(&cfg, eps, t).unwrap();
            let c = forward_characteristic(&cfg, eps, -cfg.s0, &[t], cfg.tol).unwrap()[0];
            assert!((p - c).abs() <= step, "ε = 2^-{j}, t = {t}: peak {p}, characteristic {c}");
        }
    }
}

#[test]
fn residual_is_small() {
    let flow = solve_characteristics(&small()).unwrap();
    let r = pde_residual(&flow, 8).unwrap();
    assert!(r.points > 100);
    assert!(r.worst <= 1e-3, "{r:?}");
}

#[test]
fn predicted_set_examples() {
    let cfg = HSConfig::default();
    let p = hs_predicted_wf(&cfg).unwrap();
    let raw = &p.raw;
    let at = |t: f64, x: f64| raw.directions_at(raw.base.index_of(&[t, x]).unwrap());
    // 64 directions: (0, 1) is index 16, (−1, 1)/√2 is 24
    assert_eq!(at(0.5 + 0.01, -0.5 + 0.01), vec![24, 56]);
    assert_eq!(at(0.1, -0.85), vec![24, 56]);
    let corner = at(0.99, -0.01);
    assert_eq!(corner, (16..=24).chain(48..=56).collect::<Vec<_>>());
    assert_eq!(at(1.9, 0.1), vec![16, 48]);
    assert!(raw.is_subset(&p.dilated));
    assert!(raw.projection().iter().all(|&c| {
        let z = raw.base.center(c);
        z[0] >= 0.0 && z[0] <= 2.0 && z[1] >= -2.0 && z[1] <= 1.0
    }));
    // the region left of the line and far right stay clear
    assert!(p.dilated.directions_at(raw.base.index_of(&[0.1, -1.9]).unwrap()).is_empty());
    assert!(p.dilated.directions_at(raw.base.index_of(&[1.9, 0.9]).unwrap()).is_empty());
}

/// The change-of-variables transform against direct quadrature of the windowed solution.
#[test]
fn window_transform_matches_direct_quadrature() {
    let cfg = HSConfig::default();
    let u = hs_solution(&cfg).unwrap();
    let eps = 0.125;
    for (center, w) in [(vec![0.5, -0.5], 0.4), (vec![1.25, 0.125], 0.4)] {
        let xis: Vec<Vec<f64>> = [(0.0, 0.0), (4.0, 4.0), (-8.0, 8.0), (0.0, 16.0), (16.0, 0.0)]
            .iter()
            .map(|&(a, b)| vec![a, b])
            .collect();
        let cv = hs_window_transform(&cfg, &center, w, eps, &xis).unwrap();
        let v = window(&u, &Cutoff::new(center.clone(), w).unwrap()).unwrap();
        let direct: Vec<f64> = fourier_at(&v, eps, &xis, &FourierOptions { points_per_feature: 4.0, ..FourierOptions::default() })
            .unwrap()
            .iter()
            .map(|z| z.norm())
            .collect();
        for (a, b) in cv.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-6 * cv[0].max(1e-3), "{center:?}: {cv:?} vs {direct:?}");
        }
    }
}

#[test]
fn reduced_run_reproduces_the_kinked_set() {
    let cfg = HSConfig {
        nt: 32,
        nx: 32,
        eps_levels: (3, 10),
        wf_h: 0.5,
        n_dir: 16,
        widths: vec![0.4, 0.2],
        ..HSConfig::default()
    };
    let run = run_hurd_sattinger(&cfg, 4).unwrap();
    assert!(run.bounds.pass);
    assert!(run.wavefront.inclusion, "{:?}", run.wavefront.outside);
    assert!(run.wavefront.segment_detected);
    assert!(run.pass());
    let csv = run.figure_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,angle,flagged_measured,flagged_predicted"));
    assert_eq!(lines.count(), 4 * 6 * 16);
    let json = run.summary_json();
    assert_eq!(json["verdict"], "PASS");
    assert_eq!(json["bounds"]["coarse_violations"], 0);
    assert!(json["timings"]["flow_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn crossing_lines_example() {
    let cfg = MultiplyConfig { n_dir: 16, half_width: 0.375, ..MultiplyConfig::default() };
    let r = run_multiplication_example(&cfg).unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.product_at_origin);
    for w in [&r.wf_u, &r.wf_v] {
        assert!(w.cells_on_axis && w.normal_flagged && w.tangent_clear, "{w:?}");
    }
    // at 16 directions the literal D_f test excludes only the anti-diagonal arc
    assert!(r.df_matches_stated);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["gamma"], "sqrt");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn theta_is_a_decreasing_fraction(x in -3.0f64..3.0, dx in 1e-6f64..1.0, j in 1i32..30) {
        let eps = 2f64.powi(-j);
        let g = GammaChoice::InverseLog;
        let (a, b) = (theta(eps, x, g, Mollifier::Gaussian), theta(eps, x + dx, g, Mollifier::Gaussian));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
    }

    #[test]
    fn flow_identities(t in 0.05f64..2.0, x in -2.0f64..1.0, j in 3i32..15) {
        let cfg = HSConfig::default();
        let eps = 2f64.powi(-j);
        prop_assert!(semigroup_defect(&cfg, eps, t, x).unwrap() <= 10.0 * cfg.tol);
        let (s, ell) = characteristic_foot(&cfg, eps, t, x, cfg.tol).unwrap();
        let (ts, tx) = (theta(eps, s, cfg.gamma, cfg.rho), theta(eps, x, cfg.gamma, cfg.rho));
        prop_assert!((ts / tx / ell.exp() - 1.0).abs() <= 10.0 * cfg.tol);
        prop_assert!(ell.exp() > 0.0 && -ts < 0.0);
        prop_assert!(x - t - 1e-7 <= s && s <= x + 1e-7);
    }

    #[test]
    fn product_is_the_pulled_back_delta(x in -0.05f64..0.05, y in -0.5f64..0.5, j in 4i32..12) {
        let eps = 2f64.powi(-j);
        let g = GammaChoice::Sqrt;
        let u = line_delta(g, Mollifier::Gaussian, 1.0);
        let v = line_delta(g, Mollifier::Gaussian, -1.0);
        let p = mul(&u, &v).unwrap();
        let f = shear_map(g).eval(eps, &[x, y]);
        let rho = |z: f64| Mollifier::Gaussian.rho(z / eps) / eps;
        let want = rho(f[0]) * rho(f[1]);
        prop_assert!((p.value(eps, &[x, y]) - want).abs() <= 1e-12 * want.abs().max(1e-300));
    }
}
