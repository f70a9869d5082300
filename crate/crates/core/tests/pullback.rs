use std::f64::consts::PI;
use std::sync::Arc;

use colombeau_core::embedding::{embed, DistributionSpec, Mollifier};
use colombeau_core::graph::{estimate_graph, BaseGrid, GraphParams};
use colombeau_core::microlocal::{ConeSet, DirectionGrid, WavefrontParams};
use colombeau_core::nets::{order, ClassifyParams, Component};
use colombeau_core::pullback::{
    check_main_theorem, estimate_df, is_in_df, k_support, pullback, pullback_cone, pullback_cone_with,
    slow_scale_support, transport_direction, CBoundedMap, ConeParams, DfParams, DfVerdict, TheoremSetup,
};
use colombeau_core::{Error, Grid, Net};
use proptest::prelude::*;

fn identity2() -> Net {
    Net::vector(
        2,
        usize::MAX,
        (0..2)
            .map(|i| {
                Arc::new(move |_: f64, x: &[f64], a: &[usize]| match order(a) {
                    0 => x[i],
                    1 if a[i] == 1 => 1.0,
                    _ => 0.0,
                }) as Component<f64>
            })
            .collect(),
    )
}

/// `f_ε(x, y) = (x + γ_ε y, x − γ_ε y)`.
fn shear(gamma: fn(f64) -> f64) -> Net {
    Net::vector(
        2,
        usize::MAX,
        [1.0, -1.0]
            .into_iter()
            .map(|s| {
                Arc::new(move |e: f64, x: &[f64], a: &[usize]| {
                    let g = gamma(e);
                    match (a[0], a[1]) {
                        (0, 0) => x[0] + s * g * x[1],
                        (1, 0) => 1.0,
                        (0, 1) => s * g,
                        _ => 0.0,
                    }
                }) as Component<f64>
            })
            .collect(),
    )
}

fn sqrt_gamma(e: f64) -> f64 {
    e.sqrt()
}

fn log_gamma(e: f64) -> f64 {
    1.0 / (1.0 / e).ln()
}

fn square() -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0), (-1.0, 1.0)]
}

fn map(net: Net) -> CBoundedMap {
    CBoundedMap::new(net, square(), &Grid::default()).unwrap()
}

#[test]
fn c_bounded_maps() {
    let f = map(shear(sqrt_gamma));
    assert!(f.witness.bounded);
    for (lo, hi) in &f.witness.k_prime {
        assert!(*lo >= -2.0 && *hi <= 2.0);
    }
    let blow = Net::scalar(1, usize::MAX, |e, x: &[f64], a: &[usize]| match a[0] {
        0 => x[0] / e,
        1 => 1.0 / e,
        _ => 0.0,
    });
    assert!(matches!(CBoundedMap::new(blow, vec![(-1.0, 1.0)], &Grid::default()), Err(Error::Precondition(_))));
}

#[test]
fn jacobian_matches_finite_differences() {
    let f = map(shear(sqrt_gamma));
    for e in [0.5f64, 1e-3] {
        assert!(f.net.fd_check(e, &[0.3, -0.2]).unwrap() < 1e-4);
        let j = f.jacobian(e, &[0.3, -0.2]);
        assert_eq!(j, vec![vec![1.0, e.sqrt()], vec![1.0, -e.sqrt()]]);
    }
}

#[test]
fn pullback_by_identity_is_the_function() {
    let u = embed(&DistributionSpec::Delta { a: vec![0.1, -0.2] }, Mollifier::Gaussian).unwrap();
    let p = pullback(&map(identity2()), &u, None).unwrap();
    for e in [0.25, 0.01] {
        for x in [[0.1, -0.2], [0.12, -0.19], [0.5, 0.5]] {
            let (a, b) = (p.value(e, &x), u.value(e, &x));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

/// `f*ι(δ)` is the product `u_ε v_ε` of two sheared line deltas.
#[test]
fn pullback_of_delta_by_shear_is_product() {
    let rho = Mollifier::Gaussian;
    let d = embed(&DistributionSpec::Delta { a: vec![0.0, 0.0] }, rho).unwrap();
    let p = pullback(&map(shear(sqrt_gamma)), &d, None).unwrap();
    for e in [0.1f64, 0.01] {
        let g = e.sqrt();
        for (x, y) in [(0.0, 0.0), (0.01, 0.05), (-0.02, 0.3)] {
            let expect = rho.rho((x + g * y) / e) / e * rho.rho((x - g * y) / e) / e;
            let got = p.value(e, &[x, y]);
            assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1e-300), "{got} vs {expect}");
        }
    }
}

#[test]
fn pullback_reports_domain_escape() {
    let u = Net::constant(2, 1.0);
    let err = pullback(&map(shear(sqrt_gamma)), &u, Some(&[(-0.5, 0.5), (-0.5, 0.5)])).unwrap_err();
    assert!(matches!(err, Error::DomainEscape { .. }));
    assert!(pullback(&map(shear(sqrt_gamma)), &u, Some(&[(-2.0, 2.0), (-2.0, 2.0)])).is_ok());
    assert!(matches!(pullback(&map(identity2()), &Net::constant(1, 1.0), None), Err(Error::DimensionMismatch(_))));
}

#[test]
fn transport_examples() {
    let id = map(identity2());
    let eta = [0.6, 0.8];
    assert_eq!(transport_direction(&id, 0.1, &[0.0, 0.0], &eta).unwrap(), eta.to_vec());
    let f = map(shear(sqrt_gamma));
    for e in [0.25f64, 1e-4] {
        let g = e.sqrt();
        let m = transport_direction(&f, e, &[0.2, 0.1], &[1.0, 0.0]).unwrap();
        let n = (1.0 + g * g).sqrt();
        assert!((m[0] - 1.0 / n).abs() < 1e-15 && (m[1] - g / n).abs() < 1e-15);
    }
    let zero = Net::vector(2, usize::MAX, (0..2).map(|_| Arc::new(|_: f64, _: &[f64], _: &[usize]| 0.0) as Component<f64>).collect());
    let flat = CBoundedMap::with_witness(zero, square(), id.witness.clone());
    assert!(matches!(transport_direction(&flat, 0.1, &[0.0, 0.0], &[1.0, 0.0]), Err(Error::DegenerateDirection { .. })));
}

#[test]
fn df_examples() {
    let params = DfParams::default();
    let id = map(identity2());
    let w = is_in_df(&id, &[0.2, 0.3], &[0.0, 1.0], &params).unwrap();
    assert_eq!(w.verdict, DfVerdict::InDf);
    assert!(w.sigma.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    let f = map(shear(sqrt_gamma));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_eq!(is_in_df(&f, &[0.0, 0.0], &[s, -s], &params).unwrap().verdict, DfVerdict::NotInDf);
    assert_eq!(is_in_df(&f, &[0.0, 0.0], &[-s, s], &params).unwrap().verdict, DfVerdict::NotInDf);
    assert_eq!(is_in_df(&f, &[0.0, 0.0], &[1.0, 0.0], &params).unwrap().verdict, DfVerdict::InDf);
    assert_eq!(is_in_df(&f, &[0.0, 0.0], &[s, s], &params).unwrap().verdict, DfVerdict::InDf);
    assert!(is_in_df(&f, &[0.0, 0.0], &[1.0, 0.0], &DfParams { radius_x: 0.0, ..DfParams::default() }).is_err());
}

/// In the γ → 0 limit `|ᵀdf η| = √2 |cos(θ − π/4)|`, so the canonical scaling passes
/// iff `max_{V^⊥} |sin(θ′ − π/4)| ≤ slack · min_V |cos(θ′ − π/4)|`.
#[test]
fn df_of_shear_matches_limit_oracle() {
    let params = DfParams::default();
    let f = map(shear(sqrt_gamma));
    let base = BaseGrid::new(vec![(-0.25, 0.25), (-0.25, 0.25)], 0.25).unwrap();
    let dirs = DirectionGrid::new(2, 64).unwrap();
    let df = estimate_df(&f, &base, &dirs, &params).unwrap();
    let r = params.radius_eta;
    let mut mismatched = Vec::new();
    for d in 0..64 {
        let th = dirs.angles[d] - PI / 4.0;
        let arc: Vec<f64> = (0..5).map(|i| th - r + 2.0 * r * i as f64 / 4.0).collect();
        let lo = arc.iter().map(|t| t.cos().abs()).fold(f64::INFINITY, f64::min);
        let hi = arc.iter().map(|t| t.sin().abs()).fold(0.0, f64::max);
        let ratio = hi / lo;
        // skip directions whose limit ratio sits within 2% of the slack
        if (ratio / params.grid_slack - 1.0).abs() < 0.02 {
            continue;
        }
        let oracle = ratio <= params.grid_slack;
        for c in 0..base.len() {
            if df.contains(c, d) != oracle {
                mismatched.push((c, d));
            }
        }
    }
    assert!(mismatched.is_empty(), "{mismatched:?}");
    // the exact anti-diagonal and its grid neighbours are always excluded
    for d in [23, 24, 25, 55, 56, 57] {
        assert!(!df.contains(0, d));
    }
}

#[test]
fn slow_scale_support_examples() {
    let base = BaseGrid::new(square(), 0.5).unwrap();
    let g = Grid::dyadic(1, 16).unwrap();
    let c = ClassifyParams::default();
    assert!(slow_scale_support(&map(identity2()), &base, 2, &g, &c).unwrap().is_empty());
    assert!(slow_scale_support(&map(shear(log_gamma)), &base, 2, &g, &c).unwrap().is_empty());
    let wiggle = Net::scalar(1, usize::MAX, |e: f64, x: &[f64], a: &[usize]| {
        let s = (x[0] / e).sin_cos();
        [s.0, s.1, -s.0, -s.1][a[0] % 4] * e.powi(-(a[0] as i32))
    });
    let fw = CBoundedMap::new(wiggle, vec![(-1.0, 1.0)], &g).unwrap();
    let b1 = BaseGrid::new(vec![(-1.0, 1.0)], 0.25).unwrap();
    assert_eq!(slow_scale_support(&fw, &b1, 1, &g, &c).unwrap().len(), b1.len());
}

#[test]
fn k_support_examples() {
    let g = Grid::dyadic(1, 16).unwrap();
    let base = BaseGrid::new(square(), 0.25).unwrap();
    let f = map(identity2());
    let cf = estimate_graph(&f.net, &base, None, &g, &GraphParams::default()).unwrap();
    let c = ClassifyParams::default();
    assert!(k_support(&cf, &Net::zero(2), None, &g, &c).unwrap().is_empty());
    assert!(k_support(&cf, &Net::constant(2, 1.0), None, &g, &c).unwrap().is_empty());
    // a line delta through the row of cell centres at y₂ = −0.625
    let line = embed(&DistributionSpec::TensorDelta { dim: 2, axis: 1, a: -0.625 }, Mollifier::Gaussian).unwrap();
    let ks = k_support(&cf, &line, None, &g, &c).unwrap();
    assert!(!ks.is_empty());
    for &i in &ks {
        let y = base.center(i)[1];
        assert!((y + 0.625).abs() <= 0.25 + 1e-12, "cell at y = {y}");
    }
    let rows: std::collections::BTreeSet<i64> = ks.iter().map(|&i| (base.center(i)[0] * 8.0).round() as i64).collect();
    assert_eq!(rows.len(), 8, "every column meets the line");
}

fn gamma_at(base: &BaseGrid, dirs: &DirectionGrid, cells: &[usize], ds: &[usize]) -> ConeSet {
    let mut g = ConeSet::empty(base.clone(), dirs.clone());
    for &c in cells {
        for &d in ds {
            g.insert(c, d).unwrap();
        }
    }
    g
}

#[test]
fn identity_pulls_cones_back_to_themselves() {
    let base = BaseGrid::new(vec![(-0.375, 0.375), (-0.375, 0.375)], 0.25).unwrap();
    let dirs = DirectionGrid::new(2, 64).unwrap();
    let gamma = gamma_at(&base, &dirs, &[4], &[0, 10, 40]);
    let pc = pullback_cone(&map(identity2()), &gamma, &base, &dirs, &ConeParams::default()).unwrap();
    assert!(gamma.is_subset(&pc.raw), "{:?}", pc.raw.pairs);
    assert!(pc.raw.is_subset(&gamma.dilate()));
    assert!(pc.normal_bundle.is_empty());
    assert!(pc.unfavourable.is_empty());
    assert_eq!(pc.cone, pc.raw.dilate());
    for &(x, d, y, k) in &pc.provenance {
        assert!(gamma.contains(y, d) && pc.raw.contains(x, k));
    }
}

/// The shear collapses the column x = 0 onto the origin, where every direction
/// is singular for ι(δ); the unfavourable support is that column.
#[test]
fn shear_unfavourable_support_is_the_zero_column() {
    let base = BaseGrid::new(vec![(-0.375, 0.375), (-0.375, 0.375)], 0.25).unwrap();
    let dirs = DirectionGrid::new(2, 64).unwrap();
    let origin = base.index_of(&[0.0, 0.0]).unwrap();
    let gamma = gamma_at(&base, &dirs, &[origin], &(0..64).collect::<Vec<_>>());
    let f = map(shear(sqrt_gamma));
    let pc = pullback_cone(&f, &gamma, &base, &dirs, &ConeParams::default()).unwrap();
    let raw_u: Vec<usize> = (0..base.len()).filter(|&c| base.center(c)[0].abs() < 1e-9).collect();
    assert!(raw_u.iter().all(|c| pc.unfavourable.contains(c)));
    assert!(pc.unfavourable.contains(&origin));
    // transported directions from the diagonal collapse onto (±1, 0)
    for &(_, _, _, k) in &pc.provenance {
        let a = dirs.angles[k];
        assert!(a.sin().abs() < 0.2, "direction {a}");
    }
}

#[test]
fn empty_df_gives_the_full_cone() {
    let shrink = Net::vector(
        2,
        usize::MAX,
        (0..2)
            .map(|i| {
                Arc::new(move |e: f64, x: &[f64], a: &[usize]| match order(a) {
                    0 => e * x[i],
                    1 if a[i] == 1 => e,
                    _ => 0.0,
                }) as Component<f64>
            })
            .collect(),
    );
    let base = BaseGrid::new(vec![(-0.25, 0.25), (-0.25, 0.25)], 0.25).unwrap();
    let dirs = DirectionGrid::new(2, 16).unwrap();
    let gamma = gamma_at(&base, &dirs, &[0], &[3]);
    let pc = pullback_cone(&map(shrink), &gamma, &base, &dirs, &ConeParams::default()).unwrap();
    assert!(pc.df_empty);
    assert_eq!(pc.raw.len(), base.len() * dirs.len());
}

#[test]
fn main_theorem_for_identity_and_delta() {
    let u = embed(&DistributionSpec::Delta { a: vec![0.0, 0.0] }, Mollifier::Gaussian).unwrap();
    let f = map(identity2());
    let region = vec![(-0.375, 0.375), (-0.375, 0.375)];
    let setup = TheoremSetup {
        region: region.clone(),
        h: 0.25,
        target_region: region,
        target_h: 0.25,
        wavefront: WavefrontParams::default(),
        cone: ConeParams::default(),
        max_order: 2,
    };
    let pulled = pullback(&f, &u, None).unwrap().with_support(u.support_fn().unwrap()).with_scale(u.scale_fn().unwrap());
    let r = check_main_theorem(&f, &u, &pulled, &setup, None).unwrap();
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    let origin = r.lhs.base.index_of(&[0.0, 0.0]).unwrap();
    assert_eq!(r.lhs.directions_at(origin).len(), 64);
    assert!(r.unfavourable.is_empty());
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["violations"].as_array().unwrap().len(), 0);
    assert!(json["lhs_count"].as_u64().unwrap() > 0);
}

fn shear_context() -> (CBoundedMap, colombeau_core::pullback::DfEstimate, colombeau_core::graph::GraphEstimate, DirectionGrid) {
    let f = map(shear(sqrt_gamma));
    let base = BaseGrid::new(vec![(-0.375, 0.375), (-0.375, 0.375)], 0.25).unwrap();
    let dirs = DirectionGrid::new(2, 16).unwrap();
    let p = ConeParams::default();
    let df = estimate_df(&f, &base, &dirs, &p.df).unwrap();
    let cf = estimate_graph(&f.net, &base, None, &p.grid, &p.graph).unwrap();
    (f, df, cf, dirs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Reversing η reverses the transported direction; scaling the Jacobian by c > 0 leaves it fixed.
    #[test]
    fn transport_is_homogeneous(a in 0.0f64..6.28, x in -1.0f64..1.0, y in -1.0f64..1.0, e in 1e-6f64..0.5, c in 0.1f64..10.0) {
        let f = map(shear(sqrt_gamma));
        let eta = [a.cos(), a.sin()];
        let m = transport_direction(&f, e, &[x, y], &eta).unwrap();
        let mm = transport_direction(&f, e, &[x, y], &[-eta[0], -eta[1]]).unwrap();
        prop_assert!((m[0] + mm[0]).abs() < 1e-12 && (m[1] + mm[1]).abs() < 1e-12);
        let scaled = CBoundedMap::with_witness(colombeau_core::nets::scale(&f.net, c), f.domain.clone(), f.witness.clone());
        let ms = transport_direction(&scaled, e, &[x, y], &eta).unwrap();
        prop_assert!((m[0] - ms[0]).abs() < 1e-12 && (m[1] - ms[1]).abs() < 1e-12);
    }

    /// On D_f neighbourhoods the transported direction is Lipschitz in η with constant 2·slack.
    #[test]
    fn transport_is_equicontinuous_on_df(a in 0.0f64..6.28, t in -1.0f64..1.0, x in -0.5f64..0.5, y in -0.5f64..0.5) {
        let params = DfParams::default();
        let f = map(shear(sqrt_gamma));
        let eta = [a.cos(), a.sin()];
        let w = is_in_df(&f, &[x, y], &eta, &params).unwrap();
        prop_assume!(w.verdict == DfVerdict::InDf);
        let b = a + t * params.radius_eta;
        let xi = [b.cos(), b.sin()];
        let gap = ((eta[0] - xi[0]).powi(2) + (eta[1] - xi[1]).powi(2)).sqrt();
        let n = params.grid.len();
        for &e in &params.grid.values()[n - n / 2..] {
            let m1 = transport_direction(&f, e, &[x, y], &eta).unwrap();
            let m2 = transport_direction(&f, e, &[x, y], &xi).unwrap();
            let d = ((m1[0] - m2[0]).powi(2) + (m1[1] - m2[1]).powi(2)).sqrt();
            prop_assert!(d <= 2.0 * params.grid_slack * gap + 1e-12, "{} > {}", d, gap);
        }
    }

    /// If N_f misses Γ then U_f(Γ) is empty.
    #[test]
    fn unfavourable_support_needs_the_normal_bundle(cells in proptest::collection::vec(0usize..9, 1..4), ds in proptest::collection::vec(0usize..16, 1..5)) {
        let (f, df, cf, dirs) = shear_context();
        let gamma = gamma_at(&df.base, &dirs, &cells, &ds);
        let pc = pullback_cone_with(&f, &gamma, &df, &cf, &dirs, &ConeParams::default()).unwrap();
        if pc.normal_bundle.pairs.intersection(&gamma.pairs).next().is_none() {
            prop_assert!(pc.unfavourable.is_empty());
        }
        prop_assert_eq!(pc.cone.clone(), pc.raw.dilate());
    }
}
