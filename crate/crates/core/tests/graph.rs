use colombeau_core::embedding::{embed, DistributionSpec, Mollifier};
use colombeau_core::graph::{
    check_containment_lemma, cluster_points, complement_is_open, estimate_graph, is_equicontinuous_at, project_fiber,
    BaseGrid, GraphParams, ReparamFamily,
};
use colombeau_core::pullback::check_c_bounded;
use colombeau_core::{Error, Grid, Net};
use proptest::prelude::*;

// cells of edge 0.05 on [-1.1, 1.1] produced by a separate python script from
// the tails {sin(2^k): k >= j}, j = 1, 2, 3
const SIN_DYADIC_CELLS: [i64; 17] = [2, 6, 10, 15, 16, 18, 20, 23, 25, 28, 30, 33, 34, 35, 36, 40, 41];

fn sin_over_eps() -> Net {
    Net::scalar(1, 8, |e, x, a| {
        let k = a[0] as i32;
        (x[0] / e + k as f64 * std::f64::consts::FRAC_PI_2).sin() * e.powi(-k)
    })
}

fn heaviside() -> Net {
    embed(&DistributionSpec::Heaviside { orientation: 1.0 }, Mollifier::Gaussian).unwrap()
}

fn smooth(f: fn(f64) -> f64) -> Net {
    Net::scalar(1, 0, move |_, x, _| f(x[0]))
}

#[test]
fn cluster_points_examples() {
    let b = [(-1.0, 1.0)];
    let constant = vec![vec![vec![0.33]; 5]; 3];
    let c = cluster_points(&constant, &b, 0.05).unwrap();
    assert_eq!(c.len(), 1);
    assert!(c.contains_point(&[0.33]));

    let levels: Vec<Vec<Vec<f64>>> =
        (1..=3).map(|j| (j..=24).map(|k| vec![2f64.powi(k).sin()]).collect()).collect();
    let s = cluster_points(&levels, &[(-1.1, 1.1)], 0.05).unwrap();
    let got: Vec<i64> = s.cells.iter().map(|c| c[0]).collect();
    assert_eq!(got, SIN_DYADIC_CELLS.to_vec());
    let tail: Vec<f64> = (3..=24).map(|k| 2f64.powi(k).sin()).collect();
    let (lo, hi) = s.extent(0).unwrap();
    let (tmin, tmax) = tail.iter().fold((1.0f64, -1.0f64), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!((lo - tmin).abs() <= 0.05 && (hi - tmax).abs() <= 0.05);

    let alt: Vec<Vec<Vec<f64>>> = (0..4).map(|_| (0..6).map(|i| vec![(i % 2) as f64]).collect()).collect();
    let a = cluster_points(&alt, &[(-0.5, 1.5)], 0.05).unwrap();
    assert!(a.contains_point(&[0.0]) && a.contains_point(&[1.0]) && a.len() == 2);

    assert!(matches!(cluster_points(&constant[..2], &b, 0.05), Err(Error::Precondition(_))));
    assert!(matches!(cluster_points(&[vec![], vec![], vec![]], &b, 0.05), Err(Error::EmptyDomain(_))));
}

#[test]
fn sin_graph_is_band() {
    let g = Grid::default();
    let base = BaseGrid::new(vec![(-3.0, 3.0)], 0.05).unwrap();
    let est = estimate_graph(&sin_over_eps(), &base, Some(vec![(-1.1, 1.1)]), &g, &GraphParams::default()).unwrap();
    for i in 0..base.len() {
        let d = est.fiber(i).hausdorff_to_interval(-1.0, 1.0);
        assert!(d <= 0.1, "cell {i}: {d}");
    }
    let all: Vec<usize> = (0..base.len()).collect();
    let p = project_fiber(&est, &all).unwrap();
    assert!(p.hausdorff_to_interval(-1.0, 1.0) <= 0.1);
}

#[test]
fn continuous_graph_is_classical() {
    let g = Grid::default();
    let base = BaseGrid::new(vec![(-1.0, 1.0)], 0.05).unwrap();
    let f = smooth(|x| 0.5 * x * x - 0.2);
    let est = estimate_graph(&f, &base, None, &g, &GraphParams::default()).unwrap();
    for i in 0..base.len() {
        let x = base.center(i)[0];
        let y = 0.5 * x * x - 0.2;
        let fib = est.fiber(i);
        assert!(fib.contains_point(&[y]), "cell {i}");
        assert!(fib.hausdorff_to_interval(y, y) <= est.h2 + 1e-12, "cell {i}");
    }
}

fn heaviside_estimate() -> (BaseGrid, colombeau_core::graph::GraphEstimate) {
    let base = BaseGrid::new(vec![(-1.025, 1.025)], 0.05).unwrap();
    let est =
        estimate_graph(&heaviside(), &base, Some(vec![(-0.2, 1.2)]), &Grid::default(), &GraphParams::default()).unwrap();
    (base, est)
}

#[test]
fn heaviside_graph_regimes() {
    let (base, est) = heaviside_estimate();
    for i in 0..base.len() {
        let x = base.center(i)[0];
        let fib = est.fiber(i);
        if x <= -0.5 {
            assert!(fib.hausdorff_to_interval(0.0, 0.0) <= 0.05, "x = {x}");
        } else if x >= 0.5 {
            assert!(fib.hausdorff_to_interval(1.0, 1.0) <= 0.05, "x = {x}");
        } else if x.abs() < 1e-9 {
            for k in 0..20 {
                assert!(fib.contains_point(&[0.025 + 0.05 * k as f64]), "origin fiber misses {k}");
            }
        }
    }
    let right = base.select(|c| c[0] >= 0.5 && c[0] <= 1.0);
    let p = project_fiber(&est, &right).unwrap();
    assert!(p.contains_point(&[1.0]) && p.hausdorff_to_interval(1.0, 1.0) <= 0.05);
}

#[test]
fn equicontinuity_examples() {
    let g = Grid::default();
    let radii: Vec<f64> = (1..=20).map(|k| 2f64.powi(-k)).collect();
    let gammas = [0.5, 0.25, 0.125, 0.0625];
    let id = Net::coordinate(1, 0);
    let r = is_equicontinuous_at(&id, &[0.3], &radii, &gammas, &g).unwrap();
    assert!(r.equicontinuous);
    for (gam, d) in &r.modulus {
        assert_eq!(*d, Some(*gam));
    }
    let r = is_equicontinuous_at(&sin_over_eps(), &[0.3], &radii, &[0.5], &g).unwrap();
    assert!(!r.equicontinuous && r.modulus[0].1.is_none());
    let r = is_equicontinuous_at(&heaviside(), &[1.0], &radii, &[0.1, 0.01, 0.001], &g).unwrap();
    assert!(r.equicontinuous);
    assert!(matches!(is_equicontinuous_at(&id, &[0.0], &[0.1, 0.2], &[0.1], &g), Err(Error::Precondition(_))));
}

#[test]
fn heaviside_equicontinuous_away_from_zero() {
    let g = Grid::default();
    let radii: Vec<f64> = (1..=24).map(|k| 2f64.powi(-k)).collect();
    for &x0 in &[-1.0, -0.75, -0.5, 0.5, 0.75, 1.0] {
        let r = is_equicontinuous_at(&heaviside(), &[x0], &radii, &[0.1, 0.01], &g).unwrap();
        assert!(r.equicontinuous, "x0 = {x0}");
    }
    let r = is_equicontinuous_at(&heaviside(), &[0.0], &radii, &[0.1], &g).unwrap();
    assert!(!r.equicontinuous);
}

#[test]
fn containment_examples() {
    let g = Grid::default();
    let dom = [(-2.0, 2.0)];
    let c = Net::constant(1, 0.7);
    let r = check_containment_lemma(&c, &[(0.0, 0.1)], &dom, &[(0.6, 0.8)], &g);
    assert!(r.holds && r.neighbourhood.as_deref() == Some(&dom[..]));
    assert!(check_containment_lemma(&sin_over_eps(), &[(0.0, 0.1)], &dom, &[(-1.1, 1.1)], &g).holds);
    let r = check_containment_lemma(&sin_over_eps(), &[(0.0, 0.1)], &dom, &[(-0.9, 1.1)], &g);
    assert!(!r.holds && r.eps_threshold.is_none());
}

#[test]
fn c_bounded_examples() {
    let g = Grid::default();
    let w = check_c_bounded(&sin_over_eps(), &[(-1.0, 1.0)], &g);
    assert!(w.bounded);
    assert!((w.k_prime[0].0 + 1.0).abs() < 1e-3 && (w.k_prime[0].1 - 1.0).abs() < 1e-3);
    let blow = Net::scalar(1, 1, |e, x, a| if a[0] == 0 { x[0] / e } else { 1.0 / e });
    assert!(!check_c_bounded(&blow, &[(-1.0, 1.0)], &g).bounded);
    let base = BaseGrid::new(vec![(-1.0, 1.0)], 0.05).unwrap();
    assert!(matches!(estimate_graph(&blow, &base, None, &g, &GraphParams::default()), Err(Error::Precondition(_))));
}

#[test]
fn complement_of_estimate_is_open() {
    let g = Grid::default();
    let params = GraphParams::default();
    for (f, base, fb) in [
        (sin_over_eps(), BaseGrid::new(vec![(-0.5, 0.5)], 0.1).unwrap(), vec![(-1.2, 1.2)]),
        (heaviside(), BaseGrid::new(vec![(-1.025, 1.025)], 0.05).unwrap(), vec![(-0.2, 1.2)]),
        (smooth(|x| x.sin()), BaseGrid::new(vec![(-1.0, 1.0)], 0.1).unwrap(), vec![(-1.0, 1.0)]),
    ] {
        let est = estimate_graph(&f, &base, Some(fb), &g, &GraphParams { h1: base.h, ..params.clone() }).unwrap();
        for i in 0..base.len() {
            let fib = est.fiber(i);
            let shape = fib.shape()[0];
            for c in 0..shape {
                if !fib.cells.contains(&vec![c]) {
                    assert!(complement_is_open(&f, &est, i, &[c], &g, &params), "base {i} fiber {c}");
                }
            }
        }
    }
}

#[test]
fn fibers_fit_in_witness_box() {
    let g = Grid::default();
    let f = smooth(|x| 0.3 * x.cos());
    let k = [(-1.0, 1.0)];
    let w = check_c_bounded(&f, &k, &g);
    let base = BaseGrid::new(k.to_vec(), 0.05).unwrap();
    let est = estimate_graph(&f, &base, None, &g, &GraphParams::default()).unwrap();
    let all: Vec<usize> = (0..base.len()).collect();
    let (lo, hi) = project_fiber(&est, &all).unwrap().extent(0).unwrap();
    assert!(lo >= w.k_prime[0].0 - est.h2 && hi <= w.k_prime[0].1 + est.h2);
}

#[test]
fn graph_json_and_csv() {
    let (_, est) = heaviside_estimate();
    let doc = est.to_document();
    assert_eq!(doc.resolutions, [0.05, 0.05]);
    assert_eq!(doc.cells.len(), est.fibers.iter().filter(|f| !f.is_empty()).count());
    let csv = est.to_csv();
    assert!(csv.starts_with("x_center,y_center\n"));
    assert_eq!(csv.lines().count(), est.occupied_count() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn more_levels_never_add_cells(l in 3usize..6, which in 0usize..3) {
        let g = Grid::default();
        let f = [sin_over_eps(), heaviside(), smooth(|x| x * x)][which].clone();
        let base = BaseGrid::new(vec![(-0.5, 0.5)], 0.1).unwrap();
        let fb = Some(vec![(-1.2, 1.2)]);
        let p = GraphParams { h1: 0.1, ..GraphParams::default() };
        let a = estimate_graph(&f, &base, fb.clone(), &g, &GraphParams { levels: l, ..p.clone() }).unwrap();
        let b = estimate_graph(&f, &base, fb, &g, &GraphParams { levels: l + 1, ..p }).unwrap();
        for i in 0..base.len() {
            prop_assert!(b.fiber(i).cells.is_subset(&a.fiber(i).cells));
        }
    }

    #[test]
    fn equicontinuous_nets_are_pointwise(a in -0.5f64..0.5, b in 0.1f64..1.0, s in 0.0f64..0.2) {
        // F_ε(x) = a + b·sin(x) + s·ε·cos(x): equi-continuous everywhere
        let f = Net::scalar(1, 0, move |e, x, _| a + b * x[0].sin() + s * e * x[0].cos());
        let g = Grid::default();
        let radii: Vec<f64> = (1..=16).map(|k| 2f64.powi(-k)).collect();
        let base = BaseGrid::new(vec![(-1.0, 1.0)], 0.1).unwrap();
        for i in 0..base.len() {
            prop_assert!(is_equicontinuous_at(&f, &base.center(i), &radii, &[0.1, 0.05], &g).unwrap().equicontinuous);
        }
        let fb = Some(vec![(-2.0, 2.0)]);
        let p = GraphParams { h1: 0.1, ..GraphParams::default() };
        let full = estimate_graph(&f, &base, fb.clone(), &g, &p).unwrap();
        let point = estimate_graph(&f, &base, fb, &g, &GraphParams { reparams: ReparamFamily::identity(), freeze_delta: true, ..p }).unwrap();
        for i in 0..base.len() {
            let y = f.value(0.0, &base.center(i));
            prop_assert!(point.fiber(i).contains_point(&[y]));
            prop_assert!(full.fiber(i).contains_point(&[y]));
            prop_assert!(point.fiber(i).cells.is_subset(&full.fiber(i).dilate().cells));
            prop_assert!(full.fiber(i).cells.is_subset(&point.fiber(i).dilate().cells));
        }
    }
}
