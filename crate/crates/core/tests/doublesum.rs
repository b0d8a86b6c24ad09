use std::sync::Arc;

use gexr_core::doublesum::*;
use gexr_core::Estimate;
use proptest::prelude::*;

// orthant probabilities from scipy's multivariate normal cdf (abseps 1e-13)
const TAIL_UNIT_BOX: f64 = 1.537822466855e-2;
const D_SEP_3: f64 = 2.433937482846e-4;
const D_SEP_HALF: f64 = 2.126296093340e-3;
const BONF_PK: [f64; 3] = [1.495374284760e-1, 1.104998220195e-1, 1.859322936739e-1];
const BONF_PKL: [((usize, usize), f64); 3] =
    [((0, 1), 3.967524626540e-2), ((0, 2), 3.499829400712e-2), ((1, 2), 4.329113821907e-2)];
const BONF_UNION: f64 = 3.430561278188e-1;

fn params(s2: f64) -> BoundParams {
    BoundParams { c1: 0.5, c2: 1.0, alpha: 2.0, beta: 1.0, delta: 1.0, s1: 0.5, s2 }
}

fn config(corr: CorrelationFn, cells: [(f64, f64); 2], m: f64) -> DoubleMaximaConfig {
    let cell = |(lo, len): (f64, f64)| (vec![lo], BoxRegion::new(vec![0.0], vec![len]).unwrap());
    let ((lambda1, cell1), (lambda2, cell2)) = (cell(cells[0]), cell(cells[1]));
    let mf: gexr_core::tailprob::ScalarFn = Arc::new(move |_| m);
    DoubleMaximaConfig {
        label: "oracle".into(),
        correlation: corr,
        lambda1,
        cell1,
        lambda2,
        cell2,
        m1: mf.clone(),
        m2: mf.clone(),
        m: mf,
        params: params(2.0),
        threshold_tolerance: 0.05,
    }
}

fn gauss() -> CorrelationFn {
    Arc::new(|_, s: &[f64], t: &[f64]| (-(s[0] - t[0]).powi(2)).exp())
}

fn laplace() -> CorrelationFn {
    Arc::new(|_, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs()).exp())
}

#[test]
fn double_maxima_match_orthant_oracle() {
    let cfg = config(gauss(), [(0.0, 1.0), (4.0, 1.0)], 2.5);
    assert_eq!(cfg.separation(), 3.0);
    let e = estimate_double_maxima(&cfg, 2.5, 1.0 / 3.0, 1_000_000, 1).unwrap();
    assert_eq!(e.points, (4, 4));
    assert!((e.estimate.value - D_SEP_3).abs() < 4.0 * e.estimate.stderr, "{:?}", e.estimate);
    assert!((e.tail1.value - TAIL_UNIT_BOX).abs() < 4.0 * e.tail1.stderr, "{:?}", e.tail1);
    assert!(e.estimate.ci95.0 < D_SEP_3 && D_SEP_3 < e.estimate.ci95.1);

    let near = config(gauss(), [(0.0, 1.0), (1.5, 1.0)], 2.5);
    let e = estimate_double_maxima(&near, 2.5, 1.0 / 3.0, 200_000, 2).unwrap();
    assert!((e.estimate.value - D_SEP_HALF).abs() < 4.0 * e.estimate.stderr, "{:?}", e.estimate);
}

#[test]
fn bonferroni_bracket_contains_the_union() {
    let cells = [(0.0, 1.0), (1.5, 0.5), (2.5, 1.5)];
    let n = 200_000;
    let mut pk = [Estimate::exact(0.0, 0); 3];
    let mut pairs = Vec::new();
    for (k, l) in [(0, 1), (0, 2), (1, 2)] {
        let cfg = config(laplace(), [cells[k], cells[l]], 1.5);
        let e = estimate_double_maxima(&cfg, 1.5, 0.5, n, 7).unwrap();
        pk[k] = e.tail1;
        pk[l] = e.tail2;
        pairs.push(PairTerm { k, l, estimate: e.estimate });
        let oracle = BONF_PKL.iter().find(|x| x.0 == (k, l)).unwrap().1;
        assert!((e.estimate.value - oracle).abs() < 4.0 * e.estimate.stderr, "({k},{l}) {:?}", e.estimate);
    }
    for (e, p) in pk.iter().zip(BONF_PK) {
        assert!((e.value - p).abs() < 4.0 * e.stderr, "{e:?} vs {p}");
    }
    let b = bonferroni_bracket(&pk, &pairs).unwrap();
    assert!(b.lower - 3.0 * b.lower_stderr <= BONF_UNION && BONF_UNION <= b.upper + 3.0 * b.upper_stderr, "{b:?}");

    let exact_pk = BONF_PK.map(|p| Estimate::exact(p, 1));
    let exact_pairs: Vec<PairTerm> =
        BONF_PKL.iter().map(|&((k, l), p)| PairTerm { k, l, estimate: Estimate::exact(p, 1) }).collect();
    let b = bonferroni_bracket(&exact_pk, &exact_pairs).unwrap();
    assert!(b.lower <= BONF_UNION && BONF_UNION <= b.upper);
}

#[test]
fn gaussian_preset_fits_and_flat_preset_is_flagged() {
    let run = |make: fn(f64, f64) -> gexr_core::Result<DoubleMaximaConfig>| {
        let obs: Vec<BoundObservation> = [0.0, 2.0, 4.0]
            .iter()
            .map(|&sep| {
                let cfg = make(sep, 2.0).unwrap();
                let e = estimate_double_maxima(&cfg, 2.5, 0.5, 30_000, 3).unwrap();
                BoundObservation::new(&cfg, 2.5, e.estimate)
            })
            .collect();
        fit_bound_constant(&obs).unwrap()
    };
    let g = run(gaussian_preset);
    assert!(g.pass && g.fitted_c.is_finite(), "{g:?}");
    assert!(g.slack.iter().all(|&s| s >= 0.0));
    assert!(g.slack.windows(2).all(|w| w[1] > w[0]), "{:?}", g.slack);
    let f = run(flat_preset);
    assert!(f.unbounded && !f.pass, "{f:?}");
}

fn cube(d: usize) -> impl Strategy<Value = BoxRegion> {
    prop::collection::vec((-10.0..10.0f64, 0.0..5.0f64), d).prop_map(|v| {
        BoxRegion::new(v.iter().map(|x| x.0).collect(), v.iter().map(|x| x.0 + x.1).collect()).unwrap()
    })
}

fn boxes() -> impl Strategy<Value = (BoxRegion, BoxRegion)> {
    (1usize..4).prop_flat_map(|d| (cube(d), cube(d)))
}

proptest! {
    #[test]
    fn separation_is_a_symmetric_gap((a, b) in boxes(), shift in -5.0..5.0f64) {
        let f = separation(&a, &b);
        prop_assert!(f >= 0.0);
        prop_assert_eq!(f, separation(&b, &a));
        prop_assert_eq!(separation(&a, &a), 0.0);
        let v = vec![shift; a.dim()];
        prop_assert!((separation(&a.translate(&v), &b.translate(&v)) - f).abs() < 1e-9);
        // the separation dominates every per-axis gap
        for i in 0..a.dim() {
            let gap = (b.lo[i] - a.hi[i]).max(a.lo[i] - b.hi[i]);
            prop_assert!(f + 1e-12 >= gap);
        }
    }

    #[test]
    fn bracket_width_is_twice_the_pair_mass(p in prop::collection::vec(0.0..0.2f64, 3), q in prop::collection::vec(0.0..0.05f64, 3)) {
        let cells: Vec<Estimate> = p.iter().map(|&x| Estimate::exact(x, 1)).collect();
        let pairs: Vec<PairTerm> = [(0, 1), (0, 2), (1, 2)].iter().zip(&q)
            .map(|(&(k, l), &x)| PairTerm { k, l, estimate: Estimate::exact(x, 1) }).collect();
        let b = bonferroni_bracket(&cells, &pairs).unwrap();
        prop_assert!(b.lower <= b.upper);
        prop_assert!((b.upper - b.lower - 2.0 * q.iter().sum::<f64>()).abs() < 1e-12);
    }
}
