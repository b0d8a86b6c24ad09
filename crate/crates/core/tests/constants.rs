use gexr_core::constants::*;
use gexr_core::covariance::{DriftFunction, LimitFieldSpec, VarianceFunction};
use gexr_core::functional::FunctionalSpec;
use gexr_core::simkit::GridSpec;
use gexr_core::special::{integrate_to_inf, log_survival_psi};
use std::f64::consts::PI;

fn fbm(alpha: f64) -> LimitFieldSpec {
    LimitFieldSpec::fbm(1.0, alpha).unwrap()
}

// exp(−2 Σ_k Ψ(√(kδ/2))/k)/δ, summed with mpmath
const DISCRETE_BM_QUARTER: f64 = 0.663159674699467;
// 1 + ∫_0^∞ e^x P(sup_{[0,2]} √2B(t) − t > x) dx
const BM_SUP_ON_TWO: f64 = 3.849320433312458;

#[test]
fn reflection_quadrature_reproduces_frozen_value() {
    let t: f64 = 2.0;
    let z = |x: f64| (2.0 * t).sqrt().recip() * x;
    let f = |x: f64| (x + log_survival_psi(z(x + t))).exp() + log_survival_psi(z(x - t)).exp();
    let v = 1.0 + integrate_to_inf(f, 0.0, 1e-10);
    assert!((v - BM_SUP_ON_TWO).abs() < 1e-7, "{v}");
}

#[test]
fn discrete_brownian_pickands_matches_series() {
    let sch = ExtrapolationSchedule { domain_sizes: vec![4.0, 8.0, 16.0], grid_steps: vec![1.0, 0.5, 0.25], stop_rule: 0.01 };
    let r = estimate_pickands(&fbm(1.0), &sch, 50_000, 11, Method::Tilted).unwrap();
    let e = r.finest;
    assert!((e.value - DISCRETE_BM_QUARTER).abs() < 4.0 * e.stderr, "{e:?}");
}

#[test]
fn brownian_sup_on_a_grid_sits_below_the_continuum() {
    let grid = GridSpec::stepped(0.0, 2.0, 1.0 / 64.0).unwrap();
    let e = estimate_generalized_constant(&fbm(1.0), &DriftFunction::zero(), &FunctionalSpec::Sup, &grid, 20_000, 5, Method::Tilted)
        .unwrap()
        .estimate;
    assert!(e.value < BM_SUP_ON_TWO && e.value > 0.85 * BM_SUP_ON_TWO, "{e:?}");
}

#[test]
fn smooth_process_sup_matches_closed_form() {
    // sup_t √2 tZ − t² is attained in closed form: 1 + T/√π
    let t = 2.0;
    let grid = GridSpec::stepped(0.0, t, 1.0 / 64.0).unwrap();
    let e = estimate_generalized_constant(&fbm(2.0), &DriftFunction::zero(), &FunctionalSpec::Sup, &grid, 40_000, 3, Method::Tilted)
        .unwrap()
        .estimate;
    let exact = 1.0 + t / PI.sqrt();
    assert!((e.value - exact).abs() < 4.0 * e.stderr + 1e-3, "{e:?} vs {exact}");
}

#[test]
fn smooth_process_piterbarg_matches_closed_form() {
    for gamma in [0.5, 2.0] {
        let h = DriftFunction::power_sum(vec![gamma], vec![2.0]).unwrap();
        let sch = ExtrapolationSchedule { domain_sizes: vec![1.0, 2.0, 4.0], grid_steps: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], stop_rule: 0.01 };
        let r = estimate_piterbarg(&fbm(2.0), &h, DomainKind::OneSided, &sch, 40_000, 8, Method::Tilted).unwrap();
        let exact = 0.5 * (1.0 + ((1.0 + gamma) / gamma).sqrt());
        let e = r.estimate;
        assert!((e.value - exact).abs() < 4.0 * e.stderr + 2e-3, "γ={gamma}: {e:?} vs {exact}");
    }
}

#[test]
fn single_point_domain_gives_one() {
    let grid = GridSpec::line(0.0, 0.0, 1).unwrap();
    for gamma in [FunctionalSpec::Sup, FunctionalSpec::Inf, FunctionalSpec::Mix(0.3)] {
        for eta in [fbm(1.0), fbm(0.5), LimitFieldSpec::degenerate(1)] {
            let e = estimate_generalized_constant(&eta, &DriftFunction::zero(), &gamma, &grid, 500, 1, Method::Tilted).unwrap();
            assert_eq!(e.estimate.value, 1.0);
            assert_eq!(e.estimate.stderr, 0.0);
        }
    }
    let vf = VarianceFunction::fbm(0.8).unwrap();
    let sch = ExtrapolationSchedule { domain_sizes: vec![0.0, 1.0, 2.0], ..Default::default() };
    let r = estimate_generalized_piterbarg(&vf, 1.0, 0.0, &sch, 1.0 / 16.0, 500, 1, Method::Tilted).unwrap();
    // the tilted sampler spreads its mass over the whole lag grid, so this level is 1 only in mean
    let e = r.levels[0].1;
    assert!((e.value - 1.0).abs() < 4.0 * e.stderr, "{e:?}");
}

#[test]
fn degenerate_limit_is_deterministic() {
    let grid = GridSpec::stepped(0.0, 2.0, 0.25).unwrap();
    let h = DriftFunction::power_sum(vec![1.0], vec![1.0]).unwrap();
    let eta = LimitFieldSpec::degenerate(1);
    let sup = estimate_generalized_constant(&eta, &h, &FunctionalSpec::Sup, &grid, 100, 1, Method::Tilted).unwrap();
    let inf = estimate_generalized_constant(&eta, &h, &FunctionalSpec::Inf, &grid, 100, 1, Method::Tilted).unwrap();
    assert_eq!(sup.estimate.value, 1.0);
    assert_eq!(inf.estimate.value, (-2.0_f64).exp());
    assert_eq!(inf.estimate.stderr, 0.0);
}

#[test]
fn shared_paths_make_levels_monotone_in_domain() {
    let r = estimate_pickands(&fbm(1.0), &ExtrapolationSchedule::default(), 2_000, 4, Method::Tilted).unwrap();
    for step in ExtrapolationSchedule::default().grid_steps {
        let raw: Vec<f64> = r.rows.iter().filter(|x| x.step == step).map(|x| x.raw.value).collect();
        assert!(raw.windows(2).all(|w| w[1] >= w[0]), "{raw:?}");
    }
}

#[test]
fn stderr_shrinks_like_root_n() {
    let grid = GridSpec::stepped(0.0, 2.0, 1.0 / 16.0).unwrap();
    let run = |n| {
        estimate_generalized_constant(&fbm(1.0), &DriftFunction::zero(), &FunctionalSpec::Sup, &grid, n, 9, Method::Tilted)
            .unwrap()
            .estimate
            .stderr
    };
    let q = run(16_000) / run(4_000);
    assert!((0.35..0.65).contains(&q), "{q}");
}

#[test]
fn generalized_piterbarg_is_nondecreasing_in_t() {
    let vf = VarianceFunction::fbm(1.0).unwrap();
    let sch = ExtrapolationSchedule { domain_sizes: vec![0.5, 1.0, 2.0], ..Default::default() };
    let r = estimate_generalized_piterbarg(&vf, 1.0, 1.0, &sch, 1.0 / 16.0, 4_000, 2, Method::Tilted).unwrap();
    assert!(r.levels.windows(2).all(|w| w[1].1.value >= w[0].1.value));
    assert!(r.assumptions_hold);
}
