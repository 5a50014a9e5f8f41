//! Error orders near the sliding manifold and the gain-matrix toggle.

use smclab::controllers::{control_step, EqController, GainMatrix};
use smclab::metrics::{fit_order, least_norm_state, log_spaced_decreasing, measurement_floor, one_step_sigma_delta};
use smclab::{sample, Benchmark2D, EqLaw, UsLaw};

// σ(−15, 15) = 0
const BASE: [f64; 2] = [-15.0, 15.0];

/// ‖σ_{k+1}‖ after one nominal step from a state with `σ_k = s·h²`.
fn seeded_step(eq: EqLaw, us: UsLaw, h: f64, s: f64) -> f64 {
    let plant = Benchmark2D::new().plant;
    let sp = sample(&plant, h).unwrap();
    let x = least_norm_state(&plant, &BASE, &[s * h * h]).unwrap();
    assert!((plant.sigma(&x)[0] - s * h * h).abs() <= 1e-13);
    let ctl = EqController::new(&sp, eq, GainMatrix::Cb).unwrap();
    let cs = control_step(&sp, &ctl, us, &x).unwrap();
    let u = [cs.u_eq[0] + cs.u_s[0]];
    plant.sigma(&sp.step(&x, &u, &[0.0, 0.0]))[0].abs()
}

fn order_on(eq: EqLaw, us: UsLaw, s: f64, h_min: f64, h_max: f64) -> f64 {
    let hs = log_spaced_decreasing(h_min, h_max, 12).unwrap();
    let errs: Vec<f64> = hs.iter().map(|&h| seeded_step(eq, us, h, s)).collect();
    fit_order(&hs, &errs).unwrap().slope
}

fn order(eq: EqLaw, us: UsLaw, s: f64) -> f64 {
    order_on(eq, us, s, 1e-4, 1e-2)
}

#[test]
fn explicit_sign_leaves_quadratic_neighbourhood() {
    for s in [1.0, -1.0] {
        let m = order(EqLaw::Exact, UsLaw::ExplicitSign, s);
        assert!((m - 1.0).abs() <= 0.15, "exact s={s} slope {m}");
    }
    // the eq-law error here is about 150·h², so the αh exit dominates only for h ≪ 1/150
    for eq in [EqLaw::Explicit, EqLaw::Implicit] {
        for s in [1.0, -1.0] {
            let m = order_on(eq, UsLaw::ExplicitSign, s, 1e-5, 1e-3);
            assert!((m - 1.0).abs() <= 0.15, "{eq:?} s={s} slope {m}");
        }
    }
}

#[test]
fn implicit_sign_error_follows_eq_law_order() {
    for (eq, want) in [(EqLaw::Explicit, 2.0), (EqLaw::Implicit, 2.0), (EqLaw::Midpoint, 3.0)] {
        for s in [1.0, -1.0] {
            let m = order(eq, UsLaw::ImplicitAvi, s);
            assert!((m - want).abs() <= 0.15, "{eq:?} s={s} slope {m}");
        }
    }
}

#[test]
fn exact_law_with_implicit_sign_lands_on_manifold() {
    for h in [1e-3, 1e-2, 0.1, 0.3] {
        let e = seeded_step(EqLaw::Exact, UsLaw::ImplicitAvi, h, 1.0);
        assert!(e <= measurement_floor(&BASE), "h={h} |σ|={e}");
    }
}

#[test]
fn cbstar_gain_does_not_converge() {
    let plant = Benchmark2D::new().plant;
    let hs = log_spaced_decreasing(1e-4, 1e-2, 12).unwrap();
    let x = [-15.0, 20.0];
    let delta = |g: GainMatrix| -> Vec<f64> {
        hs.iter()
            .map(|&h| one_step_sigma_delta(&sample(&plant, h).unwrap(), EqLaw::Explicit, g, &x).unwrap()[0].abs())
            .collect()
    };
    let cb = fit_order(&hs, &delta(GainMatrix::Cb)).unwrap().slope;
    let cbs = fit_order(&hs, &delta(GainMatrix::CbStar)).unwrap().slope;
    assert!((cb - 2.0).abs() < 0.15, "CB slope {cb}");
    assert!(cbs.abs() < 0.15, "CB* slope {cbs}");
}

#[test]
fn midpoint_mean_matches_trapezoidal_order() {
    let plant = Benchmark2D::new().plant;
    let hs = log_spaced_decreasing(1e-4, 1e-2, 12).unwrap();
    let x = [-15.0, 20.0];
    for law in [EqLaw::Midpoint, EqLaw::MidpointMean] {
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| one_step_sigma_delta(&sample(&plant, h).unwrap(), law, GainMatrix::Cb, &x).unwrap()[0].abs())
            .collect();
        let m = fit_order(&hs, &errs).unwrap().slope;
        assert!((m - 3.0).abs() < 0.15, "{law:?} slope {m}");
    }
}
