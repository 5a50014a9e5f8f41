//! Error orders, control variation, chattering indices and convergence
//! distances.

use crate::controllers::{EqController, EqLaw, GainMatrix};
use crate::discretize::{Perturbation, PerturbationKind, Plant, SampledPlant};
use crate::error::{Error, Result};
use crate::linops::{self, vec as v};
use crate::quadrature::gl32;
use crate::sim::{ReferenceTrace, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points that entered the regression.
    pub used: usize,
}

/// Least squares of `log e = slope·log h + intercept`. Nonpositive or
/// non-finite errors are excluded; at least four points must remain.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> Result<OrderFit> {
    fit_order_above(hs, errors, 0.0)
}

/// As [`fit_order`], also excluding errors at or below `floor`.
pub fn fit_order_above(hs: &[f64], errors: &[f64], floor: f64) -> Result<OrderFit> {
    if hs.len() != errors.len() {
        return Err(Error::Fit(format!("{} timesteps but {} errors", hs.len(), errors.len())));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Fit("timesteps must be strictly decreasing".into()));
    }
    if hs.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Fit("timesteps must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e.is_finite() && e > floor && e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!("{} usable points, need at least 4", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(OrderFit {
        hs: hs.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        r_squared,
        used: pts.len(),
    })
}

/// `points` log-spaced timesteps from `h_max` down to `h_min`.
pub fn log_spaced_decreasing(h_min: f64, h_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(h_min > 0.0 && h_max > h_min) || points < 2 {
        return Err(Error::Domain("need 0 < h_min < h_max and at least 2 points".into()));
    }
    let (a, b) = (h_max.ln(), h_min.ln());
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// One-step errors at or below this are indistinguishable from rounding.
pub fn measurement_floor(x: &[f64]) -> f64 {
    1e-13 * v::norm_inf(x).max(1.0)
}

/// Signed `σ_{k+1} − σ_k` after one nominal step with `ū^s = 0`.
pub fn one_step_sigma_delta(sp: &SampledPlant, law: EqLaw, gain: GainMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != sp.n() {
        return Err(Error::dim("one_step_sigma_delta", sp.n(), x.len()));
    }
    let u = EqController::new(sp, law, gain)?.apply(x);
    let next = sp.step(x, &u, &vec![0.0; sp.n()]);
    Ok(v::sub(&sp.plant.sigma(&next), &sp.plant.sigma(x)))
}

/// `‖σ_{k+1} − σ_k‖₂` for the default gain matrix CB.
pub fn one_step_sigma_error(sp: &SampledPlant, law: EqLaw, x: &[f64]) -> Result<f64> {
    Ok(v::norm_2(&one_step_sigma_delta(sp, law, GainMatrix::Cb, x)?))
}

/// `base + Cᵀ(CCᵀ)^{-1}(σ − C·base)`: the state nearest `base` with `Cx = σ`.
pub fn least_norm_state(plant: &Plant, base: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    if sigma.len() != plant.p() || base.len() != plant.n() {
        return Err(Error::dim("least_norm_state", plant.p(), sigma.len()));
    }
    let c = plant.c();
    let cct = c.matmul(&c.transpose())?;
    let r = v::sub(sigma, &plant.sigma(base));
    let y = linops::solve(&cct, &r)?;
    Ok(v::add(base, &c.transpose().matvec(&y)?))
}

/// `Σ_k ‖u_k − u_{k−1}‖₂`
pub fn variation_step(values: &[Vec<f64>]) -> f64 {
    values
        .windows(2)
        .map(|w| v::norm_2(&v::sub(&w[1], &w[0])))
        .sum()
}

/// Variation of the held control over the control steps with `t_k ≥ t_from`.
pub fn variation_from(trace: &Trace, t_from: f64) -> f64 {
    let k0 = trace.index_at(t_from).min(trace.u_s.len());
    variation_step(&trace.u_s[k0..])
}

/// `∫_{t0}^{t1} |ξ'(t)| dt`, integrated piecewise between sign changes of ξ'.
pub fn variation_smooth(xi: &Perturbation, t0: f64, t1: f64) -> Result<f64> {
    if !(t1 > t0) {
        return Err(Error::Domain("variation needs t1 > t0".into()));
    }
    if xi.kind() == PerturbationKind::Tabulated {
        return Err(Error::Capability(
            "tabulated perturbations have no analytic derivative".into(),
        ));
    }
    let d = |t: f64| xi.derivative(t).expect("analytic kind");
    let mut cuts = vec![t0];
    cuts.extend(xi.kinks().into_iter().filter(|&k| k > t0 && k < t1));
    cuts.push(t1);
    let spacing = xi.time_scale() / 16.0;
    let mut pieces = vec![t0];
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let m = (((b - a) / spacing).ceil() as usize).max(1);
        let step = (b - a) / m as f64;
        // sample just inside the segment so a one-sided kink value is not used
        let probe = |i: usize| {
            let t = a + step * i as f64;
            t.clamp(a + 1e-12 * step, b - 1e-12 * step)
        };
        let mut prev_t = probe(0);
        let mut prev = d(prev_t);
        for i in 1..=m {
            let t = probe(i);
            let cur = d(t);
            if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
                pieces.push(bisect_root(&d, prev_t, t));
            }
            prev_t = t;
            prev = cur;
        }
        pieces.push(b);
    }
    let mut total = 0.0;
    for w in pieces.windows(2) {
        if w[1] > w[0] {
            total += gl32().integrate(w[0], w[1], |t| d(t).abs());
        }
    }
    Ok(total)
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChatterIndices {
    /// `Σ_k Σ_i |σ_{k,i}|` over the window samples.
    pub c1: f64,
    /// `h·c1`, the time-weighted sum.
    pub c1_dt: f64,
    /// Variation of ū^s over the window.
    pub c2: f64,
    pub window: f64,
    pub samples: usize,
}

/// Indices over the samples with `t_k ≥ t_final − window`.
pub fn chatter_indices(trace: &Trace, window: f64) -> Result<ChatterIndices> {
    let t_final = trace.t_final();
    if !(window > 0.0) || window > t_final + 1e-9 * trace.h {
        return Err(Error::Domain(format!(
            "window {window} must be positive and at most the trace duration {t_final}"
        )));
    }
    let k0 = trace.index_at(t_final - window);
    let c1: f64 = trace.sigma[k0..].iter().map(|s| v::norm_1(s)).sum();
    let c2 = variation_step(&trace.u_s[k0.min(trace.u_s.len())..]);
    Ok(ChatterIndices {
        c1,
        c1_dt: trace.h * c1,
        c2,
        window,
        samples: trace.sigma.len() - k0,
    })
}

/// `sup_t max_i |ū^s(t) − u^s(t)|` over fine-grid times `t ≥ t_from`, with
/// ū^s held on `[t_k, t_{k+1})`.
pub fn us_sup_distance(trace: &Trace, reference: &ReferenceTrace, t_from: f64) -> Result<f64> {
    if (reference.h - trace.h).abs() > 1e-12 * trace.h {
        return Err(Error::Alignment(format!(
            "reference refines h = {}, trace has h = {}",
            reference.h, trace.h
        )));
    }
    let r = reference.refine;
    let controls = trace.u_s.len();
    if reference.u_s.len() < controls * r {
        return Err(Error::Alignment("reference grid is shorter than the trace".into()));
    }
    if reference.u_s.first().map(|u| u.len()) != Some(trace.p()) {
        return Err(Error::Alignment("reference and trace input dimensions differ".into()));
    }
    let fine = trace.h / r as f64;
    let j0 = ((t_from / fine) - 1e-9).ceil().max(0.0) as usize;
    let mut sup: f64 = 0.0;
    for j in j0..controls * r {
        let k = j / r;
        for (a, b) in trace.u_s[k].iter().zip(&reference.u_s[j]) {
            sup = sup.max((a - b).abs());
        }
    }
    Ok(sup)
}

/// Lag τ in `[0, max_lag]` maximizing `∫ ū^s(t)·(−ξ(t − τ)) dt` over
/// `t ≥ t_from`, with ū^s held on each step. Searched on `points` lags.
pub fn tracking_lag(trace: &Trace, xi: &Perturbation, t_from: f64, max_lag: f64, points: usize) -> Result<f64> {
    if !(max_lag > 0.0) || points < 2 {
        return Err(Error::Domain("need max_lag > 0 and at least 2 lag points".into()));
    }
    let k0 = trace.index_at(t_from);
    if k0 >= trace.u_s.len() {
        return Err(Error::Domain("t_from leaves no control steps".into()));
    }
    let q = gl32();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for j in 0..points {
        let tau = max_lag * j as f64 / (points - 1) as f64;
        let mut corr = 0.0;
        for k in k0..trace.u_s.len() {
            let (a, b) = (trace.times[k], trace.times[k + 1]);
            let s: f64 = trace.u_s[k].iter().sum();
            corr -= s * q.integrate(a, b, |t| xi.eval(t - tau));
        }
        if corr > best.0 {
            best = (corr, tau);
        }
    }
    Ok(best.1)
}

/// λ_min and λ_max of sym(hCB), the constants bracketing the explicit exit band.
pub fn exit_band_eigenvalues(plant: &Plant, h: f64) -> Result<(f64, f64)> {
    let sb = linops::spectral_bounds(&plant.cb().scale(h))?;
    Ok((sb.min_sym_eig, sb.max_sym_eig))
}
