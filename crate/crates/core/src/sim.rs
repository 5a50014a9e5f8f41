//! Fixed-step closed-loop simulation under exact ZOH propagation.

use std::io::{self, Write};

use crate::controllers::{control_step, EqController, EqLaw, GainMatrix, UsLaw};
use crate::discretize::{sample, Perturbation, PerturbationKernel, Plant, SampledPlant};
use crate::error::{Error, Result};
use crate::linops::{self, vec as v, Mat};

pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plant: Plant,
    pub h: f64,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub eq_law: EqLaw,
    pub gain_matrix: GainMatrix,
    pub us_law: UsLaw,
    pub perturbation: Perturbation,
    /// Reserved; no stochastic component is simulated.
    pub seed: u64,
    /// Runs halt with [`RunStatus::Diverged`] once `‖x‖∞` exceeds this.
    pub divergence_cap: f64,
}

impl ScenarioConfig {
    /// Exact equivalent control, implicit discontinuous input, no perturbation.
    pub fn new(plant: Plant, h: f64, t_end: f64, x0: Vec<f64>) -> Self {
        ScenarioConfig {
            plant,
            h,
            t_end,
            x0,
            eq_law: EqLaw::Exact,
            gain_matrix: GainMatrix::Cb,
            us_law: UsLaw::ImplicitAvi,
            perturbation: Perturbation::none(),
            seed: 0,
            divergence_cap: DEFAULT_DIVERGENCE_CAP,
        }
    }

    pub fn with_laws(mut self, eq_law: EqLaw, us_law: UsLaw) -> Self {
        self.eq_law = eq_law;
        self.us_law = us_law;
        self
    }

    pub fn with_perturbation(mut self, xi: Perturbation) -> Self {
        self.perturbation = xi;
        self
    }

    pub fn with_gain_matrix(mut self, g: GainMatrix) -> Self {
        self.gain_matrix = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Domain("h must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain("t_end must be positive".into()));
        }
        if self.h > self.t_end {
            return Err(Error::Domain("h must not exceed t_end".into()));
        }
        if self.x0.len() != self.plant.n() {
            return Err(Error::dim("ScenarioConfig x0", self.plant.n(), self.x0.len()));
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("x0"));
        }
        if !(self.divergence_cap > 0.0) {
            return Err(Error::Domain("divergence cap must be positive".into()));
        }
        self.us_law.validated()?;
        Ok(())
    }

    /// Number of control steps, `floor(t_end/h)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.h + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// `‖x_step‖∞` exceeded the divergence cap; the trace ends at that state.
    Diverged { step: usize },
}

impl RunStatus {
    pub fn is_diverged(self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub h: f64,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub u_eq: Vec<Vec<f64>>,
    pub u_s: Vec<Vec<f64>>,
    /// σ̃_{k+1} per control step, implicit discontinuous input only.
    pub sigma_tilde: Option<Vec<Vec<f64>>>,
    pub p_k: Vec<Vec<f64>>,
    pub sliding_flags: Vec<bool>,
    pub reaching_step: Option<usize>,
    pub status: RunStatus,
}

impl Trace {
    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn p(&self) -> usize {
        self.sigma[0].len()
    }

    pub fn control_steps(&self) -> usize {
        self.u_s.len()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("trace has an initial state")
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states.iter().map(|x| v::norm_inf(x)).fold(0.0, f64::max)
    }

    /// First index whose time is at or after `t` (within rounding).
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t / self.h) - 1e-9).ceil().max(0.0) as usize;
        k.min(self.times.len())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (n, p) = (self.n(), self.p());
        let mut header = vec!["k".to_string(), "t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        for name in ["sigma", "ueq", "us", "sigma_tilde"] {
            header.extend((1..=p).map(|i| format!("{name}_{i}")));
        }
        header.push("sliding_flag".into());
        writeln!(w, "{}", header.join(","))?;
        let blanks = |out: &mut Vec<String>| out.extend(std::iter::repeat_n(String::new(), p));
        for k in 0..self.states.len() {
            let mut row = vec![k.to_string(), format_number(self.times[k])];
            row.extend(self.states[k].iter().map(|&x| format_number(x)));
            row.extend(self.sigma[k].iter().map(|&x| format_number(x)));
            if k < self.u_s.len() {
                row.extend(self.u_eq[k].iter().map(|&x| format_number(x)));
                row.extend(self.u_s[k].iter().map(|&x| format_number(x)));
                match &self.sigma_tilde {
                    Some(st) => row.extend(st[k].iter().map(|&x| format_number(x))),
                    None => blanks(&mut row),
                }
                row.push(if self.sliding_flags[k] { "1" } else { "0" }.into());
            } else {
                for _ in 0..3 {
                    blanks(&mut row);
                }
                row.push(String::new());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Shortest round-trip decimal form of a binary64 value.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

/// Threshold below which σ counts as zero: `1e-12·max(1, ‖σ_0‖)`.
pub fn zero_threshold(sigma0: &[f64]) -> f64 {
    1e-12 * v::norm_2(sigma0).max(1.0)
}

pub fn run(config: &ScenarioConfig) -> Result<Trace> {
    config.validate()?;
    let sp = sample(&config.plant, config.h)?;
    run_sampled(config, &sp)
}

/// As [`run`], reusing an already sampled plant with the same `h` and α.
pub fn run_sampled(config: &ScenarioConfig, sp: &SampledPlant) -> Result<Trace> {
    config.validate()?;
    if sp.h != config.h || sp.plant != config.plant {
        return Err(Error::Config("sampled plant does not match the scenario".into()));
    }
    if config.us_law == UsLaw::ImplicitAvi && !sp.cb_star_is_p_matrix() {
        return Err(Error::NotPMatrix);
    }
    let eq = EqController::new(sp, config.eq_law, config.gain_matrix)?;
    let kernel = if config.perturbation.is_zero() {
        None
    } else {
        Some(PerturbationKernel::new(sp)?)
    };
    let steps = config.steps();
    let (n, p) = (sp.n(), sp.p());
    let implicit = config.us_law == UsLaw::ImplicitAvi;
    let mut tr = Trace {
        h: config.h,
        alpha: sp.alpha(),
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        sigma: Vec::with_capacity(steps + 1),
        u_eq: Vec::with_capacity(steps),
        u_s: Vec::with_capacity(steps),
        sigma_tilde: implicit.then(|| Vec::with_capacity(steps)),
        p_k: Vec::with_capacity(steps),
        sliding_flags: Vec::with_capacity(steps),
        reaching_step: None,
        status: RunStatus::Completed,
    };
    let mut x = config.x0.clone();
    tr.times.push(0.0);
    tr.sigma.push(sp.plant.sigma(&x));
    tr.states.push(x.clone());
    for k in 0..steps {
        let t_k = k as f64 * config.h;
        let cs = control_step(sp, &eq, config.us_law, &x).map_err(|e| e.at_step(k))?;
        let pk = match &kernel {
            Some(kern) => kern.integral(&config.perturbation, t_k).map_err(|e| e.at_step(k))?,
            None => vec![0.0; n],
        };
        let u: Vec<f64> = cs.u_eq.iter().zip(&cs.u_s).map(|(a, b)| a + b).collect();
        x = sp.step(&x, &u, &pk);
        tr.u_eq.push(cs.u_eq);
        tr.u_s.push(cs.u_s);
        if let (Some(st), Some(s)) = (tr.sigma_tilde.as_mut(), cs.sigma_tilde_next) {
            st.push(s);
        }
        tr.p_k.push(pk);
        tr.sliding_flags.push(cs.in_sliding_phase);
        tr.times.push((k + 1) as f64 * config.h);
        tr.sigma.push(sp.plant.sigma(&x));
        tr.states.push(x.clone());
        let norm = v::norm_inf(&x);
        if !(norm <= config.divergence_cap) {
            tr.status = RunStatus::Diverged { step: k + 1 };
            break;
        }
    }
    debug_assert_eq!(tr.sigma[0].len(), p);
    tr.reaching_step = detect_sliding_phase(&tr);
    Ok(tr)
}

/// Smallest k with every flag from k onward set.
pub fn suffix_sliding_start(flags: &[bool]) -> Option<usize> {
    let trailing = flags.iter().rev().take_while(|&&f| f).count();
    (trailing > 0).then(|| flags.len() - trailing)
}

pub fn detect_sliding_phase(trace: &Trace) -> Option<usize> {
    suffix_sliding_start(&trace.sliding_flags)
}

/// The idealized sliding-phase input `u^s(t) = −ξ(t)` on a refined grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    /// Coarse step of the trace being refined.
    pub h: f64,
    pub refine: usize,
    pub times: Vec<f64>,
    pub u_s: Vec<Vec<f64>>,
}

pub fn continuous_reference(config: &ScenarioConfig, refine: usize) -> Result<ReferenceTrace> {
    config.validate()?;
    if refine == 0 {
        return Err(Error::Domain("refine must be at least 1".into()));
    }
    let fine = config.h / refine as f64;
    let total = config.steps() * refine;
    let p = config.plant.p();
    let times: Vec<f64> = (0..=total).map(|j| j as f64 * fine).collect();
    let u_s = times
        .iter()
        .map(|&t| vec![-config.perturbation.eval(t); p])
        .collect();
    Ok(ReferenceTrace { h: config.h, refine, times, u_s })
}

/// `V_k = −ū^s_{k−1}ᵀσ_k`, with `V_0 = α‖σ_0‖₁`.
pub fn lyapunov_sign_function(trace: &Trace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.sigma.len());
    out.push(trace.alpha * v::norm_1(&trace.sigma[0]));
    for k in 1..trace.sigma.len() {
        out.push(-v::dot(&trace.u_s[k - 1], &trace.sigma[k]));
    }
    out
}

/// `V_k = σ_kᵀ(CB*)^{-1}σ_k`
pub fn lyapunov_quadratic(trace: &Trace, sp: &SampledPlant) -> Result<Vec<f64>> {
    let lu = linops::lu(&sp.cb_star, "CB*")?;
    Ok(trace
        .sigma
        .iter()
        .map(|s| v::dot(s, &lu.solve_vec(s)))
        .collect())
}

/// `⌈V(σ_0)/(βα²)⌉` with `V(σ_0) = α‖σ_0‖₁`.
pub fn reaching_step_bound(sp: &SampledPlant, sigma0: &[f64]) -> Result<usize> {
    let a = sp.alpha();
    if !(sp.cb_star_beta > 0.0) {
        return Err(Error::Domain("CB* has no positive definite symmetric part".into()));
    }
    Ok((a * v::norm_1(sigma0) / (sp.cb_star_beta * a * a)).ceil() as usize)
}

/// `V(σ_0)/(α²(γ − δ*_max)) + h`, where γ is the smallest eigenvalue of the
/// symmetric part of CB and δ*_max bounds `‖sym(CB*(h')/h') − sym(CB)‖₂` on a
/// grid of `h' ∈ (0, h]`. `None` when γ ≤ δ*_max.
pub fn analytic_reaching_time(plant: &Plant, sigma0: &[f64], h: f64, grid: usize) -> Result<Option<f64>> {
    if !(h > 0.0) || grid == 0 {
        return Err(Error::Domain("h and grid must be positive".into()));
    }
    let cbs = plant.cb().sym_part()?;
    let gamma = linops::spectral_bounds(&cbs)?.min_sym_eig;
    let mut delta: f64 = 0.0;
    for i in 1..=grid {
        let hh = h * i as f64 / grid as f64;
        let cbstar: Mat = plant.c().matmul(&linops::psi(plant.a(), hh)?.matmul(plant.b())?)?;
        let d = cbstar.scale(1.0 / hh).sym_part()?.sub(&cbs)?;
        delta = delta.max(linops::spectral_norm(&d)?);
    }
    if !(gamma > delta) {
        return Ok(None);
    }
    let a = plant.alpha();
    Ok(Some(a * v::norm_1(sigma0) / (a * a * (gamma - delta)) + h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachingTimes {
    /// `h·reaching_step`
    pub observed: Option<f64>,
    pub analytic: Option<f64>,
}

pub fn reaching_times(config: &ScenarioConfig, trace: &Trace) -> Result<ReachingTimes> {
    Ok(ReachingTimes {
        observed: trace.reaching_step.map(|k| k as f64 * trace.h),
        analytic: analytic_reaching_time(&config.plant, &trace.sigma[0], config.h, 64)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::expm;

    fn bench(alpha: f64) -> Plant {
        Plant::new(
            Mat::from_rows(&[&[0.0, 1.0], &[19.0, -2.0]]).unwrap(),
            Mat::column(&[0.0, 1.0]),
            Mat::row(&[1.0, 1.0]),
            alpha,
        )
        .unwrap()
    }

    fn cfg(h: f64, t_end: f64) -> ScenarioConfig {
        ScenarioConfig::new(bench(1.0), h, t_end, vec![-15.0, 20.0])
    }

    #[test]
    fn suffix_detection() {
        assert_eq!(suffix_sliding_start(&[false, false]), None);
        assert_eq!(suffix_sliding_start(&[false, false, true, true, true]), Some(2));
        assert_eq!(suffix_sliding_start(&[true, false, true]), Some(2));
        assert_eq!(suffix_sliding_start(&[true, true]), Some(0));
        assert_eq!(suffix_sliding_start(&[]), None);
    }

    #[test]
    fn pure_flow_without_control() {
        // CA = 0 makes the explicit equivalent control vanish identically.
        let plant = Plant::new(
            Mat::from_rows(&[&[0.0, 0.0], &[0.0, -1.0]]).unwrap(),
            Mat::column(&[1.0, 0.0]),
            Mat::row(&[1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let mut c = ScenarioConfig::new(plant.clone(), 0.05, 1.0, vec![1.0, 3.0]);
        c = c.with_laws(EqLaw::Explicit, UsLaw::Off);
        let tr = run(&c).unwrap();
        for (k, x) in tr.states.iter().enumerate() {
            let want = expm(plant.a(), k as f64 * 0.05).unwrap().matvec(&[1.0, 3.0]).unwrap();
            assert!(v::norm_inf(&v::sub(x, &want)) < 1e-14);
        }
        assert!((tr.states[20][1] - 3.0 * (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn lengths_and_recursion_residual() {
        let c = cfg(0.3, 150.0).with_perturbation(Perturbation::sine(0.9));
        let tr = run(&c).unwrap();
        assert_eq!(tr.states.len(), 501);
        assert_eq!(tr.u_s.len(), 500);
        assert_eq!(tr.sigma_tilde.as_ref().unwrap().len(), 500);
        let sp = sample(&c.plant, c.h).unwrap();
        for k in 0..tr.u_s.len() {
            let u = v::add(&tr.u_eq[k], &tr.u_s[k]);
            let next = sp.step(&tr.states[k], &u, &tr.p_k[k]);
            let err = v::norm_inf(&v::sub(&next, &tr.states[k + 1]));
            assert!(err <= 1e-12 * v::norm_inf(&next).max(1.0));
        }
    }

    #[test]
    fn flags_match_inputs() {
        let tr = run(&cfg(0.3, 30.0)).unwrap();
        for (u, f) in tr.u_s.iter().zip(&tr.sliding_flags) {
            assert_eq!(*f, u[0].abs() < 1.0);
        }
    }

    #[test]
    fn nominal_exact_implicit_reaches_zero() {
        let tr = run(&cfg(0.3, 150.0)).unwrap();
        let r = tr.reaching_step.unwrap();
        for k in r..tr.u_s.len() {
            assert!(tr.sigma[k + 1][0].abs() <= 1e-12);
        }
        // ū^s vanishes one step after entering the sliding phase.
        for k in r + 1..tr.u_s.len() {
            assert!(tr.u_s[k][0].abs() <= 1e-11);
        }
        let sp = sample(&bench(1.0), 0.3).unwrap();
        assert!(r <= reaching_step_bound(&sp, &tr.sigma[0]).unwrap());
        assert!(tr.sigma_tilde.as_ref().unwrap()[r..].iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn explicit_law_diverges_at_large_h() {
        for us in [UsLaw::ImplicitAvi, UsLaw::ExplicitSign] {
            let tr = run(&cfg(0.3, 150.0).with_laws(EqLaw::Explicit, us)).unwrap();
            assert!(tr.status.is_diverged());
            assert!(tr.max_state_norm() > 1e3);
            assert_eq!(tr.states.len(), tr.u_s.len() + 1);
        }
    }

    #[test]
    fn sigma_tilde_absent_for_other_laws() {
        let tr = run(&cfg(0.3, 3.0).with_laws(EqLaw::Exact, UsLaw::ExplicitSign)).unwrap();
        assert!(tr.sigma_tilde.is_none());
        let csv = tr.to_csv_string();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, "k,t,x_1,x_2,sigma_1,ueq_1,us_1,sigma_tilde_1,sliding_flag");
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(7), Some(""));
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",,,,"));
    }

    #[test]
    fn validation_errors() {
        let mut c = cfg(0.0, 1.0);
        assert_eq!(run(&c).unwrap_err().to_string(), "h must be positive");
        c.h = 2.0;
        assert!(run(&c).is_err());
        c.h = 0.1;
        c.x0 = vec![1.0];
        assert!(matches!(run(&c), Err(Error::Dimension { .. })));
        let c = cfg(0.1, 1.0).with_laws(EqLaw::ContinuousReference, UsLaw::Off);
        assert!(matches!(run(&c), Err(Error::Config(_))));
    }

    #[test]
    fn reference_is_negated_perturbation() {
        let c = cfg(0.1, 1.0).with_perturbation(Perturbation::sine(0.9));
        let r = continuous_reference(&c, 4).unwrap();
        assert_eq!(r.times.len(), 41);
        for (t, u) in r.times.iter().zip(&r.u_s) {
            assert_eq!(u[0], -0.9 * t.sin());
        }
        let z = continuous_reference(&cfg(0.1, 1.0), 3).unwrap();
        assert!(z.u_s.iter().all(|u| u[0] == 0.0));
    }

    #[test]
    fn analytic_bound_dominates_observed() {
        let c = cfg(0.03, 20.0);
        let tr = run(&c).unwrap();
        let rt = reaching_times(&c, &tr).unwrap();
        let (obs, ana) = (rt.observed.unwrap(), rt.analytic.unwrap());
        assert!(obs <= ana, "observed {obs} analytic {ana}");
    }

    #[test]
    fn lyapunov_sign_function_nonincreasing() {
        let tr = run(&cfg(0.3, 10.0)).unwrap();
        let vs = lyapunov_sign_function(&tr);
        assert!(vs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let sp = sample(&bench(1.0), 0.3).unwrap();
        let drop = sp.cb_star_beta;
        for k in 0..tr.reaching_step.unwrap() {
            assert!(vs[k] - vs[k + 1] >= drop - 1e-12, "k={k}");
        }
    }

    #[test]
    fn format_is_shortest_round_trip() {
        for x in [0.1, 1.0, -2.5e-300, 1e16, 123.456, f64::MIN_POSITIVE] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(0.1), "0.1");
    }
}
