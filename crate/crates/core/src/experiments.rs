//! Canned studies on the two-dimensional unstable benchmark: the controller
//! matrix, the gain study and the saturation sweep.

use std::f64::consts::PI;

use crate::controllers::{EqLaw, UsLaw};
use crate::discretize::{sample, Perturbation, Plant};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linops::Mat;
use crate::metrics::chatter_indices;
use crate::sim::{format_number, run_sampled, RunStatus, ScenarioConfig, Trace};

pub const BENCHMARK_T_END: f64 = 150.0;
pub const CHATTER_WINDOW: f64 = 20.0;
/// Sentinel stored in sweep grids for runs that diverged or failed.
pub const SWEEP_SENTINEL: f64 = -1.0;

/// `A = [[0, 1], [19, −2]]`, `B = (0, 1)ᵀ`, `C = (1, 1)`, `x0 = (−15, 20)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark2D {
    pub plant: Plant,
    pub x0: Vec<f64>,
}

impl Default for Benchmark2D {
    fn default() -> Self {
        Benchmark2D::new()
    }
}

impl Benchmark2D {
    pub fn new() -> Self {
        Benchmark2D::with_alpha(1.0)
    }

    pub fn with_alpha(alpha: f64) -> Self {
        let plant = Plant::new(
            Mat::from_rows(&[&[0.0, 1.0], &[19.0, -2.0]]).expect("constant"),
            Mat::column(&[0.0, 1.0]),
            Mat::row(&[1.0, 1.0]),
            alpha,
        )
        .expect("benchmark plant is valid for alpha > 0");
        Benchmark2D { plant, x0: vec![-15.0, 20.0] }
    }

    pub fn scenario(&self, h: f64, t_end: f64) -> ScenarioConfig {
        ScenarioConfig::new(self.plant.clone(), h, t_end, self.x0.clone())
    }
}

#[derive(Debug, Clone)]
pub struct LabeledRun {
    pub label: String,
    pub config: ScenarioConfig,
    pub result: Result<Trace>,
}

impl LabeledRun {
    pub fn trace(&self) -> Option<&Trace> {
        self.result.as_ref().ok()
    }

    /// `ok`, `diverged` or `error: <message>`.
    pub fn status_text(&self) -> String {
        match &self.result {
            Ok(t) => match t.status {
                RunStatus::Completed => "ok".into(),
                RunStatus::Diverged { step } => format!("diverged at step {step}"),
            },
            Err(e) => format!("error: {e}"),
        }
    }
}

/// The seven controller pairings, labelled by eq-law letter then u^s letter.
pub const FIG_MATRIX: [(&str, EqLaw, UsLaw); 7] = [
    ("ei", EqLaw::Explicit, UsLaw::ImplicitAvi),
    ("ii", EqLaw::Implicit, UsLaw::ImplicitAvi),
    ("mi", EqLaw::Midpoint, UsLaw::ImplicitAvi),
    ("ex", EqLaw::Exact, UsLaw::ImplicitAvi),
    ("ee", EqLaw::Explicit, UsLaw::ExplicitSign),
    ("ie", EqLaw::Implicit, UsLaw::ExplicitSign),
    ("me", EqLaw::Midpoint, UsLaw::ExplicitSign),
];

fn run_all(configs: Vec<(String, ScenarioConfig)>, exec: Executor) -> Vec<LabeledRun> {
    exec.map(&configs, |(label, cfg)| LabeledRun {
        label: label.clone(),
        config: cfg.clone(),
        result: sample(&cfg.plant, cfg.h).and_then(|sp| run_sampled(cfg, &sp)),
    })
}

/// The seven pairings on the benchmark over 150 s; `perturbed` adds
/// `0.6·exp(min(6 − t, 0))·sin(2πt)`.
pub fn run_fig_matrix(h: f64, perturbed: bool, exec: Executor) -> Vec<LabeledRun> {
    let bench = Benchmark2D::new();
    let xi = if perturbed { Perturbation::benchmark_decaying() } else { Perturbation::none() };
    let configs = FIG_MATRIX
        .iter()
        .map(|&(label, eq, us)| {
            let cfg = bench
                .scenario(h, BENCHMARK_T_END)
                .with_laws(eq, us)
                .with_perturbation(xi.clone());
            (label.to_string(), cfg)
        })
        .collect();
    run_all(configs, exec)
}

/// Exact equivalent control with implicit and explicit u^s for each α,
/// under `ξ = 0.9 sin t`.
pub fn run_gain_study(h: f64, alphas: &[f64], exec: Executor) -> Result<Vec<LabeledRun>> {
    if alphas.is_empty() {
        return Err(Error::Config("gain study needs at least one alpha".into()));
    }
    let mut configs = Vec::new();
    for &alpha in alphas {
        if !(alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        let bench = Benchmark2D::with_alpha(alpha);
        for (tag, us) in [("implicit", UsLaw::ImplicitAvi), ("explicit", UsLaw::ExplicitSign)] {
            let cfg = bench
                .scenario(h, BENCHMARK_T_END)
                .with_laws(EqLaw::Exact, us)
                .with_perturbation(Perturbation::sine(0.9));
            configs.push((format!("{tag}_alpha{}", format_number(alpha)), cfg));
        }
    }
    Ok(run_all(configs, exec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSweepOptions {
    pub t_end: f64,
    pub window: f64,
    pub alpha: f64,
    pub perturbation: Perturbation,
    pub eq_law: EqLaw,
}

impl Default for SaturationSweepOptions {
    fn default() -> Self {
        SaturationSweepOptions {
            t_end: BENCHMARK_T_END,
            window: CHATTER_WINDOW,
            alpha: 1.0,
            perturbation: Perturbation::scaled_sine(1.0, 4.0 * PI),
            eq_law: EqLaw::Exact,
        }
    }
}

/// Linear h in `[1e-3, 0.3]` and log-spaced ε in `[1e-4, 1]`.
pub fn default_saturation_grid(h_points: usize, eps_points: usize) -> (Vec<f64>, Vec<f64>) {
    (linspace(1e-3, 0.3, h_points), logspace(1e-4, 1.0, eps_points))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Matrices are indexed `[h index][ε index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub hs: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `(ε, h)` for every cell, h-major.
    pub grid: Vec<(f64, f64)>,
    pub c1_grid: Vec<Vec<f64>>,
    pub c1_dt_grid: Vec<Vec<f64>>,
    pub c2_grid: Vec<Vec<f64>>,
    pub status_grid: Vec<Vec<String>>,
    pub implicit_baseline_c1: Vec<f64>,
    pub implicit_baseline_c1_dt: Vec<f64>,
    pub implicit_baseline_c2: Vec<f64>,
    pub implicit_baseline_status: Vec<String>,
    /// Saturated minus implicit.
    pub diff_c1: Vec<Vec<f64>>,
    pub diff_c2: Vec<Vec<f64>>,
    /// argmin over ε of C1, ties to the smaller ε; NaN if every cell failed.
    pub best_epsilon_per_h: Vec<f64>,
}

impl SweepResult {
    /// Long-format cell table.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("h,epsilon,c1,c1_dt,c2,diff_c1,diff_c2,status\n");
        for (i, h) in self.hs.iter().enumerate() {
            for (j, e) in self.epsilons.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    format_number(*h),
                    format_number(*e),
                    format_number(self.c1_grid[i][j]),
                    format_number(self.c1_dt_grid[i][j]),
                    format_number(self.c2_grid[i][j]),
                    format_number(self.diff_c1[i][j]),
                    format_number(self.diff_c2[i][j]),
                    self.status_grid[i][j],
                ));
            }
        }
        out
    }

    pub fn baseline_csv(&self) -> String {
        let mut out = String::from("h,implicit_c1,implicit_c1_dt,implicit_c2,best_epsilon,status\n");
        for (i, h) in self.hs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                format_number(*h),
                format_number(self.implicit_baseline_c1[i]),
                format_number(self.implicit_baseline_c1_dt[i]),
                format_number(self.implicit_baseline_c2[i]),
                format_number(self.best_epsilon_per_h[i]),
                self.implicit_baseline_status[i],
            ));
        }
        out
    }

    /// Median of the valid C2 cells.
    pub fn c2_median(&self) -> f64 {
        let mut all: Vec<f64> = self.c2_grid.iter().flatten().copied().filter(|v| *v >= 0.0).collect();
        all.sort_by(f64::total_cmp);
        match all.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => all[n / 2],
            n => 0.5 * (all[n / 2 - 1] + all[n / 2]),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Cell(usize, usize),
    Baseline(usize),
}

type CellOutcome = (f64, f64, f64, String);

fn outcome(result: Result<Trace>, window: f64) -> CellOutcome {
    let failed = |s: String| (SWEEP_SENTINEL, SWEEP_SENTINEL, SWEEP_SENTINEL, s);
    match result {
        Ok(tr) => match tr.status {
            RunStatus::Diverged { step } => failed(format!("diverged at step {step}")),
            RunStatus::Completed => match chatter_indices(&tr, window) {
                Ok(ci) => (ci.c1, ci.c1_dt, ci.c2, "ok".into()),
                Err(e) => failed(format!("error: {e}")),
            },
        },
        Err(e) => failed(format!("error: {e}")),
    }
}

/// Saturated `−α·sat_ε(σ)` over the `h × ε` grid plus the implicit baseline
/// per h, each scored by C1/C2 over the final window.
pub fn run_saturation_sweep(
    hs: &[f64],
    epsilons: &[f64],
    opts: &SaturationSweepOptions,
    exec: Executor,
) -> Result<SweepResult> {
    if hs.is_empty() || epsilons.is_empty() {
        return Err(Error::Config("sweep grids must be nonempty".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let bench = Benchmark2D::with_alpha(opts.alpha);
    let sampled = exec.map(hs, |&h| sample(&bench.plant, h));
    let mut jobs = Vec::with_capacity(hs.len() * (epsilons.len() + 1));
    for i in 0..hs.len() {
        jobs.push(Job::Baseline(i));
        jobs.extend((0..epsilons.len()).map(|j| Job::Cell(i, j)));
    }
    let results = exec.map(&jobs, |job| {
        let (i, us) = match *job {
            Job::Cell(i, j) => (i, UsLaw::Saturation { epsilon: epsilons[j] }),
            Job::Baseline(i) => (i, UsLaw::ImplicitAvi),
        };
        let cfg = bench
            .scenario(hs[i], opts.t_end)
            .with_laws(opts.eq_law, us)
            .with_perturbation(opts.perturbation.clone());
        let res = match &sampled[i] {
            Ok(sp) => run_sampled(&cfg, sp),
            Err(e) => Err(e.clone()),
        };
        outcome(res, opts.window)
    });

    let (nh, ne) = (hs.len(), epsilons.len());
    let mut r = SweepResult {
        hs: hs.to_vec(),
        epsilons: epsilons.to_vec(),
        grid: hs.iter().flat_map(|&h| epsilons.iter().map(move |&e| (e, h))).collect(),
        c1_grid: vec![vec![0.0; ne]; nh],
        c1_dt_grid: vec![vec![0.0; ne]; nh],
        c2_grid: vec![vec![0.0; ne]; nh],
        status_grid: vec![vec![String::new(); ne]; nh],
        implicit_baseline_c1: vec![0.0; nh],
        implicit_baseline_c1_dt: vec![0.0; nh],
        implicit_baseline_c2: vec![0.0; nh],
        implicit_baseline_status: vec![String::new(); nh],
        diff_c1: vec![vec![0.0; ne]; nh],
        diff_c2: vec![vec![0.0; ne]; nh],
        best_epsilon_per_h: vec![f64::NAN; nh],
    };
    for (job, (c1, c1dt, c2, status)) in jobs.iter().zip(results) {
        match *job {
            Job::Cell(i, j) => {
                r.c1_grid[i][j] = c1;
                r.c1_dt_grid[i][j] = c1dt;
                r.c2_grid[i][j] = c2;
                r.status_grid[i][j] = status;
            }
            Job::Baseline(i) => {
                r.implicit_baseline_c1[i] = c1;
                r.implicit_baseline_c1_dt[i] = c1dt;
                r.implicit_baseline_c2[i] = c2;
                r.implicit_baseline_status[i] = status;
            }
        }
    }
    for i in 0..nh {
        let base_ok = r.implicit_baseline_c1[i] >= 0.0;
        let mut best: Option<(f64, usize)> = None;
        for j in 0..ne {
            let ok = r.c1_grid[i][j] >= 0.0;
            if ok && base_ok {
                r.diff_c1[i][j] = r.c1_grid[i][j] - r.implicit_baseline_c1[i];
                r.diff_c2[i][j] = r.c2_grid[i][j] - r.implicit_baseline_c2[i];
            } else {
                r.diff_c1[i][j] = f64::NAN;
                r.diff_c2[i][j] = f64::NAN;
            }
            if ok {
                let c = r.c1_grid[i][j];
                let better = match best {
                    None => true,
                    Some((bc, bj)) => c < bc || (c == bc && epsilons[j] < epsilons[bj]),
                };
                if better {
                    best = Some((c, j));
                }
            }
        }
        if let Some((_, j)) = best {
            r.best_epsilon_per_h[i] = epsilons[j];
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_constants() {
        let b = Benchmark2D::new();
        let a = b.plant.a();
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((tr / 2.0 + disc - 3.472).abs() < 1e-3);
        assert!((tr / 2.0 - disc + 5.472).abs() < 1e-3);
        assert_eq!(b.plant.cb()[(0, 0)], 1.0);
        assert_eq!(b.x0, vec![-15.0, 20.0]);
    }

    #[test]
    fn grids() {
        let (hs, es) = default_saturation_grid(20, 20);
        assert_eq!(hs[0], 1e-3);
        assert!((hs[19] - 0.3).abs() < 1e-15);
        assert!((es[0] - 1e-4).abs() < 1e-18);
        assert!((es[19] - 1.0).abs() < 1e-14);
        assert!(es.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fig_matrix_labels() {
        let runs = run_fig_matrix(0.3, false, Executor::Sequential);
        let labels: Vec<&str> = runs.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["ei", "ii", "mi", "ex", "ee", "ie", "me"]);
    }

    #[test]
    fn gain_study_layout() {
        let runs = run_gain_study(0.1, &[1.0, 3.0, 10.0], Executor::Sequential).unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[0].label, "implicit_alpha1.0");
        assert_eq!(runs[5].label, "explicit_alpha10.0");
        assert!(run_gain_study(0.1, &[], Executor::Sequential).is_err());
    }

    #[test]
    fn small_sweep_is_consistent() {
        let opts = SaturationSweepOptions { t_end: 30.0, ..Default::default() };
        let r = run_saturation_sweep(&[0.01, 0.05], &[1e-3, 0.1, 1.0], &opts, Executor::Sequential).unwrap();
        assert_eq!(r.grid.len(), 6);
        assert_eq!(r.grid[1], (0.1, 0.01));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(r.diff_c1[i][j], r.c1_grid[i][j] - r.implicit_baseline_c1[i]);
                assert_eq!(r.status_grid[i][j], "ok");
            }
            let j = r.epsilons.iter().position(|&e| e == r.best_epsilon_per_h[i]).unwrap();
            assert!(r.c1_grid[i].iter().all(|&c| c >= r.c1_grid[i][j]));
        }
        assert_eq!(r.cells_csv().lines().count(), 7);
        assert_eq!(r.baseline_csv().lines().count(), 3);
    }
}
