use std::fs;
use std::path::{Path, PathBuf};

use smclab::avi::{solve_box_avi, BoxAvi, ENUMERATION_MAX_DIM};
use smclab::experiments::{
    default_saturation_grid, run_fig_matrix, run_gain_study, run_saturation_sweep, LabeledRun, SaturationSweepOptions,
};
use smclab::metrics::{fit_order_above, log_spaced_decreasing, measurement_floor, one_step_sigma_error};
use smclab::sim::format_number;
use smclab::{run, sample, Benchmark2D, EqLaw, Executor, RunStatus};

use crate::config::{echo, parse_matrix, parse_number, parse_vector, Document};
use crate::output::{Failure, Manifest};

pub const TRACE_FILE: &str = "trace.csv";
pub const ECHO_FILE: &str = "resolved.conf";

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load(config: Option<&Path>, sets: &[String]) -> Result<Document, Failure> {
    let mut doc = match config {
        Some(p) => Document::parse(&read(p)?)?,
        None => Document::default(),
    };
    for s in sets {
        doc.set(s)?;
    }
    Ok(doc)
}

pub fn simulate(config: Option<&Path>, sets: &[String], out: &Path) -> Result<(), Failure> {
    let cfg = load(config, sets)?.resolve()?;
    cfg.validate()?;
    let mut m = Manifest::new(out, "simulate")?;
    m.config_echo(ECHO_FILE, &echo(&cfg))?;
    match run(&cfg) {
        Ok(trace) => {
            m.write(TRACE_FILE, &trace.to_csv_string())?;
            let status = match trace.status {
                RunStatus::Completed => "ok".to_string(),
                RunStatus::Diverged { step } => format!("diverged at step {step}"),
            };
            println!("status: {status}");
            match trace.reaching_step {
                Some(k) => println!("reaching step: {k} (t = {})", format_number(k as f64 * cfg.h)),
                None => println!("reaching step: none"),
            }
            if let Some(s) = trace.sigma.last() {
                println!("final sigma: {}", s.iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(" "));
            }
            m.status("run", status);
            m.finish()
        }
        Err(e) => {
            m.status("run", format!("error: {e}"));
            m.finish()?;
            Err(e.into())
        }
    }
}

pub struct OrderArgs {
    pub law: EqLaw,
    pub h_min: f64,
    pub h_max: f64,
    pub points: usize,
    pub x: Option<Vec<f64>>,
    pub assert: bool,
}

/// Declared slope band; `None` means the errors must sit at the floor.
pub fn order_band(law: EqLaw) -> Option<(f64, f64)> {
    match law {
        EqLaw::Explicit | EqLaw::Implicit => Some((1.85, 2.15)),
        EqLaw::Midpoint | EqLaw::MidpointMean => Some((2.85, 3.15)),
        EqLaw::Exact | EqLaw::ContinuousReference => None,
    }
}

pub fn order_check(args: &OrderArgs, config: Option<&Path>, sets: &[String], out: &Path) -> Result<(), Failure> {
    if args.law == EqLaw::ContinuousReference {
        return Err(Failure::Config("continuous_reference has no one-step error".into()));
    }
    let (plant, x0) = if config.is_some() || !sets.is_empty() {
        let mut doc = load(config, sets)?;
        // only the plant section matters here
        if !doc.has("run.h") {
            doc.set("run.h=1")?;
        }
        let cfg = doc.resolve()?;
        (cfg.plant, cfg.x0)
    } else {
        let b = Benchmark2D::new();
        (b.plant, b.x0)
    };
    let x = args.x.clone().unwrap_or(x0);
    if x.len() != plant.n() {
        return Err(Failure::Config(format!("--x has {} entries, the plant has {} states", x.len(), plant.n())));
    }
    let hs = log_spaced_decreasing(args.h_min, args.h_max, args.points)?;
    let floor = measurement_floor(&x);
    let mut errors = Vec::with_capacity(hs.len());
    let mut csv = String::from("h,error,below_floor\n");
    for &h in &hs {
        let e = one_step_sigma_error(&sample(&plant, h)?, args.law, &x)?;
        csv += &format!("{},{},{}\n", format_number(h), format_number(e), e <= floor);
        errors.push(e);
    }
    let name = format!("order_{}.csv", args.law.name());
    let mut m = Manifest::new(out, "order-check")?;
    m.param("law", args.law.name());
    m.param("h_min", format_number(args.h_min));
    m.param("h_max", format_number(args.h_max));
    m.param("points", args.points);
    m.param("x", x.iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(" "));
    m.write(&name, &csv)?;

    let above = errors.iter().filter(|&&e| e > floor).count();
    let band = order_band(args.law);
    let verdict = if above < 4 {
        println!(
            "{}: below measurement floor ({} of {} errors above {})",
            args.law.name(),
            above,
            errors.len(),
            format_number(floor)
        );
        m.status("fit", "below measurement floor");
        match band {
            None => Ok(()),
            Some(_) => Err(Failure::Assert(format!("{} errors are below the measurement floor", args.law.name()))),
        }
    } else {
        let fit = fit_order_above(&hs, &errors, floor)?;
        println!(
            "{}: slope {:.4} (r^2 {:.6}, {} points)",
            args.law.name(),
            fit.slope,
            fit.r_squared,
            fit.used
        );
        m.status("fit", format!("slope {}", format_number(fit.slope)));
        match band {
            Some((lo, hi)) if (lo..=hi).contains(&fit.slope) => Ok(()),
            Some((lo, hi)) => Err(Failure::Assert(format!("slope {:.4} outside [{lo}, {hi}]", fit.slope))),
            None => Err(Failure::Assert(format!("expected errors at the measurement floor, fitted slope {:.4}", fit.slope))),
        }
    };
    m.finish()?;
    if args.assert {
        verdict
    } else {
        Ok(())
    }
}

fn file_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '-' }).collect()
}

fn emit_runs(m: &mut Manifest, runs: &[LabeledRun]) -> Result<(), Failure> {
    let mut worst = None;
    for r in runs {
        if let Some(t) = r.trace() {
            m.write(&format!("trace_{}.csv", file_label(&r.label)), &t.to_csv_string())?;
        }
        let status = r.status_text();
        println!("{}: {status}", r.label);
        m.status(&r.label, status);
        if let Err(e) = &r.result {
            worst.get_or_insert_with(|| e.clone());
        }
    }
    match worst {
        None => Ok(()),
        Some(e) => Err(e.into()),
    }
}

pub fn fig_matrix(h: f64, perturbed: bool, exec: Executor, out: &Path) -> Result<(), Failure> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Failure::Config("h must be positive".into()));
    }
    let runs = run_fig_matrix(h, perturbed, exec);
    let mut m = Manifest::new(out, "sweep fig-matrix")?;
    m.param("h", format_number(h));
    m.param("perturbed", perturbed);
    let res = emit_runs(&mut m, &runs);
    m.finish()?;
    res
}

pub fn gain_study(h: f64, alphas: &[f64], exec: Executor, out: &Path) -> Result<(), Failure> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Failure::Config("h must be positive".into()));
    }
    let runs = run_gain_study(h, alphas, exec)?;
    let mut m = Manifest::new(out, "sweep gain-study")?;
    m.param("h", format_number(h));
    m.param("alphas", alphas.iter().map(|a| format_number(*a)).collect::<Vec<_>>().join(" "));
    let res = emit_runs(&mut m, &runs);
    m.finish()?;
    res
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Config(format!("--grid expects NxM with N, M ≥ 1, got `{s}`"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let n = a.trim().parse::<usize>().map_err(|_| bad())?;
    let m = b.trim().parse::<usize>().map_err(|_| bad())?;
    if n == 0 || m == 0 {
        return Err(bad());
    }
    Ok((n, m))
}

pub fn saturation(grid: (usize, usize), opts: &SaturationSweepOptions, exec: Executor, out: &Path) -> Result<(), Failure> {
    let (hs, eps) = default_saturation_grid(grid.0, grid.1);
    let r = run_saturation_sweep(&hs, &eps, opts, exec)?;
    let mut m = Manifest::new(out, "sweep saturation")?;
    m.param("grid", format!("{}x{}", grid.0, grid.1));
    m.param("t_end", format_number(opts.t_end));
    m.param("window", format_number(opts.window));
    m.param("alpha", format_number(opts.alpha));
    m.write("saturation_cells.csv", &r.cells_csv())?;
    m.write("saturation_baseline.csv", &r.baseline_csv())?;
    let all: Vec<&String> = r.status_grid.iter().flatten().chain(&r.implicit_baseline_status).collect();
    let ok = all.iter().filter(|s| s.as_str() == "ok").count();
    let diverged = all.iter().filter(|s| s.starts_with("diverged")).count();
    let errors = all.len() - ok - diverged;
    let summary = format!("ok {ok}, diverged {diverged}, error {errors}");
    println!("{} cells plus {} baselines: {summary}", hs.len() * eps.len(), hs.len());
    println!("C2 median {}", format_number(r.c2_median()));
    m.status("saturation", &summary);
    m.finish()?;
    if errors > 0 {
        let first = all.iter().find(|s| s.starts_with("error")).map(|s| s.as_str()).unwrap_or("error");
        return Err(Failure::Numerical(format!("{errors} runs failed, first: {first}")));
    }
    Ok(())
}

/// Problem file with `alpha`, `M` and `q` keys in the configuration syntax.
pub fn avi_solve(path: &PathBuf) -> Result<(), Failure> {
    let text = read(path)?;
    let (mut alpha, mut mat, mut q) = (None, None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("line {n}: expected `key = value`")))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = |what: &str| Failure::Config(format!("line {n}: key `{k}` expects {what}, got `{v}`"));
        match k {
            "alpha" => alpha = Some(parse_number(v).ok_or_else(|| bad("a number"))?),
            "M" => mat = Some(parse_matrix(v).ok_or_else(|| bad("a matrix"))?),
            "q" => q = Some(parse_vector(v).ok_or_else(|| bad("a vector"))?),
            _ => return Err(Failure::Config(format!("line {n}: unknown key `{k}`"))),
        }
    }
    let missing = |k: &str| Failure::Config(format!("missing `{k}`"));
    let avi = BoxAvi::new(mat.ok_or_else(|| missing("M"))?, q.ok_or_else(|| missing("q"))?, alpha.unwrap_or(1.0))?;
    let s = solve_box_avi(&avi)?;
    let join = |v: &[f64]| v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(" ");
    let method = match avi.dim() {
        1 => "scalar",
        p if p <= ENUMERATION_MAX_DIM => "enumeration",
        _ => "projected_gauss_seidel",
    };
    println!("method = {method}");
    println!("z = {}", join(&s.z));
    println!("sigma_tilde = {}", join(&s.sigma_tilde));
    println!("residual = {}", format_number(s.residual));
    Ok(())
}
