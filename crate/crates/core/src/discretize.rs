//! Exact zero-order-hold sampling of an LTI plant and the matched
//! perturbation integral.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linops::{self, Mat};
use crate::quadrature::{gl32, gl64};

/// Continuous-time plant `ẋ = Ax + B(u + ξ)`, `σ = Cx`, with switching gain α.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Mat,
    b: Mat,
    c: Mat,
    alpha: f64,
    cb: Mat,
}

impl Plant {
    pub fn new(a: Mat, b: Mat, c: Mat, alpha: f64) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::dim("Plant::new", "square A", format!("{}x{}", n, a.cols())));
        }
        if b.rows() != n {
            return Err(Error::dim("Plant::new", format!("B with {n} rows"), b.rows()));
        }
        let p = b.cols();
        if c.shape() != (p, n) {
            return Err(Error::dim(
                "Plant::new",
                format!("C of shape {p}x{n}"),
                format!("{}x{}", c.rows(), c.cols()),
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        let cb = c.matmul(&b)?;
        if linops::Lu::factor(&cb)?.is_singular() {
            return Err(Error::Config("decoupling matrix CB is singular".into()));
        }
        Ok(Plant { a, b, c, alpha, cb })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Decoupling matrix CB.
    pub fn cb(&self) -> &Mat {
        &self.cb
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn p(&self) -> usize {
        self.b.cols()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Plant> {
        Plant::new(self.a.clone(), self.b.clone(), self.c.clone(), alpha)
    }

    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        self.c.matvec_unchecked(x)
    }
}

/// ZOH data for a fixed timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPlant {
    pub plant: Plant,
    pub h: f64,
    pub e_ah: Mat,
    pub psi: Mat,
    pub b_star: Mat,
    pub cb_star: Mat,
    /// Smallest eigenvalue of the symmetric part of CB*.
    pub cb_star_beta: f64,
    cb_star_is_p: bool,
}

impl SampledPlant {
    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn p(&self) -> usize {
        self.plant.p()
    }

    pub fn alpha(&self) -> f64 {
        self.plant.alpha
    }

    /// Cached P-matrix certificate of CB*. Above the enumeration cap the
    /// sufficient test `cb_star_beta > 0` is used.
    pub fn cb_star_is_p_matrix(&self) -> bool {
        self.cb_star_is_p
    }

    /// One ZOH step `e^{Ah}x + B*u + p`.
    pub fn step(&self, x: &[f64], u: &[f64], p_k: &[f64]) -> Vec<f64> {
        let mut next = self.e_ah.matvec_unchecked(x);
        let bu = self.b_star.matvec_unchecked(u);
        for ((v, a), b) in next.iter_mut().zip(&bu).zip(p_k) {
            *v += a + b;
        }
        next
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<SampledPlant> {
        let mut sp = self.clone();
        sp.plant = self.plant.with_alpha(alpha)?;
        Ok(sp)
    }
}

pub fn sample(plant: &Plant, h: f64) -> Result<SampledPlant> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain("h must be positive".into()));
    }
    let e_ah = linops::expm(plant.a(), h)?;
    let psi = linops::psi(plant.a(), h)?;
    let b_star = psi.matmul(plant.b())?;
    let cb_star = plant.c().matmul(&b_star)?;
    let beta = linops::spectral_bounds(&cb_star)?.min_sym_eig;
    let is_p = if cb_star.rows() <= linops::P_MATRIX_MAX_DIM {
        linops::is_p_matrix(&cb_star)?
    } else {
        beta > 0.0
    };
    Ok(SampledPlant {
        plant: plant.clone(),
        h,
        e_ah,
        psi,
        b_star,
        cb_star,
        cb_star_beta: beta,
        cb_star_is_p: is_p,
    })
}

/// Largest point of the grid `h_max·i/grid` such that CB*/h has a positive
/// definite symmetric part at it and at every smaller grid point.
pub fn h_star_estimate(plant: &Plant, h_max: f64, grid: usize) -> Result<f64> {
    if !(h_max > 0.0 && h_max.is_finite()) {
        return Err(Error::Domain("h_max must be positive".into()));
    }
    if grid == 0 {
        return Err(Error::Domain("grid must be nonzero".into()));
    }
    if linops::spectral_bounds(plant.cb())?.min_sym_eig <= 0.0 {
        return Err(Error::Domain("CB is not positive definite".into()));
    }
    let mut best = None;
    for i in 1..=grid {
        let h = h_max * i as f64 / grid as f64;
        let cbs = plant.c().matmul(&linops::psi(plant.a(), h)?.matmul(plant.b())?)?;
        if linops::spectral_bounds(&cbs.scale(1.0 / h))?.min_sym_eig > 0.0 {
            best = Some(h);
        } else {
            break;
        }
    }
    best.ok_or_else(|| Error::TimestepTooLarge("no grid point certifies CB*/h > 0".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbationKind {
    None,
    /// `a·exp(min(t0 − t, 0))·sin(ωt)`, params `[a, t0, ω]`
    DecayingSine,
    /// `a·sin(t)`, params `[a]`
    Sine,
    /// `a·sin(ωt)`, params `[a, ω]`
    ScaledSine,
    /// `c`, params `[c]`
    Constant,
    /// Natural cubic spline through `[t0, v0, t1, v1, ...]`, held constant
    /// outside the table.
    Tabulated,
}

impl PerturbationKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::DecayingSine => "decaying_sine",
            PerturbationKind::Sine => "sine",
            PerturbationKind::ScaledSine => "scaled_sine",
            PerturbationKind::Constant => "constant",
            PerturbationKind::Tabulated => "tabulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => PerturbationKind::None,
            "decaying_sine" => PerturbationKind::DecayingSine,
            "sine" => PerturbationKind::Sine,
            "scaled_sine" => PerturbationKind::ScaledSine,
            "constant" => PerturbationKind::Constant,
            "tabulated" | "custom" => PerturbationKind::Tabulated,
            _ => return None,
        })
    }
}

/// Scalar matched disturbance profile ξ(t), applied to every input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    kind: PerturbationKind,
    params: Vec<f64>,
    // spline second derivatives, tabulated only
    m2: Vec<f64>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation::none()
    }
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, params: Vec<f64>) -> Result<Self> {
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("perturbation parameters must be finite".into()));
        }
        let want = match kind {
            PerturbationKind::None => Some(0),
            PerturbationKind::DecayingSine => Some(3),
            PerturbationKind::Sine => Some(1),
            PerturbationKind::ScaledSine => Some(2),
            PerturbationKind::Constant => Some(1),
            PerturbationKind::Tabulated => None,
        };
        if let Some(w) = want {
            if params.len() != w {
                return Err(Error::Config(format!(
                    "perturbation {} takes {w} parameters, got {}",
                    kind.name(),
                    params.len()
                )));
            }
            return Ok(Perturbation { kind, params, m2: Vec::new() });
        }
        if params.len() < 4 || params.len() % 2 != 0 {
            return Err(Error::Config(
                "tabulated perturbation needs at least two (t, value) pairs".into(),
            ));
        }
        let ts: Vec<f64> = params.iter().step_by(2).copied().collect();
        let vs: Vec<f64> = params.iter().skip(1).step_by(2).copied().collect();
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated times must be strictly increasing".into()));
        }
        let m2 = natural_spline(&ts, &vs);
        Ok(Perturbation { kind, params, m2 })
    }

    pub fn none() -> Self {
        Perturbation { kind: PerturbationKind::None, params: Vec::new(), m2: Vec::new() }
    }

    pub fn decaying_sine(a: f64, t0: f64, omega: f64) -> Self {
        Perturbation { kind: PerturbationKind::DecayingSine, params: vec![a, t0, omega], m2: Vec::new() }
    }

    /// `0.6·exp(min(6 − t, 0))·sin(2πt)`
    pub fn benchmark_decaying() -> Self {
        Perturbation::decaying_sine(0.6, 6.0, 2.0 * PI)
    }

    pub fn sine(a: f64) -> Self {
        Perturbation { kind: PerturbationKind::Sine, params: vec![a], m2: Vec::new() }
    }

    pub fn scaled_sine(a: f64, omega: f64) -> Self {
        Perturbation { kind: PerturbationKind::ScaledSine, params: vec![a, omega], m2: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Perturbation { kind: PerturbationKind::Constant, params: vec![c], m2: Vec::new() }
    }

    pub fn tabulated(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config("tabulated times and values differ in length".into()));
        }
        let params = times.iter().zip(values).flat_map(|(&t, &v)| [t, v]).collect();
        Perturbation::new(PerturbationKind::Tabulated, params)
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            PerturbationKind::None => true,
            PerturbationKind::Constant | PerturbationKind::Sine => self.params[0] == 0.0,
            PerturbationKind::DecayingSine | PerturbationKind::ScaledSine => self.params[0] == 0.0,
            PerturbationKind::Tabulated => self.params.iter().skip(1).step_by(2).all(|&v| v == 0.0),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::DecayingSine => p[0] * (p[1] - t).min(0.0).exp() * (p[2] * t).sin(),
            PerturbationKind::Sine => p[0] * t.sin(),
            PerturbationKind::ScaledSine => p[0] * (p[1] * t).sin(),
            PerturbationKind::Constant => p[0],
            PerturbationKind::Tabulated => self.spline_eval(t),
        }
    }

    /// Analytic ξ'(t); `None` for tabulated profiles.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        let p = &self.params;
        Some(match self.kind {
            PerturbationKind::None | PerturbationKind::Constant => 0.0,
            PerturbationKind::DecayingSine => {
                let (a, t0, w) = (p[0], p[1], p[2]);
                if t <= t0 {
                    a * w * (w * t).cos()
                } else {
                    a * (t0 - t).exp() * (w * (w * t).cos() - (w * t).sin())
                }
            }
            PerturbationKind::Sine => p[0] * t.cos(),
            PerturbationKind::ScaledSine => p[0] * p[1] * (p[1] * t).cos(),
            PerturbationKind::Tabulated => return None,
        })
    }

    /// Points where ξ' may jump.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        match self.kind {
            PerturbationKind::DecayingSine => vec![self.params[1]],
            _ => Vec::new(),
        }
    }

    /// A time scale on which ξ' changes sign at most once.
    pub(crate) fn time_scale(&self) -> f64 {
        match self.kind {
            PerturbationKind::DecayingSine => 1.0 / self.params[2].abs().max(1.0),
            PerturbationKind::ScaledSine => 1.0 / self.params[1].abs().max(1e-3),
            _ => 1.0,
        }
    }

    fn spline_eval(&self, t: f64) -> f64 {
        let n = self.params.len() / 2;
        let ts = |i: usize| self.params[2 * i];
        let vs = |i: usize| self.params[2 * i + 1];
        if t <= ts(0) {
            return vs(0);
        }
        if t >= ts(n - 1) {
            return vs(n - 1);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ts(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d = ts(hi) - ts(lo);
        let a = (ts(hi) - t) / d;
        let b = (t - ts(lo)) / d;
        a * vs(lo)
            + b * vs(hi)
            + ((a * a * a - a) * self.m2[lo] + (b * b * b - b) * self.m2[hi]) * d * d / 6.0
    }
}

fn natural_spline(ts: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let mut m2 = vec![0.0; n];
    if n < 3 {
        return m2;
    }
    // Tridiagonal solve for interior second derivatives.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = ts[i] - ts[i - 1];
        let h1 = ts[i + 1] - ts[i];
        let lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (vs[i + 1] - vs[i]) / h1 - (vs[i] - vs[i - 1]) / h0;
        if i > 1 {
            let f = lower / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m2[i + 1] } else { 0.0 };
        m2[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m2
}

/// Precomputed quadrature kernels `e^{A(h−τ_j)}B·1` for the perturbation
/// integral at 32 and 64 Gauss-Legendre nodes.
#[derive(Debug, Clone)]
pub struct PerturbationKernel {
    coarse: Vec<(f64, f64, Vec<f64>)>,
    fine: Vec<(f64, f64, Vec<f64>)>,
}

pub const PERTURBATION_REFINE_TOL: f64 = 1e-6;

impl PerturbationKernel {
    pub fn new(sp: &SampledPlant) -> Result<Self> {
        let ones = vec![1.0; sp.p()];
        let b1 = sp.plant.b().matvec_unchecked(&ones);
        let build = |rule: &crate::quadrature::GaussLegendre| -> Result<Vec<(f64, f64, Vec<f64>)>> {
            rule.mapped(0.0, sp.h)
                .map(|(tau, w)| {
                    let e = linops::expm(sp.plant.a(), sp.h - tau)?;
                    Ok((tau, w, e.matvec_unchecked(&b1)))
                })
                .collect()
        };
        Ok(PerturbationKernel { coarse: build(gl32())?, fine: build(gl64())? })
    }

    /// p_k over [t_k, t_k + h], 32-node value checked against 64 nodes.
    pub fn integral(&self, xi: &Perturbation, t_k: f64) -> Result<Vec<f64>> {
        let n = self.coarse[0].2.len();
        if xi.is_zero() {
            return Ok(vec![0.0; n]);
        }
        let mut coarse = vec![0.0; n];
        for (tau, w, k) in &self.coarse {
            let f = w * xi.eval(t_k + tau);
            for (c, kv) in coarse.iter_mut().zip(k) {
                *c += f * kv;
            }
        }
        let mut fine = vec![0.0; n];
        let mut bound = 0.0;
        for (tau, w, k) in &self.fine {
            let f = w * xi.eval(t_k + tau);
            bound += f.abs() * crate::linops::vec::norm_inf(k);
            for (c, kv) in fine.iter_mut().zip(k) {
                *c += f * kv;
            }
        }
        let diff = coarse
            .iter()
            .zip(&fine)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff > PERTURBATION_REFINE_TOL * bound {
            return Err(Error::Accuracy(diff / bound));
        }
        Ok(coarse)
    }
}

/// p_k = ∫_{t_k}^{t_k+h} e^{A(t_k+h−τ)} B ξ(τ) dτ
pub fn perturbation_integral(sp: &SampledPlant, xi: &Perturbation, t_k: f64) -> Result<Vec<f64>> {
    PerturbationKernel::new(sp)?.integral(xi, t_k)
}
