//! Equivalent-control discretizations and discontinuous inputs.

use crate::avi::{self, BoxAvi};
use crate::discretize::SampledPlant;
use crate::error::{Error, Result};
use crate::linops::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqLaw {
    /// `−G^{-1}CA x_k`
    Explicit,
    /// `−G^{-1}CA x_{k+1}` with `x_{k+1} = W^{-1}e^{Ah}x_k`, `W = I + B*G^{-1}CA`
    Implicit,
    /// Trapezoidal: mean of the explicit input at `x_k` and the implicit
    /// feedback at the predicted `x_{k+1} = e^{Ah}x_k + B*u`.
    Midpoint,
    /// Mean of the explicit and implicit laws, each evaluated at `x_k`.
    MidpointMean,
    /// `(CB*)^{-1}C(I − e^{Ah})x_k`
    Exact,
    /// Idealized continuous-time law; only available through
    /// [`crate::sim::continuous_reference`].
    ContinuousReference,
}

impl EqLaw {
    pub const SAMPLED: [EqLaw; 5] =
        [EqLaw::Explicit, EqLaw::Implicit, EqLaw::Midpoint, EqLaw::MidpointMean, EqLaw::Exact];

    pub fn name(self) -> &'static str {
        match self {
            EqLaw::Explicit => "explicit",
            EqLaw::Implicit => "implicit",
            EqLaw::Midpoint => "midpoint",
            EqLaw::MidpointMean => "midpoint_mean",
            EqLaw::Exact => "exact",
            EqLaw::ContinuousReference => "continuous_reference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "explicit" => EqLaw::Explicit,
            "implicit" => EqLaw::Implicit,
            "midpoint" => EqLaw::Midpoint,
            "midpoint_mean" => EqLaw::MidpointMean,
            "exact" => EqLaw::Exact,
            "continuous_reference" | "continuous-reference" => EqLaw::ContinuousReference,
            _ => return None,
        })
    }
}

/// Matrix G inverted in the explicit, implicit and midpoint laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GainMatrix {
    #[default]
    Cb,
    CbStar,
}

impl GainMatrix {
    pub fn name(self) -> &'static str {
        match self {
            GainMatrix::Cb => "CB",
            GainMatrix::CbStar => "CBstar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CB" | "cb" => Some(GainMatrix::Cb),
            "CBstar" | "cbstar" | "CB*" => Some(GainMatrix::CbStar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UsLaw {
    /// `−α·sgn(σ_k)` with `sgn(0) = 0`
    ExplicitSign,
    /// Box AVI with `M = CB*`, `q = σ_k`
    ImplicitAvi,
    /// `−α·sat_ε(σ_k)`
    Saturation { epsilon: f64 },
    Off,
}

impl UsLaw {
    pub fn name(self) -> &'static str {
        match self {
            UsLaw::ExplicitSign => "explicit",
            UsLaw::ImplicitAvi => "implicit",
            UsLaw::Saturation { .. } => "saturation",
            UsLaw::Off => "off",
        }
    }

    /// Parses a law name; `epsilon` is only consulted for saturation.
    pub fn parse(s: &str, epsilon: Option<f64>) -> Result<Self> {
        Ok(match s {
            "explicit" | "explicit_sign" | "explicit-sign" => UsLaw::ExplicitSign,
            "implicit" | "implicit_avi" | "implicit-avi" => UsLaw::ImplicitAvi,
            "off" => UsLaw::Off,
            "saturation" => {
                let epsilon = epsilon
                    .ok_or_else(|| Error::Config("saturation law needs epsilon".into()))?;
                UsLaw::Saturation { epsilon }.validated()?
            }
            other => return Err(Error::Config(format!("unknown discontinuous law `{other}`"))),
        })
    }

    pub fn validated(self) -> Result<Self> {
        if let UsLaw::Saturation { epsilon } = self {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Config("epsilon must be positive".into()));
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub u_eq: Vec<f64>,
    pub u_s: Vec<f64>,
    pub sigma_tilde_next: Option<Vec<f64>>,
    pub in_sliding_phase: bool,
}

#[derive(Debug, Clone)]
enum Feedback {
    Linear(Mat),
    Mean(Mat, Mat),
}

/// An equivalent-control law reduced to its linear feedback for one
/// sampled plant.
#[derive(Debug, Clone)]
pub struct EqController {
    law: EqLaw,
    feedback: Feedback,
}

impl EqController {
    pub fn new(sp: &SampledPlant, law: EqLaw, gain: GainMatrix) -> Result<Self> {
        let feedback = match law {
            EqLaw::Explicit => Feedback::Linear(explicit_gain(sp, gain)?),
            EqLaw::Implicit => Feedback::Linear(implicit_gain(sp, gain)?),
            EqLaw::Midpoint => Feedback::Linear(midpoint_gain(sp, gain)?),
            EqLaw::MidpointMean => {
                Feedback::Mean(explicit_gain(sp, gain)?, implicit_gain(sp, gain)?)
            }
            EqLaw::Exact => Feedback::Linear(exact_gain(sp)?),
            EqLaw::ContinuousReference => {
                return Err(Error::Config(
                    "continuous_reference has no sampled form; use sim::continuous_reference".into(),
                ))
            }
        };
        Ok(EqController { law, feedback })
    }

    pub fn law(&self) -> EqLaw {
        self.law
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.feedback {
            Feedback::Linear(k) => k.matvec_unchecked(x),
            Feedback::Mean(ke, ki) => {
                let ue = ke.matvec_unchecked(x);
                let ui = ki.matvec_unchecked(x);
                ue.iter().zip(&ui).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    /// Closed-loop matrix `e^{Ah} + B*K` of the nominal recursion.
    pub fn closed_loop(&self, sp: &SampledPlant) -> Mat {
        let k = match &self.feedback {
            Feedback::Linear(k) => k.clone(),
            Feedback::Mean(a, b) => a.add(b).expect("same shape").scale(0.5),
        };
        sp.e_ah.add(&sp.b_star.mul_unchecked(&k)).expect("n x n")
    }
}

fn gain_lu(sp: &SampledPlant, gain: GainMatrix) -> Result<linops::Lu> {
    match gain {
        GainMatrix::Cb => linops::lu(sp.plant.cb(), "CB"),
        GainMatrix::CbStar => linops::lu(&sp.cb_star, "CB*"),
    }
}

// G^{-1} C A
fn ginv_ca(sp: &SampledPlant, gain: GainMatrix) -> Result<Mat> {
    let ca = sp.plant.c().mul_unchecked(sp.plant.a());
    Ok(gain_lu(sp, gain)?.solve_mat(&ca))
}

fn explicit_gain(sp: &SampledPlant, gain: GainMatrix) -> Result<Mat> {
    Ok(ginv_ca(sp, gain)?.scale(-1.0))
}

fn implicit_gain(sp: &SampledPlant, gain: GainMatrix) -> Result<Mat> {
    let g = ginv_ca(sp, gain)?;
    let w = Mat::identity(sp.n()).add(&sp.b_star.mul_unchecked(&g))?;
    let lu = linops::lu(&w, "W").map_err(|_| {
        Error::TimestepTooLarge(format!("W = I + ΨΠ_B A is singular at h = {}", sp.h))
    })?;
    let next = lu.solve_mat(&sp.e_ah);
    Ok(g.mul_unchecked(&next).scale(-1.0))
}

fn midpoint_gain(sp: &SampledPlant, gain: GainMatrix) -> Result<Mat> {
    let g = ginv_ca(sp, gain)?;
    let s = Mat::identity(sp.p()).add(&g.mul_unchecked(&sp.b_star).scale(0.5))?;
    let rhs = g.scale(-0.5).sub(&g.mul_unchecked(&sp.e_ah).scale(0.5))?;
    let lu = linops::lu(&s, "midpoint resolvent").map_err(|_| {
        Error::TimestepTooLarge(format!("midpoint resolvent is singular at h = {}", sp.h))
    })?;
    Ok(lu.solve_mat(&rhs))
}

fn exact_gain(sp: &SampledPlant) -> Result<Mat> {
    let lu = linops::lu(&sp.cb_star, "CB*")
        .map_err(|_| Error::TimestepTooLarge(format!("CB* is singular at h = {}", sp.h)))?;
    let rhs = sp.plant.c().mul_unchecked(&Mat::identity(sp.n()).sub(&sp.e_ah)?);
    Ok(lu.solve_mat(&rhs))
}

fn check_state(sp: &SampledPlant, x: &[f64]) -> Result<()> {
    if x.len() != sp.n() {
        return Err(Error::dim("equivalent control", sp.n(), x.len()));
    }
    Ok(())
}

fn check_sigma(sp: &SampledPlant, s: &[f64]) -> Result<()> {
    if s.len() != sp.p() {
        return Err(Error::dim("discontinuous control", sp.p(), s.len()));
    }
    Ok(())
}

pub fn u_eq(sp: &SampledPlant, law: EqLaw, x: &[f64]) -> Result<Vec<f64>> {
    check_state(sp, x)?;
    Ok(EqController::new(sp, law, GainMatrix::Cb)?.apply(x))
}

pub fn u_eq_explicit(sp: &SampledPlant, x: &[f64]) -> Result<Vec<f64>> {
    u_eq(sp, EqLaw::Explicit, x)
}

pub fn u_eq_implicit(sp: &SampledPlant, x: &[f64]) -> Result<Vec<f64>> {
    u_eq(sp, EqLaw::Implicit, x)
}

pub fn u_eq_midpoint(sp: &SampledPlant, x: &[f64]) -> Result<Vec<f64>> {
    u_eq(sp, EqLaw::Midpoint, x)
}

pub fn u_eq_midpoint_mean(sp: &SampledPlant, x: &[f64]) -> Result<Vec<f64>> {
    u_eq(sp, EqLaw::MidpointMean, x)
}

pub fn u_eq_exact(sp: &SampledPlant, x: &[f64]) -> Result<Vec<f64>> {
    u_eq(sp, EqLaw::Exact, x)
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn u_s_explicit(sp: &SampledPlant, sigma: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sp, sigma)?;
    let a = sp.alpha();
    Ok(sigma.iter().map(|&s| -a * sgn(s)).collect())
}

/// `(ū^s_k, σ̃_{k+1})` from the box AVI with `M = CB*`, `q = σ_k`.
pub fn u_s_implicit(sp: &SampledPlant, sigma: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sigma(sp, sigma)?;
    let problem = BoxAvi { m: sp.cb_star.clone(), q: sigma.to_vec(), alpha: sp.alpha() };
    let sol = if sp.p() == 1 {
        avi::solve_scalar(&problem)?
    } else if sp.cb_star_is_p_matrix() {
        avi::solve_certified(&problem)?
    } else {
        return Err(Error::NotPMatrix);
    };
    Ok((sol.z, sol.sigma_tilde))
}

pub fn u_s_saturation(sp: &SampledPlant, sigma: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_sigma(sp, sigma)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let a = sp.alpha();
    Ok(sigma.iter().map(|&s| -a * (s / epsilon).clamp(-1.0, 1.0)).collect())
}

/// Open-box test `max_i |u_i| < α`.
pub fn in_sliding_phase(u_s: &[f64], alpha: f64) -> bool {
    u_s.iter().all(|u| u.abs() < alpha)
}

pub fn discontinuous(sp: &SampledPlant, law: UsLaw, sigma: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    Ok(match law {
        UsLaw::ExplicitSign => (u_s_explicit(sp, sigma)?, None),
        UsLaw::ImplicitAvi => {
            let (u, st) = u_s_implicit(sp, sigma)?;
            (u, Some(st))
        }
        UsLaw::Saturation { epsilon } => (u_s_saturation(sp, sigma, epsilon)?, None),
        UsLaw::Off => {
            check_sigma(sp, sigma)?;
            (vec![0.0; sp.p()], None)
        }
    })
}

/// Both control components at state `x`.
pub fn control_step(sp: &SampledPlant, eq: &EqController, us: UsLaw, x: &[f64]) -> Result<ControlStep> {
    check_state(sp, x)?;
    let sigma = sp.plant.sigma(x);
    let u_eq = eq.apply(x);
    let (u_s, sigma_tilde_next) = discontinuous(sp, us, &sigma)?;
    let in_sliding_phase = in_sliding_phase(&u_s, sp.alpha());
    Ok(ControlStep { u_eq, u_s, sigma_tilde_next, in_sliding_phase })
}
