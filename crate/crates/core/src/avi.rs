//! Box-constrained affine variational inequalities
//! `0 ∈ q + Mz + N_{[−α,α]^p}(z)`, the implicit discontinuous input.

use crate::error::{Error, Result};
use crate::linops::{self, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxAvi {
    pub m: Mat,
    pub q: Vec<f64>,
    pub alpha: f64,
}

impl BoxAvi {
    pub fn new(m: Mat, q: Vec<f64>, alpha: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("BoxAvi::new", "square M", format!("{}x{}", m.rows(), m.cols())));
        }
        if q.len() != m.rows() {
            return Err(Error::dim("BoxAvi::new", m.rows(), q.len()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain("alpha must be positive".into()));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("AVI offset q"));
        }
        Ok(BoxAvi { m, q, alpha })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `q + Mz`
    pub fn affine(&self, z: &[f64]) -> Vec<f64> {
        let mz = self.m.matvec_unchecked(z);
        self.q.iter().zip(mz).map(|(a, b)| a + b).collect()
    }

    fn scale(&self) -> f64 {
        1f64.max(linops::vec::norm_inf(&self.q)).max(self.alpha * self.m.norm_inf())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AviSolution {
    pub z: Vec<f64>,
    /// Natural-map gap `max_i |z_i − clamp(z_i − (q + Mz)_i, −α, α)|`.
    pub residual: f64,
    /// `q + Mz`, with coordinates strictly inside the box set to exactly 0.
    pub sigma_tilde: Vec<f64>,
    pub unique: bool,
}

pub fn natural_residual(avi: &BoxAvi, z: &[f64]) -> f64 {
    let w = avi.affine(z);
    z.iter()
        .zip(&w)
        .map(|(&zi, &wi)| (zi - (zi - wi).clamp(-avi.alpha, avi.alpha)).abs())
        .fold(0.0, f64::max)
}

/// Scalar case: `z = −clamp(q/m, −α, α)`.
pub fn solve_scalar(avi: &BoxAvi) -> Result<AviSolution> {
    if avi.dim() != 1 {
        return Err(Error::dim("solve_scalar", 1, avi.dim()));
    }
    let m = avi.m[(0, 0)];
    if !(m > 0.0) {
        return Err(Error::NotPMatrix);
    }
    let q = avi.q[0];
    let r = q / m;
    let (z, st) = if r.abs() < avi.alpha {
        (-r, 0.0)
    } else {
        let z = -avi.alpha * r.signum();
        (z, q + m * z)
    };
    let z = vec![z];
    Ok(AviSolution { residual: natural_residual(avi, &z), z, sigma_tilde: vec![st], unique: true })
}

/// Enumeration cap; larger problems use projected Gauss-Seidel.
pub const ENUMERATION_MAX_DIM: usize = 8;
pub const PGS_TOL: f64 = 1e-12;
pub const PGS_MAX_SWEEPS: usize = 100_000;

/// Solves after certifying that M is a P-matrix.
pub fn solve_box_avi(avi: &BoxAvi) -> Result<AviSolution> {
    let p = avi.dim();
    let certified = if p <= linops::P_MATRIX_MAX_DIM {
        linops::is_p_matrix(&avi.m)?
    } else {
        linops::spectral_bounds(&avi.m)?.min_sym_eig > 0.0
    };
    if !certified {
        return Err(Error::NotPMatrix);
    }
    solve_certified(avi)
}

/// Solves assuming the caller has already certified M as a P-matrix.
pub fn solve_certified(avi: &BoxAvi) -> Result<AviSolution> {
    match avi.dim() {
        1 => solve_scalar(avi),
        p if p <= ENUMERATION_MAX_DIM => enumerate(avi),
        _ => projected_gauss_seidel(avi),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Lower,
    Interior,
    Upper,
}

const STATUS_ORDER: [Status; 3] = [Status::Lower, Status::Interior, Status::Upper];

fn enumerate(avi: &BoxAvi) -> Result<AviSolution> {
    let p = avi.dim();
    let alpha = avi.alpha;
    let tol = 1e-12 * avi.scale();
    let mut status = vec![Status::Lower; p];
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        let mut c = code;
        for i in (0..p).rev() {
            status[i] = STATUS_ORDER[c % 3];
            c /= 3;
        }
        let Some(z) = candidate(avi, &status) else { continue };
        let w = avi.affine(&z);
        let consistent = status.iter().zip(z.iter().zip(&w)).all(|(s, (&zi, &wi))| match s {
            Status::Interior => zi.abs() <= alpha + tol,
            Status::Lower => wi >= -tol,
            Status::Upper => wi <= tol,
        });
        if !consistent {
            continue;
        }
        let z: Vec<f64> = z.iter().map(|v| v.clamp(-alpha, alpha)).collect();
        let w = avi.affine(&z);
        let sigma_tilde = status
            .iter()
            .zip(&w)
            .map(|(s, &wi)| if *s == Status::Interior { 0.0 } else { wi })
            .collect();
        return Ok(AviSolution { residual: natural_residual(avi, &z), z, sigma_tilde, unique: true });
    }
    Err(Error::NotPMatrix)
}

// z for a fixed status pattern, or None if the interior block is singular.
fn candidate(avi: &BoxAvi, status: &[Status]) -> Option<Vec<f64>> {
    let p = avi.dim();
    let mut z = vec![0.0; p];
    let mut interior = Vec::with_capacity(p);
    for (i, s) in status.iter().enumerate() {
        match s {
            Status::Lower => z[i] = -avi.alpha,
            Status::Upper => z[i] = avi.alpha,
            Status::Interior => interior.push(i),
        }
    }
    if interior.is_empty() {
        return Some(z);
    }
    let k = interior.len();
    let mii = avi.m.principal_submatrix(&interior);
    let rhs: Vec<f64> = interior
        .iter()
        .map(|&i| {
            let fixed: f64 = (0..p)
                .filter(|j| status[*j] != Status::Interior)
                .map(|j| avi.m[(i, j)] * z[j])
                .sum();
            -(avi.q[i] + fixed)
        })
        .collect();
    let lu = linops::Lu::factor(&mii).ok()?;
    if lu.is_singular() {
        return None;
    }
    let mut zi = lu.solve_vec(&rhs);
    // one step of iterative refinement
    let r: Vec<f64> = (0..k)
        .map(|a| rhs[a] - (0..k).map(|b| mii[(a, b)] * zi[b]).sum::<f64>())
        .collect();
    let d = lu.solve_vec(&r);
    for (v, dv) in zi.iter_mut().zip(d) {
        *v += dv;
    }
    for (a, &i) in interior.iter().enumerate() {
        z[i] = zi[a];
    }
    Some(z)
}

fn projected_gauss_seidel(avi: &BoxAvi) -> Result<AviSolution> {
    let p = avi.dim();
    let alpha = avi.alpha;
    if (0..p).any(|i| !(avi.m[(i, i)] > 0.0)) {
        return Err(Error::NotPMatrix);
    }
    let tol = PGS_TOL * avi.scale();
    let mut z = vec![0.0; p];
    let mut residual = natural_residual(avi, &z);
    for _ in 0..PGS_MAX_SWEEPS {
        if residual <= tol {
            break;
        }
        for i in 0..p {
            let wi = avi.q[i] + (0..p).map(|j| avi.m[(i, j)] * z[j]).sum::<f64>();
            z[i] = (z[i] - wi / avi.m[(i, i)]).clamp(-alpha, alpha);
        }
        residual = natural_residual(avi, &z);
    }
    if residual > tol {
        return Err(Error::IterationLimit { iterations: PGS_MAX_SWEEPS, residual });
    }
    let w = avi.affine(&z);
    let sigma_tilde = z
        .iter()
        .zip(&w)
        .map(|(&zi, &wi)| if zi.abs() < alpha { 0.0 } else { wi })
        .collect();
    Ok(AviSolution { z, residual, sigma_tilde, unique: true })
}

/// Checks `(y − z)ᵀ(q + Mz) ≥ −tol` at the 2p box-face candidates and the
/// sign consistency `z ∈ −α·Sgn(q + Mz)` coordinatewise.
pub fn verify_inclusion(avi: &BoxAvi, z: &[f64], tol: f64) -> bool {
    if z.len() != avi.dim() || z.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let alpha = avi.alpha;
    if z.iter().any(|v| v.abs() > alpha + tol) {
        return false;
    }
    let w = avi.affine(z);
    for (&zi, &wi) in z.iter().zip(&w) {
        for y in [-alpha, alpha] {
            if (y - zi) * wi < -tol {
                return false;
            }
        }
        let ok = if wi > tol {
            (zi + alpha).abs() <= tol
        } else if wi < -tol {
            (zi - alpha).abs() <= tol
        } else {
            true
        };
        if !ok {
            return false;
        }
    }
    true
}
