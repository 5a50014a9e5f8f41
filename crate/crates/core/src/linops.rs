//! Small dense real matrices: exponentials, the ZOH integral, projectors,
//! symmetric spectra and P-matrix certification.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::discretize::Plant;
use crate::error::{Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("Mat::new", "rows, cols >= 1", format!("{rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("Mat::new", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dim("Mat::from_rows", "equal row lengths", "ragged rows"));
        }
        Mat::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn column(v: &[f64]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn row(v: &[f64]) -> Self {
        Mat { rows: 1, cols: v.len(), data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("inner {}", self.cols),
                format!("inner {}", other.rows),
            ));
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dim("matvec", self.cols, v.len()));
        }
        Ok(self.matvec_unchecked(v))
    }

    pub(crate) fn matvec_unchecked(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row_slice(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                op,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row_slice(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// (M + Mᵀ)/2
    pub fn sym_part(&self) -> Result<Mat> {
        require_square(self, "sym_part")?;
        let t = self.transpose();
        Ok(self.add(&t)?.scale(0.5))
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut out = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Mat) {
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    pub fn principal_submatrix(&self, idx: &[usize]) -> Mat {
        let k = idx.len();
        let mut out = Mat::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:?}", self[(i, j)])?;
            }
        }
        Ok(())
    }
}

fn require_square(m: &Mat, op: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(op, "square matrix", format!("{}x{}", m.rows, m.cols)));
    }
    Ok(())
}

pub mod vec {
    //! Plain slice helpers for state and input vectors.

    pub fn norm_inf(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm_1(v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    pub fn norm_2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
        a.iter().map(|x| x * s).collect()
    }
}

/// Partial-pivot LU factorisation `P M = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    min_pivot: f64,
    scale: f64,
}

impl Lu {
    /// Factorises without a singularity check; zero pivots are left in place.
    pub fn factor(m: &Mat) -> Result<Lu> {
        require_square(m, "lu")?;
        let n = m.rows;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            min_pivot = min_pivot.min(best);
            let piv = lu[k * n + k];
            if piv == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / piv;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm, sign, min_pivot, scale: m.max_abs() })
    }

    /// True when some pivot falls below 1e-12 times the largest input entry.
    pub fn is_singular(&self) -> bool {
        !(self.min_pivot >= 1e-12 * self.scale) || self.scale == 0.0
    }

    pub fn det(&self) -> f64 {
        (0..self.n).map(|i| self.lu[i * self.n + i]).product::<f64>() * self.sign
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let mut out = Mat::zeros(b.rows, b.cols);
        let mut col = vec![0.0; b.rows];
        for j in 0..b.cols {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// LU with the singularity threshold applied.
pub fn lu(m: &Mat, what: &'static str) -> Result<Lu> {
    let f = Lu::factor(m)?;
    if f.is_singular() {
        return Err(Error::Singular(what));
    }
    Ok(f)
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    let f = lu(m, "matrix")?;
    Ok(f.solve_mat(&Mat::identity(m.rows)))
}

pub fn solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.rows {
        return Err(Error::dim("solve", m.rows, b.len()));
    }
    Ok(lu(m, "matrix")?.solve_vec(b))
}

pub fn det(m: &Mat) -> Result<f64> {
    Ok(Lu::factor(m)?.det())
}

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// e^{Mt} by scaling and squaring with Padé approximants up to degree 13.
pub fn expm(m: &Mat, t: f64) -> Result<Mat> {
    require_square(m, "expm")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time argument"));
    }
    let a = m.scale(t);
    let n = a.rows;
    let norm = a.norm_1();
    let id = Mat::identity(n);
    if norm == 0.0 {
        return Ok(id);
    }
    let a2 = a.mul_unchecked(&a);
    let low: [&[f64]; 4] = [&B3, &B5, &B7, &B9];
    for (deg, b) in low.iter().enumerate() {
        if norm <= THETA[deg] {
            let mut powers = vec![id.clone(), a2.clone()];
            while powers.len() < b.len() / 2 {
                let next = powers.last().unwrap().mul_unchecked(&a2);
                powers.push(next);
            }
            let mut u = Mat::zeros(n, n);
            let mut v = Mat::zeros(n, n);
            for (k, p) in powers.iter().enumerate() {
                u = u.add(&p.scale(b[2 * k + 1]))?;
                v = v.add(&p.scale(b[2 * k]))?;
            }
            let u = a.mul_unchecked(&u);
            return pade_ratio(&u, &v);
        }
    }
    let s = ((norm / THETA[4]).log2().ceil()).max(0.0) as i32;
    let a = a.scale(2f64.powi(-s));
    let a2 = a.mul_unchecked(&a);
    let a4 = a2.mul_unchecked(&a2);
    let a6 = a4.mul_unchecked(&a2);
    let b = &B13;
    let inner_u = a6
        .scale(b[13])
        .add(&a4.scale(b[11]))?
        .add(&a2.scale(b[9]))?;
    let u = a6
        .mul_unchecked(&inner_u)
        .add(&a6.scale(b[7]))?
        .add(&a4.scale(b[5]))?
        .add(&a2.scale(b[3]))?
        .add(&id.scale(b[1]))?;
    let u = a.mul_unchecked(&u);
    let inner_v = a6
        .scale(b[12])
        .add(&a4.scale(b[10]))?
        .add(&a2.scale(b[8]))?;
    let v = a6
        .mul_unchecked(&inner_v)
        .add(&a6.scale(b[6]))?
        .add(&a4.scale(b[4]))?
        .add(&a2.scale(b[2]))?
        .add(&id.scale(b[0]))?;
    let mut r = pade_ratio(&u, &v)?;
    for _ in 0..s {
        r = r.mul_unchecked(&r);
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("expm result"));
    }
    Ok(r)
}

fn pade_ratio(u: &Mat, v: &Mat) -> Result<Mat> {
    let den = v.sub(u)?;
    let num = v.add(u)?;
    Ok(lu(&den, "Padé denominator")?.solve_mat(&num))
}

/// Ψ = ∫_0^h e^{As} ds, read off the exponential of [[A, I], [0, 0]]·h.
pub fn psi(a: &Mat, h: f64) -> Result<Mat> {
    require_square(a, "psi")?;
    if !(h > 0.0) {
        return Err(Error::Domain("h must be positive".into()));
    }
    let n = a.rows;
    let mut aug = Mat::zeros(2 * n, 2 * n);
    aug.set_block(0, 0, a);
    aug.set_block(0, n, &Mat::identity(n));
    let e = expm(&aug, h)?;
    Ok(e.block(0, n, n, n))
}

/// Truncated series Σ A^l h^{l+1}/(l+1)!, stopping once a term is below 1e-16
/// relative to the partial sum or after 60 terms.
pub fn psi_series(a: &Mat, h: f64) -> Result<Mat> {
    require_square(a, "psi_series")?;
    if !(h > 0.0) {
        return Err(Error::Domain("h must be positive".into()));
    }
    let n = a.rows;
    let mut term = Mat::identity(n).scale(h);
    let mut sum = term.clone();
    for l in 1..60 {
        term = a.mul_unchecked(&term).scale(h / (l as f64 + 1.0));
        sum = sum.add(&term)?;
        if term.max_abs() < 1e-16 * sum.max_abs() {
            break;
        }
    }
    Ok(sum)
}

/// Π = I − B(CB)^{-1}C
pub fn projector_pi(plant: &Plant) -> Result<Mat> {
    let cb = plant.c().mul_unchecked(plant.b());
    let f = lu(&cb, "CB")?;
    let n = plant.n();
    let correction = plant.b().mul_unchecked(&f.solve_mat(plant.c()));
    Mat::identity(n).sub(&correction)
}

/// Φ(t) = e^{ΠAt}, the transition matrix of the projected dynamics.
pub fn state_transition_phi(plant: &Plant, t: f64) -> Result<Mat> {
    if !(t >= 0.0) {
        return Err(Error::Domain("t must be nonnegative".into()));
    }
    let pa = projector_pi(plant)?.mul_unchecked(plant.a());
    expm(&pa, t)
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(s: &Mat) -> Result<Vec<f64>> {
    require_square(s, "symmetric_eigenvalues")?;
    let n = s.rows;
    let mut a = s.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    diag += a[(i, i)] * a[(i, i)];
                } else {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off == 0.0 || off.sqrt() < 1e-13 * diag.sqrt() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub min_sym_eig: f64,
    pub max_sym_eig: f64,
    pub spectral_norm: f64,
}

pub fn spectral_bounds(m: &Mat) -> Result<SpectralBounds> {
    let ev = symmetric_eigenvalues(&m.sym_part()?)?;
    Ok(SpectralBounds {
        min_sym_eig: ev[0],
        max_sym_eig: ev[ev.len() - 1],
        spectral_norm: spectral_norm(m)?,
    })
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> Result<f64> {
    let mtm = m.transpose().mul_unchecked(m);
    let ev = symmetric_eigenvalues(&mtm)?;
    Ok(ev[ev.len() - 1].max(0.0).sqrt())
}

pub const P_MATRIX_MAX_DIM: usize = 12;

/// Every principal minor strictly positive.
pub fn is_p_matrix(m: &Mat) -> Result<bool> {
    require_square(m, "is_p_matrix")?;
    let n = m.rows;
    if n > P_MATRIX_MAX_DIM {
        return Err(Error::Capability(format!(
            "P-matrix enumeration supports n <= {P_MATRIX_MAX_DIM}, got {n}"
        )));
    }
    let mut idx = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        idx.clear();
        idx.extend((0..n).filter(|i| mask & (1 << i) != 0));
        let sub = m.principal_submatrix(&idx);
        let hadamard: f64 = (0..idx.len())
            .map(|i| sub.row_slice(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .product();
        let d = Lu::factor(&sub)?.det();
        if !(d > 1e-14 * hadamard) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn bench_a() -> Mat {
        Mat::from_rows(&[&[0.0, 1.0], &[19.0, -2.0]]).unwrap()
    }

    fn bench_plant() -> Plant {
        Plant::new(
            bench_a(),
            Mat::column(&[0.0, 1.0]),
            Mat::row(&[1.0, 1.0]),
            1.0,
        )
        .unwrap()
    }

    fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol * (1.0 + b.max_abs())
    }

    // e^{At} for a 2x2 with distinct real eigenvalues via spectral projectors.
    fn expm_2x2_oracle(a: &Mat, t: f64) -> Mat {
        let tr = a[(0, 0)] + a[(1, 1)];
        let dt = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = (tr * tr / 4.0 - dt).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = tr / 2.0 - disc;
        let id = Mat::identity(2);
        let p1 = a.sub(&id.scale(l2)).unwrap().scale(1.0 / (l1 - l2));
        let p2 = a.sub(&id.scale(l1)).unwrap().scale(1.0 / (l2 - l1));
        p1.scale((l1 * t).exp()).add(&p2.scale((l2 * t).exp())).unwrap()
    }

    fn taylor(a: &Mat, t: f64) -> Mat {
        let n = a.rows();
        let mut term = Mat::identity(n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.matmul(a).unwrap().scale(t / k as f64);
            sum = sum.add(&term).unwrap();
        }
        sum
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(Mat::new(0, 1, vec![]).is_err());
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Mat::from_rows(&[&[1.0, 2.0], &[3.0]]).is_err());
    }

    #[test]
    fn matmul_shapes() {
        let a = Mat::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let b = Mat::column(&[1.0, 1.0, 1.0]);
        assert_eq!(a.matmul(&b).unwrap()[(0, 0)], 6.0);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Mat::zeros(2, 2);
        assert_eq!(expm(&z, 0.3).unwrap(), Mat::identity(2));
    }

    #[test]
    fn expm_diagonal() {
        let d = Mat::diag(&[1.0, -2.0]);
        let e = expm(&d, 1.0).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-15 * 3.0);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-16 * 2.0);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_rejects_non_square() {
        let m = Mat::zeros(2, 3);
        assert!(matches!(expm(&m, 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn expm_matches_spectral_oracle_across_scales() {
        let a = bench_a();
        for &t in &[1e-6, 1e-3, 0.01, 0.1, 0.3, 1.0, 3.0] {
            let got = expm(&a, t).unwrap();
            let want = expm_2x2_oracle(&a, t);
            assert!(close(&got, &want, 1e-13), "t={t}");
        }
    }

    #[test]
    fn expm_matches_taylor_for_small_norm() {
        let a = Mat::from_rows(&[&[0.1, -0.2, 0.05], &[0.3, 0.0, 0.1], &[-0.1, 0.2, -0.3]]).unwrap();
        for &t in &[0.01, 0.1, 0.5, 1.0] {
            assert!(close(&expm(&a, t).unwrap(), &taylor(&a, t), 1e-14));
        }
    }

    #[test]
    fn benchmark_exponential_eigenvalues() {
        let h = 0.3;
        let e = expm(&bench_a(), h).unwrap();
        let tr = e[(0, 0)] + e[(1, 1)];
        let dt = e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)];
        let disc = (tr * tr / 4.0 - dt).sqrt();
        let (mu1, mu2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        assert!((mu1.ln() / h - 3.47).abs() < 0.01);
        assert!((mu2.ln() / h + 5.47).abs() < 0.01);
    }

    #[test]
    fn psi_of_zero_is_h_identity() {
        let p = psi(&Mat::zeros(3, 3), 0.25).unwrap();
        assert!(close(&p, &Mat::identity(3).scale(0.25), 1e-16));
    }

    #[test]
    fn psi_rejects_nonpositive_h() {
        assert!(matches!(psi(&bench_a(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(psi(&bench_a(), -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_calculus_identity() {
        let a = bench_a();
        for &h in &[1e-4, 0.03, 0.3, 1.0] {
            let lhs = a.matmul(&psi(&a, h).unwrap()).unwrap().add(&Mat::identity(2)).unwrap();
            assert!(close(&lhs, &expm(&a, h).unwrap(), 1e-12), "h={h}");
        }
    }

    #[test]
    fn psi_matches_gauss_legendre_oracle() {
        let a = bench_a();
        let h = 0.3;
        let rule = GaussLegendre::new(64);
        let mut want = Mat::zeros(2, 2);
        for (s, w) in rule.mapped(0.0, h) {
            want = want.add(&expm_2x2_oracle(&a, s).scale(w)).unwrap();
        }
        let got = psi(&a, h).unwrap();
        assert!(got.sub(&want).unwrap().max_abs() <= 1e-10 * want.max_abs());
    }

    #[test]
    fn psi_series_agrees_with_block_form() {
        let a = bench_a();
        for &h in &[1e-3, 0.1, 0.3] {
            assert!(close(&psi_series(&a, h).unwrap(), &psi(&a, h).unwrap(), 1e-13));
        }
    }

    #[test]
    fn projector_on_benchmark() {
        let plant = bench_plant();
        let pi = projector_pi(&plant).unwrap();
        let want = Mat::from_rows(&[&[1.0, 0.0], &[-1.0, 0.0]]).unwrap();
        assert_eq!(pi, want);
        let pa = pi.matmul(plant.a()).unwrap();
        assert_eq!(pa, Mat::from_rows(&[&[0.0, 1.0], &[0.0, -1.0]]).unwrap());
        let pi2 = pi.matmul(&pi).unwrap();
        assert!(pi2.sub(&pi).unwrap().max_abs() <= 1e-12);
        assert!(plant.c().matmul(&pi).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn projector_vanishes_for_square_identity_io() {
        let plant = Plant::new(bench_a(), Mat::identity(2), Mat::identity(2), 1.0).unwrap();
        assert!(projector_pi(&plant).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn phi_properties() {
        let plant = bench_plant();
        assert_eq!(state_transition_phi(&plant, 0.0).unwrap(), Mat::identity(2));
        let phi = state_transition_phi(&plant, 1.7).unwrap();
        let cphi = plant.c().matmul(&phi).unwrap();
        assert!(cphi.sub(plant.c()).unwrap().max_abs() < 1e-10);
        assert!(state_transition_phi(&plant, -1.0).is_err());
    }

    #[test]
    fn phi_long_time_limit() {
        // ΠA = [[0,1],[0,-1]] has eigenvalues {0,-1}; e^{ΠAt} -> [[1,1],[0,0]].
        let phi = state_transition_phi(&bench_plant(), 40.0).unwrap();
        let limit = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(phi.sub(&limit).unwrap().max_abs() < 1e-12);
        assert!(det(&phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lu_solve_and_inverse() {
        let m = Mat::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]).unwrap();
        let inv = inverse(&m).unwrap();
        assert!(close(&m.matmul(&inv).unwrap(), &Mat::identity(3), 1e-15));
        let x = solve(&m, &[3.0, 2.0, 4.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((det(&m).unwrap() - (-5.0)).abs() < 1e-14);
    }

    #[test]
    fn lu_threshold_flags_singular() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(inverse(&m), Err(Error::Singular(_))));
        let m = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1e-13]]).unwrap();
        assert!(inverse(&m).is_err());
        let m = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1e-11]]).unwrap();
        assert!(inverse(&m).is_ok());
    }

    #[test]
    fn jacobi_diag_and_2x2() {
        let ev = symmetric_eigenvalues(&Mat::diag(&[4.0, 1.0])).unwrap();
        assert_eq!(ev, vec![1.0, 4.0]);
        let s = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]).unwrap();
        let ev = symmetric_eigenvalues(&s).unwrap();
        let r = 5f64.sqrt() / 2.0;
        assert!((ev[0] - (2.5 - r)).abs() < 1e-14);
        assert!((ev[1] - (2.5 + r)).abs() < 1e-14);
    }

    #[test]
    fn jacobi_trace_and_det_preserved() {
        let s = Mat::from_rows(&[
            &[4.0, 1.0, -2.0, 0.5],
            &[1.0, 3.0, 0.0, 1.0],
            &[-2.0, 0.0, 5.0, -1.0],
            &[0.5, 1.0, -1.0, 2.0],
        ])
        .unwrap();
        let ev = symmetric_eigenvalues(&s).unwrap();
        let tr: f64 = (0..4).map(|i| s[(i, i)]).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
        assert!((ev.iter().product::<f64>() - det(&s).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn spectral_bounds_diag() {
        let sb = spectral_bounds(&Mat::diag(&[1.0, 4.0])).unwrap();
        assert_eq!(sb.min_sym_eig, 1.0);
        assert_eq!(sb.max_sym_eig, 4.0);
        assert!((sb.spectral_norm - 4.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_bounds_transpose_invariant() {
        let m = Mat::from_rows(&[&[1.0, 5.0], &[-2.0, 3.0]]).unwrap();
        let a = spectral_bounds(&m).unwrap();
        let b = spectral_bounds(&m.transpose()).unwrap();
        assert!((a.min_sym_eig - b.min_sym_eig).abs() < 1e-15);
        assert!((a.max_sym_eig - b.max_sym_eig).abs() < 1e-15);
        assert!((a.spectral_norm - b.spectral_norm).abs() < 1e-13);
    }

    #[test]
    fn p_matrix_examples() {
        assert!(is_p_matrix(&Mat::identity(3)).unwrap());
        assert!(!is_p_matrix(&Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()).unwrap());
        // Positive definite non-symmetric.
        let m = Mat::from_rows(&[&[1.0, 3.0], &[-3.0, 1.0]]).unwrap();
        assert!(is_p_matrix(&m).unwrap());
        // Triangular with positive diagonal is P without being PD.
        let m = Mat::from_rows(&[&[1.0, 0.0], &[10.0, 1.0]]).unwrap();
        assert!(spectral_bounds(&m).unwrap().min_sym_eig < 0.0);
        assert!(is_p_matrix(&m).unwrap());
        // Negative diagonal entry.
        assert!(!is_p_matrix(&Mat::diag(&[1.0, -1.0])).unwrap());
        assert!(matches!(is_p_matrix(&Mat::identity(13)), Err(Error::Capability(_))));
    }
}
