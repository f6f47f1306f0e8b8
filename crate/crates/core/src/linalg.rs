//! Dense linear-algebra kernels shared by every stage of the pipeline.
//!
//! Everything here works on `nalgebra` dynamic matrices. The discretized
//! plants are badly scaled (entries of `A` span more than ten orders of
//! magnitude for the beam model), so eigenvalue and resolvent routines first
//! apply an exact power-of-two diagonal balancing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type Vector = DVector<f64>;
pub type CVector = DVector<Complex64>;

/// Reciprocal condition numbers below this are treated as singular.
pub const RCOND_MIN: f64 = 1e-13;

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &CMat) -> Mat {
    m.map(|v| v.re)
}

pub fn max_abs_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
}

pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Hermitian part `(M + M^*)/2` of a complex matrix.
pub fn herm_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = sym_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_sym_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_sym_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// Smallest eigenvalue of the Hermitian part of a complex matrix.
///
/// Uses the real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum
/// is the Hermitian spectrum with every value doubled.
pub fn min_herm_eig(m: &CMat) -> f64 {
    let h = herm_part(m);
    let n = h.nrows();
    let mut emb = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            emb[(i, j)] = v.re;
            emb[(i + n, j + n)] = v.re;
            emb[(i, j + n)] = -v.im;
            emb[(i + n, j)] = v.im;
        }
    }
    min_sym_eig(&emb)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn complex_singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

fn rank_from(sv: &[f64], tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Numerical rank with threshold `tol * sigma_max`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    rank_from(&singular_values(m), tol)
}

pub fn complex_rank(m: &CMat, tol: f64) -> usize {
    rank_from(&complex_singular_values(m), tol)
}

/// Orthonormal basis (as columns) of the kernel of `m`.
///
/// Wide matrices are padded with zero rows so the SVD returns a complete set
/// of right singular vectors. An empty row set yields the identity.
pub fn null_space(m: &Mat, ncols: usize, tol: f64) -> Mat {
    if m.nrows() == 0 {
        return Mat::identity(ncols, ncols);
    }
    let rows = m.nrows().max(ncols);
    let mut padded = Mat::zeros(rows, ncols);
    padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cols: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == 0.0 || s <= tol * smax)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(ncols, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Diagonal similarity `D` (power-of-two entries) such that `D^-1 A D` has
/// comparable row and column norms.
pub fn balance(a: &Mat) -> (Mat, Vector) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut b = a.clone();
    let mut d = Vector::from_element(n, 1.0);
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 200 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c >= g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, d)
}

/// Eigenvalues of a general real matrix (balanced real Schur form).
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("A", "matrix has non-finite entries"));
    }
    let (ab, _) = balance(a);
    let schur = ab
        .try_schur(f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenFailure(n))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn complex_schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    let (q, t) = m
        .clone()
        .try_schur(f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenFailure(n))?
        .unpack();
    Ok((q, t))
}

/// Solves `A X + X B = C` by complex Schur reduction of both coefficients.
pub fn solve_sylvester(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat> {
    let (m, n) = (a.nrows(), b.nrows());
    if c.nrows() != m || c.ncols() != n {
        return Err(Error::dim(
            "sylvester rhs",
            format!("{m}x{n}"),
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    if m == 0 || n == 0 {
        return Ok(CMat::zeros(m, n));
    }
    let (qa, ta) = complex_schur(a)?;
    let (qb, tb) = complex_schur(b)?;
    let f = qa.adjoint() * c * &qb;
    let scale = ta.norm() + tb.norm();
    let mut y = CMat::zeros(m, n);
    for j in 0..n {
        let mut rhs = f.column(j).into_owned();
        for k in 0..j {
            let t = tb[(k, j)];
            if t != Complex64::new(0.0, 0.0) {
                rhs -= y.column(k) * t;
            }
        }
        let shift = tb[(j, j)];
        // back substitution with (Ta + shift I), upper triangular
        for i in (0..m).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..m {
                acc -= ta[(i, l)] * y[(l, j)];
            }
            let diag = ta[(i, i)] + shift;
            if diag.norm() <= 1e3 * f64::EPSILON * scale.max(1.0) {
                return Err(Error::Singular(format!(
                    "Sylvester equation (eigenvalues {} and {} sum to ~0)",
                    ta[(i, i)],
                    shift
                )));
            }
            y[(i, j)] = acc / diag;
        }
    }
    Ok(&qa * y * qb.adjoint())
}

/// Solves the Lyapunov equation `A^T X + X A = -Q` for real `A`, `Q`.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let ac = to_complex(a);
    let x = solve_sylvester(&ac.transpose(), &ac, &to_complex(&(-q)))?;
    Ok(sym_part(&real_part(&x)))
}

/// Relative residual of `A^T X + X A + Q = 0`.
pub fn lyapunov_residual(a: &Mat, x: &Mat, q: &Mat) -> f64 {
    let r = a.transpose() * x + x * a + q;
    r.norm() / (2.0 * a.norm() * x.norm() + q.norm()).max(f64::MIN_POSITIVE)
}

/// Reciprocal 1-norm condition number of a square complex matrix.
pub fn rcond(m: &CMat) -> f64 {
    let inv = match m.clone().try_inverse() {
        Some(inv) => inv,
        None => return 0.0,
    };
    let n1 = |x: &CMat| {
        (0..x.ncols())
            .map(|j| x.column(j).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let d = n1(m) * n1(&inv);
    if d.is_finite() && d > 0.0 {
        1.0 / d
    } else {
        0.0
    }
}

/// Resolvent solver `(λI - A)^-1` working on the balanced form of `A`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    balanced: CMat,
    scale: Vector,
}

impl Resolvent {
    pub fn new(a: &Mat) -> Self {
        let (ab, d) = balance(a);
        Resolvent {
            balanced: to_complex(&ab),
            scale: d,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Returns `(λI - A)^-1 rhs`, failing when the shifted matrix is
    /// numerically singular.
    pub fn solve(&self, lambda: Complex64, rhs: &CMat) -> Result<CMat> {
        let n = self.dim();
        if rhs.nrows() != n {
            return Err(Error::dim("resolvent rhs", n, rhs.nrows()));
        }
        let mut shifted = -self.balanced.clone();
        for i in 0..n {
            shifted[(i, i)] += lambda;
        }
        let rc = rcond(&shifted);
        if rc < RCOND_MIN {
            return Err(Error::ResolventSingular { lambda, rcond: rc });
        }
        let mut scaled = rhs.clone();
        for i in 0..n {
            scaled.row_mut(i).scale_mut(1.0 / self.scale[i]);
        }
        let mut x = shifted
            .lu()
            .solve(&scaled)
            .ok_or(Error::ResolventSingular { lambda, rcond: rc })?;
        for i in 0..n {
            x.row_mut(i).scale_mut(self.scale[i]);
        }
        Ok(x)
    }
}
