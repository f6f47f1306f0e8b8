//! Internal-model controller
//!
//! ```text
//! xc' = Jc xc + δ Bc (y_ref - y)
//! u   = δ Bc^T xc - Dc (y - y_ref)
//! ```
//!
//! with one oscillator block per regulated frequency, its complex
//! diagonalization, the rank conditions that make it an internal model, the
//! Sylvester operator `H`, and the scan over coupling gains.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::closedloop::assemble_closed_loop;
use crate::discretize::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat, Resolvent};

/// Default gain grid scanned by [`gain_sweep`].
pub const DEFAULT_DELTA_GRID: [f64; 10] =
    [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Controller data. `freqs` holds the strictly positive frequencies; the
/// zero-frequency block is controlled by `include_zero`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModelController {
    pub freqs: Vec<f64>,
    pub include_zero: bool,
    pub p: usize,
    pub jc: Mat,
    pub bc: Mat,
    pub dc: Mat,
    pub delta_c: f64,
}

impl InternalModelController {
    pub fn new(freqs: &[f64], p: usize, include_zero: bool, dc: Mat, delta_c: f64) -> Result<Self> {
        let (jc, bc) = build_internal_model(freqs, p, include_zero)?;
        if dc.shape() != (p, p) {
            return Err(Error::dim(
                "Dc",
                format!("{p}x{p}"),
                format!("{}x{}", dc.nrows(), dc.ncols()),
            ));
        }
        if (&dc - dc.transpose()).norm() > 1e-12 * dc.norm().max(1.0) {
            return Err(Error::param("Dc", "must be symmetric"));
        }
        if linalg::min_sym_eig(&dc) < -1e-12 * dc.norm().max(1.0) {
            return Err(Error::param("Dc", "must be positive semidefinite"));
        }
        if !(delta_c.is_finite() && delta_c >= 0.0) {
            return Err(Error::param(
                "delta_c",
                format!("must be nonnegative, got {delta_c}"),
            ));
        }
        Ok(InternalModelController {
            freqs: freqs.to_vec(),
            include_zero,
            p,
            jc,
            bc,
            dc,
            delta_c,
        })
    }

    pub fn nc(&self) -> usize {
        self.jc.nrows()
    }

    pub fn with_delta(&self, delta_c: f64) -> Self {
        InternalModelController {
            delta_c,
            ..self.clone()
        }
    }

    /// Exponents `μ` in block order: `0` (if present), `ω1, -ω1, ω2, -ω2, …`.
    pub fn exponents(&self) -> Vec<f64> {
        exponents(&self.freqs, self.include_zero)
    }
}

pub(crate) fn exponents(freqs: &[f64], include_zero: bool) -> Vec<f64> {
    let mut mu = Vec::with_capacity(2 * freqs.len() + 1);
    if include_zero {
        mu.push(0.0);
    }
    for &w in freqs {
        mu.push(w);
        mu.push(-w);
    }
    mu
}

/// Block-diagonal oscillator `Jc` and input map `Bc`.
pub fn build_internal_model(freqs: &[f64], p: usize, include_zero: bool) -> Result<(Mat, Mat)> {
    if p == 0 {
        return Err(Error::param("p", "must be positive"));
    }
    for (k, &w) in freqs.iter().enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::param(
                "freqs",
                format!("frequency {k} must be positive, got {w}"),
            ));
        }
        if k > 0 && w <= freqs[k - 1] {
            return Err(Error::param(
                "freqs",
                "must be strictly increasing without duplicates",
            ));
        }
    }
    let z = usize::from(include_zero);
    let nc = p * (2 * freqs.len() + z);
    if nc == 0 {
        return Err(Error::param("freqs", "empty internal model"));
    }
    let mut jc = Mat::zeros(nc, nc);
    let mut bc = Mat::zeros(nc, p);
    let mut off = 0;
    if include_zero {
        bc.view_mut((0, 0), (p, p)).fill_with_identity();
        off = p;
    }
    for &w in freqs {
        for i in 0..p {
            jc[(off + i, off + p + i)] = w;
            jc[(off + p + i, off + i)] = -w;
            bc[(off + i, i)] = 1.0;
        }
        off += 2 * p;
    }
    Ok((jc, bc))
}

/// Complex modal form `G1 = T^-1 Jc T`, `G2 = T^-1 Bc`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizedInternalModel {
    pub t: CMat,
    pub tinv: CMat,
    pub g1: CMat,
    pub g2: CMat,
    /// Largest deviation observed when verifying the construction.
    pub residual: f64,
}

/// Block-diagonal `T` with `T0 = I` and `T_k = [[I, I], [iI, -iI]]`.
pub fn similarity_transform(freqs: &[f64], p: usize, include_zero: bool) -> (CMat, CMat) {
    let nc = p * (2 * freqs.len() + usize::from(include_zero));
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let half = Complex64::new(0.5, 0.0);
    let mut t = CMat::zeros(nc, nc);
    let mut tinv = CMat::zeros(nc, nc);
    let mut off = 0;
    if include_zero {
        for k in 0..p {
            t[(k, k)] = one;
            tinv[(k, k)] = one;
        }
        off = p;
    }
    for _ in freqs {
        for k in 0..p {
            let (r0, r1) = (off + k, off + p + k);
            t[(r0, r0)] = one;
            t[(r0, r1)] = one;
            t[(r1, r0)] = i;
            t[(r1, r1)] = -i;
            tinv[(r0, r0)] = half;
            tinv[(r0, r1)] = -i * half;
            tinv[(r1, r0)] = half;
            tinv[(r1, r1)] = i * half;
        }
        off += 2 * p;
    }
    (t, tinv)
}

pub fn diagonalize_internal_model(
    jc: &Mat,
    bc: &Mat,
    freqs: &[f64],
    p: usize,
    include_zero: bool,
) -> Result<DiagonalizedInternalModel> {
    let (t, tinv) = similarity_transform(freqs, p, include_zero);
    let nc = t.nrows();
    if jc.shape() != (nc, nc) || bc.shape() != (nc, p) {
        return Err(Error::Structure(format!(
            "Jc/Bc of shape {:?}/{:?} do not match {} frequencies with p = {p}",
            jc.shape(),
            bc.shape(),
            freqs.len() + usize::from(include_zero)
        )));
    }
    let g1 = &tinv * linalg::to_complex(jc) * &t;
    let g2 = &tinv * linalg::to_complex(bc);

    let mut expected_g1 = CMat::zeros(nc, nc);
    let mut expected_g2 = CMat::zeros(nc, p);
    let half = Complex64::new(0.5, 0.0);
    let mut off = 0;
    if include_zero {
        for k in 0..p {
            expected_g2[(k, k)] = Complex64::new(1.0, 0.0);
        }
        off = p;
    }
    for &w in freqs {
        for k in 0..p {
            expected_g1[(off + k, off + k)] = Complex64::new(0.0, w);
            expected_g1[(off + p + k, off + p + k)] = Complex64::new(0.0, -w);
            expected_g2[(off + k, k)] = half;
            expected_g2[(off + p + k, k)] = half;
        }
        off += 2 * p;
    }
    let scale = jc.norm().max(1.0);
    let residual = [
        (&t * &tinv - CMat::identity(nc, nc)).norm(),
        (&g1 - &expected_g1).norm() / scale,
        (&g2 - &expected_g2).norm(),
        (&t * &g1 * &tinv - linalg::to_complex(jc)).norm() / scale,
        (&t * &g2 - linalg::to_complex(bc)).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if residual > 1e-12 {
        return Err(Error::Structure(format!(
            "internal model does not diagonalize to the oscillator form (residual {residual:.3e})"
        )));
    }
    Ok(DiagonalizedInternalModel {
        t,
        tinv,
        g1,
        g2,
        residual,
    })
}

/// Rank test at one exponent `iμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImConditionEntry {
    pub mu: f64,
    pub rank_shifted: usize,
    pub rank_augmented: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImConditionReport {
    pub entries: Vec<ImConditionEntry>,
    pub rank_bc: usize,
    pub kernel_ok: bool,
    pub passed: bool,
}

impl ImConditionReport {
    /// Exponents at which the range condition fails.
    pub fn failed_exponents(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| !e.ok)
            .map(|e| e.mu)
            .collect()
    }
}

impl fmt::Display for ImConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "im_conditions_passed: {}", self.passed)?;
        writeln!(f, "rank_Bc: {}", self.rank_bc)?;
        writeln!(
            f,
            "kernel_condition: {}",
            if self.kernel_ok { "ok" } else { "FAILED" }
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "range_condition[mu={}]: {} (rank shifted {}, augmented {})",
                e.mu,
                if e.ok { "ok" } else { "FAILED" },
                e.rank_shifted,
                e.rank_augmented
            )?;
        }
        Ok(())
    }
}

/// `ran(iμ - Jc) ∩ ran(Bc) = {0}` at every `μ ∈ {0?, ±ω_k}` and
/// `ker Bc = {0}`.
pub fn check_internal_model_conditions(
    jc: &Mat,
    bc: &Mat,
    freqs: &[f64],
    include_zero: bool,
) -> ImConditionReport {
    const TOL: f64 = 1e-10;
    let p = bc.ncols();
    let rank_bc = linalg::rank(bc, TOL);
    let kernel_ok = rank_bc == p;
    let jcc = linalg::to_complex(jc);
    let bcc = linalg::to_complex(bc);
    let n = jc.nrows();
    let entries: Vec<ImConditionEntry> = exponents(freqs, include_zero)
        .into_iter()
        .map(|mu| {
            let shifted = CMat::identity(n, n) * Complex64::new(0.0, mu) - &jcc;
            let rank_shifted = linalg::complex_rank(&shifted, TOL);
            let mut aug = CMat::zeros(n, n + p);
            aug.view_mut((0, 0), (n, n)).copy_from(&shifted);
            aug.view_mut((0, n), (n, p)).copy_from(&bcc);
            let rank_augmented = linalg::complex_rank(&aug, TOL);
            ImConditionEntry {
                mu,
                rank_shifted,
                rank_augmented,
                ok: rank_augmented == rank_shifted + rank_bc,
            }
        })
        .collect();
    let passed = kernel_ok && entries.iter().all(|e| e.ok);
    ImConditionReport {
        entries,
        rank_bc,
        kernel_ok,
        passed,
    }
}

/// Discrete Sylvester operator and its output image.
#[derive(Debug, Clone, PartialEq)]
pub struct HSolution {
    /// `n_x x n_c`, real up to rounding.
    pub h: CMat,
    /// `C H - D Bc^T`, so that `CH · T = -[P(iμ) …]`.
    pub ch: CMat,
    /// `P(iμ)` in block order.
    pub transfer: Vec<CMat>,
    /// `‖H Jc - A H + B Bc^T‖ / (‖H Jc‖ + ‖A H‖ + ‖B Bc^T‖)`.
    pub sylvester_residual: f64,
    /// `‖CH·T + [P(iμ) …]‖ / max(1, ‖[P(iμ) …]‖)`.
    pub transfer_residual: f64,
    pub max_imag: f64,
}

impl HSolution {
    pub fn h_real(&self) -> Mat {
        linalg::real_part(&self.h)
    }

    pub fn ch_real(&self) -> Mat {
        linalg::real_part(&self.ch)
    }
}

/// Column blocks `H_μ = -(iμ - A)^-1 B`, recombined as `[H_μ …] T^-1`.
pub fn solve_h(ss: &StateSpaceModel, ctrl: &InternalModelController) -> Result<HSolution> {
    if ss.p() != ctrl.p {
        return Err(Error::dim("controller p", ss.p(), ctrl.p));
    }
    let (nx, p, nc) = (ss.nx(), ctrl.p, ctrl.nc());
    let (t, tinv) = similarity_transform(&ctrl.freqs, p, ctrl.include_zero);
    let res = Resolvent::new(&ss.a);
    let bcx = linalg::to_complex(&ss.b);
    let ccx = linalg::to_complex(&ss.c);
    let dcx = linalg::to_complex(&ss.d);
    let mut cols = CMat::zeros(nx, nc);
    let mut transfer = Vec::new();
    let mut stacked = CMat::zeros(p, nc);
    for (k, mu) in ctrl.exponents().into_iter().enumerate() {
        let lambda = Complex64::new(0.0, mu);
        let x = res.solve(lambda, &bcx).map_err(|e| match e {
            Error::ResolventSingular { rcond, .. } => Error::ResolventSingular { lambda, rcond },
            other => other,
        })?;
        let pk = &ccx * &x + &dcx;
        cols.view_mut((0, k * p), (nx, p)).copy_from(&(-&x));
        stacked.view_mut((0, k * p), (p, p)).copy_from(&pk);
        transfer.push(pk);
    }
    let h = &cols * &tinv;
    let ch = &ccx * &h - &dcx * linalg::to_complex(&ctrl.bc.transpose());

    let ac = linalg::to_complex(&ss.a);
    let jcc = linalg::to_complex(&ctrl.jc);
    let bct = linalg::to_complex(&ctrl.bc.transpose());
    let (hj, ah, bb) = (&h * &jcc, &ac * &h, &bcx * &bct);
    let denom = hj.norm() + ah.norm() + bb.norm();
    let sylvester_residual = (&hj - &ah + &bb).norm() / denom.max(f64::MIN_POSITIVE);
    let transfer_residual = (&ch * &t + &stacked).norm() / stacked.norm().max(1.0);
    let max_imag = linalg::max_abs_imag(&h).max(linalg::max_abs_imag(&ch));
    Ok(HSolution {
        h,
        ch,
        transfer,
        sylvester_residual,
        transfer_residual,
        max_imag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub delta_c: f64,
    pub abscissa: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSweepResult {
    pub entries: Vec<SweepEntry>,
    pub recommended: f64,
    pub dc: Mat,
}

impl GainSweepResult {
    pub fn stable_deltas(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.stable)
            .map(|e| e.delta_c)
            .collect()
    }

    pub fn recommended_entry(&self) -> SweepEntry {
        *self
            .entries
            .iter()
            .find(|e| e.delta_c == self.recommended)
            .expect("recommended gain is a grid point")
    }
}

pub fn format_sweep_table(entries: &[SweepEntry]) -> String {
    let mut s = String::from("delta_c, abscissa, stable\n");
    for e in entries {
        s.push_str(&format!(
            "{:e}, {:e}, {}\n",
            e.delta_c, e.abscissa, e.stable
        ));
    }
    s
}

impl fmt::Display for GainSweepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "recommended_delta_c: {:e}", self.recommended)?;
        writeln!(
            f,
            "recommended_abscissa: {:e}",
            self.recommended_entry().abscissa
        )?;
        write!(f, "{}", format_sweep_table(&self.entries))
    }
}

/// Spectral abscissa of the closed loop for every gain of `delta_grid`.
///
/// The grid points are evaluated in parallel; the table keeps grid order.
pub fn gain_sweep(
    ss: &StateSpaceModel,
    ctrl: &InternalModelController,
    delta_grid: &[f64],
) -> Result<GainSweepResult> {
    if delta_grid.is_empty() {
        return Err(Error::param("delta_grid", "empty"));
    }
    if delta_grid.iter().any(|&d| !(d.is_finite() && d > 0.0))
        || delta_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::param(
            "delta_grid",
            "must be positive and strictly increasing",
        ));
    }
    let entries: Vec<SweepEntry> = delta_grid
        .par_iter()
        .map(|&delta_c| {
            let abscissa = assemble_closed_loop(ss, &ctrl.with_delta(delta_c))
                .and_then(|cl| linalg::spectral_abscissa(&cl.ae))
                .unwrap_or(f64::NAN);
            SweepEntry {
                delta_c,
                abscissa,
                stable: abscissa < 0.0,
            }
        })
        .collect();
    let best =
        entries
            .iter()
            .filter(|e| e.stable)
            .fold(None::<&SweepEntry>, |best, e| match best {
                Some(b) if b.abscissa < e.abscissa => Some(b),
                _ => Some(e),
            });
    match best {
        Some(b) => Ok(GainSweepResult {
            recommended: b.delta_c,
            entries,
            dc: ctrl.dc.clone(),
        }),
        None => Err(Error::NoStableGain {
            table: format_sweep_table(&entries),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_controller_matrices() {
        let (jc, bc) = build_internal_model(&[10.0, 15.0], 1, false).unwrap();
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                0.0, 10.0, 0.0, 0.0, -10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 15.0, 0.0, 0.0, -15.0,
                0.0,
            ],
        );
        assert_eq!(jc, expected);
        assert_eq!(bc, Mat::from_column_slice(4, 1, &[1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn zero_only_model() {
        let (jc, bc) = build_internal_model(&[], 1, true).unwrap();
        assert_eq!(jc, Mat::zeros(1, 1));
        assert_eq!(bc, Mat::identity(1, 1));
    }

    #[test]
    fn bad_frequency_lists() {
        assert!(build_internal_model(&[10.0, 10.0], 1, false).is_err());
        assert!(build_internal_model(&[-1.0], 1, false).is_err());
        assert!(build_internal_model(&[], 1, false).is_err());
    }

    #[test]
    fn demo_diagonal_form() {
        let (jc, bc) = build_internal_model(&[10.0, 15.0], 1, false).unwrap();
        let d = diagonalize_internal_model(&jc, &bc, &[10.0, 15.0], 1, false).unwrap();
        let diag: Vec<Complex64> = d.g1.diagonal().iter().copied().collect();
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(diag, vec![i * 10.0, -i * 10.0, i * 15.0, -i * 15.0]);
        assert!(d.g2.iter().all(|&v| v == Complex64::new(0.5, 0.0)));
    }

    #[test]
    fn block_inverse_is_exact() {
        let (t, tinv) = similarity_transform(&[3.0], 2, false);
        assert_eq!(&t * &tinv, CMat::identity(4, 4));
    }

    #[test]
    fn zero_bc_fails_kernel_condition() {
        let (jc, _) = build_internal_model(&[1.0], 1, true).unwrap();
        let rep = check_internal_model_conditions(&jc, &Mat::zeros(3, 1), &[1.0], true);
        assert!(!rep.kernel_ok);
        assert!(!rep.passed);
    }

    #[test]
    fn missing_block_fails_at_that_frequency() {
        let (jc, bc) = build_internal_model(&[10.0], 1, false).unwrap();
        let rep = check_internal_model_conditions(&jc, &bc, &[10.0, 15.0], false);
        assert_eq!(rep.failed_exponents(), vec![15.0, -15.0]);
    }

    #[test]
    fn zero_frequency_h_is_static_gain() {
        let a = Mat::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -3.0]);
        let b = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.5]);
        let ss = StateSpaceModel::from_abcd(
            a.clone(),
            b.clone(),
            c.clone(),
            Mat::zeros(1, 1),
            Mat::identity(2, 2),
        )
        .unwrap();
        let ctrl = InternalModelController::new(&[], 1, true, Mat::zeros(1, 1), 0.1).unwrap();
        let sol = solve_h(&ss, &ctrl).unwrap();
        let ainv = a.try_inverse().unwrap();
        let h = &ainv * &b;
        assert!((sol.h_real() - &h).norm() < 1e-14);
        assert!((sol.ch_real() - &c * &h).norm() < 1e-14);
        assert!(sol.sylvester_residual < 1e-14);
    }

    #[test]
    fn unstable_plant_sweep_reports_table() {
        let ss = StateSpaceModel::from_abcd(
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            -Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap();
        let ctrl = InternalModelController::new(&[1.0], 1, false, Mat::zeros(1, 1), 0.1).unwrap();
        match gain_sweep(&ss, &ctrl, &[0.1, 0.2]) {
            Err(Error::NoStableGain { table }) => assert!(table.contains("delta_c")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
