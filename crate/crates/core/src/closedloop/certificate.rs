use std::fmt;

use crate::controller::{HSolution, InternalModelController};
use crate::discretize::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Size of the logarithmic `ε_c` grid on `[1e-6, 1]`.
pub const EPS_GRID_POINTS: usize = 25;

/// Quadratic Lyapunov function
///
/// ```text
/// V_e = <x + δ H x_c, P (x + δ H x_c)> + ε_c <x_c, Pc0 x_c>
/// ```
///
/// All plant quantities are expressed in energy coordinates `x̂ = L^T x`
/// with `M = L L^T`, so `P` is the operator of the energy inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub p: Mat,
    pub pc: Mat,
    pub pc0: Mat,
    pub eps_c: f64,
    /// Real part of the `H` used in the coordinate change (original coordinates).
    pub h: Mat,
    pub delta_c: f64,
    pub min_eig_neg_derivative: f64,
    pub p_min_eig: f64,
    pub pc0_min_eig: f64,
    /// Relative residuals of the two plant Lyapunov equations.
    pub p1_residual: f64,
    pub p2_residual: f64,
    /// Relative residual of the `Pc0` equation.
    pub pc0_residual: f64,
    /// Spectral abscissa of `Jc + δ² Bc CH`.
    pub f_abscissa: f64,
    pub closed_loop_abscissa: f64,
    pub valid: bool,
}

impl fmt::Display for LyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid: {}", self.valid)?;
        writeln!(f, "delta_c: {:e}", self.delta_c)?;
        writeln!(f, "eps_c: {:e}", self.eps_c)?;
        writeln!(
            f,
            "min_eig_neg_derivative: {:e}",
            self.min_eig_neg_derivative
        )?;
        writeln!(f, "P_min_eig: {:e}", self.p_min_eig)?;
        writeln!(f, "Pc0_min_eig: {:e}", self.pc0_min_eig)?;
        writeln!(f, "P1_residual: {:e}", self.p1_residual)?;
        writeln!(f, "P2_residual: {:e}", self.p2_residual)?;
        writeln!(f, "Pc0_residual: {:e}", self.pc0_residual)?;
        writeln!(f, "F_abscissa: {:e}", self.f_abscissa)?;
        writeln!(f, "closed_loop_abscissa: {:e}", self.closed_loop_abscissa)
    }
}

/// Builds the certificate for the closed loop of `ss_stab` (already under
/// `Dc` feedback) and `ctrl`, with `h` from [`crate::controller::solve_h`].
pub fn lyapunov_certificate(
    ss_stab: &StateSpaceModel,
    ctrl: &InternalModelController,
    h: &HSolution,
) -> Result<LyapunovCertificate> {
    let (nx, nc, p) = (ss_stab.nx(), ctrl.nc(), ctrl.p);
    if ss_stab.p() != p {
        return Err(Error::dim("controller p", ss_stab.p(), p));
    }
    if h.h.shape() != (nx, nc) {
        return Err(Error::dim(
            "H",
            format!("{nx}x{nc}"),
            format!("{}x{}", h.h.nrows(), h.h.ncols()),
        ));
    }
    let plant_abscissa = linalg::spectral_abscissa(&ss_stab.a)?;
    if plant_abscissa >= 0.0 {
        return Err(Error::Precondition(format!(
            "plant is not exponentially stable (abscissa {plant_abscissa:e})"
        )));
    }
    let delta = ctrl.delta_c;
    let ch = h.ch_real();
    let f_mat = &ctrl.jc + &ctrl.bc * &ch * (delta * delta);
    let f_abscissa = linalg::spectral_abscissa(&f_mat)?;
    if f_abscissa >= 0.0 {
        return Err(Error::Precondition(format!(
            "Jc + δ² Bc CH is not Hurwitz (abscissa {f_abscissa:e})"
        )));
    }

    let l = ss_stab
        .m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Structure("energy weight M is not positive definite".into()))?
        .l();
    let lt = l.transpose();
    let lt_inv = lt
        .clone()
        .solve_upper_triangular(&Mat::identity(nx, nx))
        .ok_or_else(|| Error::Singular("Cholesky factor of M".into()))?;
    let a_hat = &lt * &ss_stab.a * &lt_inv;
    let b_hat = &lt * &ss_stab.b;
    let c_hat = &ss_stab.c * &lt_inv;
    let h_real = h.h_real();
    let h_hat = &lt * &h_real;

    let q1 = Mat::identity(nx, nx) * 2.0;
    let q2 = c_hat.transpose() * &c_hat * 2.0;
    let p1 = linalg::solve_lyapunov(&a_hat, &q1)?;
    let p2 = linalg::solve_lyapunov(&a_hat, &q2)?;
    let p1_residual = linalg::lyapunov_residual(&a_hat, &p1, &q1);
    let p2_residual = linalg::lyapunov_residual(&a_hat, &p2, &q2);
    let p_hat = &p1 + &p2;
    let qc = Mat::identity(nc, nc) * (delta * delta);
    let pc0 = linalg::solve_lyapunov(&f_mat, &qc)?;
    let pc0_residual = linalg::lyapunov_residual(&f_mat, &pc0, &qc);

    // Closed loop in (x̂, x_c), then in (x̂ + δ Ĥ x_c, x_c).
    let bct = ctrl.bc.transpose();
    let mut ae = Mat::zeros(nx + nc, nx + nc);
    ae.view_mut((0, 0), (nx, nx)).copy_from(&a_hat);
    ae.view_mut((0, nx), (nx, nc))
        .copy_from(&(&b_hat * &bct * delta));
    ae.view_mut((nx, 0), (nc, nx))
        .copy_from(&(&ctrl.bc * &c_hat * (-delta)));
    ae.view_mut((nx, nx), (nc, nc))
        .copy_from(&(&ctrl.jc - &ctrl.bc * &ss_stab.d * &bct * (delta * delta)));
    let mut s = Mat::identity(nx + nc, nx + nc);
    s.view_mut((0, nx), (nx, nc)).copy_from(&(&h_hat * delta));
    let mut s_inv = Mat::identity(nx + nc, nx + nc);
    s_inv
        .view_mut((0, nx), (nx, nc))
        .copy_from(&(&h_hat * (-delta)));
    let a_tilde = &s * ae * &s_inv;
    let closed_loop_abscissa = linalg::spectral_abscissa(&a_tilde)?;

    let mut pp = Mat::zeros(nx + nc, nx + nc);
    pp.view_mut((0, 0), (nx, nx)).copy_from(&p_hat);
    let mut pcc = Mat::zeros(nx + nc, nx + nc);
    pcc.view_mut((nx, nx), (nc, nc)).copy_from(&pc0);
    let lie = |x: &Mat| -(a_tilde.transpose() * x + x * &a_tilde);
    let (qp, qc_) = (lie(&pp), lie(&pcc));

    let mut best = (f64::NEG_INFINITY, 1.0);
    for eps in linalg::logspace(1e-6, 1.0, EPS_GRID_POINTS) {
        let m = linalg::min_sym_eig(&(&qp + &qc_ * eps));
        if m > best.0 {
            best = (m, eps);
        }
    }
    let (min_eig, eps_c) = best;
    let p_min_eig = linalg::min_sym_eig(&p_hat);
    let pc0_min_eig = linalg::min_sym_eig(&pc0);
    let valid = p_min_eig > 0.0 && pc0_min_eig > 0.0 && min_eig > 0.0;
    Ok(LyapunovCertificate {
        p: p_hat,
        pc: &pc0 * eps_c,
        pc0,
        eps_c,
        h: h_real,
        delta_c: delta,
        min_eig_neg_derivative: min_eig,
        p_min_eig,
        pc0_min_eig,
        p1_residual,
        p2_residual,
        pc0_residual,
        f_abscissa,
        closed_loop_abscissa,
        valid,
    })
}
