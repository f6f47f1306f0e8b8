//! Plant and internal-model controller in feedback: assembly, simulation,
//! steady-state regulator solves, decay-rate estimation and the quadratic
//! stability certificate.

mod certificate;
mod decay;
mod regulator;
mod signal;
mod simulate;

pub use certificate::{lyapunov_certificate, LyapunovCertificate, EPS_GRID_POINTS};
pub use decay::{estimate_decay_rate, estimate_decay_rate_series, DecayEstimate};
pub use regulator::{solve_regulator_steady_state, RegulatorComponent, RegulatorSolution};
pub use signal::{exogenous_signal, SignalComponent, SignalModel};
pub use simulate::{notched_window_error, simulate, simulate_with, SimOptions, SimulationResult};

use crate::controller::InternalModelController;
use crate::discretize::{apply_output_feedback, StateSpaceModel};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Closed loop
///
/// ```text
/// x_e' = Ae x_e + B_ref y_ref + B_w1 w1 + B_w2 w2 + B_w3 w3
/// y    = Ce x_e + D_ref y_ref + D_w2 w2 + D_w3 w3
/// ```
///
/// with `x_e = (x, x_c)`. The plant blocks already contain the static
/// `-Dc y` feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub ae: Mat,
    pub b_ref: Mat,
    pub b_w1: Mat,
    pub b_w2: Mat,
    pub b_w3: Mat,
    pub ce: Mat,
    pub d_ref: Mat,
    pub d_w2: Mat,
    pub d_w3: Mat,
    /// Plant energy weight.
    pub m: Mat,
    pub n_x: usize,
    pub n_c: usize,
    pub p: usize,
    pub delta_c: f64,
    /// Plant after the `Dc` feedback.
    pub plant: StateSpaceModel,
    pub controller: InternalModelController,
}

impl ClosedLoopSystem {
    pub fn dim(&self) -> usize {
        self.n_x + self.n_c
    }

    pub fn n_dist(&self) -> usize {
        self.b_w1.ncols() + self.b_w2.ncols() + self.b_w3.ncols()
    }

    /// `[B_ref, B_w1, B_w2, B_w3]`, matching the input vector `(y_ref, w)`.
    pub fn input_matrix(&self) -> Mat {
        linalg::hstack(&[&self.b_ref, &self.b_w1, &self.b_w2, &self.b_w3])
    }

    /// Feedthrough acting on `(y_ref, w)`.
    pub fn feedthrough(&self) -> Mat {
        let d_w1 = Mat::zeros(self.p, self.b_w1.ncols());
        linalg::hstack(&[&self.d_ref, &d_w1, &self.d_w2, &self.d_w3])
    }

    /// `x^T M x / 2 + |x_c|^2 / 2`.
    pub fn energy(&self, xe: &[f64]) -> f64 {
        let x = nalgebra::DVectorView::from_slice(&xe[..self.n_x], self.n_x);
        let xc = &xe[self.n_x..];
        0.5 * x.dot(&(&self.m * x)) + 0.5 * xc.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa(&self.ae)
    }
}

/// Couples `ss` with the controller through `u = δ Bc^T xc - Dc (y - y_ref)`.
pub fn assemble_closed_loop(
    ss: &StateSpaceModel,
    ctrl: &InternalModelController,
) -> Result<ClosedLoopSystem> {
    if ss.p() != ctrl.p {
        return Err(Error::dim("controller p", ss.p(), ctrl.p));
    }
    let plant = apply_output_feedback(ss, &ctrl.dc)?;
    let (n_x, n_c, p) = (ss.nx(), ctrl.nc(), ctrl.p);
    let d = ctrl.delta_c;
    let bc = &ctrl.bc;
    let bct = bc.transpose();
    let eye = Mat::identity(p, p);

    let mut ae = Mat::zeros(n_x + n_c, n_x + n_c);
    ae.view_mut((0, 0), (n_x, n_x)).copy_from(&plant.a);
    ae.view_mut((0, n_x), (n_x, n_c))
        .copy_from(&(&plant.b * &bct * d));
    ae.view_mut((n_x, 0), (n_c, n_x))
        .copy_from(&(bc * &plant.c * (-d)));
    ae.view_mut((n_x, n_x), (n_c, n_c))
        .copy_from(&(&ctrl.jc - bc * &plant.d * &bct * (d * d)));

    let b_ref = linalg::vstack(&[
        &(&plant.b * &ctrl.dc),
        &(bc * (&eye - &plant.d * &ctrl.dc) * d),
    ]);
    let b_w1 = linalg::vstack(&[&plant.bd, &Mat::zeros(n_c, plant.n_d1())]);
    let b_w2 = linalg::vstack(&[&plant.b, &(bc * &plant.d * (-d))]);
    let b_w3 = linalg::vstack(&[&plant.bw3, &(bc * &plant.dw3 * (-d))]);
    let ce = linalg::hstack(&[&plant.c, &(&plant.d * &bct * d)]);

    Ok(ClosedLoopSystem {
        ae,
        b_ref,
        b_w1,
        b_w2,
        b_w3,
        ce,
        d_ref: &plant.d * &ctrl.dc,
        d_w2: plant.d.clone(),
        d_w3: plant.dw3.clone(),
        m: plant.m.clone(),
        n_x,
        n_c,
        p,
        delta_c: d,
        plant,
        controller: ctrl.clone(),
    })
}
