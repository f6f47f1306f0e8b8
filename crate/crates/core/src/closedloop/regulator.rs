use num_complex::Complex64;

use super::{ClosedLoopSystem, SignalModel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVector, Resolvent, Vector};

/// Steady state `Σ e^{iμt}` forced by one exponential of the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorComponent {
    pub mu: f64,
    /// Closed-loop state amplitude, `(iμ - Ae) Σ = B_e s`.
    pub sigma: CVector,
    /// Reference amplitude `y_μ`.
    pub y_target: CVector,
    /// Output amplitude `Ce Σ + D_e s`.
    pub y_pred: CVector,
    pub error_norm: f64,
    /// `max(1, |s|)` with `s = (y_μ, w_μ)`; regulation tolerances scale with it.
    pub scale: f64,
    /// `‖(iμ - Ae) Σ - B_e s‖ / (‖iμ Σ‖ + ‖Ae Σ‖ + ‖B_e s‖)`.
    pub residual: f64,
    /// Whether `iμ` is an eigenvalue of the controller.
    pub in_internal_model: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub components: Vec<RegulatorComponent>,
}

impl RegulatorSolution {
    /// Largest relative output error over the exponents the controller
    /// contains.
    pub fn max_regulated_error(&self) -> f64 {
        self.components
            .iter()
            .filter(|c| c.in_internal_model)
            .map(|c| c.error_norm / c.scale)
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    fn sum<F: Fn(&RegulatorComponent) -> CVector>(&self, t: f64, f: F) -> Vector {
        let mut acc: Option<CVector> = None;
        for c in &self.components {
            let term = f(c) * Complex64::new(0.0, c.mu * t).exp();
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
        acc.map_or_else(|| Vector::zeros(0), |a| a.map(|v| v.re))
    }

    pub fn predicted_output(&self, t: f64) -> Vector {
        self.sum(t, |c| c.y_pred.clone())
    }

    pub fn predicted_error(&self, t: f64) -> Vector {
        self.sum(t, |c| &c.y_pred - &c.y_target)
    }

    pub fn predicted_state(&self, t: f64) -> Vector {
        self.sum(t, |c| c.sigma.clone())
    }
}

/// Solves `(iμ - Ae) Σ_μ = B_e s_μ` for `μ ∈ {0, ±ω_k}`.
///
/// The plant block is eliminated through its resolvent, leaving
/// `(iμ - Jc + δ² Bc P(iμ) Bc^T) Γ = b_c - δ Bc C (iμ - A)^-1 b_x` on the
/// controller coordinates.
pub fn solve_regulator_steady_state(
    cl: &ClosedLoopSystem,
    sig: &SignalModel,
) -> Result<RegulatorSolution> {
    sig.validate(cl.p, cl.n_dist())?;
    let (nx, nc, p) = (cl.n_x, cl.n_c, cl.p);
    let delta = cl.delta_c;
    let plant = &cl.plant;
    let ctrl = &cl.controller;
    let res = Resolvent::new(&plant.a);
    let bin = linalg::to_complex(&cl.input_matrix());
    let feed = linalg::to_complex(&cl.feedthrough());
    let ae = linalg::to_complex(&cl.ae);
    let ce = linalg::to_complex(&cl.ce);
    let bf = linalg::to_complex(&plant.b);
    let cf = linalg::to_complex(&plant.c);
    let df = linalg::to_complex(&plant.d);
    let bc = linalg::to_complex(&ctrl.bc);
    let bct = bc.transpose();
    let jc = linalg::to_complex(&ctrl.jc);
    let d = Complex64::new(delta, 0.0);

    let on_model = |mu: f64| {
        if mu == 0.0 {
            ctrl.include_zero
        } else {
            ctrl.freqs
                .iter()
                .any(|&w| (w - mu.abs()).abs() <= 1e-12 * w)
        }
    };

    let mut components = Vec::new();
    for comp in sig.components() {
        let lambda = Complex64::new(0.0, comp.mu);
        let mut s = CVector::zeros(p + comp.w.len());
        s.rows_mut(0, p).copy_from(&comp.y);
        s.rows_mut(p, comp.w.len()).copy_from(&comp.w);
        let scale = s.norm().max(1.0);
        let rhs = &bin * &s;
        let b_x = rhs.rows(0, nx).into_owned();
        let b_c = rhs.rows(nx, nc).into_owned();

        let mut stacked = CMat::zeros(nx, 1 + p);
        stacked.column_mut(0).copy_from(&b_x);
        stacked.view_mut((0, 1), (nx, p)).copy_from(&bf);
        let sol = res.solve(lambda, &stacked)?;
        let r_bx = sol.column(0).into_owned();
        let r_bf = sol.columns(1, p).into_owned();
        let pf = &cf * &r_bf + &df;

        let k = CMat::identity(nc, nc) * lambda - &jc + &bc * &pf * &bct * (d * d);
        let g_rhs = &b_c - &bc * (&cf * &r_bx) * d;
        let rc = linalg::rcond(&k);
        if rc < linalg::RCOND_MIN {
            return Err(Error::ResolventSingular { lambda, rcond: rc });
        }
        let gamma = k
            .lu()
            .solve(&g_rhs)
            .ok_or(Error::ResolventSingular { lambda, rcond: rc })?;
        let pi = &r_bx + &r_bf * (&bct * &gamma) * d;

        let mut sigma = CVector::zeros(nx + nc);
        sigma.rows_mut(0, nx).copy_from(&pi);
        sigma.rows_mut(nx, nc).copy_from(&gamma);
        let (ls, as_) = (&sigma * lambda, &ae * &sigma);
        let denom = ls.norm() + as_.norm() + rhs.norm();
        let residual = (&ls - &as_ - &rhs).norm() / denom.max(f64::MIN_POSITIVE);
        let y_pred = &ce * &sigma + &feed * &s;
        let error_norm = (&y_pred - &comp.y).norm();
        components.push(RegulatorComponent {
            mu: comp.mu,
            sigma,
            y_target: comp.y,
            y_pred,
            error_norm,
            scale,
            residual,
            in_internal_model: on_model(comp.mu),
        });
    }
    Ok(RegulatorSolution { components })
}
