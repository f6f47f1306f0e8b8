//! Clamped Timoshenko beam with a tip torque actuator, as used for the
//! piezo-tube regulation demo.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::closedloop::SignalModel;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::phs::{Order, PhsModel, Profile};

/// Geometry, material and damping data of a solid rectangular beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimoshenkoParams {
    /// m
    pub length: f64,
    /// m
    pub width: f64,
    /// m
    pub thickness: f64,
    /// kg/m^3
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    /// N s/m
    pub transverse_dissipation: f64,
    /// N m s/rad
    pub rotational_dissipation: f64,
    pub poisson_ratio: f64,
    pub shear_correction: f64,
}

/// Derived line coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamCoefficients {
    /// Cross-section area, m^2.
    pub area: f64,
    /// Second moment of area, m^4.
    pub second_moment: f64,
    /// Mass per unit length, kg/m.
    pub rho_lin: f64,
    /// Rotational inertia per unit length, kg m.
    pub i_rho: f64,
    /// Flexural rigidity, N m^2.
    pub ei: f64,
    /// Shear stiffness, N.
    pub k: f64,
}

impl TimoshenkoParams {
    /// Piezo-tube beam used by the demo.
    pub fn piezo_tube() -> Self {
        TimoshenkoParams {
            length: 0.05,
            width: 0.003,
            thickness: 0.002,
            density: 936.0,
            youngs_modulus: 4.14e9,
            transverse_dissipation: 1e-4,
            rotational_dissipation: 1e-4,
            poisson_ratio: 0.3,
            shear_correction: 5.0 / 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("thickness", self.thickness),
            ("density", self.density),
            ("youngs_modulus", self.youngs_modulus),
            ("shear_correction", self.shear_correction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("transverse_dissipation", self.transverse_dissipation),
            ("rotational_dissipation", self.rotational_dissipation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be nonnegative, got {v}")));
            }
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::param("poisson_ratio", "must lie in (-1, 0.5)"));
        }
        Ok(())
    }
}

pub fn derive_coefficients(params: &TimoshenkoParams) -> BeamCoefficients {
    let area = params.width * params.thickness;
    let second_moment = params.width * params.thickness.powi(3) / 12.0;
    let shear_modulus = params.youngs_modulus / (2.0 * (1.0 + params.poisson_ratio));
    BeamCoefficients {
        area,
        second_moment,
        rho_lin: params.density * area,
        i_rho: params.density * second_moment,
        ei: params.youngs_modulus * second_moment,
        k: params.shear_correction * shear_modulus * area,
    }
}

/// State `(w_z - φ, ρ w_t, φ_z, I_ρ φ_t)`, clamped at `z = 0`, torque input
/// and angular-velocity output at the tip.
pub fn build_timoshenko_model(params: &TimoshenkoParams) -> PhsModel {
    let c = derive_coefficients(params);
    let s = FRAC_1_SQRT_2;
    let p1 = Mat::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0,
        ],
    );
    let mut p0 = Mat::zeros(4, 4);
    p0[(0, 3)] = -1.0;
    p0[(3, 0)] = 1.0;
    let g0 = Mat::from_diagonal(&Vector::from_vec(vec![
        0.0,
        params.transverse_dissipation,
        0.0,
        params.rotational_dissipation,
    ]));
    let h = Mat::from_diagonal(&Vector::from_vec(vec![
        c.k,
        1.0 / c.rho_lin,
        c.ei,
        1.0 / c.i_rho,
    ]));
    let w1 = Mat::from_row_slice(1, 8, &[0.0, 0.0, 0.0, s, 0.0, 0.0, s, 0.0]);
    let w2 = Mat::from_row_slice(
        3,
        8,
        &[
            0.0, s, 0.0, 0.0, s, 0.0, 0.0, 0.0, //
            -s, 0.0, 0.0, 0.0, 0.0, s, 0.0, 0.0, //
            0.0, 0.0, -s, 0.0, 0.0, 0.0, 0.0, s,
        ],
    );
    let wtilde = Mat::from_row_slice(1, 8, &[0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0, s]);
    PhsModel {
        n: 4,
        order: Order::First,
        p2: Mat::zeros(4, 4),
        p1,
        p0,
        g0,
        h: Profile::Constant(h),
        bd: None,
        w1,
        w2,
        wtilde,
        interval: (0.0, params.length),
    }
}

/// Internal-model controller settings of the demo.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSettings {
    pub freqs: Vec<f64>,
    pub include_zero: bool,
    pub dc: f64,
    pub delta_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n_f: usize,
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoScenario {
    pub params: TimoshenkoParams,
    pub model: PhsModel,
    pub signal: SignalModel,
    pub controller: ControllerSettings,
    pub sim: SimulationConfig,
    /// Frequency of the boundary disturbance left out of the internal model.
    pub disturbance_freq: f64,
    pub unit_note: String,
}

/// Reference `a sin(10 t) + b cos(15 t)` with `a = 200`, `b = 100`, plus a
/// 50 Hz disturbance of amplitude `c = 10` on the actuated boundary row.
pub fn build_demo_scenario() -> DemoScenario {
    let params = TimoshenkoParams::piezo_tube();
    let model = build_timoshenko_model(&params);
    let (a, b, c) = (200.0, 100.0, 10.0);
    let (w1, w2) = (10.0, 15.0);
    let w_dist = 2.0 * PI * 50.0;
    let p = model.inputs();
    let n_dist = model.n_d1() + p + model.n_d3();
    let mut signal = SignalModel::zeros(vec![w1, w2, w_dist], p, n_dist);
    signal.a2[0][0] = a;
    signal.a1[1][0] = b;
    // w2 occupies the slots after the distributed channels
    signal.b2[2][model.n_d1()] = c;
    DemoScenario {
        params,
        model,
        signal,
        controller: ControllerSettings {
            freqs: vec![w1, w2],
            include_zero: false,
            dc: 0.002,
            delta_c: 0.2,
        },
        sim: SimulationConfig {
            n_f: 50,
            horizon: 20.0,
            dt: 5e-4,
        },
        disturbance_freq: w_dist,
        unit_note: "reference amplitudes a, b in cm/s as tabulated; the output is compared in the same unit. \
                    c is applied as given (tabulated unit N/m)."
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn piezo_tube_geometry() {
        let c = derive_coefficients(&TimoshenkoParams::piezo_tube());
        assert_relative_eq!(c.area, 6e-6, max_relative = 1e-14);
        assert_relative_eq!(c.second_moment, 2e-12, max_relative = 1e-14);
        assert_relative_eq!(c.rho_lin, 5.616e-3, max_relative = 1e-14);
    }

    #[test]
    fn zero_poisson_gives_half_modulus() {
        let mut p = TimoshenkoParams::piezo_tube();
        p.poisson_ratio = 0.0;
        p.shear_correction = 1.0;
        let c = derive_coefficients(&p);
        assert_relative_eq!(c.k, p.youngs_modulus / 2.0 * c.area, max_relative = 1e-14);
    }

    #[test]
    fn width_scales_linearly() {
        let p = TimoshenkoParams::piezo_tube();
        let mut q = p;
        q.width *= 2.0;
        let (c, d) = (derive_coefficients(&p), derive_coefficients(&q));
        for (x, y) in [
            (c.area, d.area),
            (c.second_moment, d.second_moment),
            (c.rho_lin, d.rho_lin),
            (c.k, d.k),
            (c.ei, d.ei),
        ] {
            assert_relative_eq!(y, 2.0 * x, max_relative = 1e-14);
        }
    }

    #[test]
    fn dissipation_spectrum() {
        let m = build_timoshenko_model(&TimoshenkoParams::piezo_tube());
        let mut d: Vec<f64> = m.g0.diagonal().iter().copied().collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(d, vec![0.0, 0.0, 1e-4, 1e-4]);
    }

    #[test]
    fn demo_signal_at_zero() {
        let demo = build_demo_scenario();
        let (yref, w) = demo.signal.eval(0.0);
        assert_eq!(yref[0], 100.0);
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|&v| v == 0.0));
        let (_, w) = demo.signal.eval(0.001);
        assert!(w[0] != 0.0);
        assert!(w.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn negative_length_rejected() {
        let mut p = TimoshenkoParams::piezo_tube();
        p.length = -1.0;
        assert!(p.validate().is_err());
        assert!(TimoshenkoParams::piezo_tube().validate().is_ok());
    }
}
