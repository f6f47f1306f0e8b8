use nalgebra::DVector;

use super::{exogenous_signal, ClosedLoopSystem, SignalModel};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Samples per period of the fastest signal component required by the
/// step-size guard.
const SAMPLES_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Initial `(x, x_c)`; zero when absent.
    pub x0: Option<Vector>,
    /// Turn a step-size guard violation into an error.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub y_ref: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub final_state: Vector,
    /// Largest `|e(t)|` over the last tenth of the horizon.
    pub final_window_error: f64,
    pub dt: f64,
    pub scheme: String,
    pub warnings: Vec<String>,
}

impl SimulationResult {
    pub fn error_norms(&self) -> Vec<f64> {
        self.e.iter().map(|e| norm(e)).collect()
    }

    pub fn max_reference_norm(&self) -> f64 {
        self.y_ref.iter().map(|r| norm(r)).fold(0.0, f64::max)
    }

    /// Index of the first sample of the trailing `fraction` of the run.
    pub fn window_start(&self, fraction: f64) -> usize {
        let t_end = *self.t.last().unwrap_or(&0.0);
        let t0 = t_end * (1.0 - fraction);
        self.t.partition_point(|&t| t < t0 - 1e-12 * t_end.max(1.0))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Zero initial state, lenient step guard.
pub fn simulate(
    cl: &ClosedLoopSystem,
    sig: &SignalModel,
    horizon: f64,
    dt: f64,
) -> Result<SimulationResult> {
    simulate_with(cl, sig, horizon, dt, &SimOptions::default())
}

/// Implicit midpoint rule with inputs sampled at the step midpoints.
///
/// The step map is factored once on the balanced closed-loop matrix.
pub fn simulate_with(
    cl: &ClosedLoopSystem,
    sig: &SignalModel,
    horizon: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<SimulationResult> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param(
            "horizon",
            format!("must be positive, got {horizon}"),
        ));
    }
    sig.validate(cl.p, cl.n_dist())?;
    let mut warnings = Vec::new();
    let f_max = sig.max_frequency_hz();
    if f_max > 0.0 {
        let max = 1.0 / (SAMPLES_PER_PERIOD * f_max);
        if dt > max * (1.0 + 1e-12) {
            if opts.strict {
                return Err(Error::StepGuard { dt, max });
            }
            warnings.push(format!(
                "dt = {dt} exceeds the step guard {max} for {f_max} Hz"
            ));
        }
    }

    let n = cl.dim();
    let (ab, d) = linalg::balance(&cl.ae);
    let dinv = d.map(|v| 1.0 / v);
    let mut bin = cl.input_matrix();
    for i in 0..n {
        bin.row_mut(i).scale_mut(dinv[i]);
    }
    let eye = Mat::identity(n, n);
    let lhs = &eye - &ab * (0.5 * dt);
    let lu = lhs.lu();
    let phi = lu
        .solve(&(&eye + &ab * (0.5 * dt)))
        .ok_or_else(|| Error::Singular("implicit midpoint step matrix".into()))?;
    let gamma = lu
        .solve(&(bin * dt))
        .ok_or_else(|| Error::Singular("implicit midpoint step matrix".into()))?;
    let mut ce_d = cl.ce.clone();
    for j in 0..n {
        ce_d.column_mut(j).scale_mut(d[j]);
    }
    let feed = cl.feedthrough();

    let steps = (horizon / dt).round() as usize;
    let mut z = match &opts.x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::dim("x0", n, x0.len()));
            }
            x0.component_mul(&dinv)
        }
        None => Vector::zeros(n),
    };
    let mut next = Vector::zeros(n);
    let mut input = DVector::zeros(cl.p + cl.n_dist());
    let mut x = Vector::zeros(n);

    let cap = steps + 1;
    let mut res = SimulationResult {
        t: Vec::with_capacity(cap),
        y: Vec::with_capacity(cap),
        y_ref: Vec::with_capacity(cap),
        e: Vec::with_capacity(cap),
        energy: Vec::with_capacity(cap),
        final_state: Vector::zeros(n),
        final_window_error: 0.0,
        dt,
        scheme: "implicit midpoint, fixed step, midpoint-sampled inputs".into(),
        warnings,
    };
    let fill_input = |input: &mut Vector, t: f64| {
        let (r, w) = exogenous_signal(sig, t);
        input.rows_mut(0, cl.p).copy_from(&r);
        input.rows_mut(cl.p, w.len()).copy_from(&w);
        r
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        let r = fill_input(&mut input, t);
        let y = &ce_d * &z + &feed * &input;
        x.copy_from(&z.component_mul(&d));
        let energy = cl.energy(x.as_slice());
        if !energy.is_finite() {
            return Err(Error::Precondition(format!(
                "simulation diverged at t = {t}"
            )));
        }
        res.t.push(t);
        res.e.push((&y - &r).as_slice().to_vec());
        res.y.push(y.as_slice().to_vec());
        res.y_ref.push(r.as_slice().to_vec());
        res.energy.push(energy);
        if k == steps {
            break;
        }
        fill_input(&mut input, t + 0.5 * dt);
        next.gemv(1.0, &phi, &z, 0.0);
        next.gemv(1.0, &gamma, &input, 1.0);
        std::mem::swap(&mut z, &mut next);
    }
    res.final_state = z.component_mul(&d);
    let start = res.window_start(0.1);
    res.final_window_error = res.e[start..].iter().map(|e| norm(e)).fold(0.0, f64::max);
    Ok(res)
}

/// Largest `|e(t)|` over the trailing `fraction` of the run after removing,
/// per output channel, the least-squares fit of `cos`/`sin` at each of
/// `notch` (rad/s).
pub fn notched_window_error(res: &SimulationResult, notch: &[f64], fraction: f64) -> f64 {
    let start = res.window_start(fraction);
    let ts = &res.t[start..];
    let p = res.e.first().map_or(0, |e| e.len());
    let cols = 2 * notch.len();
    let mut residual: Vec<Vec<f64>> = res.e[start..].to_vec();
    if cols > 0 && ts.len() > cols {
        let basis = Mat::from_fn(ts.len(), cols, |i, j| {
            let w = notch[j / 2];
            if j % 2 == 0 {
                (w * ts[i]).cos()
            } else {
                (w * ts[i]).sin()
            }
        });
        let svd = basis.clone().svd(true, true);
        for ch in 0..p {
            let rhs = Vector::from_iterator(ts.len(), residual.iter().map(|e| e[ch]));
            if let Ok(coef) = svd.solve(&rhs, 1e-12) {
                let fit = &basis * coef;
                for (i, row) in residual.iter_mut().enumerate() {
                    row[ch] -= fit[i];
                }
            }
        }
    }
    residual.iter().map(|e| norm(e)).fold(0.0, f64::max)
}
