use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVector, Vector};

/// Reference and disturbance generator
///
/// ```text
/// y_ref(t) = a0 + Σ_k a1_k cos(ω_k t) + a2_k sin(ω_k t)
/// w(t)     = b0 + Σ_k b1_k cos(ω_k t) + b2_k sin(ω_k t)
/// ```
///
/// `w` stacks the distributed, actuated-boundary and free-boundary
/// disturbances `(w1, w2, w3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    /// Strictly positive frequencies in rad/s; the constant terms play the
    /// role of the zero frequency.
    pub freqs: Vec<f64>,
    pub a0: Vec<f64>,
    pub a1: Vec<Vec<f64>>,
    pub a2: Vec<Vec<f64>>,
    pub b0: Vec<f64>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
}

/// One complex exponential `e^{iμt}` of the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalComponent {
    pub mu: f64,
    pub y: CVector,
    pub w: CVector,
}

impl SignalModel {
    pub fn zeros(freqs: Vec<f64>, p: usize, n_dist: usize) -> Self {
        let q = freqs.len();
        SignalModel {
            freqs,
            a0: vec![0.0; p],
            a1: vec![vec![0.0; p]; q],
            a2: vec![vec![0.0; p]; q],
            b0: vec![0.0; n_dist],
            b1: vec![vec![0.0; n_dist]; q],
            b2: vec![vec![0.0; n_dist]; q],
        }
    }

    pub fn p(&self) -> usize {
        self.a0.len()
    }

    pub fn n_dist(&self) -> usize {
        self.b0.len()
    }

    pub fn validate(&self, p: usize, n_dist: usize) -> Result<()> {
        let q = self.freqs.len();
        for (k, &w) in self.freqs.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::param(
                    "freqs",
                    format!("frequency {k} must be positive, got {w}"),
                ));
            }
        }
        if self.a0.len() != p {
            return Err(Error::dim("a0", p, self.a0.len()));
        }
        if self.b0.len() != n_dist {
            return Err(Error::dim("b0", n_dist, self.b0.len()));
        }
        for (name, rows, len) in [
            ("a1", &self.a1, p),
            ("a2", &self.a2, p),
            ("b1", &self.b1, n_dist),
            ("b2", &self.b2, n_dist),
        ] {
            if rows.len() != q {
                return Err(Error::dim(name, q, rows.len()));
            }
            if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
                return Err(Error::dim(format!("{name}[{k}]"), len, r.len()));
            }
        }
        Ok(())
    }

    /// Largest frequency in Hz (zero for constant signals).
    pub fn max_frequency_hz(&self) -> f64 {
        self.freqs.iter().fold(0.0, |a: f64, &w| a.max(w)) / (2.0 * std::f64::consts::PI)
    }

    pub fn eval(&self, t: f64) -> (Vector, Vector) {
        exogenous_signal(self, t)
    }

    /// Complex coefficients for `μ = 0, ω1, -ω1, …`, so that the real signal
    /// is `Σ y_μ e^{iμt}`.
    pub fn components(&self) -> Vec<SignalComponent> {
        let cv =
            |v: &[f64]| CVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)));
        let mut out = vec![SignalComponent {
            mu: 0.0,
            y: cv(&self.a0),
            w: cv(&self.b0),
        }];
        let half = |c: &[f64], s: &[f64], sign: f64| {
            CVector::from_iterator(
                c.len(),
                c.iter()
                    .zip(s)
                    .map(|(&c, &s)| Complex64::new(0.5 * c, -0.5 * sign * s)),
            )
        };
        for (k, &w) in self.freqs.iter().enumerate() {
            out.push(SignalComponent {
                mu: w,
                y: half(&self.a1[k], &self.a2[k], 1.0),
                w: half(&self.b1[k], &self.b2[k], 1.0),
            });
            out.push(SignalComponent {
                mu: -w,
                y: half(&self.a1[k], &self.a2[k], -1.0),
                w: half(&self.b1[k], &self.b2[k], -1.0),
            });
        }
        out
    }
}

/// `(y_ref(t), w(t))`.
pub fn exogenous_signal(sig: &SignalModel, t: f64) -> (Vector, Vector) {
    let mut y = Vector::from_column_slice(&sig.a0);
    let mut w = Vector::from_column_slice(&sig.b0);
    for (k, &om) in sig.freqs.iter().enumerate() {
        let (s, c) = (om * t).sin_cos();
        for i in 0..y.len() {
            y[i] += sig.a1[k][i] * c + sig.a2[k][i] * s;
        }
        for i in 0..w.len() {
            w[i] += sig.b1[k][i] * c + sig.b2[k][i] * s;
        }
    }
    (y, w)
}
