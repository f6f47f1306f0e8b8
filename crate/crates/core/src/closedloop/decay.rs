use super::SimulationResult;
use crate::error::{Error, Result};

/// Exponential envelope fit `|e(t)| ≈ c e^{-αt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub alpha: f64,
    /// Number of envelope points used in the fit.
    pub points: usize,
    /// `false` when the envelope does not decay (`α ≤ 0`).
    pub decaying: bool,
}

/// Fit over the latter half of the run, on `|y - y_ref|`.
pub fn estimate_decay_rate(res: &SimulationResult) -> Result<DecayEstimate> {
    let floor = 1e-12 * res.max_reference_norm().max(1.0);
    estimate_decay_rate_series(&res.t, &res.error_norms(), 0.5, floor)
}

/// Least-squares slope of `ln v` at the local maxima of `v`, restricted to
/// the trailing `fit_fraction` of the time span. Points at or below `floor`
/// are ignored. Without oscillation every sample of the window is used.
pub fn estimate_decay_rate_series(
    t: &[f64],
    v: &[f64],
    fit_fraction: f64,
    floor: f64,
) -> Result<DecayEstimate> {
    if t.len() != v.len() || t.len() < 3 {
        return Err(Error::param(
            "series",
            "need at least three samples of equal length",
        ));
    }
    if !v.iter().any(|&x| x > floor) {
        return Err(Error::UndefinedRate { floor });
    }
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let start = t1 - fit_fraction.clamp(0.0, 1.0) * (t1 - t0);
    let in_window = |i: usize| t[i] >= start && v[i] > floor;
    let mut pts: Vec<(f64, f64)> = (1..v.len() - 1)
        .filter(|&i| in_window(i) && v[i] >= v[i - 1] && v[i] > v[i + 1])
        .map(|i| (t[i], v[i].ln()))
        .collect();
    if pts.len() < 3 {
        pts = (0..v.len())
            .filter(|&i| in_window(i))
            .map(|i| (t[i], v[i].ln()))
            .collect();
    }
    if pts.len() < 2 {
        return Err(Error::UndefinedRate { floor });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedRate { floor });
    }
    let alpha = -sxy / sxx;
    Ok(DecayEstimate {
        alpha,
        points: pts.len(),
        decaying: alpha > 0.0,
    })
}
