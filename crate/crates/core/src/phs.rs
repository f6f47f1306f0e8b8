//! Continuous boundary-controlled port-Hamiltonian model of order one or two,
//! its boundary port variables, and the executable structural checks.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Spatial order of the differential operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_usize(self) -> usize {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_usize(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(Error::param(
                "order",
                format!("must be 1 or 2, got {other}"),
            )),
        }
    }
}

/// Matrix-valued coefficient on `[a, b]`.
///
/// Sampled profiles are interpolated linearly between grid points and held
/// constant outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(Mat),
    Sampled { grid: Vec<f64>, values: Vec<Mat> },
}

impl Profile {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Profile::Constant(m) => m.shape(),
            Profile::Sampled { values, .. } => values.first().map_or((0, 0), |m| m.shape()),
        }
    }

    pub fn eval(&self, z: f64) -> Mat {
        match self {
            Profile::Constant(m) => m.clone(),
            Profile::Sampled { grid, values } => {
                if z <= grid[0] {
                    return values[0].clone();
                }
                let last = grid.len() - 1;
                if z >= grid[last] {
                    return values[last].clone();
                }
                let k = grid.partition_point(|&g| g <= z) - 1;
                let s = (z - grid[k]) / (grid[k + 1] - grid[k]);
                &values[k] * (1.0 - s) + &values[k + 1] * s
            }
        }
    }

    /// Every stored sample (a constant profile has one).
    pub fn samples(&self) -> Vec<&Mat> {
        match self {
            Profile::Constant(m) => vec![m],
            Profile::Sampled { values, .. } => values.iter().collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Profile {
        match self {
            Profile::Constant(m) => Profile::Constant(f(m)),
            Profile::Sampled { grid, values } => Profile::Sampled {
                grid: grid.clone(),
                values: values.iter().map(f).collect(),
            },
        }
    }

    fn validate(&self, field: &str, shape: (usize, usize)) -> Result<()> {
        if let Profile::Sampled { grid, values } = self {
            if grid.is_empty() {
                return Err(Error::dim(format!("{field}.grid"), "at least one point", 0));
            }
            if grid.len() != values.len() {
                return Err(Error::dim(
                    format!("{field}.values"),
                    grid.len(),
                    values.len(),
                ));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param(
                    format!("{field}.grid"),
                    "must be strictly increasing",
                ));
            }
        }
        for (k, m) in self.samples().into_iter().enumerate() {
            if m.shape() != shape {
                return Err(Error::dim(
                    format!("{field}[{k}]"),
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        Ok(())
    }
}

/// Boundary-controlled port-Hamiltonian PDE on `[a, b]`:
///
/// ```text
/// x_t = P2 (Hx)_zz + P1 (Hx)_z + (P0 - G0) Hx + Bd(z) w1
/// W1 (f, e) = u + w2,   W2 (f, e) = w3,   y = Wtilde (f, e)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PhsModel {
    pub n: usize,
    pub order: Order,
    pub p2: Mat,
    pub p1: Mat,
    pub p0: Mat,
    pub g0: Mat,
    pub h: Profile,
    pub bd: Option<Profile>,
    pub w1: Mat,
    pub w2: Mat,
    pub wtilde: Mat,
    pub interval: (f64, f64),
}

impl PhsModel {
    /// Number of inputs (rows of `W1`).
    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    /// Number of outputs (rows of `Wtilde`).
    pub fn outputs(&self) -> usize {
        self.wtilde.nrows()
    }

    pub fn n_d1(&self) -> usize {
        self.bd.as_ref().map_or(0, |b| b.shape().1)
    }

    pub fn n_d3(&self) -> usize {
        self.w2.nrows()
    }

    /// Length of the trace vector and of the port vector, `2nN`.
    pub fn trace_dim(&self) -> usize {
        2 * self.n * self.order.as_usize()
    }

    /// `[W1; W2]`.
    pub fn w(&self) -> Mat {
        linalg::vstack(&[&self.w1, &self.w2])
    }

    /// Checks every matrix shape; the first mismatch is reported by field name.
    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        for (name, m) in [
            ("P2", &self.p2),
            ("P1", &self.p1),
            ("P0", &self.p0),
            ("G0", &self.g0),
        ] {
            if m.shape() != (n, n) {
                return Err(Error::dim(
                    name,
                    format!("{n}x{n}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        self.h.validate("H", (n, n))?;
        if let Some(bd) = &self.bd {
            let cols = bd.shape().1;
            bd.validate("Bd", (n, cols))?;
        }
        let td = self.trace_dim();
        for (name, m) in [("W1", &self.w1), ("W2", &self.w2), ("Wtilde", &self.wtilde)] {
            if m.nrows() > 0 && m.ncols() != td {
                return Err(Error::dim(format!("{name} columns"), td, m.ncols()));
            }
        }
        if self.w1.nrows() == 0 {
            return Err(Error::dim("W1 rows", "at least 1", 0));
        }
        if self.wtilde.nrows() != self.w1.nrows() {
            return Err(Error::dim(
                "Wtilde rows",
                self.w1.nrows(),
                self.wtilde.nrows(),
            ));
        }
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::param(
                "interval",
                format!("need a < b, got [{a}, {b}]"),
            ));
        }
        Ok(())
    }
}

/// Outcome of one named constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    /// Residual or eigenvalue bound measured for this constraint.
    pub value: f64,
    pub ok: bool,
}

/// Result of the structural and boundary-condition checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<ConstraintCheck>,
    pub rank_w: Option<usize>,
    pub wsw_min_eig: Option<f64>,
    pub kernel_form_min_eig: Option<f64>,
    pub passed: bool,
    pub tol: f64,
}

impl AssumptionReport {
    fn new(tol: f64) -> Self {
        AssumptionReport {
            checks: Vec::new(),
            rank_w: None,
            wsw_min_eig: None,
            kernel_form_min_eig: None,
            passed: true,
            tol,
        }
    }

    fn push(&mut self, name: &str, value: f64, ok: bool) {
        self.passed &= ok;
        self.checks.push(ConstraintCheck {
            name: name.to_string(),
            value,
            ok,
        });
    }

    /// Names of the failed constraints.
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Merges another report into this one.
    pub fn merge(mut self, other: AssumptionReport) -> Self {
        self.passed &= other.passed;
        self.checks.extend(other.checks);
        self.rank_w = self.rank_w.or(other.rank_w);
        self.wsw_min_eig = self.wsw_min_eig.or(other.wsw_min_eig);
        self.kernel_form_min_eig = self.kernel_form_min_eig.or(other.kernel_form_min_eig);
        self
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "passed: {}", self.passed)?;
        writeln!(f, "tolerance: {:e}", self.tol)?;
        if let Some(r) = self.rank_w {
            writeln!(f, "rank_W: {r}")?;
        }
        if let Some(v) = self.wsw_min_eig {
            writeln!(f, "wsw_min_eig: {v:e}")?;
        }
        if let Some(v) = self.kernel_form_min_eig {
            writeln!(f, "kernel_form_min_eig: {v:e}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "check.{}: {} ({:e})",
                c.name.replace(' ', "_"),
                if c.ok { "ok" } else { "FAILED" },
                c.value
            )?;
        }
        Ok(())
    }
}

fn rel(residual: f64, scale: f64) -> f64 {
    residual / scale.max(1.0)
}

/// Symmetry, definiteness and invertibility constraints on the model data.
pub fn validate_structure(model: &PhsModel, tol: f64) -> Result<AssumptionReport> {
    model.check_dimensions()?;
    let mut rep = AssumptionReport::new(tol);

    let skew = |m: &Mat| rel((m + m.transpose()).norm(), m.norm());
    let sym = |m: &Mat| rel((m - m.transpose()).norm(), m.norm());

    let r = skew(&model.p2);
    rep.push("P2 skew-symmetric", r, r <= tol);
    let r = sym(&model.p1);
    rep.push("P1 symmetric", r, r <= tol);
    let r = skew(&model.p0);
    rep.push("P0 skew-symmetric", r, r <= tol);
    let r = sym(&model.g0);
    rep.push("G0 symmetric", r, r <= tol);
    let g_min = linalg::min_sym_eig(&model.g0);
    rep.push(
        "G0 positive semidefinite",
        g_min,
        g_min >= -tol * model.g0.norm().max(1.0),
    );

    let inv_ratio = |m: &Mat| {
        let sv = linalg::singular_values(m);
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    };
    match model.order {
        Order::First => {
            let r = rel(model.p2.norm(), model.p1.norm());
            rep.push("P2 zero for order 1", r, r <= tol);
            let c = inv_ratio(&model.p1);
            rep.push("P1 invertible", c, c > tol);
        }
        Order::Second => {
            let c = inv_ratio(&model.p2);
            rep.push("P2 invertible", c, c > tol);
        }
    }

    let mut h_sym = 0.0f64;
    let mut kappa = f64::INFINITY;
    for s in model.h.samples() {
        h_sym = h_sym.max(sym(s));
        kappa = kappa.min(linalg::min_sym_eig(s));
    }
    rep.push("H symmetric", h_sym, h_sym <= tol);
    rep.push("H uniformly positive", kappa, kappa > tol);

    let rows = model.w1.nrows() + model.w2.nrows();
    let expect = model.n * model.order.as_usize();
    rep.push("W row count", rows as f64, rows == expect);
    Ok(rep)
}

/// Boundary port transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPortMap {
    pub q: Mat,
    pub r_ext: Mat,
    pub sigma: Mat,
    pub trace_dim: usize,
}

/// `[[0, I], [I, 0]]` of size `2k`.
pub fn sigma(k: usize) -> Mat {
    let mut s = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        s[(i, k + i)] = 1.0;
        s[(k + i, i)] = 1.0;
    }
    s
}

pub fn build_port_map(model: &PhsModel) -> Result<BoundaryPortMap> {
    model.check_dimensions()?;
    let n = model.n;
    let q = match model.order {
        Order::First => {
            if model.p2.norm() > 1e-12 * model.p1.norm().max(1.0) {
                return Err(Error::OrderMismatch {
                    order: 1,
                    reason: "P2 must vanish".into(),
                });
            }
            model.p1.clone()
        }
        Order::Second => {
            if linalg::rank(&model.p2, 1e-12) < n {
                return Err(Error::OrderMismatch {
                    order: 2,
                    reason: "P2 must be invertible".into(),
                });
            }
            let mut q = Mat::zeros(2 * n, 2 * n);
            q.view_mut((0, 0), (n, n)).copy_from(&model.p1);
            q.view_mut((0, n), (n, n)).copy_from(&model.p2);
            q.view_mut((n, 0), (n, n)).copy_from(&(-&model.p2));
            q
        }
    };
    let k = q.nrows();
    if linalg::rank(&q, 1e-12) < k {
        return Err(Error::Singular("boundary matrix Q".into()));
    }
    let eye = Mat::identity(k, k);
    let top = linalg::hstack(&[&q, &(-&q)]);
    let bottom = linalg::hstack(&[&eye, &eye]);
    let r_ext = linalg::vstack(&[&top, &bottom]) * std::f64::consts::FRAC_1_SQRT_2;
    Ok(BoundaryPortMap {
        q,
        r_ext,
        sigma: sigma(k),
        trace_dim: 2 * k,
    })
}

/// Splits `R_ext * trace` into `(f, e)`.
///
/// The trace is ordered as values at `b` (then derivatives at `b` for order
/// two), followed by the same at `a`.
pub fn boundary_port_values(map: &BoundaryPortMap, trace: &Vector) -> Result<(Vector, Vector)> {
    if trace.len() != map.trace_dim {
        return Err(Error::dim("trace", map.trace_dim, trace.len()));
    }
    let v = &map.r_ext * trace;
    let half = map.trace_dim / 2;
    Ok((
        v.rows(0, half).into_owned(),
        v.rows(half, half).into_owned(),
    ))
}

/// Rank and sign conditions on `W = [W1; W2]` and the kernel form on
/// `ker W2`.
pub fn check_assumption_w(model: &PhsModel, tol: f64) -> Result<AssumptionReport> {
    model.check_dimensions()?;
    let td = model.trace_dim();
    let k = td / 2;
    let mut rep = AssumptionReport::new(tol);
    let w = model.w();
    let sig = sigma(k);

    let rank_w = linalg::rank(&w, tol);
    rep.rank_w = Some(rank_w);
    rep.push("W full rank", rank_w as f64, rank_w == k && w.nrows() == k);

    let wsw = &w * &sig * w.transpose();
    let wsw_min = linalg::min_sym_eig(&wsw);
    rep.wsw_min_eig = Some(wsw_min);
    rep.push("W Sigma W^T nonnegative", wsw_min, wsw_min >= -tol);

    let z = linalg::null_space(&model.w2, td, tol);
    let form = model.w1.transpose() * &model.wtilde + model.wtilde.transpose() * &model.w1 - &sig;
    let restricted = z.transpose() * form * &z;
    let kmin = if restricted.is_empty() {
        0.0
    } else {
        linalg::min_sym_eig(&restricted)
    };
    rep.kernel_form_min_eig = Some(kmin);
    rep.push("kernel form nonnegative", kmin, kmin >= -tol);
    Ok(rep)
}
