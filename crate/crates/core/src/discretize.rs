//! Passive finite-dimensional approximation of first-order models, plus the
//! transfer-function, KYP and stability primitives used downstream.
//!
//! Energy variables are element averages `x_i`, efforts are `e_i = H_i x_i`
//! with `H_i` sampled at element midpoints. Interior nodes carry the average
//! of the two neighbouring efforts, which makes the interior power exchange
//! telescope exactly. At each end the boundary effort is the adjacent element
//! effort plus a jump restricted to the incoming characteristic directions,
//! i.e. the generalized eigenvectors of `(P1, H^-1)` whose eigenvalues point
//! into the domain. The jump amplitudes are fixed by the `W1`/`W2` rows, and
//! the `Wtilde` rows of the resulting port values give the output.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat, Resolvent};
use crate::phs::{self, Order, PhsModel};

/// Discretized plant
///
/// ```text
/// x' = A x + B (u + w2) + Bd w1 + Bw3 w3
/// y  = C x + D (u + w2) + Dw3 w3
/// ```
///
/// with stored energy `x^T M x / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: Mat,
    pub b: Mat,
    pub bd: Mat,
    pub bw3: Mat,
    pub c: Mat,
    pub d: Mat,
    pub dw3: Mat,
    pub m: Mat,
    pub n_elements: usize,
    pub provenance: String,
}

impl StateSpaceModel {
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_d1(&self) -> usize {
        self.bd.ncols()
    }

    pub fn n_d3(&self) -> usize {
        self.bw3.ncols()
    }

    /// Plain LTI system `x' = A x + B u`, `y = C x + D u` with energy weight
    /// `M` and no disturbance channels.
    pub fn from_abcd(a: Mat, b: Mat, c: Mat, d: Mat, m: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim(
                "A",
                format!("{n}x{n}"),
                format!("{}x{}", n, a.ncols()),
            ));
        }
        let p = b.ncols();
        if b.nrows() != n {
            return Err(Error::dim("B rows", n, b.nrows()));
        }
        if c.shape() != (p, n) {
            return Err(Error::dim(
                "C",
                format!("{p}x{n}"),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        if d.shape() != (p, p) {
            return Err(Error::dim(
                "D",
                format!("{p}x{p}"),
                format!("{}x{}", d.nrows(), d.ncols()),
            ));
        }
        if m.shape() != (n, n) {
            return Err(Error::dim(
                "M",
                format!("{n}x{n}"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(StateSpaceModel {
            a,
            b,
            bd: Mat::zeros(n, 0),
            bw3: Mat::zeros(n, 0),
            c,
            d,
            dw3: Mat::zeros(p, 0),
            m,
            n_elements: 0,
            provenance: "user-supplied state-space data".into(),
        })
    }

    /// `P(λ) = C (λI - A)^-1 B + D`.
    pub fn transfer_function(&self, lambda: Complex64) -> Result<CMat> {
        transfer_function(self, lambda)
    }
}

/// Passivity certificate for a discretized plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KypReport {
    pub max_eig: f64,
    pub passed: bool,
    pub tol: f64,
}

/// Tolerance used by the structural pre-checks of [`discretize`].
const STRUCTURE_TOL: f64 = 1e-10;

/// Incoming-characteristic basis at one end: columns `v = L w` with
/// `H = L L^T` and `w` the eigenvectors of `L^T P1 L` of the selected sign.
fn characteristic_basis(p1: &Mat, h: &Mat, positive: bool) -> Result<Mat> {
    let l = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Structure("H is not positive definite at a boundary element".into()))?
        .l();
    let eig = (l.transpose() * p1 * &l).symmetric_eigen();
    let cols: Vec<_> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| if positive { lam > 0.0 } else { lam < 0.0 })
        .map(|(k, _)| &l * eig.eigenvectors.column(k))
        .collect();
    Ok(if cols.is_empty() {
        Mat::zeros(p1.nrows(), 0)
    } else {
        Mat::from_columns(&cols)
    })
}

/// Discretizes a first-order model on `n_f` uniform elements.
pub fn discretize(model: &PhsModel, n_f: usize) -> Result<StateSpaceModel> {
    if model.order != Order::First {
        return Err(Error::UnsupportedOrder(model.order.as_usize()));
    }
    if n_f < 2 {
        return Err(Error::param(
            "N_f",
            format!("need at least 2 elements, got {n_f}"),
        ));
    }
    let structure = phs::validate_structure(model, STRUCTURE_TOL)?;
    let boundary = phs::check_assumption_w(model, STRUCTURE_TOL)?;
    let report = structure.merge(boundary);
    if !report.passed {
        return Err(Error::Structure(format!(
            "model fails: {}",
            report.failures().join(", ")
        )));
    }
    let map = phs::build_port_map(model)?;

    let n = model.n;
    let p = model.inputs();
    let nd3 = model.n_d3();
    let ng = p + nd3;
    let nx = n * n_f;
    let (za, zb) = model.interval;
    let dz = (zb - za) / n_f as f64;
    let mids: Vec<f64> = (0..n_f).map(|i| za + (i as f64 + 0.5) * dz).collect();
    let hs: Vec<Mat> = mids.iter().map(|&z| model.h.eval(z)).collect();

    // Port rows split into the parts acting on the trace at b and at a.
    let r = model.w() * &map.r_ext;
    let r_b = r.columns(0, n).into_owned();
    let r_a = r.columns(n, n).into_owned();
    let s_plus = characteristic_basis(&model.p1, &hs[n_f - 1], true)?;
    let s_minus = characteristic_basis(&model.p1, &hs[0], false)?;
    let n_plus = s_plus.ncols();
    let kmat = linalg::hstack(&[&(&r_b * &s_plus), &(&r_a * &s_minus)]);
    let kinv = kmat
        .clone()
        .try_inverse()
        .filter(|k| k.iter().all(|v| v.is_finite()))
        .ok_or_else(|| {
            Error::Singular("boundary closure (W rows on incoming characteristics)".into())
        })?;

    // Jump amplitudes: alpha = Kinv (g - R_b e_last - R_a e_first).
    let last = (n_f - 1) * n;
    let mut alpha_x = Mat::zeros(n, nx);
    alpha_x
        .view_mut((0, last), (n, n))
        .copy_from(&(-(&kinv * &r_b * &hs[n_f - 1])));
    {
        let first = -(&kinv * &r_a * &hs[0]);
        let mut blk = alpha_x.view_mut((0, 0), (n, n));
        blk += first;
    }
    let alpha_g = kinv;

    // Boundary effort traces as affine maps of (x, g).
    let mut beta_b_x = &s_plus * alpha_x.rows(0, n_plus);
    {
        let mut blk = beta_b_x.view_mut((0, last), (n, n));
        blk += &hs[n_f - 1];
    }
    let beta_b_g = &s_plus * alpha_g.rows(0, n_plus);
    let mut beta_a_x = &s_minus * alpha_x.rows(n_plus, n - n_plus);
    {
        let mut blk = beta_a_x.view_mut((0, 0), (n, n));
        blk += &hs[0];
    }
    let beta_a_g = &s_minus * alpha_g.rows(n_plus, n - n_plus);

    let mut a = Mat::zeros(nx, nx);
    let mut g = Mat::zeros(nx, ng);
    let p1_dz = &model.p1 / dz;
    let p0g0 = &model.p0 - &model.g0;
    let half = 0.5;
    for i in 0..n_f {
        let row = i * n;
        // right node contribution (+), left node contribution (-)
        if i + 1 < n_f {
            for (k, w) in [(i, half), (i + 1, half)] {
                let mut blk = a.view_mut((row, k * n), (n, n));
                blk += &p1_dz * &hs[k] * w;
            }
        } else {
            let mut blk = a.view_mut((row, 0), (n, nx));
            blk += &p1_dz * &beta_b_x;
            let mut gb = g.view_mut((row, 0), (n, ng));
            gb += &p1_dz * &beta_b_g;
        }
        if i > 0 {
            for (k, w) in [(i - 1, half), (i, half)] {
                let mut blk = a.view_mut((row, k * n), (n, n));
                blk -= &p1_dz * &hs[k] * w;
            }
        } else {
            let mut blk = a.view_mut((row, 0), (n, nx));
            blk -= &p1_dz * &beta_a_x;
            let mut gb = g.view_mut((row, 0), (n, ng));
            gb -= &p1_dz * &beta_a_g;
        }
        let mut diag = a.view_mut((row, row), (n, n));
        diag += &p0g0 * &hs[i];
    }

    let out = &model.wtilde * &map.r_ext;
    let c = &out * linalg::vstack(&[&beta_b_x, &beta_a_x]);
    let dg = &out * linalg::vstack(&[&beta_b_g, &beta_a_g]);

    let nd1 = model.n_d1();
    let mut bd = Mat::zeros(nx, nd1);
    if let Some(profile) = &model.bd {
        for (i, &z) in mids.iter().enumerate() {
            bd.view_mut((i * n, 0), (n, nd1))
                .copy_from(&profile.eval(z));
        }
    }
    let blocks: Vec<Mat> = hs.iter().map(|h| h * dz).collect();
    let m = linalg::block_diag(&blocks.iter().collect::<Vec<_>>());

    Ok(StateSpaceModel {
        a,
        b: g.columns(0, p).into_owned(),
        bd,
        bw3: g.columns(p, nd3).into_owned(),
        c,
        d: dg.columns(0, p).into_owned(),
        dw3: dg.columns(p, nd3).into_owned(),
        m,
        n_elements: n_f,
        provenance: format!(
            "cell-centred mixed scheme with characteristic boundary closure; n = {n}, N_f = {n_f}, \
             interval [{za}, {zb}], H sampled at element midpoints; independent reconstruction"
        ),
    })
}

/// Plant under `u = -K y + v`.
///
/// With `F = (I + D K)^-1`: `A - B K F C`, `B (I + K D)^-1`, `F C`, `F D`;
/// the `w3` channel is routed the same way.
pub fn apply_output_feedback(ss: &StateSpaceModel, k: &Mat) -> Result<StateSpaceModel> {
    let p = ss.p();
    if k.shape() != (p, p) {
        return Err(Error::dim(
            "K",
            format!("{p}x{p}"),
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    let eye = Mat::identity(p, p);
    let f = (&eye + &ss.d * k)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I + D K".into()))?;
    let g = (&eye + k * &ss.d)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I + K D".into()))?;
    let bkf = &ss.b * k * &f;
    Ok(StateSpaceModel {
        a: &ss.a - &bkf * &ss.c,
        b: &ss.b * g,
        bd: ss.bd.clone(),
        bw3: &ss.bw3 - &bkf * &ss.dw3,
        c: &f * &ss.c,
        d: &f * &ss.d,
        dw3: &f * &ss.dw3,
        m: ss.m.clone(),
        n_elements: ss.n_elements,
        provenance: ss.provenance.clone(),
    })
}

/// `C (λI - A)^-1 B + D`.
pub fn transfer_function(ss: &StateSpaceModel, lambda: Complex64) -> Result<CMat> {
    let res = Resolvent::new(&ss.a);
    transfer_with(&res, ss, lambda)
}

/// Transfer function evaluation reusing a prepared resolvent of `ss.a`.
pub fn transfer_with(res: &Resolvent, ss: &StateSpaceModel, lambda: Complex64) -> Result<CMat> {
    let x = res.solve(lambda, &linalg::to_complex(&ss.b))?;
    Ok(linalg::to_complex(&ss.c) * x + linalg::to_complex(&ss.d))
}

/// Largest eigenvalue of `[[A^T M + M A, M B - C^T], [B^T M - C, -(D + D^T)]]`.
pub fn check_passivity_kyp(ss: &StateSpaceModel, tol: f64) -> KypReport {
    let mb_c = &ss.m * &ss.b - ss.c.transpose();
    let top = linalg::hstack(&[&(ss.a.transpose() * &ss.m + &ss.m * &ss.a), &mb_c]);
    let bottom = linalg::hstack(&[&mb_c.transpose(), &(-(&ss.d + ss.d.transpose()))]);
    let max_eig = linalg::max_sym_eig(&linalg::vstack(&[&top, &bottom]));
    KypReport {
        max_eig,
        passed: max_eig <= tol,
        tol,
    }
}

/// Largest real part of the spectrum of `a`.
pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    linalg::spectral_abscissa(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phs::Profile;
    use crate::timoshenko::{build_timoshenko_model, TimoshenkoParams};
    use approx::assert_abs_diff_eq;

    fn transport(n_f: usize) -> StateSpaceModel {
        let model = PhsModel {
            n: 1,
            order: Order::First,
            p2: Mat::zeros(1, 1),
            p1: Mat::identity(1, 1),
            p0: Mat::zeros(1, 1),
            g0: Mat::zeros(1, 1),
            h: Profile::Constant(Mat::identity(1, 1)),
            bd: None,
            w1: Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            w2: Mat::zeros(0, 2),
            wtilde: Mat::from_row_slice(1, 2, &[0.0, 1.0]),
            interval: (0.0, 1.0),
        };
        discretize(&model, n_f).unwrap()
    }

    #[test]
    fn timoshenko_dimensions() {
        let ss = discretize(&build_timoshenko_model(&TimoshenkoParams::piezo_tube()), 50).unwrap();
        assert_eq!(ss.nx(), 200);
        assert_eq!(ss.p(), 1);
        assert_eq!(ss.n_d3(), 3);
        assert_eq!(ss.n_d1(), 0);
    }

    #[test]
    fn lossless_transport_is_energy_neutral_inside() {
        let ss = transport(12);
        let lyap = ss.a.transpose() * &ss.m + &ss.m * &ss.a;
        assert!(linalg::max_sym_eig(&lyap) <= 1e-8);
        let kyp = check_passivity_kyp(&ss, 1e-8);
        assert!(kyp.passed, "{kyp:?}");
        assert!(kyp.max_eig.abs() <= 1e-8);
    }

    #[test]
    fn flipped_output_breaks_kyp() {
        let mut ss =
            discretize(&build_timoshenko_model(&TimoshenkoParams::piezo_tube()), 10).unwrap();
        ss.c = -ss.c;
        let tol = 1e-8 * linalg::norm2(&ss.m);
        assert!(!check_passivity_kyp(&ss, tol).passed);
    }

    #[test]
    fn order_two_and_coarse_grids_rejected() {
        let mut m = build_timoshenko_model(&TimoshenkoParams::piezo_tube());
        assert!(matches!(
            discretize(&m, 1),
            Err(Error::InvalidParameter { .. })
        ));
        m.order = Order::Second;
        assert!(matches!(
            discretize(&m, 10),
            Err(Error::UnsupportedOrder(2))
        ));
    }

    #[test]
    fn integrator_feedback() {
        let ss = StateSpaceModel::from_abcd(
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap();
        let fb = apply_output_feedback(&ss, &Mat::identity(1, 1)).unwrap();
        assert_eq!(fb.a[(0, 0)], -1.0);
        let same = apply_output_feedback(&ss, &Mat::zeros(1, 1)).unwrap();
        assert_eq!(same, ss);
    }

    #[test]
    fn first_order_lag_dc_gain() {
        let ss = StateSpaceModel::from_abcd(
            -Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap();
        let p = transfer_function(&ss, Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert!(matches!(
            transfer_function(&ss, Complex64::new(-1.0, 0.0)),
            Err(Error::ResolventSingular { .. })
        ));
    }

    #[test]
    fn abscissa_examples() {
        assert_abs_diff_eq!(
            spectral_abscissa(&(-Mat::identity(3, 3))).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        let rot = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(spectral_abscissa(&rot).unwrap(), 0.0, epsilon = 1e-14);
    }
}
