//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use phsreg::controller::InternalModelController;
use phsreg::discretize::StateSpaceModel;
use phsreg::linalg::Mat;
use phsreg::phs::{Order, PhsModel, Profile};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0..1.0f64, rows * cols)
        .prop_map(move |v| Mat::from_row_slice(rows, cols, &v))
}

pub fn skew(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

fn spd(g: &Mat, shift: f64) -> Mat {
    g * g.transpose() + Mat::identity(g.nrows(), g.nrows()) * shift
}

/// Symmetric invertible `P1` with eigenvalue magnitudes in `[0.5, 2]`.
fn indefinite(q: &Mat, lam: &[f64], signs: &[bool]) -> Mat {
    let q = q.clone().qr().q();
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        lam.len(),
        lam.iter().zip(signs).map(|(&l, &s)| if s { l } else { -l }),
    ));
    let p = &q * d * q.transpose();
    (&p + p.transpose()) * 0.5
}

/// Input/output maps of an impedance-passive boundary.
///
/// `W = [I, K]` with `K + K^T ⪰ 0`, the first `m` rows actuated and
/// `y = e_{1..m}`. A mixing `T` on the inputs is compensated by `T^-T` on
/// the outputs.
pub fn boundary(n: usize, m: usize, k: &Mat, t: &Mat) -> (Mat, Mat, Mat) {
    let mut w = Mat::zeros(n, 2 * n);
    w.view_mut((0, 0), (n, n)).fill_with_identity();
    w.view_mut((0, n), (n, n)).copy_from(k);
    let mut wt = Mat::zeros(m, 2 * n);
    for i in 0..m {
        wt[(i, n + i)] = 1.0;
    }
    let t_inv_t = t
        .clone()
        .try_inverse()
        .expect("mixing is invertible")
        .transpose();
    let w1 = t * w.rows(0, m);
    let w2 = w.rows(m, n - m).into_owned();
    (w1, w2, t_inv_t * wt)
}

/// First-order models with `n ≤ 3` satisfying the structural and boundary
/// assumptions.
pub fn admissible_model() -> impl Strategy<Value = PhsModel> {
    (1usize..=3)
        .prop_flat_map(|n| (Just(n), 1..=n))
        .prop_flat_map(|(n, m)| {
            (
                Just((n, m)),
                (
                    mat(n, n),
                    prop::collection::vec(0.5..2.0f64, n),
                    prop::collection::vec(any::<bool>(), n),
                ),
                (mat(n, n), mat(n, n), mat(n, n), mat(n, n)),
                (mat(n, n), mat(n, n), mat(m, m)),
                (0.5..2.0f64, any::<bool>()),
            )
        })
        .prop_map(
            |((n, m), (q, lam, signs), (p0, g0, h0, h1), (kr, ks, t), (len, sampled))| {
                let p1 = indefinite(&q, &lam, &signs);
                let k = &kr * kr.transpose() * 0.5 + skew(&ks);
                let t = Mat::identity(m, m) + t * 0.3;
                let (w1, w2, wtilde) = boundary(n, m, &k, &t);
                let h = if sampled {
                    Profile::Sampled {
                        grid: vec![0.0, len],
                        values: vec![spd(&h0, 0.5), spd(&h1, 0.5)],
                    }
                } else {
                    Profile::Constant(spd(&h0, 0.5))
                };
                PhsModel {
                    n,
                    order: Order::First,
                    p2: Mat::zeros(n, n),
                    p1,
                    p0: skew(&p0),
                    g0: &g0 * g0.transpose() * 0.5,
                    h,
                    bd: None,
                    w1,
                    w2,
                    wtilde,
                    interval: (0.0, len),
                }
            },
        )
}

/// `A = J - R` with `R ≻ 0`, `C = B^T`, `M = I`; `D ⪰ 0` when `feedthrough`.
pub fn stable_passive_plant(p: usize, feedthrough: bool) -> impl Strategy<Value = StateSpaceModel> {
    (p..=6)
        .prop_flat_map(move |nx| (mat(nx, nx), mat(nx, nx), mat(nx, p), mat(p, p)))
        .prop_map(move |(j, g, b, d)| {
            let nx = j.nrows();
            let a = skew(&j) * 4.0 - spd(&g, 0.2);
            let d = if feedthrough {
                &d * d.transpose() * 0.5
            } else {
                Mat::zeros(p, p)
            };
            StateSpaceModel::from_abcd(a, b.clone(), b.transpose(), d, Mat::identity(nx, nx))
                .unwrap()
        })
}

/// Lossless plant `A = J`, `C = B^T`, `D = 0`.
pub fn lossless_plant(p: usize) -> impl Strategy<Value = StateSpaceModel> {
    (p..=6)
        .prop_flat_map(move |nx| (mat(nx, nx), mat(nx, p)))
        .prop_map(move |(j, b)| {
            let nx = j.nrows();
            StateSpaceModel::from_abcd(
                skew(&j) * 4.0,
                b.clone(),
                b.transpose(),
                Mat::zeros(p, p),
                Mat::identity(nx, nx),
            )
            .unwrap()
        })
}

/// Up to `q` strictly increasing frequencies, at least 0.5 apart.
pub fn freq_set(q: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5..5.0f64, 1..=q).prop_map(|gaps| {
        gaps.iter()
            .scan(0.0, |acc, g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    })
}

pub fn controller(
    freqs: &[f64],
    p: usize,
    include_zero: bool,
    dc: f64,
    delta: f64,
) -> InternalModelController {
    InternalModelController::new(freqs, p, include_zero, Mat::identity(p, p) * dc, delta).unwrap()
}

/// Deterministic draws from a strategy, for non-proptest harnesses.
pub fn samples<S: Strategy>(strategy: S, count: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..count)
        .map(|_| {
            strategy
                .new_tree(&mut runner)
                .expect("strategy generates")
                .current()
        })
        .collect()
}

/// Relative Frobenius distance.
pub fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}
