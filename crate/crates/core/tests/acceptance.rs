//! Acceptance checks, one PASS/FAIL line each. Exits nonzero on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use phsreg::closedloop::{
    assemble_closed_loop, estimate_decay_rate_series, lyapunov_certificate, notched_window_error,
    simulate, solve_regulator_steady_state, RegulatorSolution, SignalModel,
};
use phsreg::controller::{
    build_internal_model, check_internal_model_conditions, diagonalize_internal_model, gain_sweep,
    solve_h, InternalModelController, DEFAULT_DELTA_GRID,
};
use phsreg::discretize::{apply_output_feedback, check_passivity_kyp, discretize, StateSpaceModel};
use phsreg::linalg::{self, Mat};
use phsreg::phs::{check_assumption_w, sigma, PhsModel, Profile};
use phsreg::timoshenko::{build_demo_scenario, DemoScenario};
use proptest::prelude::*;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;
type Profile1d = Box<dyn Fn(f64) -> f64>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, start: Instant) -> Result<f64, String> {
    let el = start.elapsed();
    ensure(el < limit, || {
        format!(
            "runtime {:.2}s exceeds {:.0}s",
            el.as_secs_f64(),
            limit.as_secs_f64()
        )
    })?;
    Ok(el.as_secs_f64())
}

fn demo_controller(demo: &DemoScenario, delta: f64) -> InternalModelController {
    controller(
        &demo.controller.freqs,
        1,
        demo.controller.include_zero,
        demo.controller.dc,
        delta,
    )
}

fn assumption_verification() -> Outcome {
    let start = Instant::now();
    let demo = build_demo_scenario();
    let rep = check_assumption_w(&demo.model, 1e-12).map_err(|e| e.to_string())?;
    let w = demo.model.w();
    let wsw = (&w * sigma(4) * w.transpose()).norm();
    let rank = rep.rank_w.unwrap_or(0);
    let kernel = rep.kernel_form_min_eig.unwrap_or(f64::NAN);
    let secs = timed(Duration::from_secs(1), start)?;
    ensure(rank == 4, || format!("rank(W) = {rank}"))?;
    ensure(wsw <= 1e-12, || format!("|W Σ W^T| = {wsw:e}"))?;
    ensure(kernel.abs() <= 1e-12, || {
        format!("kernel form min eig {kernel:e}")
    })?;
    Ok(format!(
        "rank 4, |WΣW^T| = {wsw:e}, kernel min eig {kernel:e}, {secs:.3}s"
    ))
}

fn discrete_passivity() -> Outcome {
    let start = Instant::now();
    let demo = build_demo_scenario();
    let mut worst: f64 = f64::NEG_INFINITY;
    for n_f in [10, 25, 50] {
        let ss = discretize(&demo.model, n_f).map_err(|e| e.to_string())?;
        let kyp = check_passivity_kyp(&ss, 1e-8 * linalg::norm2(&ss.m));
        ensure(kyp.passed, || {
            format!(
                "beam N_f = {n_f}: max eig {:e} > {:e}",
                kyp.max_eig, kyp.tol
            )
        })?;
        worst = worst.max(kyp.max_eig / kyp.tol);
    }
    let models = samples((admissible_model(), 2usize..=12), 50);
    for (k, (model, n_f)) in models.iter().enumerate() {
        let ss = discretize(model, *n_f).map_err(|e| format!("random model {k}: {e}"))?;
        let kyp = check_passivity_kyp(&ss, 1e-8 * linalg::norm2(&ss.m));
        ensure(kyp.passed, || {
            format!(
                "random model {k} (n = {}): max eig {:e}",
                model.n, kyp.max_eig
            )
        })?;
        worst = worst.max(kyp.max_eig / kyp.tol);
    }
    let secs = timed(Duration::from_secs(30), start)?;
    Ok(format!(
        "3 beam grids + 50 random models, worst max_eig/tol = {worst:.2e}, {secs:.2}s"
    ))
}

fn controller_structure() -> Outcome {
    let cases = samples(
        (
            freq_set(4),
            1usize..=3,
            any::<bool>(),
            any::<prop::sample::Index>(),
        ),
        60,
    );
    let mut omitted_checked = 0;
    for (k, (freqs, p, zero, pick)) in cases.into_iter().enumerate() {
        let (jc, mut bc) = build_internal_model(&freqs, p, zero).map_err(|e| e.to_string())?;
        ensure(jc == -jc.transpose(), || format!("case {k}: Jc not skew"))?;
        let d = diagonalize_internal_model(&jc, &bc, &freqs, p, zero).map_err(|e| e.to_string())?;
        let r1 = (&d.t * &d.g1 * &d.tinv - linalg::to_complex(&jc)).norm() / jc.norm();
        let r2 = (&d.t * &d.g2 - linalg::to_complex(&bc)).norm();
        ensure(r1 <= 1e-12 && r2 <= 1e-12, || {
            format!("case {k}: T residuals {r1:e}, {r2:e}")
        })?;
        let rep = check_internal_model_conditions(&jc, &bc, &freqs, zero);
        ensure(rep.passed, || {
            format!("case {k}: rank conditions fail\n{rep}")
        })?;

        let z = usize::from(zero);
        if freqs.len() + z < 2 {
            continue;
        }
        let block = pick.index(freqs.len() + z);
        let (row, expected) = if zero && block == 0 {
            (0, vec![0.0])
        } else {
            let w = freqs[block - z];
            (z * p + 2 * p * (block - z), vec![w, -w])
        };
        bc.rows_mut(row, p).fill(0.0);
        let rep = check_internal_model_conditions(&jc, &bc, &freqs, zero);
        ensure(!rep.passed && rep.failed_exponents() == expected, || {
            format!(
                "case {k}: omitted block {block} fails at {:?}, expected {expected:?}",
                rep.failed_exponents()
            )
        })?;
        omitted_checked += 1;
    }
    Ok(format!(
        "60 random instances, {omitted_checked} omitted-block checks"
    ))
}

fn h_identities() -> Outcome {
    let demo = build_demo_scenario();
    let ss = discretize(&demo.model, demo.sim.n_f).map_err(|e| e.to_string())?;
    let ctrl = demo_controller(&demo, demo.controller.delta_c);
    let fb = apply_output_feedback(&ss, &ctrl.dc).map_err(|e| e.to_string())?;
    let h = solve_h(&fb, &ctrl).map_err(|e| e.to_string())?;
    let mut worst = h.sylvester_residual.max(h.transfer_residual);
    ensure(worst <= 1e-8, || {
        format!(
            "beam: sylvester {:e}, transfer {:e}",
            h.sylvester_residual, h.transfer_residual
        )
    })?;
    let plants = samples(
        (stable_passive_plant(2, true), freq_set(3), any::<bool>()),
        20,
    );
    for (k, (ss, freqs, zero)) in plants.iter().enumerate() {
        let c = controller(freqs, 2, *zero, 0.1, 0.1);
        let h = solve_h(ss, &c).map_err(|e| format!("plant {k}: {e}"))?;
        let r = h.sylvester_residual.max(h.transfer_residual);
        ensure(r <= 1e-8, || format!("plant {k}: residual {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!(
        "beam + 20 random plants, worst relative residual {worst:e}"
    ))
}

fn max_abs_error(sol: &RegulatorSolution) -> f64 {
    sol.components
        .iter()
        .filter(|c| c.in_internal_model)
        .map(|c| c.error_norm)
        .fold(0.0, f64::max)
}

fn with_h_scaled(model: &PhsModel, f: impl Fn(f64) -> f64) -> PhsModel {
    let h = model.h.eval(0.0);
    let (a, b) = model.interval;
    let grid: Vec<f64> = (0..=8).map(|k| a + (b - a) * k as f64 / 8.0).collect();
    let values = grid.iter().map(|&z| &h * f((z - a) / (b - a))).collect();
    PhsModel {
        h: Profile::Sampled { grid, values },
        ..model.clone()
    }
}

fn regulator_oracle() -> Outcome {
    let demo = build_demo_scenario();
    let base = demo_controller(&demo, demo.controller.delta_c);
    let mut worst: f64 = 0.0;
    let mut loops = 0;
    let perturbations: [(&str, Profile1d); 4] = [
        ("nominal", Box::new(|_| 1.0)),
        ("+10%", Box::new(|_| 1.1)),
        ("-10%", Box::new(|_| 0.9)),
        (
            "varying 10%",
            Box::new(|s: f64| 1.0 + 0.1 * (3.0 * s).sin()),
        ),
    ];
    let nominal = discretize(&demo.model, demo.sim.n_f).map_err(|e| e.to_string())?;
    let sweep = gain_sweep(&nominal, &base, &DEFAULT_DELTA_GRID).map_err(|e| e.to_string())?;
    for (name, f) in &perturbations {
        let ss =
            discretize(&with_h_scaled(&demo.model, f), demo.sim.n_f).map_err(|e| e.to_string())?;
        for delta in sweep.stable_deltas() {
            let cl =
                assemble_closed_loop(&ss, &base.with_delta(delta)).map_err(|e| e.to_string())?;
            if cl.abscissa().map_err(|e| e.to_string())? >= 0.0 {
                continue;
            }
            let sol = solve_regulator_steady_state(&cl, &demo.signal).map_err(|e| e.to_string())?;
            let err = max_abs_error(&sol);
            ensure(err <= 1e-8, || {
                format!("beam {name}, δ = {delta}: |Ce Σ - y| = {err:e}")
            })?;
            worst = worst.max(err);
            loops += 1;
        }
    }
    let plants = samples(
        (
            stable_passive_plant(1, true),
            freq_set(3),
            any::<bool>(),
            mat(8, 3),
        ),
        20,
    );
    for (k, (ss, freqs, zero, amps)) in plants.iter().enumerate() {
        let c = controller(freqs, 1, *zero, 0.1, 0.1);
        let Ok(sw) = gain_sweep(ss, &c, &DEFAULT_DELTA_GRID) else {
            continue;
        };
        let cl =
            assemble_closed_loop(ss, &c.with_delta(sw.recommended)).map_err(|e| e.to_string())?;
        let mut sig = SignalModel::zeros(freqs.clone(), 1, cl.n_dist());
        for j in 0..freqs.len() {
            sig.a1[j][0] = 10.0 * amps[(j, 0)];
            sig.a2[j][0] = 10.0 * amps[(j, 1)];
            sig.b2[j][0] = amps[(4 + j, 2)];
        }
        sig.a0[0] = if *zero { amps[(7, 0)] } else { 0.0 };
        let sol = solve_regulator_steady_state(&cl, &sig).map_err(|e| e.to_string())?;
        let err = max_abs_error(&sol);
        ensure(err <= 1e-8, || {
            format!("random plant {k}: |Ce Σ - y| = {err:e}")
        })?;
        worst = worst.max(err);
        loops += 1;
    }
    Ok(format!(
        "{loops} stable loops (beam with H ±10%, random plants), worst |Ce Σ - y| = {worst:e}"
    ))
}

fn beam_reproduction() -> Outcome {
    let start = Instant::now();
    let demo = build_demo_scenario();
    let ss = discretize(&demo.model, demo.sim.n_f).map_err(|e| e.to_string())?;
    let mut ctrl = demo_controller(&demo, demo.controller.delta_c);
    let mut abscissa = assemble_closed_loop(&ss, &ctrl)
        .and_then(|c| c.abscissa())
        .map_err(|e| e.to_string())?;
    let mut note = String::new();
    if abscissa >= 0.0 {
        let sweep = gain_sweep(&ss, &ctrl, &DEFAULT_DELTA_GRID).map_err(|e| e.to_string())?;
        let delta = sweep
            .stable_deltas()
            .into_iter()
            .rfind(|&d| d <= demo.controller.delta_c)
            .ok_or("no stable δ_c in (0, 0.2]")?;
        note = format!(" (δ_c = 0.2 unstable, using {delta})");
        ctrl = ctrl.with_delta(delta);
        abscissa = assemble_closed_loop(&ss, &ctrl)
            .and_then(|c| c.abscissa())
            .map_err(|e| e.to_string())?;
    }
    let cl = assemble_closed_loop(&ss, &ctrl).map_err(|e| e.to_string())?;
    let res =
        simulate(&cl, &demo.signal, demo.sim.horizon, demo.sim.dt).map_err(|e| e.to_string())?;
    let notched = notched_window_error(&res, &[demo.disturbance_freq], 0.1);
    let max_ref = res.max_reference_norm();
    let rel = notched / max_ref;
    let secs = timed(Duration::from_secs(120), start)?;
    let detail = format!(
        "abscissa {abscissa:e}, notched final-window error {notched:.4e} / max|y_ref| {max_ref:.4e} = {:.2}%{note}, {secs:.1}s",
        100.0 * rel
    );
    ensure(abscissa < 0.0 && rel <= 0.01, || detail.clone())?;
    Ok(detail)
}

fn lyapunov_certificates() -> Outcome {
    let scalar = StateSpaceModel::from_abcd(
        -Mat::identity(1, 1),
        Mat::identity(1, 1),
        Mat::identity(1, 1),
        Mat::zeros(1, 1),
        Mat::identity(1, 1),
    )
    .map_err(|e| e.to_string())?;
    let ctrl = controller(&[], 1, true, 0.0, 0.1);
    let h = solve_h(&scalar, &ctrl).map_err(|e| e.to_string())?;
    let cert = lyapunov_certificate(&scalar, &ctrl, &h).map_err(|e| e.to_string())?;
    let res = cert
        .p1_residual
        .max(cert.p2_residual)
        .max(cert.pc0_residual);
    ensure(cert.valid && res <= 1e-10, || {
        format!("scalar plant certificate:\n{cert}")
    })?;

    let demo = build_demo_scenario();
    let ss = discretize(&demo.model, demo.sim.n_f).map_err(|e| e.to_string())?;
    let base = demo_controller(&demo, demo.controller.delta_c);
    let fb = apply_output_feedback(&ss, &base.dc).map_err(|e| e.to_string())?;
    let sweep = gain_sweep(&ss, &base, &DEFAULT_DELTA_GRID).map_err(|e| e.to_string())?;
    let (mut certified, mut attempted) = (Vec::new(), 0);
    for delta in sweep.stable_deltas() {
        attempted += 1;
        let c = base.with_delta(delta);
        let h = solve_h(&fb, &c).map_err(|e| e.to_string())?;
        let Ok(cert) = lyapunov_certificate(&fb, &c, &h) else {
            continue;
        };
        if cert.valid {
            let abscissa = assemble_closed_loop(&ss, &c)
                .and_then(|cl| cl.abscissa())
                .map_err(|e| e.to_string())?;
            ensure(abscissa < 0.0, || {
                format!("δ = {delta} certified but abscissa {abscissa:e}")
            })?;
            certified.push(delta);
        }
    }
    Ok(format!(
        "scalar valid (max residual {res:e}); beam: {attempted} stable gains attempted, certified at {certified:?}, all sound"
    ))
}

fn decay_estimator() -> Outcome {
    let t: Vec<f64> = (0..=20000).map(|k| k as f64 * 1e-3).collect();
    let plain: Vec<f64> = t.iter().map(|&t| (-0.5 * t).exp()).collect();
    let osc: Vec<f64> = t
        .iter()
        .map(|&t| (-0.5 * t).exp() * (7.0 * t).cos().abs())
        .collect();
    let mut out = Vec::new();
    for (name, v) in [("envelope", plain), ("oscillating", osc)] {
        let est = estimate_decay_rate_series(&t, &v, 0.5, 1e-300).map_err(|e| e.to_string())?;
        ensure((est.alpha - 0.5).abs() <= 0.025, || {
            format!("{name}: α = {}", est.alpha)
        })?;
        out.push(format!("{name} α = {:.5}", est.alpha));
    }
    Ok(out.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        (
            "assumption verification on the beam",
            assumption_verification,
        ),
        ("discrete passivity (KYP)", discrete_passivity),
        (
            "controller structure and rank conditions",
            controller_structure,
        ),
        ("H identities", h_identities),
        ("regulator equations and robustness", regulator_oracle),
        ("beam tracking reproduction", beam_reproduction),
        ("Lyapunov certificate", lyapunov_certificates),
        ("decay-rate estimator", decay_estimator),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}: {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
