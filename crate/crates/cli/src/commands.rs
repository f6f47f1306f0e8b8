use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use nalgebra::{Complex, DMatrix};
use phsreg::closedloop::{
    assemble_closed_loop, estimate_decay_rate_series, lyapunov_certificate, notched_window_error,
    simulate_with, solve_regulator_steady_state, ClosedLoopSystem, SignalModel, SimOptions,
};
use phsreg::controller::{
    check_internal_model_conditions, gain_sweep, solve_h, InternalModelController,
    DEFAULT_DELTA_GRID,
};
use phsreg::discretize::{
    apply_output_feedback, check_passivity_kyp, discretize, transfer_function, StateSpaceModel,
};
use phsreg::io::{self, Report};
use phsreg::linalg;
use phsreg::phs::{check_assumption_w, validate_structure, PhsModel};
use phsreg::timoshenko::build_demo_scenario;
use phsreg::Error;

use crate::{Command, ControllerArgs, FreqArgs, PlantArgs};

/// Relative tracking bound applied by `demo-piezo`.
const TRACKING_BOUND: f64 = 0.01;
/// Trailing fraction of the horizon used by the tracking metric.
const FINAL_WINDOW: f64 = 0.1;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// A check or computation failed on valid input (exit 1).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "malformed input: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::Dimension { .. }
            | Error::InvalidParameter { .. }
            | Error::UnsupportedOrder(_)
            | Error::OrderMismatch { .. }
            | Error::StepGuard { .. } => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: phsreg::Result<T>) -> CliResult<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn load_model(path: &Path) -> CliResult<PhsModel> {
    in_file(path, io::parse_model(&read(path)?))
}

fn load_plant(args: &PlantArgs) -> CliResult<(PhsModel, StateSpaceModel)> {
    let model = load_model(&args.model)?;
    let ss = discretize(&model, args.nf)?;
    Ok((model, ss))
}

fn scalar_gain(p: usize, dc: f64) -> DMatrix<f64> {
    DMatrix::identity(p, p) * dc
}

fn load_controller(args: &ControllerArgs, p: usize) -> CliResult<InternalModelController> {
    let ctrl = in_file(
        &args.controller,
        io::parse_controller(&read(&args.controller)?),
    )?;
    if ctrl.p != p {
        return Err(CliError::Input(format!(
            "{}: controller has p = {}, the model has {p} outputs",
            args.controller.display(),
            ctrl.p
        )));
    }
    let dc = args
        .dc
        .map_or_else(|| ctrl.dc.clone(), |d| scalar_gain(p, d));
    let delta = args.delta_c.unwrap_or(ctrl.delta_c);
    Ok(InternalModelController::new(
        &ctrl.freqs,
        p,
        ctrl.include_zero,
        dc,
        delta,
    )?)
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

pub fn run(cmd: Command) -> CliResult<ExitCode> {
    match cmd {
        Command::Check { model, tol } => check(&model, tol),
        Command::Discretize {
            plant,
            dc,
            tol,
            out,
        } => discretize_cmd(&plant, dc, tol, out.as_deref()),
        Command::Zeros { plant, freqs, tol } => zeros(&plant, &freqs, tol),
        Command::Synth {
            plant,
            freqs,
            include_zero,
            dc,
            delta_c,
            out,
        } => synth(&plant, &freqs, include_zero, dc, delta_c, &out),
        Command::Sweep { plant, ctrl, grid } => sweep(&plant, &ctrl, &grid),
        Command::Simulate {
            plant,
            ctrl,
            signal,
            horizon,
            dt,
            strict,
            out,
        } => simulate_cmd(&plant, &ctrl, &signal, horizon, dt, strict, &out),
        Command::Certify { plant, ctrl } => certify(&plant, &ctrl),
        Command::DemoPiezo {
            out,
            nf,
            dc,
            delta_c,
            horizon,
            dt,
            strict,
        } => demo(
            &out,
            DemoOverrides {
                nf,
                dc,
                delta_c,
                horizon,
                dt,
            },
            strict,
        ),
    }
}

fn assumption_report(model: &PhsModel, tol: f64) -> CliResult<phsreg::phs::AssumptionReport> {
    Ok(validate_structure(model, tol)?.merge(check_assumption_w(model, tol)?))
}

fn check(path: &Path, tol: f64) -> CliResult<ExitCode> {
    let model = load_model(path)?;
    let report = assumption_report(&model, tol)?;
    print!("{report}");
    Ok(status(report.passed))
}

fn discretize_cmd(
    args: &PlantArgs,
    dc: Option<f64>,
    tol: f64,
    out: Option<&Path>,
) -> CliResult<ExitCode> {
    let (_, mut ss) = load_plant(args)?;
    if let Some(d) = dc {
        ss = apply_output_feedback(&ss, &scalar_gain(ss.p(), d))?;
    }
    let kyp = check_passivity_kyp(&ss, tol * linalg::norm2(&ss.m));
    let mut r = Report::new();
    r.push("elements", args.nf)
        .push("states", ss.nx())
        .push("inputs", ss.p())
        .push(
            "spectral_abscissa",
            format!("{:e}", linalg::spectral_abscissa(&ss.a)?),
        )
        .push("kyp_max_eig", format!("{:e}", kyp.max_eig))
        .push("kyp_tol", format!("{:e}", kyp.tol))
        .push("kyp_passed", kyp.passed);
    if let Some(dir) = out {
        let prov = format!(
            "discretization of {} on {} elements{}",
            args.model.display(),
            args.nf,
            dc.map_or(String::new(), |d| format!(", static feedback Dc = {d}"))
        );
        let text = io::write_matrix_container(
            &[
                ("A", &ss.a),
                ("B", &ss.b),
                ("C", &ss.c),
                ("D", &ss.d),
                ("M", &ss.m),
            ],
            &prov,
        );
        r.push("written", write(dir, "plant.txt", &text)?.display());
    }
    print!("{r}");
    Ok(status(kyp.passed))
}

fn zeros(args: &PlantArgs, fa: &FreqArgs, tol: f64) -> CliResult<ExitCode> {
    let (_, ss) = load_plant(args)?;
    let (freqs, include_zero) = match &fa.controller {
        Some(path) => {
            let c = in_file(path, io::parse_controller(&read(path)?))?;
            (c.freqs, c.include_zero)
        }
        None => (fa.freqs.clone(), fa.include_zero),
    };
    if freqs.is_empty() && !include_zero {
        return Err(CliError::Input(
            "no frequencies given (use --freqs or --controller)".into(),
        ));
    }
    let mut mus: Vec<f64> = if include_zero { vec![0.0] } else { Vec::new() };
    for &w in &freqs {
        mus.extend([w, -w]);
    }
    let mut r = Report::new();
    let mut all_ok = true;
    for mu in mus {
        let key = format!("mu={mu}");
        match transfer_function(&ss, Complex::new(0.0, mu)) {
            Ok(p) => {
                let min_eig = linalg::min_herm_eig(&linalg::herm_part(&p));
                let sigma_min = linalg::complex_singular_values(&p)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                let ok = min_eig > tol;
                all_ok &= ok;
                r.push(
                    key,
                    format!(
                        "re_P_min_eig {min_eig:e}, sigma_min {sigma_min:e}, {}",
                        if ok { "ok" } else { "FAILED" }
                    ),
                );
            }
            Err(e) => {
                all_ok = false;
                r.push(key, format!("FAILED ({e})"));
            }
        }
    }
    r.push("passed", all_ok);
    print!("{r}");
    Ok(status(all_ok))
}

fn synth(
    args: &PlantArgs,
    freqs: &[f64],
    include_zero: bool,
    dc: f64,
    delta_c: Option<f64>,
    out: &Path,
) -> CliResult<ExitCode> {
    let (_, ss) = load_plant(args)?;
    let p = ss.p();
    let ctrl = InternalModelController::new(
        freqs,
        p,
        include_zero,
        scalar_gain(p, dc),
        delta_c.unwrap_or(1.0),
    )?;
    let im = check_internal_model_conditions(&ctrl.jc, &ctrl.bc, &ctrl.freqs, ctrl.include_zero);
    let mut r = Report::new();
    r.extend_from_text(&im.to_string());
    if !im.passed {
        print!("{r}");
        return Ok(ExitCode::from(1));
    }
    let ctrl = match delta_c {
        Some(_) => ctrl,
        None => {
            let sw = gain_sweep(&ss, &ctrl, &DEFAULT_DELTA_GRID)?;
            r.push("delta_c_source", "sweep");
            ctrl.with_delta(sw.recommended)
        }
    };
    let abscissa = assemble_closed_loop(&ss, &ctrl)?.abscissa()?;
    r.push("delta_c", format!("{:e}", ctrl.delta_c))
        .push("closed_loop_abscissa", format!("{abscissa:e}"))
        .push("stable", abscissa < 0.0)
        .push(
            "written",
            write(out, "controller.toml", &io::write_controller(&ctrl))?.display(),
        );
    print!("{r}");
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &PlantArgs, ca: &ControllerArgs, grid: &[f64]) -> CliResult<ExitCode> {
    let (_, ss) = load_plant(args)?;
    let ctrl = load_controller(ca, ss.p())?;
    let grid = if grid.is_empty() {
        &DEFAULT_DELTA_GRID[..]
    } else {
        grid
    };
    let res = gain_sweep(&ss, &ctrl, grid)?;
    print!("{res}");
    Ok(ExitCode::SUCCESS)
}

fn certify(args: &PlantArgs, ca: &ControllerArgs) -> CliResult<ExitCode> {
    let (_, ss) = load_plant(args)?;
    let ctrl = load_controller(ca, ss.p())?;
    let (r, valid) = certificate_report(&ss, &ctrl)?;
    print!("{r}");
    Ok(status(valid))
}

fn certificate_report(
    ss: &StateSpaceModel,
    ctrl: &InternalModelController,
) -> CliResult<(Report, bool)> {
    let fb = apply_output_feedback(ss, &ctrl.dc)?;
    let h = solve_h(&fb, ctrl)?;
    let cert = lyapunov_certificate(&fb, ctrl, &h)?;
    let mut r = Report::new();
    r.extend_from_text(&cert.to_string())
        .push(
            "H_sylvester_residual",
            format!("{:e}", h.sylvester_residual),
        )
        .push("H_transfer_residual", format!("{:e}", h.transfer_residual));
    Ok((r, cert.valid))
}

struct SimOutcome {
    report: Report,
    stable: bool,
    tracking_rel: f64,
}

/// Runs the simulation and writes `simulation.csv`, `plot.gp` and
/// `simulation_report.txt` into `out`.
fn run_simulation(
    cl: &ClosedLoopSystem,
    sig: &SignalModel,
    horizon: f64,
    dt: f64,
    strict: bool,
    out: &Path,
) -> CliResult<SimOutcome> {
    let abscissa = cl.abscissa()?;
    let opts = SimOptions { x0: None, strict };
    let res = simulate_with(cl, sig, horizon, dt, &opts)?;
    let reg = solve_regulator_steady_state(cl, sig)?;
    let notch: Vec<f64> = reg
        .components
        .iter()
        .filter(|c| c.mu > 0.0 && !c.in_internal_model)
        .map(|c| c.mu)
        .collect();
    let max_ref = res.max_reference_norm();
    let notched = notched_window_error(&res, &notch, FINAL_WINDOW);
    let tracking_rel = notched / max_ref.max(f64::MIN_POSITIVE);

    let mut r = Report::new();
    r.push("scheme", &res.scheme)
        .push("horizon", horizon)
        .push("dt", res.dt)
        .push("samples", res.t.len())
        .push("closed_loop_abscissa", format!("{abscissa:e}"))
        .push("stable", abscissa < 0.0)
        .push("max_reference_norm", format!("{max_ref:e}"))
        .push(
            "final_window_error",
            format!("{:e}", res.final_window_error),
        )
        .push(
            "notched_frequencies",
            notch
                .iter()
                .map(|w| format!("{w}"))
                .collect::<Vec<_>>()
                .join(","),
        )
        .push("notched_final_window_error", format!("{notched:e}"))
        .push("tracking_error_relative", format!("{tracking_rel:e}"))
        .push(
            "regulator_max_error",
            format!("{:e}", reg.max_regulated_error()),
        )
        .push(
            "regulator_max_residual",
            format!("{:e}", reg.max_residual()),
        );
    let transient: Vec<f64> = res
        .t
        .iter()
        .zip(&res.e)
        .map(|(&t, e)| {
            let pe = reg.predicted_error(t);
            e.iter()
                .zip(pe.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    match estimate_decay_rate_series(&res.t, &transient, 0.5, 1e-12 * max_ref.max(1.0)) {
        Ok(d) => r.push("transient_decay_rate", format!("{:e}", d.alpha)),
        Err(e) => r.push("transient_decay_rate", format!("undefined ({e})")),
    };
    for w in &res.warnings {
        r.push("warning", w);
    }
    let p = cl.p;
    write(out, "simulation.csv", &io::simulation_csv(&res))?;
    write(
        out,
        "plot.gp",
        &io::plot_script("simulation.csv", p, "simulation.png"),
    )?;
    write(out, "simulation_report.txt", &r.to_string())?;
    Ok(SimOutcome {
        report: r,
        stable: abscissa < 0.0,
        tracking_rel,
    })
}

fn simulate_cmd(
    args: &PlantArgs,
    ca: &ControllerArgs,
    signal: &Path,
    horizon: f64,
    dt: f64,
    strict: bool,
    out: &Path,
) -> CliResult<ExitCode> {
    let (_, ss) = load_plant(args)?;
    let ctrl = load_controller(ca, ss.p())?;
    let cl = assemble_closed_loop(&ss, &ctrl)?;
    let sig = in_file(signal, io::parse_signal(&read(signal)?, cl.p, cl.n_dist()))?;
    let outcome = run_simulation(&cl, &sig, horizon, dt, strict, out)?;
    print!("{}", outcome.report);
    Ok(status(outcome.stable))
}

struct DemoOverrides {
    nf: Option<usize>,
    dc: Option<f64>,
    delta_c: Option<f64>,
    horizon: Option<f64>,
    dt: Option<f64>,
}

fn demo(out: &Path, ov: DemoOverrides, strict: bool) -> CliResult<ExitCode> {
    let demo = build_demo_scenario();
    let n_f = ov.nf.unwrap_or(demo.sim.n_f);
    let horizon = ov.horizon.unwrap_or(demo.sim.horizon);
    let dt = ov.dt.unwrap_or(demo.sim.dt);
    let dc = ov.dc.unwrap_or(demo.controller.dc);
    let delta = ov.delta_c.unwrap_or(demo.controller.delta_c);

    let mut r = Report::new();
    r.push("unit_note", &demo.unit_note);
    write(out, "model.toml", &io::write_model(&demo.model))?;
    write(out, "signal.toml", &io::write_signal(&demo.signal))?;

    let check = assumption_report(&demo.model, 1e-10)?;
    write(out, "check.txt", &check.to_string())?;
    r.push("check_passed", check.passed);
    if let Some(rank) = check.rank_w {
        r.push("rank_W", rank);
    }
    if !check.passed {
        print!("{r}");
        return Ok(ExitCode::from(1));
    }

    let ss = discretize(&demo.model, n_f)?;
    let kyp = check_passivity_kyp(&ss, 1e-8 * linalg::norm2(&ss.m));
    r.push("elements", n_f)
        .push("states", ss.nx())
        .push("kyp_max_eig", format!("{:e}", kyp.max_eig))
        .push("kyp_passed", kyp.passed)
        .push(
            "open_loop_abscissa",
            format!("{:e}", linalg::spectral_abscissa(&ss.a)?),
        );

    let p = ss.p();
    let ctrl = InternalModelController::new(
        &demo.controller.freqs,
        p,
        demo.controller.include_zero,
        scalar_gain(p, dc),
        delta,
    )?;
    let im = check_internal_model_conditions(&ctrl.jc, &ctrl.bc, &ctrl.freqs, ctrl.include_zero);
    r.push("im_conditions_passed", im.passed);
    for &w in &ctrl.freqs {
        let pw = transfer_function(&ss, Complex::new(0.0, w))?;
        r.push(
            format!("re_P_min_eig[mu={w}]"),
            format!("{:e}", linalg::min_herm_eig(&linalg::herm_part(&pw))),
        );
    }

    let sweep = gain_sweep(&ss, &ctrl, &DEFAULT_DELTA_GRID)?;
    write(out, "sweep.txt", &sweep.to_string())?;
    let at_delta = assemble_closed_loop(&ss, &ctrl)?.abscissa()?;
    let ctrl = if at_delta < 0.0 {
        ctrl
    } else {
        let fallback = sweep
            .stable_deltas()
            .into_iter()
            .rfind(|&d| d <= delta)
            .ok_or_else(|| {
                CliError::Failed(format!("no stable coupling gain at or below {delta}"))
            })?;
        r.push(
            "delta_c_substituted",
            format!("{delta} is unstable (abscissa {at_delta:e}); using {fallback}"),
        );
        ctrl.with_delta(fallback)
    };
    r.push("delta_c", ctrl.delta_c).push("dc", dc);
    write(out, "controller.toml", &io::write_controller(&ctrl))?;

    match certificate_report(&ss, &ctrl) {
        Ok((cert, valid)) => {
            write(out, "certificate.txt", &cert.to_string())?;
            r.push("certificate_valid", valid);
        }
        Err(e) => {
            r.push("certificate_valid", format!("false ({e})"));
        }
    }

    let cl = assemble_closed_loop(&ss, &ctrl)?;
    let sim = run_simulation(&cl, &demo.signal, horizon, dt, strict, out)?;
    r.extend_from_text(&sim.report.to_string());
    let passed = sim.stable && sim.tracking_rel <= TRACKING_BOUND;
    r.push("tracking_bound", TRACKING_BOUND)
        .push("tracking_passed", passed);
    write(out, "report.txt", &r.to_string())?;
    print!("{r}");
    Ok(status(passed))
}
