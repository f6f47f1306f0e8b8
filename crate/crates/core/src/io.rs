//! Text formats: TOML model/controller/signal files, a plain matrix
//! container, `key: value` reports, simulation CSV and a gnuplot script.
//!
//! # Model file
//!
//! ```toml
//! n = 1
//! order = 1
//! interval = [0.0, 1.0]
//! P1 = [[1.0]]
//! P0 = [[0.0]]
//! G0 = [[0.0]]
//! # P2 defaults to zero
//! W1 = [[1.0, 0.0]]
//! W2 = []            # optional, no rows by default
//! Wtilde = [[0.0, 1.0]]
//!
//! [H]
//! constant = [[1.0]]
//! # or: grid = [0.0, 1.0] and values = [[[1.0]], [[2.0]]]
//!
//! # optional distributed disturbance shape, same layout as H
//! # [Bd]
//! # constant = [[1.0]]
//! ```
//!
//! Matrices are row-major arrays of rows. Parse errors name the key path and
//! the row/column of the offending entry.
//!
//! # Controller file
//!
//! `freqs`, `include_zero`, `p`, `delta_c` and `Dc`; `Jc` and `Bc` are
//! written for auditing and, when present on input, must match `freqs`.
//!
//! # Signal file
//!
//! `freqs` (rad/s, positive) and optional `a0`, `a1`, `a2` (reference,
//! `p` entries each) and `b0`, `b1`, `b2` (disturbances `(w1, w2, w3)`).
//! `a1`/`a2`/`b1`/`b2` hold one row per frequency; missing entries are zero.
//!
//! # Matrix container
//!
//! ```text
//! # phsreg matrix container
//! # provenance: <free text>
//! matrix A 2 2
//! -1 0
//! 0 -2
//! ```

use std::fmt::{self, Display, Write as _};

use toml::{Table, Value};

use crate::closedloop::{SignalModel, SimulationResult};
use crate::controller::{build_internal_model, InternalModelController};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::phs::{Order, PhsModel, Profile};

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::parse("<document>", e.to_string()))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::parse(
            path,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::parse(path, format!("expected an array, found {}", v.type_str())))
}

fn vector(v: &Value, path: &str) -> Result<Vec<f64>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

/// Array of rows. `cols` fixes the width of an empty matrix.
fn matrix(v: &Value, path: &str, cols: Option<usize>) -> Result<Mat> {
    let rows = array(v, path)?;
    if rows.is_empty() {
        return Ok(Mat::zeros(0, cols.unwrap_or(0)));
    }
    let mut data = Vec::new();
    let mut width = None;
    for (r, row) in rows.iter().enumerate() {
        let row_path = format!("{path}[{r}]");
        let entries = array(row, &row_path)?;
        match width {
            None => width = Some(entries.len()),
            Some(w) if w != entries.len() => {
                return Err(Error::parse(
                    row_path,
                    format!("row {r} has {} columns, expected {w}", entries.len()),
                ))
            }
            _ => {}
        }
        for (c, x) in entries.iter().enumerate() {
            let val = number(x, &format!("{path}[{r}][{c}]")).map_err(|e| match e {
                Error::Parse { path, message } => Error::Parse {
                    path,
                    message: format!("row {r}, column {c}: {message}"),
                },
                other => other,
            })?;
            if !val.is_finite() {
                return Err(Error::parse(
                    format!("{path}[{r}][{c}]"),
                    "non-finite entry",
                ));
            }
            data.push(val);
        }
    }
    Ok(Mat::from_row_slice(rows.len(), width.unwrap_or(0), &data))
}

fn required<'a>(t: &'a Table, key: &str, prefix: &str) -> Result<&'a Value> {
    t.get(key)
        .ok_or_else(|| Error::parse(format!("{prefix}{key}"), "missing required key"))
}

fn integer(v: &Value, path: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(Error::parse(
            path,
            format!("expected a nonnegative integer, found {other}"),
        )),
    }
}

fn profile(v: &Value, path: &str) -> Result<Profile> {
    let t = v
        .as_table()
        .ok_or_else(|| Error::parse(path, "expected a table with `constant` or `grid`/`values`"))?;
    if let Some(c) = t.get("constant") {
        return Ok(Profile::Constant(matrix(
            c,
            &format!("{path}.constant"),
            None,
        )?));
    }
    let grid = vector(
        required(t, "grid", &format!("{path}."))?,
        &format!("{path}.grid"),
    )?;
    let values = array(
        required(t, "values", &format!("{path}."))?,
        &format!("{path}.values"),
    )?
    .iter()
    .enumerate()
    .map(|(k, m)| matrix(m, &format!("{path}.values[{k}]"), None))
    .collect::<Result<Vec<_>>>()?;
    Ok(Profile::Sampled { grid, values })
}

/// Parses a model document; shapes are then checked field by field.
pub fn parse_model(text: &str) -> Result<PhsModel> {
    let t = parse_table(text)?;
    let n = integer(required(&t, "n", "")?, "n")?;
    let order = Order::from_usize(integer(required(&t, "order", "")?, "order")?)
        .map_err(|_| Error::parse("order", "must be 1 or 2"))?;
    let iv = vector(required(&t, "interval", "")?, "interval")?;
    if iv.len() != 2 {
        return Err(Error::parse(
            "interval",
            format!("expected [a, b], found {} entries", iv.len()),
        ));
    }
    let td = 2 * n * order.as_usize();
    let mat = |key: &str| matrix(required(&t, key, "")?, key, None);
    let p2 = match t.get("P2") {
        Some(v) => matrix(v, "P2", None)?,
        None => Mat::zeros(n, n),
    };
    let w2 = match t.get("W2") {
        Some(v) => matrix(v, "W2", Some(td))?,
        None => Mat::zeros(0, td),
    };
    let bd = t.get("Bd").map(|v| profile(v, "Bd")).transpose()?;
    let model = PhsModel {
        n,
        order,
        p2,
        p1: mat("P1")?,
        p0: mat("P0")?,
        g0: mat("G0")?,
        h: profile(required(&t, "H", "")?, "H")?,
        bd,
        w1: mat("W1")?,
        w2,
        wtilde: mat("Wtilde")?,
        interval: (iv[0], iv[1]),
    };
    model.check_dimensions()?;
    Ok(model)
}

fn fmt_row(row: impl Iterator<Item = f64>) -> String {
    let items: Vec<String> = row.map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &Mat) -> String {
    if m.nrows() == 0 {
        return "[]".into();
    }
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| format!("  {},", fmt_row(m.row(i).iter().copied())))
        .collect();
    format!("[\n{}\n]", rows.join("\n"))
}

fn write_profile(out: &mut String, name: &str, p: &Profile) {
    let _ = writeln!(out, "\n[{name}]");
    match p {
        Profile::Constant(m) => {
            let _ = writeln!(out, "constant = {}", fmt_matrix(m));
        }
        Profile::Sampled { grid, values } => {
            let _ = writeln!(out, "grid = {}", fmt_row(grid.iter().copied()));
            let vals: Vec<String> = values.iter().map(fmt_matrix).collect();
            let _ = writeln!(out, "values = [\n{}\n]", vals.join(",\n"));
        }
    }
}

pub fn write_model(model: &PhsModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n = {}", model.n);
    let _ = writeln!(out, "order = {}", model.order.as_usize());
    let _ = writeln!(
        out,
        "interval = [{:?}, {:?}]",
        model.interval.0, model.interval.1
    );
    for (k, m) in [
        ("P2", &model.p2),
        ("P1", &model.p1),
        ("P0", &model.p0),
        ("G0", &model.g0),
        ("W1", &model.w1),
        ("W2", &model.w2),
        ("Wtilde", &model.wtilde),
    ] {
        let _ = writeln!(out, "{k} = {}", fmt_matrix(m));
    }
    write_profile(&mut out, "H", &model.h);
    if let Some(bd) = &model.bd {
        write_profile(&mut out, "Bd", bd);
    }
    out
}

pub fn write_controller(ctrl: &InternalModelController) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "freqs = {}", fmt_row(ctrl.freqs.iter().copied()));
    let _ = writeln!(out, "include_zero = {}", ctrl.include_zero);
    let _ = writeln!(out, "p = {}", ctrl.p);
    let _ = writeln!(out, "delta_c = {:?}", ctrl.delta_c);
    let _ = writeln!(out, "Dc = {}", fmt_matrix(&ctrl.dc));
    let _ = writeln!(out, "Jc = {}", fmt_matrix(&ctrl.jc));
    let _ = writeln!(out, "Bc = {}", fmt_matrix(&ctrl.bc));
    out
}

pub fn parse_controller(text: &str) -> Result<InternalModelController> {
    let t = parse_table(text)?;
    let freqs = vector(required(&t, "freqs", "")?, "freqs")?;
    let include_zero = match t.get("include_zero") {
        Some(Value::Boolean(b)) => *b,
        Some(other) => {
            return Err(Error::parse(
                "include_zero",
                format!("expected a boolean, found {other}"),
            ))
        }
        None => false,
    };
    let p = integer(required(&t, "p", "")?, "p")?;
    let delta_c = number(required(&t, "delta_c", "")?, "delta_c")?;
    let dc = match t.get("Dc") {
        Some(v) => matrix(v, "Dc", None)?,
        None => Mat::zeros(p, p),
    };
    let ctrl = InternalModelController::new(&freqs, p, include_zero, dc, delta_c)?;
    let (jc, bc) = build_internal_model(&freqs, p, include_zero)?;
    for (key, expected) in [("Jc", &jc), ("Bc", &bc)] {
        if let Some(v) = t.get(key) {
            let m = matrix(v, key, None)?;
            if m.shape() != expected.shape()
                || (&m - expected).amax() > 1e-12 * expected.amax().max(1.0)
            {
                return Err(Error::parse(
                    key,
                    "does not match the oscillator structure of `freqs`",
                ));
            }
        }
    }
    Ok(ctrl)
}

pub fn write_signal(sig: &SignalModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "freqs = {}", fmt_row(sig.freqs.iter().copied()));
    let _ = writeln!(out, "a0 = {}", fmt_row(sig.a0.iter().copied()));
    let _ = writeln!(out, "b0 = {}", fmt_row(sig.b0.iter().copied()));
    for (k, rows) in [
        ("a1", &sig.a1),
        ("a2", &sig.a2),
        ("b1", &sig.b1),
        ("b2", &sig.b2),
    ] {
        let body: Vec<String> = rows
            .iter()
            .map(|r| format!("  {},", fmt_row(r.iter().copied())))
            .collect();
        if body.is_empty() {
            let _ = writeln!(out, "{k} = []");
        } else {
            let _ = writeln!(out, "{k} = [\n{}\n]", body.join("\n"));
        }
    }
    out
}

/// Parses a signal document for `p` outputs and `n_dist` disturbance
/// channels.
pub fn parse_signal(text: &str, p: usize, n_dist: usize) -> Result<SignalModel> {
    let t = parse_table(text)?;
    let freqs = vector(required(&t, "freqs", "")?, "freqs")?;
    let mut sig = SignalModel::zeros(freqs, p, n_dist);
    let q = sig.freqs.len();
    for (key, dst, len) in [("a0", &mut sig.a0, p), ("b0", &mut sig.b0, n_dist)] {
        if let Some(v) = t.get(key) {
            let vals = vector(v, key)?;
            if vals.len() != len {
                return Err(Error::parse(
                    key,
                    format!("expected {len} entries, found {}", vals.len()),
                ));
            }
            *dst = vals;
        }
    }
    for (key, dst, len) in [
        ("a1", &mut sig.a1, p),
        ("a2", &mut sig.a2, p),
        ("b1", &mut sig.b1, n_dist),
        ("b2", &mut sig.b2, n_dist),
    ] {
        if let Some(v) = t.get(key) {
            let m = matrix(v, key, Some(len))?;
            if m.nrows() != q || m.ncols() != len {
                return Err(Error::parse(
                    key,
                    format!(
                        "expected {q} rows of {len} entries, found {}x{}",
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
            *dst = (0..q).map(|i| m.row(i).iter().copied().collect()).collect();
        }
    }
    sig.validate(p, n_dist)?;
    Ok(sig)
}

pub fn write_matrix_container(entries: &[(&str, &Mat)], provenance: &str) -> String {
    let mut out = String::from("# phsreg matrix container\n");
    for line in provenance.lines() {
        let _ = writeln!(out, "# provenance: {line}");
    }
    for (name, m) in entries {
        let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

/// Returns the named matrices in file order and the provenance text.
pub fn read_matrix_container(text: &str) -> Result<(Vec<(String, Mat)>, String)> {
    let mut out = Vec::new();
    let mut provenance = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((ln, line)) = lines.next() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# provenance:") {
            provenance.push(rest.trim().to_string());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let head: Vec<&str> = line.split_whitespace().collect();
        if head.len() != 4 || head[0] != "matrix" {
            return Err(Error::parse(
                format!("line {}", ln + 1),
                "expected `matrix <name> <rows> <cols>`",
            ));
        }
        let dims = |s: &str| {
            s.parse::<usize>().map_err(|_| {
                Error::parse(format!("line {}", ln + 1), format!("bad dimension `{s}`"))
            })
        };
        let (rows, cols) = (dims(head[2])?, dims(head[3])?);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (rl, row) = lines
                .next()
                .ok_or_else(|| Error::parse(head[1], format!("missing row {r}")))?;
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != cols {
                return Err(Error::parse(
                    format!("{}[{r}]", head[1]),
                    format!(
                        "line {}: expected {cols} columns, found {}",
                        rl + 1,
                        vals.len()
                    ),
                ));
            }
            for (c, v) in vals.iter().enumerate() {
                data.push(v.parse::<f64>().map_err(|_| {
                    Error::parse(
                        format!("{}[{r}][{c}]", head[1]),
                        format!("row {r}, column {c}: bad number `{v}`"),
                    )
                })?);
            }
        }
        out.push((head[1].to_string(), Mat::from_row_slice(rows, cols, &data)));
    }
    Ok((out, provenance.join("\n")))
}

/// Ordered `key: value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    /// Appends every `key: value` line of an already formatted block.
    pub fn extend_from_text(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            match line.split_once(": ") {
                Some((k, v)) => self.lines.push((k.to_string(), v.to_string())),
                None if !line.trim().is_empty() => {
                    self.lines.push((line.to_string(), String::new()))
                }
                None => {}
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            if v.is_empty() {
                writeln!(f, "{k}")?;
            } else {
                writeln!(f, "{k}: {v}")?;
            }
        }
        Ok(())
    }
}

/// `t,y_1..y_p,yref_1..yref_p,e_1..e_p,energy`.
pub fn simulation_csv(res: &SimulationResult) -> String {
    let p = res.y.first().map_or(0, |y| y.len());
    let mut header = vec!["t".to_string()];
    for prefix in ["y", "yref", "e"] {
        header.extend((1..=p).map(|i| format!("{prefix}_{i}")));
    }
    header.push("energy".into());
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..res.t.len() {
        let _ = write!(out, "{}", res.t[k]);
        for block in [&res.y[k], &res.y_ref[k], &res.e[k]] {
            for v in block.iter() {
                let _ = write!(out, ",{v}");
            }
        }
        let _ = writeln!(out, ",{}", res.energy[k]);
    }
    out
}

/// gnuplot script drawing outputs against references and the error.
pub fn plot_script(csv_name: &str, p: usize, image_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set terminal png size 1000,800");
    let _ = writeln!(out, "set output '{image_name}'");
    let _ = writeln!(out, "set multiplot layout 2,1");
    let _ = writeln!(out, "set xlabel 't [s]'");
    let curves: Vec<String> = (1..=p)
        .flat_map(|i| {
            [
                format!("'{csv_name}' using 1:{} with lines title 'y_{i}'", 1 + i),
                format!(
                    "'{csv_name}' using 1:{} with lines dashtype 2 title 'yref_{i}'",
                    1 + p + i
                ),
            ]
        })
        .collect();
    let _ = writeln!(out, "plot {}", curves.join(", \\\n     "));
    let errs: Vec<String> = (1..=p)
        .map(|i| {
            format!(
                "'{csv_name}' using 1:{} with lines title 'e_{i}'",
                1 + 2 * p + i
            )
        })
        .collect();
    let _ = writeln!(out, "plot {}", errs.join(", \\\n     "));
    let _ = writeln!(out, "unset multiplot");
    out
}
