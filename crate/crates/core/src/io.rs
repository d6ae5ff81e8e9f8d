//! File formats: model documents, trajectory tables, result documents.
//!
//! * Model documents are JSON with fields `n`, `kind`, `S0`, `gamma`,
//!   `alpha`, `c` and an optional `seasonality` block `{T, knots}`. A missing
//!   seasonality block means plain (unnormalized) time. Parsing rejects
//!   non-finite numbers and dimension mismatches with positional messages.
//! * Trajectories are CSV with the fixed column order `t, tau, I_*, p_*,
//!   S_*, R_*, lambda_*, rho2_*` (items numbered from 1). Numbers are written
//!   as 17-significant-digit scientific so every value round-trips bit
//!   exactly. Revenue, Lerner and profit are derived columns; the reader
//!   recomputes them from price and sales so the snapshot identities hold on
//!   ingested files too.
//! * Result documents (closed form, equilibrium, solver, comparison) are JSON
//!   mirrors of the in-memory structs, with `Vec<f64>` in place of algebra
//!   types. JSON floats use the shortest encoding that round-trips exactly.
//!
//! All writers go through [`write_atomic`]: contents land in a temp file in
//! the target directory and are renamed into place, so an interrupted run
//! never leaves a half-written file at the target path.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::closedform::{CREquilibrium, ClosedFormMD};
use crate::error::Error;
use crate::model::{DemandKind, ModelParams};
use crate::optimality::InvariantReport;
use crate::seasonality::Seasonality;
use crate::trajectory::{self, ObjectiveMode, StateSnapshot, Trajectory};
use crate::varsolve::{SolverResult, TrajectoryComparison};
use crate::Result;

/// A parsed model document: demand parameters plus the optional seasonality.
/// `seasonality: None` means the model runs in plain time.
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub params: ModelParams,
    pub seasonality: Option<Seasonality>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    n: usize,
    kind: DemandKind,
    #[serde(rename = "S0")]
    s0: Vec<f64>,
    gamma: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seasonality: Option<SeasonalityDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeasonalityDoc {
    #[serde(rename = "T")]
    horizon: f64,
    /// `[t, density]` pairs; the density is normalized on load.
    knots: Vec<[f64; 2]>,
}

/// Parse a model document from JSON text.
pub fn parse_model_str(text: &str) -> Result<ParsedModel> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::input(format!("model document: {e}")))?;
    model_from_doc(doc)
}

/// Read and parse a model document, prefixing errors with the path.
pub fn read_model(path: &Path) -> Result<ParsedModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_model_str(&text).map_err(|e| prefix_path(path, e))
}

/// Serialize a model back to document form. The seasonality knots written are
/// the normalized ones, which denote the same density as the raw input.
pub fn model_to_json(params: &ModelParams, seasonality: Option<&Seasonality>) -> Result<String> {
    let doc = ModelDoc {
        n: params.n,
        kind: params.kind,
        s0: params.s0.iter().cloned().collect(),
        gamma: matrix_rows(&params.gamma),
        alpha: matrix_rows(&params.alpha),
        c: params.cost.iter().cloned().collect(),
        seasonality: seasonality.map(|s| SeasonalityDoc {
            horizon: s.horizon(),
            knots: s.knots().iter().map(|&(t, d)| [t, d]).collect(),
        }),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn model_from_doc(doc: ModelDoc) -> Result<ParsedModel> {
    let n = doc.n;
    if n == 0 {
        return Err(Error::input("model document: n must be at least 1"));
    }
    check_vector("S0", &doc.s0, n)?;
    check_vector("c", &doc.c, n)?;
    let gamma = check_matrix("gamma", &doc.gamma, n)?;
    let alpha = check_matrix("alpha", &doc.alpha, n)?;
    let params = ModelParams::new(
        doc.kind,
        DVector::from_vec(doc.s0),
        gamma,
        alpha,
        DVector::from_vec(doc.c),
    )?;
    let seasonality = match doc.seasonality {
        None => None,
        Some(sd) => {
            if !(sd.horizon.is_finite() && sd.horizon > 0.0) {
                return Err(Error::input(format!(
                    "seasonality: T must be finite and positive, got {}",
                    sd.horizon
                )));
            }
            match sd.knots.last() {
                Some(&[t_last, _]) if t_last == sd.horizon => {}
                Some(&[t_last, _]) => {
                    return Err(Error::input(format!(
                        "seasonality: last knot is at t={t_last}, expected the horizon T={}",
                        sd.horizon
                    )))
                }
                None => return Err(Error::input("seasonality: knots must not be empty")),
            }
            let pairs: Vec<(f64, f64)> = sd.knots.iter().map(|&[t, d]| (t, d)).collect();
            Some(Seasonality::from_knots(&pairs)?)
        }
    };
    Ok(ParsedModel { params, seasonality })
}

fn check_vector(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::input(format!(
            "{name} has {} entries, expected n={n}",
            v.len()
        )));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::input(format!("{name}[{i}] is non-finite ({x})")));
        }
    }
    Ok(())
}

fn check_matrix(name: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::input(format!(
            "{name} has {} rows, expected n={n}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::input(format!(
                "{name} row {i} has {} entries, expected n={n}",
                row.len()
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::input(format!("{name}[{i}][{j}] is non-finite ({x})")));
            }
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn prefix_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// Scientific notation with 17 significant digits: exact `f64` round trip.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "tau".to_string()];
    for group in ["I", "p", "S", "R", "lambda", "rho2"] {
        for i in 1..=n {
            cols.push(format!("{group}_{i}"));
        }
    }
    cols
}

/// Render a trajectory in the fixed CSV column order.
pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String> {
    traj.validate()?;
    let n = traj.n_items();
    let mut out = csv_columns(n).join(",");
    out.push('\n');
    for (k, s) in traj.states.iter().enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(2 + 6 * n);
        fields.push(fmt_f64(s.t));
        fields.push(fmt_f64(1.0 - traj.sigma_hat[k]));
        for vector in [&s.inventory, &s.price, &s.demand, &s.revenue, &s.lambda, &s.rho2] {
            fields.extend(vector.iter().map(|&v| fmt_f64(v)));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Write a trajectory CSV atomically.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, &trajectory_to_csv(traj)?)
}

/// Parse a trajectory CSV against its model.
///
/// The reader checks the header against the fixed column contract, rejects
/// non-finite fields, recomputes seasonality values at the grid times (plain
/// time when `seasonality` is `None`), and cross-checks the file's `tau`
/// column against the model's seasonality. The recorded objective is the
/// profit quadrature, which coincides with revenue when `rho2` is zero.
pub fn parse_trajectory_csv(
    text: &str,
    params: &ModelParams,
    seasonality: Option<&Seasonality>,
) -> Result<Trajectory> {
    let n = params.n;
    let columns = csv_columns(n);
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::input("trajectory file is empty"))?;
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got.len() != columns.len() {
        return Err(Error::input(format!(
            "trajectory header has {} columns, expected {} for a {n}-item model",
            got.len(),
            columns.len()
        )));
    }
    for (idx, (g, e)) in got.iter().zip(columns.iter()).enumerate() {
        if g != e {
            return Err(Error::input(format!(
                "trajectory header column {}: expected {e:?}, got {g:?}",
                idx + 1
            )));
        }
    }

    let mut states = Vec::new();
    let mut taus_file = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = line_idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::input(format!(
                "trajectory line {line_no} has {} fields, expected {}",
                fields.len(),
                columns.len()
            )));
        }
        let parse = |col: usize| -> Result<f64> {
            let raw = fields[col].trim();
            let v: f64 = raw.parse().map_err(|_| {
                Error::input(format!(
                    "trajectory line {line_no}, column {} ({}): cannot parse {raw:?} as a number",
                    col + 1,
                    columns[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::input(format!(
                    "trajectory line {line_no}, column {} ({}): non-finite value {raw:?}",
                    col + 1,
                    columns[col]
                )));
            }
            Ok(v)
        };
        let t = parse(0)?;
        taus_file.push(parse(1)?);
        let block = |offset: usize| -> Result<DVector<f64>> {
            let mut v = DVector::zeros(n);
            for i in 0..n {
                v[i] = parse(2 + offset * n + i)?;
            }
            Ok(v)
        };
        let inventory = block(0)?;
        let price = block(1)?;
        let demand = block(2)?;
        let _revenue = block(3)?;
        let lambda = block(4)?;
        let rho2 = block(5)?;
        let snap = StateSnapshot::assemble(params, t, inventory, price, demand, lambda, rho2)
            .map_err(|e| Error::input(format!("trajectory line {line_no}: {e}")))?;
        states.push(snap);
    }
    if states.len() < 2 {
        return Err(Error::input(format!(
            "trajectory needs at least 2 grid points, got {}",
            states.len()
        )));
    }

    let horizon = states.last().expect("nonempty").t;
    let mut sigma = Vec::with_capacity(states.len());
    let mut sigma_hat = Vec::with_capacity(states.len());
    for s in &states {
        let (dens, cum) = match seasonality {
            Some(seas) => seas.eval(s.t)?,
            None => (1.0, s.t / horizon),
        };
        sigma.push(dens);
        sigma_hat.push(cum);
    }
    for (k, (&tau_file, cum)) in taus_file.iter().zip(sigma_hat.iter()).enumerate() {
        let tau_model = 1.0 - cum;
        if (tau_file - tau_model).abs() > 1e-6 {
            return Err(Error::input(format!(
                "trajectory line {}: tau={tau_file} disagrees with the model seasonality \
                 (expected {tau_model}); was this trajectory produced for a different model?",
                k + 2
            )));
        }
    }

    let mut traj = Trajectory {
        states,
        sigma,
        sigma_hat,
        objective: 0.0,
    };
    traj.objective = trajectory::objective(params, &traj, ObjectiveMode::Profit)?;
    Ok(traj)
}

/// Read and parse a trajectory CSV, prefixing errors with the path.
pub fn read_trajectory(
    path: &Path,
    params: &ModelParams,
    seasonality: Option<&Seasonality>,
) -> Result<Trajectory> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_trajectory_csv(&text, params, seasonality).map_err(|e| prefix_path(path, e))
}

/// Plot-ready CSV of invariant series: `t` plus one column per report.
/// All reports must share the same time grid.
pub fn invariant_values_csv(reports: &[InvariantReport]) -> Result<String> {
    let first = reports
        .first()
        .ok_or_else(|| Error::input("no invariant reports to tabulate"))?;
    for r in reports {
        if r.times != first.times {
            return Err(Error::input(format!(
                "invariant reports {:?} and {:?} are on different time grids",
                first.name, r.name
            )));
        }
        if r.values.len() != r.times.len() {
            return Err(Error::input(format!(
                "invariant report {:?} has {} values for {} times",
                r.name,
                r.values.len(),
                r.times.len()
            )));
        }
    }
    let mut out = String::from("t");
    for r in reports {
        out.push(',');
        out.push_str(&r.name);
    }
    out.push('\n');
    for k in 0..first.times.len() {
        out.push_str(&fmt_f64(first.times[k]));
        for r in reports {
            out.push(',');
            out.push_str(&fmt_f64(r.values[k]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// JSON mirror of [`ClosedFormMD`]. A `null` entry in `theta` encodes an
/// unbounded exponent ratio (zero inventory effect, constant price).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdResultDoc {
    pub mu: Vec<f64>,
    pub a: Vec<f64>,
    pub theta: Vec<Option<f64>>,
    pub p0: Vec<f64>,
    #[serde(rename = "I0")]
    pub i0: Vec<f64>,
    #[serde(rename = "R")]
    pub revenue_rate: Vec<f64>,
    #[serde(rename = "C")]
    pub adjoint_coeff: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub r_scale: f64,
    pub plain_time: bool,
    pub residual_exponents: f64,
    pub residual_revenue: f64,
}

impl From<&ClosedFormMD> for MdResultDoc {
    fn from(cf: &ClosedFormMD) -> Self {
        MdResultDoc {
            mu: cf.mu.iter().cloned().collect(),
            a: cf.a.iter().cloned().collect(),
            theta: cf
                .theta
                .iter()
                .map(|&x| if x.is_finite() { Some(x) } else { None })
                .collect(),
            p0: cf.p0.iter().cloned().collect(),
            i0: cf.i0.iter().cloned().collect(),
            revenue_rate: cf.revenue_rate.iter().cloned().collect(),
            adjoint_coeff: cf.adjoint_coeff.iter().cloned().collect(),
            horizon: cf.horizon,
            r_scale: cf.r_scale,
            plain_time: cf.plain_time,
            residual_exponents: cf.residual_exponents,
            residual_revenue: cf.residual_revenue,
        }
    }
}

impl MdResultDoc {
    pub fn to_closed_form(&self) -> Result<ClosedFormMD> {
        let n = self.mu.len();
        for (name, len) in [
            ("a", self.a.len()),
            ("theta", self.theta.len()),
            ("p0", self.p0.len()),
            ("I0", self.i0.len()),
            ("R", self.revenue_rate.len()),
            ("C", self.adjoint_coeff.len()),
        ] {
            if len != n {
                return Err(Error::Dimension {
                    what: format!("markdown result field {name}"),
                    expected: format!("{n}"),
                    got: format!("{len}"),
                });
            }
        }
        Ok(ClosedFormMD {
            mu: DVector::from_vec(self.mu.clone()),
            a: DVector::from_vec(self.a.clone()),
            theta: DVector::from_iterator(n, self.theta.iter().map(|x| x.unwrap_or(f64::INFINITY))),
            p0: DVector::from_vec(self.p0.clone()),
            i0: DVector::from_vec(self.i0.clone()),
            revenue_rate: DVector::from_vec(self.revenue_rate.clone()),
            adjoint_coeff: DVector::from_vec(self.adjoint_coeff.clone()),
            horizon: self.horizon,
            r_scale: self.r_scale,
            plain_time: self.plain_time,
            residual_exponents: self.residual_exponents,
            residual_revenue: self.residual_revenue,
        })
    }
}

/// JSON mirror of [`CREquilibrium`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrResultDoc {
    pub price: Vec<f64>,
    pub inventory: Vec<f64>,
    pub profit_rate: Vec<f64>,
    pub revenue_rate: Vec<f64>,
    pub lerner: Vec<f64>,
    pub r_scale: f64,
    pub residual_demand: f64,
}

impl From<&CREquilibrium> for CrResultDoc {
    fn from(eq: &CREquilibrium) -> Self {
        CrResultDoc {
            price: eq.price.iter().cloned().collect(),
            inventory: eq.inventory.iter().cloned().collect(),
            profit_rate: eq.profit_rate.iter().cloned().collect(),
            revenue_rate: eq.revenue_rate.iter().cloned().collect(),
            lerner: eq.lerner.iter().cloned().collect(),
            r_scale: eq.r_scale,
            residual_demand: eq.residual_demand,
        }
    }
}

/// JSON mirror of the scalar fields of [`SolverResult`]; the trajectory
/// itself goes to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverResultDoc {
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub constraint_violation: f64,
    pub hit_price_bounds: bool,
    pub gradient_check: Option<f64>,
    pub ascent_monotone: bool,
}

impl From<&SolverResult> for SolverResultDoc {
    fn from(res: &SolverResult) -> Self {
        SolverResultDoc {
            objective: res.objective,
            converged: res.converged,
            iterations: res.iterations,
            grad_norm: res.grad_norm,
            constraint_violation: res.constraint_violation,
            hit_price_bounds: res.hit_price_bounds,
            gradient_check: res.gradient_check,
            ascent_monotone: res.ascent_monotone,
        }
    }
}

/// Deviations between two trajectories judged against tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonDoc {
    pub sup_rel_dev_p: f64,
    pub sup_rel_dev_i: f64,
    pub obj_rel_dev: f64,
    /// Fraction of the horizon excluded at the tail, where markdown paths
    /// approach the demand singularity.
    pub exclude_tail_frac: f64,
    pub obj_tol: f64,
    pub path_tol: f64,
    pub pass: bool,
}

impl ComparisonDoc {
    pub fn judge(
        cmp: &TrajectoryComparison,
        exclude_tail_frac: f64,
        obj_tol: f64,
        path_tol: f64,
    ) -> Self {
        ComparisonDoc {
            sup_rel_dev_p: cmp.sup_rel_dev_p,
            sup_rel_dev_i: cmp.sup_rel_dev_i,
            obj_rel_dev: cmp.obj_rel_dev,
            exclude_tail_frac,
            obj_tol,
            path_tol,
            pass: cmp.obj_rel_dev <= obj_tol
                && cmp.sup_rel_dev_p <= path_tol
                && cmp.sup_rel_dev_i <= path_tol,
        }
    }
}

/// Write `contents` to `path` via a temp file in the same directory plus a
/// rename. Creates the parent directory if needed.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = parent.join(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize `value` as pretty JSON and write it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Read a JSON document, prefixing parse errors with the path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))
}
