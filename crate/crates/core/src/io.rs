//! JSON file formats for sources, models, solve requests/results and sweeps.

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::discrete::{SolveOptions, SolverWarning, StepRule};
use crate::error::{DpflError, Result};
use crate::gaussian::GaussianModel;
use crate::prob::JointSource;
use crate::report::InfoReport;
use crate::LagrangeParams;

/// Parses `text` as JSON, naming `what` in the error.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| DpflError::Parse {
        what: what.to_string(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn matrix(rows: &[Vec<f64>], n_rows: usize, n_cols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n_rows {
        return Err(DpflError::InvalidModel(format!(
            "{name} has {} rows, expected {n_rows}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(DpflError::InvalidModel(format!(
                "{name} row {i} has {} entries, expected {n_cols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `{"card_x", "card_y", "joint": [[...]]}` with `joint[x][y] = p(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointFile {
    pub card_x: usize,
    pub card_y: usize,
    pub joint: Vec<Vec<f64>>,
}

impl JointFile {
    pub fn into_source(self) -> Result<JointSource> {
        let m = matrix(&self.joint, self.card_x, self.card_y, "joint").map_err(|e| match e {
            DpflError::InvalidModel(s) => DpflError::InvalidJoint(s),
            other => other,
        })?;
        JointSource::new(m)
    }

    pub fn from_source(source: &JointSource) -> Self {
        Self {
            card_x: source.card_x(),
            card_y: source.card_y(),
            joint: rows_of(source.joint()),
        }
    }
}

/// `{"n_x", "n_y", "sigma_x", "sigma_y", "sigma_yx"}`, row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianFile {
    pub n_x: usize,
    pub n_y: usize,
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma_y: Vec<Vec<f64>>,
    pub sigma_yx: Vec<Vec<f64>>,
}

impl GaussianFile {
    pub fn into_model(self) -> Result<GaussianModel> {
        let sx = matrix(&self.sigma_x, self.n_x, self.n_x, "sigma_x")?;
        let sy = matrix(&self.sigma_y, self.n_y, self.n_y, "sigma_y")?;
        let syx = matrix(&self.sigma_yx, self.n_y, self.n_x, "sigma_yx")?;
        GaussianModel::new(sx, sy, syx)
    }

    pub fn from_model(model: &GaussianModel) -> Self {
        Self {
            n_x: model.n_x(),
            n_y: model.n_y(),
            sigma_x: rows_of(model.sigma_x()),
            sigma_y: rows_of(model.sigma_y()),
            sigma_yx: rows_of(model.sigma_yx()),
        }
    }
}

/// Solver settings as they appear in request files; absent fields take the
/// [`SolveOptions`] defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<StepRule>,
}

impl SolverSettings {
    /// Fields set in `over` win over fields set here.
    pub fn overlay(self, over: SolverSettings) -> Self {
        Self {
            tol: over.tol.or(self.tol),
            max_iter: over.max_iter.or(self.max_iter),
            seed: over.seed.or(self.seed),
            restarts: over.restarts.or(self.restarts),
            step_rule: over.step_rule.or(self.step_rule),
        }
    }

    pub fn options(&self) -> Result<SolveOptions> {
        let d = SolveOptions::default();
        let o = SolveOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            seed: self.seed.unwrap_or(d.seed),
            restarts: self.restarts.unwrap_or(d.restarts),
            step_rule: self.step_rule.unwrap_or(d.step_rule),
        };
        o.validate()?;
        Ok(o)
    }
}

/// Discrete solve request. `source` is a path to a [`JointFile`];
/// cardinalities default to `|X|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteRequest {
    pub source: String,
    #[serde(default)]
    pub card_t1: Option<usize>,
    #[serde(default)]
    pub card_t2: Option<usize>,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<StepRule>,
}

/// Gaussian solve request. `model` is a path to a [`GaussianFile`];
/// representation dimensions default to `N_X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianRequest {
    pub model: String,
    #[serde(default)]
    pub d1: Option<usize>,
    #[serde(default)]
    pub d2: Option<usize>,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<StepRule>,
}

impl DiscreteRequest {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
            step_rule: self.step_rule,
        }
    }

    pub fn params(&self) -> Result<LagrangeParams> {
        LagrangeParams::new(self.beta, self.lambda, self.gamma)
    }
}

impl GaussianRequest {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
            step_rule: self.step_rule,
        }
    }

    pub fn params(&self) -> Result<LagrangeParams> {
        LagrangeParams::new(self.beta, self.lambda, self.gamma)
    }
}

/// Units of the information columns of a [`SolveResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub i_x_t1: f64,
    pub i_x_t2: f64,
    pub i_t1_t2: f64,
    pub i_y_t1t2: f64,
    pub functional: f64,
    pub units: Units,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub warnings: Vec<SolverWarning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl SolveResult {
    /// Converts the report (and the trace, if given) to `units`.
    pub fn new(
        report: &InfoReport,
        units: Units,
        converged: bool,
        iterations: usize,
        seed: u64,
        warnings: Vec<SolverWarning>,
        trace: Option<&[f64]>,
    ) -> Self {
        let (r, scale) = match units {
            Units::Nats => (*report, 1.0),
            Units::Bits => (report.in_bits(), std::f64::consts::LN_2),
        };
        Self {
            i_x_t1: r.i_x_t1,
            i_x_t2: r.i_x_t2,
            i_t1_t2: r.i_t1_t2,
            i_y_t1t2: r.i_y_t1t2,
            functional: r.functional_value,
            units,
            converged,
            iterations,
            seed,
            warnings,
            trace: trace.map(|t| t.iter().map(|v| v / scale).collect()),
        }
    }
}

/// Which solver a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Discrete,
    Gaussian,
}

/// Sweep configuration. `problem` is a path to a [`JointFile`] or a
/// [`GaussianFile`] according to `solver`; `dims` gives `(|T1|, |T2|)` or
/// `(d1, d2)` and defaults to the input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: String,
    pub solver: SolverKind,
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub dims: Option<(usize, usize)>,
    #[serde(default)]
    pub keep_all: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<StepRule>,
}

impl SweepConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
            step_rule: self.step_rule,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_file_round_trip() {
        let text = r#"{"card_x": 2, "card_y": 2, "joint": [[0.4, 0.1], [0.1, 0.4]]}"#;
        let file: JointFile = parse_json(text, "joint file").unwrap();
        let source = file.clone().into_source().unwrap();
        assert_eq!(JointFile::from_source(&source), file);
    }

    #[test]
    fn joint_file_errors_name_the_row() {
        let text = r#"{"card_x": 2, "card_y": 2, "joint": [[0.4, 0.1], [0.1, 0.3]]}"#;
        let err = parse_json::<JointFile>(text, "joint file").unwrap().into_source().unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");

        let ragged = r#"{"card_x": 2, "card_y": 2, "joint": [[0.5, 0.25], [0.25]]}"#;
        let err = parse_json::<JointFile>(ragged, "joint file").unwrap().into_source().unwrap_err();
        assert!(matches!(err, DpflError::InvalidJoint(ref s) if s.contains("row 1")), "{err}");

        let unknown = r#"{"card_x": 1, "card_y": 1, "joint": [[1.0]], "extra": 3}"#;
        let err = parse_json::<JointFile>(unknown, "joint file").unwrap_err();
        assert!(matches!(err, DpflError::Parse { ref message, .. } if message.contains("extra")), "{err}");
    }

    #[test]
    fn gaussian_file_round_trip() {
        let text = r#"{"n_x": 1, "n_y": 1, "sigma_x": [[2.0]], "sigma_y": [[1.0]], "sigma_yx": [[1.0]]}"#;
        let file: GaussianFile = parse_json(text, "model").unwrap();
        let model = file.clone().into_model().unwrap();
        assert!((model.theta()[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(GaussianFile::from_model(&model), file);
    }

    #[test]
    fn requests_fill_defaults() {
        let text = r#"{"source": "j.json", "beta": 0.5, "lambda": 0.5, "gamma": 0.1, "seed": 4}"#;
        let req: DiscreteRequest = parse_json(text, "request").unwrap();
        let o = req.settings().options().unwrap();
        assert_eq!(o.seed, 4);
        assert_eq!(o.tol, SolveOptions::default().tol);
        let over = SolverSettings {
            seed: Some(9),
            ..Default::default()
        };
        assert_eq!(req.settings().overlay(over).options().unwrap().seed, 9);

        let typo = r#"{"source": "j.json", "beta": 0.5, "lambda": 0.5, "gamma": 0.1, "sead": 4}"#;
        assert!(parse_json::<DiscreteRequest>(typo, "request").is_err());
    }

    #[test]
    fn sweep_config_parses() {
        let text = r#"{"problem": "m.json", "solver": "gaussian", "betas": [0.1, 0.2],
            "lambdas": [0.3], "gammas": [0.0], "dims": [2, 2], "restarts": 2}"#;
        let cfg: SweepConfig = parse_json(text, "sweep config").unwrap();
        assert_eq!(cfg.solver, SolverKind::Gaussian);
        assert_eq!(cfg.dims, Some((2, 2)));
        assert_eq!(cfg.settings().restarts, Some(2));
    }

    #[test]
    fn result_in_bits() {
        let report = InfoReport {
            i_x_t1: std::f64::consts::LN_2,
            i_x_t2: 0.0,
            i_t1_t2: 0.0,
            i_y_t1t2: 0.0,
            functional_value: std::f64::consts::LN_2,
        };
        let r = SolveResult::new(&report, Units::Bits, true, 3, 0, vec![], Some(&[std::f64::consts::LN_2]));
        assert!((r.i_x_t1 - 1.0).abs() < 1e-15);
        assert_eq!(r.trace, Some(vec![1.0]));
    }
}
