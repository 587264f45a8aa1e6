//! Run configuration: one structured record per experiment, echoed into
//! every report so results are reproducible from the report alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// All experiment parameters in one flat record. Subcommands fill the
/// fields they use; `validate` names every field that blocks a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_max_exponent: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_ratio: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Seeds are always present and recorded in outputs.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_laplacian: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

const KERNELS: [&str; 3] = ["riesz", "newtonian", "oscillating"];
const OPERATORS: [&str; 5] = [
    "potential",
    "gradient",
    "maximal",
    "truncated-singular",
    "maximal-singular",
];

impl ExperimentConfig {
    /// All diagnostics preventing a run; empty means the run can start.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let d = &mut out;
        match self.subcommand.as_str() {
            "field" => {
                self.check_operator(d);
                self.check_kernel(d);
                self.check_measure(d);
                self.check_file(d, "points", &self.points, true);
                match self.operator.as_deref() {
                    Some("maximal") => self.check_radii_increasing(d),
                    Some("truncated-singular") => {
                        if !matches!(self.epsilon, Some(e) if e > 0.0) {
                            d.push(Diagnostic::new("epsilon", "a positive truncation radius is required"));
                        }
                    }
                    _ => {}
                }
            }
            "capacity" => {
                self.check_file(d, "set", &self.set, true);
                if let Some(mesh) = self.mesh {
                    if !(mesh > 0.0) {
                        d.push(Diagnostic::new("mesh", format!("mesh must be positive, got {mesh}")));
                    }
                }
            }
            "diff" => {
                self.check_kernel(d);
                self.check_measure(d);
                if self.center.is_none() {
                    d.push(Diagnostic::new("center", "an evaluation center is required"));
                }
                self.check_radii_decreasing(d);
                if let Some(ratio) = self.mesh_ratio {
                    if ratio < 8 {
                        d.push(Diagnostic::new(
                            "mesh_ratio",
                            "windows need at least 8 cells per radius",
                        ));
                    }
                }
            }
            "lipschitz" => {
                self.check_kernel(d);
                self.check_measure(d);
                self.check_window(d);
                if !matches!(self.pairs, Some(p) if p > 0) {
                    d.push(Diagnostic::new("pairs", "a positive pair count is required"));
                }
            }
            "levelset" => {
                self.check_measure(d);
                if self.level.is_none() {
                    d.push(Diagnostic::new("level", "a level value is required"));
                }
                match &self.bands {
                    None => d.push(Diagnostic::new("bands", "a decreasing band list is required")),
                    Some(b) => {
                        if b.is_empty() || b.windows(2).any(|p| p[1] >= p[0]) || b[b.len() - 1] < 0.0
                        {
                            d.push(Diagnostic::new(
                                "bands",
                                "bands must be strictly decreasing and nonnegative",
                            ));
                        }
                    }
                }
            }
            "suite" => {}
            other => {
                d.push(Diagnostic::new(
                    "subcommand",
                    format!("unknown subcommand '{other}'"),
                ));
            }
        }
        out
    }

    fn check_kernel(&self, d: &mut Vec<Diagnostic>) {
        match self.kernel.as_deref() {
            None => d.push(Diagnostic::new("kernel", "a kernel name is required")),
            Some(name) if !KERNELS.contains(&name) => d.push(Diagnostic::new(
                "kernel",
                format!("unknown kernel '{name}' (expected one of {KERNELS:?})"),
            )),
            _ => {}
        }
        match self.dimension {
            None => d.push(Diagnostic::new("dimension", "a dimension is required")),
            Some(n) if n < 2 => d.push(Diagnostic::new(
                "dimension",
                format!("dimension must be at least 2, got {n}"),
            )),
            _ => {}
        }
    }

    fn check_operator(&self, d: &mut Vec<Diagnostic>) {
        match self.operator.as_deref() {
            None => d.push(Diagnostic::new("operator", "an operator name is required")),
            Some(name) if !OPERATORS.contains(&name) => d.push(Diagnostic::new(
                "operator",
                format!("unknown operator '{name}' (expected one of {OPERATORS:?})"),
            )),
            _ => {}
        }
    }

    fn check_measure(&self, d: &mut Vec<Diagnostic>) {
        self.check_file(d, "measure", &self.measure, true);
    }

    fn check_file(
        &self,
        d: &mut Vec<Diagnostic>,
        field: &str,
        value: &Option<PathBuf>,
        required: bool,
    ) {
        match value {
            None if required => d.push(Diagnostic::new(field, "a file path is required")),
            Some(path) if !Path::new(path).exists() => d.push(Diagnostic::new(
                field,
                format!("file not found: {}", path.display()),
            )),
            _ => {}
        }
    }

    fn check_radii_increasing(&self, d: &mut Vec<Diagnostic>) {
        match &self.radii {
            None => {}
            Some(r) if r.is_empty() || r.windows(2).any(|p| p[1] <= p[0]) || r[0] <= 0.0 => {
                d.push(Diagnostic::new(
                    "radii",
                    "radii must be positive and strictly increasing",
                ));
            }
            _ => {}
        }
    }

    fn check_radii_decreasing(&self, d: &mut Vec<Diagnostic>) {
        match &self.radii {
            None => d.push(Diagnostic::new("radii", "a decreasing radius list is required")),
            Some(r) if r.is_empty() || r.windows(2).any(|p| p[1] >= p[0]) || r[r.len() - 1] <= 0.0 => {
                d.push(Diagnostic::new(
                    "radii",
                    "radii must be positive and strictly decreasing",
                ));
            }
            _ => {}
        }
    }

    fn check_window(&self, d: &mut Vec<Diagnostic>) {
        match (&self.window_lo, &self.window_hi) {
            (Some(lo), Some(hi)) => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    d.push(Diagnostic::new(
                        "window_lo",
                        "window corners must have equal length with lo strictly below hi",
                    ));
                }
            }
            _ => d.push(Diagnostic::new(
                "window_lo",
                "both window corners are required",
            )),
        }
    }
}
