//! Row-by-row comparison of computed layer shapes with declared ones.

use std::fmt::{self, Write as _};

use serde::Serialize;

use super::config::{ArchitectureConfig, LayerOp};
use super::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Match,
    Mismatch,
    /// No declared shape to compare with.
    Undeclared,
}

/// A pooling output under one rounding mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub mode: &'static str,
    pub shape: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRow {
    pub row: usize,
    pub kind: &'static str,
    pub geometry: String,
    pub declared_input: Option<Vec<usize>>,
    pub declared_output: Option<Vec<usize>>,
    /// This layer applied to its declared input (or the chained input when undeclared).
    pub computed: Option<Vec<usize>>,
    /// Output when the whole network is run from the configured input.
    pub chained: Vec<usize>,
    pub status: RowStatus,
    /// Both rounding modes, filled for pooling rows.
    pub candidates: Vec<Candidate>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub config: String,
    pub rows: Vec<ShapeRow>,
    pub convention: String,
}

impl ShapeReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ShapeRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Mismatch)
    }
}

fn geometry(op: &LayerOp) -> String {
    match op {
        LayerOp::Conv {
            filters,
            kernel,
            stride,
            pad,
            activation,
        } => format!(
            "{filters} x {}x{} stride {}x{} pad {}x{} {activation:?}",
            kernel[0], kernel[1], stride[0], stride[1], pad[0], pad[1]
        )
        .to_lowercase(),
        LayerOp::Pool {
            kernel,
            stride,
            ceil_mode,
        } => format!(
            "max {}x{} stride {}x{} {}",
            kernel[0],
            kernel[1],
            stride[0],
            stride[1],
            if *ceil_mode { "ceil" } else { "floor" }
        ),
        LayerOp::Dense { units, activation } => format!("{units} {activation:?}").to_lowercase(),
    }
}

fn pool_candidates(op: &LayerOp, input: &[usize]) -> Vec<Candidate> {
    let LayerOp::Pool { kernel, stride, .. } = *op else {
        return Vec::new();
    };
    [("ceil", true), ("floor", false)]
        .into_iter()
        .map(|(mode, ceil_mode)| Candidate {
            mode,
            shape: LayerOp::Pool {
                kernel,
                stride,
                ceil_mode,
            }
            .output_shape(input),
        })
        .collect()
}

/// Evaluates each layer from its declared input so one inconsistent row
/// does not cascade into the rows after it.
pub fn shape_report(cfg: &ArchitectureConfig) -> Result<ShapeReport> {
    let chain = cfg.shape_chain()?;
    let mut prev = cfg.input_shape();
    let mut rows = Vec::with_capacity(cfg.layers.len());
    for (i, layer) in cfg.layers.iter().enumerate() {
        let input = layer.declared_input.clone().unwrap_or_else(|| prev.clone());
        let computed = layer.op.output_shape(&input);
        let status = match (&layer.declared_output, &computed) {
            (None, _) => RowStatus::Undeclared,
            (Some(d), Some(c)) if d == c => RowStatus::Match,
            _ => RowStatus::Mismatch,
        };
        rows.push(ShapeRow {
            row: i + 1,
            kind: layer.op.kind(),
            geometry: geometry(&layer.op),
            declared_input: layer.declared_input.clone(),
            declared_output: layer.declared_output.clone(),
            computed,
            chained: chain[i].clone(),
            status,
            candidates: pool_candidates(&layer.op, &input),
            note: layer.note.clone(),
        });
        prev = chain[i].clone();
    }
    Ok(ShapeReport {
        config: cfg.name.clone(),
        rows,
        convention: "conv: floor((H + 2p - k)/s) + 1; pool ceil: ceil(H/s) with -inf padding \
                     split evenly (extra cell trailing); pool floor: floor((H - k)/s) + 1"
            .into(),
    })
}

fn dims(shape: &Option<Vec<usize>>) -> String {
    match shape {
        Some(s) => s.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
        None => "-".into(),
    }
}

impl fmt::Display for ShapeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "shape check: {}", self.config)?;
        writeln!(f, "convention: {}", self.convention)?;
        writeln!(
            f,
            "{:>3}  {:<5}  {:<34}  {:<12}  {:<12}  {:<12}  {:<12}  status",
            "row", "kind", "geometry", "input", "declared", "computed", "chained"
        )?;
        for r in &self.rows {
            let mut status = match r.status {
                RowStatus::Match => "match".to_string(),
                RowStatus::Mismatch => "MISMATCH".to_string(),
                RowStatus::Undeclared => "-".to_string(),
            };
            if r.status == RowStatus::Mismatch && !r.candidates.is_empty() {
                let alts: Vec<String> = r.candidates.iter().map(|c| format!("{}={}", c.mode, dims(&c.shape))).collect();
                write!(status, " ({})", alts.join(", "))?;
            }
            writeln!(
                f,
                "{:>3}  {:<5}  {:<34}  {:<12}  {:<12}  {:<12}  {:<12}  {}",
                r.row,
                r.kind,
                r.geometry,
                dims(&r.declared_input),
                dims(&r.declared_output),
                dims(&r.computed),
                dims(&Some(r.chained.clone())),
                status
            )?;
            if let Some(note) = &r.note {
                writeln!(f, "     note: {note}")?;
            }
        }
        let bad = self.mismatches().count();
        writeln!(f, "{} rows, {} mismatched", self.rows.len(), bad)
    }
}
