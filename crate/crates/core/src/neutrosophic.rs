//! Neutrosophic-domain transforms of a spectrogram.
//!
//! Both transforms start from a local mean `ḡ` over a rectangular
//! `t × f` (time × frequency) window and the absolute deviation
//! `δ = |g − ḡ|`.
//!
//! * [`proposed_transform`]: `T = ḡ / mean(ḡ)`, `I = δ / mean(δ)`. These are
//!   mean ratios, not memberships in [0, 1]; both grids average to exactly 1.
//! * [`baseline_transform`]: min-max memberships `T`, `I` and `F = 1 − T`.
//!
//! The spectrogram is first mapped to a non-negative intensity image by
//! subtracting its log floor, so silence is 0 and louder cells are larger.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{self, Grid, HeaderFields};
use crate::signal::Spectrogram;

/// Denominators below this are treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NsError {
    #[error("window {t}x{f} must have odd, positive sides")]
    EvenWindow { t: usize, f: usize },
    #[error("window {t}x{f} does not fit a {rows}x{cols} grid")]
    WindowTooLarge { t: usize, f: usize, rows: usize, cols: usize },
    #[error(transparent)]
    Grid(#[from] grid::GridError),
}

pub type Result<T> = std::result::Result<T, NsError>;

/// Centered averaging window: `t` frames by `f` bins, both odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct NsWindow {
    t: usize,
    f: usize,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    t: usize,
    f: usize,
}

impl TryFrom<RawWindow> for NsWindow {
    type Error = NsError;
    fn try_from(r: RawWindow) -> Result<Self> {
        NsWindow::new(r.t, r.f)
    }
}

impl From<NsWindow> for RawWindow {
    fn from(w: NsWindow) -> Self {
        RawWindow { t: w.t, f: w.f }
    }
}

impl NsWindow {
    pub fn new(t: usize, f: usize) -> Result<Self> {
        if t == 0 || f == 0 || t.is_multiple_of(2) || f.is_multiple_of(2) {
            return Err(NsError::EvenWindow { t, f });
        }
        Ok(Self { t, f })
    }

    /// Rounds even sides up to the next odd length (10×30 → 11×31).
    pub fn nearest_odd(t: usize, f: usize) -> Self {
        let odd = |n: usize| if n.is_multiple_of(2) { n + 1 } else { n };
        Self { t: odd(t), f: odd(f) }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn f(&self) -> usize {
        self.f
    }

    fn check_fits(&self, g: &Grid) -> Result<()> {
        if self.t > g.rows() || self.f > g.cols() {
            return Err(NsError::WindowTooLarge {
                t: self.t,
                f: self.f,
                rows: g.rows(),
                cols: g.cols(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for NsWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.t, self.f)
    }
}

/// Box-filter mean over the window with clamp-to-edge padding; output keeps the input dims.
pub fn mean_filter(g: &Grid, win: NsWindow) -> Result<Grid> {
    win.check_fits(g)?;
    let (rows, cols) = g.dims();
    let (ht, hf) = ((win.t / 2) as isize, (win.f / 2) as isize);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    // Sum along frequency first, then along time.
    let mut across = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = g.row(r);
        for c in 0..cols {
            across[r * cols + c] = (-hf..=hf).map(|n| row[clamp(c as isize + n, cols)]).sum();
        }
    }
    let norm = (win.t * win.f) as f64;
    let out = Grid::from_fn(rows, cols, |r, c| {
        (-ht..=ht).map(|m| across[clamp(r as isize + m, rows) * cols + c]).sum::<f64>() / norm
    });
    Ok(out)
}

/// `|g − ḡ|` elementwise.
pub fn deviation(g: &Grid, g_bar: &Grid) -> Result<Grid> {
    Ok(g.zip_map(g_bar, |a, b| (a - b).abs())?)
}

/// Shared quantities of both transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct NsIntermediates {
    pub g_bar: Grid,
    pub delta: Grid,
    pub g_bar_mean: f64,
    pub delta_mean: f64,
    pub g_bar_min: f64,
    pub g_bar_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl NsIntermediates {
    pub fn compute(g: &Grid, win: NsWindow) -> Result<Self> {
        let g_bar = mean_filter(g, win)?;
        let delta = deviation(g, &g_bar)?;
        Ok(Self {
            g_bar_mean: g_bar.mean(),
            delta_mean: delta.mean(),
            g_bar_min: g_bar.min(),
            g_bar_max: g_bar.max(),
            delta_min: delta.min(),
            delta_max: delta.max(),
            g_bar,
            delta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NsMethod {
    Baseline,
    Proposed,
}

impl fmt::Display for NsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NsMethod::Baseline => "baseline",
            NsMethod::Proposed => "proposed",
        })
    }
}

/// Truth and indeterminacy grids aligned with the source (falsity only for the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct NeutrosophicMap {
    pub truth: Grid,
    pub indeterminacy: Grid,
    pub falsity: Option<Grid>,
    pub method: NsMethod,
    pub window: NsWindow,
    pub truth_degenerate: bool,
    pub indeterminacy_degenerate: bool,
}

impl NeutrosophicMap {
    pub fn is_degenerate(&self) -> bool {
        self.truth_degenerate || self.indeterminacy_degenerate
    }
}

fn ratio_to(grid: &Grid, denom: f64) -> (Grid, bool) {
    if denom.abs() < DEGENERATE_EPS {
        (Grid::filled(grid.rows(), grid.cols(), 0.0), true)
    } else {
        (grid.map(|v| v / denom), false)
    }
}

fn min_max(grid: &Grid, lo: f64, hi: f64) -> (Grid, bool) {
    let span = hi - lo;
    if span < DEGENERATE_EPS {
        (Grid::filled(grid.rows(), grid.cols(), 0.0), true)
    } else {
        (grid.map(|v| ((v - lo) / span).clamp(0.0, 1.0)), false)
    }
}

/// `I = δ / mean(δ)`; all-zero and flagged when `mean(δ)` vanishes.
pub fn indeterminacy_from_deviation(delta: &Grid) -> (Grid, bool) {
    ratio_to(delta, delta.mean())
}

/// Mean-ratio transform on a raw grid.
pub fn proposed_transform_grid(g: &Grid, win: NsWindow) -> Result<NeutrosophicMap> {
    let ns = NsIntermediates::compute(g, win)?;
    let (truth, truth_degenerate) = ratio_to(&ns.g_bar, ns.g_bar_mean);
    let (indeterminacy, indeterminacy_degenerate) = ratio_to(&ns.delta, ns.delta_mean);
    Ok(NeutrosophicMap {
        truth,
        indeterminacy,
        falsity: None,
        method: NsMethod::Proposed,
        window: win,
        truth_degenerate,
        indeterminacy_degenerate,
    })
}

/// Min-max membership transform on a raw grid.
pub fn baseline_transform_grid(g: &Grid, win: NsWindow) -> Result<NeutrosophicMap> {
    let ns = NsIntermediates::compute(g, win)?;
    let (truth, truth_degenerate) = min_max(&ns.g_bar, ns.g_bar_min, ns.g_bar_max);
    let (indeterminacy, indeterminacy_degenerate) = min_max(&ns.delta, ns.delta_min, ns.delta_max);
    let falsity = truth.map(|t| 1.0 - t);
    Ok(NeutrosophicMap {
        truth,
        indeterminacy,
        falsity: Some(falsity),
        method: NsMethod::Baseline,
        window: win,
        truth_degenerate,
        indeterminacy_degenerate,
    })
}

/// The spectrogram as a non-negative intensity image (`g − log_floor`).
pub fn intensity_image(spec: &Spectrogram) -> Grid {
    spec.grid.map(|v| v - spec.log_floor)
}

pub fn proposed_transform(spec: &Spectrogram, win: NsWindow) -> Result<NeutrosophicMap> {
    proposed_transform_grid(&intensity_image(spec), win)
}

pub fn baseline_transform(spec: &Spectrogram, win: NsWindow) -> Result<NeutrosophicMap> {
    baseline_transform_grid(&intensity_image(spec), win)
}

/// Paths written by [`export_map`].
#[derive(Debug, Clone)]
pub struct ExportedMap {
    pub truth: PathBuf,
    pub indeterminacy: PathBuf,
    pub falsity: Option<PathBuf>,
    pub image: PathBuf,
}

fn component_fields(map: &NeutrosophicMap, name: &str, degenerate: bool) -> HeaderFields {
    let mut f = HeaderFields::new();
    f.insert("name".into(), name.into());
    f.insert("method".into(), map.method.to_string());
    f.insert("window".into(), map.window.to_string());
    f.insert("degenerate".into(), u8::from(degenerate).to_string());
    f
}

/// Writes `<stem>.T.grid`, `<stem>.I.grid`, `<stem>.F.grid` (baseline only)
/// and a greyscale `<stem>.I.png` into `dir`.
pub fn export_map(map: &NeutrosophicMap, dir: &Path, stem: &str) -> Result<ExportedMap> {
    let path = |suffix: &str| dir.join(format!("{stem}.{suffix}"));
    let truth = path("T.grid");
    grid::write_grid(&truth, &map.truth, &component_fields(map, "T", map.truth_degenerate))?;
    let indeterminacy = path("I.grid");
    grid::write_grid(
        &indeterminacy,
        &map.indeterminacy,
        &component_fields(map, "I", map.indeterminacy_degenerate),
    )?;
    let falsity = match &map.falsity {
        Some(f) => {
            let p = path("F.grid");
            grid::write_grid(&p, f, &component_fields(map, "F", map.truth_degenerate))?;
            Some(p)
        }
        None => None,
    };
    let image = path("I.png");
    grid::write_grid_png(&image, &map.indeterminacy, map.indeterminacy_degenerate)?;
    Ok(ExportedMap {
        truth,
        indeterminacy,
        falsity,
        image,
    })
}
