//! Experiments that explain high-dimensional BO behaviour: gradient and
//! travel-distance heatmaps, MLL surfaces, EI histograms, OTSD and the
//! boundary-dimension analysis.

mod border;
mod heatmap;
pub mod otsd;
mod surface;

pub use border::{border_analysis, BorderConfig, BorderReport, DimLabel, MeanSe, BOUNDARY_TOLERANCE};
pub use heatmap::{
    acq_cell, acq_travel_heatmap, default_d_grid, default_lengthscale_grid, gp_sample_dataset, max_grad_cell,
    raasp_fraction_heatmap, vanishing_grad_heatmap, HeatmapCell, HeatmapResult, StatKind,
};
pub use otsd::{otsd, OtsdCurve, Solver};
pub use surface::{
    ei_flatness_histogram, ei_values, histogram, mll_surface, total_variation, EiHistogram, SurfaceConfig, SurfacePoint,
};

use std::path::Path;

use crate::error::Result;
use crate::trace::write_atomic;

/// Sidecar path next to a CSV: `x.csv` becomes `x.json`.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

/// Writes a CSV body and its JSON metadata sidecar, both atomically.
pub fn write_with_sidecar(csv_path: &Path, csv: &str, meta: &serde_json::Value) -> Result<()> {
    write_atomic(csv_path, csv.as_bytes())?;
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    write_atomic(&sidecar_path(csv_path), text.as_bytes())
}
