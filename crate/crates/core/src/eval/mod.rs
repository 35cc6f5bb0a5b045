//! Rate-distortion evaluation: PSNR tables, RD curves under both bit
//! accounting conventions, and noise-map visualizations.

pub mod noisemaps;
pub mod plot;
pub mod rd;
pub mod table;

pub use noisemaps::{emit_noise_maps, paired_noise_maps, NoiseMapOutput};
pub use plot::{plot_rd, series, Accounting, Overlay, Series};
pub use rd::{evaluate_rd, evaluate_rd_images, EvalInputs, ImageRecord, RdPoint, Report, ReportProvenance};
pub use table::{render_table, RenderedTable};

/// Two λ values closer than this are the same evaluation cell.
pub const LAMBDA_EPS: f64 = 1e-9;

pub(crate) fn same_lambda(a: f64, b: f64) -> bool {
    (a - b).abs() <= LAMBDA_EPS
}
