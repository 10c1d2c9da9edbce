//! Evaluation: ROI metrics, test-set reports and model accounting.

mod metrics;
mod report;

pub use metrics::{
    gaussian_taps, psnr_roi, ssim_map, ssim_roi, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA,
    SSIM_WINDOW,
};
pub use report::{
    count_params, evaluate, time_inference, EvalReport, EvalSummary, MetricsRecord, Stat,
};
