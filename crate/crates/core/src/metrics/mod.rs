//! Token error rate, DET curves and the averaged-FAR detection metric.

mod det;
mod hist;
mod summary;
mod wer;

pub use det::{avg_far, det_curve, roc_auc, DetCurve, DetPoint, Scored};
pub use hist::{total_variation, Grid2d};
pub use summary::{mean_std, percent, sig6, MeanStd, MetricReport, DEFAULT_FRR_MAX};
pub use wer::{corpus_wer, wer, WerBreakdown};
