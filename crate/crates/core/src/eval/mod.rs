//! Ranking metrics, two-means binarization of quality embeddings and
//! label-transition diagnostics.

mod diagnostics;
mod kmeans;
mod metrics;
mod sweep;

pub use diagnostics::{
    diagnose, disagreement, export_diagnostics, transition_counts, transition_report, Diagnostics, TransitionReport,
    Trust,
};
pub use kmeans::{kmeans_binarize, Binarization, KMEANS_MAX_ITER, KMEANS_TOL};
pub use metrics::{average_precision, evaluate, evaluate_scores, EvalReport};
pub use sweep::{cell_data, run_cell, CellResult, SweepData, SweepRow};
