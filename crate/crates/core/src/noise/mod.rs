//! Label-noise estimation from re-annotation.
//!
//! Re-annotated verdicts are treated as truth and the groundtruth labels as
//! predictions. From the confusion counts on an annotated subset this module
//! derives the per-class error rates, groundtruth precision and recall
//! (tagability), and the corrected positive count
//! `N̂+ = N+(1 − p+) + (T − N+)p−`, each with percentile-bootstrap intervals.
//! It also provides the forward noise model used to corrupt clean labels.

mod bootstrap;
mod inject;
mod rates;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapConfig, Interval};
pub use inject::{
    inject_noise, observed_error_rates, InjectionReport, NoiseSpec, TagNoise,
};
pub use rates::{
    corrected_count, estimate_noise_rates, estimate_prevalence, groundtruth_quality,
    ConfusionCounts, GroundtruthQuality, NoiseRates, PrevalenceEstimate, ReferenceTag,
    REFERENCE_TAGS, REFERENCE_TOTAL,
};
