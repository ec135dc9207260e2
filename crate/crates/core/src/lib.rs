//! Narrativity analysis toolkit.
//!
//! Covers the whole pipeline from raw annotations to persuasion models:
//!
//! - [`corpus`]: annotation and discussion ingestion, soft labels, binarization
//! - [`agreement`]: kappa statistics, annotator clustering, ADI, ICC(3,k)
//! - [`scoring`]: hashed n-gram soft-label classifier, splits, nested CV
//! - [`calibration`]: temperature scaling
//! - [`metrics`]: distributional and classification metrics
//! - [`inference`]: OLS, logistic and crossed random-intercept GLMM fits plus model presets
//! - [`synth`]: seeded synthetic corpora used by the demo and the test suites

pub mod agreement;
pub mod calibration;
pub mod corpus;
pub mod error;
pub mod hypothesis;
pub mod inference;
pub mod metrics;
pub mod scoring;
pub mod stats;
pub mod synth;

pub use error::{ArgusError, Result};
