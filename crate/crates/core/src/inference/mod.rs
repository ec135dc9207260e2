//! Regression analysis: OLS, logistic and crossed random-intercept logistic
//! mixed models, plus the named model presets.

pub mod design;
pub mod glmm;
pub mod logistic;
pub mod ols;
pub mod presets;
pub mod report;

pub use design::{collinear_columns, zscore, DesignMatrix, Grouping, ZParams};
pub use glmm::{fit_glmm, fit_glmm_logistic, GlmmFit, GlmmOptions};
pub use logistic::{fit_logistic, irls, LogisticFit};
pub use ols::fit_ols;
pub use presets::{preset, run, run_preset, AnalysisFrame, FrameOptions, Preset, PRESET_IDS};
pub use report::{Coefficient, FitKind, RegressionReport, VarianceComponent};
