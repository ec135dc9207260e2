//! Regression result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Ols,
    Logistic,
    Glmm,
}

impl FitKind {
    /// Test statistic label: `t` for OLS, Wald `z` otherwise.
    pub fn statistic_label(self) -> &'static str {
        match self {
            FitKind::Ols => "t",
            _ => "z",
        }
    }

    /// Effect-size column: partial eta squared for OLS, odds ratio otherwise.
    pub fn effect_label(self) -> &'static str {
        match self {
            FitKind::Ols => "eta2",
            _ => "OR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub statistic: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odds_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_eta2: Option<f64>,
}

impl Coefficient {
    pub fn effect(&self) -> Option<f64> {
        self.odds_ratio.or(self.partial_eta2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponent {
    pub group: String,
    pub n_levels: usize,
    pub variance: f64,
    pub sd: f64,
    /// Variance sits at the lower bound and is reported as zero.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub kind: FitKind,
    pub response: String,
    pub n: usize,
    pub coefficients: Vec<Coefficient>,
    pub random_effects: Vec<VarianceComponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adj_r2: Option<f64>,
    pub log_likelihood: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance: Option<f64>,
    pub iterations: usize,
    pub metadata: BTreeMap<String, String>,
}

impl RegressionReport {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Column headers of the table layout.
    pub fn columns(&self) -> [&'static str; 6] {
        [
            "Predictor",
            "beta",
            "SE",
            self.kind.statistic_label(),
            "p",
            self.kind.effect_label(),
        ]
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header = self.columns();
        let mut rows: Vec<[String; 6]> = vec![header.map(str::to_string)];
        for c in &self.coefficients {
            let effect = match c.effect() {
                Some(v) if c.name != "Intercept" => format!("{v:.2}"),
                _ => "-".into(),
            };
            rows.push([
                c.name.clone(),
                format!("{:.2}", c.beta),
                format!("{:.2}", c.se),
                format!("{:.2}", c.statistic),
                format_p(c.p),
                effect,
            ]);
        }
        let widths: Vec<usize> = (0..6)
            .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        if let Some(id) = &self.model_id {
            let _ = writeln!(out, "{id}: {} ~ {}", self.response, self.formula_rhs());
        }
        for (i, r) in rows.iter().enumerate() {
            let mut line = format!("{:<w$}", r[0], w = widths[0]);
            for j in 1..6 {
                let _ = write!(line, "  {:>w$}", r[j], w = widths[j]);
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
                out.push('\n');
            }
        }
        let _ = writeln!(out, "n = {}", self.n);
        if let Some(r) = self.adj_r2 {
            let _ = writeln!(out, "adjusted R2 = {r:.2}");
        }
        for v in &self.random_effects {
            let flag = if v.at_boundary { " (at boundary)" } else { "" };
            let _ = writeln!(
                out,
                "var({}) = {:.4}{flag}, {} levels",
                v.group, v.variance, v.n_levels
            );
        }
        let _ = writeln!(out, "log-likelihood = {:.4}", self.log_likelihood);
        out
    }

    /// Right-hand side of the fitted formula, lme4 style.
    pub fn formula_rhs(&self) -> String {
        let mut terms: Vec<String> = self
            .coefficients
            .iter()
            .filter(|c| c.name != "Intercept")
            .map(|c| c.name.clone())
            .collect();
        terms.extend(
            self.random_effects
                .iter()
                .map(|v| format!("(1|{})", v.group)),
        );
        terms.join(" + ")
    }
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}
