use serde::{Deserialize, Serialize};

/// Metrics of one round. Optional fields are absent when the rule does not
/// produce them or the round was not evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Global training objective `(1/M) Σ_m F_m(θ)` on clean local data.
    pub loss: Option<f64>,
    /// Held-out accuracy (classifiers only).
    pub accuracy: Option<f64>,
    /// `‖θ^{t+1} - θ^t‖`
    pub delta_norm: f64,
    pub lambda_mean: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Mean cosine of malicious uploads to the reference, scaled by `1/S`.
    pub x: Option<f64>,
    /// Same for benign uploads.
    pub y: Option<f64>,
    /// Benign cosine weighted by `‖r‖/‖g‖`, scaled by `1/S`.
    pub rho: Option<f64>,
    /// Fraction of selected workers that are malicious.
    pub w: f64,
    pub selected: Vec<usize>,
    /// Wall time of the round. Excluded from the metric files so they stay
    /// reproducible.
    #[serde(skip)]
    pub wall_ms: f64,
}

impl RoundRecord {
    /// Column order of the metric files.
    pub const FIELDS: [&'static str; 11] = [
        "round",
        "loss",
        "accuracy",
        "delta_norm",
        "lambda_mean",
        "lambda_max",
        "x",
        "y",
        "rho",
        "w",
        "selected",
    ];
}
