//! The run-configuration document: one JSON file collecting the column
//! mapping, sensor limits, detector thresholds, and the per-variable
//! analysis selections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use streamflag_core::detect::DetectionMode;
use streamflag_core::features::KnnVariant;
use streamflag_core::io::ColumnMapping;
use streamflag_core::series::{DetectorConfig, SensorSpec};
use streamflag_core::{Error, Result};

/// Which forecasting model to train for a variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelChoice {
    /// Random-walk forecaster: tomorrow equals today.
    Naive,
    /// Least-squares autoregression on differenced logs; order picked from
    /// the partial autocorrelations when not given.
    LinearAr {
        #[serde(default)]
        p: Option<usize>,
    },
    /// Fixed-order ARIMA.
    Arima { p: usize, d: usize, q: usize },
    /// ARIMA with the order chosen by information-criterion search.
    AutoArima,
    /// Regression on a covariate variable with ARIMA-modelled errors.
    RegArima { covariate: String },
}

impl ModelChoice {
    /// Short name used in method labels and file names.
    pub fn label(&self) -> String {
        match self {
            ModelChoice::Naive => "naive".into(),
            ModelChoice::LinearAr { p: Some(p) } => format!("linear-ar{p}"),
            ModelChoice::LinearAr { p: None } => "linear-ar".into(),
            ModelChoice::Arima { p, d, q } => format!("arima-{p}-{d}-{q}"),
            ModelChoice::AutoArima => "auto-arima".into(),
            ModelChoice::RegArima { .. } => "reg-arima".into(),
        }
    }
}

/// Detection modes, in config form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    /// Observations always feed the forecasting state.
    Ad,
    /// Interval-flagged observations are replaced by their forecasts.
    Adam,
}

impl ModeChoice {
    pub fn to_mode(self) -> DetectionMode {
        match self {
            ModeChoice::Ad => DetectionMode::Ad,
            ModeChoice::Adam => DetectionMode::Adam,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModeChoice::Ad => "ad",
            ModeChoice::Adam => "adam",
        }
    }
}

/// Columns of the feature matrix, each a transform of the log series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    /// The log series itself.
    Log,
    /// Two-sided derivative of the log series.
    Derivative,
    /// Positive side of the derivative, negatives zeroed.
    OneSidedPositive,
    /// Negative side of the derivative, positives zeroed.
    OneSidedNegative,
}

impl TransformKind {
    pub fn label(self) -> &'static str {
        match self {
            TransformKind::Log => "log",
            TransformKind::Derivative => "derivative",
            TransformKind::OneSidedPositive => "one-sided-positive",
            TransformKind::OneSidedNegative => "one-sided-negative",
        }
    }
}

/// Which feature-space detector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMethodChoice {
    /// Leader clustering with the extreme-value threshold.
    HdOutliers,
    /// Weighted k-nearest-neighbour distance sum.
    KnnAgg,
    /// Plain k-nearest-neighbour distance sum.
    KnnSum,
}

impl FeatureMethodChoice {
    pub fn label(self) -> &'static str {
        match self {
            FeatureMethodChoice::HdOutliers => "hd-outliers",
            FeatureMethodChoice::KnnAgg => "knn-agg",
            FeatureMethodChoice::KnnSum => "knn-sum",
        }
    }

    pub fn knn_variant(self) -> Option<KnnVariant> {
        match self {
            FeatureMethodChoice::HdOutliers => None,
            FeatureMethodChoice::KnnAgg => Some(KnnVariant::Agg),
            FeatureMethodChoice::KnnSum => Some(KnnVariant::Sum),
        }
    }
}

/// What to run for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableConfig {
    /// Variable name; must appear in the column mapping.
    pub name: String,
    /// Forecasting models to train and run.
    #[serde(default)]
    pub models: Vec<ModelChoice>,
    /// Detection modes to run each model in.
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeChoice>,
    /// Feature-matrix columns for the feature detectors.
    #[serde(default)]
    pub feature_transforms: Vec<TransformKind>,
    /// Feature detectors to run over the matrix.
    #[serde(default)]
    pub feature_methods: Vec<FeatureMethodChoice>,
}

fn default_modes() -> Vec<ModeChoice> {
    vec![ModeChoice::Ad]
}

/// The whole run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Shared detector thresholds.
    #[serde(default)]
    pub detector: DetectorConfig,
    /// How to read the input file.
    pub mapping: ColumnMapping,
    /// Sensor limits per variable (used by the rules stage).
    pub sensors: Vec<SensorSpec>,
    /// Per-variable analysis selections (the `pipeline` command requires at
    /// least one entry; single-purpose commands may ignore this section).
    #[serde(default)]
    pub variables: Vec<VariableConfig>,
}

impl RunConfig {
    /// Read and validate a config document.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-field checks: referenced variables must exist.
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        for sensor in &self.sensors {
            sensor.validate()?;
            if !self.mapping.value_columns.contains_key(&sensor.variable) {
                return Err(Error::InvalidConfig(format!(
                    "sensor limits given for {:?}, which is not a mapped variable",
                    sensor.variable
                )));
            }
        }
        for var in &self.variables {
            if !self.mapping.value_columns.contains_key(&var.name) {
                return Err(Error::InvalidConfig(format!(
                    "variable {:?} is not in the column mapping",
                    var.name
                )));
            }
            if self.sensor_for(&var.name).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "variable {:?} has no sensor limits; the rules stage needs them",
                    var.name
                )));
            }
            for model in &var.models {
                if let ModelChoice::RegArima { covariate } = model {
                    if !self.mapping.value_columns.contains_key(covariate) {
                        return Err(Error::InvalidConfig(format!(
                            "covariate {covariate:?} for {:?} is not a mapped variable",
                            var.name
                        )));
                    }
                    if covariate == &var.name {
                        return Err(Error::InvalidConfig(format!(
                            "variable {:?} cannot be its own covariate",
                            var.name
                        )));
                    }
                }
            }
            if !var.feature_methods.is_empty() && var.feature_transforms.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "variable {:?} requests feature detectors but no transforms",
                    var.name
                )));
            }
        }
        Ok(())
    }

    /// Sensor limits for a variable, if configured.
    pub fn sensor_for(&self, variable: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.variable == variable)
    }
}
