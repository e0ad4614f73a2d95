//! The command-line surface: argument definitions and one driver function
//! per subcommand.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use streamflag_core::detect::run_detection;
use streamflag_core::forecast::ModelKind;
use streamflag_core::io::{self, ModelDocument, ReportRow, MODEL_SCHEMA_VERSION};
use streamflag_core::prep;
use streamflag_core::rules::run_rules;
use streamflag_core::series::Timestamp;
use streamflag_core::synth::{self, InjectionPlan};
use streamflag_core::{Error, Result};

use crate::config::{ModeChoice, RunConfig, VariableConfig};
use crate::pipeline::{self, sanitize_filename};
use crate::plot;

/// Rule, forecast, and feature-space anomaly detection for high-frequency
/// sensor series.
#[derive(Debug, Parser)]
#[command(name = "streamflag", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run only the rule stage and write its findings as a flag file.
    Rules {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Where to write the findings (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured models and save each as a JSON document.
    Fit {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Directory for the model documents.
        #[arg(long)]
        out_dir: PathBuf,
        /// Restrict to one configured variable.
        #[arg(long)]
        variable: Option<String>,
    },
    /// Run one saved model over an input file and write the trace.
    Detect {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Saved model document (JSON).
        #[arg(long)]
        model: PathBuf,
        /// History-update policy.
        #[arg(long, value_enum, default_value = "ad")]
        mode: ModeChoice,
        /// Covariate variable, required for regression models.
        #[arg(long)]
        covariate: Option<String>,
        /// Where to write the trace (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the feature-space detectors and write their score files.
    Features {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Directory for the score files.
        #[arg(long)]
        out_dir: PathBuf,
        /// Restrict to one configured variable.
        #[arg(long)]
        variable: Option<String>,
    },
    /// Score a saved trace against the labels in the input file.
    Evaluate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV), including the label column.
        #[arg(long)]
        input: PathBuf,
        /// Trace to score (CSV, as written by `detect` or `pipeline`).
        #[arg(long)]
        trace: PathBuf,
        /// Variable the trace belongs to.
        #[arg(long)]
        variable: String,
        /// Method label for the printed row; defaults to the trace's
        /// file stem.
        #[arg(long)]
        method: Option<String>,
    },
    /// Generate a synthetic labelled series from a plan file.
    Inject {
        /// Injection plan (JSON).
        #[arg(long)]
        plan: PathBuf,
        /// Where to write the series (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Override the plan's generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Variable name for the output column (defaults to the plan's).
        #[arg(long)]
        name: Option<String>,
    },
    /// Render a saved trace as a self-contained SVG plot.
    Plot {
        /// Trace to render (CSV).
        #[arg(long)]
        trace: PathBuf,
        /// Where to write the SVG.
        #[arg(long)]
        out: PathBuf,
        /// Run configuration, for marker labels (with --input, --variable).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input observations, for marker labels.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Variable whose labels colour the markers.
        #[arg(long)]
        variable: Option<String>,
    },
    /// Run rules, models, feature detectors, evaluation, and plots.
    Pipeline {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input observations (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Directory for all outputs.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Dispatch a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rules { config, input, out } => cmd_rules(&config, &input, &out),
        Command::Fit {
            config,
            input,
            out_dir,
            variable,
        } => cmd_fit(&config, &input, &out_dir, variable.as_deref()),
        Command::Detect {
            config,
            input,
            model,
            mode,
            covariate,
            out,
        } => cmd_detect(&config, &input, &model, mode, covariate.as_deref(), &out),
        Command::Features {
            config,
            input,
            out_dir,
            variable,
        } => cmd_features(&config, &input, &out_dir, variable.as_deref()),
        Command::Evaluate {
            config,
            input,
            trace,
            variable,
            method,
        } => cmd_evaluate(&config, &input, &trace, &variable, method),
        Command::Inject {
            plan,
            out,
            seed,
            name,
        } => cmd_inject(&plan, &out, seed, name),
        Command::Plot {
            trace,
            out,
            config,
            input,
            variable,
        } => cmd_plot(&trace, &out, config.as_deref(), input.as_deref(), variable),
        Command::Pipeline {
            config,
            input,
            out_dir,
        } => cmd_pipeline(&config, &input, &out_dir),
    }
}

fn selected_variables<'a>(
    config: &'a RunConfig,
    name: Option<&str>,
) -> Result<Vec<&'a VariableConfig>> {
    match name {
        None => Ok(config.variables.iter().collect()),
        Some(name) => {
            let found: Vec<_> = config
                .variables
                .iter()
                .filter(|v| v.name == name)
                .collect();
            if found.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "variable {name:?} is not configured"
                )));
            }
            Ok(found)
        }
    }
}

fn frame_for<'a>(
    frames: &'a std::collections::BTreeMap<String, streamflag_core::series::SeriesFrame>,
    variable: &str,
) -> Result<&'a streamflag_core::series::SeriesFrame> {
    frames.get(variable).ok_or_else(|| {
        Error::InvalidConfig(format!("variable {variable:?} is not in the input file"))
    })
}

fn cmd_rules(config_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let frames = io::load_csv(input, &config.mapping)?;
    let mut rows = Vec::new();
    for spec in &config.sensors {
        let frame = frame_for(&frames, &spec.variable)?;
        let findings = run_rules(frame, spec, &config.detector)?;
        rows.extend(io::rule_flag_rows(&spec.variable, &findings));
    }
    io::write_flags_csv(out, &rows)?;
    println!("{} rule findings -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_fit(config_path: &Path, input: &Path, out_dir: &Path, variable: Option<&str>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let frames = io::load_csv(input, &config.mapping)?;
    std::fs::create_dir_all(out_dir)?;
    let mut wrote = 0usize;
    for var in selected_variables(&config, variable)? {
        if var.models.is_empty() {
            continue;
        }
        let raw = frame_for(&frames, &var.name)?;
        let clean = prep::sanitize_nonpositive(raw)?.frame;
        let training = prep::build_training_set(raw)?;
        for choice in &var.models {
            let covariates = match choice {
                crate::config::ModelChoice::RegArima { covariate } => Some(
                    pipeline::covariate_data(
                        &clean,
                        frame_for(&frames, covariate)?,
                        &training.timestamps,
                    )?,
                ),
                _ => None,
            };
            let model = pipeline::fit_model(
                choice,
                &training,
                covariates.as_ref().map(|c| c.train_rows.as_slice()),
                &config.detector,
            )?;
            let path = out_dir.join(format!(
                "model_{}_{}.json",
                sanitize_filename(&var.name),
                sanitize_filename(&choice.label())
            ));
            io::write_model_json(
                &path,
                &ModelDocument {
                    schema_version: MODEL_SCHEMA_VERSION,
                    variable: var.name.clone(),
                    model,
                },
            )?;
            println!("fitted {} -> {}", choice.label(), path.display());
            wrote += 1;
        }
    }
    if wrote == 0 {
        return Err(Error::InvalidConfig(
            "no models are configured for the selected variables".into(),
        ));
    }
    Ok(())
}

fn cmd_detect(
    config_path: &Path,
    input: &Path,
    model_path: &Path,
    mode: ModeChoice,
    covariate: Option<&str>,
    out: &Path,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let frames = io::load_csv(input, &config.mapping)?;
    let document = io::read_model_json(model_path)?;
    let raw = frame_for(&frames, &document.variable)?;
    let spec = config.sensor_for(&document.variable).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "no sensor limits configured for {:?}",
            document.variable
        ))
    })?;
    let findings = run_rules(raw, spec, &config.detector)?;
    let clean = prep::sanitize_nonpositive(raw)?.frame;
    let covariates = if document.model.kind == ModelKind::RegArima {
        let name = covariate.ok_or_else(|| {
            Error::InvalidConfig("--covariate is required for regression models".into())
        })?;
        Some(pipeline::covariate_data(&clean, frame_for(&frames, name)?, &[])?.all_rows)
    } else {
        None
    };
    let trace = run_detection(
        &clean,
        &document.model,
        mode.to_mode(),
        &findings,
        covariates.as_deref(),
        &config.detector,
    )?;
    io::write_trace_csv(out, &trace)?;
    println!(
        "{} records, {} flagged -> {}",
        trace.records.len(),
        trace.flagged_timestamps().len(),
        out.display()
    );
    Ok(())
}

fn cmd_features(
    config_path: &Path,
    input: &Path,
    out_dir: &Path,
    variable: Option<&str>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let frames = io::load_csv(input, &config.mapping)?;
    std::fs::create_dir_all(out_dir)?;
    let mut wrote = 0usize;
    for var in selected_variables(&config, variable)? {
        if var.feature_methods.is_empty() {
            continue;
        }
        let raw = frame_for(&frames, &var.name)?;
        let clean = prep::sanitize_nonpositive(raw)?.frame;
        let matrix = pipeline::build_feature_matrix(&clean, &var.feature_transforms)?;
        let transform_desc = var
            .feature_transforms
            .iter()
            .map(|t| t.label())
            .collect::<Vec<_>>()
            .join("+");
        for method in &var.feature_methods {
            let scores = match method.knn_variant() {
                None => streamflag_core::features::hdoutliers_detect(&matrix, &config.detector)?,
                Some(variant) => streamflag_core::features::knn_detect(
                    &matrix,
                    config.detector.k_neighbours,
                    variant,
                    &config.detector,
                )?,
            };
            let path = out_dir.join(format!(
                "scores_{}_{}.csv",
                sanitize_filename(&var.name),
                method.label()
            ));
            io::write_scores_csv(&path, &matrix.timestamps, &scores, &transform_desc)?;
            println!(
                "{}: {} of {} rows flagged -> {}",
                method.label(),
                scores.flagged.len(),
                matrix.n_rows(),
                path.display()
            );
            wrote += 1;
        }
    }
    if wrote == 0 {
        return Err(Error::InvalidConfig(
            "no feature detectors are configured for the selected variables".into(),
        ));
    }
    Ok(())
}

fn cmd_evaluate(
    config_path: &Path,
    input: &Path,
    trace_path: &Path,
    variable: &str,
    method: Option<String>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let frames = io::load_csv(input, &config.mapping)?;
    let raw = frame_for(&frames, variable)?;
    let spec = config.sensor_for(variable).ok_or_else(|| {
        Error::InvalidConfig(format!("no sensor limits configured for {variable:?}"))
    })?;
    let findings = run_rules(raw, spec, &config.detector)?;
    let trace = io::read_trace_csv(trace_path)?;
    let report = pipeline::evaluate_trace(&trace, &findings, &raw.labels)?;
    let method = method.unwrap_or_else(|| {
        trace_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into())
    });
    let rows = vec![ReportRow {
        variable: variable.to_string(),
        method,
        report,
    }];
    print!("{}", io::render_report_table(&rows));
    Ok(())
}

fn cmd_inject(
    plan_path: &Path,
    out: &Path,
    seed: Option<u64>,
    name: Option<String>,
) -> Result<()> {
    let text = std::fs::read_to_string(plan_path)?;
    let mut plan: InjectionPlan = serde_json::from_str(&text)?;
    if let Some(seed) = seed {
        plan.seed = seed;
    }
    let base = synth::generate_base(plan.base_kind, &plan.base_params, plan.n, plan.seed)?;
    let mut frame = synth::inject(&base, &plan)?;
    if let Some(name) = name {
        frame.name = name;
    }
    io::write_frame_csv(out, &frame)?;
    println!(
        "{} observations, {} labelled -> {}",
        frame.len(),
        frame.labels.len(),
        out.display()
    );
    Ok(())
}

fn cmd_plot(
    trace_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
    input: Option<&Path>,
    variable: Option<String>,
) -> Result<()> {
    let mut trace = io::read_trace_csv(trace_path)?;
    let labelled: BTreeSet<Timestamp> = match (config_path, input, &variable) {
        (Some(config_path), Some(input), Some(variable)) => {
            let config = RunConfig::load(config_path)?;
            let frames = io::load_csv(input, &config.mapping)?;
            frame_for(&frames, variable)?.labels.keys().copied().collect()
        }
        (None, None, None) => BTreeSet::new(),
        _ => {
            return Err(Error::InvalidConfig(
                "--config, --input, and --variable must be given together".into(),
            ))
        }
    };
    if let Some(variable) = variable {
        trace.variable = variable;
    }
    std::fs::write(out, plot::render_trace_svg(&trace, &labelled)?)?;
    println!("plot -> {}", out.display());
    Ok(())
}

fn cmd_pipeline(config_path: &Path, input: &Path, out_dir: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let outcome = pipeline::run_pipeline(&config, input, out_dir)?;
    print!("{}", io::render_report_table(&outcome.report_rows));
    println!();
    println!(
        "{} files written to {}",
        outcome.written.len(),
        out_dir.display()
    );
    Ok(())
}
