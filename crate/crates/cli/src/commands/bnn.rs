use std::fs;
use std::path::{Path, PathBuf};

use fecim::bnn::synthetic::prototype_task;
use fecim::bnn::weights::{build_model, parse_manifest};
use fecim::bnn::{evaluate_accuracy, idx, BnnModel, Dataset, Deployment, SigmaMode};
use serde::Serialize;

use crate::output::{g17, OutputDir};
use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct Summary {
    source: &'static str,
    samples: usize,
    trials: u64,
    sigma_mode: SigmaMode,
    input_threshold: Option<f64>,
    reference_accuracy: f64,
    mean_accuracy: Vec<(f64, f64)>,
}

fn load(path: &Path, mode: Option<SigmaMode>) -> Result<(BnnModel, SigmaMode), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut manifest =
        parse_manifest(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if let Some(m) = mode {
        manifest.sigma_mode = m;
    }
    let dir = path.parent().unwrap_or(Path::new(""));
    let model = build_model(&manifest, |r| Ok(fs::read(dir.join(r))?))?;
    Ok((model, manifest.sigma_mode))
}

pub fn bnn(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let b = &cfg.bnn;
    let trials = cfg.trials.unwrap_or(b.trials);
    if trials == 0 {
        return Err(CliError::Config("bnn needs at least one trial".into()));
    }
    let (model, mut data, sigma_mode, source) = match (&b.model, &b.images, &b.labels) {
        (Some(m), Some(i), Some(l)) => {
            let (model, mode) = load(m, b.sigma_mode)?;
            let images = idx::read_images(i)?;
            let labels = idx::read_labels(l)?;
            let (data, _) = idx::to_dataset(&images, &labels, model.input)?;
            (model, data, mode, "weight-file")
        }
        _ => {
            let (model, data) = prototype_task(cfg.seed, &b.synthetic)?;
            (model, data, b.sigma_mode.unwrap_or_default(), "synthetic")
        }
    };
    if let Some(k) = b.max_samples {
        data.truncate(k);
    }
    check_dataset(&model, &data)?;

    let (deployment, audit) = Deployment::program(&model, cfg.macro_config())?;
    if audit.forbidden > 0 {
        return Err(CliError::Disturb(format!(
            "{} pulses in the forbidden band",
            audit.forbidden
        )));
    }
    let base = cfg.spec();
    let table = evaluate_accuracy(&model, &deployment, &data, &base, &b.sigma_c_grid, trials)?;

    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                g17(r.sigma_c),
                r.seed.to_string(),
                r.trial.to_string(),
                g17(r.accuracy),
            ]
        })
        .collect();
    let summary_rows: Vec<Vec<String>> = table
        .summary
        .iter()
        .map(|s| {
            vec![
                g17(s.sigma_c),
                g17(s.mean),
                g17(s.std),
                g17(s.min),
                g17(s.max),
                s.trials.to_string(),
                g17(100.0 * (table.reference_accuracy - s.mean)),
            ]
        })
        .collect();
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.csv(
        "bnn_accuracy.csv",
        &["sigma_c", "seed", "trial", "accuracy"],
        &rows,
    )?;
    out.csv(
        "bnn_summary.csv",
        &[
            "sigma_c",
            "mean",
            "std",
            "min",
            "max",
            "trials",
            "drop_points",
        ],
        &summary_rows,
    )?;
    out.finish(
        "bnn",
        cfg,
        Summary {
            source,
            samples: data.len(),
            trials,
            sigma_mode,
            input_threshold: model.input.map(|i| i.threshold),
            reference_accuracy: table.reference_accuracy,
            mean_accuracy: table.summary.iter().map(|s| (s.sigma_c, s.mean)).collect(),
        },
    )
}

fn check_dataset(model: &BnnModel, data: &Dataset) -> Result<(), CliError> {
    if data.is_empty() {
        return Err(CliError::Config("dataset is empty".into()));
    }
    if let Some(x) = data.inputs.iter().find(|x| x.len() != model.input_len()) {
        return Err(CliError::Config(format!(
            "dataset samples have {} inputs, model expects {}",
            x.len(),
            model.input_len()
        )));
    }
    if let Some(l) = data.labels.iter().find(|&&l| l >= model.classes()) {
        return Err(CliError::Config(format!(
            "label {l} exceeds the model's {} classes",
            model.classes()
        )));
    }
    Ok(())
}
