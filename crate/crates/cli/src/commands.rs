use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use uisal::eval::{crossval_k, evaluate_dataset, evaluate_uniform};
use uisal::gaze::{fit_calibration, screen_ground_truth, CalibrationModel};
use uisal::model::{
    fit_head, fit_model, gradient_suite, pretrain_scales, ExperimentConfig, ProviderRegistry, TrainHistory,
    SUITE_TOLERANCE,
};
use uisal::toolkit::{synth_screens, write_dataset, Checkpoint, DatasetManifest, SynthConfig};

use crate::service::{self, AppState, ElementValue};
use crate::{Command, NumericFailure, TrainArgs};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthData {
            out,
            seed,
            config,
            screens,
            sessions,
        } => synth_data(&out, seed, config.as_deref(), screens, sessions),
        Command::Calibrate { manifest, out } => calibrate(&manifest.manifest, out.as_deref()),
        Command::GazeToSaliency {
            manifest,
            out,
            heatmaps,
        } => gaze_to_saliency(&manifest.manifest, &out, heatmaps.as_deref()),
        Command::PretrainAe { train, out } => pretrain_ae(&train, &out),
        Command::Train { train, checkpoint, out } => train_model(&train, checkpoint.as_deref(), &out),
        Command::Predict {
            manifest,
            checkpoint,
            out,
        } => predict(&manifest.manifest, &checkpoint, out.as_deref()),
        Command::Evaluate {
            manifest,
            checkpoint,
            uniform: _,
            out,
        } => evaluate(&manifest.manifest, checkpoint.as_deref(), out.as_deref()),
        Command::Crossval { train, folds, out } => crossval(&train, folds, out.as_deref()),
        Command::Gradcheck { seed, seeds, out } => gradcheck(seed, seeds, out.as_deref()),
        Command::Serve { checkpoint, host, port } => serve(&checkpoint, &host, port),
    }
}

/// Pretty JSON plus a trailing newline, to `out` or stdout.
fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_config<T: for<'de> serde::Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            Ok(serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?)
        }
        None => Ok(T::default()),
    }
}

fn experiment_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = read_config(args.config.as_deref())?;
    let cfg = match args.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn load_screens(path: &Path) -> Result<Vec<uisal::features::UiScreen>> {
    let (m, base) = load_manifest(path)?;
    Ok(m.load_screens(&base)?)
}

fn write_metrics(path: Option<&Path>, sections: &[(String, &TrainHistory)]) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut text = String::new();
    for (name, h) in sections {
        text.push_str(&format!("# {name}\n"));
        text.push_str(&h.metrics_log());
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn synth_data(
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
    screens: Option<usize>,
    sessions: Option<usize>,
) -> Result<()> {
    let mut cfg: SynthConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = screens {
        cfg.screens = n;
    }
    if let Some(n) = sessions {
        cfg.sessions_per_screen = n;
    }
    let generated = synth_screens(&cfg)?;
    let manifest = write_dataset(&generated, out)?;
    log::info!("wrote {} screens to {}", manifest.screens.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ScreenCalibration {
    id: String,
    sessions: Vec<CalibrationModel>,
}

#[derive(Serialize)]
struct CalibrationReport {
    screens: Vec<ScreenCalibration>,
}

fn calibrate(manifest: &Path, out: Option<&Path>) -> Result<()> {
    let (m, _) = load_manifest(manifest)?;
    let mut screens = Vec::with_capacity(m.screens.len());
    for s in &m.screens {
        let sessions = s
            .gaze_sessions()
            .iter()
            .map(|g| fit_calibration(&g.calibration_raw, &g.calibration_truth))
            .collect::<uisal::Result<Vec<_>>>()
            .with_context(|| format!("screen {}", s.id))?;
        screens.push(ScreenCalibration {
            id: s.id.clone(),
            sessions,
        });
    }
    write_json(out, &CalibrationReport { screens })
}

/// Image path as seen from `out_dir`: unchanged when the manifest stays in
/// place, absolute otherwise.
fn rebase(image: &str, base: &Path, out_dir: &Path) -> Result<String> {
    let same = fs::canonicalize(base)
        .ok()
        .zip(fs::canonicalize(out_dir).ok())
        .is_some_and(|(a, b)| a == b);
    if same || Path::new(image).is_absolute() {
        return Ok(image.to_owned());
    }
    Ok(std::path::absolute(base.join(image))?.to_string_lossy().into_owned())
}

fn gaze_to_saliency(manifest: &Path, out: &Path, heatmaps: Option<&Path>) -> Result<()> {
    let (mut m, base) = load_manifest(manifest)?;
    let out_dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if let Some(dir) = heatmaps {
        fs::create_dir_all(dir)?;
    }
    let results = uisal::par::map_slice(&m.screens, |s| {
        if s.sessions.is_empty() {
            return Ok(None);
        }
        screen_ground_truth(&s.id, &s.gaze_sessions(), &s.elements, s.width, s.height).map(Some)
    });
    for (s, r) in m.screens.iter_mut().zip(results) {
        let gt = r.with_context(|| format!("screen {}", s.id))?;
        match gt {
            Some(gt) => {
                if let Some(dir) = heatmaps {
                    gt.pixel_map.save_png16(&dir.join(format!("{}.png", s.id)))?;
                }
                if gt.elements.uniform_fallback {
                    log::warn!("screen {}: no gaze density on any element, using uniform", s.id);
                }
                s.gt_element_saliency = Some(gt.elements.vector.values().to_vec());
            }
            None => log::warn!("screen {} has no gaze sessions; ground truth left as is", s.id),
        }
        s.image = rebase(&s.image, &base, out_dir)?;
    }
    m.validate()?;
    m.save(out)?;
    Ok(())
}

fn pretrain_ae(args: &TrainArgs, out: &Path) -> Result<()> {
    let cfg = experiment_config(args)?;
    let screens = load_screens(&args.manifest.manifest)?;
    let (encoders, histories) = pretrain_scales(&screens, &cfg.autoencoder, cfg.max_crops_per_scale)?;
    Checkpoint::from_autoencoders(&encoders, cfg.autoencoder.seed, Some(cfg)).save(out)?;
    let sections: Vec<(String, &TrainHistory)> = histories
        .iter()
        .enumerate()
        .map(|(i, h)| (format!("ae{i}"), h))
        .collect();
    write_metrics(args.metrics.as_deref(), &sections)
}

fn train_model(args: &TrainArgs, pretrained: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = experiment_config(args)?;
    let screens = load_screens(&args.manifest.manifest)?;
    let registry = ProviderRegistry::new();
    let (model, sections) = match pretrained {
        Some(p) => {
            let encoders = Checkpoint::load(p)
                .and_then(|c| c.autoencoders())
                .with_context(|| format!("loading {}", p.display()))?;
            let (model, head) = fit_head(encoders, &screens, &cfg, &registry)?;
            (model, vec![("head".to_string(), head)])
        }
        None => {
            let (model, h) = fit_model(&screens, &cfg, &registry)?;
            let mut sections: Vec<(String, TrainHistory)> = h
                .autoencoders
                .into_iter()
                .enumerate()
                .map(|(i, a)| (format!("ae{i}"), a))
                .collect();
            sections.push(("head".to_string(), h.head));
            (model, sections)
        }
    };
    let seed = cfg.head.seed;
    Checkpoint::from_model(&model, seed, Some(cfg))?.save(out)?;
    let refs: Vec<(String, &TrainHistory)> = sections.iter().map(|(n, h)| (n.clone(), h)).collect();
    write_metrics(args.metrics.as_deref(), &refs)
}

fn load_state(path: &Path) -> Result<AppState> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    AppState::from_checkpoint_bytes(&bytes, ProviderRegistry::new())
        .with_context(|| format!("loading checkpoint {}", path.display()))
}

#[derive(Serialize)]
struct ScreenPrediction {
    id: String,
    saliency: Vec<ElementValue>,
}

#[derive(Serialize)]
struct PredictionReport {
    model_version: String,
    screens: Vec<ScreenPrediction>,
}

fn predict(manifest: &Path, checkpoint: &Path, out: Option<&Path>) -> Result<()> {
    let state = load_state(checkpoint)?;
    let screens = load_screens(manifest)?;
    let mut report = PredictionReport {
        model_version: state.model_version.clone(),
        screens: Vec::with_capacity(screens.len()),
    };
    for s in &screens {
        let pred = state
            .model
            .predict_ui(s, &state.registry)
            .with_context(|| format!("screen {}", s.id))?;
        report.screens.push(ScreenPrediction {
            id: s.id.clone(),
            saliency: s
                .elements
                .iter()
                .zip(pred.values())
                .map(|(e, &value)| ElementValue { id: e.id, value })
                .collect(),
        });
    }
    write_json(out, &report)
}

fn evaluate(manifest: &Path, checkpoint: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let screens = load_screens(manifest)?;
    let report = match checkpoint {
        Some(c) => {
            let state = load_state(c)?;
            evaluate_dataset(&state.model, &screens, &state.registry)?
        }
        None => evaluate_uniform(&screens)?,
    };
    write_json(out, &report)
}

fn crossval(args: &TrainArgs, folds: usize, out: Option<&Path>) -> Result<()> {
    let cfg = experiment_config(args)?;
    let screens = load_screens(&args.manifest.manifest)?;
    let seed = args.seed.unwrap_or(cfg.head.seed);
    let report = crossval_k(&screens, &cfg, seed, folds, &ProviderRegistry::new())?;
    if let Some(path) = args.metrics.as_deref() {
        let sections: Vec<(String, &TrainHistory)> = report
            .folds
            .iter()
            .map(|f| (format!("fold{} head", f.fold), &f.history.head))
            .collect();
        write_metrics(Some(path), &sections)?;
    }
    write_json(out, &report)
}

fn gradcheck(first: u64, count: u64, out: Option<&Path>) -> Result<()> {
    let results = gradient_suite(first..first + count);
    let failed: Vec<_> = results.iter().filter(|r| !r.passed()).collect();
    match out {
        Some(p) => write_json(Some(p), &results)?,
        None => {
            for r in &results {
                println!("{:<12} seed {:>3}  max rel err {:.3e}", r.case, r.seed, r.max_rel_err);
            }
        }
    }
    if let Some(worst) = failed.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err)) {
        return Err(NumericFailure(format!(
            "{} of {} checks at or above {SUITE_TOLERANCE:e}; worst {} seed {} at {:.3e}",
            failed.len(),
            results.len(),
            worst.case,
            worst.seed,
            worst.max_rel_err
        ))
        .into());
    }
    Ok(())
}

fn serve(checkpoint: &Path, host: &str, port: u16) -> Result<()> {
    let state = load_state(checkpoint)?;
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(service::serve(state, host, port))
}
