//! The end-to-end workflow behind the command-line subcommands:
//! `synth → train → detect → eval`, driven by a flat `key = value` config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{
    init_model, load_model, reconstruction_errors, save_model, train_epochs, AutoencoderConfig,
    TrainConfig,
};
use crate::data::{
    align_and_fill, chronological_split, compute_channel_stats, make_windows, parse_series_csv,
    remove_fault_neighborhoods, standardize, AlignedFrame,
};
use crate::detect::{
    anomalies_to_csv, compute_threshold, events_to_csv, flag_anomalies,
    merge_consecutive_anomalies, parse_anomaly_csv, score_detections, AnomalyEvent,
    DetectorThreshold, EvalReport, ScoringConfig, ScoringMode,
};
use crate::error::{Error, Result};
use crate::ground_truth::{
    detect_current_drops, faults_to_csv, merge_event_lists, parse_fault_events, FaultEvent,
};
use crate::io::{read_text, write_atomic};
use crate::synth::{generate_run, SynthConfig};

/// Every tunable of a run. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub series: Vec<PathBuf>,
    pub faults: Vec<PathBuf>,
    pub current: Option<PathBuf>,
    pub model: PathBuf,
    pub output_dir: PathBuf,
    pub autoencoder: AutoencoderConfig,
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub margin: i64,
    pub stride: usize,
    pub lead_window: i64,
    pub scoring_mode: ScoringMode,
    pub threshold_multiplier: f64,
    pub current_threshold: f64,
    pub merge_max_gap: Option<i64>,
    pub coalesce_gap: i64,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn with_base_dir(base_dir: impl Into<PathBuf>) -> Self {
        let base_dir = base_dir.into();
        let at = |p: &str| base_dir.join(p);
        RunConfig {
            series: vec![at("wiresum.csv"), at("xpos.csv"), at("ypos.csv")],
            faults: vec![at("faults.csv")],
            current: Some(at("current.csv")),
            model: at("model.json"),
            output_dir: at("out"),
            autoencoder: AutoencoderConfig::default(),
            train: TrainConfig::default(),
            train_fraction: 0.5,
            margin: 10,
            stride: 1,
            lead_window: 10,
            scoring_mode: ScoringMode::LeadPlusDuration,
            threshold_multiplier: 3.0,
            current_threshold: 45.0,
            merge_max_gap: None,
            coalesce_gap: 0,
            synth: SynthConfig::default(),
            base_dir,
        }
    }

    /// Reads a config file, then applies `key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = RunConfig::with_base_dir(base);
        cfg.apply_text(&text).map_err(|e| e.in_file(path))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override {o:?} is not key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::config(format!("invalid value {v:?} for {key}")))
        }
        let path = |v: &str| self.base_dir.join(v);
        let paths = |v: &str| -> Vec<PathBuf> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| self.base_dir.join(s))
                .collect()
        };
        match key {
            "series" => self.series = paths(value),
            "faults" => self.faults = paths(value),
            "current" => {
                self.current = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(path(value))
                }
            }
            "model" => self.model = path(value),
            "output_dir" => self.output_dir = path(value),
            "window" => self.autoencoder.window_k = num(key, value)?,
            "hidden" => self.autoencoder.hidden_dim = num(key, value)?,
            "dropout" => self.autoencoder.dropout_rate = num(key, value)?,
            "seed" => self.autoencoder.seed = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "shuffle_seed" => self.train.shuffle_seed = num(key, value)?,
            "learning_rate" => self.train.adam.learning_rate = num(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "lead_window" => self.lead_window = num(key, value)?,
            "scoring_mode" => self.scoring_mode = value.parse()?,
            "threshold_multiplier" => self.threshold_multiplier = num(key, value)?,
            "current_threshold" => self.current_threshold = num(key, value)?,
            "merge_max_gap" => {
                self.merge_max_gap = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "coalesce_gap" => self.coalesce_gap = num(key, value)?,
            "synth_duration" => self.synth.duration = num(key, value)?,
            "synth_seed" => self.synth.seed = num(key, value)?,
            "synth_faults" => self.synth.n_faults = num(key, value)?,
            "synth_start_epoch" => self.synth.start_epoch = num(key, value)?,
            "synth_plateau" => self.synth.current_plateau = num(key, value)?,
            "synth_fault_min" => self.synth.fault_duration_min = num(key, value)?,
            "synth_fault_max" => self.synth.fault_duration_max = num(key, value)?,
            "synth_precursor_lead" => self.synth.precursor_lead = num(key, value)?,
            "synth_precursor_step" => self.synth.precursor_step = num(key, value)?,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::config("no series files configured"));
        }
        if self.margin < 0 || self.lead_window < 0 || self.coalesce_gap < 0 {
            return Err(Error::config(
                "margin, lead_window and coalesce_gap must be >= 0",
            ));
        }
        if self.stride == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        Ok(())
    }

    pub fn train_report_path(&self) -> PathBuf {
        self.output_dir.join("train_report.json")
    }

    pub fn anomalies_path(&self) -> PathBuf {
        self.output_dir.join("anomalies.csv")
    }

    pub fn events_path(&self) -> PathBuf {
        self.output_dir.join("events.csv")
    }

    pub fn eval_report_path(&self) -> PathBuf {
        self.output_dir.join("eval_report.json")
    }
}

fn channel_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_frame(cfg: &RunConfig) -> Result<AlignedFrame> {
    let series = cfg
        .series
        .iter()
        .map(|p| parse_series_csv(&channel_name(p), &read_text(p)?).map_err(|e| e.in_file(p)))
        .collect::<Result<Vec<_>>>()?;
    align_and_fill(&series)
}

/// Recorded faults from every fault file plus beam-current drops, merged.
fn load_ground_truth(cfg: &RunConfig) -> Result<Vec<FaultEvent>> {
    let mut lists = Vec::new();
    for p in &cfg.faults {
        lists.push(parse_fault_events(&read_text(p)?).map_err(|e| e.in_file(p))?);
    }
    if let Some(p) = &cfg.current {
        let raw = parse_series_csv("current", &read_text(p)?).map_err(|e| e.in_file(p))?;
        let aligned = align_and_fill(&[raw]).map_err(|e| e.in_file(p))?;
        let drops = detect_current_drops(&aligned.channel_series(0), cfg.current_threshold)
            .map_err(|e| e.in_file(p))?;
        lists.push(drops);
    }
    let refs: Vec<&[FaultEvent]> = lists.iter().map(Vec::as_slice).collect();
    Ok(merge_event_lists(&refs, cfg.coalesce_gap))
}

/// Writes the synthetic series, beam current and recorded fault file to
/// the configured paths.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    if cfg.series.len() != 3 {
        return Err(Error::config(
            "synth needs exactly three series paths (wiresum, x, y)",
        ));
    }
    let mut synth = cfg.synth.clone();
    for (slot, p) in synth.channel_names.iter_mut().zip(&cfg.series) {
        *slot = channel_name(p);
    }
    let run = generate_run(&synth)?;
    let current_path = cfg
        .current
        .as_ref()
        .ok_or_else(|| Error::config("synth needs a current path"))?;
    let fault_path = cfg
        .faults
        .first()
        .ok_or_else(|| Error::config("synth needs a fault file path"))?;
    for (i, p) in cfg.series.iter().enumerate() {
        write_atomic(p, run.frame.channel_series(i).to_csv().as_bytes())?;
    }
    write_atomic(current_path, run.current.to_csv().as_bytes())?;
    write_atomic(fault_path, faults_to_csv(&run.truth).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub channels: Vec<String>,
    pub train_rows: usize,
    pub train_rows_kept: usize,
    pub faults_excised: usize,
    pub windows: usize,
    pub loss_history: Vec<f64>,
    pub threshold: DetectorThreshold,
    pub max_training_error: f64,
    /// `threshold / max_training_error`.
    pub threshold_ratio: f64,
    pub flagged_training_fraction: f64,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "channels                {}", self.channels.join(","));
        let _ = writeln!(s, "train_rows              {}", self.train_rows);
        let _ = writeln!(s, "train_rows_kept         {}", self.train_rows_kept);
        let _ = writeln!(s, "faults_excised          {}", self.faults_excised);
        let _ = writeln!(s, "windows                 {}", self.windows);
        let _ = writeln!(s, "epochs                  {}", self.loss_history.len());
        if let (Some(first), Some(last)) = (self.loss_history.first(), self.loss_history.last()) {
            let _ = writeln!(s, "loss_first              {first:.6}");
            let _ = writeln!(s, "loss_last               {last:.6}");
        }
        let _ = writeln!(s, "threshold               {:.6}", self.threshold.value);
        let _ = writeln!(s, "max_training_error      {:.6}", self.max_training_error);
        let _ = writeln!(s, "threshold_ratio         {:.4}", self.threshold_ratio);
        let _ = writeln!(
            s,
            "flagged_training_frac   {:.5}",
            self.flagged_training_fraction
        );
        s
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    cfg.check()?;
    let frame = load_frame(cfg)?;
    let (train, _) = chronological_split(&frame, cfg.train_fraction)?;
    let truth = load_ground_truth(cfg)?;
    let clean = remove_fault_neighborhoods(&train, &truth, cfg.margin)?;
    let stats = compute_channel_stats(&clean)?;
    let windows = make_windows(
        &standardize(&clean, &stats)?,
        cfg.autoencoder.window_k,
        cfg.stride,
    )?;

    let mut ae = cfg.autoencoder;
    ae.feature_m = frame.channel_count();
    let mut model = init_model(&ae)?;
    model.channel_stats = stats;
    let loss_history = train_epochs(&mut model, &windows.windows, &cfg.train)?;

    let errors = reconstruction_errors(&model, &windows.windows)?;
    let threshold = compute_threshold(&errors, cfg.threshold_multiplier)?;
    let max_err = errors.iter().copied().fold(0.0, f64::max);
    let flagged = errors.iter().filter(|e| **e > threshold.value).count();
    model.threshold = Some(threshold);
    log::info!(
        "threshold {:.6} is {:.1}% of the largest training error",
        threshold.value,
        100.0 * threshold.value / max_err
    );

    let report = TrainReport {
        channels: frame.channels.clone(),
        train_rows: train.row_count(),
        train_rows_kept: clean.row_count(),
        faults_excised: truth.len(),
        windows: windows.windows.len(),
        loss_history,
        threshold,
        max_training_error: max_err,
        threshold_ratio: if max_err > 0.0 {
            threshold.value / max_err
        } else {
            0.0
        },
        flagged_training_fraction: flagged as f64 / errors.len() as f64,
    };
    save_model(&model, &cfg.model)?;
    write_atomic(&cfg.train_report_path(), to_json(&report).as_bytes())?;
    write_atomic(
        &cfg.output_dir.join("train_report.txt"),
        report.to_text().as_bytes(),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSummary {
    pub windows: usize,
    pub anomalies: usize,
    pub events: Option<usize>,
    pub span: (i64, i64),
}

/// Scores the untouched test split. Fault files are never read here.
pub fn cmd_detect(cfg: &RunConfig) -> Result<DetectSummary> {
    cfg.check()?;
    let model = load_model(&cfg.model).map_err(|e| e.in_file(&cfg.model))?;
    let threshold = model.threshold.ok_or_else(|| {
        Error::config(format!(
            "{} has no calibrated threshold",
            cfg.model.display()
        ))
    })?;
    let frame = load_frame(cfg)?;
    let (_, test) = chronological_split(&frame, cfg.train_fraction)?;
    if test.channels != model.channel_stats.names() {
        return Err(Error::config(format!(
            "data channels {:?} do not match model channels {:?}",
            test.channels,
            model.channel_stats.names()
        )));
    }
    let span = (
        test.start_epoch()
            .ok_or_else(|| Error::data("test split is empty"))?,
        test.end_epoch().unwrap_or_default(),
    );
    let windows = make_windows(
        &standardize(&test, &model.channel_stats)?,
        model.config.window_k,
        1,
    )?;
    let errors = reconstruction_errors(&model, &windows.windows)?;
    let points = flag_anomalies(&errors, &windows.end_timestamps, &threshold)?;
    let events = cfg
        .merge_max_gap
        .map(|gap| merge_consecutive_anomalies(&points, gap))
        .transpose()?;
    write_atomic(&cfg.anomalies_path(), anomalies_to_csv(&points).as_bytes())?;
    if let Some(ev) = &events {
        write_atomic(&cfg.events_path(), events_to_csv(ev).as_bytes())?;
    }
    Ok(DetectSummary {
        windows: windows.windows.len(),
        anomalies: points.len(),
        events: events.map(|e| e.len()),
        span,
    })
}

/// Builds the ground truth for the test span and scores the anomaly file.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.check()?;
    let frame = load_frame(cfg)?;
    let (_, test) = chronological_split(&frame, cfg.train_fraction)?;
    let span = match (test.start_epoch(), test.end_epoch()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::data("test split is empty")),
    };
    let truth: Vec<FaultEvent> = load_ground_truth(cfg)?
        .into_iter()
        .filter(|f| f.start >= span.0 && f.start <= span.1)
        .collect();
    let path = cfg.anomalies_path();
    let points = parse_anomaly_csv(&read_text(&path)?).map_err(|e| e.in_file(&path))?;
    let anomalies: Vec<AnomalyEvent> = match cfg.merge_max_gap {
        Some(gap) => merge_consecutive_anomalies(&points, gap).map_err(|e| e.in_file(&path))?,
        None => points.iter().copied().map(Into::into).collect(),
    };
    let scoring = ScoringConfig {
        lead_window: cfg.lead_window,
        mode: cfg.scoring_mode,
    };
    let report = score_detections(&anomalies, &truth, &scoring, span)?;
    write_atomic(&cfg.eval_report_path(), to_json(&report).as_bytes())?;
    write_atomic(
        &cfg.output_dir.join("eval_report.txt"),
        report.to_text().as_bytes(),
    )?;
    Ok(report)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
