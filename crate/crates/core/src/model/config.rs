//! Task and model configuration: flat `key = value` text files with
//! `#` comments, every field overridable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::CorruptionSide;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Binary link prediction over many drug-drug side-effect relations
    /// plus drug-protein and protein-protein edges.
    Polypharmacy,
    /// Typed drug-drug interaction classification.
    DdiMultirel,
    /// Real-valued drug to cell-line response regression.
    ResponseRegression,
}

impl TaskKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "polypharmacy" => Ok(TaskKind::Polypharmacy),
            "ddi" | "ddi-multirel" => Ok(TaskKind::DdiMultirel),
            "response" | "response-regression" => Ok(TaskKind::ResponseRegression),
            _ => Err(Error::Config(format!("unknown task '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Polypharmacy => "polypharmacy",
            TaskKind::DdiMultirel => "ddi-multirel",
            TaskKind::ResponseRegression => "response-regression",
        }
    }

    pub fn is_regression(self) -> bool {
        self == TaskKind::ResponseRegression
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    /// z_i^T D_e R D_e z_j with shared R and per-relation diagonals.
    Dedicom,
    /// Shared MLP trunk over concat(z_i, z_j) with per-relation heads.
    Mlp,
}

impl DecoderKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dedicom" => Ok(DecoderKind::Dedicom),
            "mlp" => Ok(DecoderKind::Mlp),
            _ => Err(Error::Config(format!("unknown decoder '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Dedicom => "dedicom",
            DecoderKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    /// Variational: sampled latents, KL regularization.
    Vgae,
    /// Deterministic ablation: mean head only, no sampling, no KL.
    Gae,
}

impl ModelMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vgae" => Ok(ModelMode::Vgae),
            "gae" => Ok(ModelMode::Gae),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelMode::Vgae => "vgae",
            ModelMode::Gae => "gae",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub decoder: DecoderKind,
    pub mode: ModelMode,
    pub d_hidden: usize,
    pub d_encoder: usize,
    pub d_latent: usize,
    pub fingerprints: bool,
    pub d_fingerprint: usize,
    pub fp_width: usize,
    pub fp_radius: usize,
    pub mlp_hidden: Vec<usize>,
    pub logstd_clamp: f64,
    /// KL weight per node type; `lambda_default` covers types without
    /// an explicit entry.
    pub lambda: BTreeMap<String, f64>,
    pub lambda_default: f64,
    pub lr: f64,
    pub epochs: usize,
    pub neg_ratio: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    /// Monte-Carlo samples of the reconstruction term per step.
    pub noise_samples: usize,
    pub seed: u64,
    pub freeze_negatives: bool,
    pub corruption: CorruptionSide,
    pub focus_type: Option<String>,
}

impl TrainConfig {
    pub fn for_task(task: TaskKind) -> Self {
        let base = Self {
            task,
            decoder: DecoderKind::Dedicom,
            mode: ModelMode::Vgae,
            d_hidden: 64,
            d_encoder: 32,
            d_latent: 32,
            fingerprints: false,
            d_fingerprint: 32,
            fp_width: 2048,
            fp_radius: 2,
            mlp_hidden: vec![64],
            logstd_clamp: 10.0,
            lambda: BTreeMap::new(),
            lambda_default: 0.9,
            lr: 0.001,
            epochs: 300,
            neg_ratio: 1,
            batch_size: 512,
            eval_every: 10,
            noise_samples: 1,
            seed: 0,
            freeze_negatives: false,
            corruption: CorruptionSide::Tail,
            focus_type: None,
        };
        match task {
            TaskKind::Polypharmacy => base,
            TaskKind::DdiMultirel => Self { decoder: DecoderKind::Mlp, ..base },
            TaskKind::ResponseRegression => Self {
                decoder: DecoderKind::Mlp,
                // Two hidden layers of size 16 with ReLU, linear output.
                mlp_hidden: vec![16, 16],
                lambda_default: 0.001,
                lr: 0.01,
                epochs: 500,
                ..base
            },
        }
    }

    pub fn lambda_for(&self, node_type: &str) -> f64 {
        self.lambda.get(node_type).copied().unwrap_or(self.lambda_default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(Error::Config("lr must be a finite non-negative number".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.lambda_default < 0.0 || self.lambda.values().any(|&l| l < 0.0) {
            return Err(Error::Config("lambda weights must be non-negative".into()));
        }
        if self.neg_ratio == 0 && !self.task.is_regression() {
            return Err(Error::Config("neg_ratio must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.d_hidden == 0 || self.d_encoder == 0 || self.d_latent == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.noise_samples == 0 {
            return Err(Error::Config("noise_samples must be at least 1".into()));
        }
        if self.fingerprints && self.fp_width.count_ones() != 1 {
            return Err(Error::Config("fp_width must be a power of two".into()));
        }
        if self.task.is_regression() && self.decoder != DecoderKind::Mlp {
            return Err(Error::Config("the regression task uses the mlp decoder".into()));
        }
        if self.logstd_clamp <= 0.0 {
            return Err(Error::Config("logstd_clamp must be positive".into()));
        }
        Ok(())
    }

    /// Apply `key = value` settings. Unknown keys are configuration
    /// errors so typos never pass silently.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse().map_err(|_| Error::Config(format!("'{key}': expected integer, got '{v}'")))
        };
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::Config(format!("'{key}': expected number, got '{v}'")))
        };
        let parse_bool = |v: &str| -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("'{key}': expected boolean, got '{v}'"))),
            }
        };
        if let Some(type_name) = key.strip_prefix("lambda.") {
            self.lambda.insert(type_name.to_string(), parse_f64(value)?);
            return Ok(());
        }
        match key {
            "task" => self.task = TaskKind::parse(value)?,
            "decoder" => self.decoder = DecoderKind::parse(value)?,
            "mode" => self.mode = ModelMode::parse(value)?,
            "d_hidden" => self.d_hidden = parse_usize(value)?,
            "d_encoder" => self.d_encoder = parse_usize(value)?,
            "d_latent" => self.d_latent = parse_usize(value)?,
            "fingerprints" => self.fingerprints = parse_bool(value)?,
            "d_fingerprint" => self.d_fingerprint = parse_usize(value)?,
            "fp_width" => self.fp_width = parse_usize(value)?,
            "fp_radius" => self.fp_radius = parse_usize(value)?,
            "mlp_hidden" => {
                let mut dims = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    dims.push(parse_usize(part)?);
                }
                if dims.is_empty() {
                    return Err(Error::Config("mlp_hidden must list at least one size".into()));
                }
                self.mlp_hidden = dims;
            }
            "logstd_clamp" => self.logstd_clamp = parse_f64(value)?,
            "lambda" => self.lambda_default = parse_f64(value)?,
            "lr" => self.lr = parse_f64(value)?,
            "epochs" => self.epochs = parse_usize(value)?,
            "neg_ratio" => self.neg_ratio = parse_usize(value)?,
            "batch_size" => self.batch_size = parse_usize(value)?,
            "eval_every" => self.eval_every = parse_usize(value)?,
            "noise_samples" => self.noise_samples = parse_usize(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("'seed': expected integer, got '{value}'")))?;
            }
            "freeze_negatives" => self.freeze_negatives = parse_bool(value)?,
            "corrupt_head" => {
                self.corruption =
                    if parse_bool(value)? { CorruptionSide::Head } else { CorruptionSide::Tail };
            }
            "focus_type" => self.focus_type = Some(value.to_string()),
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (line_idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{source}:{}: expected 'key = value', got '{line}'",
                    line_idx + 1
                )));
            };
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let task = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .find_map(|l| {
                let (k, v) = l.split_once('=')?;
                (k.trim() == "task").then(|| v.trim().to_string())
            })
            .ok_or_else(|| Error::Config(format!("{}: missing 'task' key", path.display())))?;
        let mut cfg = Self::for_task(TaskKind::parse(&task)?);
        cfg.apply_text(&text, &path.display().to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical echo of every field, itself parseable as a config file.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task = {}", self.task.name());
        let _ = writeln!(out, "decoder = {}", self.decoder.name());
        let _ = writeln!(out, "mode = {}", self.mode.name());
        let _ = writeln!(out, "d_hidden = {}", self.d_hidden);
        let _ = writeln!(out, "d_encoder = {}", self.d_encoder);
        let _ = writeln!(out, "d_latent = {}", self.d_latent);
        let _ = writeln!(out, "fingerprints = {}", self.fingerprints);
        let _ = writeln!(out, "d_fingerprint = {}", self.d_fingerprint);
        let _ = writeln!(out, "fp_width = {}", self.fp_width);
        let _ = writeln!(out, "fp_radius = {}", self.fp_radius);
        let _ = writeln!(
            out,
            "mlp_hidden = {}",
            self.mlp_hidden.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(out, "logstd_clamp = {}", self.logstd_clamp);
        let _ = writeln!(out, "lambda = {}", self.lambda_default);
        for (t, l) in &self.lambda {
            let _ = writeln!(out, "lambda.{t} = {l}");
        }
        let _ = writeln!(out, "lr = {}", self.lr);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "neg_ratio = {}", self.neg_ratio);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "eval_every = {}", self.eval_every);
        let _ = writeln!(out, "noise_samples = {}", self.noise_samples);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "freeze_negatives = {}", self.freeze_negatives);
        let _ = writeln!(out, "corrupt_head = {}", self.corruption == CorruptionSide::Head);
        if let Some(t) = &self.focus_type {
            let _ = writeln!(out, "focus_type = {t}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_defaults_follow_experiment_setups() {
        let poly = TrainConfig::for_task(TaskKind::Polypharmacy);
        assert_eq!(poly.lr, 0.001);
        assert_eq!(poly.epochs, 300);
        assert_eq!(poly.lambda_for("drug"), 0.9);
        assert_eq!(poly.decoder, DecoderKind::Dedicom);

        let resp = TrainConfig::for_task(TaskKind::ResponseRegression);
        assert_eq!(resp.lr, 0.01);
        assert_eq!(resp.epochs, 500);
        assert_eq!(resp.lambda_for("cell"), 0.001);
        assert_eq!(resp.mlp_hidden, vec![16, 16]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
        assert!(cfg.apply("learning_rate", "0.1").is_err());
    }

    #[test]
    fn per_type_lambda_overrides_default() {
        let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
        cfg.apply("lambda", "0.5").unwrap();
        cfg.apply("lambda.protein", "0.25").unwrap();
        assert_eq!(cfg.lambda_for("drug"), 0.5);
        assert_eq!(cfg.lambda_for("protein"), 0.25);
    }

    #[test]
    fn negative_lambda_fails_validation() {
        let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
        cfg.apply("lambda", "-1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = TrainConfig::for_task(TaskKind::DdiMultirel);
        cfg.apply("d_latent", "16").unwrap();
        cfg.apply("lambda.drug", "0.7").unwrap();
        cfg.apply("mode", "gae").unwrap();
        let echo = cfg.echo();
        let mut round = TrainConfig::for_task(TaskKind::DdiMultirel);
        round.apply_text(&echo, "echo").unwrap();
        assert_eq!(round.d_latent, 16);
        assert_eq!(round.lambda_for("drug"), 0.7);
        assert_eq!(round.mode, ModelMode::Gae);
        assert_eq!(round.echo(), echo);
    }

    #[test]
    fn config_text_parses_comments_and_spacing() {
        let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
        cfg.apply_text("# comment\n\n  lr = 0.01\nepochs=5\n", "mem").unwrap();
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.epochs, 5);
    }
}
