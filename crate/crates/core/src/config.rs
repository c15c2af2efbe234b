//! Flat `key=value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::active::{ClassifierMode, Strategy};
use crate::error::{Error, Result};
use crate::nets::{NetConfig, OptimizerConfig};
use crate::optim::OptimizerKind;

/// Environment variable that overrides `seed`.
pub const SEED_ENV: &str = "BGADL_SEED";

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        n_per_class: usize,
        classes: usize,
        dim: usize,
        spread: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Container(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub dataset: DatasetSource,
    pub n_init_labeled: usize,
    pub n_test: usize,
    pub stratified: bool,
    pub iterations: usize,
    pub k_per_iteration: usize,
    pub pool_subsample: usize,
    pub mc_passes: usize,
    pub gamma: f64,
    pub prior_weight: f64,
    pub recon_weight: f64,
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub classifier_hidden: Vec<usize>,
    pub encoder_hidden: usize,
    pub generator_hidden: usize,
    pub discriminator_hidden: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub classifier_epochs: usize,
    pub classifier_mode: ClassifierMode,
    pub gen_steps_per_iteration: usize,
    pub gen_replay: usize,
    pub bda_full_multiplier: usize,
    pub lr_classifier: f64,
    pub momentum: f64,
    pub lr_generative: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub early_stop: bool,
    pub early_stop_window: usize,
    pub early_stop_min_delta: f64,
    pub workers: usize,
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategy: Strategy::AlVaeAcgan,
            seed: 0,
            dataset: DatasetSource::Synthetic {
                n_per_class: 1000,
                classes: 4,
                dim: 16,
                spread: 0.15,
            },
            n_init_labeled: 200,
            n_test: 1000,
            stratified: true,
            iterations: 20,
            k_per_iteration: 50,
            pool_subsample: 1000,
            mc_passes: 25,
            gamma: 0.75,
            prior_weight: 1.0,
            recon_weight: 1.0,
            latent_dim: 32,
            embed_dim: 16,
            classifier_hidden: vec![256, 256],
            encoder_hidden: 256,
            generator_hidden: 256,
            discriminator_hidden: 256,
            dropout_rate: 0.5,
            batch_size: 100,
            pretrain_epochs: 50,
            classifier_epochs: 2,
            classifier_mode: ClassifierMode::Continue,
            gen_steps_per_iteration: 1,
            gen_replay: 256,
            bda_full_multiplier: 10,
            lr_classifier: 0.01,
            momentum: 0.9,
            lr_generative: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop: false,
            early_stop_window: 5,
            early_stop_min_delta: 0.001,
            workers: 1,
            record_wall_time: false,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        msg: format!("invalid value {value:?} for {key}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config {
            line,
            msg: format!("invalid boolean {value:?} for {key}"),
        }),
    }
}

/// Raw dataset keys, resolved into a [`DatasetSource`] once the whole file is read.
#[derive(Default)]
struct DatasetKeys {
    kind: Option<(usize, String)>,
    idx_images: Option<PathBuf>,
    idx_labels: Option<PathBuf>,
    container: Option<PathBuf>,
    n_per_class: Option<usize>,
    classes: Option<usize>,
    dim: Option<usize>,
    spread: Option<f64>,
}

impl ExperimentConfig {
    /// Parses config text. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut ds = DatasetKeys::default();
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected key=value, got {content:?}"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "strategy" => cfg.strategy = parse(line, key, v)?,
                "seed" => cfg.seed = parse(line, key, v)?,
                "dataset" => ds.kind = Some((line, v.to_string())),
                "idx_images" => ds.idx_images = Some(path(v)),
                "idx_labels" => ds.idx_labels = Some(path(v)),
                "container" => ds.container = Some(path(v)),
                "synth_n_per_class" => ds.n_per_class = Some(parse(line, key, v)?),
                "synth_classes" => ds.classes = Some(parse(line, key, v)?),
                "synth_dim" => ds.dim = Some(parse(line, key, v)?),
                "synth_spread" => ds.spread = Some(parse(line, key, v)?),
                "n_init_labeled" => cfg.n_init_labeled = parse(line, key, v)?,
                "n_test" => cfg.n_test = parse(line, key, v)?,
                "stratified" => cfg.stratified = parse_bool(line, key, v)?,
                "iterations" => cfg.iterations = parse(line, key, v)?,
                "k_per_iteration" => cfg.k_per_iteration = parse(line, key, v)?,
                "pool_subsample" => cfg.pool_subsample = parse(line, key, v)?,
                "mc_passes" => cfg.mc_passes = parse(line, key, v)?,
                "gamma" => cfg.gamma = parse(line, key, v)?,
                "prior_weight" => cfg.prior_weight = parse(line, key, v)?,
                "recon_weight" => cfg.recon_weight = parse(line, key, v)?,
                "latent_dim" => cfg.latent_dim = parse(line, key, v)?,
                "embed_dim" => cfg.embed_dim = parse(line, key, v)?,
                "classifier_hidden" => {
                    cfg.classifier_hidden = v
                        .split(',')
                        .map(|s| parse(line, key, s.trim()))
                        .collect::<Result<_>>()?
                }
                "encoder_hidden" => cfg.encoder_hidden = parse(line, key, v)?,
                "generator_hidden" => cfg.generator_hidden = parse(line, key, v)?,
                "discriminator_hidden" => cfg.discriminator_hidden = parse(line, key, v)?,
                "dropout_rate" => cfg.dropout_rate = parse(line, key, v)?,
                "batch_size" => cfg.batch_size = parse(line, key, v)?,
                "pretrain_epochs" => cfg.pretrain_epochs = parse(line, key, v)?,
                "classifier_epochs" => cfg.classifier_epochs = parse(line, key, v)?,
                "classifier_mode" => cfg.classifier_mode = parse(line, key, v)?,
                "gen_steps_per_iteration" => cfg.gen_steps_per_iteration = parse(line, key, v)?,
                "gen_replay" => cfg.gen_replay = parse(line, key, v)?,
                "bda_full_multiplier" => cfg.bda_full_multiplier = parse(line, key, v)?,
                "lr_classifier" => cfg.lr_classifier = parse(line, key, v)?,
                "momentum" => cfg.momentum = parse(line, key, v)?,
                "lr_generative" => cfg.lr_generative = parse(line, key, v)?,
                "adam_beta1" => cfg.adam_beta1 = parse(line, key, v)?,
                "adam_beta2" => cfg.adam_beta2 = parse(line, key, v)?,
                "adam_eps" => cfg.adam_eps = parse(line, key, v)?,
                "early_stop" => cfg.early_stop = parse_bool(line, key, v)?,
                "early_stop_window" => cfg.early_stop_window = parse(line, key, v)?,
                "early_stop_min_delta" => cfg.early_stop_min_delta = parse(line, key, v)?,
                "workers" => cfg.workers = parse(line, key, v)?,
                "record_wall_time" => cfg.record_wall_time = parse_bool(line, key, v)?,
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        cfg.dataset = ds.resolve(cfg.dataset)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        ExperimentConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Applies `BGADL_SEED` when it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let positive = [
            ("n_init_labeled", self.n_init_labeled),
            ("n_test", self.n_test),
            ("k_per_iteration", self.k_per_iteration),
            ("pool_subsample", self.pool_subsample),
            ("mc_passes", self.mc_passes),
            ("latent_dim", self.latent_dim),
            ("embed_dim", self.embed_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("generator_hidden", self.generator_hidden),
            ("discriminator_hidden", self.discriminator_hidden),
            ("batch_size", self.batch_size),
            ("early_stop_window", self.early_stop_window),
            ("workers", self.workers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.classifier_hidden.contains(&0) {
            return bad("classifier_hidden widths must be positive".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be >= 0", self.gamma));
        }
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return bad(format!("prior_weight {} must be >= 0", self.prior_weight));
        }
        if !(self.recon_weight > 0.0 && self.recon_weight.is_finite()) {
            return bad(format!("recon_weight {} must be > 0", self.recon_weight));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate));
        }
        for (name, v) in [
            ("lr_classifier", self.lr_classifier),
            ("momentum", self.momentum),
            ("lr_generative", self.lr_generative),
            ("adam_eps", self.adam_eps),
            ("early_stop_min_delta", self.early_stop_min_delta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be finite and >= 0"));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} {v} must lie in [0, 1)"));
            }
        }
        if let DatasetSource::Synthetic {
            n_per_class,
            classes,
            dim,
            spread,
        } = self.dataset
        {
            if n_per_class == 0 || classes < 2 || dim < 2 || !(spread >= 0.0 && spread.is_finite()) {
                return bad("synthetic dataset needs n_per_class >= 1, classes >= 2, dim >= 2, spread >= 0".into());
            }
        }
        Ok(())
    }

    pub fn net_config(&self, input_dim: usize, classes: usize) -> NetConfig {
        NetConfig {
            input_dim,
            classes,
            classifier_hidden: self.classifier_hidden.clone(),
            dropout_rate: self.dropout_rate,
            encoder_hidden: self.encoder_hidden,
            latent_dim: self.latent_dim,
            embed_dim: self.embed_dim,
            generator_hidden: self.generator_hidden,
            discriminator_hidden: self.discriminator_hidden,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            classifier: OptimizerKind::SgdMomentum {
                lr: self.lr_classifier,
                momentum: self.momentum,
            },
            generative: OptimizerKind::Adam {
                lr: self.lr_generative,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
        }
    }

    /// Canonical `key=value` text; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("strategy", self.strategy.to_string());
        kv("seed", self.seed.to_string());
        match &self.dataset {
            DatasetSource::Synthetic {
                n_per_class,
                classes,
                dim,
                spread,
            } => {
                kv("dataset", "synthetic".into());
                kv("synth_n_per_class", n_per_class.to_string());
                kv("synth_classes", classes.to_string());
                kv("synth_dim", dim.to_string());
                kv("synth_spread", spread.to_string());
            }
            DatasetSource::Idx { images, labels } => {
                kv("dataset", "idx".into());
                kv("idx_images", images.display().to_string());
                kv("idx_labels", labels.display().to_string());
            }
            DatasetSource::Container(p) => {
                kv("dataset", "container".into());
                kv("container", p.display().to_string());
            }
        }
        kv("n_init_labeled", self.n_init_labeled.to_string());
        kv("n_test", self.n_test.to_string());
        kv("stratified", self.stratified.to_string());
        kv("iterations", self.iterations.to_string());
        kv("k_per_iteration", self.k_per_iteration.to_string());
        kv("pool_subsample", self.pool_subsample.to_string());
        kv("mc_passes", self.mc_passes.to_string());
        kv("gamma", self.gamma.to_string());
        kv("prior_weight", self.prior_weight.to_string());
        kv("recon_weight", self.recon_weight.to_string());
        kv("latent_dim", self.latent_dim.to_string());
        kv("embed_dim", self.embed_dim.to_string());
        let hidden: Vec<String> = self.classifier_hidden.iter().map(usize::to_string).collect();
        kv("classifier_hidden", hidden.join(","));
        kv("encoder_hidden", self.encoder_hidden.to_string());
        kv("generator_hidden", self.generator_hidden.to_string());
        kv("discriminator_hidden", self.discriminator_hidden.to_string());
        kv("dropout_rate", self.dropout_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("pretrain_epochs", self.pretrain_epochs.to_string());
        kv("classifier_epochs", self.classifier_epochs.to_string());
        kv("classifier_mode", self.classifier_mode.to_string());
        kv("gen_steps_per_iteration", self.gen_steps_per_iteration.to_string());
        kv("gen_replay", self.gen_replay.to_string());
        kv("bda_full_multiplier", self.bda_full_multiplier.to_string());
        kv("lr_classifier", self.lr_classifier.to_string());
        kv("momentum", self.momentum.to_string());
        kv("lr_generative", self.lr_generative.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("early_stop", self.early_stop.to_string());
        kv("early_stop_window", self.early_stop_window.to_string());
        kv("early_stop_min_delta", self.early_stop_min_delta.to_string());
        kv("workers", self.workers.to_string());
        kv("record_wall_time", self.record_wall_time.to_string());
        s
    }
}

impl DatasetKeys {
    fn resolve(self, default: DatasetSource) -> Result<DatasetSource> {
        let (line, kind) = match self.kind {
            Some(k) => k,
            None if self.idx_images.is_some() || self.idx_labels.is_some() => (0, "idx".into()),
            None if self.container.is_some() => (0, "container".into()),
            None => (0, "synthetic".into()),
        };
        let missing = |what: &str| Error::Config {
            line,
            msg: format!("dataset={kind} needs {what}"),
        };
        match kind.as_str() {
            "synthetic" => {
                let DatasetSource::Synthetic {
                    n_per_class,
                    classes,
                    dim,
                    spread,
                } = default
                else {
                    unreachable!("default dataset is synthetic")
                };
                Ok(DatasetSource::Synthetic {
                    n_per_class: self.n_per_class.unwrap_or(n_per_class),
                    classes: self.classes.unwrap_or(classes),
                    dim: self.dim.unwrap_or(dim),
                    spread: self.spread.unwrap_or(spread),
                })
            }
            "idx" => Ok(DatasetSource::Idx {
                images: self.idx_images.ok_or_else(|| missing("idx_images"))?,
                labels: self.idx_labels.ok_or_else(|| missing("idx_labels"))?,
            }),
            "container" => Ok(DatasetSource::Container(
                self.container.ok_or_else(|| missing("container"))?,
            )),
            other => Err(Error::Config {
                line,
                msg: format!("unknown dataset kind {other:?} (synthetic, idx, container)"),
            }),
        }
    }
}
