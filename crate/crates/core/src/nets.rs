//! The four networks: dropout MLP classifier, Gaussian encoder,
//! class-conditional generator and discriminator.
//!
//! Each network keeps its parameters as plain tensors. Training binds them
//! to a [`Tape`] in the fixed order returned by [`ParamGroup::params`];
//! inference runs a tape-free path that produces identical numbers.

use crate::dropout::{self, DropoutMode, DropoutSpec};
use crate::error::{Error, Result};
use crate::optim::{OptimizerKind, OptimizerState};
use crate::rng::{RngStream, StreamKey};
use crate::tape::{sigmoid, Tape, Var};
use crate::tensor::{gemm, softmax_rows, Tensor};

/// Probability clamp applied before any log of a discriminator output.
pub const PROB_CLAMP: f64 = 1e-7;

pub trait ParamGroup {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.param(p.clone())).collect()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `inputs x outputs`.
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Uniform init in `+-1/sqrt(inputs)` for weights and biases.
    pub fn init(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| (2.0 * rng.uniform() - 1.0) * bound).collect() };
        Linear {
            weight: Tensor::from_parts(vec![inputs, outputs], draw(inputs * outputs)),
            bias: Tensor::from_parts(vec![outputs], draw(outputs)),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    /// `x W + b` on raw row-major data with `rows` rows.
    fn apply(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (k, n) = (self.inputs(), self.outputs());
        let mut out = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            out.extend_from_slice(self.bias.data());
        }
        gemm(rows, k, n, 1.0, x, false, self.weight.data(), false, 1.0, &mut out);
        out
    }
}

fn check_input(op: &'static str, x: &Tensor, dim: usize) -> Result<()> {
    if x.shape().len() != 2 || x.cols() != dim {
        return Err(Error::shape(
            op,
            format!("expected [batch, {dim}], got {:?}", x.shape()),
        ));
    }
    Ok(())
}

fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
}

/// Architecture sizes shared by the four networks.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub classes: usize,
    pub classifier_hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub generator_hidden: usize,
    pub discriminator_hidden: usize,
}

impl NetConfig {
    /// `d -> 256 -> 256 -> C` classifier with dropout 0.5; 256-wide
    /// encoder, generator and discriminator; latent 32, class embedding 16.
    pub fn desk_default(input_dim: usize, classes: usize) -> Self {
        NetConfig {
            input_dim,
            classes,
            classifier_hidden: vec![256, 256],
            dropout_rate: 0.5,
            encoder_hidden: 256,
            latent_dim: 32,
            embed_dim: 16,
            generator_hidden: 256,
            discriminator_hidden: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 {
            return Err(Error::InvalidArgument(
                "need input_dim >= 1 and at least 2 classes".into(),
            ));
        }
        if self.classifier_hidden.is_empty() || self.classifier_hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "classifier needs at least one non-empty hidden (dropout) layer".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        for (name, v) in [
            ("encoder_hidden", self.encoder_hidden),
            ("latent_dim", self.latent_dim),
            ("embed_dim", self.embed_dim),
            ("generator_hidden", self.generator_hidden),
            ("discriminator_hidden", self.discriminator_hidden),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Monte Carlo dropout predictions: `passes x classes` softmax rows.
#[derive(Clone, Debug, PartialEq)]
pub struct McSamples {
    probs: Vec<f64>,
    passes: usize,
    classes: usize,
}

impl McSamples {
    pub fn new(probs: Vec<f64>, passes: usize, classes: usize) -> Result<Self> {
        if passes == 0 || classes == 0 || probs.len() != passes * classes {
            return Err(Error::shape(
                "mc_samples",
                format!("{} values for {passes} x {classes}", probs.len()),
            ));
        }
        for row in probs.chunks(classes) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| p.is_nan() || *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "MC row is not a distribution (sum {s})"
                )));
            }
        }
        Ok(McSamples { probs, passes, classes })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.classes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub layers: Vec<Linear>,
    pub dropout_rate: f64,
}

impl Classifier {
    pub fn new(cfg: &NetConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![cfg.input_dim];
        dims.extend(&cfg.classifier_hidden);
        dims.push(cfg.classes);
        let layers = dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
        Ok(Classifier {
            layers,
            dropout_rate: cfg.dropout_rate,
        })
    }

    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![cfg.input_dim];
        dims.extend(&cfg.classifier_hidden);
        dims.push(cfg.classes);
        Ok(Classifier {
            layers: dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
            dropout_rate: cfg.dropout_rate,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map(Linear::outputs).unwrap_or(0)
    }

    fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    fn spec(&self, mode: DropoutMode) -> DropoutSpec {
        DropoutSpec {
            rate: self.dropout_rate,
            mode,
        }
    }

    /// Records the forward pass on `tape`. Dropout masks are drawn from
    /// `rng` layer by layer, each over the whole batch in row-major order.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        mode: DropoutMode,
        rng: &mut RngStream,
    ) -> Result<Var> {
        check_input("classifier", tape.value(x), self.input_dim())?;
        let spec = self.spec(mode);
        let mut h = x;
        for l in 0..self.hidden_count() {
            h = tape.affine(h, vars[2 * l], vars[2 * l + 1])?;
            h = tape.relu(h)?;
            h = tape.dropout(h, spec, rng)?;
        }
        let last = self.hidden_count();
        tape.affine(h, vars[2 * last], vars[2 * last + 1])
    }

    /// Logits for a `batch x d` input without recording a tape.
    pub fn logits(&self, x: &Tensor, mode: DropoutMode, rng: &mut RngStream) -> Result<Tensor> {
        check_input("classifier", x, self.input_dim())?;
        let spec = self.spec(mode);
        let rows = x.rows();
        let mut h = x.data().to_vec();
        for layer in &self.layers[..self.hidden_count()] {
            h = layer.apply(&h, rows);
            relu_in_place(&mut h);
            if let Some(mask) = dropout::mask(&[rows, layer.outputs()], spec, rng)? {
                for (v, m) in h.iter_mut().zip(mask.data()) {
                    *v *= m;
                }
            }
        }
        let out = self.layers[self.hidden_count()].apply(&h, rows);
        let t = Tensor::from_parts(vec![rows, self.classes()], out);
        t.ensure_finite("classifier logits")?;
        Ok(t)
    }

    /// Softmax probabilities with dropout off.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.logits(x, DropoutMode::DeterministicOff, &mut StreamKey::root(0).stream())?;
        Ok(Tensor::from_parts(
            logits.shape().to_vec(),
            softmax_rows(logits.data(), self.classes()),
        ))
    }

    /// `passes` stochastic forward passes of one sample. Pass `t` draws its
    /// masks from `key.index(t)`, so a single pass equals a one-row
    /// [`Classifier::logits`] call in `TrainStochastic` mode on that stream.
    pub fn mc_predict(&self, x: &[f64], passes: usize, key: StreamKey) -> Result<McSamples> {
        if passes == 0 {
            return Err(Error::InvalidArgument("MC dropout needs at least one pass".into()));
        }
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "mc_predict",
                format!("sample has {} features, expected {}", x.len(), self.input_dim()),
            ));
        }
        let spec = self.spec(DropoutMode::McSample);
        let hidden = self.hidden_count();
        // Masks per pass, per hidden layer, drawn in the same order as `logits`.
        let mut masks: Vec<Vec<f64>> = (0..hidden)
            .map(|l| vec![1.0; passes * self.layers[l].outputs()])
            .collect();
        if spec.is_active() {
            for t in 0..passes {
                let mut rng = key.index(t as u64).stream();
                for (l, m) in masks.iter_mut().enumerate() {
                    let w = self.layers[l].outputs();
                    dropout::fill_mask(&mut m[t * w..(t + 1) * w], spec.rate, &mut rng);
                }
            }
        }
        // The first affine map does not depend on the mask.
        let mut first = self.layers[0].apply(x, 1);
        relu_in_place(&mut first);
        let mut h: Vec<f64> = Vec::with_capacity(passes * first.len());
        for _ in 0..passes {
            h.extend_from_slice(&first);
        }
        for (v, m) in h.iter_mut().zip(&masks[0]) {
            *v *= m;
        }
        for (l, mask) in masks.iter().enumerate().skip(1) {
            h = self.layers[l].apply(&h, passes);
            relu_in_place(&mut h);
            for (v, m) in h.iter_mut().zip(mask) {
                *v *= m;
            }
        }
        let logits = self.layers[hidden].apply(&h, passes);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mc_predict logits".into()));
        }
        McSamples::new(softmax_rows(&logits, self.classes()), passes, self.classes())
    }
}

impl ParamGroup for Classifier {
    fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub mu: Tensor,
    pub log_var: Tensor,
    pub z: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub hidden: Linear,
    pub mu: Linear,
    pub log_var: Linear,
}

/// Tape handles for one encoder pass.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub mu: Var,
    pub log_var: Var,
    pub z: Var,
}

impl Encoder {
    pub fn new(cfg: &NetConfig, rng: &mut RngStream) -> Self {
        Encoder {
            hidden: Linear::init(cfg.input_dim, cfg.encoder_hidden, rng),
            mu: Linear::init(cfg.encoder_hidden, cfg.latent_dim, rng),
            log_var: Linear::init(cfg.encoder_hidden, cfg.latent_dim, rng),
        }
    }

    pub fn zeros(cfg: &NetConfig) -> Self {
        Encoder {
            hidden: Linear::zeros(cfg.input_dim, cfg.encoder_hidden),
            mu: Linear::zeros(cfg.encoder_hidden, cfg.latent_dim),
            log_var: Linear::zeros(cfg.encoder_hidden, cfg.latent_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.outputs()
    }

    /// Encodes with `eta ~ N(0, I)` drawn from `rng`.
    pub fn encode(&self, x: &Tensor, rng: &mut RngStream) -> Result<EncoderOutput> {
        let eta = rng.normals(x.rows() * self.latent_dim());
        self.encode_with_noise(x, &eta)
    }

    /// Encodes with explicit reparameterization noise (`rows x latent`).
    pub fn encode_with_noise(&self, x: &Tensor, eta: &[f64]) -> Result<EncoderOutput> {
        check_input("encoder", x, self.input_dim())?;
        let rows = x.rows();
        let l = self.latent_dim();
        if eta.len() != rows * l {
            return Err(Error::shape("encoder", "noise does not match latent shape"));
        }
        let mut h = self.hidden.apply(x.data(), rows);
        relu_in_place(&mut h);
        let mu = self.mu.apply(&h, rows);
        let log_var = self.log_var.apply(&h, rows);
        if log_var.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder log_var".into()));
        }
        let z: Vec<f64> = mu
            .iter()
            .zip(&log_var)
            .zip(eta)
            .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
            .collect();
        let out = EncoderOutput {
            mu: Tensor::from_parts(vec![rows, l], mu),
            log_var: Tensor::from_parts(vec![rows, l], log_var),
            z: Tensor::from_parts(vec![rows, l], z),
        };
        out.z.ensure_finite("encoder z")?;
        Ok(out)
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: &[Var], x: Var, eta: Tensor) -> Result<EncoderVars> {
        check_input("encoder", tape.value(x), self.input_dim())?;
        let h = tape.affine(x, vars[0], vars[1])?;
        let h = tape.relu(h)?;
        let mu = tape.affine(h, vars[2], vars[3])?;
        let log_var = tape.affine(h, vars[4], vars[5])?;
        let z = tape.reparameterize(mu, log_var, eta)?;
        Ok(EncoderVars { mu, log_var, z })
    }
}

impl ParamGroup for Encoder {
    fn params(&self) -> Vec<&Tensor> {
        [&self.hidden, &self.mu, &self.log_var]
            .into_iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        [&mut self.hidden, &mut self.mu, &mut self.log_var]
            .into_iter()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// `g(z, y)`: latent code concatenated with a learned class embedding, one
/// hidden ReLU layer, sigmoid output in `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    /// `classes x embed_dim`.
    pub embedding: Tensor,
    pub hidden: Linear,
    pub output: Linear,
}

impl Generator {
    pub fn new(cfg: &NetConfig, rng: &mut RngStream) -> Self {
        let embedding = Tensor::from_parts(
            vec![cfg.classes, cfg.embed_dim],
            rng.normals(cfg.classes * cfg.embed_dim),
        );
        Generator {
            embedding,
            hidden: Linear::init(cfg.latent_dim + cfg.embed_dim, cfg.generator_hidden, rng),
            output: Linear::init(cfg.generator_hidden, cfg.input_dim, rng),
        }
    }

    pub fn zeros(cfg: &NetConfig) -> Self {
        Generator {
            embedding: Tensor::zeros(&[cfg.classes, cfg.embed_dim]),
            hidden: Linear::zeros(cfg.latent_dim + cfg.embed_dim, cfg.generator_hidden),
            output: Linear::zeros(cfg.generator_hidden, cfg.input_dim),
        }
    }

    pub fn classes(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.hidden.inputs() - self.embed_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.outputs()
    }

    fn check_labels(&self, labels: &[usize], rows: usize) -> Result<()> {
        if labels.len() != rows {
            return Err(Error::shape(
                "generator",
                format!("{rows} codes, {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.classes()) {
            return Err(Error::InvalidArgument(format!(
                "class {bad} out of range for {} classes",
                self.classes()
            )));
        }
        Ok(())
    }

    pub fn generate(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        check_input("generator", z, self.latent_dim())?;
        let rows = z.rows();
        self.check_labels(labels, rows)?;
        let (l, e) = (self.latent_dim(), self.embed_dim());
        let mut input = Vec::with_capacity(rows * (l + e));
        for (i, &y) in labels.iter().enumerate() {
            input.extend_from_slice(z.row(i));
            input.extend_from_slice(self.embedding.row(y));
        }
        let mut h = self.hidden.apply(&input, rows);
        relu_in_place(&mut h);
        let mut out = self.output.apply(&h, rows);
        for v in out.iter_mut() {
            *v = sigmoid(*v);
        }
        let t = Tensor::from_parts(vec![rows, self.output_dim()], out);
        t.ensure_finite("generator output")?;
        Ok(t)
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: &[Var], z: Var, labels: &[usize]) -> Result<Var> {
        check_input("generator", tape.value(z), self.latent_dim())?;
        self.check_labels(labels, tape.value(z).rows())?;
        let emb = tape.embed(vars[0], labels)?;
        let input = tape.concat_cols(z, emb)?;
        let h = tape.affine(input, vars[1], vars[2])?;
        let h = tape.relu(h)?;
        let o = tape.affine(h, vars[3], vars[4])?;
        tape.sigmoid(o)
    }
}

impl ParamGroup for Generator {
    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.embedding,
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub hidden: Linear,
    pub output: Linear,
}

impl Discriminator {
    pub fn new(cfg: &NetConfig, rng: &mut RngStream) -> Self {
        Discriminator {
            hidden: Linear::init(cfg.input_dim, cfg.discriminator_hidden, rng),
            output: Linear::init(cfg.discriminator_hidden, 1, rng),
        }
    }

    pub fn zeros(cfg: &NetConfig) -> Self {
        Discriminator {
            hidden: Linear::zeros(cfg.input_dim, cfg.discriminator_hidden),
            output: Linear::zeros(cfg.discriminator_hidden, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.inputs()
    }

    /// One logit per row.
    pub fn logits(&self, x: &Tensor) -> Result<Vec<f64>> {
        check_input("discriminator", x, self.input_dim())?;
        let rows = x.rows();
        let mut h = self.hidden.apply(x.data(), rows);
        relu_in_place(&mut h);
        Ok(self.output.apply(&h, rows))
    }

    /// Probability-real per row, clamped to `[1e-7, 1 - 1e-7]`.
    pub fn discriminate(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.into_iter().map(prob_from_logit).collect())
    }

    /// Records the clamped probability-real, shape `batch x 1`.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        check_input("discriminator", tape.value(x), self.input_dim())?;
        let h = tape.affine(x, vars[0], vars[1])?;
        let h = tape.relu(h)?;
        let logit = tape.affine(h, vars[2], vars[3])?;
        let p = tape.sigmoid(logit)?;
        tape.clamp(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    }
}

pub fn prob_from_logit(logit: f64) -> f64 {
    sigmoid(logit).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

impl ParamGroup for Discriminator {
    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

/// The four parameter groups and their optimizer states.
#[derive(Clone, Debug)]
pub struct ParamStore {
    pub config: NetConfig,
    pub classifier: Classifier,
    pub encoder: Encoder,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub opt_classifier: OptimizerState,
    pub opt_encoder: OptimizerState,
    pub opt_generator: OptimizerState,
    pub opt_discriminator: OptimizerState,
}

/// Optimizer settings per player.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub classifier: OptimizerKind,
    pub generative: OptimizerKind,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            classifier: OptimizerKind::classifier_default(),
            generative: OptimizerKind::generative_default(),
        }
    }
}

impl ParamStore {
    /// Fresh parameters; each group draws from its own stream under `key`.
    pub fn init(cfg: &NetConfig, opt: OptimizerConfig, key: StreamKey) -> Result<Self> {
        cfg.validate()?;
        let classifier = Classifier::new(cfg, &mut key.tag("classifier").stream())?;
        let encoder = Encoder::new(cfg, &mut key.tag("encoder").stream());
        let generator = Generator::new(cfg, &mut key.tag("generator").stream());
        let discriminator = Discriminator::new(cfg, &mut key.tag("discriminator").stream());
        Ok(Self::assemble(
            cfg.clone(),
            classifier,
            encoder,
            generator,
            discriminator,
            opt,
        ))
    }

    pub fn assemble(
        config: NetConfig,
        classifier: Classifier,
        encoder: Encoder,
        generator: Generator,
        discriminator: Discriminator,
        opt: OptimizerConfig,
    ) -> Self {
        ParamStore {
            opt_classifier: OptimizerState::new(opt.classifier, &classifier.params()),
            opt_encoder: OptimizerState::new(opt.generative, &encoder.params()),
            opt_generator: OptimizerState::new(opt.generative, &generator.params()),
            opt_discriminator: OptimizerState::new(opt.generative, &discriminator.params()),
            config,
            classifier,
            encoder,
            generator,
            discriminator,
        }
    }

    /// Re-initializes the classifier and its optimizer state.
    pub fn reset_classifier(&mut self, key: StreamKey) -> Result<()> {
        self.classifier = Classifier::new(&self.config, &mut key.stream())?;
        self.opt_classifier = OptimizerState::new(self.opt_classifier.kind(), &self.classifier.params());
        Ok(())
    }

    pub fn groups(&self) -> [&dyn ParamGroup; 4] {
        [&self.classifier, &self.encoder, &self.generator, &self.discriminator]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetConfig {
        NetConfig {
            input_dim: 6,
            classes: 3,
            classifier_hidden: vec![8, 7],
            dropout_rate: 0.5,
            encoder_hidden: 5,
            latent_dim: 3,
            embed_dim: 2,
            generator_hidden: 5,
            discriminator_hidden: 4,
        }
    }

    fn batch(rows: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = StreamKey::root(seed).stream();
        Tensor::from_parts(vec![rows, d], (0..rows * d).map(|_| rng.uniform()).collect())
    }

    #[test]
    fn zero_classifier_is_uniform() {
        let c = Classifier::zeros(&small()).unwrap();
        let p = c.predict_proba(&batch(4, 6, 1)).unwrap();
        for v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn classifier_requires_a_dropout_layer() {
        let mut cfg = small();
        cfg.classifier_hidden.clear();
        assert!(Classifier::zeros(&cfg).is_err());
    }

    #[test]
    fn deterministic_logits_repeat() {
        let c = Classifier::new(&small(), &mut StreamKey::root(2).stream()).unwrap();
        let x = batch(5, 6, 3);
        let a = c
            .logits(&x, DropoutMode::DeterministicOff, &mut StreamKey::root(8).stream())
            .unwrap();
        let b = c
            .logits(&x, DropoutMode::DeterministicOff, &mut StreamKey::root(9).stream())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_logits_replay_with_same_stream() {
        let c = Classifier::new(&small(), &mut StreamKey::root(2).stream()).unwrap();
        let x = batch(5, 6, 3);
        let k = StreamKey::root(10);
        let a = c.logits(&x, DropoutMode::McSample, &mut k.stream()).unwrap();
        let b = c.logits(&x, DropoutMode::McSample, &mut k.stream()).unwrap();
        assert_eq!(a, b);
        let other = c
            .logits(&x, DropoutMode::McSample, &mut StreamKey::root(11).stream())
            .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn tape_and_plain_paths_agree() {
        let c = Classifier::new(&small(), &mut StreamKey::root(2).stream()).unwrap();
        let x = batch(4, 6, 5);
        let k = StreamKey::root(12);
        let plain = c.logits(&x, DropoutMode::TrainStochastic, &mut k.stream()).unwrap();
        let mut tape = Tape::new();
        let vars = c.bind(&mut tape);
        let xv = tape.constant(x);
        let out = c
            .forward_tape(&mut tape, &vars, xv, DropoutMode::TrainStochastic, &mut k.stream())
            .unwrap();
        for (a, b) in tape.value(out).data().iter().zip(plain.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_predict_rate_zero_rows_identical() {
        let mut cfg = small();
        cfg.dropout_rate = 0.0;
        let c = Classifier::new(&cfg, &mut StreamKey::root(2).stream()).unwrap();
        let x = batch(1, 6, 5);
        let mc = c.mc_predict(x.data(), 7, StreamKey::root(1)).unwrap();
        for t in 1..7 {
            assert_eq!(mc.row(t), mc.row(0));
        }
    }

    #[test]
    fn mc_single_pass_matches_train_forward() {
        let c = Classifier::new(&small(), &mut StreamKey::root(2).stream()).unwrap();
        let x = batch(1, 6, 5);
        let key = StreamKey::root(77);
        let mc = c.mc_predict(x.data(), 1, key).unwrap();
        let logits = c
            .logits(&x, DropoutMode::TrainStochastic, &mut key.index(0).stream())
            .unwrap();
        let p = softmax_rows(logits.data(), 3);
        for (a, b) in mc.row(0).iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_rows_are_distributions() {
        let c = Classifier::new(&small(), &mut StreamKey::root(4).stream()).unwrap();
        let mc = c.mc_predict(batch(1, 6, 9).data(), 20, StreamKey::root(5)).unwrap();
        for row in mc.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        assert!(c.mc_predict(batch(1, 6, 9).data(), 0, StreamKey::root(5)).is_err());
    }

    #[test]
    fn encoder_zero_noise_gives_mu() {
        let e = Encoder::new(&small(), &mut StreamKey::root(3).stream());
        let x = batch(2, 6, 1);
        let out = e.encode_with_noise(&x, &[0.0; 6]).unwrap();
        assert_eq!(out.z, out.mu);
    }

    #[test]
    fn zero_encoder_outputs_bias() {
        let mut e = Encoder::zeros(&small());
        e.mu.bias = Tensor::vector(vec![0.1, 0.2, 0.3]).unwrap();
        e.log_var.bias = Tensor::vector(vec![-0.1, 0.0, 0.4]).unwrap();
        let out = e.encode_with_noise(&batch(1, 6, 1), &[0.0; 3]).unwrap();
        assert_eq!(out.mu.data(), &[0.1, 0.2, 0.3]);
        assert_eq!(out.log_var.data(), &[-0.1, 0.0, 0.4]);
    }

    #[test]
    fn encoder_replay_same_z() {
        let e = Encoder::new(&small(), &mut StreamKey::root(3).stream());
        let x = batch(2, 6, 1);
        let k = StreamKey::root(44);
        assert_eq!(
            e.encode(&x, &mut k.stream()).unwrap().z,
            e.encode(&x, &mut k.stream()).unwrap().z
        );
    }

    #[test]
    fn generator_bounded_and_class_conditional() {
        let g = Generator::new(&small(), &mut StreamKey::root(6).stream());
        let z = Tensor::from_parts(vec![2, 3], vec![0.3, -40.0, 2.0, 0.3, -40.0, 2.0]);
        let out = g.generate(&z, &[0, 1]).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(out.row(0), out.row(1));
        assert!(g.generate(&z, &[0, 3]).is_err());
    }

    #[test]
    fn zero_discriminator_is_half() {
        let d = Discriminator::zeros(&small());
        for p in d.discriminate(&batch(3, 6, 1)).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn discriminator_clamps_and_is_monotone() {
        assert!(prob_from_logit(100.0) <= 1.0 - 1e-7);
        assert!(prob_from_logit(-100.0) >= 1e-7);
        let mut prev = 0.0;
        for i in -20..=20 {
            let p = prob_from_logit(i as f64 * 0.5);
            assert!(p > prev);
            prev = p;
        }
    }
}
