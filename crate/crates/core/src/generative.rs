//! VAE-ACGAN losses and the per-player joint update.
//!
//! One [`JointGraph`] records the whole forward pass: `z = e(x*)`,
//! `x' = g(z, y*)`, `g(u, c_u)` with `u ~ N(0, I)`, the discriminator and
//! classifier on all three inputs. Four objectives are read off the same
//! graph and each is differentiated only with respect to its own player:
//!
//! * encoder: `L_rec + L_prior`
//! * generator: `gamma * L_rec - log d(x') - log d(g(u)) + CE(c(x'), y*) + CE(c(g(u)), c_u)`
//! * discriminator: `-[log d(x*) + log(1 - d(x')) + log(1 - d(g(u)))]`
//! * classifier: `CE(c(x*), y*) + CE(c(x'), y*) + CE(c(g(u)), c_u)`

use crate::dropout::DropoutMode;
use crate::error::{Error, Result};
use crate::nets::{ParamGroup, ParamStore};
use crate::optim::OptimizerState;
use crate::rng::StreamKey;
use crate::tape::{Tape, Var};
use crate::tensor::{log_softmax_rows, Tensor};

/// Mixing weight of the reconstruction term in the generator objective.
pub const DEFAULT_GAMMA: f64 = 0.75;

/// Term weights of the encoder and generator objectives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Reconstruction weight in the generator objective.
    pub gamma: f64,
    /// Weight of `L_prior` in the encoder objective.
    pub prior: f64,
    /// Multiplies `L_rec` in both objectives. Setting it to the input
    /// dimension turns the per-coordinate mean into a per-sample sum.
    pub recon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gamma: DEFAULT_GAMMA,
            prior: 1.0,
            recon: 1.0,
        }
    }
}

/// `KL(N(mu, diag exp(log_var)) || N(0, I))`, summed over dimensions.
pub fn kl_diag_gaussian(mu: &[f64], log_var: &[f64]) -> Result<f64> {
    if mu.len() != log_var.len() {
        return Err(Error::shape("kl_diag_gaussian", "mu and log_var differ in length"));
    }
    if mu.iter().chain(log_var).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kl_diag_gaussian input".into()));
    }
    let kl = 0.5
        * mu.iter()
            .zip(log_var)
            .map(|(&m, &lv)| m * m + lv.exp() - 1.0 - lv)
            .sum::<f64>();
    if !kl.is_finite() {
        return Err(Error::NonFinite("kl_diag_gaussian".into()));
    }
    Ok(kl)
}

fn check_pair(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(op, format!("{} vs {} values", a.len(), b.len())));
    }
    Ok(())
}

/// Mean squared error over coordinates.
pub fn reconstruction_loss(x_star: &[f64], x_prime: &[f64]) -> Result<f64> {
    check_pair("reconstruction_loss", x_star, x_prime)?;
    Ok(x_star.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x_star.len() as f64)
}

/// Euclidean distance `||x' - x*||`.
pub fn reconstruction_distance(x_star: &[f64], x_prime: &[f64]) -> Result<f64> {
    check_pair("reconstruction_distance", x_star, x_prime)?;
    Ok(x_star
        .iter()
        .zip(x_prime)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `(L_rec, L_prior)` for one sample: MSE reconstruction and the KL term of
/// the encoder posterior.
pub fn vae_loss(x_star: &[f64], mu: &[f64], log_var: &[f64], x_prime: &[f64]) -> Result<(f64, f64)> {
    Ok((reconstruction_loss(x_star, x_prime)?, kl_diag_gaussian(mu, log_var)?))
}

/// The six negative log-likelihood terms, each averaged over the batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcganTerms {
    /// `-log d(x*)`
    pub disc_real: f64,
    /// `-log(1 - d(x'))`
    pub disc_recon_fake: f64,
    /// `-log(1 - d(g(u)))`
    pub disc_prior_fake: f64,
    /// `-log softmax(c(x*))[y*]`
    pub cls_real: f64,
    /// `-log softmax(c(x'))[y*]`
    pub cls_recon: f64,
    /// `-log softmax(c(g(u)))[c_u]`
    pub cls_prior: f64,
}

/// Per-player objectives derived from the ACGAN terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcganLosses {
    pub terms: AcganTerms,
    pub discriminator: f64,
    pub classifier: f64,
    /// Adversarial part of the generator objective (non-saturating).
    pub generator: f64,
}

fn mean_log(ps: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    ps.iter().map(|&p| f(p).ln()).sum::<f64>() / ps.len() as f64
}

fn mean_ce(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let c = logits.cols();
    if logits.rows() != labels.len() {
        return Err(Error::shape("acgan_losses", "logit rows and labels differ"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let ls = log_softmax_rows(logits.data(), c);
    Ok(-labels.iter().enumerate().map(|(i, &y)| ls[i * c + y]).sum::<f64>() / labels.len() as f64)
}

/// Evaluates the three player objectives from discriminator probabilities and
/// classifier logits. Probabilities must lie strictly inside `(0, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn acgan_losses(
    d_real: &[f64],
    d_recon: &[f64],
    d_prior: &[f64],
    cls_logits_real: &Tensor,
    cls_logits_recon: &Tensor,
    cls_logits_prior: &Tensor,
    y_star: &[usize],
    class_for_u: &[usize],
) -> Result<AcganLosses> {
    for ps in [d_real, d_recon, d_prior] {
        if ps.is_empty() {
            return Err(Error::InvalidArgument("empty discriminator batch".into()));
        }
        if let Some(&bad) = ps.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "discriminator probability {bad} is not clamped into (0, 1)"
            )));
        }
    }
    let terms = AcganTerms {
        disc_real: -mean_log(d_real, |p| p),
        disc_recon_fake: -mean_log(d_recon, |p| 1.0 - p),
        disc_prior_fake: -mean_log(d_prior, |p| 1.0 - p),
        cls_real: mean_ce(cls_logits_real, y_star)?,
        cls_recon: mean_ce(cls_logits_recon, y_star)?,
        cls_prior: mean_ce(cls_logits_prior, class_for_u)?,
    };
    let gen_adv = -mean_log(d_recon, |p| p) - mean_log(d_prior, |p| p);
    Ok(AcganLosses {
        terms,
        discriminator: terms.disc_real + terms.disc_recon_fake + terms.disc_prior_fake,
        classifier: terms.cls_real + terms.cls_recon + terms.cls_prior,
        generator: gen_adv + terms.cls_recon + terms.cls_prior,
    })
}

/// Loss values reported by one joint step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBundle {
    pub rec: f64,
    pub prior: f64,
    pub acgan: AcganLosses,
    pub weights: LossWeights,
}

impl LossBundle {
    /// Encoder objective `L_rec + w * L_prior`.
    pub fn encoder_objective(&self) -> f64 {
        self.weights.recon * self.rec + self.weights.prior * self.prior
    }

    /// Generator objective `gamma * L_rec + adversarial`.
    pub fn generator_objective(&self) -> f64 {
        self.weights.gamma * self.weights.recon * self.rec + self.acgan.generator
    }

    pub fn is_finite(&self) -> bool {
        let t = self.acgan.terms;
        [
            self.rec,
            self.prior,
            t.disc_real,
            t.disc_recon_fake,
            t.disc_prior_fake,
            t.cls_real,
            t.cls_recon,
            t.cls_prior,
            self.acgan.discriminator,
            self.acgan.classifier,
            self.acgan.generator,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Prior-path draw: `u ~ N(0, I)` with a uniformly sampled class per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub u: Tensor,
    pub class_for_u: Vec<usize>,
}

impl LatentSample {
    pub fn draw(rows: usize, latent: usize, classes: usize, key: StreamKey) -> Self {
        let mut rng = key.stream();
        let u = Tensor::from_parts(vec![rows, latent], rng.normals(rows * latent));
        let class_for_u = (0..rows).map(|_| rng.below(classes)).collect();
        LatentSample { u, class_for_u }
    }
}

/// Tape handles of the four parameter groups.
#[derive(Clone, Debug)]
pub struct BoundPlayers {
    pub classifier: Vec<Var>,
    pub encoder: Vec<Var>,
    pub generator: Vec<Var>,
    pub discriminator: Vec<Var>,
}

/// The recorded joint forward pass and its four objectives.
#[derive(Debug)]
pub struct JointGraph {
    pub tape: Tape,
    pub players: BoundPlayers,
    pub x_prime: Var,
    pub mu: Var,
    pub log_var: Var,
    pub rec: Var,
    pub prior: Var,
    pub encoder_objective: Var,
    pub generator_objective: Var,
    pub discriminator_objective: Var,
    pub classifier_objective: Var,
    pub losses: LossBundle,
}

fn one_minus(tape: &mut Tape, v: Var) -> Result<Var> {
    let neg = tape.scale(v, -1.0)?;
    tape.add_scalar(neg, 1.0)
}

fn mean_log_var(tape: &mut Tape, v: Var) -> Result<Var> {
    let l = tape.log(v)?;
    tape.mean(l)
}

impl JointGraph {
    /// Records the joint forward pass for a batch `(x*, y*)`.
    ///
    /// Noise for the encoder, the prior draw and the classifier's dropout
    /// masks come from sub-streams of `key`. With `classifier_mode` set to
    /// `DeterministicOff` the graph is a deterministic function of the
    /// parameters.
    pub fn build(
        params: &ParamStore,
        x_star: &Tensor,
        y_star: &[usize],
        weights: LossWeights,
        classifier_mode: DropoutMode,
        key: StreamKey,
    ) -> Result<Self> {
        let rows = x_star.rows();
        if rows == 0 || y_star.len() != rows {
            return Err(Error::shape(
                "joint_update_step",
                format!("{rows} samples, {} labels", y_star.len()),
            ));
        }
        let cfg = &params.config;
        let latent = cfg.latent_dim;
        let mut tape = Tape::new();
        let players = BoundPlayers {
            classifier: params.classifier.bind(&mut tape),
            encoder: params.encoder.bind(&mut tape),
            generator: params.generator.bind(&mut tape),
            discriminator: params.discriminator.bind(&mut tape),
        };
        let x = tape.constant(x_star.clone());

        let eta = Tensor::from_parts(vec![rows, latent], key.tag("eta").stream().normals(rows * latent));
        let enc = params.encoder.forward_tape(&mut tape, &players.encoder, x, eta)?;
        let x_prime = params
            .generator
            .forward_tape(&mut tape, &players.generator, enc.z, y_star)?;

        let prior_draw = LatentSample::draw(rows, latent, cfg.classes, key.tag("prior"));
        let u = tape.constant(prior_draw.u);
        let x_gen = params
            .generator
            .forward_tape(&mut tape, &players.generator, u, &prior_draw.class_for_u)?;

        let disc = &params.discriminator;
        let d_real = disc.forward_tape(&mut tape, &players.discriminator, x)?;
        let d_recon = disc.forward_tape(&mut tape, &players.discriminator, x_prime)?;
        let d_prior = disc.forward_tape(&mut tape, &players.discriminator, x_gen)?;

        let mut mask_rng = key.tag("classifier_dropout").stream();
        let cls = &params.classifier;
        let c_real = cls.forward_tape(&mut tape, &players.classifier, x, classifier_mode, &mut mask_rng)?;
        let c_recon = cls.forward_tape(&mut tape, &players.classifier, x_prime, classifier_mode, &mut mask_rng)?;
        let c_prior = cls.forward_tape(&mut tape, &players.classifier, x_gen, classifier_mode, &mut mask_rng)?;

        // Reconstruction: MSE over all coordinates of the batch.
        let diff = tape.sub(x_prime, x)?;
        let sq = tape.mul(diff, diff)?;
        let rec = tape.mean(sq)?;

        // KL to N(0, I): 0.5 * sum(mu^2 + exp(lv) - 1 - lv), averaged over rows.
        let mu2 = tape.mul(enc.mu, enc.mu)?;
        let var = tape.exp(enc.log_var)?;
        let a = tape.add(mu2, var)?;
        let b = tape.sub(a, enc.log_var)?;
        let b = tape.add_scalar(b, -1.0)?;
        let kl_sum = tape.sum(b)?;
        let prior = tape.scale(kl_sum, 0.5 / rows as f64)?;

        let log_d_real = mean_log_var(&mut tape, d_real)?;
        let fake_recon = one_minus(&mut tape, d_recon)?;
        let log_fake_recon = mean_log_var(&mut tape, fake_recon)?;
        let fake_prior = one_minus(&mut tape, d_prior)?;
        let log_fake_prior = mean_log_var(&mut tape, fake_prior)?;
        let log_d_recon = mean_log_var(&mut tape, d_recon)?;
        let log_d_prior = mean_log_var(&mut tape, d_prior)?;

        let ce_real = tape.cross_entropy(c_real, y_star)?;
        let ce_recon = tape.cross_entropy(c_recon, y_star)?;
        let ce_prior = tape.cross_entropy(c_prior, &prior_draw.class_for_u)?;

        let scaled_rec = tape.scale(rec, weights.recon)?;
        let weighted_prior = tape.scale(prior, weights.prior)?;
        let encoder_objective = tape.add(scaled_rec, weighted_prior)?;

        let s = tape.add(log_d_real, log_fake_recon)?;
        let s = tape.add(s, log_fake_prior)?;
        let discriminator_objective = tape.scale(s, -1.0)?;

        let s = tape.add(ce_real, ce_recon)?;
        let classifier_objective = tape.add(s, ce_prior)?;

        let adv = tape.add(log_d_recon, log_d_prior)?;
        let adv = tape.scale(adv, -1.0)?;
        let cls_gen = tape.add(ce_recon, ce_prior)?;
        let adv = tape.add(adv, cls_gen)?;
        let weighted_rec = tape.scale(scaled_rec, weights.gamma)?;
        let generator_objective = tape.add(weighted_rec, adv)?;

        let v = |var: Var| tape.value(var).item();
        let terms = AcganTerms {
            disc_real: -v(log_d_real),
            disc_recon_fake: -v(log_fake_recon),
            disc_prior_fake: -v(log_fake_prior),
            cls_real: v(ce_real),
            cls_recon: v(ce_recon),
            cls_prior: v(ce_prior),
        };
        let losses = LossBundle {
            rec: v(rec),
            prior: v(prior),
            acgan: AcganLosses {
                terms,
                discriminator: v(discriminator_objective),
                classifier: v(classifier_objective),
                generator: v(adv),
            },
            weights,
        };
        if !losses.is_finite() {
            return Err(Error::NonFinite(format!("joint_update_step losses: {losses:?}")));
        }
        Ok(JointGraph {
            tape,
            players,
            x_prime,
            mu: enc.mu,
            log_var: enc.log_var,
            rec,
            prior,
            encoder_objective,
            generator_objective,
            discriminator_objective,
            classifier_objective,
            losses,
        })
    }

    fn grads_for(&self, root: Var, vars: &[Var]) -> Result<Vec<Tensor>> {
        Ok(self.tape.backward_wrt(root, vars)?.take_all(vars))
    }

    pub fn encoder_grads(&self) -> Result<Vec<Tensor>> {
        self.grads_for(self.encoder_objective, &self.players.encoder)
    }

    pub fn generator_grads(&self) -> Result<Vec<Tensor>> {
        self.grads_for(self.generator_objective, &self.players.generator)
    }

    pub fn discriminator_grads(&self) -> Result<Vec<Tensor>> {
        self.grads_for(self.discriminator_objective, &self.players.discriminator)
    }

    pub fn classifier_grads(&self) -> Result<Vec<Tensor>> {
        self.grads_for(self.classifier_objective, &self.players.classifier)
    }
}

/// Result of one joint update.
#[derive(Clone, Debug)]
pub struct JointStep {
    pub losses: LossBundle,
    /// `g(e(x*))` computed before the update.
    pub x_prime: Tensor,
    /// Mean `||x' - x*||` over the batch.
    pub mean_recon_distance: f64,
}

fn apply(opt: &mut OptimizerState, group: &mut dyn ParamGroup, grads: &[Tensor]) -> Result<()> {
    opt.step(&mut group.params_mut(), grads)
}

/// One VAE-ACGAN update on a batch. Gradients are taken at the current
/// parameters, then applied in the order encoder, generator, discriminator,
/// classifier; each player only ever sees gradients of its own objective.
pub fn joint_update_step(
    params: &mut ParamStore,
    x_star: &Tensor,
    y_star: &[usize],
    weights: LossWeights,
    key: StreamKey,
) -> Result<JointStep> {
    let graph = JointGraph::build(params, x_star, y_star, weights, DropoutMode::TrainStochastic, key)?;
    let g_enc = graph.encoder_grads()?;
    let g_gen = graph.generator_grads()?;
    let g_disc = graph.discriminator_grads()?;
    let g_cls = graph.classifier_grads()?;
    let x_prime = graph.tape.value(graph.x_prime).clone();
    let rows = x_star.rows();
    let mean_recon_distance = (0..rows)
        .map(|i| reconstruction_distance(x_star.row(i), x_prime.row(i)))
        .sum::<Result<f64>>()?
        / rows as f64;

    apply(&mut params.opt_encoder, &mut params.encoder, &g_enc)?;
    apply(&mut params.opt_generator, &mut params.generator, &g_gen)?;
    apply(&mut params.opt_discriminator, &mut params.discriminator, &g_disc)?;
    apply(&mut params.opt_classifier, &mut params.classifier, &g_cls)?;

    Ok(JointStep {
        losses: graph.losses,
        x_prime,
        mean_recon_distance,
    })
}
