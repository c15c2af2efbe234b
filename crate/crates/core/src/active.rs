//! The acquisition loop, the oracle-driven bookkeeping and the baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::acquisition::{proposition1_gap, score_pool, subsample_pool, AcquisitionReport, PropositionGap};
use crate::config::ExperimentConfig;
use crate::data::{split, DatasetMeta, DatasetState, LabeledSet, RawDataset};
use crate::dropout::DropoutMode;
use crate::error::{Error, Result};
use crate::generative::{joint_update_step, LossBundle, LossWeights};
use crate::metrics::MetricsRecord;
use crate::nets::{Classifier, ParamGroup, ParamStore};
use crate::parallel::Workers;
use crate::rng::{RngStream, StreamKey};
use crate::tape::Tape;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    RandomSelection,
    AlNoDa,
    AlAcgan,
    AlVaeAcgan,
    BdaPartial,
    BdaFull,
    AlPmda,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::RandomSelection,
        Strategy::AlNoDa,
        Strategy::AlAcgan,
        Strategy::AlVaeAcgan,
        Strategy::BdaPartial,
        Strategy::BdaFull,
        Strategy::AlPmda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RandomSelection => "random",
            Strategy::AlNoDa => "al_no_da",
            Strategy::AlAcgan => "al_acgan",
            Strategy::AlVaeAcgan => "al_vaeacgan",
            Strategy::BdaPartial => "bda_partial",
            Strategy::BdaFull => "bda_full",
            Strategy::AlPmda => "al_pmda",
        }
    }

    /// Whether pool items are picked by BALD rather than uniformly.
    pub fn uses_bald(self) -> bool {
        matches!(
            self,
            Strategy::AlNoDa | Strategy::AlAcgan | Strategy::AlVaeAcgan | Strategy::AlPmda
        )
    }

    pub fn trains_generator(self) -> bool {
        matches!(
            self,
            Strategy::AlAcgan | Strategy::AlVaeAcgan | Strategy::BdaPartial | Strategy::BdaFull
        )
    }

    /// Whether each acquired sample is paired with one artificial sample.
    pub fn pairs_augmentation(self) -> bool {
        matches!(
            self,
            Strategy::AlAcgan | Strategy::AlVaeAcgan | Strategy::BdaPartial | Strategy::AlPmda
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
            Error::InvalidArgument(format!("unknown strategy {s:?} (expected one of {})", names.join(", ")))
        })
    }
}

/// Whether the classifier keeps its weights between iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierMode {
    Continue,
    Reinitialize,
}

impl fmt::Display for ClassifierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierMode::Continue => "continue",
            ClassifierMode::Reinitialize => "reinitialize",
        })
    }
}

impl FromStr for ClassifierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continue" => Ok(ClassifierMode::Continue),
            "reinitialize" => Ok(ClassifierMode::Reinitialize),
            _ => Err(Error::InvalidArgument(format!("unknown classifier mode {s:?}"))),
        }
    }
}

/// One mini-batch of cross-entropy training with dropout active.
fn classifier_step(params: &mut ParamStore, x: &Tensor, y: &[usize], rng: &mut RngStream) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = params.classifier.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let logits = params
        .classifier
        .forward_tape(&mut tape, &vars, xv, DropoutMode::TrainStochastic, rng)?;
    let loss = tape.cross_entropy(logits, y)?;
    let value = tape.value(loss).item();
    let grads = tape.backward_wrt(loss, &vars)?.take_all(&vars);
    params
        .opt_classifier
        .step(&mut params.classifier.params_mut(), &grads)?;
    Ok(value)
}

/// Shuffled mini-batch epochs over the whole labeled set. Returns the mean
/// loss of the last epoch, or `None` when `epochs` is 0.
pub fn train_classifier(
    params: &mut ParamStore,
    labeled: &LabeledSet,
    epochs: usize,
    batch_size: usize,
    key: StreamKey,
) -> Result<Option<f64>> {
    if labeled.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train the classifier on an empty labeled set".into(),
        ));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut last = None;
    for epoch in 0..epochs {
        let ekey = key.index(epoch as u64);
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        ekey.tag("order").stream().shuffle(&mut order);
        let mut masks = ekey.tag("masks").stream();
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let (x, y) = labeled.batch(chunk)?;
            total += classifier_step(params, &x, &y, &mut masks)?;
            batches += 1;
        }
        last = Some(total / batches as f64);
    }
    Ok(last)
}

/// Initial supervised training on the labeled set.
pub fn pretrain_classifier(
    params: &mut ParamStore,
    labeled: &LabeledSet,
    epochs: usize,
    batch_size: usize,
    key: StreamKey,
) -> Result<Option<f64>> {
    train_classifier(params, labeled, epochs, batch_size, key)
}

/// Fraction of test rows whose argmax prediction (dropout off) is correct.
pub fn test_accuracy(classifier: &Classifier, x: &Tensor, y: &[usize]) -> Result<f64> {
    let probs = classifier.predict_proba(x)?;
    let c = classifier.classes();
    let correct = y
        .iter()
        .enumerate()
        .filter(|&(i, &label)| {
            let row = &probs.data()[i * c..(i + 1) * c];
            let best = (0..c).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            best == label
        })
        .count();
    Ok(correct as f64 / y.len() as f64)
}

/// Shifts an `h x w` image by `(dy, dx)` cells with zero fill, after an
/// optional horizontal flip.
pub fn shift_image(x: &[f64], h: usize, w: usize, dy: isize, dx: isize, flip: bool) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        let sr = r - dy;
        if sr < 0 || sr >= h as isize {
            continue;
        }
        for c in 0..w as isize {
            let sc = c - dx;
            if sc < 0 || sc >= w as isize {
                continue;
            }
            let sc = if flip { w as isize - 1 - sc } else { sc };
            out[(r as usize) * w + c as usize] = x[(sr as usize) * w + sc as usize];
        }
    }
    out
}

/// Label-preserving transform: random shift of up to 2 cells per axis and,
/// for flip-safe data, a horizontal flip with probability 1/2.
pub fn pmda_transform(x: &[f64], meta: &DatasetMeta, rng: &mut RngStream) -> Result<Vec<f64>> {
    let (h, w) = meta
        .grid
        .ok_or_else(|| Error::InvalidArgument("PMDA needs image data with a declared grid shape".into()))?;
    if x.len() != h * w {
        return Err(Error::shape(
            "pmda_transform",
            format!("{} values for a {h}x{w} grid", x.len()),
        ));
    }
    let dy = rng.below(5) as isize - 2;
    let dx = rng.below(5) as isize - 2;
    let coin = rng.uniform() < 0.5;
    Ok(shift_image(x, h, w, dy, dx, meta.flip_safe && coin))
}

/// Sizes of the three mutable sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    /// Real labeled samples.
    pub labeled_real: usize,
    pub generated: usize,
    pub pool: usize,
}

impl Counts {
    pub fn of(state: &DatasetState) -> Self {
        Counts {
            labeled_real: state.labeled.real_count(),
            generated: state.generated_count,
            pool: state.pool.len(),
        }
    }

    /// Size of the labeled set, real plus generated.
    pub fn labeled_total(&self) -> usize {
        self.labeled_real + self.generated
    }
}

/// Expected `(real, generated, pool)` change of one iteration that acquired
/// `acquired` pool items and generated `generated` unpaired samples.
pub fn expected_delta(strategy: Strategy, acquired: usize, generated: usize) -> (isize, isize, isize) {
    let k = acquired as isize;
    match strategy {
        Strategy::RandomSelection | Strategy::AlNoDa => (k, 0, -k),
        Strategy::AlAcgan | Strategy::AlVaeAcgan | Strategy::BdaPartial | Strategy::AlPmda => (k, k, -k),
        Strategy::BdaFull => (0, generated as isize, 0),
    }
}

/// Everything an iteration measured beyond its metrics row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub report: Option<AcquisitionReport>,
    pub acquired_ids: Vec<u64>,
    /// Paired `(x*, x_aug)` acquisition values under shared dropout masks,
    /// using the classifier that scored the pool.
    pub gaps: Vec<PropositionGap>,
    /// Batch-mean `||x' - x*||` of every joint update, in order.
    pub recon_trace: Vec<f64>,
    pub before: Option<Counts>,
    pub after: Option<Counts>,
}

struct GenerativeTrace {
    bundles: Vec<LossBundle>,
    recon: Vec<f64>,
}

/// Joint VAE-ACGAN epochs over the acquired samples plus a replay of real
/// labeled samples.
fn train_generative(
    params: &mut ParamStore,
    labeled: &LabeledSet,
    acquired: &[usize],
    cfg: &ExperimentConfig,
    key: StreamKey,
) -> Result<GenerativeTrace> {
    let mut real: Vec<usize> = (0..labeled.len())
        .filter(|&i| labeled.provenance(i).is_real() && !acquired.contains(&i))
        .collect();
    key.tag("replay").stream().shuffle(&mut real);
    real.truncate(cfg.gen_replay);
    let mut set: Vec<usize> = acquired.to_vec();
    set.extend(real);
    let weights = LossWeights {
        gamma: cfg.gamma,
        prior: cfg.prior_weight,
        recon: cfg.recon_weight,
    };
    let mut trace = GenerativeTrace {
        bundles: Vec::new(),
        recon: Vec::new(),
    };
    if set.is_empty() {
        return Ok(trace);
    }
    for epoch in 0..cfg.gen_steps_per_iteration {
        let ekey = key.tag("epoch").index(epoch as u64);
        let mut order = set.clone();
        ekey.tag("order").stream().shuffle(&mut order);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = labeled.batch(chunk)?;
            let step = joint_update_step(params, &x, &y, weights, ekey.tag("step").index(b as u64))?;
            trace.bundles.push(step.losses);
            trace.recon.push(step.mean_recon_distance);
        }
    }
    Ok(trace)
}

/// `g(e(x*), y*)` with per-sample encoder noise.
fn reconstruct(params: &ParamStore, xs: &[Vec<f64>], ys: &[usize], ids: &[u64], key: StreamKey) -> Result<Tensor> {
    let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let x = Tensor::stack_rows(&rows)?;
    let l = params.config.latent_dim;
    let eta: Vec<f64> = ids.iter().flat_map(|&id| key.index(id).stream().normals(l)).collect();
    let enc = params.encoder.encode_with_noise(&x, &eta)?;
    params.generator.generate(&enc.z, ys)
}

/// `g(u, y)` with `u ~ N(0, I)`; row `i` draws from `key.index(tags[i])`.
fn prior_samples(params: &ParamStore, ys: &[usize], tags: &[u64], key: StreamKey) -> Result<Tensor> {
    let l = params.config.latent_dim;
    let u: Vec<f64> = tags.iter().flat_map(|&t| key.index(t).stream().normals(l)).collect();
    params.generator.generate(&Tensor::new(vec![ys.len(), l], u)?, ys)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Number of unpaired generated samples a full-data augmentation run adds at
/// `iteration` (1-based) so that the labeled set reaches `multiplier` times
/// the real data after `iterations` rounds.
pub fn bda_full_quota(real: usize, multiplier: usize, iterations: usize, iteration: usize, generated: usize) -> usize {
    let total = real * multiplier.saturating_sub(1);
    let per = total.div_ceil(iterations.max(1));
    (per * iteration).min(total).saturating_sub(generated)
}

/// One round of the loop: select, label, augment, train, evaluate.
pub fn acquisition_iteration(
    state: &mut DatasetState,
    params: &mut ParamStore,
    cfg: &ExperimentConfig,
    iteration: usize,
    key: StreamKey,
) -> Result<(MetricsRecord, IterationDiagnostics)> {
    let started = Instant::now();
    let strategy = cfg.strategy;
    let workers = Workers::new(cfg.workers);
    let before = Counts::of(state);
    let mut diag = IterationDiagnostics {
        iteration,
        before: Some(before),
        ..Default::default()
    };
    let scoring_classifier = params.classifier.clone();
    let mut record = MetricsRecord {
        iteration,
        ..Default::default()
    };

    // Selection and labeling.
    let mut acquired: Vec<(u64, Vec<f64>, usize)> = Vec::new();
    if strategy != Strategy::BdaFull {
        let pool = &state.pool;
        let positions = subsample_pool(pool.len(), cfg.pool_subsample, &mut key.tag("subsample").stream())?;
        let ids: Vec<u64> = positions.iter().map(|&p| pool.ids()[p]).collect();
        let bald = |sel: &[usize], sel_ids: &[u64]| {
            score_pool(
                &scoring_classifier,
                |i| pool.x_at(sel[i]),
                sel_ids,
                cfg.mc_passes,
                key.tag("mc"),
                workers,
            )
        };
        let scores = if strategy.uses_bald() {
            bald(&positions, &ids)?
        } else {
            let mut r = key.tag("random_scores").stream();
            positions.iter().map(|_| r.uniform()).collect()
        };
        let report = AcquisitionReport::new(positions, scores, cfg.k_per_iteration)?;
        let chosen_ids: Vec<u64> = report.selected_indices.iter().map(|&p| pool.ids()[p]).collect();
        record.mean_acq_selected = if strategy.uses_bald() {
            mean(&report.selected_scores())
        } else {
            mean(&bald(&report.selected_indices, &chosen_ids)?)
        };
        diag.report = Some(report);
        for id in chosen_ids {
            let (x, y) = state.acquire(id)?;
            acquired.push((id, x, y));
        }
        diag.acquired_ids = acquired.iter().map(|a| a.0).collect();
    }
    let first_new = state.labeled.len() - acquired.len();
    let acquired_rows: Vec<usize> = (first_new..state.labeled.len()).collect();

    if strategy.trains_generator() {
        let trace = train_generative(params, &state.labeled, &acquired_rows, cfg, key.tag("generative"))?;
        let n = trace.bundles.len().max(1) as f64;
        let sum = |f: fn(&LossBundle) -> f64| trace.bundles.iter().map(f).sum::<f64>() / n;
        record.loss_rec = sum(|b| b.rec);
        record.loss_prior = sum(|b| b.prior);
        record.loss_disc = sum(|b| b.acgan.discriminator);
        record.loss_cls = sum(|b| b.acgan.classifier);
        record.loss_gen = sum(|b| b.generator_objective());
        diag.recon_trace = trace.recon;
    }

    // Augmentation.
    let mut generated_unpaired = 0;
    if strategy.pairs_augmentation() && !acquired.is_empty() {
        let ids: Vec<u64> = acquired.iter().map(|a| a.0).collect();
        let xs: Vec<Vec<f64>> = acquired.iter().map(|a| a.1.clone()).collect();
        let ys: Vec<usize> = acquired.iter().map(|a| a.2).collect();
        let augmented: Vec<Vec<f64>> = match strategy {
            Strategy::AlVaeAcgan => {
                let t = reconstruct(params, &xs, &ys, &ids, key.tag("augment"))?;
                (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
            }
            Strategy::AlAcgan | Strategy::BdaPartial => {
                let t = prior_samples(params, &ys, &ids, key.tag("augment"))?;
                (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
            }
            _ => ids
                .iter()
                .zip(&xs)
                .map(|(&id, x)| pmda_transform(x, &state.meta, &mut key.tag("augment").index(id).stream()))
                .collect::<Result<_>>()?,
        };
        let mut distances = Vec::with_capacity(xs.len());
        for ((x, xa), &id) in xs.iter().zip(&augmented).zip(&ids) {
            distances.push(crate::generative::reconstruction_distance(x, xa)?);
            diag.gaps.push(proposition1_gap(
                &scoring_classifier,
                x,
                xa,
                cfg.mc_passes,
                key.tag("prop1").index(id),
            )?);
        }
        record.mean_recon_distance = mean(&distances);
        record.mean_acq_generated = mean(&diag.gaps.iter().map(|g| g.a_prime).collect::<Vec<_>>());
        for (xa, &y) in augmented.iter().zip(&ys) {
            state.add_generated(xa, y)?;
        }
    } else if strategy == Strategy::BdaFull {
        let quota = bda_full_quota(
            state.labeled.real_count(),
            cfg.bda_full_multiplier,
            cfg.iterations,
            iteration,
            state.generated_count,
        );
        let mut r = key.tag("bda_classes").stream();
        let ys: Vec<usize> = (0..quota).map(|_| r.below(state.meta.classes)).collect();
        let tags: Vec<u64> = (0..quota as u64).collect();
        for chunk in (0..quota).collect::<Vec<_>>().chunks(1000) {
            let t = prior_samples(
                params,
                &chunk.iter().map(|&i| ys[i]).collect::<Vec<_>>(),
                &chunk.iter().map(|&i| tags[i]).collect::<Vec<_>>(),
                key.tag("augment"),
            )?;
            for (j, &i) in chunk.iter().enumerate() {
                state.add_generated(t.row(j), ys[i])?;
            }
        }
        generated_unpaired = quota;
    }

    if cfg.classifier_mode == ClassifierMode::Reinitialize {
        params.reset_classifier(key.tag("reinitialize"))?;
    }
    train_classifier(
        params,
        &state.labeled,
        cfg.classifier_epochs,
        cfg.batch_size,
        key.tag("classifier"),
    )?;
    record.test_accuracy = test_accuracy(&params.classifier, &state.test_x, &state.test_y)?;

    let after = Counts::of(state);
    check_bookkeeping(strategy, before, after, acquired.len(), generated_unpaired, state)?;
    diag.after = Some(after);
    record.labeled_count = after.labeled_real;
    record.generated_count = after.generated;
    record.pool_count = after.pool;
    if cfg.record_wall_time {
        record.wall_seconds = started.elapsed().as_secs_f64();
    }
    record.validate()?;
    Ok((record, diag))
}

fn check_bookkeeping(
    strategy: Strategy,
    before: Counts,
    after: Counts,
    acquired: usize,
    generated: usize,
    state: &DatasetState,
) -> Result<()> {
    let (dr, dg, dp) = expected_delta(strategy, acquired, generated);
    let got = (
        after.labeled_real as isize - before.labeled_real as isize,
        after.generated as isize - before.generated as isize,
        after.pool as isize - before.pool as isize,
    );
    if got != (dr, dg, dp) {
        return Err(Error::Invariant(format!(
            "{strategy}: (real, generated, pool) changed by {got:?}, expected {:?}",
            (dr, dg, dp)
        )));
    }
    if state.labeled.len() != after.labeled_total() {
        return Err(Error::Invariant("labeled set size disagrees with its counts".into()));
    }
    if after.labeled_real + after.pool != state.original_train_count {
        return Err(Error::Invariant(format!(
            "{} real labeled + {} pool != {} training samples",
            after.labeled_real, after.pool, state.original_train_count
        )));
    }
    Ok(())
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub params: ParamStore,
    pub state: DatasetState,
    pub stopped_early: bool,
}

/// True when the best accuracy of the last `window` rows improves on the
/// best before them by less than `min_delta`.
pub fn plateaued(records: &[MetricsRecord], window: usize, min_delta: f64) -> bool {
    if records.len() <= window {
        return false;
    }
    let (head, tail) = records.split_at(records.len() - window);
    let best = |rs: &[MetricsRecord]| rs.iter().map(|r| r.test_accuracy).fold(f64::NEG_INFINITY, f64::max);
    best(tail) - best(head) < min_delta
}

/// Split, pretrain, then `iterations` rounds. Each record is handed to
/// `on_record` as soon as it exists so partial results survive an abort.
pub fn run_strategy(
    cfg: &ExperimentConfig,
    dataset: &RawDataset,
    mut on_record: impl FnMut(&MetricsRecord) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let root = StreamKey::root(cfg.seed);
    let mut state = split(dataset, cfg.n_init_labeled, cfg.n_test, cfg.seed, cfg.stratified)?;
    if cfg.strategy == Strategy::AlPmda && state.meta.grid.is_none() {
        return Err(Error::InvalidArgument(
            "al_pmda needs image data with a declared grid shape".into(),
        ));
    }
    let net = cfg.net_config(state.meta.dim, state.meta.classes);
    let mut params = ParamStore::init(&net, cfg.optimizer_config(), root.tag("params"))?;
    if cfg.strategy == Strategy::BdaFull {
        while let Some(&id) = state.pool.ids().first() {
            state.acquire(id)?;
        }
    }
    pretrain_classifier(
        &mut params,
        &state.labeled,
        cfg.pretrain_epochs,
        cfg.batch_size,
        root.tag("pretrain"),
    )?;
    let counts = Counts::of(&state);
    let first = MetricsRecord {
        iteration: 0,
        labeled_count: counts.labeled_real,
        generated_count: counts.generated,
        pool_count: counts.pool,
        test_accuracy: test_accuracy(&params.classifier, &state.test_x, &state.test_y)?,
        wall_seconds: if cfg.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
        ..Default::default()
    };
    on_record(&first)?;
    let mut records = vec![first];
    let mut diagnostics = Vec::new();
    let mut stopped_early = false;
    for it in 1..=cfg.iterations {
        let (record, diag) =
            acquisition_iteration(&mut state, &mut params, cfg, it, root.tag("iteration").index(it as u64))?;
        on_record(&record)?;
        records.push(record);
        diagnostics.push(diag);
        if cfg.early_stop && plateaued(&records, cfg.early_stop_window, cfg.early_stop_min_delta) {
            stopped_early = true;
            break;
        }
    }
    Ok(RunOutput {
        records,
        diagnostics,
        params,
        state,
        stopped_early,
    })
}
