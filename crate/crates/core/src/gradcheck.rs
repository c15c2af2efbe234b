//! Central finite-difference checks of the tape's gradients.

use crate::dropout::{DropoutMode, DropoutSpec};
use crate::error::{Error, Result};
use crate::generative::JointGraph;
use crate::nets::{NetConfig, OptimizerConfig, ParamGroup, ParamStore};
use crate::rng::StreamKey;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Step used by the suite.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Max over coordinates of `|ad - fd| / max(1, |fd|)`.
///
/// `f` returns the scalar value at a point and its autodiff gradient. Only
/// the value is used while probing.
pub fn grad_check<F>(mut f: F, point: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let (v0, grad) = f(point)?;
    if !v0.is_finite() {
        return Err(Error::NonFinite("grad_check value at point".into()));
    }
    if grad.len() != point.len() {
        return Err(Error::shape(
            "grad_check",
            format!("{} gradients for {} coordinates", grad.len(), point.len()),
        ));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let (hi, _) = f(&x)?;
        x[i] = orig - step;
        let (lo, _) = f(&x)?;
        x[i] = orig;
        if !(hi.is_finite() && lo.is_finite()) {
            return Err(Error::NonFinite(format!("grad_check probe at coordinate {i}")));
        }
        let fd = (hi - lo) / (2.0 * step);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}

/// One named entry of the suite.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub coordinates: usize,
    pub max_error: f64,
}

fn random_tensor(shape: &[usize], key: StreamKey, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let mut rng = key.stream();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| lo + (hi - lo) * rng.uniform()).collect())
}

/// Checks `sum(op(x) * w)` for a random weighting `w`, differentiating
/// with respect to every leaf.
fn check_op<F>(name: &str, inputs: Vec<Tensor>, key: StreamKey, step: f64, op: F) -> Result<CheckResult>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let shapes: Vec<Vec<usize>> = inputs.iter().map(|t| t.shape().to_vec()).collect();
    let point: Vec<f64> = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
    let f = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let mut offset = 0;
        let mut leaves = Vec::with_capacity(shapes.len());
        for s in &shapes {
            let n: usize = s.iter().product();
            leaves.push(tape.param(Tensor::new(s.clone(), flat[offset..offset + n].to_vec())?));
            offset += n;
        }
        let out = op(&mut tape, &leaves)?;
        let root = if tape.value(out).len() == 1 {
            out
        } else {
            let w = random_tensor(tape.value(out).shape(), key.tag("weights"), -1.0, 1.0);
            let weighted = tape.mul_const(out, w)?;
            tape.sum(weighted)?
        };
        let value = tape.value(root).item();
        let grads = tape.backward(root)?;
        let g = leaves.iter().flat_map(|&l| grads.get(l).into_data()).collect();
        Ok((value, g))
    };
    Ok(CheckResult {
        name: name.to_string(),
        coordinates: point.len(),
        max_error: grad_check(f, &point, step)?,
    })
}

/// Checks `objective` with respect to one parameter group of a store.
fn check_group<G, F>(name: &str, store: &ParamStore, step: f64, group: G, objective: F) -> Result<CheckResult>
where
    G: Fn(&mut ParamStore) -> &mut dyn ParamGroup,
    F: Fn(&ParamStore) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = store.clone();
    let point: Vec<f64> = group(&mut probe)
        .params()
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect();
    let f = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut s = store.clone();
        let mut offset = 0;
        for p in group(&mut s).params_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        objective(&s)
    };
    Ok(CheckResult {
        name: name.to_string(),
        coordinates: point.len(),
        max_error: grad_check(f, &point, step)?,
    })
}

fn flatten(ts: Vec<Tensor>) -> Vec<f64> {
    ts.into_iter().flat_map(Tensor::into_data).collect()
}

fn suite_config() -> NetConfig {
    NetConfig {
        input_dim: 5,
        classes: 3,
        classifier_hidden: vec![6, 4],
        dropout_rate: 0.25,
        encoder_hidden: 4,
        latent_dim: 2,
        embed_dim: 2,
        generator_hidden: 5,
        discriminator_hidden: 4,
    }
}

fn primitive_checks(key: StreamKey, step: f64) -> Result<Vec<CheckResult>> {
    let r = |tag: &str, shape: &[usize], lo: f64, hi: f64| random_tensor(shape, key.tag(tag), lo, hi);
    let k = |tag: &str| key.tag(tag);
    let labels = [2usize, 0, 1];
    let mut out = vec![
        check_op(
            "matmul",
            vec![r("a", &[3, 4], -1.0, 1.0), r("b", &[4, 2], -1.0, 1.0)],
            k("matmul"),
            step,
            |t, v| t.matmul(v[0], v[1]),
        )?,
        check_op(
            "add_bias",
            vec![r("a", &[3, 4], -1.0, 1.0), r("b", &[4], -1.0, 1.0)],
            k("add_bias"),
            step,
            |t, v| t.add_bias(v[0], v[1]),
        )?,
        check_op(
            "affine",
            vec![
                r("a", &[3, 4], -1.0, 1.0),
                r("w", &[4, 2], -1.0, 1.0),
                r("b", &[2], -1.0, 1.0),
            ],
            k("affine"),
            step,
            |t, v| t.affine(v[0], v[1], v[2]),
        )?,
        check_op(
            "add",
            vec![r("a", &[2, 3], -1.0, 1.0), r("b", &[2, 3], -1.0, 1.0)],
            k("add"),
            step,
            |t, v| t.add(v[0], v[1]),
        )?,
        check_op(
            "sub",
            vec![r("a", &[2, 3], -1.0, 1.0), r("b", &[2, 3], -1.0, 1.0)],
            k("sub"),
            step,
            |t, v| t.sub(v[0], v[1]),
        )?,
        check_op(
            "mul",
            vec![r("a", &[2, 3], -1.0, 1.0), r("b", &[2, 3], -1.0, 1.0)],
            k("mul"),
            step,
            |t, v| t.mul(v[0], v[1]),
        )?,
        check_op(
            "mul_const",
            vec![r("a", &[2, 3], -1.0, 1.0)],
            k("mul_const"),
            step,
            |t, v| t.mul_const(v[0], random_tensor(&[2, 3], StreamKey::root(7), -2.0, 2.0)),
        )?,
        check_op("scale", vec![r("a", &[2, 3], -1.0, 1.0)], k("scale"), step, |t, v| {
            t.scale(v[0], -1.7)
        })?,
        check_op(
            "add_scalar",
            vec![r("a", &[2, 3], -1.0, 1.0)],
            k("add_scalar"),
            step,
            |t, v| t.add_scalar(v[0], 0.3),
        )?,
        check_op("tanh", vec![r("a", &[2, 3], -2.0, 2.0)], k("tanh"), step, |t, v| {
            t.tanh(v[0])
        })?,
        // Kept away from the kink at 0.
        check_op(
            "relu",
            vec![r("a", &[2, 3], 0.1, 1.0), r("b", &[2, 3], -1.0, -0.1)],
            k("relu"),
            step,
            |t, v| {
                let a = t.relu(v[0])?;
                let b = t.relu(v[1])?;
                t.add(a, b)
            },
        )?,
        check_op(
            "sigmoid",
            vec![r("a", &[2, 3], -3.0, 3.0)],
            k("sigmoid"),
            step,
            |t, v| t.sigmoid(v[0]),
        )?,
        check_op("exp", vec![r("a", &[2, 3], -1.0, 1.0)], k("exp"), step, |t, v| {
            t.exp(v[0])
        })?,
        check_op("log", vec![r("a", &[2, 3], 0.5, 2.0)], k("log"), step, |t, v| {
            t.log(v[0])
        })?,
        check_op("clamp", vec![r("a", &[2, 3], 0.2, 0.8)], k("clamp"), step, |t, v| {
            t.clamp(v[0], 0.1, 0.9)
        })?,
        check_op(
            "softmax",
            vec![r("a", &[3, 4], -2.0, 2.0)],
            k("softmax"),
            step,
            |t, v| t.softmax(v[0]),
        )?,
        check_op(
            "log_softmax",
            vec![r("a", &[3, 4], -2.0, 2.0)],
            k("log_softmax"),
            step,
            |t, v| t.log_softmax(v[0]),
        )?,
        check_op(
            "cross_entropy",
            vec![r("a", &[3, 3], -2.0, 2.0)],
            k("cross_entropy"),
            step,
            |t, v| t.cross_entropy(v[0], &labels),
        )?,
        check_op("sum", vec![r("a", &[2, 3], -1.0, 1.0)], k("sum"), step, |t, v| {
            t.sum(v[0])
        })?,
        check_op("mean", vec![r("a", &[2, 3], -1.0, 1.0)], k("mean"), step, |t, v| {
            t.mean(v[0])
        })?,
        check_op(
            "concat_cols",
            vec![r("a", &[3, 2], -1.0, 1.0), r("b", &[3, 4], -1.0, 1.0)],
            k("concat_cols"),
            step,
            |t, v| t.concat_cols(v[0], v[1]),
        )?,
        check_op("embed", vec![r("a", &[3, 2], -1.0, 1.0)], k("embed"), step, |t, v| {
            t.embed(v[0], &[1, 1, 0, 2])
        })?,
        check_op(
            "reparameterize",
            vec![r("mu", &[3, 2], -1.0, 1.0), r("lv", &[3, 2], -1.0, 1.0)],
            k("reparameterize"),
            step,
            |t, v| t.reparameterize(v[0], v[1], random_tensor(&[3, 2], StreamKey::root(11), -2.0, 2.0)),
        )?,
        check_op(
            "dropout",
            vec![r("a", &[3, 4], -1.0, 1.0)],
            k("dropout"),
            step,
            |t, v| {
                let spec = DropoutSpec::new(0.4, DropoutMode::TrainStochastic)?;
                t.dropout(v[0], spec, &mut StreamKey::root(13).stream())
            },
        )?,
    ];
    for r in &mut out {
        r.name = format!("op/{}", r.name);
    }
    Ok(out)
}

/// Fixed inputs for the layer and joint checks.
struct SuiteInputs {
    x: Tensor,
    y: Vec<usize>,
    z: Tensor,
    eta: Tensor,
    w_latent: Tensor,
    w_log_var: Tensor,
    w_image: Tensor,
    mask_key: StreamKey,
    graph_key: StreamKey,
}

impl SuiteInputs {
    fn new(cfg: &NetConfig, key: StreamKey) -> Self {
        let rows = 4;
        let r = |shape: &[usize], tag: &str, lo: f64, hi: f64| random_tensor(shape, key.tag(tag), lo, hi);
        SuiteInputs {
            x: r(&[rows, cfg.input_dim], "x", 0.0, 1.0),
            y: (0..rows).map(|i| (i * 2) % cfg.classes).collect(),
            z: r(&[rows, cfg.latent_dim], "z", -1.0, 1.0),
            eta: r(&[rows, cfg.latent_dim], "eta", -1.5, 1.5),
            w_latent: r(&[rows, cfg.latent_dim], "w_latent", -1.0, 1.0),
            w_log_var: r(&[rows, cfg.latent_dim], "w_log_var", -1.0, 1.0),
            w_image: r(&[rows, cfg.input_dim], "w_image", -1.0, 1.0),
            mask_key: key.tag("masks"),
            graph_key: key.tag("graph"),
        }
    }
}

type Recorded = (Tape, Var, Vec<Var>);

fn classifier_graph(s: &ParamStore, inp: &SuiteInputs) -> Result<Recorded> {
    let mut tape = Tape::new();
    let vars = s.classifier.bind(&mut tape);
    let xv = tape.constant(inp.x.clone());
    let mut rng = inp.mask_key.stream();
    let logits = s
        .classifier
        .forward_tape(&mut tape, &vars, xv, DropoutMode::TrainStochastic, &mut rng)?;
    let loss = tape.cross_entropy(logits, &inp.y)?;
    Ok((tape, loss, vars))
}

fn encoder_graph(s: &ParamStore, inp: &SuiteInputs) -> Result<Recorded> {
    let mut tape = Tape::new();
    let vars = s.encoder.bind(&mut tape);
    let xv = tape.constant(inp.x.clone());
    let enc = s.encoder.forward_tape(&mut tape, &vars, xv, inp.eta.clone())?;
    let a = tape.mul_const(enc.z, inp.w_latent.clone())?;
    let b = tape.mul_const(enc.log_var, inp.w_log_var.clone())?;
    let ab = tape.add(a, b)?;
    let loss = tape.sum(ab)?;
    Ok((tape, loss, vars))
}

fn generator_graph(s: &ParamStore, inp: &SuiteInputs) -> Result<Recorded> {
    let mut tape = Tape::new();
    let vars = s.generator.bind(&mut tape);
    let zv = tape.constant(inp.z.clone());
    let out = s.generator.forward_tape(&mut tape, &vars, zv, &inp.y)?;
    let w = tape.mul_const(out, inp.w_image.clone())?;
    let loss = tape.sum(w)?;
    Ok((tape, loss, vars))
}

fn discriminator_graph(s: &ParamStore, inp: &SuiteInputs) -> Result<Recorded> {
    let mut tape = Tape::new();
    let vars = s.discriminator.bind(&mut tape);
    let xv = tape.constant(inp.x.clone());
    let out = s.discriminator.forward_tape(&mut tape, &vars, xv)?;
    let l = tape.log(out)?;
    let loss = tape.sum(l)?;
    Ok((tape, loss, vars))
}

fn joint_graph(s: &ParamStore, inp: &SuiteInputs) -> Result<JointGraph> {
    JointGraph::build(
        s,
        &inp.x,
        &inp.y,
        crate::generative::LossWeights::default(),
        DropoutMode::TrainStochastic,
        inp.graph_key,
    )
}

type GraphBuilder = fn(&ParamStore, &SuiteInputs) -> Result<Recorded>;

fn layer_graphs() -> [(&'static str, GraphBuilder); 4] {
    [
        ("layer/classifier_cross_entropy", classifier_graph),
        ("layer/encoder", encoder_graph),
        ("layer/generator", generator_graph),
        ("layer/discriminator", discriminator_graph),
    ]
}

/// Smallest ReLU input over every graph the suite differentiates.
fn suite_margin(store: &ParamStore, inp: &SuiteInputs) -> Result<f64> {
    let mut m = joint_graph(store, inp)?.tape.relu_margin();
    for (_, build) in layer_graphs() {
        m = m.min(build(store, inp)?.0.relu_margin());
    }
    Ok(m)
}

fn recorded_value_and_grads(rec: Recorded) -> Result<(f64, Vec<f64>)> {
    let (tape, root, vars) = rec;
    Ok((
        tape.value(root).item(),
        flatten(tape.backward_wrt(root, &vars)?.take_all(&vars)),
    ))
}

fn group_for(name: &str) -> fn(&mut ParamStore) -> &mut dyn ParamGroup {
    match name {
        "layer/classifier_cross_entropy" => |s| &mut s.classifier,
        "layer/encoder" => |s| &mut s.encoder,
        "layer/generator" => |s| &mut s.generator,
        _ => |s| &mut s.discriminator,
    }
}

fn layer_checks(store: &ParamStore, inp: &SuiteInputs, step: f64) -> Result<Vec<CheckResult>> {
    layer_graphs()
        .into_iter()
        .map(|(name, build)| {
            check_group(name, store, step, group_for(name), |s| {
                recorded_value_and_grads(build(s, inp)?)
            })
        })
        .collect()
}

fn joint_checks(store: &ParamStore, inp: &SuiteInputs, step: f64) -> Result<Vec<CheckResult>> {
    let vae_encoder = check_group(
        "vae_loss/encoder",
        store,
        step,
        |s| &mut s.encoder,
        |s| {
            let g = joint_graph(s, inp)?;
            Ok((g.losses.encoder_objective(), flatten(g.encoder_grads()?)))
        },
    )?;
    let vae_generator = check_group(
        "vae_loss/generator",
        store,
        step,
        |s| &mut s.generator,
        |s| {
            let g = joint_graph(s, inp)?;
            let vars = &g.players.generator;
            Ok((
                g.losses.encoder_objective(),
                flatten(g.tape.backward_wrt(g.encoder_objective, vars)?.take_all(vars)),
            ))
        },
    )?;
    let disc = check_group(
        "acgan/discriminator",
        store,
        step,
        |s| &mut s.discriminator,
        |s| {
            let g = joint_graph(s, inp)?;
            Ok((g.losses.acgan.discriminator, flatten(g.discriminator_grads()?)))
        },
    )?;
    let cls = check_group(
        "acgan/classifier",
        store,
        step,
        |s| &mut s.classifier,
        |s| {
            let g = joint_graph(s, inp)?;
            Ok((g.losses.acgan.classifier, flatten(g.classifier_grads()?)))
        },
    )?;
    let gen = check_group(
        "acgan/generator",
        store,
        step,
        |s| &mut s.generator,
        |s| {
            let g = joint_graph(s, inp)?;
            Ok((g.losses.generator_objective(), flatten(g.generator_grads()?)))
        },
    )?;
    Ok(vec![vae_encoder, vae_generator, disc, cls, gen])
}

/// Central differences need the probe interval to avoid ReLU kinks. Parameter
/// draws are screened until every ReLU input is at least this many steps
/// from zero.
const KINK_MARGIN_STEPS: f64 = 10.0;
const MAX_DRAWS: u64 = 1000;

/// Every primitive, every layer, the VAE loss and the three ACGAN player
/// objectives at small dimensions.
pub fn run_suite(seed: u64, step: f64) -> Result<Vec<CheckResult>> {
    let key = StreamKey::root(seed).tag("gradcheck");
    let cfg = suite_config();
    let inputs = SuiteInputs::new(&cfg, key.tag("inputs"));
    let mut store = None;
    for draw in 0..MAX_DRAWS {
        let candidate = ParamStore::init(&cfg, OptimizerConfig::default(), key.tag("params").index(draw))?;
        if suite_margin(&candidate, &inputs)? > KINK_MARGIN_STEPS * step {
            store = Some(candidate);
            break;
        }
    }
    let store = store.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no parameter draw keeps ReLU inputs {KINK_MARGIN_STEPS} steps from zero"
        ))
    })?;
    let mut out = primitive_checks(key.tag("ops"), step)?;
    out.extend(layer_checks(&store, &inputs, step)?);
    out.extend(joint_checks(&store, &inputs, step)?);
    Ok(out)
}

pub fn max_error(results: &[CheckResult]) -> f64 {
    results.iter().map(|r| r.max_error).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let f = |x: &[f64]| Ok((x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect()));
        assert!(grad_check(f, &[1.0, 2.0, 3.0], 1e-3).unwrap() < 1e-6);
    }

    #[test]
    fn constant_function() {
        let f = |x: &[f64]| Ok((4.0, vec![0.0; x.len()]));
        assert_eq!(grad_check(f, &[1.0, -2.0], 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![x[0]]));
        assert!(grad_check(f, &[3.0], 1e-3).unwrap() > 0.4);
    }

    #[test]
    fn rejects_bad_step_and_nonfinite() {
        let f = |x: &[f64]| Ok((x[0], vec![1.0]));
        assert!(grad_check(f, &[0.0], 0.0).is_err());
        let g = |x: &[f64]| Ok((x[0].ln(), vec![1.0 / x[0]]));
        assert!(grad_check(g, &[0.0005], 1e-3).is_err());
    }

    #[test]
    fn two_layer_softmax_ce() {
        let x = random_tensor(&[5, 4], StreamKey::root(1), -1.0, 1.0);
        let r = check_op(
            "mlp",
            vec![
                random_tensor(&[4, 6], StreamKey::root(2), -1.0, 1.0),
                random_tensor(&[6], StreamKey::root(3), -0.5, 0.5),
                random_tensor(&[6, 3], StreamKey::root(4), -1.0, 1.0),
                random_tensor(&[3], StreamKey::root(5), -0.5, 0.5),
            ],
            StreamKey::root(6),
            1e-3,
            |t, v| {
                let xv = t.constant(x.clone());
                let h = t.affine(xv, v[0], v[1])?;
                let h = t.tanh(h)?;
                let o = t.affine(h, v[2], v[3])?;
                t.cross_entropy(o, &[0, 1, 2, 1, 0])
            },
        )
        .unwrap();
        assert!(r.max_error < 1e-4, "{r:?}");
    }

    #[test]
    fn full_suite_passes() {
        let results = run_suite(0, DEFAULT_STEP).unwrap();
        for r in &results {
            assert!(r.max_error < 1e-4, "{r:?}");
            assert!(r.coordinates > 0);
        }
        assert!(results.len() >= 30);
    }
}
