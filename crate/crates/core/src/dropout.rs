//! Inverted dropout.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    TrainStochastic,
    McSample,
    DeterministicOff,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: DropoutMode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(DropoutSpec { rate, mode })
    }

    pub fn off() -> Self {
        DropoutSpec {
            rate: 0.0,
            mode: DropoutMode::DeterministicOff,
        }
    }

    pub fn is_active(&self) -> bool {
        self.mode != DropoutMode::DeterministicOff && self.rate > 0.0
    }
}

/// Draws a keep-mask scaled by `1 / (1 - rate)` into `out`, one uniform per
/// unit, in row-major order.
pub(crate) fn fill_mask(out: &mut [f64], rate: f64, rng: &mut RngStream) {
    let keep = 1.0 / (1.0 - rate);
    for m in out.iter_mut() {
        *m = if rng.uniform() < rate { 0.0 } else { keep };
    }
}

/// The multiplicative mask for `spec`, or `None` when dropout is the identity.
pub fn mask(shape: &[usize], spec: DropoutSpec, rng: &mut RngStream) -> Result<Option<Tensor>> {
    if !(0.0..1.0).contains(&spec.rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {}",
            spec.rate
        )));
    }
    if !spec.is_active() {
        return Ok(None);
    }
    let mut m = Tensor::zeros(shape);
    fill_mask(m.data_mut(), spec.rate, rng);
    Ok(Some(m))
}

pub fn dropout_apply(x: &Tensor, spec: DropoutSpec, rng: &mut RngStream) -> Result<Tensor> {
    Ok(match mask(x.shape(), spec, rng)? {
        Some(m) => x.zip(&m, |a, b| a * b),
        None => x.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn x() -> Tensor {
        Tensor::new(vec![4, 5], (0..20).map(|i| i as f64 * 0.1 + 0.3).collect()).unwrap()
    }

    #[test]
    fn off_is_identity() {
        let mut rng = StreamKey::root(1).stream();
        let spec = DropoutSpec::new(0.5, DropoutMode::DeterministicOff).unwrap();
        assert_eq!(dropout_apply(&x(), spec, &mut rng).unwrap(), x());
    }

    #[test]
    fn zero_rate_is_identity_in_every_mode() {
        for mode in [
            DropoutMode::TrainStochastic,
            DropoutMode::McSample,
            DropoutMode::DeterministicOff,
        ] {
            let mut rng = StreamKey::root(2).stream();
            let spec = DropoutSpec::new(0.0, mode).unwrap();
            assert_eq!(dropout_apply(&x(), spec, &mut rng).unwrap(), x());
        }
    }

    #[test]
    fn replayed_stream_gives_same_mask() {
        let spec = DropoutSpec::new(0.5, DropoutMode::McSample).unwrap();
        let key = StreamKey::root(3).tag("mc");
        let a = dropout_apply(&x(), spec, &mut key.stream()).unwrap();
        let b = dropout_apply(&x(), spec, &mut key.stream()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn survivors_are_rescaled() {
        let spec = DropoutSpec::new(0.5, DropoutMode::TrainStochastic).unwrap();
        let out = dropout_apply(&x(), spec, &mut StreamKey::root(4).stream()).unwrap();
        for (o, i) in out.data().iter().zip(x().data()) {
            assert!(*o == 0.0 || (*o - 2.0 * i).abs() < 1e-15);
        }
    }

    #[test]
    fn rate_one_rejected() {
        assert!(DropoutSpec::new(1.0, DropoutMode::McSample).is_err());
        let bad = DropoutSpec {
            rate: 1.0,
            mode: DropoutMode::McSample,
        };
        assert!(dropout_apply(&x(), bad, &mut StreamKey::root(0).stream()).is_err());
    }
}
