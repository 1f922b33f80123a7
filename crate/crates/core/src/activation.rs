//! Activation functions, their derivatives, and derivative ranges.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    /// Saturating linear: clamp to `[0, 1]`.
    Satlin,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Tanh => math::tanh(x),
            Activation::Sigmoid => math::sigmoid(x),
            Activation::Satlin => x.clamp(0.0, 1.0),
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        matches!(
            self,
            Activation::Linear | Activation::Relu | Activation::LeakyRelu(_) | Activation::Satlin
        )
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, Activation::Linear | Activation::Tanh | Activation::Sigmoid)
    }

    /// Derivative; defined only for smooth activations.
    pub fn derivative(self, x: f64) -> Result<f64> {
        match self {
            Activation::Linear => Ok(1.0),
            Activation::Tanh => {
                let t = math::tanh(x);
                Ok(1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = math::sigmoid(x);
                Ok(s * (1.0 - s))
            }
            other => Err(Error::Unsupported(format!(
                "{} is not continuously differentiable",
                other.name()
            ))),
        }
    }

    /// Range of the derivative over an interval of pre-activations.
    ///
    /// Both tanh' and sigmoid' are even, peak at 0 and decrease in |x|.
    pub fn derivative_range(self, x: Interval) -> Result<Interval> {
        match self {
            Activation::Linear => Ok(Interval::point(1.0)),
            Activation::Tanh | Activation::Sigmoid => {
                let near = if x.lo <= 0.0 && x.hi >= 0.0 {
                    0.0
                } else {
                    x.lo.abs().min(x.hi.abs())
                };
                let far = x.lo.abs().max(x.hi.abs());
                let dmax = self.derivative(near)?;
                let dmin = self.derivative(far)?;
                let slack = 8.0 * f64::EPSILON;
                Ok(Interval::new(
                    math::down((dmin - slack).max(0.0)),
                    math::up(dmax + slack),
                ))
            }
            other => Err(Error::Unsupported(format!(
                "{} is not continuously differentiable",
                other.name()
            ))),
        }
    }

    /// Interval image; all supported activations are monotone non-decreasing.
    pub fn range(self, x: Interval) -> Interval {
        match self {
            Activation::Linear => x,
            _ => x.monotone(|v| self.eval(v)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Satlin => "satlin",
        }
    }
}

/// Activation of a whole layer: one function for every neuron, or one per neuron.
///
/// Per-neuron activations let a layer carry pass-through (linear) channels next
/// to nonlinear ones, which is how closed-loop plants and unrolled control
/// loops are encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerActivation {
    Uniform(Activation),
    PerNeuron(Vec<Activation>),
}

impl LayerActivation {
    #[inline]
    pub fn at(&self, i: usize) -> Activation {
        match self {
            LayerActivation::Uniform(a) => *a,
            LayerActivation::PerNeuron(v) => v[i],
        }
    }

    pub fn all(&self, n: usize) -> impl Iterator<Item = Activation> + '_ {
        (0..n).map(move |i| self.at(i))
    }

    pub fn is_linear(&self) -> bool {
        match self {
            LayerActivation::Uniform(a) => *a == Activation::Linear,
            LayerActivation::PerNeuron(v) => v.iter().all(|a| *a == Activation::Linear),
        }
    }

    pub(crate) fn validate(&self, neurons: usize) -> Result<()> {
        let check = |a: &Activation| -> Result<()> {
            if let Activation::LeakyRelu(s) = a {
                if !(*s > 0.0 && *s < 1.0) {
                    return Err(Error::InvalidArgument(format!("leaky relu slope {s} outside (0, 1)")));
                }
            }
            Ok(())
        };
        match self {
            LayerActivation::Uniform(a) => check(a),
            LayerActivation::PerNeuron(v) => {
                if v.len() != neurons {
                    return Err(Error::shape(format!(
                        "{} per-neuron activations for {} neurons",
                        v.len(),
                        neurons
                    )));
                }
                v.iter().try_for_each(check)
            }
        }
    }
}

impl From<Activation> for LayerActivation {
    fn from(a: Activation) -> Self {
        LayerActivation::Uniform(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivative_range_on_unit_interval() {
        let r = Activation::Tanh.derivative_range(Interval::new(-1.0, 1.0)).unwrap();
        let t1 = math::tanh(1.0);
        assert!((r.lo - (1.0 - t1 * t1)).abs() < 1e-14);
        assert!((r.hi - 1.0).abs() < 1e-14);
        assert!((r.lo - 0.419_974_341_614_026_1).abs() < 1e-12);
    }

    #[test]
    fn relu_has_no_derivative() {
        assert!(Activation::Relu.derivative(0.5).is_err());
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(Activation::Sigmoid.eval(0.0), 0.5);
        assert_eq!(Activation::Sigmoid.derivative(0.0).unwrap(), 0.25);
    }

    #[test]
    fn leaky_slope_validated() {
        assert!(LayerActivation::Uniform(Activation::LeakyRelu(1.5))
            .validate(1)
            .is_err());
        assert!(LayerActivation::Uniform(Activation::LeakyRelu(0.1)).validate(1).is_ok());
    }
}
