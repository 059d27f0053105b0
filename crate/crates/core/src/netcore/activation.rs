use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Element-wise non-linearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    /// Exact form `z Φ(z)` with the Gaussian CDF.
    Gelu,
    Identity,
}

impl Activation {
    pub fn leaky(slope: f64) -> Self {
        Activation::LeakyRelu { slope }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Activation::LeakyRelu { slope } if !(slope.is_finite() && slope >= 0.0) => Err(
                crate::Error::invalid("activation", format!("leaky slope {slope} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Gelu => z * gaussian_cdf(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with the fixed subgradient choice at the kink: 0 for ReLU,
    /// the negative slope for LeakyReLU.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Gelu => gaussian_cdf(z) + z * (-0.5 * z * z).exp() / (2.0 * PI).sqrt(),
            Activation::Identity => 1.0,
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self, Activation::Gelu)
    }

    /// Whether the activation bends anywhere. Identity (and a LeakyReLU with
    /// slope 1) contribute no boundaries to the partition.
    pub fn has_kink(&self) -> bool {
        match *self {
            Activation::Relu | Activation::Gelu => true,
            Activation::LeakyRelu { slope } => slope != 1.0,
            Activation::Identity => false,
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::LeakyRelu { .. } => 1,
            Activation::Gelu => 2,
            Activation::Identity => 3,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            Activation::Gelu => write!(f, "gelu"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

#[inline]
fn gaussian_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kink_subgradients() {
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::leaky(0.1).derivative(0.0), 0.1);
        assert_eq!(Activation::leaky(0.1).apply(-2.0), -0.2);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
    }

    #[test]
    fn gelu_matches_reference_values() {
        // z * Phi(z) from tabulated normal CDF values.
        assert!((Activation::Gelu.apply(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((Activation::Gelu.apply(-1.0) + 0.158_655_253_931_457_05).abs() < 1e-15);
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        assert_eq!(Activation::Gelu.derivative(0.0), 0.5);
    }

    #[test]
    fn gelu_derivative_matches_central_difference() {
        for &z in &[-3.0, -0.7, 0.2, 1.5, 4.0] {
            let h = 1e-6;
            let fd = (Activation::Gelu.apply(z + h) - Activation::Gelu.apply(z - h)) / (2.0 * h);
            assert!((fd - Activation::Gelu.derivative(z)).abs() < 1e-9, "z={z}");
        }
    }

    #[test]
    fn negative_leaky_slope_rejected() {
        assert!(Activation::leaky(-0.1).validate().is_err());
        assert!(Activation::leaky(f64::NAN).validate().is_err());
        assert!(Activation::leaky(0.0).validate().is_ok());
    }
}
