//! Scalar abstraction for the numeric core.
//!
//! All field, estimator, planning, and control math is generic over [`Real`],
//! which is implemented for `f32` and `f64`. The concrete aliases used by the
//! simulator and CLI live at the crate root.

use rand::Rng;
use rand_distr::uniform::SampleUniform;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar: f32 or f64.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::FloatConst
    + SampleUniform
    + Serialize
    + DeserializeOwned
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// One standard normal draw at this precision.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f32, _>(StandardNormal)
    }
}

impl Real for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f64, _>(StandardNormal)
    }
}

/// Standard normal CDF via the complementary error function.
pub fn norm_cdf<F: Real>(x: F) -> F {
    F::lit(0.5) * erfc(-x / F::SQRT_2())
}

/// Complementary error function, near machine precision for f64.
///
/// Maclaurin series for small arguments, Lentz continued fraction otherwise
/// (Abramowitz & Stegun 7.1.5 / 7.1.14).
pub fn erfc<F: Real>(x: F) -> F {
    let z = x.abs();
    let res = if z > F::lit(26.0) {
        F::zero()
    } else if z < F::lit(2.0) {
        let mut term = z * F::lit(2.0) / F::PI().sqrt();
        let mut sum = term;
        let mut n = 1u32;
        loop {
            let nf = F::from_u32(n).unwrap();
            term = term * (-z * z) / nf;
            let add = term / (F::lit(2.0) * nf + F::one());
            sum = sum + add;
            if add.abs() < sum.abs() * F::epsilon() || n > 200 {
                break;
            }
            n += 1;
        }
        F::one() - sum
    } else {
        // erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
        let tiny = F::min_positive_value();
        let mut f = tiny;
        let mut c = f;
        let mut d = F::zero();
        let mut j = 0u32;
        loop {
            let a = if j == 0 {
                F::one()
            } else {
                F::from_u32(j).unwrap() * F::lit(0.5)
            };
            d = z + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = z + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = F::one() / d;
            let delta = c * d;
            f = f * delta;
            if (delta - F::one()).abs() < F::epsilon() || j > 300 {
                break;
            }
            j += 1;
        }
        (-z * z).exp() / F::PI().sqrt() * f
    };
    let res = res.max(F::zero()).min(F::one());
    if x >= F::zero() {
        res
    } else {
        F::lit(2.0) - res
    }
}
