//! Radial-basis-function concentration field and the binary measurement model.
//!
//! The field is a superposition of isotropic Gaussian bumps. A noisy reading
//! is the field value plus Gaussian sensor noise, thresholded into a single
//! bit. The same basis layout is shared by the ground-truth field and the
//! estimator's template; only the gains (and the noise scale) differ.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::scalar::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fixed layout of Gaussian basis functions: centers and squared widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisLayout<F> {
    pub centers: Vec<Vec2<F>>,
    /// Squared widths (the exponent denominator), one per center.
    pub widths: Vec<F>,
}

impl<F: Real> BasisLayout<F> {
    pub fn new(centers: Vec<Vec2<F>>, widths: Vec<F>) -> Result<Self> {
        if centers.len() != widths.len() {
            return Err(Error::Config(format!(
                "basis layout: {} centers vs {} widths",
                centers.len(),
                widths.len()
            )));
        }
        if widths.iter().any(|w| *w <= F::zero()) {
            return Err(Error::Config("basis widths must be positive".into()));
        }
        Ok(Self { centers, widths })
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Basis activations at a point: exp(-||mu_i - l||^2 / sigma_i^2).
    pub fn activations(&self, l: Vec2<F>) -> Vec<F> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(&mu, &w)| (-(mu - l).norm_sq() / w).exp())
            .collect()
    }

    /// Field value for a given gain vector.
    pub fn eval(&self, gains: &[F], l: Vec2<F>) -> F {
        debug_assert_eq!(gains.len(), self.count());
        self.centers
            .iter()
            .zip(&self.widths)
            .zip(gains)
            .map(|((&mu, &w), &g)| g * (-(mu - l).norm_sq() / w).exp())
            .sum()
    }
}

/// Uniform sqrt(count) x sqrt(count) lattice of basis centers, inset half a
/// cell from each arena edge. Centers are ordered row-major by y then x.
///
/// Widths default to (min arena dimension / sqrt(count))^2 so that
/// neighboring bases overlap at about exp(-1).
pub fn make_basis_grid<F: Real>(arena: Rect<F>, count: usize) -> Result<BasisLayout<F>> {
    if arena.width() <= F::zero() || arena.height() <= F::zero() {
        return Err(Error::Config("arena must have positive extent".into()));
    }
    let side = (count as f64).sqrt().round() as usize;
    if side == 0 || side * side != count {
        return Err(Error::Config(format!(
            "basis count {count} is not a perfect square"
        )));
    }
    let side_f = F::from_usize(side).unwrap();
    let sx = arena.width() / side_f;
    let sy = arena.height() / side_f;
    let mut centers = Vec::with_capacity(count);
    for iy in 0..side {
        for ix in 0..side {
            let half = F::lit(0.5);
            centers.push(Vec2::new(
                arena.min.x + sx * (F::from_usize(ix).unwrap() + half),
                arena.min.y + sy * (F::from_usize(iy).unwrap() + half),
            ));
        }
    }
    let w = arena.width().min(arena.height()) / side_f;
    BasisLayout::new(centers, vec![w * w; count])
}

/// A concrete gas field: layout, gains, sensor noise scale, and the binary
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasFieldSpec<F> {
    pub layout: BasisLayout<F>,
    pub gains: Vec<F>,
    pub noise_std: F,
    pub threshold: F,
}

impl<F: Real> GasFieldSpec<F> {
    pub fn new(layout: BasisLayout<F>, gains: Vec<F>, noise_std: F, threshold: F) -> Result<Self> {
        if gains.len() != layout.count() {
            return Err(Error::Config(format!(
                "{} gains for {} basis functions",
                gains.len(),
                layout.count()
            )));
        }
        if noise_std <= F::zero() {
            return Err(Error::Config("noise_std must be positive".into()));
        }
        if threshold <= F::zero() {
            return Err(Error::Config("threshold must be positive".into()));
        }
        Ok(Self {
            layout,
            gains,
            noise_std,
            threshold,
        })
    }
}

/// One thresholded sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryObservation<F> {
    pub location: Vec2<F>,
    pub bit: u8,
    pub time: F,
    pub agent_id: usize,
}

/// Noiseless concentration at a point.
pub fn eval_field<F: Real>(spec: &GasFieldSpec<F>, l: Vec2<F>) -> F {
    spec.layout.eval(&spec.gains, l)
}

/// Concentration plus one Gaussian noise draw.
pub fn sample_measurement<F: Real>(spec: &GasFieldSpec<F>, l: Vec2<F>, rng: &mut impl Rng) -> F {
    let z = F::standard_normal(rng);
    eval_field(spec, l) + spec.noise_std * z
}

/// Strict threshold: the boundary value maps to 0.
pub fn binarize<F: Real>(y: F, tau: F) -> u8 {
    if y > tau {
        1
    } else {
        0
    }
}
