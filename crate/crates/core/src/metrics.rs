//! Evaluation metrics: lattice MSE / ANMSE, estimated-source extraction,
//! source position error, coverage percentage, WHCA, and mean ± 95% CI
//! summaries.

use crate::coverage::OccupancyGrid;
use crate::error::{Error, Result};
use crate::estimator::FieldEstimate;
use crate::field::{BasisLayout, GasFieldSpec};
use crate::geom::{smallest_enclosing_circle, Rect, Vec2};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Default evaluation lattice spacing, meters.
pub const MSE_LATTICE_STEP: f64 = 0.25;

/// Uniform lattice of evaluation points covering a rectangle, row-major by y
/// then x, nodes at half-step offsets.
pub fn lattice_points<F: Real>(area: Rect<F>, step: F) -> Vec<Vec2<F>> {
    let nx = (area.width() / step).to_f64_lossy().ceil().max(1.0) as usize;
    let ny = (area.height() / step).to_f64_lossy().ceil().max(1.0) as usize;
    let half = F::lit(0.5);
    let mut pts = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            pts.push(Vec2::new(
                area.min.x + step * (F::from_usize(ix).unwrap() + half),
                area.min.y + step * (F::from_usize(iy).unwrap() + half),
            ));
        }
    }
    pts
}

/// Lattice mean squared error between an estimate (on the template layout)
/// and the true field.
pub fn mse<F: Real>(
    estimate: &FieldEstimate<F>,
    template: &BasisLayout<F>,
    truth: &GasFieldSpec<F>,
    area: Rect<F>,
    step: F,
) -> F {
    let pts = lattice_points(area, step);
    let mut acc = F::zero();
    for &p in &pts {
        let e = template.eval(&estimate.gains_hat, p);
        let t = truth.layout.eval(&truth.gains, p);
        acc = acc + (e - t) * (e - t);
    }
    acc / F::from_usize(pts.len()).unwrap()
}

/// Lattice MSE with activations and truth values precomputed once, for
/// evaluating many estimates against the same template and truth.
pub struct MseEvaluator<F> {
    /// Row-major [point][basis] activations of the template.
    acts: Vec<F>,
    truth_vals: Vec<F>,
    n_basis: usize,
}

impl<F: Real> MseEvaluator<F> {
    pub fn new(template: &BasisLayout<F>, truth: &GasFieldSpec<F>, area: Rect<F>, step: F) -> Self {
        let pts = lattice_points(area, step);
        let n_basis = template.count();
        let mut acts = Vec::with_capacity(pts.len() * n_basis);
        let mut truth_vals = Vec::with_capacity(pts.len());
        for &p in &pts {
            acts.extend(template.activations(p));
            truth_vals.push(truth.layout.eval(&truth.gains, p));
        }
        Self {
            acts,
            truth_vals,
            n_basis,
        }
    }

    pub fn mse(&self, estimate: &FieldEstimate<F>) -> F {
        let mut acc = F::zero();
        for (i, &t) in self.truth_vals.iter().enumerate() {
            let row = &self.acts[i * self.n_basis..(i + 1) * self.n_basis];
            let mut e = F::zero();
            for (&a, &g) in row.iter().zip(&estimate.gains_hat) {
                e = e + a * g;
            }
            acc = acc + (e - t) * (e - t);
        }
        acc / F::from_usize(self.truth_vals.len()).unwrap()
    }
}

/// Double average of per-agent, per-epoch MSE values. Ragged logs are
/// averaged over the epochs each agent actually has.
pub fn anmse<F: Real>(per_agent_mse: &[Vec<F>]) -> F {
    let mut total = F::zero();
    let mut count = 0usize;
    for agent in per_agent_mse {
        for &m in agent {
            total = total + m;
            count += 1;
        }
    }
    if count == 0 {
        F::zero()
    } else {
        total / F::from_usize(count).unwrap()
    }
}

/// Cumulative ANMSE curve: entry `e` is the double average over all agents
/// and epochs `0..=e`. Agents must have equal-length logs.
pub fn anmse_prefix<F: Real>(per_agent_mse: &[Vec<F>]) -> Vec<F> {
    let epochs = per_agent_mse.iter().map(|a| a.len()).min().unwrap_or(0);
    let agents = F::from_usize(per_agent_mse.len().max(1)).unwrap();
    let mut out = Vec::with_capacity(epochs);
    let mut acc = F::zero();
    for e in 0..epochs {
        for agent in per_agent_mse {
            acc = acc + agent[e];
        }
        out.push(acc / (agents * F::from_usize(e + 1).unwrap()));
    }
    out
}

/// Argmax of the estimated field over a lattice; ties go to the lowest
/// lattice index. Returns (point, peak value, degenerate flag) — the flag is
/// set when the field is flat over the lattice.
pub fn estimated_source<F: Real>(
    estimate: &FieldEstimate<F>,
    template: &BasisLayout<F>,
    area: Rect<F>,
    step: F,
) -> (Vec2<F>, F, bool) {
    let pts = lattice_points(area, step);
    let mut best = pts[0];
    let mut best_v = F::neg_infinity();
    let mut min_v = F::infinity();
    for &p in &pts {
        let v = template.eval(&estimate.gains_hat, p);
        if v > best_v {
            best_v = v;
            best = p;
        }
        min_v = min_v.min(v);
    }
    let degenerate = (best_v - min_v).abs() < F::lit(1e-12);
    (best, best_v, degenerate)
}

/// Euclidean distance between the estimated and true source positions.
pub fn source_error<F: Real>(est: Vec2<F>, truth: Vec2<F>) -> F {
    est.dist(truth)
}

/// Coverage bookkeeping over the planner grid: a free cell counts as
/// directly covered when a robot's position enters it, and indirectly
/// covered when it falls within the formation footprint radius of a robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTracker {
    width: usize,
    height: usize,
    free: Vec<bool>,
    direct: Vec<bool>,
    indirect: Vec<bool>,
}

impl CoverageTracker {
    pub fn new<F: Real>(grid: &OccupancyGrid<F>) -> Self {
        let mut free = vec![false; grid.width * grid.height];
        for iy in 0..grid.height {
            for ix in 0..grid.width {
                free[iy * grid.width + ix] = grid.is_free(ix, iy);
            }
        }
        Self {
            width: grid.width,
            height: grid.height,
            direct: vec![false; free.len()],
            indirect: vec![false; free.len()],
            free,
        }
    }

    /// Record one robot position with its formation footprint radius.
    pub fn record<F: Real>(&mut self, grid: &OccupancyGrid<F>, pos: Vec2<F>, footprint: F) {
        if let Some((ix, iy)) = grid.cell_of(pos) {
            if self.free[iy * self.width + ix] {
                self.direct[iy * self.width + ix] = true;
            }
        }
        let reach = (footprint / grid.cell_size).to_f64_lossy().ceil() as isize + 1;
        let (cx, cy) = match grid.cell_of(pos) {
            Some(c) => (c.0 as isize, c.1 as isize),
            None => return,
        };
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (ix, iy) = (cx + dx, cy + dy);
                if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
                    continue;
                }
                let (ix, iy) = (ix as usize, iy as usize);
                if !self.free[iy * self.width + ix] {
                    continue;
                }
                let center = grid.cell_rect(ix, iy).center();
                if center.dist(pos) <= footprint {
                    self.indirect[iy * self.width + ix] = true;
                }
            }
        }
    }

    fn counts(&self) -> (usize, usize, usize) {
        let free = self.free.iter().filter(|f| **f).count();
        let direct = (0..self.free.len())
            .filter(|&i| self.free[i] && self.direct[i])
            .count();
        let either = (0..self.free.len())
            .filter(|&i| self.free[i] && (self.direct[i] || self.indirect[i]))
            .count();
        (free, direct, either)
    }

    /// Total covered fraction of free cells, in percent.
    pub fn percentage(&self) -> f64 {
        let (free, _, either) = self.counts();
        if free == 0 {
            0.0
        } else {
            100.0 * either as f64 / free as f64
        }
    }

    /// (direct, indirect) percentages; they partition the total.
    pub fn split_percentage(&self) -> (f64, f64) {
        let (free, direct, either) = self.counts();
        if free == 0 {
            return (0.0, 0.0);
        }
        let d = 100.0 * direct as f64 / free as f64;
        (d, 100.0 * either as f64 / free as f64 - d)
    }
}

/// Width of the highest-concentration area: diameter of the smallest circle
/// enclosing all lattice points whose estimated value meets `level`.
pub fn whca<F: Real>(
    estimate: &FieldEstimate<F>,
    template: &BasisLayout<F>,
    area: Rect<F>,
    step: F,
    level: F,
) -> F {
    let pts: Vec<Vec2<F>> = lattice_points(area, step)
        .into_iter()
        .filter(|&p| template.eval(&estimate.gains_hat, p) >= level)
        .collect();
    if pts.is_empty() {
        return F::zero();
    }
    let (_, r) = smallest_enclosing_circle(&pts);
    r * F::lit(2.0)
}

/// Two-sided 97.5% Student-t quantiles for small samples (df 1..=30), then
/// the normal limit.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile_975(df: usize) -> f64 {
    if df == 0 {
        f64::NAN
    } else if df <= 30 {
        T_975[df - 1]
    } else {
        1.960
    }
}

/// Mean and 95% confidence half-width of a sample (Student-t).
pub fn mean_ci95(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Config("empty sample for CI".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = t_quantile_975(n - 1) * (var / n as f64).sqrt();
    Ok((mean, half))
}
