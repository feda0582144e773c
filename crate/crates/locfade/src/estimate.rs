//! Maximum-likelihood location estimators and their Monte Carlo evaluation.
//! Three objectives are supported: plain least squares, the log-penalized
//! objective that is exact under Nakagami fading, and its no-CSI variant.
//! Minimization is grid-then-refine: a coarse scan of a bounding box
//! followed by derivative-free pattern refinement, which tolerates the
//! multi-modal surfaces the log penalties produce.

use rayon::prelude::*;

use crate::channel::trial_rng;
use crate::toa::{sample_toa, ToaModel, ToaSample};
use crate::{distance, Error, Point, Result};

/// Which fit criterion the estimator minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Sum of squared residuals; ML in pure AWGN.
    AwgnLs,
    /// Sum of ln(r^2/(2 sigma^2 m) + 1); ML under the Nakagami marginal law.
    NakagamiMl,
    /// Sum of ln(r^2/sigma^2 + 1); ML with no channel state information.
    NoCsiMl,
}

/// Axis-aligned search region. In one dimension only the x extent is used.
#[derive(Clone, Copy, Debug)]
pub struct SearchBox {
    pub min: Point,
    pub max: Point,
}

/// Grid-then-refine controls. `bounding_box = None` derives the region from
/// the anchor bounding box inflated by a quarter of its width on every side;
/// `refine_tol = None` resolves to 1e-9 of the box width.
#[derive(Clone, Copy, Debug)]
pub struct SearchSpec {
    pub bounding_box: Option<SearchBox>,
    pub grid_points_per_axis: usize,
    pub refine_iterations: usize,
    pub refine_tol: Option<f64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            bounding_box: None,
            grid_points_per_axis: 101,
            refine_iterations: 60,
            refine_tol: None,
        }
    }
}

/// Full description of one estimator: objective, channel parameters, the
/// coordinate dimension, and the search controls.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorSpec {
    pub regime: EstimatorKind,
    pub m: f64,
    pub sigma: f64,
    pub c: f64,
    pub dimension: usize,
    pub search: SearchSpec,
}

impl EstimatorSpec {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain(format!("c must be positive, got {}", self.c)));
        }
        if self.regime == EstimatorKind::NakagamiMl && !(self.m >= 0.5 && self.m.is_finite()) {
            return Err(Error::domain(format!(
                "shape parameter must be at least 1/2, got {}",
                self.m
            )));
        }
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if self.search.grid_points_per_axis < 11 {
            return Err(Error::domain(format!(
                "coarse grid needs at least 11 points per axis, got {}",
                self.search.grid_points_per_axis
            )));
        }
        Ok(())
    }
}

/// Fit criterion at a candidate position. Lower is better; zero residuals
/// give exactly zero in every regime.
pub fn objective(
    node: Point,
    sample: &ToaSample,
    anchors: &[Point],
    spec: &EstimatorSpec,
) -> Result<f64> {
    spec.validate()?;
    if sample.values.len() != anchors.len() {
        return Err(Error::domain(format!(
            "sample has {} values for {} anchors",
            sample.values.len(),
            anchors.len()
        )));
    }
    let mut total = 0.0;
    for (i, (&tau, &anchor)) in sample.values.iter().zip(anchors).enumerate() {
        let r = tau - distance(node, anchor, spec.dimension) / spec.c;
        let s = sample.sigma_for(i, &ToaModel {
            regime: crate::toa::Regime::Awgn,
            sigma: spec.sigma,
            c: spec.c,
            m: spec.m,
        });
        total += match spec.regime {
            EstimatorKind::AwgnLs => r * r,
            EstimatorKind::NakagamiMl => (r * r / (2.0 * s * s * spec.m)).ln_1p(),
            EstimatorKind::NoCsiMl => (r * r / (s * s)).ln_1p(),
        };
    }
    Ok(total)
}

/// Result of one minimization: the position, the objective there, how many
/// refinement sweeps ran, and two diagnostic flags: the minimum sat on the
/// box edge, or several coarse-grid cells tied for the minimum.
#[derive(Clone, Copy, Debug)]
pub struct EstimateOutcome {
    pub position: Point,
    pub objective: f64,
    pub iterations: usize,
    pub boundary: bool,
    pub multimodal: bool,
}

fn default_box(anchors: &[Point], dimension: usize) -> SearchBox {
    let mut min = [f64::INFINITY, f64::INFINITY];
    let mut max = [f64::NEG_INFINITY, f64::NEG_INFINITY];
    for a in anchors {
        for axis in 0..dimension {
            min[axis] = min[axis].min(a[axis]);
            max[axis] = max[axis].max(a[axis]);
        }
    }
    for axis in 0..dimension {
        let width = max[axis] - min[axis];
        let extra = if width > 0.0 { 0.25 * width } else { 1.0 };
        min[axis] -= extra;
        max[axis] += extra;
    }
    if dimension == 1 {
        min[1] = 0.0;
        max[1] = 0.0;
    }
    SearchBox { min, max }
}

/// Minimizes the objective over the search region: coarse grid scan, then
/// pattern refinement with step halving. Deterministic; ties on the grid go
/// to the lexicographically smallest coordinate and raise the multimodal
/// flag.
pub fn estimate_location(
    sample: &ToaSample,
    anchors: &[Point],
    spec: &EstimatorSpec,
) -> Result<EstimateOutcome> {
    spec.validate()?;
    if anchors.len() < spec.dimension + 1 {
        return Err(Error::domain(format!(
            "{}-D estimation needs at least {} anchors, got {}",
            spec.dimension,
            spec.dimension + 1,
            anchors.len()
        )));
    }
    let region = spec.search.bounding_box.unwrap_or_else(|| default_box(anchors, spec.dimension));
    let mut widths = [0.0; 2];
    for (axis, width) in widths.iter_mut().enumerate().take(spec.dimension) {
        *width = region.max[axis] - region.min[axis];
        if !width.is_finite() || *width <= 0.0 {
            return Err(Error::domain("search box must have positive extent on every axis"));
        }
    }
    let tol = spec
        .search
        .refine_tol
        .unwrap_or_else(|| 1e-9 * widths.iter().cloned().fold(0.0, f64::max));

    let g = spec.search.grid_points_per_axis;
    let steps = [widths[0] / (g - 1) as f64, widths[1] / (g - 1) as f64];
    let f = |p: Point| objective(p, sample, anchors, spec);

    // Coarse scan in lexicographic order. Exact ties keep the first cell, so
    // the winner is the lexicographically smallest; near-ties are judged on a
    // relative margin because the objective's absolute scale varies by many
    // orders of magnitude across regimes and noise levels.
    const TIE_REL: f64 = 1e-9;
    let mut best = [region.min[0], region.min[1]];
    let mut best_value = f64::INFINITY;
    let mut near_best = 0usize;
    let ny = if spec.dimension == 2 { g } else { 1 };
    for ix in 0..g {
        for iy in 0..ny {
            let p = [
                region.min[0] + ix as f64 * steps[0],
                if spec.dimension == 2 { region.min[1] + iy as f64 * steps[1] } else { region.min[1] },
            ];
            let v = f(p)?;
            if v < best_value {
                near_best = if best_value - v <= TIE_REL * v.abs() { near_best + 1 } else { 1 };
                best = p;
                best_value = v;
            } else if v - best_value <= TIE_REL * best_value.abs() {
                near_best += 1;
            }
        }
    }
    let multimodal = near_best >= 2;

    // Pattern refinement: move to the best improving axis neighbor, halve
    // the step when stuck; the objective value never increases.
    let mut pos = best;
    let mut value = best_value;
    let mut step = [steps[0], steps[1].max(steps[0])];
    let mut iterations = 0usize;
    for _ in 0..spec.search.refine_iterations {
        if step[..spec.dimension].iter().all(|&s| s < tol) {
            break;
        }
        iterations += 1;
        let mut candidate = pos;
        let mut candidate_value = value;
        for axis in 0..spec.dimension {
            for sign in [-1.0, 1.0] {
                let mut p = pos;
                p[axis] = (p[axis] + sign * step[axis]).clamp(region.min[axis], region.max[axis]);
                let v = f(p)?;
                if v < candidate_value {
                    candidate = p;
                    candidate_value = v;
                }
            }
        }
        if candidate_value < value {
            pos = candidate;
            value = candidate_value;
        } else {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }

    let boundary = (0..spec.dimension).any(|axis| {
        (pos[axis] - region.min[axis]).abs() <= tol || (pos[axis] - region.max[axis]).abs() <= tol
    });
    Ok(EstimateOutcome { position: pos, objective: value, iterations, boundary, multimodal })
}

/// Monte Carlo mean squared error of an estimator over independent trials.
#[derive(Clone, Copy, Debug)]
pub struct MseReport {
    pub mse: f64,
    /// Half-width of the 95% confidence interval on the MSE.
    pub ci95: f64,
    pub trials: usize,
    /// How many trials ended on the search-box edge (excluded from nothing,
    /// reported so callers can judge whether the box clipped the estimator).
    pub boundary_trials: usize,
}

/// Draws `trials` measurement vectors from `model`, runs the estimator on
/// each, and averages the squared position error. Trials run in parallel on
/// per-trial random streams; the reduction order is fixed, so the result is
/// identical for any worker count.
pub fn evaluate_mse(
    spec: &EstimatorSpec,
    node: Point,
    anchors: &[Point],
    model: &ToaModel,
    trials: usize,
    seed: u64,
) -> Result<MseReport> {
    spec.validate()?;
    if trials < 1000 {
        return Err(Error::domain(format!(
            "MSE evaluation needs at least 1000 trials for a usable CI, got {trials}"
        )));
    }
    let per_trial: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool)> {
            let mut rng = trial_rng(seed, t as u64);
            let sample = sample_toa(node, anchors, model, None, &mut rng)?;
            let outcome = estimate_location(&sample, anchors, spec)?;
            let e = distance(outcome.position, node, spec.dimension);
            Ok((e * e, outcome.boundary))
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let mut sum = 0.0;
    let mut boundary_trials = 0usize;
    for &(sq, on_edge) in &per_trial {
        sum += sq;
        boundary_trials += usize::from(on_edge);
    }
    let mse = sum / n;
    let mut var = 0.0;
    for &(sq, _) in &per_trial {
        var += (sq - mse) * (sq - mse);
    }
    var /= n - 1.0;
    Ok(MseReport { mse, ci95: 1.96 * (var / n).sqrt(), trials, boundary_trials })
}
