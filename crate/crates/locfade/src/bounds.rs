//! Lower bounds on location-estimation error: Fisher information matrices
//! and the CRLB/MCRLB family across channel regimes, in one and two
//! dimensions, for shared or per-anchor noise levels, and for cooperating
//! node clusters. Exact bounds integrate the information kernels X(d) and
//! Y(d); closed forms apply the small-distance approximation and are never
//! substituted silently (callers pick the method).

use crate::numerics::{self, QuadratureSpec};
use crate::{distance, Error, Point, Result};

/// How a bound is evaluated: the small-distance closed form or tolerance-
/// controlled quadrature of the exact information integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// Channel regime a bound applies to. `Modified` marks the modified bound
/// that replaces the fading nuisance by its mean power.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundRegime {
    Awgn,
    KnownFading,
    Nakagami,
    NoCsi,
    Modified,
}

/// Noise level shared by every anchor or supplied anchor by anchor.
#[derive(Clone, Debug)]
pub enum Sigmas<'a> {
    Shared(f64),
    PerAnchor(&'a [f64]),
}

impl Sigmas<'_> {
    fn validate(&self, anchor_count: usize) -> Result<()> {
        match self {
            Sigmas::Shared(s) => check_sigma(*s),
            Sigmas::PerAnchor(v) => {
                if v.len() != anchor_count {
                    return Err(Error::domain(format!(
                        "{} sigmas supplied for {} anchors",
                        v.len(),
                        anchor_count
                    )));
                }
                v.iter().try_for_each(|&s| check_sigma(s))
            }
        }
    }

    fn get(&self, i: usize) -> f64 {
        match self {
            Sigmas::Shared(s) => *s,
            Sigmas::PerAnchor(v) => v[i],
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma must be positive, got {sigma}")))
    }
}

fn check_speed(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("c must be positive, got {c}")))
    }
}

fn check_shape(m: f64) -> Result<()> {
    if m >= 0.5 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("shape parameter must be at least 1/2, got {m}")))
    }
}

/// Fisher information matrix for `node_count` unknown nodes in `dimension`
/// coordinates each; symmetric positive semi-definite by construction.
#[derive(Clone, Debug)]
pub struct FisherMatrix {
    /// Row-major entries of the (dimension * node_count) square matrix.
    pub entries: Vec<f64>,
    pub dimension: usize,
    pub node_count: usize,
}

impl FisherMatrix {
    pub fn new(entries: Vec<f64>, dimension: usize, node_count: usize) -> Result<Self> {
        let n = dimension * node_count;
        crate::check_dimension(dimension)?;
        if node_count == 0 || entries.len() != n * n {
            return Err(Error::domain(format!(
                "matrix of order {n} needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let matrix = FisherMatrix { entries, dimension, node_count };
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (matrix.get(i, j), matrix.get(j, i));
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::domain("Fisher matrix must be symmetric"));
                }
            }
        }
        Ok(matrix)
    }

    pub fn order(&self) -> usize {
        self.dimension * self.node_count
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.order() + col]
    }

    /// Ratio of extreme eigenvalues; infinite when the matrix is not
    /// positive definite.
    pub fn condition_number(&self) -> f64 {
        match self.order() {
            1 => {
                if self.entries[0] > 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            2 => {
                let (a, b, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                let gap = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                let hi = 0.5 * (a + d) + gap;
                let lo = 0.5 * (a + d) - gap;
                if lo > 0.0 {
                    hi / lo
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Trace of the inverse, the position-error lower bound. Fails with a
    /// geometry error when the matrix is numerically singular.
    pub fn trace_of_inverse(&self) -> Result<f64> {
        let condition = self.condition_number();
        if condition.is_nan() || condition > 1e12 {
            return Err(Error::SingularGeometry { condition });
        }
        match self.order() {
            1 => Ok(1.0 / self.entries[0]),
            2 => {
                let (a, b, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                Ok((a + d) / (a * d - b * b))
            }
            n => Err(Error::domain(format!(
                "cofactor inversion covers orders 1 and 2, got {n}"
            ))),
        }
    }
}

/// One evaluated bound: the scalar CRLB (trace of the inverse information
/// matrix, meters squared), how it was computed, its inflation relative to
/// the AWGN bound for the same geometry, and the information matrix itself.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub crlb: f64,
    pub regime: BoundRegime,
    pub method: Method,
    pub ratio_vs_awgn: f64,
    pub fisher: FisherMatrix,
}

fn check_geometry(anchors: &[Point], dimension: usize) -> Result<()> {
    crate::check_dimension(dimension)?;
    if anchors.len() < dimension + 1 {
        return Err(Error::domain(format!(
            "{}-D localization needs at least {} anchors, got {}",
            dimension,
            dimension + 1,
            anchors.len()
        )));
    }
    Ok(())
}

fn anchor_distances(anchors: &[Point], node: Point, dimension: usize) -> Result<Vec<f64>> {
    anchors
        .iter()
        .map(|&a| {
            let d = distance(node, a, dimension);
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::domain("node coincides with an anchor"))
            }
        })
        .collect()
}

/// Assembles sum_i w_i u_i u_i' where u_i is the unit bearing to anchor i
/// (in 1-D the bearing contributes a factor of one).
fn fim_from_weights(
    anchors: &[Point],
    node: Point,
    dimension: usize,
    weights: &[f64],
) -> Result<FisherMatrix> {
    let distances = anchor_distances(anchors, node, dimension)?;
    if dimension == 1 {
        let total: f64 = weights.iter().sum();
        return FisherMatrix::new(vec![total], 1, 1);
    }
    let (mut fxx, mut fxy, mut fyy) = (0.0, 0.0, 0.0);
    for (i, &a) in anchors.iter().enumerate() {
        let ux = (node[0] - a[0]) / distances[i];
        let uy = (node[1] - a[1]) / distances[i];
        fxx += weights[i] * ux * ux;
        fxy += weights[i] * ux * uy;
        fyy += weights[i] * uy * uy;
    }
    FisherMatrix::new(vec![fxx, fxy, fxy, fyy], 2, 1)
}

/// CRLB and FIM for per-anchor information weights w_i; the 1-D bound is the
/// exact quotient 1 / sum w_i so algebraically equal inputs stay bitwise
/// equal outputs.
fn bound_from_weights(
    anchors: &[Point],
    node: Point,
    dimension: usize,
    weights: &[f64],
) -> Result<(f64, FisherMatrix)> {
    let fisher = fim_from_weights(anchors, node, dimension, weights)?;
    let crlb = fisher.trace_of_inverse()?;
    Ok((crlb, fisher))
}

fn awgn_weights(sigmas: &Sigmas, c: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let s = sigmas.get(i);
            1.0 / (c * c * s * s)
        })
        .collect()
}

fn awgn_bound(
    anchors: &[Point],
    node: Point,
    sigmas: &Sigmas,
    c: f64,
    dimension: usize,
) -> Result<(f64, FisherMatrix)> {
    let weights = awgn_weights(sigmas, c, anchors.len());
    bound_from_weights(anchors, node, dimension, &weights)
}

/// Bound with no fading: c^2 sigma^2 / M in 1-D, trace of the inverse
/// bearing-geometry FIM in 2-D.
pub fn crlb_awgn(
    anchors: &[Point],
    node: Point,
    sigma: f64,
    c: f64,
    dimension: usize,
) -> Result<BoundReport> {
    check_sigma(sigma)?;
    check_speed(c)?;
    check_geometry(anchors, dimension)?;
    let (crlb, fisher) = awgn_bound(anchors, node, &Sigmas::Shared(sigma), c, dimension)?;
    Ok(BoundReport {
        crlb,
        regime: BoundRegime::Awgn,
        method: Method::ClosedForm,
        ratio_vs_awgn: 1.0,
        fisher,
    })
}

/// Bound conditional on known fading envelopes: each anchor's information is
/// scaled by |h_i|^2. All-ones envelopes reproduce the AWGN bound exactly.
pub fn crlb_known_fading(
    anchors: &[Point],
    node: Point,
    sigma: f64,
    c: f64,
    envelopes: &[f64],
    dimension: usize,
) -> Result<BoundReport> {
    check_sigma(sigma)?;
    check_speed(c)?;
    check_geometry(anchors, dimension)?;
    if envelopes.len() != anchors.len() {
        return Err(Error::domain(format!(
            "{} envelopes supplied for {} anchors",
            envelopes.len(),
            anchors.len()
        )));
    }
    for &h in envelopes {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::degenerate_channel(format!(
                "envelope must be positive, got {h}"
            )));
        }
    }
    let weights: Vec<f64> = envelopes.iter().map(|&h| h * h / (c * c * sigma * sigma)).collect();
    let (crlb, fisher) = bound_from_weights(anchors, node, dimension, &weights)?;
    let (awgn, _) = awgn_bound(anchors, node, &Sigmas::Shared(sigma), c, dimension)?;
    Ok(BoundReport {
        crlb,
        regime: BoundRegime::KnownFading,
        method: Method::ClosedForm,
        ratio_vs_awgn: crlb / awgn,
        fisher,
    })
}

/// Modified bound: the fading power is replaced by its mean (one), which
/// collapses to the AWGN bound in every geometry.
pub fn mcrlb(
    anchors: &[Point],
    node: Point,
    sigma: f64,
    c: f64,
    dimension: usize,
) -> Result<BoundReport> {
    let report = crlb_awgn(anchors, node, sigma, c, dimension)?;
    Ok(BoundReport { regime: BoundRegime::Modified, ..report })
}

/// Half-line integral of the scaled information kernel
/// ghat(v) = v^2 (1 + v^2/2m)^(-(m+5/2)), plus the [0, a] stretch that the
/// measurement offset d contributes. Kept in this scaling so large shape
/// parameters stay representable.
fn x_hat(a: f64, m: f64, quad: &QuadratureSpec) -> Result<f64> {
    let p = m + 2.5;
    let ghat = move |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            (2.0 * v.ln() - p * (v * v / (2.0 * m)).ln_1p()).exp()
        }
    };
    let half_line = numerics::integrate_semi_infinite(ghat, quad)?;
    let partial = numerics::integrate_finite(ghat, 0.0, a, quad)?;
    Ok(half_line + partial)
}

/// Distance-dependent information kernel X(d) of the Nakagami marginal law,
/// evaluated by quadrature. Underflows to zero for shape parameters beyond
/// roughly 140 (the true value drops below the smallest double); the bound
/// routines keep the computation in log space instead and do not suffer
/// this.
pub fn x_integral(d: f64, sigma: f64, c: f64, m: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_sigma(sigma)?;
    check_speed(c)?;
    check_shape(m)?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("distance must be nonnegative, got {d}")));
    }
    let a = d / (c * sigma);
    let hat = x_hat(a, m, quad)?;
    Ok((3.0 * sigma.ln() - (m + 2.5) * m.ln() + hat.ln()).exp())
}

/// Distance-dependent information kernel Y(d) of the no-CSI marginal law:
/// sigma^3 (pi/16 + int_0^(d/(c sigma)) v^2 (1+v^2)^-3 dv) by quadrature.
pub fn y_integral(d: f64, sigma: f64, c: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_sigma(sigma)?;
    check_speed(c)?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("distance must be nonnegative, got {d}")));
    }
    let a = d / (c * sigma);
    let g = |v: f64| {
        let w = 1.0 + v * v;
        v * v / (w * w * w)
    };
    let half_line = numerics::integrate_semi_infinite(g, quad)?;
    let partial = numerics::integrate_finite(g, 0.0, a, quad)?;
    Ok(sigma * sigma * sigma * (half_line + partial))
}

/// Loss factor of Nakagami fading relative to AWGN in the small-distance
/// closed form: 2(m + 3/2)/(m + 1/2), the fully reduced value of the
/// gamma-function expression. Equals 10/3 under Rayleigh fading (about 5 dB)
/// and 4 at the half-order boundary. Defined for m >= 1/2.
pub fn loss_ratio_k(m: f64) -> f64 {
    2.0 * (m + 1.5) / (m + 0.5)
}

/// Per-anchor quadrature information weight of the Nakagami marginal law:
/// Y(m) X(d_i) / (c^2 sigma_i^2), assembled in log space.
fn nakagami_weight(a: f64, m: f64, sigma: f64, c: f64, quad: &QuadratureSpec) -> Result<f64> {
    let hat = x_hat(a, m, quad)?;
    let ln_scale = numerics::ln_gamma(m + 0.5)? - numerics::ln_gamma(m)?
        - 0.5 * std::f64::consts::TAU.ln()
        - 2.5 * m.ln()
        + hat.ln();
    Ok((m + 0.5) * (m + 0.5) * ln_scale.exp() / (c * c * sigma * sigma))
}

/// Bound under Nakagami fading with the envelope marginalized out.
/// `ClosedForm` applies the small-distance loss factor k(m) to the AWGN
/// bound; `Quadrature` integrates X(d_i) anchor by anchor.
pub fn crlb_nakagami(
    anchors: &[Point],
    node: Point,
    sigmas: &Sigmas,
    c: f64,
    m: f64,
    dimension: usize,
    method: Method,
) -> Result<BoundReport> {
    sigmas.validate(anchors.len())?;
    check_speed(c)?;
    check_shape(m)?;
    check_geometry(anchors, dimension)?;
    let (awgn, awgn_fisher) = awgn_bound(anchors, node, sigmas, c, dimension)?;
    let (crlb, ratio, fisher) = match method {
        Method::ClosedForm => {
            let k = loss_ratio_k(m);
            let scaled: Vec<f64> =
                awgn_fisher.entries.iter().map(|&e| e / k).collect();
            let fisher =
                FisherMatrix::new(scaled, awgn_fisher.dimension, awgn_fisher.node_count)?;
            (k * awgn, k, fisher)
        }
        Method::Quadrature => {
            let quad = QuadratureSpec::default();
            let distances = anchor_distances(anchors, node, dimension)?;
            let weights: Vec<f64> = distances
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let s = sigmas.get(i);
                    nakagami_weight(d / (c * s), m, s, c, &quad)
                })
                .collect::<Result<_>>()?;
            let (crlb, fisher) = bound_from_weights(anchors, node, dimension, &weights)?;
            (crlb, crlb / awgn, fisher)
        }
    };
    Ok(BoundReport { crlb, regime: BoundRegime::Nakagami, method, ratio_vs_awgn: ratio, fisher })
}

/// Bound with no channel state information at all (Rayleigh fading, unknown
/// phase). `ClosedForm` is four times the AWGN bound; `Quadrature`
/// integrates Y(d_i). Only the Rayleigh case is defined.
pub fn crlb_nocsi(
    anchors: &[Point],
    node: Point,
    sigma: f64,
    c: f64,
    m: f64,
    dimension: usize,
    method: Method,
) -> Result<BoundReport> {
    if (m - 1.0).abs() > 1e-12 {
        return Err(Error::unsupported_regime(format!(
            "the no-CSI bound is derived for Rayleigh fading (m = 1), got m = {m}"
        )));
    }
    check_sigma(sigma)?;
    check_speed(c)?;
    check_geometry(anchors, dimension)?;
    let sigmas = Sigmas::Shared(sigma);
    let (awgn, awgn_fisher) = awgn_bound(anchors, node, &sigmas, c, dimension)?;
    let (crlb, ratio, fisher) = match method {
        Method::ClosedForm => {
            let scaled: Vec<f64> = awgn_fisher.entries.iter().map(|&e| e / 4.0).collect();
            let fisher =
                FisherMatrix::new(scaled, awgn_fisher.dimension, awgn_fisher.node_count)?;
            (4.0 * awgn, 4.0, fisher)
        }
        Method::Quadrature => {
            let quad = QuadratureSpec::default();
            let distances = anchor_distances(anchors, node, dimension)?;
            let weights: Vec<f64> = distances
                .iter()
                .map(|&d| {
                    let y = y_integral(d, sigma, c, &quad)?;
                    let s3 = sigma * sigma * sigma;
                    Ok(4.0 * y / (std::f64::consts::PI * c * c * s3 * sigma * sigma))
                })
                .collect::<Result<_>>()?;
            let (crlb, fisher) = bound_from_weights(anchors, node, dimension, &weights)?;
            (crlb, crlb / awgn, fisher)
        }
    };
    Ok(BoundReport { crlb, regime: BoundRegime::NoCsi, method, ratio_vs_awgn: ratio, fisher })
}

/// Reduction of the per-node bound when N nodes cooperate against M anchors:
/// (M+1)/(N+M), equal to one for a lone node.
pub fn cooperative_ratio(anchor_count: usize, node_count: usize) -> f64 {
    (anchor_count as f64 + 1.0) / (node_count as f64 + anchor_count as f64)
}

/// Per-node 1-D bound for N cooperating nodes and M anchors, in the
/// small-distance closed form: loss(regime) * c^2 sigma^2 (M+1) / (M (N+M)).
/// The quoted `ratio_vs_awgn` compares against the non-cooperative AWGN
/// bound c^2 sigma^2 / M, so it factors as loss * cooperative_ratio.
pub fn crlb_cooperative(
    anchor_count: usize,
    node_count: usize,
    sigma: f64,
    c: f64,
    m: f64,
    regime: BoundRegime,
) -> Result<BoundReport> {
    if anchor_count < 2 {
        return Err(Error::domain(format!("need at least 2 anchors, got {anchor_count}")));
    }
    if node_count < 1 {
        return Err(Error::domain("need at least 1 node"));
    }
    check_sigma(sigma)?;
    check_speed(c)?;
    let loss = match regime {
        BoundRegime::Awgn => 1.0,
        BoundRegime::Nakagami => {
            check_shape(m)?;
            loss_ratio_k(m)
        }
        BoundRegime::NoCsi => {
            if (m - 1.0).abs() > 1e-12 {
                return Err(Error::unsupported_regime(
                    "cooperative no-CSI bound is derived for Rayleigh fading (m = 1)",
                ));
            }
            4.0
        }
        BoundRegime::KnownFading | BoundRegime::Modified => {
            return Err(Error::unsupported_regime(
                "cooperative bound covers Awgn, Nakagami, and NoCsi regimes",
            ))
        }
    };
    let non_cooperative = loss * c * c * sigma * sigma / anchor_count as f64;
    let crlb = non_cooperative * cooperative_ratio(anchor_count, node_count);
    let fisher = FisherMatrix::new(vec![1.0 / crlb], 1, 1)?;
    Ok(BoundReport {
        crlb,
        regime,
        method: Method::ClosedForm,
        ratio_vs_awgn: loss * cooperative_ratio(anchor_count, node_count),
        fisher,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::trial_rng;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    const UNIT_SQUARE: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    fn line_anchors(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| [x, 0.0]).collect()
    }

    #[test]
    fn awgn_one_dimensional_bound_is_noise_power_over_anchor_count() {
        let anchors = line_anchors(&[-3.0, -1.0, 2.0, 5.0]);
        let r = crlb_awgn(&anchors, [0.5, 0.0], 1.0, 1.0, 1).unwrap();
        assert_eq!(r.crlb, 0.25, "c^2 sigma^2 / M with unit noise and four anchors");
        assert_eq!(r.ratio_vs_awgn, 1.0);
        let doubled = crlb_awgn(&anchors, [0.5, 0.0], 2.0, 1.0, 1).unwrap();
        assert_relative_eq!(doubled.crlb / r.crlb, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn awgn_center_of_unit_square_gives_the_symmetric_bound() {
        for &(sigma, c) in &[(1.0, 1.0), (0.7, 2.0)] {
            let r = crlb_awgn(&UNIT_SQUARE, [0.5, 0.5], sigma, c, 2).unwrap();
            assert_relative_eq!(r.crlb, c * c * sigma * sigma, max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_geometries_are_rejected() {
        let too_few = line_anchors(&[0.0, 1.0]);
        assert!(crlb_awgn(&too_few, [0.5, 0.5], 1.0, 1.0, 2).is_err());
        let collinear = line_anchors(&[0.0, 1.0, 2.0, 3.0]);
        match crlb_awgn(&collinear, [0.5, 0.0], 1.0, 1.0, 2) {
            Err(Error::SingularGeometry { condition }) => {
                assert!(condition.is_infinite(), "rank-one FIM has unbounded condition")
            }
            other => panic!("expected a singular-geometry error, got {other:?}"),
        }
        assert!(
            crlb_awgn(&UNIT_SQUARE, [0.0, 0.0], 1.0, 1.0, 2).is_err(),
            "node on top of an anchor has no bearing"
        );
    }

    #[test]
    fn fisher_matrix_inversion_and_conditioning() {
        let f = FisherMatrix::new(vec![2.0, 1.0, 1.0, 3.0], 2, 1).unwrap();
        // inverse trace = (a+d)/det = 5/5 = 1
        assert_relative_eq!(f.trace_of_inverse().unwrap(), 1.0, max_relative = 1e-15);
        let skewed = FisherMatrix::new(vec![1.0, 0.0, 0.0, 1e-13], 2, 1).unwrap();
        assert!(skewed.condition_number() > 1e12);
        assert!(skewed.trace_of_inverse().is_err());
        assert!(FisherMatrix::new(vec![1.0, 2.0, 3.0, 4.0], 2, 1).is_err(), "asymmetric input");
    }

    #[test]
    fn known_fading_reduces_to_awgn_for_unit_envelopes() {
        let anchors = line_anchors(&[-3.0, -1.0, 2.0, 5.0]);
        let awgn = crlb_awgn(&anchors, [0.5, 0.0], 0.8, 2.0, 1).unwrap();
        let ones = crlb_known_fading(&anchors, [0.5, 0.0], 0.8, 2.0, &[1.0; 4], 1).unwrap();
        assert_eq!(ones.crlb, awgn.crlb, "unit envelopes must reproduce the AWGN bound bitwise");
        let strong = crlb_known_fading(
            &anchors,
            [0.5, 0.0],
            0.8,
            2.0,
            &[std::f64::consts::SQRT_2; 4],
            1,
        )
        .unwrap();
        assert_relative_eq!(strong.crlb, awgn.crlb / 2.0, max_relative = 1e-15);

        let two = line_anchors(&[-1.0, 3.0]);
        let r = crlb_known_fading(&two, [0.5, 0.0], 1.0, 1.0, &[1.0, 2.0], 1).unwrap();
        assert_relative_eq!(r.crlb, 0.2, max_relative = 1e-15);

        assert!(
            crlb_known_fading(&two, [0.5, 0.0], 1.0, 1.0, &[1.0, 0.0], 1).is_err(),
            "a dead channel must be rejected"
        );

        let sq = crlb_known_fading(&UNIT_SQUARE, [0.5, 0.5], 1.0, 1.0, &[1.0; 4], 2).unwrap();
        let sq_awgn = crlb_awgn(&UNIT_SQUARE, [0.5, 0.5], 1.0, 1.0, 2).unwrap();
        assert_eq!(sq.crlb, sq_awgn.crlb);
    }

    #[test]
    fn modified_bound_collapses_to_awgn_in_random_geometries() {
        let mut rng = trial_rng(42, 0);
        for trial in 0..20 {
            let n = 3 + trial % 4;
            let anchors: Vec<Point> =
                (0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
            let node = [5.0 + rng.random::<f64>(), 5.0 + rng.random::<f64>()];
            for dimension in [1, 2] {
                let a = crlb_awgn(&anchors, node, 0.6, 3.0, dimension).unwrap();
                let m = mcrlb(&anchors, node, 0.6, 3.0, dimension).unwrap();
                assert_abs_diff_eq!(m.crlb, a.crlb, epsilon = 1e-12 * a.crlb);
                assert_eq!(m.ratio_vs_awgn, 1.0);
                assert_eq!(m.regime, BoundRegime::Modified);
            }
        }
        let four = line_anchors(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mcrlb(&four, [0.5, 0.0], 1.0, 1.0, 1).unwrap().crlb, 0.25);
    }

    #[test]
    fn x_kernel_matches_independent_values() {
        let quad = QuadratureSpec::default();
        // At d = 0 the kernel equals sqrt(2) G(3/2) G(m+1) / (m^(m+1) G(m+5/2))
        // exactly (Beta-function reduction of the half-line integral).
        let x0 = x_integral(0.0, 1.0, 1.0, 1.0, &quad).unwrap();
        assert_relative_eq!(x0, 0.37712361663282535, max_relative = 1e-9);
        let closed = (0.5 * 2.0f64.ln() + numerics::ln_gamma(1.5).unwrap()
            + numerics::ln_gamma(2.0).unwrap()
            - numerics::ln_gamma(3.5).unwrap())
        .exp();
        assert_relative_eq!(closed, 4.0 * std::f64::consts::SQRT_2 / 15.0, max_relative = 1e-14);
        assert_relative_eq!(x0, closed, max_relative = 1e-9);

        assert_relative_eq!(
            x_integral(0.5, 1.0, 1.0, 1.0, &quad).unwrap(),
            0.40971454646529173,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            x_integral(1.0, 1.0, 1.0, 2.5, &quad).unwrap(),
            0.0090289582422994519,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            x_integral(0.0, 1.0, 1.0, 0.5, &quad).unwrap(),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            x_integral(0.3, 0.8, 1.0, 1.5, &quad).unwrap(),
            0.053185890424481836,
            max_relative = 1e-9
        );
    }

    #[test]
    fn x_kernel_respects_the_two_term_upper_bound_near_the_origin() {
        let quad = QuadratureSpec::default();
        for &m in &[0.5, 1.0, 2.5, 8.0] {
            let first = (0.5 * 2.0f64.ln() + numerics::ln_gamma(1.5).unwrap()
                + numerics::ln_gamma(m + 1.0).unwrap()
                - (1.0 + m) * m.ln()
                - numerics::ln_gamma(m + 2.5).unwrap())
            .exp();
            for &d in &[0.0, 0.25, 0.5, 1.0] {
                let second = d * d * (d * d / 2.0 + m).powf(-(m + 2.5));
                let x = x_integral(d, 1.0, 1.0, m, &quad).unwrap();
                assert!(
                    x <= (first + second) * (1.0 + 1e-9),
                    "m={m} d={d}: kernel {x} exceeds bound {}",
                    first + second
                );
            }
        }
    }

    #[test]
    fn x_kernel_scales_as_noise_cubed() {
        let quad = QuadratureSpec::default();
        let lhs = x_integral(0.3, 0.8, 1.0, 1.5, &quad).unwrap();
        let rhs = 8.0 * x_integral(0.15, 0.4, 1.0, 1.5, &quad).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn y_kernel_matches_its_antiderivative() {
        let quad = QuadratureSpec::default();
        let y0 = y_integral(0.0, 1.0, 1.0, &quad).unwrap();
        assert_relative_eq!(y0, std::f64::consts::PI / 16.0, max_relative = 1e-9);
        // int_0^a v^2 (1+v^2)^-3 dv = (atan a + a(a^2-1)/(1+a^2)^2) / 8.
        for &a in &[0.2f64, 0.5, 1.0, 3.0] {
            let partial = (a.atan() + a * (a * a - 1.0) / ((1.0 + a * a) * (1.0 + a * a))) / 8.0;
            let expect = std::f64::consts::PI / 16.0 + partial;
            let y = y_integral(a, 1.0, 1.0, &quad).unwrap();
            assert_relative_eq!(y, expect, max_relative = 1e-9);
        }
        assert_relative_eq!(
            y_integral(0.5, 1.0, 1.0, &quad).unwrap(),
            0.22430549197446284,
            max_relative = 1e-9
        );
        // sigma^3 scaling at matched d/(c sigma).
        let scaled = y_integral(1.0, 2.0, 1.0, &quad).unwrap();
        assert_relative_eq!(scaled, 8.0 * y_integral(0.5, 1.0, 1.0, &quad).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn loss_factor_closed_form_agrees_with_the_gamma_expression() {
        assert_eq!(loss_ratio_k(1.0), 10.0 / 3.0, "Rayleigh loss is exactly 10/3");
        assert_eq!(loss_ratio_k(0.5), 4.0, "half-order loss is exactly 4");
        let mut previous = f64::INFINITY;
        for &m in &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0] {
            let via_gamma = (0.5 * std::f64::consts::PI.ln()
                + numerics::ln_gamma(m + 2.5).unwrap()
                - numerics::ln_gamma(1.5).unwrap()
                - numerics::ln_gamma(m + 0.5).unwrap())
            .exp()
                / ((m + 0.5) * (m + 0.5));
            let k = loss_ratio_k(m);
            assert_relative_eq!(k, via_gamma, max_relative = 1e-12);
            assert!(k < previous, "loss factor must decrease in m");
            previous = k;
        }
        // The reduced form exposes the limit of the printed expression: it
        // decreases toward 2, not to 1; the physical approach to the AWGN
        // bound at finite distances is a quadrature statement (see below).
        assert_abs_diff_eq!(loss_ratio_k(1000.0), 2.0, epsilon = 0.01);
    }

    #[test]
    fn nakagami_closed_form_is_the_loss_factor_times_awgn() {
        let anchors = line_anchors(&[-3.0, -1.0, 2.0, 5.0]);
        let r = crlb_nakagami(
            &anchors,
            [0.5, 0.0],
            &Sigmas::Shared(1.0),
            1.0,
            1.0,
            1,
            Method::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(r.crlb, 10.0 / 3.0 * 0.25, max_relative = 1e-15);
        assert_eq!(r.ratio_vs_awgn, 10.0 / 3.0);

        let sq = crlb_nakagami(
            &UNIT_SQUARE,
            [0.5, 0.5],
            &Sigmas::Shared(0.7),
            2.0,
            2.0,
            2,
            Method::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(sq.crlb, 2.8 * 4.0 * 0.49 * (0.7 * 0.7) / 0.49, max_relative = 1e-12);
        // ^ k(2) * c^2 sigma^2 at the square's center, written out explicitly:
        assert_relative_eq!(sq.crlb, loss_ratio_k(2.0) * 4.0 * 0.49, max_relative = 1e-12);
    }

    #[test]
    fn nakagami_quadrature_agrees_with_the_closed_form_near_the_anchors() {
        let anchors = line_anchors(&[0.05, -0.05, 0.05, -0.05]);
        let r = crlb_nakagami(
            &anchors,
            [0.0, 0.0],
            &Sigmas::Shared(1.0),
            1.0,
            1.0,
            1,
            Method::Quadrature,
        )
        .unwrap();
        assert_relative_eq!(r.ratio_vs_awgn, 3.3329660538330757, max_relative = 1e-6);
        assert!((r.ratio_vs_awgn / loss_ratio_k(1.0) - 1.0).abs() < 0.03);
    }

    #[test]
    fn strong_fading_suppression_restores_the_awgn_bound_at_distance() {
        // Shape 64 at five noise-lengths of range: the exact bound sits only
        // 1.6% above AWGN even though the small-distance loss factor is 2.03.
        let anchors = line_anchors(&[5.0, -5.0, 5.0, -5.0]);
        let r = crlb_nakagami(
            &anchors,
            [0.0, 0.0],
            &Sigmas::Shared(1.0),
            1.0,
            64.0,
            1,
            Method::Quadrature,
        )
        .unwrap();
        assert_relative_eq!(r.ratio_vs_awgn, 1.0155217968564283, max_relative = 1e-6);
        assert!((r.ratio_vs_awgn - 1.0).abs() < 0.05);
    }

    #[test]
    fn exact_bound_decreases_in_shape_and_dominates_the_modified_bound() {
        let anchors = line_anchors(&[0.05, -0.05, 0.05, -0.05]);
        let node = [0.0, 0.0];
        let modified = mcrlb(&anchors, node, 1.0, 1.0, 1).unwrap().crlb;
        let mut previous = f64::INFINITY;
        for &m in &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let r = crlb_nakagami(
                &anchors,
                node,
                &Sigmas::Shared(1.0),
                1.0,
                m,
                1,
                Method::Quadrature,
            )
            .unwrap();
            assert!(r.crlb < previous, "bound must decrease as fading weakens (m = {m})");
            assert!(r.crlb > modified, "exact bound must dominate the modified bound");
            assert!(r.ratio_vs_awgn >= 1.0);
            previous = r.crlb;
        }
    }

    #[test]
    fn two_dimensional_bounds_are_rotation_invariant() {
        let anchors = [[0.0, 0.0], [3.0, 0.5], [1.5, 4.0], [-1.0, 2.0]];
        let node = [1.2, 1.4];
        let rotate = |p: Point, t: f64| -> Point {
            [p[0] * t.cos() - p[1] * t.sin(), p[0] * t.sin() + p[1] * t.cos()]
        };
        let t = 37f64.to_radians();
        let turned: Vec<Point> = anchors.iter().map(|&p| rotate(p, t)).collect();
        let node_t = rotate(node, t);

        let a0 = crlb_awgn(&anchors, node, 0.4, 1.0, 2).unwrap().crlb;
        let a1 = crlb_awgn(&turned, node_t, 0.4, 1.0, 2).unwrap().crlb;
        assert_relative_eq!(a0, a1, max_relative = 1e-9);

        let s = Sigmas::Shared(0.4);
        let n0 = crlb_nakagami(&anchors, node, &s, 1.0, 2.0, 2, Method::Quadrature).unwrap().crlb;
        let n1 = crlb_nakagami(&turned, node_t, &s, 1.0, 2.0, 2, Method::Quadrature).unwrap().crlb;
        assert_relative_eq!(n0, n1, max_relative = 1e-9);
    }

    #[test]
    fn per_anchor_noise_levels_are_honored() {
        let anchors = line_anchors(&[-2.0, -1.0, 1.0, 2.0]);
        let node = [0.0, 0.0];
        let shared = crlb_nakagami(
            &anchors,
            node,
            &Sigmas::Shared(0.7),
            1.0,
            1.0,
            1,
            Method::ClosedForm,
        )
        .unwrap();
        let listed = crlb_nakagami(
            &anchors,
            node,
            &Sigmas::PerAnchor(&[0.7; 4]),
            1.0,
            1.0,
            1,
            Method::ClosedForm,
        )
        .unwrap();
        assert_eq!(shared.crlb, listed.crlb);

        let mixed = [0.5, 0.5, 1.0, 2.0];
        let r = crlb_nakagami(
            &anchors,
            node,
            &Sigmas::PerAnchor(&mixed),
            1.0,
            1.0,
            1,
            Method::ClosedForm,
        )
        .unwrap();
        let info: f64 = mixed.iter().map(|s| 1.0 / (s * s)).sum();
        assert_relative_eq!(r.crlb, 10.0 / 3.0 / info, max_relative = 1e-12);

        let quad = crlb_nakagami(
            &anchors,
            node,
            &Sigmas::PerAnchor(&mixed),
            1.0,
            1.0,
            1,
            Method::Quadrature,
        )
        .unwrap();
        assert!(quad.crlb > 0.0 && quad.ratio_vs_awgn >= 1.0);
        assert!(
            crlb_nakagami(&anchors, node, &Sigmas::PerAnchor(&[1.0]), 1.0, 1.0, 1, Method::ClosedForm)
                .is_err(),
            "sigma list must match the anchor count"
        );
    }

    #[test]
    fn no_csi_bound_is_four_times_awgn_and_rayleigh_only() {
        let anchors = line_anchors(&[-3.0, -1.0, 2.0, 5.0]);
        let node = [0.5, 0.0];
        let r = crlb_nocsi(&anchors, node, 1.0, 1.0, 1.0, 1, Method::ClosedForm).unwrap();
        assert_eq!(r.crlb, 1.0, "four times the AWGN bound of 0.25");
        assert_eq!(r.ratio_vs_awgn, 4.0);

        // Losing the phase on top of the envelope costs 4 / (10/3) = 1.2.
        let known_stats =
            crlb_nakagami(&anchors, node, &Sigmas::Shared(1.0), 1.0, 1.0, 1, Method::ClosedForm)
                .unwrap();
        assert_relative_eq!(r.crlb / known_stats.crlb, 1.2, max_relative = 1e-12);

        match crlb_nocsi(&anchors, node, 1.0, 1.0, 2.0, 1, Method::ClosedForm) {
            Err(Error::UnsupportedRegime { .. }) => {}
            other => panic!("expected an unsupported-regime error, got {other:?}"),
        }

        let near = line_anchors(&[0.05, -0.05, 0.05, -0.05]);
        let q = crlb_nocsi(&near, [0.0, 0.0], 1.0, 1.0, 1.0, 1, Method::Quadrature).unwrap();
        assert!((q.ratio_vs_awgn / 4.0 - 1.0).abs() < 0.03);
        assert!(q.ratio_vs_awgn < 4.0, "information grows with distance, so the ratio sits below 4");

        let sq = crlb_nocsi(&UNIT_SQUARE, [0.5, 0.5], 0.7, 2.0, 1.0, 2, Method::ClosedForm).unwrap();
        assert_relative_eq!(sq.crlb, 4.0 * 4.0 * 0.49, max_relative = 1e-12);
    }

    #[test]
    fn cooperation_scales_the_bound_by_the_node_count_factor() {
        assert_eq!(cooperative_ratio(4, 1), 1.0);
        assert_eq!(cooperative_ratio(4, 4), 0.625);
        assert_eq!(cooperative_ratio(8, 2), 0.9);

        // A lone node recovers the non-cooperative closed form.
        let lone = crlb_cooperative(4, 1, 0.9, 2.0, 1.0, BoundRegime::Nakagami).unwrap();
        let anchors = line_anchors(&[-3.0, -1.0, 2.0, 5.0]);
        let solo = crlb_nakagami(
            &anchors,
            [0.5, 0.0],
            &Sigmas::Shared(0.9),
            2.0,
            1.0,
            1,
            Method::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(lone.crlb, solo.crlb, max_relative = 1e-12);
        assert_relative_eq!(lone.crlb, 10.0 / 3.0 * 4.0 * 0.81 / 4.0, max_relative = 1e-12);

        let four = crlb_cooperative(4, 4, 0.9, 2.0, 1.0, BoundRegime::Nakagami).unwrap();
        assert_relative_eq!(four.crlb / lone.crlb, 0.625, max_relative = 1e-12);

        let nocsi_lone = crlb_cooperative(4, 1, 1.0, 1.0, 1.0, BoundRegime::NoCsi).unwrap();
        assert_relative_eq!(nocsi_lone.crlb, 1.0, max_relative = 1e-12);

        assert!(crlb_cooperative(1, 1, 1.0, 1.0, 1.0, BoundRegime::Awgn).is_err());
        assert!(crlb_cooperative(4, 0, 1.0, 1.0, 1.0, BoundRegime::Awgn).is_err());
        assert!(crlb_cooperative(4, 2, 1.0, 1.0, 2.0, BoundRegime::NoCsi).is_err());
    }
}
