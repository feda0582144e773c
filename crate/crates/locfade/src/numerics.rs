//! Adaptive quadrature and the special functions behind the closed-form
//! expressions: the Gaussian tail Q and its inverse, log-gamma, and the Gauss
//! hypergeometric series 2F1 restricted to the argument range the densities
//! need.

use crate::{Error, Result};

/// Tolerances and budget for the adaptive integrators.
#[derive(Clone, Debug)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the total integral estimate. Must be <= 1e-9.
    pub abs_tol: f64,
    /// Relative tolerance on the total integral estimate. Must be <= 1e-8.
    pub rel_tol: f64,
    /// Number of interval bisections allowed before giving up.
    pub max_subdivisions: usize,
    /// Controls initial knot placement for semi-infinite integrands: the
    /// transformed grid always resolves [0, truncation_radius] so mass
    /// sitting anywhere below the radius is seen before refinement starts.
    /// Must be at least 10. Nothing is truncated; the change of variables
    /// x = t/(1-t) covers the whole half line.
    pub truncation_radius: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_subdivisions: 4096,
            truncation_radius: 50.0,
        }
    }
}

impl QuadratureSpec {
    /// Checks the documented field ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol <= 1e-9) {
            return Err(Error::domain(format!(
                "abs_tol must be in (0, 1e-9], got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-8) {
            return Err(Error::domain(format!(
                "rel_tol must be in (0, 1e-8], got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        if self.truncation_radius.is_nan() || self.truncation_radius < 10.0 {
            return Err(Error::domain(format!(
                "truncation_radius must be >= 10, got {}",
                self.truncation_radius
            )));
        }
        Ok(())
    }
}

/// Gaussian tail probability Q(x) = P[N(0,1) > x].
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_function`] on p in (0, 1), polished with one Newton step so
/// the round trip holds to 1e-10.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("q_inverse needs p in (0,1), got {p}")));
    }
    let mut x = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    let density = normal_pdf(x);
    if density > 1e-280 {
        x += (q_function(x) - p) / density;
    }
    Ok(x)
}

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 1e-9 && (x - x.round()).abs() < 1e-9
}

/// Gauss hypergeometric function 2F1(a, b; c; z) for 0 <= z < 1 by direct
/// series summation. Terminates exactly when a or b is a non-positive integer
/// (the polynomial case used by integer fading orders); otherwise the tail is
/// bounded geometrically.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::domain(format!("hyp2f1 needs 0 <= z < 1, got z = {z}")));
    }
    let terminates_at = [a, b]
        .iter()
        .filter(|&&p| is_nonpositive_integer(p))
        .map(|&p| (-p).round() as usize)
        .min();
    if is_nonpositive_integer(c) {
        // A polynomial case can stop before the denominator pole is reached.
        let c_pole = (-c).round() as usize;
        match terminates_at {
            Some(n) if n <= c_pole => {}
            _ => {
                return Err(Error::domain(format!(
                    "hyp2f1 pole: c = {c} is a non-positive integer"
                )))
            }
        }
    }
    if z == 0.0 {
        return Ok(1.0);
    }

    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let max_terms = terminates_at.unwrap_or(1_000_000);
    for n in 0..max_terms {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (1.0 + nf)) * z;
        sum += term;
        // Geometric tail bound: the term ratio tends to z from within (0,1).
        if terminates_at.is_none() && term.abs() / (1.0 - z) < 1e-15 * sum.abs().max(1.0) {
            return Ok(sum);
        }
    }
    if terminates_at.is_some() {
        Ok(sum)
    } else {
        Err(Error::convergence(
            format!("hyp2f1({a}, {b}; {c}; {z}) did not meet tolerance"),
            Some(sum),
        ))
    }
}

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 15(7) evaluation; returns (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        resk += WGK[j] * fsum;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

#[derive(Clone, Copy)]
struct Region {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptive bisection driver over an initial knot partition. Refinement always
/// splits the worst region (ties broken by position), and the final sum runs
/// over regions sorted by left endpoint, so the result does not depend on
/// insertion order.
fn adaptive<F: Fn(f64) -> f64>(f: &F, knots: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let mut regions: Vec<Region> = Vec::with_capacity(knots.len() + 16);
    for w in knots.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(f, w[0], w[1]);
            regions.push(Region { a: w[0], b: w[1], value, error });
        }
    }
    if regions.is_empty() {
        return Ok(0.0);
    }

    let total = |rs: &mut Vec<Region>| -> (f64, f64) {
        rs.sort_by(|x, y| x.a.total_cmp(&y.a));
        let v = rs.iter().map(|r| r.value).sum::<f64>();
        let e = rs.iter().map(|r| r.error).sum::<f64>();
        (v, e)
    };

    for _ in 0..spec.max_subdivisions {
        let (value, error) = total(&mut regions);
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(value);
        }
        let worst = regions
            .iter()
            .enumerate()
            .max_by(|(i, r), (j, s)| r.error.total_cmp(&s.error).then(j.cmp(i)))
            .map(|(i, _)| i)
            .expect("regions is non-empty");
        let r = regions[worst];
        let mid = 0.5 * (r.a + r.b);
        if mid <= r.a || mid >= r.b {
            // The interval is at floating-point resolution; stop refining it.
            regions[worst].error = 0.0;
            continue;
        }
        let (lv, le) = gk15(f, r.a, mid);
        let (rv, re) = gk15(f, mid, r.b);
        regions[worst] = Region { a: r.a, b: mid, value: lv, error: le };
        regions.push(Region { a: mid, b: r.b, value: rv, error: re });
    }
    let (value, error) = total(&mut regions);
    if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
        Ok(value)
    } else {
        Err(Error::convergence(
            format!("quadrature error {error:.3e} above tolerance after {} subdivisions",
                spec.max_subdivisions),
            Some(value),
        ))
    }
}

/// Integral of f over [a, b].
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate_finite needs finite endpoints"));
    }
    if a >= b {
        return Ok(0.0);
    }
    // Seed with a few interior knots so narrow features away from the
    // endpoints are not missed by the first coarse pass.
    let knots = [
        a,
        a + 0.25 * (b - a),
        a + 0.5 * (b - a),
        a + 0.75 * (b - a),
        b,
    ];
    adaptive(&f, &knots, spec)
}

/// Integral of f over [0, infinity) via the substitution x = t/(1-t), which
/// maps the half line onto [0, 1). No truncation is involved; decaying
/// integrands get exact tail treatment from the transformed rule.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let g = move |t: f64| {
        let omt = 1.0 - t;
        let x = t / omt;
        if !x.is_finite() {
            return 0.0;
        }
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx / (omt * omt)
        }
    };
    // Knots chosen so [0, truncation_radius] is resolved from the start.
    let r = spec.truncation_radius;
    let xs = [0.0, 0.25, 1.0, 4.0, r, 4.0 * r];
    let mut knots: Vec<f64> = xs.iter().map(|&x| x / (1.0 + x)).collect();
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    adaptive(&g, &knots, spec)
}
