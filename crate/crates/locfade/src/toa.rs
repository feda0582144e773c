//! Time-of-arrival measurement models. A measurement at anchor i is
//! tau_i = d_i/c + n_i where the noise n_i is zero-mean Gaussian whose
//! variance depends on the channel knowledge available:
//!
//! - `Awgn`: variance sigma^2 (no fading),
//! - `KnownFading`: variance sigma^2 / |h|^2 conditional on a known envelope,
//! - `NakagamiMarginal`: the `KnownFading` law averaged over the Nakagami
//!   envelope prior (heavy-tailed closed form),
//! - `NoCsiMarginal`: variance sigma^2 / (|h|^2 (1 - sin 2theta)) conditional
//!   on envelope and phase, averaged over both when marginalized,
//! - `NoCsiAltBranch`: the two-branch variant with per-branch variance
//!   sigma^2 / (|h|^2 cos^2 theta); the two branch estimates are averaged.

use rand::Rng;

use crate::channel::{sample_fading, FadingDraw, FadingParams};
use crate::{distance, numerics, Error, Point, Result};

/// Channel-knowledge regime of the measurement model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Awgn,
    KnownFading,
    NakagamiMarginal,
    NoCsiMarginal,
    NoCsiAltBranch,
}

/// Measurement model shared by densities, samplers, bounds, and estimators.
#[derive(Clone, Copy, Debug)]
pub struct ToaModel {
    pub regime: Regime,
    /// Baseline noise standard deviation in seconds.
    pub sigma: f64,
    /// Propagation speed in meters per second.
    pub c: f64,
    /// Nakagami shape parameter of the fading prior.
    pub m: f64,
}

impl ToaModel {
    pub fn new(regime: Regime, sigma: f64, c: f64, m: f64) -> Result<Self> {
        let model = ToaModel { regime, sigma, c, m };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain(format!("c must be positive, got {}", self.c)));
        }
        if self.regime != Regime::Awgn {
            FadingParams::new(self.m)?;
        }
        Ok(())
    }

    fn with_sigma(&self, sigma: f64) -> ToaModel {
        ToaModel { sigma, ..*self }
    }
}

/// One vector of TOA measurements, one entry per anchor. When anchors have
/// unequal noise levels the per-anchor sigmas ride along with the data.
#[derive(Clone, Debug)]
pub struct ToaSample {
    pub values: Vec<f64>,
    pub per_anchor_sigma: Option<Vec<f64>>,
}

impl ToaSample {
    /// Noise level for anchor i, falling back to the model's shared sigma.
    pub fn sigma_for(&self, i: usize, model: &ToaModel) -> f64 {
        self.per_anchor_sigma
            .as_ref()
            .map_or(model.sigma, |s| s[i])
    }
}

fn gaussian_pdf(u: f64, variance: f64) -> f64 {
    (-0.5 * u * u / variance).exp() / (std::f64::consts::TAU * variance).sqrt()
}

/// Scaling 1 - sin(2 theta) of the no-CSI conditional precision; zero at the
/// singular phase where the scheme carries no range information.
fn nocsi_phase_factor(phase: f64) -> f64 {
    1.0 - (2.0 * phase).sin()
}

/// Density of one measurement conditional on a fading realization.
/// `phase` is required by the no-CSI regimes and ignored elsewhere.
pub fn pdf_conditional(
    tau: f64,
    d: f64,
    model: &ToaModel,
    envelope: f64,
    phase: Option<f64>,
) -> Result<f64> {
    model.validate()?;
    let u = tau - d / model.c;
    let sigma2 = model.sigma * model.sigma;
    let variance = match model.regime {
        Regime::Awgn => sigma2,
        Regime::KnownFading | Regime::NakagamiMarginal => {
            check_envelope(envelope)?;
            sigma2 / (envelope * envelope)
        }
        Regime::NoCsiMarginal => {
            check_envelope(envelope)?;
            let s = nocsi_phase_factor(require_phase(phase)?);
            if s <= 0.0 {
                return Err(Error::degenerate_channel(
                    "phase at the singular point: conditional variance is infinite",
                ));
            }
            sigma2 / (envelope * envelope * s)
        }
        Regime::NoCsiAltBranch => {
            check_envelope(envelope)?;
            let cos = require_phase(phase)?.cos();
            if cos == 0.0 {
                return Err(Error::degenerate_channel(
                    "branch carrier is orthogonal to the signal: no range information",
                ));
            }
            sigma2 / (envelope * envelope * cos * cos)
        }
    };
    Ok(gaussian_pdf(u, variance))
}

fn check_envelope(envelope: f64) -> Result<()> {
    if envelope > 0.0 && envelope.is_finite() {
        Ok(())
    } else {
        Err(Error::degenerate_channel(format!(
            "envelope must be positive, got {envelope}"
        )))
    }
}

fn require_phase(phase: Option<f64>) -> Result<f64> {
    phase.ok_or_else(|| Error::domain("this regime requires a phase"))
}

/// Log of the Nakagami-averaged density, evaluated in log space so large
/// shape parameters stay finite.
fn ln_nakagami_marginal(u: f64, sigma: f64, m: f64) -> Result<f64> {
    let sigma2 = sigma * sigma;
    let core = u * u / (2.0 * sigma2) + m;
    Ok(m * m.ln() + numerics::ln_gamma(m + 0.5)? - numerics::ln_gamma(m)?
        - 0.5 * (std::f64::consts::TAU * sigma2).ln()
        - (m + 0.5) * core.ln())
}

/// Hypergeometric factor of the no-CSI marginal: 2F1(1, 1-m; 3/2; z).
/// `omz` is 1 - z computed without cancellation. Returns None when the series
/// route cannot reach tolerance and the caller should integrate over the
/// phase instead.
fn nocsi_hyp_factor(m: f64, z: f64, omz: f64) -> Result<Option<f64>> {
    if (m - 0.5).abs() < 1e-12 {
        // 2F1(1, 1/2; 3/2; z) = atanh(sqrt z)/sqrt z, stable via omz.
        let r = z.sqrt();
        if r < 1e-6 {
            return Ok(Some(1.0 + z / 3.0));
        }
        let atanh = 0.5 * ((1.0 + r) * (1.0 + r) / omz).ln();
        return Ok(Some(atanh / r));
    }
    let b = 1.0 - m;
    let terminating = b <= 1e-9 && (b - b.round()).abs() < 1e-9;
    if terminating || z <= 0.99 {
        return numerics::hyp2f1(1.0, b, 1.5, z).map(Some);
    }
    Ok(None)
}

/// Density of one measurement with the fading nuisance integrated out.
/// Supported for `Awgn` (trivially) and the two marginal regimes.
pub fn pdf_marginal(tau: f64, d: f64, model: &ToaModel) -> Result<f64> {
    ln_pdf_marginal(tau, d, model).map(f64::exp)
}

/// Log of [`pdf_marginal`]; the preferred form for likelihood sums.
pub fn ln_pdf_marginal(tau: f64, d: f64, model: &ToaModel) -> Result<f64> {
    model.validate()?;
    let u = tau - d / model.c;
    let sigma = model.sigma;
    let m = model.m;
    match model.regime {
        Regime::Awgn => Ok(gaussian_pdf(u, sigma * sigma).ln()),
        Regime::NakagamiMarginal => ln_nakagami_marginal(u, sigma, m),
        Regime::NoCsiMarginal => {
            if (m - 1.0).abs() < 1e-12 {
                // Rayleigh fading with unknown phase gives a Cauchy law.
                let denom = std::f64::consts::PI * (sigma * sigma + u * u);
                return Ok(sigma.ln() - denom.ln());
            }
            let denom = u * u + m * sigma * sigma;
            let z = u * u / denom;
            let omz = m * sigma * sigma / denom;
            if let Some(factor) = nocsi_hyp_factor(m, z, omz)? {
                let ln_pref = (2.0 * sigma).ln() + 0.5 * m.ln()
                    + numerics::ln_gamma(m + 0.5)?
                    - numerics::ln_gamma(m)?
                    - 1.5 * std::f64::consts::PI.ln()
                    - denom.ln();
                Ok(ln_pref + factor.ln())
            } else {
                // Deep tail of a non-polynomial case: average the
                // envelope-marginalized law over the phase directly.
                let spec = numerics::QuadratureSpec::default();
                let v = numerics::integrate_finite(
                    |theta| {
                        let s = nocsi_phase_factor(theta);
                        if s <= 1e-300 {
                            0.0
                        } else {
                            ln_nakagami_marginal(u, sigma / s.sqrt(), m)
                                .map_or(0.0, f64::exp)
                        }
                    },
                    0.0,
                    std::f64::consts::TAU,
                    &spec,
                )?;
                Ok((v / std::f64::consts::TAU).ln())
            }
        }
        Regime::KnownFading | Regime::NoCsiAltBranch => Err(Error::unsupported_regime(
            "marginal density is defined for Awgn, NakagamiMarginal, and NoCsiMarginal",
        )),
    }
}

/// Sum of marginal log densities over all anchors, honoring per-anchor noise
/// levels carried by the sample.
pub fn log_likelihood(
    sample: &ToaSample,
    node: Point,
    anchors: &[Point],
    model: &ToaModel,
) -> Result<f64> {
    if sample.values.len() != anchors.len() {
        return Err(Error::domain(format!(
            "sample has {} values for {} anchors",
            sample.values.len(),
            anchors.len()
        )));
    }
    if let Some(s) = &sample.per_anchor_sigma {
        if s.len() != anchors.len() {
            return Err(Error::domain("per-anchor sigma length mismatch"));
        }
    }
    let mut total = 0.0;
    for (i, (&tau, &anchor)) in sample.values.iter().zip(anchors).enumerate() {
        let d = distance(node, anchor, 2);
        let model_i = model.with_sigma(sample.sigma_for(i, model));
        total += ln_pdf_marginal(tau, d, &model_i)?;
    }
    Ok(total)
}

/// Draws one TOA vector. With `draw` supplied the measurement is conditional
/// on that fading realization; with `draw = None` the marginal regimes
/// generate their own fading internally (compound sampling). `KnownFading`
/// always needs an explicit draw, since its premise is a channel the anchors
/// know.
pub fn sample_toa<R: Rng>(
    node: Point,
    anchors: &[Point],
    model: &ToaModel,
    draw: Option<&FadingDraw>,
    rng: &mut R,
) -> Result<ToaSample> {
    model.validate()?;
    if let Some(d) = draw {
        if d.len() != anchors.len() {
            return Err(Error::domain(format!(
                "fading draw has {} entries for {} anchors",
                d.len(),
                anchors.len()
            )));
        }
    }
    if model.regime == Regime::KnownFading && draw.is_none() {
        return Err(Error::domain("KnownFading sampling requires an explicit fading draw"));
    }

    let params = FadingParams::new(model.m.max(0.5))?;
    let mut values = Vec::with_capacity(anchors.len());
    for (i, &anchor) in anchors.iter().enumerate() {
        let mean = distance(node, anchor, 2) / model.c;
        let noise = |rng: &mut R| -> f64 {
            // Box-free standard normal via rand_distr.
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
        };
        let tau = match model.regime {
            Regime::Awgn => mean + model.sigma * noise(rng),
            Regime::KnownFading | Regime::NakagamiMarginal => {
                let h = match draw {
                    Some(d) => d.envelopes[i],
                    None => sample_fading(&params, 1, rng)?.envelopes[0],
                };
                check_envelope(h)?;
                mean + model.sigma / h * noise(rng)
            }
            Regime::NoCsiMarginal => {
                let (h, s) = match draw {
                    Some(d) => {
                        let s = nocsi_phase_factor(d.phases[i]);
                        if s <= 0.0 {
                            return Err(Error::degenerate_channel(
                                "supplied phase sits at the singular point",
                            ));
                        }
                        (d.envelopes[i], s)
                    }
                    None => loop {
                        let f = sample_fading(&params, 1, rng)?;
                        let s = nocsi_phase_factor(f.phases[0]);
                        // The singular phase is a null set; skip draws too
                        // close to it to keep samples finite.
                        if s >= 1e-12 {
                            break (f.envelopes[0], s);
                        }
                    },
                };
                check_envelope(h)?;
                mean + model.sigma / (h * s.sqrt()) * noise(rng)
            }
            Regime::NoCsiAltBranch => {
                let (h, theta) = match draw {
                    Some(d) => (d.envelopes[i], d.phases[i]),
                    None => loop {
                        let f = sample_fading(&params, 1, rng)?;
                        let s2 = (2.0 * f.phases[0]).sin();
                        if s2 * s2 >= 1e-12 {
                            break (f.envelopes[0], f.phases[0]);
                        }
                    },
                };
                check_envelope(h)?;
                let (sin, cos) = theta.sin_cos();
                if sin == 0.0 || cos == 0.0 {
                    return Err(Error::degenerate_channel(
                        "supplied phase zeroes one branch",
                    ));
                }
                let t1 = mean + model.sigma / (h * cos.abs()) * noise(rng);
                let t2 = mean + model.sigma / (h * sin.abs()) * noise(rng);
                0.5 * (t1 + t2)
            }
        };
        values.push(tau);
    }
    Ok(ToaSample { values, per_anchor_sigma: None })
}

/// Per-branch variance inflation of the two-branch no-CSI scheme relative to
/// the single-branch form: exactly 2, from the phase shift theta - pi/4
/// mapping one conditional variance onto the other.
pub fn alt_branch_variance_ratio(model: &ToaModel) -> Result<f64> {
    if model.regime != Regime::NoCsiAltBranch {
        return Err(Error::unsupported_regime(
            "variance ratio is defined for the NoCsiAltBranch regime",
        ));
    }
    Ok(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::trial_rng;
    use approx::assert_abs_diff_eq;

    fn model(regime: Regime, sigma: f64, m: f64) -> ToaModel {
        ToaModel::new(regime, sigma, 1.0, m).unwrap()
    }

    #[test]
    fn conditional_density_scales_with_the_envelope() {
        let m = model(Regime::KnownFading, 0.4, 1.0);
        let v = pdf_conditional(0.3, 0.1, &m, 2.0, None).unwrap();
        let expect = gaussian_pdf(0.2, 0.4 * 0.4 / 4.0);
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        assert!(
            pdf_conditional(0.3, 0.1, &m, 0.0, None).is_err(),
            "zero envelope means infinite variance"
        );
    }

    #[test]
    fn nocsi_conditional_handles_the_singular_phase() {
        let m = model(Regime::NoCsiMarginal, 0.4, 1.0);
        let v = pdf_conditional(0.3, 0.1, &m, 1.0, Some(0.0)).unwrap();
        assert_abs_diff_eq!(v, gaussian_pdf(0.2, 0.16), epsilon = 1e-12);
        let at_singularity = pdf_conditional(0.3, 0.1, &m, 1.0, Some(std::f64::consts::FRAC_PI_4));
        assert!(at_singularity.is_err(), "sin(2 theta) = 1 has no usable information");
        assert!(
            pdf_conditional(0.3, 0.1, &m, 1.0, None).is_err(),
            "phase is required in the no-CSI regime"
        );
    }

    #[test]
    fn rayleigh_marginal_peak_matches_the_closed_form() {
        // Peak value Gamma(3/2)/sqrt(2 pi)/sigma at the true arrival time.
        for &sigma in &[0.5, 1.0, 2.0] {
            let m = model(Regime::NakagamiMarginal, sigma, 1.0);
            let peak = pdf_marginal(0.7, 0.7, &m).unwrap();
            assert_abs_diff_eq!(peak, 0.35355339059327376 / sigma, epsilon = 1e-12 / sigma);
        }
    }

    #[test]
    fn marginals_are_symmetric_about_the_arrival_time() {
        let nak = model(Regime::NakagamiMarginal, 0.8, 2.5);
        let ncsi = model(Regime::NoCsiMarginal, 0.8, 2.5);
        for &du in &[0.1, 0.5, 1.3, 4.0] {
            for m in [&nak, &ncsi] {
                let lo = pdf_marginal(1.0 - du, 1.0, m).unwrap();
                let hi = pdf_marginal(1.0 + du, 1.0, m).unwrap();
                assert_abs_diff_eq!(lo, hi, epsilon = 1e-12 * hi.max(1e-30));
            }
        }
    }

    #[test]
    fn rayleigh_no_csi_marginal_is_cauchy() {
        let m = model(Regime::NoCsiMarginal, 0.6, 1.0);
        for &u in &[0.0, 0.3, 2.0] {
            let v = pdf_marginal(u, 0.0, &m).unwrap();
            let cauchy = 0.6 / (std::f64::consts::PI * (0.36 + u * u));
            assert_abs_diff_eq!(v, cauchy, epsilon = 1e-13);
        }
    }

    #[test]
    fn half_order_nakagami_equals_rayleigh_no_csi() {
        // The two families meet: shape 1/2 with known envelope statistics is
        // the same density as shape 1 with unknown phase.
        let nak_half = model(Regime::NakagamiMarginal, 0.9, 0.5);
        let ncsi_one = model(Regime::NoCsiMarginal, 0.9, 1.0);
        for i in 0..100 {
            let u = -5.0 + 0.1 * i as f64;
            let a = pdf_marginal(u, 0.0, &nak_half).unwrap();
            let b = pdf_marginal(u, 0.0, &ncsi_one).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn marginal_densities_integrate_to_one() {
        let spec = numerics::QuadratureSpec::default();
        for &shape in &[0.5, 1.0, 2.0, 4.0] {
            for regime in [Regime::NakagamiMarginal, Regime::NoCsiMarginal] {
                let m = model(regime, 1.0, shape);
                // Symmetric density: twice the mass on [0, inf).
                let mass = 2.0
                    * numerics::integrate_semi_infinite(
                        |u| pdf_marginal(u, 0.0, &m).unwrap(),
                        &spec,
                    )
                    .unwrap();
                assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn fractional_shape_tail_falls_back_to_phase_quadrature() {
        // m = 2.5 at a deep-tail point drives z past the series cutoff; the
        // phase-average route must agree with the series on its own turf.
        let m = model(Regime::NoCsiMarginal, 0.1, 2.5);
        let deep = pdf_marginal(5.0, 0.0, &m).unwrap();
        assert!(deep > 0.0 && deep < 1e-3, "deep tail should be small, got {deep}");
        // Cross-check at a point both routes can evaluate.
        let u = 0.5f64;
        let denom = u * u + 2.5 * 0.01;
        let z = u * u / denom;
        assert!(z > 0.9, "test point exercises the near-boundary branch, z = {z}");
        let series = {
            let factor = numerics::hyp2f1(1.0, -1.5, 1.5, z).unwrap();
            let ln_pref = (2.0 * 0.1f64).ln() + 0.5 * 2.5f64.ln()
                + numerics::ln_gamma(3.0).unwrap()
                - numerics::ln_gamma(2.5).unwrap()
                - 1.5 * std::f64::consts::PI.ln()
                - denom.ln();
            (ln_pref + factor.ln()).exp()
        };
        assert_abs_diff_eq!(pdf_marginal(u, 0.0, &m).unwrap(), series, epsilon = 1e-8 * series);
    }

    #[test]
    fn large_shape_marginal_approaches_the_gaussian() {
        let m = model(Regime::NakagamiMarginal, 1.0, 64.0);
        let peak = gaussian_pdf(0.0, 1.0);
        for i in 0..=60 {
            let u = -3.0 + 0.1 * i as f64;
            let diff = (pdf_marginal(u, 0.0, &m).unwrap() - gaussian_pdf(u, 1.0)).abs();
            assert!(diff < 0.02 * peak, "at u = {u} the gap {diff} exceeds 2% of the peak");
        }
    }

    #[test]
    fn monte_carlo_average_of_conditionals_recovers_the_marginal() {
        let trials = 2_000_000usize;
        for (regime, shape, u) in [
            (Regime::NakagamiMarginal, 1.0, 0.0),
            (Regime::NakagamiMarginal, 2.0, 1.0),
            (Regime::NoCsiMarginal, 1.0, 0.5),
        ] {
            let m = model(regime, 1.0, shape);
            let params = FadingParams::new(shape).unwrap();
            let mut rng = trial_rng(99, 0);
            let draw = sample_fading(&params, trials, &mut rng).unwrap();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut kept = 0usize;
            for i in 0..trials {
                let phase = Some(draw.phases[i]);
                let s = nocsi_phase_factor(draw.phases[i]);
                if regime == Regime::NoCsiMarginal && s <= 0.0 {
                    continue;
                }
                let v = pdf_conditional(u, 0.0, &m, draw.envelopes[i], phase).unwrap();
                sum += v;
                sum_sq += v * v;
                kept += 1;
            }
            let mean = sum / kept as f64;
            let se = ((sum_sq / kept as f64 - mean * mean) / kept as f64).sqrt();
            let marginal = pdf_marginal(u, 0.0, &m).unwrap();
            assert!(
                (mean - marginal).abs() < 1e-4_f64.max(5.0 * se),
                "regime {regime:?} m={shape} u={u}: MC {mean} vs marginal {marginal} (se {se})"
            );
        }
    }

    fn chi_square_vs_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let bins = 20usize;
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let u = cdf(x).clamp(0.0, 1.0 - 1e-12);
            counts[(u * bins as f64) as usize] += 1;
        }
        let expected = samples.len() as f64 / bins as f64;
        counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    }

    #[test]
    fn compound_sampler_matches_the_rayleigh_marginal_distribution() {
        let m = model(Regime::NakagamiMarginal, 0.7, 1.0);
        let mut rng = trial_rng(5, 0);
        let mut samples = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let s = sample_toa([0.0, 0.0], &[[1.0, 0.0]], &m, None, &mut rng).unwrap();
            samples.push(s.values[0] - 1.0);
        }
        // Closed-form CDF of the shape-1 marginal (a scaled two-degree
        // Student law): 1/2 + (u/sigma) / (2 sqrt(2 + (u/sigma)^2)).
        let chi2 = chi_square_vs_cdf(&samples, |u| {
            let t = u / 0.7;
            0.5 + t / (2.0 * (2.0 + t * t).sqrt())
        });
        assert!(chi2 < 43.82, "chi-square {chi2:.2} vs the 0.999 quantile of chi2(19)");
    }

    #[test]
    fn compound_sampler_matches_the_cauchy_no_csi_law() {
        let m = model(Regime::NoCsiMarginal, 0.7, 1.0);
        let mut rng = trial_rng(6, 0);
        let mut samples = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let s = sample_toa([0.0, 0.0], &[[1.0, 0.0]], &m, None, &mut rng).unwrap();
            samples.push(s.values[0] - 1.0);
        }
        let chi2 = chi_square_vs_cdf(&samples, |u| {
            0.5 + (u / 0.7).atan() / std::f64::consts::PI
        });
        assert!(chi2 < 43.82, "chi-square {chi2:.2} vs the 0.999 quantile of chi2(19)");
    }

    #[test]
    fn alt_branch_variance_identity_is_exact() {
        // sigma^2 / cos^2(theta) equals 2 sigma^2 / (1 - sin(2 (theta - pi/4)))
        // pointwise: the two-branch scheme is the single-branch scheme at a
        // quarter-turn phase offset, with exactly twice the variance.
        for i in 0..100 {
            let theta = -1.5 + 0.03 * i as f64;
            let cos = theta.cos();
            if cos.abs() < 0.05 {
                continue;
            }
            let branch = 1.0 / (cos * cos);
            let shifted = 2.0 / nocsi_phase_factor(theta - std::f64::consts::FRAC_PI_4);
            assert_abs_diff_eq!(branch, shifted, epsilon = 1e-11 * branch);
        }
        let m = model(Regime::NoCsiAltBranch, 1.0, 1.0);
        assert_eq!(alt_branch_variance_ratio(&m).unwrap(), 2.0);
        let wrong = model(Regime::NakagamiMarginal, 1.0, 1.0);
        assert!(alt_branch_variance_ratio(&wrong).is_err());
    }

    #[test]
    fn alt_branch_mean_precision_is_half_per_branch_and_equal_combined() {
        // E[1/variance] ratios: one branch carries half the precision of the
        // single-branch scheme; the two branches together restore parity.
        let params = FadingParams::new(1.0).unwrap();
        let mut rng = trial_rng(17, 0);
        let draw = sample_fading(&params, 100_000, &mut rng).unwrap();
        let (mut branch, mut scheme1, mut combined) = (0.0, 0.0, 0.0);
        for i in 0..draw.len() {
            let h2 = draw.envelopes[i] * draw.envelopes[i];
            let theta = draw.phases[i];
            branch += h2 * theta.cos() * theta.cos();
            combined += h2; // cos^2 + sin^2
            scheme1 += h2 * nocsi_phase_factor(theta);
        }
        assert_abs_diff_eq!(scheme1 / branch, 2.0, epsilon = 0.05);
        assert_abs_diff_eq!(combined / scheme1, 1.0, epsilon = 0.05);
    }

    #[test]
    fn log_likelihood_honors_per_anchor_noise_levels() {
        let m = model(Regime::NakagamiMarginal, 1.0, 1.0);
        let anchors = [[0.0, 0.0], [4.0, 0.0]];
        let sample = ToaSample {
            values: vec![1.2, 3.1],
            per_anchor_sigma: Some(vec![0.5, 2.0]),
        };
        let ll = log_likelihood(&sample, [1.0, 0.0], &anchors, &m).unwrap();
        let by_hand = ln_pdf_marginal(1.2, 1.0, &m.with_sigma(0.5)).unwrap()
            + ln_pdf_marginal(3.1, 3.0, &m.with_sigma(2.0)).unwrap();
        assert_abs_diff_eq!(ll, by_hand, epsilon = 1e-12);
        let mismatched = ToaSample { values: vec![1.2], per_anchor_sigma: None };
        assert!(log_likelihood(&mismatched, [1.0, 0.0], &anchors, &m).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_known_fading_needs_a_draw() {
        let m = model(Regime::NakagamiMarginal, 0.3, 1.5);
        let anchors = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let a = sample_toa([0.4, 0.4], &anchors, &m, None, &mut trial_rng(8, 3)).unwrap();
        let b = sample_toa([0.4, 0.4], &anchors, &m, None, &mut trial_rng(8, 3)).unwrap();
        assert_eq!(a.values, b.values, "same seed and stream must reproduce the sample");

        let kf = model(Regime::KnownFading, 0.3, 1.5);
        assert!(sample_toa([0.4, 0.4], &anchors, &kf, None, &mut trial_rng(8, 0)).is_err());
        let params = FadingParams::new(1.5).unwrap();
        let draw = sample_fading(&params, 3, &mut trial_rng(8, 1)).unwrap();
        let s = sample_toa([0.4, 0.4], &anchors, &kf, Some(&draw), &mut trial_rng(8, 2)).unwrap();
        assert_eq!(s.values.len(), 3);
        let short = FadingDraw { envelopes: vec![1.0], phases: vec![0.0] };
        assert!(
            sample_toa([0.4, 0.4], &anchors, &kf, Some(&short), &mut trial_rng(8, 2)).is_err(),
            "draw length must match the anchor count"
        );
    }

    #[test]
    fn awgn_sample_statistics_match_the_model() {
        let m = model(Regime::Awgn, 0.25, 1.0);
        let mut rng = trial_rng(21, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let s = sample_toa([0.0, 0.0], &[[2.0, 0.0]], &m, None, &mut rng).unwrap();
            let u = s.values[0] - 2.0;
            sum += u;
            sumsq += u * u;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.002);
        assert_abs_diff_eq!(var, 0.0625, epsilon = 0.001);
    }
}
