//! Nakagami-m fading model: the squared envelope is Gamma distributed with
//! shape m and unit mean, the phase is uniform and independent. m = 1/2 is the
//! one-sided Gaussian envelope, m = 1 is Rayleigh, and large m approaches a
//! non-fading channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::{numerics, Error, Result};

/// Fading law parameters. The mean power is fixed at one so SNR bookkeeping
/// stays in the noise variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadingParams {
    /// Nakagami shape parameter, m >= 1/2.
    pub m: f64,
    /// Mean of the squared envelope; always 1.0 in this crate.
    pub mean_power: f64,
}

impl FadingParams {
    pub fn new(m: f64) -> Result<Self> {
        if !m.is_finite() || m < 0.5 {
            return Err(Error::domain(format!(
                "Nakagami shape must satisfy m >= 0.5, got {m}"
            )));
        }
        Ok(FadingParams { m, mean_power: 1.0 })
    }
}

/// One fading realization per anchor: envelopes |h_i| and phases in [0, 2pi).
#[derive(Clone, Debug)]
pub struct FadingDraw {
    pub envelopes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl FadingDraw {
    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }
}

/// Density of the squared envelope: Gamma with shape m, scale 1/m,
/// f(x) = m^m x^(m-1) e^(-m x) / Gamma(m). Evaluated in log space so large
/// shapes do not overflow the m^m factor.
pub fn gamma_power_pdf(x: f64, params: &FadingParams) -> Result<f64> {
    Ok(ln_gamma_power_pdf(x, params)?.map_or(0.0, f64::exp))
}

/// Log-density of the squared envelope, None when the density is zero.
/// Exposed for integrations that must stay in log space at large m.
pub fn ln_gamma_power_pdf(x: f64, params: &FadingParams) -> Result<Option<f64>> {
    let m = FadingParams::new(params.m)?.m;
    if x < 0.0 {
        return Ok(None);
    }
    if x == 0.0 {
        // The m = 1 law is Exp(1) with density 1 at the origin; smaller or
        // larger shapes vanish or diverge there, neither of which carries mass.
        return Ok(if m == 1.0 { Some(0.0) } else { None });
    }
    let ln = m * m.ln() + (m - 1.0) * x.ln() - m * x - numerics::ln_gamma(m)?;
    Ok(Some(ln))
}

/// Draws `count` independent envelope/phase pairs.
pub fn sample_fading<R: Rng>(params: &FadingParams, count: usize, rng: &mut R) -> Result<FadingDraw> {
    let params = FadingParams::new(params.m)?;
    let gamma = Gamma::new(params.m, 1.0 / params.m)
        .map_err(|e| Error::domain(format!("gamma sampler rejected shape {}: {e}", params.m)))?;
    let mut envelopes = Vec::with_capacity(count);
    let mut phases = Vec::with_capacity(count);
    for _ in 0..count {
        let power: f64 = gamma.sample(rng);
        envelopes.push(power.sqrt());
        phases.push(rng.random::<f64>() * std::f64::consts::TAU);
    }
    Ok(FadingDraw { envelopes, phases })
}

/// Counter-based RNG for reproducible parallel Monte Carlo: one global seed,
/// one stream per trial. Trials can then run on any number of workers without
/// changing a single draw.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
