//! Beacon detection at the anchors.
//!
//! Three receivers share one correlator front end. When the channel gain is
//! known, the matched filter uses a gain-dependent threshold; when only the
//! fading law is known, the same statistic is compared against a constant;
//! and when nothing about the channel is available, a quadratic form built
//! from the in-phase and quadrature branches takes over. Every analytic
//! false-alarm or detection probability here has a Monte Carlo twin with the
//! same interface, so closed forms can be checked instead of trusted.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{self, trial_rng, FadingParams};
use crate::error::{Error, Result};
use crate::numerics::{self, QuadratureSpec};

/// Burst length used when callers do not supply their own template.
pub const DEFAULT_TEMPLATE_LEN: usize = 64;

/// Chip seed for the default template, fixed so every run correlates against
/// the same waveform.
pub const DEFAULT_TEMPLATE_SEED: u64 = 7;

/// Seed for the Monte Carlo halves of the threshold comparison report.
const OPTIMALITY_MC_SEED: u64 = 0x0b5e_55ed;

/// Receiver family a threshold calibration targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorRegime {
    /// Correlator with per-realization channel knowledge and the matching
    /// gain-dependent threshold.
    CoherentKnownH,
    /// Correlator compared against one constant threshold chosen from the
    /// fading-averaged false-alarm rate.
    RayleighMarginal,
    /// Quadratic receiver that uses no channel state at all.
    NoCsiQuadratic,
}

/// One operating point: false-alarm and detection probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
}

/// Unit-energy beacon waveform plus its circular delay.
///
/// The chips are a fixed pseudo-random sign sequence scaled to unit energy;
/// any unit-energy template produces the same statistic laws, so the exact
/// sequence only matters for reproducibility. The carrier rate controls the
/// in-phase and quadrature branches used by the quadratic receiver. At the
/// default quarter-cycle rate the two branches land on disjoint sample
/// supports, which keeps their Gram matrix exactly diagonal.
#[derive(Clone, Debug)]
pub struct SignalTemplate {
    pub samples: Vec<f64>,
    /// Circular shift applied before correlation, in samples.
    pub delay: usize,
    /// Design energy of the chip sequence; validation checks the realized sum.
    pub energy: f64,
    pub carrier_cycles_per_sample: f64,
}

impl SignalTemplate {
    /// Fixed-seed random sign template of length `n` with unit energy.
    pub fn pseudo_random(n: usize, seed: u64) -> Result<Self> {
        if n < 8 {
            return Err(Error::validation(
                "samples",
                format!("template needs at least 8 samples, got {n}"),
            ));
        }
        let amp = 1.0 / (n as f64).sqrt();
        let mut rng = trial_rng(seed, 0);
        let samples = (0..n)
            .map(|_| if rng.random::<f64>() < 0.5 { -amp } else { amp })
            .collect();
        let made = SignalTemplate {
            samples,
            delay: 0,
            energy: 1.0,
            carrier_cycles_per_sample: 0.25,
        };
        made.validate()?;
        Ok(made)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        if n < 8 {
            return Err(Error::validation(
                "samples",
                format!("template needs at least 8 samples, got {n}"),
            ));
        }
        if self.delay >= n {
            return Err(Error::validation(
                "delay",
                format!("circular delay {} must be below the length {n}", self.delay),
            ));
        }
        if !(self.energy > 0.0 && self.energy.is_finite()) {
            return Err(Error::validation(
                "energy",
                format!("energy must be positive and finite, got {}", self.energy),
            ));
        }
        let realized: f64 = self.samples.iter().map(|s| s * s).sum();
        if (realized - self.energy).abs() > 1e-12 * self.energy.max(1.0) {
            return Err(Error::validation(
                "energy",
                format!("chip energy {realized} does not match the declared {}", self.energy),
            ));
        }
        let f = self.carrier_cycles_per_sample;
        if !(f > 0.0 && f < 0.5) {
            return Err(Error::validation(
                "carrier_cycles_per_sample",
                format!("carrier rate must sit strictly inside (0, 0.5), got {f}"),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Chip sequence rotated right by the circular delay; this is the
    /// waveform as it appears at the receiver.
    pub fn delayed_samples(&self) -> Vec<f64> {
        let n = self.samples.len();
        let mut out = vec![0.0; n];
        for (i, &s) in self.samples.iter().enumerate() {
            out[(i + self.delay) % n] = s;
        }
        out
    }

    /// In-phase and quadrature branch waveforms: the delayed chips multiplied
    /// by cosine and sine of the carrier. The quarter-cycle carrier uses an
    /// exact sign table so the branch energies and cross terms carry no
    /// rounding at all.
    pub fn quadrature_pair(&self) -> (Vec<f64>, Vec<f64>) {
        let base = self.delayed_samples();
        let n = base.len();
        let mut inphase = vec![0.0; n];
        let mut quadrature = vec![0.0; n];
        let quarter = self.carrier_cycles_per_sample == 0.25;
        for (i, &b) in base.iter().enumerate() {
            let (c, s) = if quarter {
                match i % 4 {
                    0 => (1.0, 0.0),
                    1 => (0.0, 1.0),
                    2 => (-1.0, 0.0),
                    _ => (0.0, -1.0),
                }
            } else {
                let arg = std::f64::consts::TAU * self.carrier_cycles_per_sample * i as f64;
                (arg.cos(), arg.sin())
            };
            inphase[i] = b * c;
            quadrature[i] = b * s;
        }
        (inphase, quadrature)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!(
            "noise level must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_lengths(received: &[f64], template: &SignalTemplate) -> Result<()> {
    template.validate()?;
    if received.len() != template.len() {
        return Err(Error::validation(
            "received",
            format!(
                "received burst has {} samples but the template has {}",
                received.len(),
                template.len()
            ),
        ));
    }
    Ok(())
}

/// Correlator against a pre-rotated template, normalized by the noise level.
fn statistic_from_base(received: &[f64], base: &[f64], sigma: f64) -> f64 {
    dot(received, base) / sigma
}

/// Normalized correlator statistic. Under noise alone it is standard normal;
/// with a beacon of gain `a` present its mean shifts to `a / sigma` while the
/// variance stays one.
pub fn statistic_coherent(received: &[f64], template: &SignalTemplate, sigma: f64) -> Result<f64> {
    check_lengths(received, template)?;
    check_sigma(sigma)?;
    Ok(statistic_from_base(received, &template.delayed_samples(), sigma))
}

/// Gain-dependent threshold for the normalized correlator:
/// sigma ln(gamma) / h + h / (2 sigma). The instantaneous false-alarm rate is
/// Q of this value and the instantaneous detection rate is Q of it minus
/// h / sigma.
pub fn threshold_coherent(gamma: f64, envelope: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "likelihood threshold must be positive and finite, got {gamma}"
        )));
    }
    if !envelope.is_finite() || envelope <= 0.0 {
        return Err(Error::degenerate_channel(format!(
            "channel gain must be positive to set a gain-dependent threshold, got {envelope}"
        )));
    }
    Ok(sigma * gamma.ln() / envelope + envelope / (2.0 * sigma))
}

/// Operating point of the gain-aware receiver averaged over the fading law:
/// both probabilities are integrals of the instantaneous rates against the
/// squared-envelope density.
pub fn averaged_pfa_pd_coherent(
    gamma: f64,
    sigma: f64,
    m: f64,
    quad: &QuadratureSpec,
) -> Result<RocPoint> {
    check_sigma(sigma)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "likelihood threshold must be positive and finite, got {gamma}"
        )));
    }
    let params = FadingParams::new(m)?;
    let ln_gamma = gamma.ln();
    let thr = move |x: f64| {
        let h = x.sqrt();
        sigma * ln_gamma / h + h / (2.0 * sigma)
    };
    let pfa = numerics::integrate_semi_infinite(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            let w = channel::gamma_power_pdf(x, &params).unwrap_or(0.0);
            if w == 0.0 {
                0.0
            } else {
                numerics::q_function(thr(x)) * w
            }
        },
        quad,
    )?;
    let pd = numerics::integrate_semi_infinite(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            let w = channel::gamma_power_pdf(x, &params).unwrap_or(0.0);
            if w == 0.0 {
                0.0
            } else {
                numerics::q_function(thr(x) - x.sqrt() / sigma) * w
            }
        },
        quad,
    )?;
    Ok(RocPoint { pfa: pfa.clamp(0.0, 1.0), pd: pd.clamp(0.0, 1.0) })
}

/// Operating point of the constant-threshold correlator averaged over the
/// fading law. The false-alarm side needs no integral at all: the statistic
/// is standard normal under noise regardless of the channel, so
/// pfa = Q(threshold) exactly.
pub fn averaged_pfa_pd_marginal(
    gamma_pp: f64,
    sigma: f64,
    m: f64,
    quad: &QuadratureSpec,
) -> Result<RocPoint> {
    check_sigma(sigma)?;
    if !gamma_pp.is_finite() {
        return Err(Error::domain(format!(
            "constant threshold must be finite, got {gamma_pp}"
        )));
    }
    let params = FadingParams::new(m)?;
    let pd = numerics::integrate_semi_infinite(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            let w = channel::gamma_power_pdf(x, &params).unwrap_or(0.0);
            if w == 0.0 {
                0.0
            } else {
                numerics::q_function(gamma_pp - x.sqrt() / sigma) * w
            }
        },
        quad,
    )?;
    Ok(RocPoint { pfa: numerics::q_function(gamma_pp), pd: pd.clamp(0.0, 1.0) })
}

/// Likelihood ratio of the correlator statistic when only the fading law is
/// known, as a function of the statistic `t` and an SNR-like scale `snr_like`
/// (energy over noise power; the natural default is 1 / sigma^2).
///
/// The whole point of this map is that it increases monotonically in `t`, so
/// comparing the likelihood ratio to a threshold is the same decision as
/// comparing the plain statistic to a transformed threshold. The constant
/// threshold receiver relies on exactly that reduction.
pub fn marginal_likelihood_ratio(t: f64, snr_like: f64) -> Result<f64> {
    if !(snr_like > 0.0 && snr_like.is_finite()) {
        return Err(Error::domain(format!(
            "SNR-like scale must be positive and finite, got {snr_like}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::domain(format!("statistic must be finite, got {t}")));
    }
    let s2 = 1.0 + 1.0 / snr_like;
    // The lower tail is evaluated as Q of the negated argument; the naive
    // 1 - Q(t) rounds to zero once Q(t) drops below machine precision, which
    // would flatten the deep left tail of this map.
    Ok(t * (t * t / (2.0 * s2)).exp() * numerics::q_function(-t / s2.sqrt()))
}

/// Constant-threshold decision: correlate, normalize, compare.
pub fn detector_rayleigh_marginal(
    received: &[f64],
    template: &SignalTemplate,
    sigma: f64,
    gamma_pp: f64,
) -> Result<bool> {
    if !gamma_pp.is_finite() {
        return Err(Error::domain(format!(
            "constant threshold must be finite, got {gamma_pp}"
        )));
    }
    let t = statistic_coherent(received, template, sigma)?;
    Ok(t > gamma_pp)
}

/// Quadratic receiver decision plus its statistic.
///
/// The statistic is the mean-square projection of the received burst onto the
/// in-phase and quadrature branches, (1/N) * ((s1.r)^2 + (s2.r)^2). It never
/// goes negative and does not involve the noise level; `sigma` is validated
/// here because the calibrated threshold carries the noise scale, and a
/// nonsensical value would silently mismatch the threshold.
pub fn detector_nocsi_quadratic(
    received: &[f64],
    template: &SignalTemplate,
    sigma: f64,
    gamma: f64,
) -> Result<(bool, f64)> {
    check_lengths(received, template)?;
    check_sigma(sigma)?;
    if !gamma.is_finite() {
        return Err(Error::domain(format!("threshold must be finite, got {gamma}")));
    }
    let (s1, s2) = template.quadrature_pair();
    let a = dot(&s1, received);
    let b = dot(&s2, received);
    let t = (a * a + b * b) / template.len() as f64;
    Ok((t > gamma, t))
}

/// Published closed forms for the quadratic receiver's averaged operating
/// point: pfa = exp(-gamma / (12 sigma^2)) and pd = pfa^(1 / (1 + n / (4 sigma^2))).
///
/// These constants do not follow from the two-degree chi-square law the
/// statistic actually obeys, and Monte Carlo refutes them; they are kept
/// verbatim so the disagreement stays measurable. Use
/// [`averaged_pfa_pd_nocsi_exact`] for probabilities that match simulation.
pub fn averaged_pfa_pd_nocsi_printed(gamma: f64, sigma: f64, n: f64) -> Result<RocPoint> {
    check_sigma(sigma)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "threshold must be non-negative and finite, got {gamma}"
        )));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!(
            "sample count must be positive, got {n}"
        )));
    }
    let pfa = (-gamma / (12.0 * sigma * sigma)).exp();
    let pd = pfa.powf(1.0 / (1.0 + n / (4.0 * sigma * sigma)));
    Ok(RocPoint { pfa, pd })
}

/// Tail probability P(c1 Z1^2 + c2 Z2^2 > t) for independent standard normal
/// Z1, Z2 and positive weights. Equal weights give the exponential closed
/// form; unequal weights reduce to a one-dimensional integral over the
/// smaller-weight coordinate.
pub fn chi_square_mix_tail(c1: f64, c2: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(Error::domain(format!(
            "mixture weights must be positive and finite, got {c1} and {c2}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::domain(format!("threshold must be finite, got {t}")));
    }
    if t <= 0.0 {
        return Ok(1.0);
    }
    let big = c1.max(c2);
    let small = c1.min(c2);
    if (big - small) <= 1e-12 * big {
        return Ok((-t / (c1 + c2)).exp());
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let value = numerics::integrate_semi_infinite(
        |y| {
            let weight = 2.0 * norm * (-0.5 * y * y).exp();
            if weight == 0.0 {
                return 0.0;
            }
            let rem = t - small * y * y;
            let cond = if rem <= 0.0 {
                1.0
            } else {
                2.0 * numerics::q_function((rem / big).sqrt())
            };
            weight * cond
        },
        quad,
    )?;
    Ok(value.clamp(0.0, 1.0))
}

/// Gram matrix eigenvalues of the template's two branch waveforms.
fn branch_eigenvalues(template: &SignalTemplate) -> Result<(f64, f64)> {
    let (s1, s2) = template.quadrature_pair();
    let g11 = dot(&s1, &s1);
    let g22 = dot(&s2, &s2);
    let g12 = dot(&s1, &s2);
    let mean = 0.5 * (g11 + g22);
    let gap = (0.25 * (g11 - g22) * (g11 - g22) + g12 * g12).sqrt();
    let lo = mean - gap;
    if lo.is_nan() || lo <= 1e-12 {
        return Err(Error::degenerate_channel(format!(
            "template branches are linearly dependent (smallest Gram eigenvalue {lo:.3e})"
        )));
    }
    Ok((mean + gap, lo))
}

/// Operating point of the quadratic receiver under the chi-square law its
/// statistic actually follows, for a unit-mean-power Rayleigh channel.
///
/// Under noise the two branch projections are independent zero-mean normals
/// whose variances are sigma^2 times the Gram eigenvalues; with the beacon
/// present each eigenvalue mu picks up mu^2 / 2 of channel power. For the
/// default quarter-cycle template both eigenvalues are exactly 1/2 and both
/// probabilities collapse to plain exponentials.
pub fn averaged_pfa_pd_nocsi_exact(
    gamma: f64,
    sigma: f64,
    template: &SignalTemplate,
    quad: &QuadratureSpec,
) -> Result<RocPoint> {
    template.validate()?;
    check_sigma(sigma)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "threshold must be non-negative and finite, got {gamma}"
        )));
    }
    let n = template.len() as f64;
    let (mu1, mu2) = branch_eigenvalues(template)?;
    let s2 = sigma * sigma;
    let scaled = gamma * n;
    let pfa = chi_square_mix_tail(mu1 * s2, mu2 * s2, scaled, quad)?;
    let pd = chi_square_mix_tail(
        0.5 * mu1 * mu1 + s2 * mu1,
        0.5 * mu2 * mu2 + s2 * mu2,
        scaled,
        quad,
    )?;
    Ok(RocPoint { pfa, pd })
}

/// Threshold that makes the averaged false-alarm rate hit `target_pfa`.
///
/// The gain-aware receiver inverts its averaged rate by bisection in log
/// threshold; the constant-threshold receiver inverts Q directly; the
/// quadratic receiver inverts its published exponential form verbatim, so
/// downstream comparisons against measurement stay honest about that formula.
pub fn calibrate_gamma(
    target_pfa: f64,
    regime: DetectorRegime,
    sigma: f64,
    m: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_sigma(sigma)?;
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::domain(format!(
            "target false-alarm rate must sit inside (0, 1), got {target_pfa}"
        )));
    }
    match regime {
        DetectorRegime::RayleighMarginal => numerics::q_inverse(target_pfa),
        DetectorRegime::NoCsiQuadratic => Ok(-12.0 * sigma * sigma * target_pfa.ln()),
        DetectorRegime::CoherentKnownH => {
            let pfa_at = |ln_g: f64| -> Result<f64> {
                Ok(averaged_pfa_pd_coherent(ln_g.exp(), sigma, m, quad)?.pfa)
            };
            // The averaged rate decreases in the threshold. Push the bracket
            // ends outward until they straddle the target.
            let mut lo = -1.0;
            let mut hi = 1.0;
            let mut step = 1.0;
            let mut grew = 0;
            while pfa_at(lo)? < target_pfa {
                lo -= step;
                step *= 2.0;
                grew += 1;
                if grew > 200 {
                    return Err(Error::convergence(
                        "no lower threshold bracket for the target false-alarm rate",
                        None,
                    ));
                }
            }
            step = 1.0;
            while pfa_at(hi)? > target_pfa {
                hi += step;
                step *= 2.0;
                grew += 1;
                if grew > 200 {
                    return Err(Error::convergence(
                        "no upper threshold bracket for the target false-alarm rate",
                        None,
                    ));
                }
            }
            // Stop on relative agreement, not absolute: tight budgets like
            // 1e-7 deserve the same digits as loose ones. If the rate is too
            // flat for that, run the interval down to float resolution.
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    return Ok(mid.exp());
                }
                let p = pfa_at(mid)?;
                if (p - target_pfa).abs() < 1e-9 * target_pfa {
                    return Ok(mid.exp());
                }
                if p > target_pfa {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(Error::convergence(
                format!("threshold bisection did not reach the target rate {target_pfa}"),
                Some(mid.exp()),
            ))
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 1000 {
        return Err(Error::domain(format!(
            "Monte Carlo operating points need at least 1000 trials, got {trials}"
        )));
    }
    Ok(())
}

fn noise_into(buf: &mut [f64], sigma: f64, rng: &mut impl Rng) {
    for v in buf.iter_mut() {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        *v = sigma * z;
    }
}

fn roc_from_counts(hits0: usize, hits1: usize, trials: usize) -> RocPoint {
    RocPoint {
        pfa: hits0 as f64 / trials as f64,
        pd: hits1 as f64 / trials as f64,
    }
}

/// Monte Carlo twin of [`averaged_pfa_pd_coherent`]: per trial, draw a
/// channel, set the gain-dependent threshold, and run the correlator on a
/// noise-only burst and on a beacon burst.
pub fn mc_pfa_pd_coherent(
    gamma: f64,
    sigma: f64,
    m: f64,
    template: &SignalTemplate,
    trials: usize,
    seed: u64,
) -> Result<RocPoint> {
    template.validate()?;
    check_sigma(sigma)?;
    check_trials(trials)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "likelihood threshold must be positive and finite, got {gamma}"
        )));
    }
    let params = FadingParams::new(m)?;
    let base = template.delayed_samples();
    let n = base.len();
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut rng = trial_rng(seed, t as u64);
            let h = channel::sample_fading(&params, 1, &mut rng)?.envelopes[0];
            let thr = threshold_coherent(gamma, h, sigma)?;
            let mut burst = vec![0.0; n];
            noise_into(&mut burst, sigma, &mut rng);
            let alarm = statistic_from_base(&burst, &base, sigma) > thr;
            noise_into(&mut burst, sigma, &mut rng);
            for (r, &s) in burst.iter_mut().zip(&base) {
                *r += h * s;
            }
            let hit = statistic_from_base(&burst, &base, sigma) > thr;
            Ok((alarm, hit))
        })
        .collect::<Result<_>>()?;
    let hits0 = outcomes.iter().filter(|o| o.0).count();
    let hits1 = outcomes.iter().filter(|o| o.1).count();
    Ok(roc_from_counts(hits0, hits1, trials))
}

/// Monte Carlo twin of [`averaged_pfa_pd_marginal`].
pub fn mc_pfa_pd_marginal(
    gamma_pp: f64,
    sigma: f64,
    m: f64,
    template: &SignalTemplate,
    trials: usize,
    seed: u64,
) -> Result<RocPoint> {
    template.validate()?;
    check_sigma(sigma)?;
    check_trials(trials)?;
    if !gamma_pp.is_finite() {
        return Err(Error::domain(format!(
            "constant threshold must be finite, got {gamma_pp}"
        )));
    }
    let params = FadingParams::new(m)?;
    let base = template.delayed_samples();
    let n = base.len();
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut rng = trial_rng(seed, t as u64);
            let h = channel::sample_fading(&params, 1, &mut rng)?.envelopes[0];
            let mut burst = vec![0.0; n];
            noise_into(&mut burst, sigma, &mut rng);
            let alarm = statistic_from_base(&burst, &base, sigma) > gamma_pp;
            noise_into(&mut burst, sigma, &mut rng);
            for (r, &s) in burst.iter_mut().zip(&base) {
                *r += h * s;
            }
            let hit = statistic_from_base(&burst, &base, sigma) > gamma_pp;
            Ok((alarm, hit))
        })
        .collect::<Result<_>>()?;
    let hits0 = outcomes.iter().filter(|o| o.0).count();
    let hits1 = outcomes.iter().filter(|o| o.1).count();
    Ok(roc_from_counts(hits0, hits1, trials))
}

/// Monte Carlo twin of the quadratic receiver's operating point. The channel
/// model here is Rayleigh only: independent zero-mean Gaussian in-phase and
/// quadrature gains with unit total power, which is the regime the receiver
/// is built for, so no shape parameter appears.
pub fn mc_pfa_pd_nocsi(
    gamma: f64,
    sigma: f64,
    template: &SignalTemplate,
    trials: usize,
    seed: u64,
) -> Result<RocPoint> {
    template.validate()?;
    check_sigma(sigma)?;
    check_trials(trials)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "threshold must be non-negative and finite, got {gamma}"
        )));
    }
    let (s1, s2) = template.quadrature_pair();
    let n = template.len();
    let nf = n as f64;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut rng = trial_rng(seed, t as u64);
            let hc: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let hs: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let (hc, hs) = (half * hc, half * hs);
            let mut burst = vec![0.0; n];
            noise_into(&mut burst, sigma, &mut rng);
            let quad_stat = |r: &[f64]| -> f64 {
                let a = dot(&s1, r);
                let b = dot(&s2, r);
                (a * a + b * b) / nf
            };
            let alarm = quad_stat(&burst) > gamma;
            noise_into(&mut burst, sigma, &mut rng);
            for ((r, &a), &b) in burst.iter_mut().zip(&s1).zip(&s2) {
                *r += hc * a + hs * b;
            }
            let hit = quad_stat(&burst) > gamma;
            Ok((alarm, hit))
        })
        .collect::<Result<_>>()?;
    let hits0 = outcomes.iter().filter(|o| o.0).count();
    let hits1 = outcomes.iter().filter(|o| o.1).count();
    Ok(roc_from_counts(hits0, hits1, trials))
}

/// One row of the threshold comparison report.
#[derive(Clone, Copy, Debug)]
pub struct OptimalityRow {
    pub target_pfa: f64,
    /// Likelihood threshold that makes the gain-aware receiver hit the target.
    pub gamma: f64,
    /// Averaged detection rate with the gain-dependent threshold, analytic.
    pub pd_adaptive: f64,
    /// Averaged detection rate with the rate-matched constant threshold.
    pub pd_constant: f64,
    pub mc_pd_adaptive: f64,
    pub mc_pd_constant: f64,
    /// Wider of the two 95 percent binomial half-widths at `trials`.
    pub ci95: f64,
}

/// Compares the gain-dependent threshold against the false-alarm-matched
/// constant threshold across a grid of target rates. The gain-aware receiver
/// can never do worse: its threshold is the solution of the constrained
/// detection-rate maximization, and the constant rule is one feasible point.
/// Each row carries Monte Carlo twins (fixed internal seed, default template)
/// so the analytic gap can be checked against simulation noise.
pub fn verify_threshold_optimality(
    sigma: f64,
    m: f64,
    pfa_grid: &[f64],
    trials: usize,
) -> Result<Vec<OptimalityRow>> {
    check_sigma(sigma)?;
    check_trials(trials)?;
    if pfa_grid.is_empty() {
        return Err(Error::domain("the target rate grid must not be empty"));
    }
    let quad = QuadratureSpec::default();
    let template = SignalTemplate::pseudo_random(DEFAULT_TEMPLATE_LEN, DEFAULT_TEMPLATE_SEED)?;
    let mut rows = Vec::with_capacity(pfa_grid.len());
    for (i, &alpha) in pfa_grid.iter().enumerate() {
        let gamma = calibrate_gamma(alpha, DetectorRegime::CoherentKnownH, sigma, m, &quad)?;
        let adaptive = averaged_pfa_pd_coherent(gamma, sigma, m, &quad)?;
        let gamma_pp = numerics::q_inverse(alpha)?;
        let constant = averaged_pfa_pd_marginal(gamma_pp, sigma, m, &quad)?;
        let seed = OPTIMALITY_MC_SEED.wrapping_add(i as u64);
        let mc_adaptive = mc_pfa_pd_coherent(gamma, sigma, m, &template, trials, seed)?;
        let mc_constant = mc_pfa_pd_marginal(gamma_pp, sigma, m, &template, trials, seed ^ 1)?;
        let half_width = |p: f64| 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
        rows.push(OptimalityRow {
            target_pfa: alpha,
            gamma,
            pd_adaptive: adaptive.pd,
            pd_constant: constant.pd,
            mc_pd_adaptive: mc_adaptive.pd,
            mc_pd_constant: mc_constant.pd,
            ci95: half_width(mc_adaptive.pd).max(half_width(mc_constant.pd)),
        });
    }
    Ok(rows)
}

/// A local detector seen as maps from its threshold to its averaged operating
/// point, plus the calibration inverse. Counting-rule selection works through
/// this interface so any receiver can sit behind a fusion rule.
pub trait LocalRoc {
    fn pfa(&self, gamma: f64) -> Result<f64>;
    fn pd(&self, gamma: f64) -> Result<f64>;
    /// Threshold whose averaged false-alarm rate equals `target_pfa`.
    fn calibrate(&self, target_pfa: f64) -> Result<f64>;
}

/// Gain-aware receiver as a [`LocalRoc`].
pub struct CoherentRoc {
    pub sigma: f64,
    pub m: f64,
    pub quad: QuadratureSpec,
}

impl LocalRoc for CoherentRoc {
    fn pfa(&self, gamma: f64) -> Result<f64> {
        Ok(averaged_pfa_pd_coherent(gamma, self.sigma, self.m, &self.quad)?.pfa)
    }

    fn pd(&self, gamma: f64) -> Result<f64> {
        Ok(averaged_pfa_pd_coherent(gamma, self.sigma, self.m, &self.quad)?.pd)
    }

    fn calibrate(&self, target_pfa: f64) -> Result<f64> {
        calibrate_gamma(target_pfa, DetectorRegime::CoherentKnownH, self.sigma, self.m, &self.quad)
    }
}

/// Constant-threshold receiver as a [`LocalRoc`].
pub struct MarginalRoc {
    pub sigma: f64,
    pub m: f64,
    pub quad: QuadratureSpec,
}

impl LocalRoc for MarginalRoc {
    fn pfa(&self, gamma: f64) -> Result<f64> {
        if !gamma.is_finite() {
            return Err(Error::domain(format!("threshold must be finite, got {gamma}")));
        }
        Ok(numerics::q_function(gamma))
    }

    fn pd(&self, gamma: f64) -> Result<f64> {
        Ok(averaged_pfa_pd_marginal(gamma, self.sigma, self.m, &self.quad)?.pd)
    }

    fn calibrate(&self, target_pfa: f64) -> Result<f64> {
        if !(target_pfa > 0.0 && target_pfa < 1.0) {
            return Err(Error::domain(format!(
                "target false-alarm rate must sit inside (0, 1), got {target_pfa}"
            )));
        }
        numerics::q_inverse(target_pfa)
    }
}

/// Quadratic receiver as a [`LocalRoc`], under the exact chi-square law for
/// the quarter-cycle template (both Gram eigenvalues 1/2). The published
/// exponential constants are deliberately not used here; calibrating through
/// them would place every operating point away from its requested rate.
pub struct QuadraticRoc {
    pub sigma: f64,
    /// Burst length of the template the receiver correlates against.
    pub samples: usize,
}

impl QuadraticRoc {
    fn checked(&self) -> Result<(f64, f64)> {
        check_sigma(self.sigma)?;
        if self.samples < 8 {
            return Err(Error::domain(format!(
                "burst length must be at least 8 samples, got {}",
                self.samples
            )));
        }
        Ok((self.sigma * self.sigma, self.samples as f64))
    }
}

impl LocalRoc for QuadraticRoc {
    fn pfa(&self, gamma: f64) -> Result<f64> {
        let (s2, n) = self.checked()?;
        if gamma <= 0.0 {
            return Ok(1.0);
        }
        Ok((-n * gamma / s2).exp())
    }

    fn pd(&self, gamma: f64) -> Result<f64> {
        let (s2, n) = self.checked()?;
        if gamma <= 0.0 {
            return Ok(1.0);
        }
        Ok((-n * gamma / (s2 + 0.25)).exp())
    }

    fn calibrate(&self, target_pfa: f64) -> Result<f64> {
        let (s2, n) = self.checked()?;
        if !(target_pfa > 0.0 && target_pfa < 1.0) {
            return Err(Error::domain(format!(
                "target false-alarm rate must sit inside (0, 1), got {target_pfa}"
            )));
        }
        Ok(-s2 * target_pfa.ln() / n)
    }
}
