//! Scenario documents and the reproduction experiments built on them.
//!
//! Each runner is a pure function of its inputs: Monte Carlo trials fan out
//! over worker threads on per-trial random streams and reduce in a fixed
//! order, so the emitted tables are byte-identical for any worker count.
//! Analytic series carry no confidence interval; simulated series always
//! carry one, along with their trial count, which is how downstream tooling
//! tells the two apart.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{self, Method, Sigmas};
use crate::channel::{self, trial_rng, FadingParams};
use crate::detect::{
    CoherentRoc, DetectorRegime, LocalRoc, MarginalRoc, QuadraticRoc, RocPoint,
};
use crate::error::{Error, Result};
use crate::estimate::{self, EstimatorKind, EstimatorSpec, SearchSpec};
use crate::fusion::{self, FusionRule};
use crate::numerics::{self, QuadratureSpec};
use crate::toa::{Regime, ToaModel};
use crate::Point;

/// Fused false-alarm grid swept by [`run_roc`]. The low end is only
/// resolvable analytically; Monte Carlo twins stay within their (very wide)
/// intervals there and become informative from about 1e-4 upward.
pub const ROC_PFA_GRID: [f64; 10] =
    [1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.35, 0.5];

/// Total false-alarm grid swept by [`run_centralized_vs_distributed`].
pub const CENTRAL_PFA_GRID: [f64; 6] = [1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3];

/// Noise level shared by every anchor or listed anchor by anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Shared(f64),
    PerAnchor(Vec<f64>),
}

fn default_anchors() -> Vec<Point> {
    vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
}

fn default_nodes() -> Vec<Point> {
    vec![[0.5, 0.5]]
}

fn default_c() -> f64 {
    3.0e8
}

fn default_m() -> f64 {
    1.0
}

fn default_dimension() -> usize {
    2
}

fn default_n_samples() -> usize {
    64
}

fn default_estimation_regime() -> EstimatorKind {
    EstimatorKind::NakagamiMl
}

fn default_detection_regime() -> DetectorRegime {
    DetectorRegime::CoherentKnownH
}

/// One experiment setup: geometry, channel, and the operating grid.
///
/// Positions are always two-element arrays; one-dimensional setups put the
/// geometry on the x axis and ignore y. Noise is normally derived from the
/// SNR axis (`snr_db_grid`), using SNR = 1/(c^2 sigma^2) for estimation
/// experiments and SNR = 1/sigma^2 for detection experiments, where the
/// unit-energy burst makes the latter the per-burst energy ratio. A fixed
/// `sigma` is honored by [`run_crlb_sweep`] when the grid is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_anchors")]
    pub anchors: Vec<Point>,
    #[serde(default = "default_nodes")]
    pub nodes: Vec<Point>,
    /// Propagation speed in meters per second.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Optional fixed noise level; most experiments derive noise from the
    /// SNR grid instead.
    #[serde(default)]
    pub sigma: Option<SigmaSpec>,
    /// Nakagami shape parameter of the fading amplitudes.
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub snr_db_grid: Vec<f64>,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Burst length of the detection waveform. Kept a multiple of four so
    /// the quadrature branches of the no-CSI receiver carry exactly equal
    /// energy.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Fading-aware estimator compared against the least-squares baseline.
    #[serde(default = "default_estimation_regime")]
    pub estimation_regime: EstimatorKind,
    /// Receiver family detection experiments center on.
    #[serde(default = "default_detection_regime")]
    pub detection_regime: DetectorRegime,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            anchors: default_anchors(),
            nodes: default_nodes(),
            c: default_c(),
            sigma: None,
            m: default_m(),
            snr_db_grid: Vec::new(),
            dimension: default_dimension(),
            n_samples: default_n_samples(),
            estimation_regime: default_estimation_regime(),
            detection_regime: default_detection_regime(),
        }
    }
}

fn check_positions(what: &str, positions: &[Point]) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::validation(what, "at least one position is required"));
    }
    for p in positions {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::validation(
                what,
                format!("positions must be finite, got [{}, {}]", p[0], p[1]),
            ));
        }
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        check_positions("anchors", &self.anchors)?;
        check_positions("nodes", &self.nodes)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::validation("c", format!("propagation speed must be positive, got {}", self.c)));
        }
        if !(self.m >= 0.5 && self.m.is_finite()) {
            return Err(Error::validation("m", format!("shape parameter must be at least 1/2, got {}", self.m)));
        }
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::validation("dimension", format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if self.n_samples < 8 || !self.n_samples.is_multiple_of(4) {
            return Err(Error::validation(
                "n_samples",
                format!("burst length must be a multiple of four and at least 8, got {}", self.n_samples),
            ));
        }
        for &db in &self.snr_db_grid {
            if !db.is_finite() {
                return Err(Error::validation("snr_db_grid", format!("SNR points must be finite, got {db}")));
            }
        }
        match &self.sigma {
            None => {}
            Some(SigmaSpec::Shared(s)) => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::validation("sigma", format!("noise level must be positive, got {s}")));
                }
            }
            Some(SigmaSpec::PerAnchor(v)) => {
                if v.len() != self.anchors.len() {
                    return Err(Error::validation(
                        "sigma",
                        format!("{} noise levels supplied for {} anchors", v.len(), self.anchors.len()),
                    ));
                }
                for &s in v {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::validation("sigma", format!("noise levels must be positive, got {s}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn snr_grid(&self, experiment: &str) -> Result<&[f64]> {
        if self.snr_db_grid.is_empty() {
            return Err(Error::validation(
                "snr_db_grid",
                format!("{experiment} sweeps the SNR axis and needs a non-empty grid"),
            ));
        }
        Ok(&self.snr_db_grid)
    }

    /// First grid entry, used by experiments that run at one operating SNR.
    fn operating_snr_db(&self, experiment: &str) -> Result<f64> {
        Ok(self.snr_grid(experiment)?[0])
    }
}

/// Noise level for an estimation experiment: SNR = 1/(c^2 sigma^2).
pub fn sigma_for_estimation(snr_db: f64, c: f64) -> f64 {
    10f64.powf(-snr_db / 20.0) / c
}

/// Noise level for a detection experiment: SNR = 1/sigma^2 for the
/// unit-energy burst.
pub fn sigma_for_detection(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// One table cell: a y value for a named series at an x position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub x: f64,
    pub series: String,
    pub y: f64,
    /// Half-width of the 95% interval; present exactly for simulated rows.
    pub ci95: Option<f64>,
    pub trials: Option<u64>,
}

/// Rows plus the provenance needed to reproduce them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub seed: u64,
    /// Content hash of the experiment name, its parameters, and the
    /// scenario, so two result files can be matched to their configuration.
    pub config_hash: String,
}

fn analytic_row(x: f64, series: &str, y: f64) -> ResultRow {
    ResultRow { x, series: series.to_string(), y, ci95: None, trials: None }
}

fn mc_row(x: f64, series: &str, hits: usize, trials: usize) -> ResultRow {
    let n = trials as f64;
    let p = hits as f64 / n;
    ResultRow {
        x,
        series: series.to_string(),
        y: p,
        ci95: Some(1.96 * (p * (1.0 - p) / n).sqrt()),
        trials: Some(trials as u64),
    }
}

fn config_hash(experiment: &str, params: serde_json::Value) -> String {
    let doc = serde_json::json!({ "experiment": experiment, "params": params });
    let mut hasher = Sha256::new();
    hasher.update(doc.to_string().as_bytes());
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            use std::fmt::Write;
            let _ = write!(acc, "{b:02x}");
            acc
        })
}

fn estimator_slug(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::AwgnLs => "awgn-ls",
        EstimatorKind::NakagamiMl => "nakagami-ml",
        EstimatorKind::NoCsiMl => "no-csi-ml",
    }
}

fn regime_slug(regime: DetectorRegime) -> &'static str {
    match regime {
        DetectorRegime::CoherentKnownH => "coherent-known-h",
        DetectorRegime::RayleighMarginal => "rayleigh-marginal",
        DetectorRegime::NoCsiQuadratic => "no-csi-quadratic",
    }
}

fn shared_sigma(spec: &Option<SigmaSpec>) -> Result<Option<f64>> {
    match spec {
        None => Ok(None),
        Some(SigmaSpec::Shared(s)) => Ok(Some(*s)),
        Some(SigmaSpec::PerAnchor(_)) => Err(Error::unsupported_regime(
            "reproduction experiments use one shared noise level; per-anchor studies go through the bound functions directly",
        )),
    }
}

/// Bound comparison across the SNR axis: the no-fading baseline, the
/// known-phase Nakagami bound in both closed and quadrature form, the no-CSI
/// bound (Rayleigh only), and the quadrature-to-baseline ratio series that
/// expose the SNR loss factors. With an empty grid and a fixed shared sigma
/// the sweep degenerates to that single operating point.
pub fn run_crlb_sweep(scenario: &Scenario) -> Result<ExperimentResult> {
    scenario.validate()?;
    let anchors = &scenario.anchors;
    let node = scenario.nodes[0];
    let rayleigh = (scenario.m - 1.0).abs() < 1e-12;

    let points: Vec<(f64, f64)> = if scenario.snr_db_grid.is_empty() {
        let sigma = shared_sigma(&scenario.sigma)?.ok_or_else(|| {
            Error::validation("snr_db_grid", "an SNR grid or a fixed sigma is required")
        })?;
        let snr_db = -10.0 * (scenario.c * scenario.c * sigma * sigma).log10();
        vec![(snr_db, sigma)]
    } else {
        scenario
            .snr_db_grid
            .iter()
            .map(|&db| (db, sigma_for_estimation(db, scenario.c)))
            .collect()
    };

    let mut rows = Vec::new();
    for &(db, sigma) in &points {
        let awgn = bounds::crlb_awgn(anchors, node, sigma, scenario.c, scenario.dimension)?.crlb;
        rows.push(analytic_row(db, "awgn", awgn));

        let sigmas = Sigmas::Shared(sigma);
        let closed = bounds::crlb_nakagami(
            anchors, node, &sigmas, scenario.c, scenario.m, scenario.dimension,
            Method::ClosedForm,
        )?
        .crlb;
        let quadrature = bounds::crlb_nakagami(
            anchors, node, &sigmas, scenario.c, scenario.m, scenario.dimension,
            Method::Quadrature,
        )?
        .crlb;
        rows.push(analytic_row(db, "nakagami-closed", closed));
        rows.push(analytic_row(db, "nakagami-quadrature", quadrature));
        rows.push(analytic_row(db, "nakagami-ratio", quadrature / awgn));

        if rayleigh {
            let closed = bounds::crlb_nocsi(
                anchors, node, sigma, scenario.c, scenario.m, scenario.dimension,
                Method::ClosedForm,
            )?
            .crlb;
            let quadrature = bounds::crlb_nocsi(
                anchors, node, sigma, scenario.c, scenario.m, scenario.dimension,
                Method::Quadrature,
            )?
            .crlb;
            rows.push(analytic_row(db, "no-csi-closed", closed));
            rows.push(analytic_row(db, "no-csi-quadrature", quadrature));
            rows.push(analytic_row(db, "no-csi-ratio", quadrature / awgn));
        }
    }

    Ok(ExperimentResult {
        rows,
        seed: 0,
        config_hash: config_hash("crlb-sweep", serde_json::json!({ "scenario": scenario })),
    })
}

/// SNR loss of the known-phase Nakagami bound relative to the no-fading
/// baseline, as a function of the shape parameter, in linear form and in dB.
pub fn run_k_ratio_curve(m_grid: &[f64]) -> Result<ExperimentResult> {
    if m_grid.is_empty() {
        return Err(Error::validation("m_grid", "at least one shape parameter is required"));
    }
    let mut rows = Vec::with_capacity(2 * m_grid.len());
    for &m in m_grid {
        if !(m >= 0.5 && m.is_finite()) {
            return Err(Error::validation("m_grid", format!("shape parameter must be at least 1/2, got {m}")));
        }
        let k = bounds::loss_ratio_k(m);
        rows.push(analytic_row(m, "k-ratio", k));
        rows.push(analytic_row(m, "k-ratio-db", 10.0 * k.log10()));
    }
    Ok(ExperimentResult {
        rows,
        seed: 0,
        config_hash: config_hash("k-ratio", serde_json::json!({ "m_grid": m_grid })),
    })
}

/// Mean squared error of the least-squares baseline against the scenario's
/// fading-aware estimator, across the SNR axis, under the compound fading
/// measurement law, with the quadrature Nakagami bound alongside.
///
/// Both estimators see the same drawn measurement per (trial, SNR), so the
/// curves are compared on common random numbers and their ordering resolves
/// at far fewer trials than independent runs would need.
pub fn run_mle_comparison(scenario: &Scenario, trials: usize, seed: u64) -> Result<ExperimentResult> {
    scenario.validate()?;
    if trials < 10_000 {
        return Err(Error::domain(format!(
            "estimator comparison needs at least 10000 trials to separate the curves, got {trials}"
        )));
    }
    if scenario.estimation_regime == EstimatorKind::AwgnLs {
        return Err(Error::validation(
            "estimation_regime",
            "the comparison pairs the least-squares baseline against a fading-aware estimator; tag the scenario with nakagami-ml or no-csi-ml",
        ));
    }
    let grid = scenario.snr_grid("mle-compare")?.to_vec();
    let anchors = &scenario.anchors;
    let node = scenario.nodes[0];

    let mut rows = Vec::new();
    for &db in &grid {
        let sigma = sigma_for_estimation(db, scenario.c);
        let model = ToaModel::new(Regime::NakagamiMarginal, sigma, scenario.c, scenario.m)?;
        let spec = |regime| EstimatorSpec {
            regime,
            m: scenario.m,
            sigma,
            c: scenario.c,
            dimension: scenario.dimension,
            search: SearchSpec::default(),
        };
        let base = estimate::evaluate_mse(&spec(EstimatorKind::AwgnLs), node, anchors, &model, trials, seed)?;
        let fading = estimate::evaluate_mse(&spec(scenario.estimation_regime), node, anchors, &model, trials, seed)?;
        let bound = bounds::crlb_nakagami(
            anchors, node, &Sigmas::Shared(sigma), scenario.c, scenario.m, scenario.dimension,
            Method::Quadrature,
        )?
        .crlb;

        rows.push(ResultRow {
            x: db,
            series: "awgn-ls".to_string(),
            y: base.mse,
            ci95: Some(base.ci95),
            trials: Some(trials as u64),
        });
        rows.push(ResultRow {
            x: db,
            series: estimator_slug(scenario.estimation_regime).to_string(),
            y: fading.mse,
            ci95: Some(fading.ci95),
            trials: Some(trials as u64),
        });
        rows.push(analytic_row(db, "crlb-nakagami", bound));
    }

    Ok(ExperimentResult {
        rows,
        seed,
        config_hash: config_hash(
            "mle-compare",
            serde_json::json!({ "scenario": scenario, "trials": trials, "seed": seed }),
        ),
    })
}

/// Per-anchor correlation statistics for one trial: the noise-only value,
/// the beacon value, and the envelope that produced the beacon value.
struct TrialStat {
    stat0: f64,
    stat1: f64,
    env: f64,
}

fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Draws the correlator statistic for every (trial, anchor) pair straight
/// from its exact law: N(0,1) on noise, N(|h|/sigma, 1) on beacon. The Gram
/// facts behind those laws are pinned against full-waveform simulation in
/// the detector tests, so sampling at the statistic level changes nothing
/// but the cost.
fn sample_correlator_stats(
    sigma: f64,
    m: f64,
    m_anchors: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<TrialStat>>> {
    let params = FadingParams::new(m)?;
    (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialStat>> {
            let mut rng = trial_rng(seed, t as u64);
            let draw = channel::sample_fading(&params, m_anchors, &mut rng)?;
            Ok(draw
                .envelopes
                .iter()
                .map(|&env| {
                    let stat0 = standard_normal(&mut rng);
                    let stat1 = env / sigma + standard_normal(&mut rng);
                    TrialStat { stat0, stat1, env }
                })
                .collect())
        })
        .collect()
}

/// No-CSI analogue of [`sample_correlator_stats`]: the quadratic statistic
/// (a^2 + b^2)/N with branch projections drawn from their exact laws under
/// the balanced quarter-cycle template. Rayleigh only, like the receiver.
fn sample_quadratic_stats(
    sigma: f64,
    n_samples: usize,
    m_anchors: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<TrialStat>>> {
    let n = n_samples as f64;
    let branch_noise = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let gain = std::f64::consts::FRAC_1_SQRT_2;
    (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialStat>> {
            let mut rng = trial_rng(seed, t as u64);
            Ok((0..m_anchors)
                .map(|_| {
                    let a0 = branch_noise * standard_normal(&mut rng);
                    let b0 = branch_noise * standard_normal(&mut rng);
                    let hc = gain * standard_normal(&mut rng);
                    let hs = gain * standard_normal(&mut rng);
                    let a1 = 0.5 * hc + branch_noise * standard_normal(&mut rng);
                    let b1 = 0.5 * hs + branch_noise * standard_normal(&mut rng);
                    TrialStat {
                        stat0: (a0 * a0 + b0 * b0) / n,
                        stat1: (a1 * a1 + b1 * b1) / n,
                        env: 0.0,
                    }
                })
                .collect())
        })
        .collect()
}

fn make_local_roc(regime: DetectorRegime, sigma: f64, scenario: &Scenario) -> Result<Box<dyn LocalRoc>> {
    match regime {
        DetectorRegime::CoherentKnownH => Ok(Box::new(CoherentRoc {
            sigma,
            m: scenario.m,
            quad: QuadratureSpec::default(),
        })),
        DetectorRegime::RayleighMarginal => Ok(Box::new(MarginalRoc {
            sigma,
            m: scenario.m,
            quad: QuadratureSpec::default(),
        })),
        DetectorRegime::NoCsiQuadratic => {
            if (scenario.m - 1.0).abs() > 1e-12 {
                return Err(Error::unsupported_regime(format!(
                    "the quadratic receiver's law holds for Rayleigh fading (m = 1), got m = {}",
                    scenario.m
                )));
            }
            Ok(Box::new(QuadraticRoc { sigma, samples: scenario.n_samples }))
        }
    }
}

/// Counts fused alarms and hits over precomputed per-trial statistics for a
/// K-out-of-M rule at one local threshold. The gain-aware receiver compares
/// in score form, (h/sigma) T - h^2/(2 sigma^2) > ln gamma, which is the
/// same comparison as T against the gain-dependent threshold without ever
/// dividing by a vanishing envelope.
fn count_fused(
    regime: DetectorRegime,
    stats: &[Vec<TrialStat>],
    sigma: f64,
    gamma: f64,
    k: usize,
) -> (usize, usize) {
    let ln_gamma = gamma.ln();
    stats
        .par_iter()
        .map(|trial| {
            let mut alarms = 0usize;
            let mut hits = 0usize;
            for s in trial {
                let (alarm, hit) = match regime {
                    DetectorRegime::CoherentKnownH => {
                        let w = s.env / sigma;
                        let offset = 0.5 * w * w;
                        (w * s.stat0 - offset > ln_gamma, w * s.stat1 - offset > ln_gamma)
                    }
                    DetectorRegime::RayleighMarginal | DetectorRegime::NoCsiQuadratic => {
                        (s.stat0 > gamma, s.stat1 > gamma)
                    }
                };
                alarms += usize::from(alarm);
                hits += usize::from(hit);
            }
            (usize::from(alarms >= k), usize::from(hits >= k))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Fused receiver operating characteristics at one SNR: for every requested
/// receiver family and counting threshold K, the analytic fused detection
/// rate over [`ROC_PFA_GRID`] next to a Monte Carlo twin (both the measured
/// fused detection and false-alarm rates). An empty regime list runs the
/// scenario's tagged receiver.
pub fn run_roc(
    scenario: &Scenario,
    regimes: &[DetectorRegime],
    k_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    scenario.validate()?;
    if trials < 100_000 {
        return Err(Error::domain(format!(
            "fused ROC curves need at least 100000 trials to resolve the orderings, got {trials}"
        )));
    }
    if k_values.is_empty() {
        return Err(Error::validation("k_values", "at least one counting threshold is required"));
    }
    let m_anchors = scenario.anchors.len();
    for &k in k_values {
        FusionRule::new(k, m_anchors)?;
    }
    let snr_db = scenario.operating_snr_db("roc")?;
    let sigma = sigma_for_detection(snr_db);
    let regime_list: Vec<DetectorRegime> = if regimes.is_empty() {
        vec![scenario.detection_regime]
    } else {
        regimes.to_vec()
    };

    let mut rows = Vec::new();
    for &regime in &regime_list {
        let roc = make_local_roc(regime, sigma, scenario)?;
        let stats = match regime {
            DetectorRegime::NoCsiQuadratic => {
                sample_quadratic_stats(sigma, scenario.n_samples, m_anchors, trials, seed)?
            }
            _ => sample_correlator_stats(sigma, scenario.m, m_anchors, trials, seed)?,
        };
        for &k in k_values {
            let rule = FusionRule::new(k, m_anchors)?;
            let name = format!("{}-k{}", regime_slug(regime), k);
            for &alpha in &ROC_PFA_GRID {
                let budget = fusion::local_pfa_for_fused(alpha, &rule)?;
                let gamma = roc.calibrate(budget)?;
                let pd_local = roc.pd(gamma)?;
                let fused_pd = fusion::fused_probability(pd_local, &rule)?;
                rows.push(analytic_row(alpha, &name, fused_pd));

                let (alarms, hits) = count_fused(regime, &stats, sigma, gamma, k);
                rows.push(mc_row(alpha, &format!("{name}-mc"), hits, trials));
                rows.push(mc_row(alpha, &format!("{name}-mc-pfa"), alarms, trials));
            }
        }
    }

    Ok(ExperimentResult {
        rows,
        seed,
        config_hash: config_hash(
            "roc",
            serde_json::json!({
                "scenario": scenario,
                "regimes": regime_list.iter().map(|&r| regime_slug(r)).collect::<Vec<_>>(),
                "k_values": k_values,
                "trials": trials,
                "seed": seed,
            }),
        ),
    })
}

/// Fused detection rate versus SNR for the three receiver families at one
/// total false-alarm budget and one counting threshold. Purely analytic: the
/// local threshold is recalibrated at every SNR point so the fused
/// false-alarm rate stays on budget along the whole curve.
pub fn run_pd_vs_snr(scenario: &Scenario, pfa_total: f64, k: usize) -> Result<ExperimentResult> {
    scenario.validate()?;
    if !(pfa_total > 0.0 && pfa_total < 1.0) {
        return Err(Error::validation(
            "pfa_total",
            format!("total false-alarm budget must sit inside (0, 1), got {pfa_total}"),
        ));
    }
    if (scenario.m - 1.0).abs() > 1e-12 {
        return Err(Error::unsupported_regime(
            "the three-family SNR comparison includes the quadratic receiver, whose law holds for Rayleigh fading (m = 1)",
        ));
    }
    let grid = scenario.snr_grid("pd-vs-snr")?.to_vec();
    let rule = FusionRule::new(k, scenario.anchors.len())?;
    let budget = fusion::local_pfa_for_fused(pfa_total, &rule)?;

    let mut rows = Vec::new();
    for regime in [
        DetectorRegime::CoherentKnownH,
        DetectorRegime::RayleighMarginal,
        DetectorRegime::NoCsiQuadratic,
    ] {
        for &db in &grid {
            let sigma = sigma_for_detection(db);
            let roc = make_local_roc(regime, sigma, scenario)?;
            let gamma = roc.calibrate(budget)?;
            let fused_pd = fusion::fused_probability(roc.pd(gamma)?, &rule)?;
            rows.push(analytic_row(db, regime_slug(regime), fused_pd));
        }
    }

    Ok(ExperimentResult {
        rows,
        seed: 0,
        config_hash: config_hash(
            "pd-vs-snr",
            serde_json::json!({ "scenario": scenario, "pfa_total": pfa_total, "k": k }),
        ),
    })
}

/// Averaged operating point of the centralized combiner: all M correlator
/// outputs are pooled into the likelihood score sum_i (h_i/sigma) T_i -
/// W/(2 sigma^2) with W = sum_i h_i^2, compared against one score
/// threshold. Conditioned on the channel the score is N(-u/2, u) on noise
/// and N(u/2, u) on beacon with u = W/sigma^2, and W is Gamma with shape
/// M m and scale 1/m, so both rates are single integrals over W.
pub fn centralized_pfa_pd(
    score_threshold: f64,
    sigma: f64,
    m: f64,
    m_anchors: usize,
    quad: &QuadratureSpec,
) -> Result<RocPoint> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(m >= 0.5 && m.is_finite()) {
        return Err(Error::domain(format!("shape parameter must be at least 1/2, got {m}")));
    }
    if m_anchors == 0 {
        return Err(Error::domain("the combiner needs at least one anchor"));
    }
    if !score_threshold.is_finite() {
        return Err(Error::domain(format!("score threshold must be finite, got {score_threshold}")));
    }
    let shape = m_anchors as f64 * m;
    let ln_norm = shape * m.ln() - numerics::ln_gamma(shape)?;
    let sigma_sq = sigma * sigma;
    let rate = |sign: f64| -> Result<f64> {
        let value = numerics::integrate_semi_infinite(
            |w| {
                if w <= 0.0 {
                    return 0.0;
                }
                let density = (ln_norm + (shape - 1.0) * w.ln() - m * w).exp();
                let u = w / sigma_sq;
                let arg = (score_threshold + sign * 0.5 * u) / u.sqrt();
                numerics::q_function(arg) * density
            },
            quad,
        )?;
        Ok(value.clamp(0.0, 1.0))
    };
    Ok(RocPoint { pfa: rate(1.0)?, pd: rate(-1.0)? })
}

/// Score threshold whose centralized averaged false-alarm rate equals the
/// target: bracket by doubling, then bisect to float resolution.
pub fn calibrate_centralized(
    target_pfa: f64,
    sigma: f64,
    m: f64,
    m_anchors: usize,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::domain(format!(
            "target false-alarm rate must sit inside (0, 1), got {target_pfa}"
        )));
    }
    let pfa_at = |score: f64| -> Result<f64> {
        Ok(centralized_pfa_pd(score, sigma, m, m_anchors, quad)?.pfa)
    };
    // The rate falls as the score threshold rises. Grow the bracket
    // geometrically from the origin until it straddles the target.
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while pfa_at(lo)? < target_pfa {
        lo *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::convergence(
                "no lower score bracket for the target false-alarm rate",
                Some(lo),
            ));
        }
    }
    while pfa_at(hi)? > target_pfa {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::convergence(
                "no upper score bracket for the target false-alarm rate",
                Some(hi),
            ));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if pfa_at(mid)? > target_pfa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Centralized pooling against K-out-of-M fusion for the gain-aware
/// receiver, on matched total false-alarm budgets over
/// [`CENTRAL_PFA_GRID`]. Both schemes are evaluated analytically and by a
/// paired Monte Carlo twin that feeds the same channel and noise draws to
/// both combiners.
pub fn run_centralized_vs_distributed(
    scenario: &Scenario,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    scenario.validate()?;
    if scenario.detection_regime != DetectorRegime::CoherentKnownH {
        return Err(Error::unsupported_regime(
            "the centralized combiner pools gain-weighted correlators, so the scenario must be tagged coherent-known-h",
        ));
    }
    if trials < 100_000 {
        return Err(Error::domain(format!(
            "the scheme comparison needs at least 100000 trials, got {trials}"
        )));
    }
    let m_anchors = scenario.anchors.len();
    let rule = FusionRule::new(k, m_anchors)?;
    let snr_db = scenario.operating_snr_db("central-vs-dist")?;
    let sigma = sigma_for_detection(snr_db);
    let quad = QuadratureSpec::default();
    let coherent = CoherentRoc { sigma, m: scenario.m, quad: quad.clone() };

    let stats = sample_correlator_stats(sigma, scenario.m, m_anchors, trials, seed)?;

    let mut rows = Vec::new();
    for &alpha in &CENTRAL_PFA_GRID {
        let score = calibrate_centralized(alpha, sigma, scenario.m, m_anchors, &quad)?;
        let central = centralized_pfa_pd(score, sigma, scenario.m, m_anchors, &quad)?;
        rows.push(analytic_row(alpha, "centralized", central.pd));

        let (alarms, hits) = stats
            .par_iter()
            .map(|trial| {
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for s in trial {
                    let w = s.env / sigma;
                    let offset = 0.5 * w * w;
                    s0 += w * s.stat0 - offset;
                    s1 += w * s.stat1 - offset;
                }
                (usize::from(s0 > score), usize::from(s1 > score))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        rows.push(mc_row(alpha, "centralized-mc", hits, trials));
        rows.push(mc_row(alpha, "centralized-mc-pfa", alarms, trials));

        let budget = fusion::local_pfa_for_fused(alpha, &rule)?;
        let gamma = coherent.calibrate(budget)?;
        let fused_pd = fusion::fused_probability(coherent.pd(gamma)?, &rule)?;
        rows.push(analytic_row(alpha, "distributed", fused_pd));

        let (alarms, hits) =
            count_fused(DetectorRegime::CoherentKnownH, &stats, sigma, gamma, k);
        rows.push(mc_row(alpha, "distributed-mc", hits, trials));
        rows.push(mc_row(alpha, "distributed-mc-pfa", alarms, trials));
    }

    Ok(ExperimentResult {
        rows,
        seed,
        config_hash: config_hash(
            "central-vs-dist",
            serde_json::json!({ "scenario": scenario, "k": k, "trials": trials, "seed": seed }),
        ),
    })
}
