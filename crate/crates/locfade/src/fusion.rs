//! Counting-rule decision fusion.
//!
//! Each of M anchors sends one decision bit; the fusion center declares the
//! node present once at least k bits agree. With identical anchors the fused
//! rates are binomial upper tails of the local rates, so picking k reduces to
//! calibrating each anchor's threshold against its local operating maps and
//! comparing the fused detection rates at a fixed fused false-alarm budget.

use crate::detect::LocalRoc;
use crate::error::{Error, Result};

/// A k-out-of-M counting rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FusionRule {
    /// Votes required to declare the node present.
    pub k: usize,
    /// Number of anchors reporting.
    pub m_anchors: usize,
}

impl FusionRule {
    pub fn new(k: usize, m_anchors: usize) -> Result<Self> {
        let rule = FusionRule { k, m_anchors };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_anchors == 0 {
            return Err(Error::validation("m_anchors", "at least one anchor must report"));
        }
        if self.k == 0 || self.k > self.m_anchors {
            return Err(Error::validation(
                "k",
                format!(
                    "vote count must sit in 1..={}, got {}",
                    self.m_anchors, self.k
                ),
            ));
        }
        Ok(())
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::domain(format!("{what} must sit in [0, 1], got {p}")));
    }
    Ok(())
}

/// Probability that at least k of M independent anchors fire when each fires
/// with probability `p_local`: the binomial upper tail. Strictly increasing
/// in the local rate and strictly decreasing in k on the open interval.
///
/// Binomial coefficients are accumulated multiplicatively in floating point;
/// they stay exactly representable up to roughly fifty anchors, far beyond
/// any deployment considered here.
pub fn fused_probability(p_local: f64, rule: &FusionRule) -> Result<f64> {
    rule.validate()?;
    check_probability(p_local, "local probability")?;
    if p_local == 0.0 {
        return Ok(0.0);
    }
    if p_local == 1.0 {
        return Ok(1.0);
    }
    let m = rule.m_anchors;
    let q = 1.0 - p_local;
    let mut coeff = 1.0f64;
    let mut tail = 0.0;
    for j in 1..=m {
        coeff = coeff * (m - j + 1) as f64 / j as f64;
        if j >= rule.k {
            tail += coeff * p_local.powi(j as i32) * q.powi((m - j) as i32);
        }
    }
    Ok(tail.clamp(0.0, 1.0))
}

/// Fused probability when the anchors fire with different local rates: the
/// upper tail of the Poisson binomial count, by direct convolution. This is
/// the heterogeneous extension; the selection logic below stays on the
/// identical-anchor model.
pub fn fused_probability_mixed(p_locals: &[f64], k: usize) -> Result<f64> {
    if p_locals.is_empty() {
        return Err(Error::validation("p_locals", "at least one anchor must report"));
    }
    if k == 0 || k > p_locals.len() {
        return Err(Error::validation(
            "k",
            format!("vote count must sit in 1..={}, got {k}", p_locals.len()),
        ));
    }
    for &p in p_locals {
        check_probability(p, "local probability")?;
    }
    let mut count_pmf = vec![0.0f64; p_locals.len() + 1];
    count_pmf[0] = 1.0;
    for (i, &p) in p_locals.iter().enumerate() {
        for j in (0..=i).rev() {
            let stay = count_pmf[j];
            count_pmf[j + 1] += stay * p;
            count_pmf[j] = stay * (1.0 - p);
        }
    }
    Ok(count_pmf[k..].iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Local rate each anchor must run at so the fused rate hits `alpha` under
/// the given counting rule. The fused tail is continuous and strictly
/// increasing in the local rate, so bisection runs all the way down to
/// floating-point resolution; an absolute early exit would lose relative
/// accuracy exactly where tight budgets need it most.
pub fn local_pfa_for_fused(alpha: f64, rule: &FusionRule) -> Result<f64> {
    rule.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "fused budget must sit inside (0, 1), got {alpha}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if fused_probability(mid, rule)? < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// What happened for one candidate vote count during selection.
#[derive(Clone, Debug)]
pub struct KOutcome {
    pub k: usize,
    /// Local threshold that met the budget, when calibration succeeded.
    pub gamma: Option<f64>,
    /// Fused detection rate at that threshold.
    pub pd_total: Option<f64>,
    /// Why the candidate was skipped, when it was.
    pub skipped: Option<String>,
}

/// Selected counting rule plus the full per-candidate record.
#[derive(Clone, Debug)]
pub struct ChosenK {
    pub k_star: usize,
    pub pd_total: f64,
    pub per_k: Vec<KOutcome>,
}

/// Ties within this margin go to the smaller vote count; it absorbs the
/// bisection residue so a flat detector does not pick an arbitrary k.
const TIE_MARGIN: f64 = 1e-9;

/// Picks the vote count that maximizes the fused detection rate subject to a
/// fused false-alarm budget of `alpha`.
///
/// For every k from 1 to `m_anchors` the local rate implied by the budget is
/// computed, the local threshold is calibrated through `roc`, and the fused
/// detection rate follows from the local one. Candidates whose calibration
/// fails are skipped and recorded; the call only errs when every candidate
/// fails. Ties break toward the smallest k.
pub fn choose_k(roc: &dyn LocalRoc, alpha: f64, m_anchors: usize) -> Result<ChosenK> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "fused budget must sit inside (0, 1), got {alpha}"
        )));
    }
    if m_anchors == 0 {
        return Err(Error::validation("m_anchors", "at least one anchor must report"));
    }
    let mut per_k = Vec::with_capacity(m_anchors);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=m_anchors {
        let rule = FusionRule::new(k, m_anchors)?;
        let local_target = local_pfa_for_fused(alpha, &rule)?;
        let calibrated = roc
            .calibrate(local_target)
            .and_then(|gamma| Ok((gamma, roc.pd(gamma)?)));
        match calibrated {
            Ok((gamma, pd_local)) => {
                let pd_total = fused_probability(pd_local, &rule)?;
                per_k.push(KOutcome {
                    k,
                    gamma: Some(gamma),
                    pd_total: Some(pd_total),
                    skipped: None,
                });
                let improves = match best {
                    None => true,
                    Some((_, best_pd)) => pd_total > best_pd + TIE_MARGIN,
                };
                if improves {
                    best = Some((k, pd_total));
                }
            }
            Err(e) => {
                per_k.push(KOutcome {
                    k,
                    gamma: None,
                    pd_total: None,
                    skipped: Some(e.to_string()),
                });
            }
        }
    }
    match best {
        Some((k_star, pd_total)) => Ok(ChosenK { k_star, pd_total, per_k }),
        None => Err(Error::infeasible(format!(
            "no vote count could meet the fused false-alarm budget {alpha}"
        ))),
    }
}
