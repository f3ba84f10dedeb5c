//! Zero-coupon bond prices.
//!
//! The robust price is `P(t,T) = exp(A(t,T) - B(t,T) r_t - B(t,T)^2 lambda_t / 2)`
//! with `A(t,T) = -int_t^T mu(s) B(s,T) ds`; it involves no volatility
//! level at all. The classical Hull-White price under a single constant
//! volatility carries the convexity term `sigma^2 B^2 / 2` inside `A` instead.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::{estimate_sublinear, sample_scenario, McConfig, ScenarioSpec, SublinearEstimate, VolBand};
use crate::io::fmt_f64;
use crate::quad::simpson_split;
use crate::shortrate::{Dynamics, PathModel, RateParams, TimeGrid};

/// Panel counts for the composite Simpson rule used for `A`. Each smooth
/// piece of the integrand gets `max(min_panels, panels_per_unit * length)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub min_panels: usize,
    pub panels_per_unit: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            min_panels: 64,
            panels_per_unit: 256,
        }
    }
}

fn check_order(t: f64, maturity: f64) -> Result<()> {
    if !(t.is_finite() && maturity.is_finite()) || t < 0.0 || t > maturity {
        return Err(Error::TimeOrder { t, maturity });
    }
    Ok(())
}

/// `B` as a function of the time to maturity.
pub(crate) fn b_tau(alpha: f64, tau: f64) -> f64 {
    if alpha < 1e-8 {
        let x = alpha * tau;
        tau * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        -(-alpha * tau).exp_m1() / alpha
    }
}

/// `B(t,T) = (1 - exp(-alpha (T - t))) / alpha`.
pub fn b_factor(alpha: f64, t: f64, maturity: f64) -> Result<f64> {
    check_order(t, maturity)?;
    Ok(b_tau(alpha, maturity - t))
}

pub fn a_robust(params: &RateParams, t: f64, maturity: f64) -> Result<f64> {
    a_robust_with(params, t, maturity, Quadrature::default())
}

pub fn a_robust_with(params: &RateParams, t: f64, maturity: f64, quad: Quadrature) -> Result<f64> {
    check_order(t, maturity)?;
    let a = params.alpha;
    let integral = simpson_split(
        |s, m| params.mu.eval_near(s, m) * b_tau(a, maturity - s),
        t,
        maturity,
        &params.mu.breakpoints(),
        quad.min_panels,
        quad.panels_per_unit,
    );
    Ok(-integral)
}

/// `A^sigma(t,T) = int_t^T (sigma^2 B(s,T)^2 / 2 - mu(s) B(s,T)) ds`.
pub fn a_classical(params: &RateParams, sigma: f64, t: f64, maturity: f64) -> Result<f64> {
    check_order(t, maturity)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let a = params.alpha;
    let quad = Quadrature::default();
    Ok(simpson_split(
        |s, m| {
            let b = b_tau(a, maturity - s);
            0.5 * sigma * sigma * b * b - params.mu.eval_near(s, m) * b
        },
        t,
        maturity,
        &params.mu.breakpoints(),
        quad.min_panels,
        quad.panels_per_unit,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondQuote {
    pub t: f64,
    pub maturity: f64,
    pub price: f64,
}

impl BondQuote {
    /// Price in units of the money-market account `D_t`.
    pub fn discounted(&self, d_t: f64) -> f64 {
        self.price / d_t
    }
}

/// `exp(a - b r - b^2 lambda / 2)`.
pub fn robust_price_from_parts(a: f64, b: f64, r: f64, lambda: f64) -> f64 {
    (a - b * r - 0.5 * b * b * lambda).exp()
}

pub fn price_robust(params: &RateParams, t: f64, maturity: f64, r_t: f64, lambda_t: f64) -> Result<BondQuote> {
    if !(lambda_t >= 0.0) {
        return Err(Error::NegativeLambda(lambda_t));
    }
    let a = a_robust(params, t, maturity)?;
    let b = b_factor(params.alpha, t, maturity)?;
    Ok(BondQuote {
        t,
        maturity,
        price: robust_price_from_parts(a, b, r_t, lambda_t),
    })
}

pub fn price_classical_hw(params: &RateParams, sigma: f64, t: f64, maturity: f64, r_t: f64) -> Result<BondQuote> {
    let a = a_classical(params, sigma, t, maturity)?;
    let b = b_factor(params.alpha, t, maturity)?;
    Ok(BondQuote {
        t,
        maturity,
        price: (a - b * r_t).exp(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub upper_se: f64,
    pub lower_se: f64,
    /// Standard error of `gap` (scenarios use independent streams).
    pub se: f64,
    pub closed_form_upper: f64,
    pub closed_form_lower: f64,
    pub closed_form_gap: f64,
    /// `gap > 3 se`.
    pub significant: bool,
    pub estimate: SublinearEstimate,
}

/// Sublinear upper and lower expectation of `exp(-int_0^T r ds)` under the
/// original dynamics, against the classical prices at the band extremes.
/// Both constant extremes are always part of the family.
pub fn noarb_gap(
    params: &RateParams,
    band: &VolBand,
    maturity: f64,
    family: &[ScenarioSpec],
    cfg: &McConfig,
) -> Result<GapReport> {
    let mut family = family.to_vec();
    for v in [band.lo(), band.hi()] {
        if !family.contains(&ScenarioSpec::constant(v)) {
            family.push(ScenarioSpec::constant(v));
        }
    }
    let cfg = cfg.with_horizon(maturity);
    let model = PathModel::new(params.clone(), Dynamics::Original);
    let estimate = estimate_sublinear(|p| p.terminal_discount(), band, &family, &cfg, &model)?;
    let closed_form_upper = price_classical_hw(params, band.hi(), 0.0, maturity, params.r0)?.price;
    let closed_form_lower = price_classical_hw(params, band.lo(), 0.0, maturity, params.r0)?.price;
    let gap = estimate.upper - estimate.lower;
    let se = estimate.upper_se.hypot(estimate.lower_se);
    Ok(GapReport {
        upper: estimate.upper,
        lower: estimate.lower,
        gap,
        upper_se: estimate.upper_se,
        lower_se: estimate.lower_se,
        se,
        closed_form_upper,
        closed_form_lower,
        closed_form_gap: closed_form_upper - closed_form_lower,
        significant: gap > 3.0 * se,
        estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub reference: f64,
    pub pass: bool,
    /// Mean one-step increment of the discounted price after `t`
    /// (zero at maturity).
    pub increment_mean: f64,
    pub increment_se: f64,
    pub increment_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub scenario_id: usize,
    pub label: String,
    pub maturity: f64,
    /// Discounted price at time zero.
    pub reference: f64,
    pub checkpoints: Vec<CheckpointStat>,
    /// Mean over paths of the least-squares slope of the discounted price
    /// against time, across `{0} + checkpoints`.
    pub drift_slope: f64,
    pub drift_se: f64,
    pub drift_pass: bool,
    pub terminal_max_error: f64,
    pub terminal_tolerance: f64,
    pub terminal_pass: bool,
}

impl MartingaleReport {
    /// Checkpoint means, drift slope and terminal payoff all agree with a
    /// martingale. Increment verdicts are diagnostics only.
    pub fn passed(&self) -> bool {
        self.checkpoints_pass() && self.drift_pass && self.terminal_pass
    }

    /// Only the checkpoint mean verdicts.
    pub fn checkpoints_pass(&self) -> bool {
        self.checkpoints.iter().all(|c| c.pass)
    }
}

fn within(mean: f64, reference: f64, se: f64) -> bool {
    (mean - reference).abs() <= 3.0 * se
}

/// Tests `E[P~(t,T)] = P~(0,T)` per scenario, where `P~ = P / D` uses the
/// robust price along simulated paths. `Dynamics::Shifted` is the model;
/// `Dynamics::Original` is the power check and should fail when the band
/// is non-degenerate.
pub fn martingale_check(
    params: &RateParams,
    band: &VolBand,
    scenarios: &[ScenarioSpec],
    maturity: f64,
    checkpoints: &[f64],
    cfg: &McConfig,
    dynamics: Dynamics,
) -> Result<Vec<MartingaleReport>> {
    let cfg = cfg.with_horizon(maturity);
    let grid = TimeGrid::new(maturity, cfg.n_steps)?;
    let mut idx = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        check_order(t, maturity)?;
        idx.push(grid.index_of(t).ok_or(Error::OffGrid { t, dt: grid.dt() })?);
    }
    idx.sort_unstable();
    idx.dedup();
    let n = grid.n_steps();
    let alpha = params.alpha;
    // A and B at every grid index that is read.
    let mut needed: Vec<usize> = idx.iter().flat_map(|&k| [k, (k + 1).min(n)]).collect();
    needed.extend([0, n]);
    needed.sort_unstable();
    needed.dedup();
    let mut a_at = vec![0.0; n + 1];
    let mut b_at = vec![0.0; n + 1];
    for &k in &needed {
        let t = grid.time(k);
        a_at[k] = a_robust(params, t, maturity)?;
        b_at[k] = b_tau(alpha, maturity - t);
    }
    let reference = robust_price_from_parts(a_at[0], b_at[0], params.r0, 0.0);

    let mut reg_times: Vec<usize> = vec![0];
    reg_times.extend(idx.iter().copied().filter(|&k| k != 0));
    let tbar = reg_times.iter().map(|&k| grid.time(k)).sum::<f64>() / reg_times.len() as f64;
    let sxx: f64 = reg_times.iter().map(|&k| (grid.time(k) - tbar).powi(2)).sum();

    let nc = idx.len();
    let dim = 2 * nc + 2;
    let model = PathModel::new(params.clone(), dynamics);
    let mut reports = Vec::with_capacity(scenarios.len());
    for (sid, sc) in scenarios.iter().enumerate() {
        let samples = sample_scenario(sid, sc, band, &cfg, &model, dim, |p, out| {
            let disc = |k: usize| robust_price_from_parts(a_at[k], b_at[k], p.r[k], p.lambda[k]) / p.d[k];
            for (c, &k) in idx.iter().enumerate() {
                let here = disc(k);
                out[c] = here;
                out[nc + c] = if k < n { disc(k + 1) - here } else { 0.0 };
            }
            out[2 * nc] = if sxx > 0.0 {
                reg_times
                    .iter()
                    .map(|&k| (grid.time(k) - tbar) * disc(k))
                    .sum::<f64>()
                    / sxx
            } else {
                0.0
            };
            let terminal = robust_price_from_parts(a_at[n], b_at[n], p.r[n], p.lambda[n]);
            out[2 * nc + 1] = terminal - 1.0;
        })?;
        let checkpoints: Vec<CheckpointStat> = idx
            .iter()
            .enumerate()
            .map(|(c, &k)| {
                let m = samples.moments(c);
                let inc = samples.moments(nc + c);
                CheckpointStat {
                    t: grid.time(k),
                    mean: m.mean(),
                    se: m.se(),
                    reference,
                    pass: within(m.mean(), reference, m.se()),
                    increment_mean: inc.mean(),
                    increment_se: inc.se(),
                    increment_pass: within(inc.mean(), 0.0, inc.se()),
                }
            })
            .collect();
        let slope = samples.moments(2 * nc);
        let terminal_max_error = samples.max_abs(2 * nc + 1);
        let terminal_tolerance = 5.0 * grid.dt();
        reports.push(MartingaleReport {
            scenario_id: sid,
            label: sc.label(),
            maturity,
            reference,
            checkpoints,
            drift_slope: slope.mean(),
            drift_se: slope.se(),
            drift_pass: within(slope.mean(), 0.0, slope.se()),
            terminal_max_error,
            terminal_tolerance,
            terminal_pass: terminal_max_error <= terminal_tolerance,
        });
    }
    Ok(reports)
}

/// `scenario,t,mean,se,ref,pass`, one row per scenario and checkpoint.
pub fn write_martingale_csv<W: Write>(reports: &[MartingaleReport], mut w: W) -> Result<()> {
    writeln!(w, "scenario,t,mean,se,ref,pass")?;
    for r in reports {
        for c in &r.checkpoints {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.label,
                fmt_f64(c.t),
                fmt_f64(c.mean),
                fmt_f64(c.se),
                fmt_f64(c.reference),
                c.pass
            )?;
        }
    }
    Ok(())
}
