//! Volatility band, the `G` function, volatility scenario families and the
//! Monte Carlo estimator of the sublinear expectation
//! `E^[X] = sup_P E_P[X]` over a finite family of volatility laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rng;
use crate::shortrate::{simulate_bundle, PathBundle, PathModel, TimeGrid};

const BAND_TOL: f64 = 1e-12;

/// The volatility uncertainty interval `[sigma_lo, sigma_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBand", into = "RawBand")]
pub struct VolBand {
    sigma_lo: f64,
    sigma_hi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBand {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawBand> for VolBand {
    type Error = Error;
    fn try_from(raw: RawBand) -> Result<Self> {
        VolBand::new(raw.lo, raw.hi)
    }
}

impl From<VolBand> for RawBand {
    fn from(b: VolBand) -> Self {
        RawBand {
            lo: b.sigma_lo,
            hi: b.sigma_hi,
        }
    }
}

impl VolBand {
    pub fn new(sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        if !(sigma_lo.is_finite() && sigma_hi.is_finite() && sigma_lo > 0.0 && sigma_lo <= sigma_hi)
        {
            return Err(Error::InvalidBand {
                lo: sigma_lo,
                hi: sigma_hi,
            });
        }
        Ok(Self { sigma_lo, sigma_hi })
    }

    pub fn lo(&self) -> f64 {
        self.sigma_lo
    }

    pub fn hi(&self) -> f64 {
        self.sigma_hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_lo == self.sigma_hi
    }

    pub fn contains(&self, sigma: f64) -> bool {
        let tol = BAND_TOL * self.sigma_hi;
        sigma >= self.sigma_lo - tol && sigma <= self.sigma_hi + tol
    }

    /// `G(a) = 1/2 sup { s^2 a : s in [lo, hi] }`.
    pub fn g(&self, a: f64) -> f64 {
        g_value(self, a)
    }
}

pub fn g_value(band: &VolBand, a: f64) -> f64 {
    if a >= 0.0 {
        0.5 * band.sigma_hi * band.sigma_hi * a
    } else {
        0.5 * band.sigma_lo * band.sigma_lo * a
    }
}

/// Feedback rules for adapted volatility processes. A rule sees the path
/// strictly up to the current grid time and answers with a band extreme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackRule {
    /// `hi` when `B_t >= params[0]` (default 0), else `lo`.
    BSign,
    /// `hi` while `<B>_t <= params[0] * t`, else `lo`. Keeps realized
    /// variance close to the target rate `params[0]`.
    QvTarget,
}

/// Read-only view of a path up to and including grid index `k`.
pub struct PathView<'a> {
    pub k: usize,
    pub t: f64,
    pub sigma: &'a [f64],
    pub b: &'a [f64],
    pub qv: &'a [f64],
}

impl FeedbackRule {
    pub(crate) fn choose(&self, params: &[f64], band: &VolBand, view: &PathView<'_>) -> f64 {
        let high = match self {
            FeedbackRule::BSign => view.b[view.k] >= params.first().copied().unwrap_or(0.0),
            FeedbackRule::QvTarget => view.qv[view.k] <= params[0] * view.t,
        };
        if high {
            band.hi()
        } else {
            band.lo()
        }
    }
}

/// One admissible volatility process in discretized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Constant {
        value: f64,
    },
    /// `values[i]` applies on `[times[i], times[i + 1])`; `times[0] = 0` and
    /// the last value holds to any horizon.
    #[serde(rename = "piecewise")]
    PiecewiseConstant { times: Vec<f64>, values: Vec<f64> },
    /// Markov switching between the band extremes with the given intensity
    /// per unit time; the regime path draws from its own stream.
    #[serde(rename = "switching")]
    RandomSwitching { intensity: f64, seed: u64 },
    #[serde(rename = "feedback")]
    AdaptedFeedback {
        rule: FeedbackRule,
        #[serde(default)]
        params: Vec<f64>,
    },
}

impl ScenarioSpec {
    pub fn constant(value: f64) -> Self {
        ScenarioSpec::Constant { value }
    }

    /// Alternates between the band extremes every `period`, up to `horizon`.
    pub fn bang_bang(band: &VolBand, period: f64, horizon: f64, start_high: bool) -> Self {
        let n = ((horizon / period).ceil() as usize).max(1);
        let times = (0..n).map(|i| i as f64 * period).collect();
        let values = (0..n)
            .map(|i| {
                if (i % 2 == 0) == start_high {
                    band.hi()
                } else {
                    band.lo()
                }
            })
            .collect();
        ScenarioSpec::PiecewiseConstant { times, values }
    }

    pub fn label(&self) -> String {
        match self {
            ScenarioSpec::Constant { value } => format!("const({value})"),
            ScenarioSpec::PiecewiseConstant { times, .. } => format!("piecewise({})", times.len()),
            ScenarioSpec::RandomSwitching { intensity, seed } => {
                format!("switching({intensity};{seed})")
            }
            ScenarioSpec::AdaptedFeedback { rule, .. } => format!("feedback({rule:?})"),
        }
    }

    pub fn validate(&self, band: &VolBand) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        match self {
            ScenarioSpec::Constant { value } => {
                if !band.contains(*value) {
                    return bad(format!("constant {value} outside band"));
                }
            }
            ScenarioSpec::PiecewiseConstant { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("piecewise: times and values must be non-empty and equal length".into());
                }
                if times[0] != 0.0 {
                    return bad(format!("piecewise: first time must be 0, got {}", times[0]));
                }
                if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
                    return bad(format!("piecewise: times not strictly increasing at {}", i + 1));
                }
                if let Some(v) = values.iter().find(|v| !band.contains(**v)) {
                    return bad(format!("piecewise: value {v} outside band"));
                }
            }
            ScenarioSpec::RandomSwitching { intensity, .. } => {
                if !(intensity.is_finite() && *intensity >= 0.0) {
                    return bad(format!("switching: bad intensity {intensity}"));
                }
            }
            ScenarioSpec::AdaptedFeedback { rule, params } => {
                if params.iter().any(|p| !p.is_finite()) {
                    return bad("feedback: non-finite parameter".into());
                }
                if *rule == FeedbackRule::QvTarget && params.len() != 1 {
                    return bad("feedback qv_target needs one parameter".into());
                }
            }
        }
        Ok(())
    }
}

/// A band together with its scenarios; the JSON exchange document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFamily {
    pub band: VolBand,
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioFamily {
    pub fn from_json(s: &str) -> Result<Self> {
        let fam: ScenarioFamily = serde_json::from_str(s)?;
        for sc in &fam.scenarios {
            sc.validate(&fam.band)?;
        }
        Ok(fam)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Finite stand-in for the admissible volatility processes: evenly spaced
/// constants (extremes included), then `n_switching` switching scenarios
/// alternating between deterministic bang-bang and random regime switching.
pub fn default_scenario_family(
    band: &VolBand,
    n_constant: usize,
    n_switching: usize,
    seed: u64,
    horizon: f64,
) -> Result<Vec<ScenarioSpec>> {
    if n_constant < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_constant must be >= 2 (both extremes are required), got {n_constant}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let step = (band.hi() - band.lo()) / (n_constant - 1) as f64;
    let mut family: Vec<ScenarioSpec> = (0..n_constant)
        .map(|i| {
            let v = if i == n_constant - 1 {
                band.hi()
            } else {
                band.lo() + i as f64 * step
            };
            ScenarioSpec::constant(v)
        })
        .collect();
    for j in 0..n_switching {
        let level = (j / 2) as i32;
        if j % 2 == 0 {
            let switches = 4.0 * 2f64.powi(level / 2);
            let start_high = level % 2 == 1;
            family.push(ScenarioSpec::bang_bang(band, horizon / switches, horizon, start_high));
        } else {
            family.push(ScenarioSpec::RandomSwitching {
                intensity: 4.0 * (level + 1) as f64 / horizon,
                seed: rng::substream(seed, j as u64),
            });
        }
    }
    Ok(family)
}

/// Monte Carlo sizes and seeding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub base_seed: u64,
    /// Simulate paths in antithetic pairs `(Z, -Z)`; statistics are then
    /// taken over pair averages.
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, horizon: f64, base_seed: u64) -> Result<Self> {
        let cfg = Self {
            n_paths,
            n_steps,
            horizon,
            base_seed,
            antithetic: false,
            execution: Execution::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_paths and n_steps must be >= 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    /// Number of independent sampling units (paths, or pairs when antithetic).
    pub fn n_units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEstimate {
    pub id: usize,
    pub label: String,
    pub mean: f64,
    pub se: f64,
}

/// Upper and lower expectation with per-scenario statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublinearEstimate {
    pub upper: f64,
    pub lower: f64,
    pub upper_se: f64,
    pub lower_se: f64,
    pub argmax_scenario: usize,
    pub argmin_scenario: usize,
    pub per_scenario: Vec<ScenarioEstimate>,
}

impl SublinearEstimate {
    fn from_scenarios(per_scenario: Vec<ScenarioEstimate>) -> Self {
        let mut imax = 0;
        let mut imin = 0;
        for (i, s) in per_scenario.iter().enumerate() {
            if s.mean > per_scenario[imax].mean {
                imax = i;
            }
            if s.mean < per_scenario[imin].mean {
                imin = i;
            }
        }
        Self {
            upper: per_scenario[imax].mean,
            lower: per_scenario[imin].mean,
            upper_se: per_scenario[imax].se,
            lower_se: per_scenario[imin].se,
            argmax_scenario: per_scenario[imax].id,
            argmin_scenario: per_scenario[imin].id,
            per_scenario,
        }
    }
}

/// Streaming mean and standard error (Welford). A constant sample yields
/// its value exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn se(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// Per-path outputs of one scenario: `n_paths x dim`, row-major, with
/// antithetic partners in adjacent rows.
pub(crate) struct PathSamples {
    pub dim: usize,
    pub antithetic: bool,
    pub data: Vec<f64>,
}

impl PathSamples {
    pub fn n_paths(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    /// Values of channel `c` per independent unit.
    pub fn units(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        let step = if self.antithetic { 2 } else { 1 };
        (0..self.n_paths()).step_by(step).map(move |p| {
            if self.antithetic {
                0.5 * (self.row(p)[c] + self.row(p + 1)[c])
            } else {
                self.row(p)[c]
            }
        })
    }

    pub fn moments(&self, c: usize) -> Moments {
        self.units(c).collect()
    }

    pub fn max_abs(&self, c: usize) -> f64 {
        (0..self.n_paths()).map(|p| self.row(p)[c].abs()).fold(0.0, f64::max)
    }
}

/// Simulates every path of one scenario and records `dim` outputs per path.
pub(crate) fn sample_scenario<F>(
    scenario_index: usize,
    scenario: &ScenarioSpec,
    band: &VolBand,
    cfg: &McConfig,
    model: &PathModel,
    dim: usize,
    f: F,
) -> Result<PathSamples>
where
    F: Fn(&PathBundle, &mut [f64]) + Sync + Send,
{
    cfg.validate()?;
    scenario.validate(band)?;
    let grid = cfg.grid()?;
    let stepper = model.stepper(&grid);
    let per_unit = if cfg.antithetic { 2 } else { 1 };
    let units = exec::map_range(cfg.n_units(), cfg.execution, |u| {
        let seed = rng::path_seed(cfg.base_seed, scenario_index, u);
        let z = rng::standard_normals(seed, grid.n_steps());
        let switch_seed = rng::substream(seed, 0xD1CE);
        let mut out = vec![0.0; dim * per_unit];
        for j in 0..per_unit {
            let sign = if j == 0 { 1.0 } else { -1.0 };
            let bundle = simulate_bundle(scenario, band, &grid, &stepper, &z, sign, switch_seed);
            f(&bundle, &mut out[j * dim..(j + 1) * dim]);
        }
        out
    });
    let data: Vec<f64> = units.into_iter().flatten().collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFunctional {
            scenario: scenario_index,
            label: scenario.label(),
            path: pos / dim,
        });
    }
    Ok(PathSamples {
        dim,
        antithetic: cfg.antithetic,
        data,
    })
}

/// Upper/lower expectation of `functional` over the scenario family.
///
/// Each scenario runs on its own deterministic streams derived from
/// `(base_seed, scenario index, path index)`. For a degenerate band every
/// admissible scenario coincides, so only the first one is simulated and
/// its statistics are shared: `upper == lower` exactly.
pub fn estimate_sublinear<F>(
    functional: F,
    band: &VolBand,
    family: &[ScenarioSpec],
    cfg: &McConfig,
    model: &PathModel,
) -> Result<SublinearEstimate>
where
    F: Fn(&PathBundle) -> f64 + Sync + Send,
{
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty scenario family".into()));
    }
    for sc in family {
        sc.validate(band)?;
    }
    let run = |i: usize| -> Result<(f64, f64)> {
        let s = sample_scenario(i, &family[i], band, cfg, model, 1, |b, out| {
            out[0] = functional(b)
        })?;
        let m = s.moments(0);
        Ok((m.mean(), m.se()))
    };
    let per_scenario = if band.is_degenerate() {
        let (mean, se) = run(0)?;
        family
            .iter()
            .enumerate()
            .map(|(id, sc)| ScenarioEstimate {
                id,
                label: sc.label(),
                mean,
                se,
            })
            .collect()
    } else {
        let mut v = Vec::with_capacity(family.len());
        for (id, sc) in family.iter().enumerate() {
            let (mean, se) = run(id)?;
            v.push(ScenarioEstimate {
                id,
                label: sc.label(),
                mean,
                se,
            });
        }
        v
    };
    Ok(SublinearEstimate::from_scenarios(per_scenario))
}
