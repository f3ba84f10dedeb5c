//! Discrete-time paths of the volatility, the driver `B`, its quadratic
//! variation, `lambda`, the short rate and the money-market account.
//!
//! All schemes live on a uniform grid. The mean reversion uses the exact
//! propagator `exp(-alpha dt)` and the noise increment is weighted at the
//! step midpoint, `exp(-alpha dt / 2) dB`. The `lambda` kernel is evaluated
//! at the left end of each quadratic-variation increment (first order).

use std::io::Write;

use crate::error::{Error, Result};
use crate::gcore::{PathView, ScenarioSpec, VolBand};
use crate::io::fmt_f64;
use crate::quad::gauss_legendre2;
use crate::rng;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs horizon > 0 and n_steps >= 1 (got {horizon}, {n_steps})"
            )));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Grid index of `t`, if `t` is a grid time up to rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if (x - k).abs() <= 1e-9 * x.abs().max(1.0) && k >= 0.0 && k as usize <= self.n_steps {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// A right-continuous piecewise-linear function.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    /// `(start, value at start, slope)`, starts strictly increasing.
    pieces: Vec<(f64, f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        if pieces.is_empty() || pieces.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "piecewise-linear function needs increasing piece starts".into(),
            ));
        }
        Ok(Self { pieces })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_near(t, t)
    }

    /// The linear piece that contains `inside`, evaluated at `t`. Gives
    /// one-sided limits at breakpoints.
    pub fn eval_near(&self, t: f64, inside: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.0 <= inside).saturating_sub(1);
        let (s, v, m) = self.pieces[i];
        v + m * (t - s)
    }

    /// Interior breakpoints, where the function may jump or kink.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().skip(1).map(|p| p.0)
    }
}

/// The deterministic mean-reversion level `mu(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanLevel {
    Constant(f64),
    Piecewise(PiecewiseLinear),
}

impl MeanLevel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            MeanLevel::Constant(c) => *c,
            MeanLevel::Piecewise(p) => p.eval(t),
        }
    }

    /// See [`PiecewiseLinear::eval_near`].
    pub fn eval_near(&self, t: f64, inside: f64) -> f64 {
        match self {
            MeanLevel::Constant(c) => *c,
            MeanLevel::Piecewise(p) => p.eval_near(t, inside),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            MeanLevel::Constant(_) => Vec::new(),
            MeanLevel::Piecewise(p) => p.breakpoints().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateParams {
    pub r0: f64,
    pub alpha: f64,
    pub mu: MeanLevel,
}

impl RateParams {
    pub fn new(r0: f64, alpha: f64, mu: MeanLevel) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if !r0.is_finite() {
            return Err(Error::InvalidParameter(format!("r0 must be finite, got {r0}")));
        }
        Ok(Self { r0, alpha, mu })
    }

    pub fn constant_mu(r0: f64, alpha: f64, mu: f64) -> Result<Self> {
        Self::new(r0, alpha, MeanLevel::Constant(mu))
    }
}

/// Which drift the short rate follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    /// `dr = (mu - alpha r) dt + dB`.
    Original,
    /// `dr = (mu + lambda - alpha r) dt + dB`, the drift under which
    /// discounted robust bond prices are martingales for every prior.
    Shifted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathModel {
    pub params: RateParams,
    pub dynamics: Dynamics,
}

impl PathModel {
    pub fn new(params: RateParams, dynamics: Dynamics) -> Self {
        Self { params, dynamics }
    }

    pub fn stepper(&self, grid: &TimeGrid) -> RateStepper {
        RateStepper::new(&self.params, grid, self.dynamics == Dynamics::Shifted)
    }
}

impl Default for PathModel {
    fn default() -> Self {
        Self {
            params: RateParams {
                r0: 0.0,
                alpha: 1.0,
                mu: MeanLevel::Constant(0.0),
            },
            dynamics: Dynamics::Original,
        }
    }
}

/// Per-grid constants of the short-rate scheme, shared by all paths.
#[derive(Clone, Debug)]
pub struct RateStepper {
    dt: f64,
    alpha: f64,
    r0: f64,
    decay: f64,
    half_decay: f64,
    shift_weight: f64,
    shifted: bool,
    mu_int: Vec<f64>,
}

impl RateStepper {
    pub fn new(params: &RateParams, grid: &TimeGrid, shifted: bool) -> Self {
        let dt = grid.dt();
        let a = params.alpha;
        let breaks = params.mu.breakpoints();
        let mu_int = (0..grid.n_steps())
            .map(|k| {
                let (t0, t1) = (grid.time(k), grid.time(k + 1));
                let g = |s: f64| (-a * (t1 - s)).exp() * params.mu.eval(s);
                let mut edges = vec![t0];
                edges.extend(breaks.iter().copied().filter(|&x| x > t0 && x < t1));
                edges.push(t1);
                edges.windows(2).map(|w| gauss_legendre2(g, w[0], w[1])).sum()
            })
            .collect();
        Self {
            dt,
            alpha: a,
            r0: params.r0,
            decay: (-a * dt).exp(),
            half_decay: (-0.5 * a * dt).exp(),
            shift_weight: -(-a * dt).exp_m1() / a,
            shifted,
            mu_int,
        }
    }

    fn rates(&self, b: &[f64], lambda: Option<&[f64]>) -> Vec<f64> {
        let n = b.len() - 1;
        let mut r = Vec::with_capacity(n + 1);
        r.push(self.r0);
        for k in 0..n {
            let mut next = self.decay * r[k] + self.mu_int[k] + self.half_decay * (b[k + 1] - b[k]);
            if let Some(l) = lambda {
                next += self.shift_weight * l[k];
            }
            r.push(next);
        }
        r
    }
}

/// `sigma`, `B` and `<B>` of one path.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverPath {
    pub sigma: Vec<f64>,
    pub b: Vec<f64>,
    pub qv: Vec<f64>,
}

/// One fully simulated path. `sigma[k]` applies on `[t_k, t_{k+1})`; every
/// other vector has one entry per grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub sigma: Vec<f64>,
    pub b: Vec<f64>,
    pub qv: Vec<f64>,
    pub lambda: Vec<f64>,
    pub r: Vec<f64>,
    pub d: Vec<f64>,
}

impl PathBundle {
    pub fn terminal_discount(&self) -> f64 {
        1.0 / self.d[self.d.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,sigma,B,qv,lambda,r,D")?;
        for k in 0..=self.grid.n_steps() {
            self.write_row(&mut w, k, None)?;
        }
        Ok(())
    }

    pub(crate) fn write_row<W: Write>(&self, w: &mut W, k: usize, path: Option<usize>) -> Result<()> {
        let sigma = self.sigma[k.min(self.sigma.len() - 1)];
        if let Some(p) = path {
            write!(w, "{p},")?;
        }
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_f64(self.grid.time(k)),
            fmt_f64(sigma),
            fmt_f64(self.b[k]),
            fmt_f64(self.qv[k]),
            fmt_f64(self.lambda[k]),
            fmt_f64(self.r[k]),
            fmt_f64(self.d[k])
        )?;
        Ok(())
    }
}

/// Writes several paths with a leading `path` column.
pub fn write_paths_csv<W: Write>(paths: &[PathBundle], mut w: W) -> Result<()> {
    writeln!(w, "path,t,sigma,B,qv,lambda,r,D")?;
    for (p, bundle) in paths.iter().enumerate() {
        for k in 0..=bundle.grid.n_steps() {
            bundle.write_row(&mut w, k, Some(p))?;
        }
    }
    Ok(())
}

enum VolSource<'a> {
    Fixed(f64),
    Schedule(&'a [f64], &'a [f64]),
    Regimes(Vec<bool>),
    Feedback(crate::gcore::FeedbackRule, &'a [f64]),
}

fn vol_source<'a>(
    scenario: &'a ScenarioSpec,
    grid: &TimeGrid,
    switch_seed: u64,
) -> VolSource<'a> {
    match scenario {
        ScenarioSpec::Constant { value } => VolSource::Fixed(*value),
        ScenarioSpec::PiecewiseConstant { times, values } => VolSource::Schedule(times, values),
        ScenarioSpec::RandomSwitching { intensity, seed } => {
            let mut rng = rng::rng_from(rng::substream(switch_seed, *seed));
            let p = -(-intensity * grid.dt()).exp_m1();
            let mut high = rng.random_bool(0.5);
            let regimes = (0..grid.n_steps())
                .map(|k| {
                    if k > 0 && rng.random::<f64>() < p {
                        high = !high;
                    }
                    high
                })
                .collect();
            VolSource::Regimes(regimes)
        }
        ScenarioSpec::AdaptedFeedback { rule, params } => VolSource::Feedback(*rule, params),
    }
}

/// Builds `sigma`, `B`, `<B>` from pre-drawn normals. `sign = -1` gives the
/// antithetic partner. Feedback rules only see the path up to `t_k`.
pub(crate) fn driver_from_normals(
    scenario: &ScenarioSpec,
    band: &VolBand,
    grid: &TimeGrid,
    z: &[f64],
    sign: f64,
    switch_seed: u64,
) -> DriverPath {
    let n = grid.n_steps();
    let dt = grid.dt();
    let sqdt = dt.sqrt();
    let source = vol_source(scenario, grid, switch_seed);
    let mut sigma = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    b.push(0.0);
    qv.push(0.0);
    let tol = 1e-9 * dt;
    for k in 0..n {
        let t = grid.time(k);
        let s = match &source {
            VolSource::Fixed(v) => *v,
            VolSource::Schedule(times, values) => {
                values[times.partition_point(|&x| x <= t + tol).saturating_sub(1)]
            }
            VolSource::Regimes(h) => {
                if h[k] {
                    band.hi()
                } else {
                    band.lo()
                }
            }
            VolSource::Feedback(rule, params) => {
                let view = PathView {
                    k,
                    t,
                    sigma: &sigma,
                    b: &b,
                    qv: &qv,
                };
                rule.choose(params, band, &view)
            }
        };
        sigma.push(s);
        b.push(b[k] + sign * s * sqdt * z[k]);
        qv.push(qv[k] + s * s * dt);
    }
    DriverPath { sigma, b, qv }
}

/// Simulates the volatility, `B` and `<B>` for one path.
pub fn simulate_driver(
    scenario: &ScenarioSpec,
    band: &VolBand,
    grid: &TimeGrid,
    seed: u64,
) -> Result<DriverPath> {
    scenario.validate(band)?;
    let z = rng::standard_normals(seed, grid.n_steps());
    Ok(driver_from_normals(
        scenario,
        band,
        grid,
        &z,
        1.0,
        rng::substream(seed, 0xD1CE),
    ))
}

/// `lambda_t = int_0^t exp(-2 alpha (t - s)) d<B>_s` by the recursion
/// `lambda_{k+1} = exp(-2 alpha dt) (lambda_k + dqv_k)`.
pub fn lambda_path(qv: &[f64], alpha: f64, dt: f64) -> Result<Vec<f64>> {
    if let Some(i) = qv.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::DecreasingQv { step: i });
    }
    Ok(lambda_unchecked(qv, alpha, dt))
}

fn lambda_unchecked(qv: &[f64], alpha: f64, dt: f64) -> Vec<f64> {
    let decay = (-2.0 * alpha * dt).exp();
    let mut lambda = Vec::with_capacity(qv.len());
    lambda.push(0.0);
    for k in 0..qv.len() - 1 {
        lambda.push(decay * (lambda[k] + (qv[k + 1] - qv[k])));
    }
    lambda
}

/// Short rate under the original drift `mu - alpha r`.
pub fn short_rate_original(b: &[f64], grid: &TimeGrid, params: &RateParams) -> Vec<f64> {
    RateStepper::new(params, grid, false).rates(b, None)
}

/// Short rate under the shifted drift `mu + lambda - alpha r`, with
/// `lambda` held at its left-point value on each step.
pub fn short_rate_shifted(b: &[f64], lambda: &[f64], grid: &TimeGrid, params: &RateParams) -> Vec<f64> {
    RateStepper::new(params, grid, true).rates(b, Some(lambda))
}

/// `D_k = exp(int_0^{t_k} r ds)` with the trapezoid rule.
pub fn money_market(r: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let half = 0.5 * grid.dt();
    let mut acc = 0.0;
    let mut d = Vec::with_capacity(r.len());
    d.push(1.0);
    for k in 1..r.len() {
        acc += half * (r[k - 1] + r[k]);
        d.push(acc.exp());
    }
    d
}

pub(crate) fn simulate_bundle(
    scenario: &ScenarioSpec,
    band: &VolBand,
    grid: &TimeGrid,
    stepper: &RateStepper,
    z: &[f64],
    sign: f64,
    switch_seed: u64,
) -> PathBundle {
    let DriverPath { sigma, b, qv } = driver_from_normals(scenario, band, grid, z, sign, switch_seed);
    let lambda = lambda_unchecked(&qv, stepper.alpha, stepper.dt);
    let r = if stepper.shifted {
        stepper.rates(&b, Some(&lambda))
    } else {
        stepper.rates(&b, None)
    };
    let d = money_market(&r, grid);
    PathBundle {
        grid: *grid,
        sigma,
        b,
        qv,
        lambda,
        r,
        d,
    }
}

/// Simulates one complete path.
pub fn simulate_path(
    scenario: &ScenarioSpec,
    band: &VolBand,
    grid: &TimeGrid,
    model: &PathModel,
    seed: u64,
) -> Result<PathBundle> {
    scenario.validate(band)?;
    let z = rng::standard_normals(seed, grid.n_steps());
    let stepper = model.stepper(grid);
    Ok(simulate_bundle(
        scenario,
        band,
        grid,
        &stepper,
        &z,
        1.0,
        rng::substream(seed, 0xD1CE),
    ))
}
