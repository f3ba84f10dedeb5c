use std::fs;
use std::path::{Path, PathBuf};

use robust_term::calibration::{calibrate, CalibratedModel, ForwardCurve};
use robust_term::gheat::GridHints;
use robust_term::{Dynamics, Execution, McConfig, RateParams, ScenarioSpec, VolBand};
use serde::Deserialize;

use crate::CliError;

/// Terminal payoffs understood by `gheat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Payoff {
    /// `x^2`
    Square,
    /// `-x^2`
    NegSquare,
    /// `max(x, 0)`
    Call,
    /// `max(-x, 0)`
    Put,
    /// `|x|`
    Abs,
    /// `x`
    Linear,
}

impl Payoff {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Payoff::Square => x * x,
            Payoff::NegSquare => -x * x,
            Payoff::Call => x.max(0.0),
            Payoff::Put => (-x).max(0.0),
            Payoff::Abs => x.abs(),
            Payoff::Linear => x,
        }
    }
}

/// Everything a command may need. Each field is optional so that a config
/// file and command-line flags can be layered.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub band: Option<VolBand>,
    pub alpha: Option<f64>,
    pub r0: Option<f64>,
    pub mu: Option<f64>,
    /// Forward-curve file (CSV `T,f` or JSON). Relative paths in a config
    /// file are taken relative to that file.
    pub curve: Option<PathBuf>,
    pub maturity: Option<f64>,
    pub maturities: Option<Vec<f64>>,
    pub checkpoints: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub antithetic: Option<bool>,
    pub execution: Option<Execution>,
    pub dynamics: Option<Dynamics>,
    pub scenario: Option<ScenarioSpec>,
    pub scenarios: Option<Vec<ScenarioSpec>>,
    pub n_constant: Option<usize>,
    pub n_switching: Option<usize>,
    pub phi: Option<Payoff>,
    pub half_width_sds: Option<f64>,
    pub nodes_per_sd: Option<usize>,
    pub cfl: Option<f64>,
    pub save_every: Option<usize>,
    pub out: Option<PathBuf>,
}

macro_rules! layer {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))?;
        if let (Some(curve), Some(dir)) = (&cfg.curve, path.parent()) {
            if curve.is_relative() {
                cfg.curve = Some(dir.join(curve));
            }
        }
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        layer!(self, over;
            band, alpha, r0, mu, curve, maturity, maturities, checkpoints, paths, steps, seed,
            antithetic, execution, dynamics, scenario, scenarios, n_constant, n_switching, phi,
            half_width_sds, nodes_per_sd, cfl, save_every, out);
        self
    }

    pub fn band(&self) -> VolBand {
        self.band.unwrap_or_else(|| VolBand::new(0.005, 0.02).expect("default band"))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn calibrated(&self) -> Result<Option<CalibratedModel>, CliError> {
        match &self.curve {
            None => Ok(None),
            Some(path) => {
                let curve = ForwardCurve::from_path(path)?;
                Ok(Some(calibrate(&curve, self.alpha())?))
            }
        }
    }

    /// Rate parameters, from the curve when one is given. In calibrated
    /// mode `r0` and `mu` are not user inputs.
    pub fn rate_params(&self) -> Result<(RateParams, Option<CalibratedModel>), CliError> {
        match self.calibrated()? {
            Some(model) => {
                if self.r0.is_some() || self.mu.is_some() {
                    return Err(CliError::Validation(
                        "r0 and mu come from the curve; do not set them together with a curve".into(),
                    ));
                }
                Ok((model.rate_params(), Some(model)))
            }
            None => Ok((
                RateParams::constant_mu(self.r0.unwrap_or(0.02), self.alpha(), self.mu.unwrap_or(0.0))?,
                None,
            )),
        }
    }

    pub fn maturity(&self, model: Option<&CalibratedModel>) -> Result<f64, CliError> {
        let t = self.maturity.unwrap_or(1.0);
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Validation(format!("maturity must be > 0, got {t}")));
        }
        if let Some(m) = model {
            if t > m.curve.last_maturity() {
                return Err(CliError::Validation(format!(
                    "maturity {t} is beyond the last curve knot {}",
                    m.curve.last_maturity()
                )));
            }
        }
        Ok(t)
    }

    pub fn mc(&self, horizon: f64, default_paths: usize, antithetic: bool) -> Result<McConfig, CliError> {
        self.mc_with_steps(horizon, default_paths, 256, antithetic)
    }

    pub fn mc_with_steps(
        &self,
        horizon: f64,
        default_paths: usize,
        default_steps: usize,
        antithetic: bool,
    ) -> Result<McConfig, CliError> {
        let cfg = McConfig::new(
            self.paths.unwrap_or(default_paths),
            self.steps.unwrap_or(default_steps),
            horizon,
            self.seed(),
        )?
        .with_antithetic(self.antithetic.unwrap_or(antithetic))
        .with_execution(self.execution.unwrap_or_default());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid_hints(&self) -> GridHints {
        let d = GridHints::default();
        GridHints {
            half_width_sds: self.half_width_sds.unwrap_or(d.half_width_sds),
            nodes_per_sd: self.nodes_per_sd.unwrap_or(d.nodes_per_sd),
            cfl: self.cfl.unwrap_or(d.cfl),
        }
    }
}
