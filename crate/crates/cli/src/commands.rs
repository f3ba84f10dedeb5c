use std::fs::File;
use std::io::{self, BufWriter, Write};

use robust_term::bonds::{self, martingale_check, noarb_gap, write_martingale_csv};
use robust_term::calibration::initial_curve_roundtrip;
use robust_term::gheat::{solve_gheat_with, SolveOptions};
use robust_term::io::fmt_f64;
use robust_term::shortrate::{simulate_path, write_paths_csv};
use robust_term::{default_scenario_family, rng, Dynamics, PathModel, ScenarioSpec, TimeGrid};

use crate::config::{Payoff, RunConfig};
use crate::CliError;

/// Round-trip tolerance for the fitted discount curve.
const ROUNDTRIP_TOL: f64 = 1e-10;

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::Validation(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

enum Json {
    Num(f64),
    Int(usize),
    Bool(bool),
    Str(String),
}

/// A flat JSON object whose numbers carry 17 significant digits.
fn write_json_object<W: Write>(mut w: W, fields: &[(&str, Json)]) -> io::Result<()> {
    writeln!(w, "{{")?;
    for (i, (key, value)) in fields.iter().enumerate() {
        let v = match value {
            Json::Num(x) if x.is_finite() => fmt_f64(*x),
            Json::Num(_) => "null".to_string(),
            Json::Int(n) => n.to_string(),
            Json::Bool(b) => b.to_string(),
            Json::Str(s) => serde_json::to_string(s).expect("string serializes"),
        };
        let comma = if i + 1 < fields.len() { "," } else { "" };
        writeln!(w, "  \"{key}\": {v}{comma}")?;
    }
    writeln!(w, "}}")
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let band = cfg.band();
    let (params, model) = cfg.rate_params()?;
    let horizon = cfg.maturity(model.as_ref())?;
    let grid = TimeGrid::new(horizon, cfg.steps.unwrap_or(256))?;
    let scenario = cfg.scenario.clone().unwrap_or(ScenarioSpec::RandomSwitching {
        intensity: 4.0,
        seed: cfg.seed(),
    });
    let n = cfg.paths.unwrap_or(1);
    if n == 0 {
        return Err(CliError::Validation("paths must be >= 1".into()));
    }
    let path_model = PathModel::new(params, cfg.dynamics.unwrap_or(Dynamics::Shifted));
    let paths = (0..n)
        .map(|i| simulate_path(&scenario, &band, &grid, &path_model, rng::path_seed(cfg.seed(), 0, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = sink(cfg)?;
    if n == 1 {
        paths[0].write_csv(&mut out)?;
    } else {
        write_paths_csv(&paths, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn price(cfg: &RunConfig) -> Result<(), CliError> {
    let band = cfg.band();
    let (params, model) = cfg.rate_params()?;
    let maturities = match &cfg.maturities {
        Some(m) => m.clone(),
        None => {
            let last = model.as_ref().map_or(10.0, |m| m.curve.last_maturity().floor().min(10.0));
            (0..=last as usize).map(|t| t as f64).collect()
        }
    };
    let mut rows = Vec::with_capacity(maturities.len());
    for &t in &maturities {
        // Lower and upper are classical Hull-White prices at the band
        // extremes with the same mean level; in curve mode the robust
        // column is the fitted price, which reproduces the curve.
        let robust = match &model {
            Some(m) => m.price(0.0, t, m.r0, 0.0)?.price,
            None => bonds::price_robust(&params, 0.0, t, params.r0, 0.0)?.price,
        };
        let row = [
            bonds::price_classical_hw(&params, band.lo(), 0.0, t, params.r0)?.price,
            robust,
            bonds::price_classical_hw(&params, band.hi(), 0.0, t, params.r0)?.price,
        ];
        if row.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Numerical(format!("non-finite price at T = {t}")));
        }
        rows.push((t, row));
    }
    let mut out = sink(cfg)?;
    writeln!(out, "T,price_lower,price_robust,price_upper")?;
    for (t, [lo, mid, hi]) in rows {
        writeln!(out, "{},{},{},{}", fmt_f64(t), fmt_f64(lo), fmt_f64(mid), fmt_f64(hi))?;
    }
    out.flush()?;
    Ok(())
}

pub fn gap(cfg: &RunConfig) -> Result<(), CliError> {
    let band = cfg.band();
    let (params, model) = cfg.rate_params()?;
    let maturity = cfg.maturity(model.as_ref())?;
    let mc = cfg.mc(maturity, 20_000, true)?;
    let family = match &cfg.scenarios {
        Some(s) => s.clone(),
        None => default_scenario_family(
            &band,
            cfg.n_constant.unwrap_or(4),
            cfg.n_switching.unwrap_or(4),
            cfg.seed(),
            maturity,
        )?,
    };
    let rep = noarb_gap(&params, &band, maturity, &family, &mc)?;
    let est = &rep.estimate;
    let agrees = (rep.gap - rep.closed_form_gap).abs() <= 3.0 * rep.se;
    let mut out = sink(cfg)?;
    write_json_object(
        &mut out,
        &[
            ("upper", Json::Num(rep.upper)),
            ("lower", Json::Num(rep.lower)),
            ("gap", Json::Num(rep.gap)),
            ("closed_form_gap", Json::Num(rep.closed_form_gap)),
            ("se", Json::Num(rep.se)),
            ("flag", Json::Bool(rep.significant)),
            ("upper_se", Json::Num(rep.upper_se)),
            ("lower_se", Json::Num(rep.lower_se)),
            ("closed_form_upper", Json::Num(rep.closed_form_upper)),
            ("closed_form_lower", Json::Num(rep.closed_form_lower)),
            ("argmax_scenario", Json::Str(est.per_scenario[est.argmax_scenario].label.clone())),
            ("argmin_scenario", Json::Str(est.per_scenario[est.argmin_scenario].label.clone())),
            ("scenarios", Json::Int(est.per_scenario.len())),
        ],
    )?;
    out.flush()?;
    if !agrees {
        return Err(CliError::Verification(format!(
            "gap {} differs from the closed form {} by more than 3 se ({})",
            rep.gap, rep.closed_form_gap, rep.se
        )));
    }
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let band = cfg.band();
    let (params, model) = cfg.rate_params()?;
    let maturity = cfg.maturity(model.as_ref())?;
    // The drift bias of the scheme is O(dt); 512 steps keep it below the
    // antithetic standard error at the default path count.
    let mc = cfg.mc_with_steps(maturity, 20_000, 512, true)?;
    let scenarios = cfg.scenarios.clone().unwrap_or_else(|| {
        vec![
            ScenarioSpec::constant(band.lo()),
            ScenarioSpec::constant(band.hi()),
            ScenarioSpec::constant(0.5 * (band.lo() + band.hi())),
            ScenarioSpec::bang_bang(&band, maturity / 8.0, maturity, true),
            ScenarioSpec::RandomSwitching {
                intensity: 8.0 / maturity,
                seed: cfg.seed(),
            },
        ]
    });
    let checkpoints = cfg
        .checkpoints
        .clone()
        .unwrap_or_else(|| [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|f| f * maturity).collect());
    let dynamics = cfg.dynamics.unwrap_or(Dynamics::Shifted);
    let reports = martingale_check(&params, &band, &scenarios, maturity, &checkpoints, &mc, dynamics)?;
    let mut out = sink(cfg)?;
    write_martingale_csv(&reports, &mut out)?;
    out.flush()?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !(r.checkpoints_pass() && r.terminal_pass))
        .map(|r| r.label.clone())
        .collect();
    for r in &reports {
        eprintln!(
            "{}: checkpoints {}, drift slope {:.3e} (se {:.3e}), max |P(T,T) - 1| {:.3e}",
            r.label,
            if r.checkpoints_pass() { "pass" } else { "FAIL" },
            r.drift_slope,
            r.drift_se,
            r.terminal_max_error
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("martingale check failed for {}", failed.join(", "))))
    }
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg
        .calibrated()?
        .ok_or_else(|| CliError::Validation("calibrate needs a forward curve (--curve or \"curve\")".into()))?;
    let maturities = cfg.maturities.clone().unwrap_or_else(|| {
        let last = model.curve.last_maturity();
        let n = (last * 4.0).floor() as usize;
        let mut m: Vec<f64> = (0..=n).map(|i| i as f64 * 0.25).collect();
        m.extend(model.curve.knots().iter().map(|k| k.0));
        m.sort_by(f64::total_cmp);
        m.dedup();
        m
    });
    let report = initial_curve_roundtrip(&model, &maturities)?;
    let mut out = sink(cfg)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    eprintln!(
        "r0 = {}, max abs error = {:.3e}, max forward error = {:.3e}",
        fmt_f64(model.r0),
        report.max_abs_error,
        report.max_forward_error
    );
    if report.max_abs_error > ROUNDTRIP_TOL {
        return Err(CliError::Verification(format!(
            "round-trip error {} exceeds {ROUNDTRIP_TOL}",
            report.max_abs_error
        )));
    }
    Ok(())
}

pub fn gheat(cfg: &RunConfig) -> Result<(), CliError> {
    let band = cfg.band();
    let t = cfg.maturity(None)?;
    let phi = cfg.phi.unwrap_or(Payoff::Square);
    let grid = cfg.grid_hints().grid(&band, t)?;
    let opts = SolveOptions {
        save_every: cfg.save_every.unwrap_or(0),
        execution: cfg.execution.unwrap_or_default(),
    };
    let sol = solve_gheat_with(&grid.sample(|x| phi.eval(x)), &band, &grid, opts)?;
    let mut out = sink(cfg)?;
    sol.write_csv(&mut out)?;
    out.flush()?;
    eprintln!(
        "u({}, 0) = {} on {} nodes x {} steps",
        fmt_f64(t),
        fmt_f64(sol.value_at(0.0)),
        grid.nx(),
        grid.nt()
    );
    Ok(())
}
