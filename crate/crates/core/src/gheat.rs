//! Explicit monotone finite differences for the G-heat equation
//! `u_t = G(u_xx)`, `u(0, x) = phi(x)`.
//!
//! Each step applies `u += dt * G(D2 u)` with the central second difference,
//! which picks `sigma_hi^2` where `D2 u >= 0` and `sigma_lo^2` otherwise. The
//! scheme is monotone under `sigma_hi^2 dt / dx^2 <= 1`. Boundary nodes use
//! a zero second derivative, so `u_t = G(0) = 0` there and they keep their
//! initial values.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gcore::VolBand;
use crate::io::fmt_f64;

const PAR_MIN_NODES: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    nx: usize,
    t_final: f64,
    nt: usize,
}

impl Grid1D {
    /// Builds the grid, raising `nt` until the CFL bound holds for `band`.
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_final: f64, nt: usize, band: &VolBand) -> Result<Self> {
        if !(x_min < x_max) || nx < 3 || !(t_final > 0.0) || nt == 0 {
            return Err(Error::InvalidParameter(format!(
                "bad grid: x in [{x_min}, {x_max}], nx = {nx}, t = {t_final}, nt = {nt}"
            )));
        }
        let mut g = Self {
            x_min,
            x_max,
            nx,
            t_final,
            nt,
        };
        let ratio = g.cfl_ratio(band);
        if ratio > 1.0 {
            g.nt = (nt as f64 * ratio).ceil() as usize;
            while g.cfl_ratio(band) > 1.0 {
                g.nt += 1;
            }
        }
        Ok(g)
    }

    /// Builds the grid as given, without the CFL adjustment.
    pub fn new_unchecked(x_min: f64, x_max: f64, nx: usize, t_final: f64, nt: usize) -> Self {
        Self {
            x_min,
            x_max,
            nx,
            t_final,
            nt,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn cfl_ratio(&self, band: &VolBand) -> f64 {
        band.hi() * band.hi() * self.dt() / (self.dx() * self.dx())
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, phi: F) -> Vec<f64> {
        (0..self.nx).map(|i| phi(self.x(i))).collect()
    }

    /// Index of the node nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round();
        i.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
}

/// Stored time levels of a solve. Level 0 and the final level are always kept.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution1D {
    pub grid: Grid1D,
    pub levels: Vec<Snapshot>,
}

impl Solution1D {
    pub fn final_level(&self) -> &Snapshot {
        self.levels.last().expect("solution has levels")
    }

    /// `u(t_final, x)` at the node nearest to `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.final_level().u[self.grid.nearest(x)]
    }

    /// `t,x,u` rows for every stored level.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,u")?;
        for lvl in &self.levels {
            for (i, u) in lvl.u.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt_f64(lvl.t), fmt_f64(self.grid.x(i)), fmt_f64(*u))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveOptions {
    /// Store every `save_every`-th level; `0` keeps only the first and last.
    pub save_every: usize,
    pub execution: Execution,
}


pub fn solve_gheat(phi: &[f64], band: &VolBand, grid: &Grid1D) -> Result<Solution1D> {
    solve_gheat_with(phi, band, grid, SolveOptions::default())
}

pub fn solve_gheat_with(phi: &[f64], band: &VolBand, grid: &Grid1D, opts: SolveOptions) -> Result<Solution1D> {
    let ratio = grid.cfl_ratio(band);
    if ratio > 1.0 {
        return Err(Error::Cfl { ratio });
    }
    if phi.len() != grid.nx {
        return Err(Error::InvalidParameter(format!(
            "phi has {} samples for {} nodes",
            phi.len(),
            grid.nx
        )));
    }
    if let Some(node) = phi.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSolution { node, step: 0 });
    }
    let nx = grid.nx;
    let dt = grid.dt();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let exec = if nx >= PAR_MIN_NODES {
        opts.execution
    } else {
        Execution::Sequential
    };
    let mut u = phi.to_vec();
    let mut next = u.clone();
    let mut levels = vec![Snapshot {
        step: 0,
        t: 0.0,
        u: u.clone(),
    }];
    for step in 1..=grid.nt {
        {
            let cur = &u;
            exec::fill_indexed(&mut next[1..nx - 1], exec, |j| {
                let i = j + 1;
                let d2 = (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]) * inv_dx2;
                cur[i] + dt * band.g(d2)
            });
        }
        next[0] = u[0];
        next[nx - 1] = u[nx - 1];
        std::mem::swap(&mut u, &mut next);
        if let Some(node) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSolution { node, step });
        }
        let keep = step == grid.nt || (opts.save_every > 0 && step % opts.save_every == 0);
        if keep {
            levels.push(Snapshot {
                step,
                t: if step == grid.nt { grid.t_final } else { step as f64 * dt },
                u: u.clone(),
            });
        }
    }
    Ok(Solution1D { grid: *grid, levels })
}

/// Sizing of the automatic grid: half-width and resolution in units of
/// `sigma_hi sqrt(t)`, plus the target CFL ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHints {
    pub half_width_sds: f64,
    pub nodes_per_sd: usize,
    pub cfl: f64,
}

impl Default for GridHints {
    fn default() -> Self {
        Self {
            half_width_sds: 8.0,
            nodes_per_sd: 100,
            cfl: 0.5,
        }
    }
}

impl GridHints {
    pub fn grid(&self, band: &VolBand, t: f64) -> Result<Grid1D> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("t must be > 0, got {t}")));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) || self.nodes_per_sd == 0 || !(self.half_width_sds > 0.0) {
            return Err(Error::InvalidParameter("bad grid hints".into()));
        }
        let sd = band.hi() * t.sqrt();
        let half = self.half_width_sds * sd;
        let cells = 2 * (self.half_width_sds * self.nodes_per_sd as f64).ceil() as usize;
        let dx = 2.0 * half / cells as f64;
        let nt = (band.hi() * band.hi() * t / (self.cfl * dx * dx)).ceil().max(1.0) as usize;
        Grid1D::new(-half, half, cells + 1, t, nt, band)
    }
}

/// `E^[phi(B_t)]` as `u(t, 0)`.
pub fn gexpectation_terminal<F: Fn(f64) -> f64>(phi: F, band: &VolBand, t: f64, hints: GridHints) -> Result<f64> {
    let grid = hints.grid(band, t)?;
    let sol = solve_gheat(&grid.sample(phi), band, &grid)?;
    Ok(sol.value_at(0.0))
}
