//! Time integration of the Galerkin system with an exact viscous factor.
//!
//! One step of size `h` maps every mode `s` with `λ_s = ν(2πs)²` to
//!
//! ```text
//! û_s ← e^{-λ_s h} (û_s - h Π(u u_x)_s + ΔW_s)            shared increments
//! û_s ← e^{-λ_s h} (û_s - h Π(u u_x)_s) + G_s             exact OU
//! ```
//!
//! where `ΔW_s` is the forcing increment over the step and `G_s` a fresh
//! Gaussian with the stochastic-convolution variance `b_s²(1 - e^{-2λh})/(2λ)`.
//! Steps are dyadic fractions of the horizon so they line up with the cells of
//! the [`NoisePath`].

use std::collections::HashMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::forcing::{cell_width, grid_index, ForcingSpec, NoiseCursor, NoisePath};
use crate::scalar::Scalar;
use crate::spectral::{Dealias, NonlinearWorkspace, SpectralField};

/// `|u|_∞` above which a run is aborted as a discretization failure.
pub const BLOW_UP_THRESHOLD: f64 = 1e3;

/// Width of the base noise cells created by [`solve`].
pub const BASE_CELL: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// Forcing increments read from the noise path; identical across `ν`,
    /// refinement-consistent across step sizes.
    #[default]
    SharedIncrement,
    /// Exact variance of the linear stochastic convolution over each step.
    ExactOu,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::SharedIncrement => "shared-increment",
            NoiseMode::ExactOu => "exact-ou",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shared-increment" => Some(NoiseMode::SharedIncrement),
            "exact-ou" => Some(NoiseMode::ExactOu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// Constant step, rounded down to `horizon · 2^{-L}`.
    Fixed(f64),
    /// `h <= c_adv / (N |u|_∞)`, rounded down to the dyadic grid and clamped
    /// to `[min_step, max_step]` (both rounded to the grid as well).
    Adaptive { c_adv: f64, min_step: f64, max_step: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Adaptive { c_adv: 0.5, min_step: 1e-7, max_step: 1.0 / 64.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T: Scalar> {
    pub nu: T,
    pub n_modes: usize,
    pub dt: DtPolicy,
    pub noise_mode: NoiseMode,
    pub dealias: Dealias,
    pub nonlinearity_on: bool,
    pub noise_on: bool,
}

impl<T: Scalar> SolverConfig<T> {
    /// Adaptive steps, shared increments, 2/3 dealiasing, full dynamics.
    pub fn new(nu: T, n_modes: usize) -> Self {
        Self {
            nu,
            n_modes,
            dt: DtPolicy::default(),
            noise_mode: NoiseMode::default(),
            dealias: Dealias::default(),
            nonlinearity_on: true,
            noise_on: true,
        }
    }

    pub fn with_dt(mut self, dt: DtPolicy) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_fixed_step(self, h: f64) -> Self {
        self.with_dt(DtPolicy::Fixed(h))
    }

    pub fn with_noise_mode(mut self, mode: NoiseMode) -> Self {
        self.noise_mode = mode;
        self
    }

    pub fn with_dealias(mut self, dealias: Dealias) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_nonlinearity(mut self, on: bool) -> Self {
        self.nonlinearity_on = on;
        self
    }

    pub fn with_noise(mut self, on: bool) -> Self {
        self.noise_on = on;
        self
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.nu.to_f64_lossy();
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Config(format!("viscosity must lie in (0, 1], got {nu}")));
        }
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        match self.dt {
            DtPolicy::Fixed(h) if !(h > 0.0 && h.is_finite()) => Err(Error::Config(format!("step must be positive, got {h}"))),
            DtPolicy::Adaptive { c_adv, min_step, max_step } if !(c_adv > 0.0 && min_step > 0.0 && max_step >= min_step) => {
                Err(Error::Config(format!("bad adaptive rule c_adv={c_adv}, min_step={min_step}, max_step={max_step}")))
            }
            _ => Ok(()),
        }
    }
}

/// Sampled solution curve `t ↦ u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField<T>>,
    pub config: SolverConfig<T>,
    pub seed: u64,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at sample time `t` (matched to 1e-9).
    pub fn at(&self, t: f64) -> Option<&SpectralField<T>> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0)).map(|i| &self.states[i])
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Outcome of [`Solver::run`].
#[derive(Debug, Clone)]
pub struct RunSummary<T: Scalar> {
    pub final_states: Vec<SpectralField<T>>,
    pub steps: u64,
    pub max_abs: T,
}

impl<T: Scalar> RunSummary<T> {
    pub fn final_state(&self) -> &SpectralField<T> {
        &self.final_states[0]
    }
}

struct ForcedMode<T> {
    k: usize,
    cos: Option<(usize, T)>,
    sin: Option<(usize, T)>,
}

struct StepFactors<T> {
    h: T,
    decay: Vec<T>,
    ou_sd: Vec<T>,
}

/// Base level giving cells of at most [`BASE_CELL`] over `horizon`.
pub fn default_base_level(horizon: f64) -> u32 {
    let mut level = 0;
    while cell_width(horizon, level) > BASE_CELL * (1.0 + 1e-12) {
        level += 1;
    }
    level
}

/// Smallest level whose cells are no wider than `h`.
fn level_for(horizon: f64, h: f64) -> u32 {
    let mut level = 0;
    while cell_width(horizon, level) > h * (1.0 + 1e-12) {
        level += 1;
    }
    level
}

/// Integrator state: workspaces, cached step factors, optional noise log.
pub struct Solver<T: Scalar> {
    cfg: SolverConfig<T>,
    nl: NonlinearWorkspace<T>,
    nl_out: Vec<Complex<T>>,
    factors: HashMap<u32, StepFactors<T>>,
    noise_log: Option<Vec<(f64, i64, f64)>>,
}

impl<T: Scalar> Solver<T> {
    pub fn new(cfg: SolverConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let nl = NonlinearWorkspace::new(cfg.n_modes, cfg.dealias);
        Ok(Self { nl_out: vec![Complex::default(); cfg.n_modes], nl, factors: HashMap::new(), noise_log: None, cfg })
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.cfg
    }

    /// Records every forcing increment consumed as `(t, s, Δβ_s)`.
    pub fn record_noise(&mut self, on: bool) {
        self.noise_log = on.then(Vec::new);
    }

    pub fn noise_log(&self) -> Option<&[(f64, i64, f64)]> {
        self.noise_log.as_deref()
    }

    fn forced_modes(&self, path: &NoisePath) -> Vec<ForcedMode<T>> {
        let mut out: Vec<ForcedMode<T>> = Vec::new();
        for (i, &s) in path.modes().iter().enumerate() {
            let k = s.unsigned_abs() as usize;
            if k > self.cfg.n_modes {
                continue;
            }
            let b = T::of(path.amplitude(i));
            let pos = match out.iter().position(|f| f.k == k) {
                Some(p) => p,
                None => {
                    out.push(ForcedMode { k, cos: None, sin: None });
                    out.len() - 1
                }
            };
            if s > 0 {
                out[pos].cos = Some((i, b));
            } else {
                out[pos].sin = Some((i, b));
            }
        }
        out
    }

    fn factors(&mut self, horizon: f64, level: u32) -> &StepFactors<T> {
        let (nu, n) = (self.cfg.nu, self.cfg.n_modes);
        self.factors.entry(level).or_insert_with(|| {
            let h = T::of(cell_width(horizon, level));
            let tau = T::TAU();
            let mut decay = Vec::with_capacity(n);
            let mut ou_sd = Vec::with_capacity(n);
            for s in 1..=n {
                let lambda = nu * (tau * T::of(s as f64)).powi(2);
                decay.push((-lambda * h).exp());
                // (1 - e^{-2λh}) / (2λ), written with exp_m1 for small λh
                let var = if lambda > T::zero() { -(-(lambda + lambda) * h).exp_m1() / (lambda + lambda) } else { h };
                ou_sd.push(var.sqrt());
            }
            StepFactors { h, decay, ou_sd }
        })
    }

    /// Advances `state` over one dyadic cell `[cell·w, (cell+1)·w)` at `level`.
    ///
    /// Returns `max |u|` on the collocation grid before the step (zero when
    /// the nonlinearity is off).
    fn advance(
        &mut self,
        state: &mut SpectralField<T>,
        cursor: &mut NoiseCursor<'_>,
        forced: &[ForcedMode<T>],
        level: u32,
        cell: u64,
        umax_known: Option<T>,
    ) -> Result<T> {
        let horizon = cursor.path().horizon();
        let t = cell as f64 * cell_width(horizon, level);
        let umax = if self.cfg.nonlinearity_on {
            match umax_known {
                Some(u) => u,
                None => self.nl.apply(state.coeffs(), &mut self.nl_out),
            }
        } else {
            T::zero()
        };
        if !(umax.to_f64_lossy() <= BLOW_UP_THRESHOLD) {
            return Err(Error::BlowUp { t, reason: format!("|u|_inf = {umax}") });
        }
        let (nl_on, noise_on, mode) = (self.cfg.nonlinearity_on, self.cfg.noise_on, self.cfg.noise_mode);
        // Noise first: the cursor borrows the path, factors borrow self.
        let mut kicks: Vec<(usize, Complex<T>)> = Vec::with_capacity(forced.len());
        if noise_on {
            let r = T::FRAC_1_SQRT_2();
            let mut draw = |side: Option<(usize, T)>, s: i64, sd: T, log: &mut Option<Vec<(f64, i64, f64)>>| -> T {
                let Some((i, b)) = side else { return T::zero() };
                match mode {
                    NoiseMode::SharedIncrement => {
                        let db = cursor.cell(i, level, cell);
                        if let Some(log) = log.as_mut() {
                            log.push((t, s, db));
                        }
                        b * T::of(db)
                    }
                    NoiseMode::ExactOu => b * sd * T::of(cursor.fresh_normal(i, level, cell)),
                }
            };
            let ou_sd: Vec<T> = if mode == NoiseMode::ExactOu {
                let f = self.factors(horizon, level);
                forced.iter().map(|m| f.ou_sd[m.k - 1]).collect()
            } else {
                vec![T::zero(); forced.len()]
            };
            for (m, sd) in forced.iter().zip(ou_sd) {
                let c = draw(m.cos, m.k as i64, sd, &mut self.noise_log);
                let s = draw(m.sin, -(m.k as i64), sd, &mut self.noise_log);
                kicks.push((m.k, Complex::new(c * r, -s * r)));
            }
        }
        let nl_out = std::mem::take(&mut self.nl_out);
        let f = self.factors(horizon, level);
        let h = f.h;
        for (i, u) in state.coeffs_mut().iter_mut().enumerate() {
            let mut v = *u;
            if nl_on {
                v = v - nl_out[i] * h;
            }
            *u = v * f.decay[i];
        }
        if noise_on {
            for (k, kick) in kicks {
                let u = &mut state.coeffs_mut()[k - 1];
                *u = match mode {
                    NoiseMode::SharedIncrement => *u + kick * f.decay[k - 1],
                    NoiseMode::ExactOu => *u + kick,
                };
            }
        }
        self.nl_out = nl_out;
        if !state.is_finite() {
            return Err(Error::BlowUp { t: t + h.to_f64_lossy(), reason: "non-finite coefficient".into() });
        }
        Ok(umax)
    }

    /// Integrates from `u0` at `t = 0` through `out_times`, calling `observe` at each.
    ///
    /// Every output time must lie on the step grid of the path.
    pub fn run(
        &mut self,
        u0: &SpectralField<T>,
        path: &NoisePath,
        out_times: &[f64],
        mut observe: impl FnMut(f64, &SpectralField<T>) -> Result<()>,
    ) -> Result<RunSummary<T>> {
        self.run_lockstep(std::slice::from_ref(u0), path, out_times, |t, us| observe(t, &us[0]))
    }

    /// Advances several states on one path with a common step sequence.
    ///
    /// Adaptive steps use the largest `|u|_∞` over the states.
    pub fn run_lockstep(
        &mut self,
        u0s: &[SpectralField<T>],
        path: &NoisePath,
        out_times: &[f64],
        mut observe: impl FnMut(f64, &[SpectralField<T>]) -> Result<()>,
    ) -> Result<RunSummary<T>> {
        if let Some(u) = u0s.iter().find(|u| u.n_modes() != self.cfg.n_modes) {
            return Err(Error::Mismatch(format!("initial state has {} modes, solver {}", u.n_modes(), self.cfg.n_modes)));
        }
        if out_times.windows(2).any(|w| w[1] <= w[0]) || out_times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::Config("output times must be increasing and nonnegative".into()));
        }
        let horizon = path.horizon();
        if out_times.last().is_some_and(|t| *t > horizon * (1.0 + 1e-12)) {
            return Err(Error::Config(format!("output time beyond the noise horizon {horizon}")));
        }
        // Fine level: all step boundaries and output times live on it.
        let (fine, coarse) = match self.cfg.dt {
            DtPolicy::Fixed(h) => {
                let l = level_for(horizon, h);
                (l, l)
            }
            DtPolicy::Adaptive { min_step, max_step, .. } => (level_for(horizon, min_step), level_for(horizon, max_step)),
        };
        let w = cell_width(horizon, fine);
        let out_cells = out_times
            .iter()
            .map(|&t| grid_index(t, w).ok_or(Error::Alignment { t0: 0.0, t1: t, cell: w }))
            .collect::<Result<Vec<u64>>>()?;

        let forced = self.forced_modes(path);
        let mut cursor = path.cursor();
        let mut states = u0s.to_vec();
        let mut buffers = vec![vec![Complex::default(); self.cfg.n_modes]; states.len()];
        let mut umaxes = vec![T::zero(); states.len()];
        let mut tc: u64 = 0;
        let mut steps = 0u64;
        let mut max_abs = T::zero();
        let n = T::of(self.cfg.n_modes as f64);
        for &target in &out_cells {
            while tc < target {
                let j = match self.cfg.dt {
                    DtPolicy::Fixed(_) => 0u32,
                    DtPolicy::Adaptive { c_adv, .. } => {
                        let mut umax = T::zero();
                        if self.cfg.nonlinearity_on {
                            for ((u, buf), m) in states.iter().zip(&mut buffers).zip(&mut umaxes) {
                                *m = self.nl.apply(u.coeffs(), buf);
                                umax = umax.max(*m);
                            }
                        }
                        let bound = if umax > T::zero() { c_adv / (n * umax).to_f64_lossy() } else { f64::INFINITY };
                        let mut j = 0u32;
                        while j < fine - coarse {
                            let span = 1u64 << (j + 1);
                            if tc % span != 0 || tc + span > target || span as f64 * w > bound {
                                break;
                            }
                            j += 1;
                        }
                        j
                    }
                };
                let level = fine - j;
                let known = matches!(self.cfg.dt, DtPolicy::Adaptive { .. });
                for ((u, buf), m) in states.iter_mut().zip(&mut buffers).zip(&umaxes) {
                    std::mem::swap(&mut self.nl_out, buf);
                    let r = self.advance(u, &mut cursor, &forced, level, tc >> j, known.then_some(*m));
                    std::mem::swap(&mut self.nl_out, buf);
                    max_abs = max_abs.max(r?);
                }
                tc += 1u64 << j;
                steps += 1;
            }
            observe(tc as f64 * w, &states)?;
        }
        Ok(RunSummary { final_states: states, steps, max_abs })
    }
}

/// One step of size `h` from time `t`; `h` and `t` must sit on the path's dyadic grid.
pub fn step<T: Scalar>(state: &SpectralField<T>, t: f64, h: f64, path: &NoisePath, cfg: &SolverConfig<T>) -> Result<SpectralField<T>> {
    let horizon = path.horizon();
    let level = level_for(horizon, h);
    let w = cell_width(horizon, level);
    if (w - h).abs() > 1e-12 * h {
        return Err(Error::Alignment { t0: t, t1: t + h, cell: w });
    }
    let cell = grid_index(t, w).ok_or(Error::Alignment { t0: t, t1: t + h, cell: w })?;
    let mut solver = Solver::new(cfg.clone().with_fixed_step(h))?;
    let forced = solver.forced_modes(path);
    let mut cursor = path.cursor();
    let mut next = state.clone();
    solver.advance(&mut next, &mut cursor, &forced, level, cell, None)?;
    Ok(next)
}

/// Solves with a fresh noise path for `seed` spanning `[0, last output time]`.
pub fn solve<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seed: u64,
    cfg: &SolverConfig<T>,
    out_times: &[f64],
) -> Result<Trajectory<T>> {
    let path = path_for(spec, seed, out_times)?;
    solve_on_path(u0, &path, cfg, out_times)
}

/// The noise path [`solve`] uses for `seed` and `out_times`.
pub fn path_for(spec: &ForcingSpec, seed: u64, out_times: &[f64]) -> Result<NoisePath> {
    let horizon = out_times.last().copied().filter(|t| *t > 0.0).ok_or_else(|| Error::Config("need a positive final output time".into()))?;
    NoisePath::sample(spec, seed, horizon, default_base_level(horizon))
}

pub fn solve_on_path<T: Scalar>(u0: &SpectralField<T>, path: &NoisePath, cfg: &SolverConfig<T>, out_times: &[f64]) -> Result<Trajectory<T>> {
    let mut solver = Solver::new(cfg.clone())?;
    let mut times = Vec::with_capacity(out_times.len());
    let mut states = Vec::with_capacity(out_times.len());
    solver.run(u0, path, out_times, |t, u| {
        times.push(t);
        states.push(u.clone());
        Ok(())
    })?;
    Ok(Trajectory { times, states, config: cfg.clone(), seed: path.seed() })
}

/// `count + 1` equispaced times `horizon · j / count`, `count` a power of two.
pub fn dyadic_times(horizon: f64, count: usize) -> Vec<f64> {
    assert!(count.is_power_of_two(), "sample count must be a power of two");
    (0..=count).map(|j| horizon * j as f64 / count as f64).collect()
}

/// Ensemble residual of the energy balance `d E½‖u‖² = (-ν E‖u‖₁² + ½B₀) dt`
/// between consecutive sample times (trapezoidal rule in time).
pub fn energy_balance_residual<T: Scalar>(ensemble: &[Trajectory<T>], spec: &ForcingSpec) -> Result<Vec<f64>> {
    let first = ensemble.first().ok_or_else(|| Error::Mismatch("empty ensemble".into()))?;
    for tr in ensemble {
        if tr.times != first.times || tr.config != first.config {
            return Err(Error::Mismatch("ensemble trajectories must share times and configuration".into()));
        }
    }
    let nu = first.config.nu.to_f64_lossy();
    let count = ensemble.len() as f64;
    let mean = |f: &dyn Fn(&SpectralField<T>) -> f64, j: usize| ensemble.iter().map(|tr| f(&tr.states[j])).sum::<f64>() / count;
    let energy = |u: &SpectralField<T>| 0.5 * u.sobolev_norm_sq(T::zero()).to_f64_lossy();
    let dissipation = |u: &SpectralField<T>| nu * u.sobolev_norm_sq(T::one()).to_f64_lossy();
    let input = if first.config.noise_on { 0.5 * spec.moment(0) } else { 0.0 };
    Ok((0..first.len().saturating_sub(1))
        .map(|j| {
            let dt = first.times[j + 1] - first.times[j];
            mean(&energy, j + 1) - mean(&energy, j) + 0.5 * dt * (mean(&dissipation, j) + mean(&dissipation, j + 1)) - input * dt
        })
        .collect())
}

/// Running suprema of the one-sided slope, amplitude and total variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OleinikAudit {
    pub window: (f64, f64),
    pub samples: usize,
    /// `sup |u_x⁺|_∞`.
    pub max_positive_slope: f64,
    /// `sup |u|_∞`.
    pub max_abs: f64,
    /// `sup |u_x|_1`.
    pub max_total_variation: f64,
    /// `sup_t t · max_x u_x`; at most 1 for unforced solutions.
    pub max_time_weighted_slope: f64,
}

/// Suprema over samples in `[theta, theta + 1]`.
pub fn oleinik_audit<T: Scalar>(traj: &Trajectory<T>, theta: f64) -> Result<OleinikAudit> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Config(format!("theta must lie in (0, 1], got {theta}")));
    }
    if traj.horizon() < theta + 1.0 - 1e-12 {
        return Err(Error::Config(format!("trajectory ends at {} < theta + 1", traj.horizon())));
    }
    oleinik_audit_window(traj, theta, theta + 1.0)
}

/// Suprema over samples in `[t0, t1]`.
pub fn oleinik_audit_window<T: Scalar>(traj: &Trajectory<T>, t0: f64, t1: f64) -> Result<OleinikAudit> {
    let mut audit = OleinikAudit {
        window: (t0, t1),
        samples: 0,
        max_positive_slope: 0.0,
        max_abs: 0.0,
        max_total_variation: 0.0,
        max_time_weighted_slope: 0.0,
    };
    for (t, u) in traj.times.iter().zip(&traj.states) {
        if *t < t0 - 1e-12 || *t > t1 + 1e-12 {
            continue;
        }
        let slope = u.max_positive_slope().to_f64_lossy();
        audit.samples += 1;
        audit.max_positive_slope = audit.max_positive_slope.max(slope);
        audit.max_abs = audit.max_abs.max(u.lp_norm(T::infinity()).to_f64_lossy());
        audit.max_total_variation = audit.max_total_variation.max(u.total_variation().to_f64_lossy());
        audit.max_time_weighted_slope = audit.max_time_weighted_slope.max(t * slope);
    }
    if audit.samples == 0 {
        return Err(Error::WindowNotCovered { t_start: t0, t_end: t1 });
    }
    Ok(audit)
}

/// `w(τ) = μ u(μτ)`, tagged with viscosity `νμ`.
pub fn scaling_transform<T: Scalar>(traj: &Trajectory<T>, mu: f64) -> Result<Trajectory<T>> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!("scaling factor must be positive, got {mu}")));
    }
    let m = T::of(mu);
    let mut config = traj.config.clone();
    config.nu = config.nu * m;
    config.dt = match config.dt {
        DtPolicy::Fixed(h) => DtPolicy::Fixed(h / mu),
        DtPolicy::Adaptive { c_adv, min_step, max_step } => DtPolicy::Adaptive { c_adv, min_step: min_step / mu, max_step: max_step / mu },
    };
    Ok(Trajectory {
        times: traj.times.iter().map(|t| t / mu).collect(),
        states: traj.states.iter().map(|u| u.scaled(m)).collect(),
        config,
        seed: traj.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type F = SpectralField<f64>;

    fn quiet(nu: f64, n: usize) -> SolverConfig<f64> {
        SolverConfig::new(nu, n).with_noise(false)
    }

    #[test]
    fn heat_step_is_exact() {
        let cfg = quiet(0.3, 8).with_nonlinearity(false);
        let path = NoisePath::sample(&ForcingSpec::default(), 1, 1.0, 0).unwrap();
        let h = 1.0 / 64.0;
        let next = step(&F::basis(8, 1), 0.0, h, &path, &cfg).unwrap();
        let expected = (-0.3 * (2.0 * PI).powi(2) * h).exp() / 2f64.sqrt();
        assert!((next.coeffs()[0].re - expected).abs() <= 1e-15);
        assert!(next.coeffs()[1..].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn misaligned_step_is_rejected() {
        let cfg = quiet(0.3, 8);
        let path = NoisePath::sample(&ForcingSpec::default(), 1, 1.0, 0).unwrap();
        assert!(matches!(step(&F::basis(8, 1), 0.0, 0.1, &path, &cfg), Err(Error::Alignment { .. })));
        assert!(matches!(step(&F::basis(8, 1), 0.3, 0.25, &path, &cfg), Err(Error::Alignment { .. })));
    }

    #[test]
    fn zero_state_without_forcing_stays_zero() {
        let cfg = quiet(0.1, 16).with_fixed_step(1.0 / 256.0);
        let tr = solve(&F::zeros(16), &ForcingSpec::default(), 3, &cfg, &dyadic_times(1.0, 8)).unwrap();
        assert!(tr.states.iter().all(|u| u.l2_norm() == 0.0));
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        let cfg = quiet(0.01, 16).with_fixed_step(0.25);
        let u0 = F::basis(16, 1).scaled(2000.0);
        match solve(&u0, &ForcingSpec::default(), 0, &cfg, &[1.0]) {
            Err(Error::BlowUp { t, .. }) => assert_eq!(t, 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(Solver::new(SolverConfig::new(0.0, 8)).is_err());
        assert!(Solver::new(SolverConfig::new(1.5, 8)).is_err());
        assert!(Solver::new(SolverConfig::new(0.5, 8).with_fixed_step(-1.0)).is_err());
    }

    #[test]
    fn deterministic_energy_identity() {
        // d/dt ½‖u‖² = -ν‖u‖₁² without forcing
        let cfg = quiet(0.1, 32).with_fixed_step(1.0 / (1 << 14) as f64);
        let u0 = F::basis(32, -1);
        let times = dyadic_times(0.25, 1 << 12);
        let tr = solve(&u0, &ForcingSpec::default(), 0, &cfg, &times).unwrap();
        let res = energy_balance_residual(std::slice::from_ref(&tr), &ForcingSpec::default()).unwrap();
        for (j, r) in res.iter().enumerate() {
            let e = tr.states[j].inner(&tr.states[j]);
            assert!(r.abs() < 1e-6 * e, "step {j}: residual {r} vs energy {e}");
        }
        // monotone decay of ½‖u‖²
        for w in tr.states.windows(2) {
            assert!(w[1].inner(&w[1]) <= w[0].inner(&w[0]) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn unforced_oleinik_bound() {
        let cfg = quiet(0.02, 128).with_fixed_step(1.0 / (1 << 13) as f64);
        let tr = solve(&F::basis(128, -1).scaled(1.5), &ForcingSpec::default(), 0, &cfg, &dyadic_times(2.0, 64)).unwrap();
        let audit = oleinik_audit_window(&tr, 1.0 / 32.0, 2.0).unwrap();
        assert!(audit.max_time_weighted_slope <= 1.0 + 1e-3, "{audit:?}");
        assert!(audit.max_total_variation <= 2.0 * audit.max_positive_slope * (1.0 + 1e-3) + 1e-9);
        assert!(audit.max_abs <= audit.max_positive_slope * (1.0 + 1e-3) + 1e-9);
    }

    #[test]
    fn fine_step_self_convergence() {
        let u0 = F::basis(32, -1);
        let coarse = quiet(0.1, 32).with_fixed_step(0.1 / (1 << 14) as f64);
        let fine = quiet(0.1, 32).with_fixed_step(0.1 / (1 << 18) as f64);
        let a = solve(&u0, &ForcingSpec::default(), 0, &coarse, &[0.1]).unwrap();
        let b = solve(&u0, &ForcingSpec::default(), 0, &fine, &[0.1]).unwrap();
        let err = (&a.states[0] - &b.states[0]).l2_norm() / b.states[0].l2_norm();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn scaling_symmetry_without_noise() {
        let mu = 2.0;
        let (nu, n) = (0.05, 64);
        let h = 1.0 / (1 << 12) as f64;
        let u0 = &F::basis(n, 1) + &F::basis(n, -3).scaled(0.5);
        let a = solve(&u0, &ForcingSpec::default(), 0, &quiet(nu, n).with_fixed_step(h), &dyadic_times(1.0, 16)).unwrap();
        let w = scaling_transform(&a, mu).unwrap();
        let b = solve(&u0.scaled(mu), &ForcingSpec::default(), 0, &quiet(nu * mu, n).with_fixed_step(h / mu), &dyadic_times(0.5, 16)).unwrap();
        assert_eq!(w.config.nu, nu * mu);
        for ((ta, ua), (tb, ub)) in w.times.iter().zip(&w.states).zip(b.times.iter().zip(&b.states)) {
            assert!((ta - tb).abs() < 1e-12);
            assert!((ua - ub).l2_norm() <= 1e-6 * ub.l2_norm().max(1e-300));
        }
        let same = scaling_transform(&a, 1.0).unwrap();
        assert_eq!(same.states, a.states);
        for (u, v) in a.states.iter().zip(&w.states) {
            assert!((v.inner(v) - mu * mu * u.inner(u)).abs() <= 1e-12 * v.inner(v));
        }
    }

    #[test]
    fn reproducible_and_shared_across_viscosity() {
        let spec = ForcingSpec::default();
        let times = dyadic_times(0.5, 8);
        let cfg = SolverConfig::new(0.05, 64).with_fixed_step(1.0 / 2048.0);
        let a = solve(&F::zeros(64), &spec, 42, &cfg, &times).unwrap();
        let b = solve(&F::zeros(64), &spec, 42, &cfg, &times).unwrap();
        assert_eq!(a, b);

        let path = path_for(&spec, 42, &times).unwrap();
        let mut logs = Vec::new();
        for nu in [0.05, 0.2] {
            let mut s = Solver::new(cfg.clone().with_nu(nu)).unwrap();
            s.record_noise(true);
            s.run(&F::zeros(64), &path, &times, |_, _| Ok(())).unwrap();
            logs.push(s.noise_log().unwrap().to_vec());
        }
        assert!(!logs[0].is_empty());
        assert_eq!(logs[0], logs[1]);
    }

    #[test]
    fn adaptive_steps_respect_output_times() {
        let spec = ForcingSpec::default();
        let times = dyadic_times(1.0, 16);
        let cfg = SolverConfig::new(0.05, 64);
        let tr = solve(&F::zeros(64), &spec, 7, &cfg, &times).unwrap();
        assert_eq!(tr.times.len(), times.len());
        for (a, b) in tr.times.iter().zip(&times) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(tr.states.iter().all(|u| u.is_finite()));
    }

    #[test]
    fn ou_stationary_variance() {
        // Linear dynamics, exact-OU noise: Var u_s → b_s² / (2λ_s).
        let nu = 0.05;
        let n = 4;
        let spec = ForcingSpec::default();
        let cfg = SolverConfig::new(nu, n).with_nonlinearity(false).with_noise_mode(NoiseMode::ExactOu).with_fixed_step(1.0 / 16.0);
        let times: Vec<f64> = (0..=256).map(|j| 4.0 * j as f64).collect();
        let mut samples: HashMap<i64, Vec<f64>> = HashMap::new();
        for seed in 0..8u64 {
            let path = NoisePath::sample(&spec, seed, 1024.0, 10).unwrap();
            let mut solver = Solver::new(cfg.clone()).unwrap();
            solver
                .run(&F::zeros(n), &path, &times, |t, u| {
                    if t >= 16.0 {
                        for s in [1i64, -1, 2, -2] {
                            samples.entry(s).or_default().push(u.real_coeff(s));
                        }
                    }
                    Ok(())
                })
                .unwrap();
        }
        for (s, xs) in samples {
            let lambda = nu * (2.0 * PI * s.abs() as f64).powi(2);
            let target = 1.0 / (2.0 * lambda);
            let m = xs.len() as f64;
            let var = xs.iter().map(|x| x * x).sum::<f64>() / m;
            let se = target * (2.0 / m).sqrt();
            assert!((var - target).abs() < 3.0 * se, "mode {s}: {var} vs {target}");
        }
    }
}
