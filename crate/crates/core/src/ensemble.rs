//! Independent-path ensembles reduced into bracket accumulators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forcing::{ForcingSpec, NoisePath};
use crate::scalar::Scalar;
use crate::solver::{default_base_level, Solver, SolverConfig};
use crate::spectral::SpectralField;
use crate::stats::{BracketWindow, EnsembleAccumulator, Observables, Probe, DEFAULT_BLOCKS};

/// splitmix64 finalizer, a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `i`; injective in `i` for a fixed master seed.
pub fn path_seed(master: u64, i: u64) -> u64 {
    mix(master ^ mix(i))
}

pub fn path_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| path_seed(master, i)).collect()
}

/// Output times for a bracket run: `t_end · j / 2^m` from the last grid
/// point at or before `T` through `t_end`, with the step at most `max_dt`.
pub fn window_times(window: BracketWindow, max_dt: f64) -> Result<Vec<f64>> {
    if !(max_dt > 0.0) {
        return Err(Error::Config(format!("sample step must be positive, got {max_dt}")));
    }
    let t_end = window.t_end();
    let mut count = 1usize;
    while t_end / count as f64 > max_dt * (1.0 + 1e-12) {
        count *= 2;
    }
    let dt = t_end / count as f64;
    let first = ((window.t_start / dt) + 1e-9).floor() as usize;
    Ok((first..=count).map(|j| dt * j as f64).collect())
}

/// Noise path of a bracket run over `[0, T + σ]`.
pub fn window_path(spec: &ForcingSpec, seed: u64, window: BracketWindow) -> Result<NoisePath> {
    let t_end = window.t_end();
    NoisePath::sample(spec, seed, t_end, default_base_level(t_end))
}

/// Failure of one path, tagged with its index.
fn tag(path: usize, e: Error) -> Error {
    Error::InPath { path: path as u64, source: Box::new(e) }
}

/// Sampling of a bracket run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub window: BracketWindow,
    /// Largest spacing of the dyadic sample times.
    pub max_dt: f64,
    /// Time blocks per path in the accumulator.
    pub blocks: u32,
}

impl Sampling {
    pub fn new(window: BracketWindow, max_dt: f64) -> Self {
        Self { window, max_dt, blocks: DEFAULT_BLOCKS }
    }
}

/// One path of a bracket run; the accumulator keys it by `index`.
pub fn run_path<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seed: u64,
    index: u64,
    cfg: &SolverConfig<T>,
    sampling: Sampling,
    obs: &Observables,
) -> Result<EnsembleAccumulator> {
    let Sampling { window, max_dt, blocks } = sampling;
    let times = window_times(window, max_dt)?;
    let path = window_path(spec, seed, window)?;
    let mut probe = Probe::new(obs.clone())?;
    let mut acc = EnsembleAccumulator::with_blocks(obs.clone(), window, blocks);
    let mut solver = Solver::new(cfg.clone())?;
    solver.run(u0, &path, &times, |t, u| acc.observe(&mut probe, index, t, u))?;
    Ok(acc)
}

/// Runs every seed in parallel and folds the accumulators in seed order.
///
/// Uses [`DEFAULT_BLOCKS`] blocks per path; see [`run_sampled`].
pub fn run_ensemble<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seeds: &[u64],
    cfg: &SolverConfig<T>,
    window: BracketWindow,
    max_dt: f64,
    obs: &Observables,
) -> Result<EnsembleAccumulator> {
    run_sampled(u0, spec, seeds, cfg, Sampling::new(window, max_dt), obs)
}

pub fn run_sampled<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seeds: &[u64],
    cfg: &SolverConfig<T>,
    sampling: Sampling,
    obs: &Observables,
) -> Result<EnsembleAccumulator> {
    obs.validate()?;
    if obs.n_modes != cfg.n_modes {
        return Err(Error::Mismatch(format!("observables use {} modes, solver {}", obs.n_modes, cfg.n_modes)));
    }
    let parts: Vec<Result<EnsembleAccumulator>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_path(u0, spec, s, i as u64, cfg, sampling, obs).map_err(|e| tag(i, e)))
        .collect();
    let mut acc = EnsembleAccumulator::with_blocks(obs.clone(), sampling.window, sampling.blocks);
    for part in parts {
        acc = acc.merge(part?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seeds_are_distinct() {
        let seeds: HashSet<u64> = path_seeds(42, 1 << 16).into_iter().collect();
        assert_eq!(seeds.len(), 1 << 16);
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
    }

    #[test]
    fn times_cover_window_on_dyadic_grid() {
        let w = BracketWindow::new(10.0, 10.0).unwrap();
        let t = window_times(w, 0.1).unwrap();
        assert_eq!(t[0], 10.0);
        assert_eq!(*t.last().unwrap(), 20.0);
        let dt = t[1] - t[0];
        assert!(dt <= 0.1 && (20.0 / dt).fract() == 0.0);
        let w = BracketWindow::new(4.0, 8.0).unwrap();
        let t = window_times(w, 0.125).unwrap();
        let dt = 12.0 / 128.0;
        assert!(t[0] <= 4.0 && 4.0 - t[0] < dt);
        assert_eq!(*t.last().unwrap(), 12.0);
    }

    #[test]
    fn ensemble_is_order_independent_and_reproducible() {
        let cfg = SolverConfig::new(0.1, 32);
        let w = BracketWindow::new(1.0, 1.0).unwrap();
        let obs = Observables::new(32, 0.1);
        let u0 = SpectralField::zeros(32);
        let seeds = path_seeds(7, 3);
        let a = run_ensemble(&u0, &ForcingSpec::default(), &seeds, &cfg, w, 0.125, &obs).unwrap();
        let b = run_ensemble(&u0, &ForcingSpec::default(), &seeds, &cfg, w, 0.125, &obs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.paths(), 3);
        assert!(a.dissipation_rate().unwrap().mean > 0.0);
        let bad = Observables::new(16, 0.1);
        assert!(run_ensemble(&u0, &ForcingSpec::default(), &seeds, &cfg, w, 0.125, &bad).is_err());
    }
}
