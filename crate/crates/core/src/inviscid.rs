//! Common-noise viscosity sweeps and the vanishing-viscosity limit.
//!
//! All runs of a sweep consume one [`NoisePath`] in shared-increment mode, so
//! differences between viscosities are pathwise.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::forcing::{ForcingSpec, NoisePath};
use crate::scalar::Scalar;
use crate::solver::{path_for, NoiseMode, Solver, SolverConfig, Trajectory};
use crate::spectral::{quadrature_grid, SpectralField};
use crate::stats::{loglog_slope, to_f64, EnsembleAccumulator, Observables, Probe};

/// Smallest cutoff used by the dyadic ladder.
pub const LADDER_MIN_MODES: usize = 256;

/// `N(ν) = max(256, ⌈4/ν⌉)` rounded up to a power of two.
pub fn ladder_modes(nu: f64) -> usize {
    ((4.0 / nu).ceil() as usize).max(LADDER_MIN_MODES).next_power_of_two()
}

/// Cutoff of each run in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resolution {
    /// `cfg.n_modes` for every viscosity.
    #[default]
    Fixed,
    /// [`ladder_modes`] per viscosity.
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub nu_i: f64,
    pub nu_j: f64,
    pub p: f64,
    pub t: f64,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult<T: Scalar> {
    /// Strictly decreasing.
    pub viscosities: Vec<f64>,
    pub trajectories: Vec<Trajectory<T>>,
    pub distances: Vec<DistanceRow>,
}

impl<T: Scalar> SweepResult<T> {
    /// `|u^{ν_i}(t) - u^{ν_j}(t)|_p` from the table.
    pub fn distance(&self, nu_i: f64, nu_j: f64, p: f64, t: f64) -> Option<f64> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        self.distances
            .iter()
            .find(|r| close(r.p, p) && (r.t - t).abs() <= 1e-9 && ((close(r.nu_i, nu_i) && close(r.nu_j, nu_j)) || (close(r.nu_i, nu_j) && close(r.nu_j, nu_i))))
            .map(|r| r.distance)
    }
}

/// `|u - v|_p` on a quadrature grid fine enough for both cutoffs.
pub fn lp_distance<T: Scalar>(u: &SpectralField<T>, v: &SpectralField<T>, p: f64) -> Result<f64> {
    let n = u.n_modes().max(v.n_modes());
    let d = &to_f64(&u.resized(n)) - &to_f64(&v.resized(n));
    d.lp_norm_on(p, quadrature_grid(n))
}

fn check_shared(cfg_mode: NoiseMode) -> Result<()> {
    if cfg_mode != NoiseMode::SharedIncrement {
        return Err(Error::Contract("pathwise comparisons need shared-increment noise".into()));
    }
    Ok(())
}

/// One trajectory per viscosity on the noise path of `seed`, with all pairwise
/// `L_p` distances for `ps` at every output time.
#[allow(clippy::too_many_arguments)]
pub fn viscosity_sweep<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seed: u64,
    nus: &[f64],
    cfg: &SolverConfig<T>,
    out_times: &[f64],
    resolution: Resolution,
    ps: &[f64],
) -> Result<SweepResult<T>> {
    let path = path_for(spec, seed, out_times)?;
    sweep_on_path(u0, &path, nus, cfg, out_times, resolution, ps)
}

pub fn sweep_on_path<T: Scalar>(
    u0: &SpectralField<T>,
    path: &NoisePath,
    nus: &[f64],
    cfg: &SolverConfig<T>,
    out_times: &[f64],
    resolution: Resolution,
    ps: &[f64],
) -> Result<SweepResult<T>> {
    check_shared(cfg.noise_mode)?;
    if nus.is_empty() || nus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("viscosities must be nonempty and strictly decreasing".into()));
    }
    let mut trajectories = Vec::with_capacity(nus.len());
    for &nu in nus {
        let n = match resolution {
            Resolution::Fixed => cfg.n_modes,
            Resolution::Ladder => ladder_modes(nu),
        };
        let run_cfg = SolverConfig { nu: T::of(nu), n_modes: n, ..cfg.clone() };
        trajectories.push(crate::solver::solve_on_path(&u0.resized(n), path, &run_cfg, out_times)?);
    }
    let mut distances = Vec::new();
    for i in 0..nus.len() {
        for j in i + 1..nus.len() {
            for &p in ps {
                for (k, &t) in trajectories[i].times.iter().enumerate() {
                    let distance = lp_distance(&trajectories[i].states[k], &trajectories[j].states[k], p)?;
                    distances.push(DistanceRow { nu_i: nus[i], nu_j: nus[j], p, t, distance });
                }
            }
        }
    }
    Ok(SweepResult { viscosities: nus.to_vec(), trajectories, distances })
}

/// Upper-bound exponent `α_p = min(1/4, 1/(3p))` of the pathwise rate.
pub fn kruzkov_alpha(p: f64) -> f64 {
    (1.0 / (3.0 * p)).min(0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KruzkovRate {
    pub alpha_emp: f64,
    pub alpha_theory: f64,
    pub stderr: f64,
    /// `(ν̄, distance)` with `ν̄ = ν₂ - ν₁`.
    pub points: Vec<(f64, f64)>,
}

/// Log-log slope of `|u^{ν₂} - u^{ν₁}|_p` against `ν̄ = ν₂ - ν₁`, with `ν₁` the
/// smallest viscosity of the sweep.
pub fn kruzkov_exponent<T: Scalar>(sweep: &SweepResult<T>, p: f64, t: f64) -> Result<KruzkovRate> {
    let nus = &sweep.viscosities;
    if nus.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: nus.len() });
    }
    let nu1 = *nus.last().unwrap();
    let points = nus[..nus.len() - 1]
        .iter()
        .map(|&nu2| {
            sweep
                .distance(nu2, nu1, p, t)
                .map(|d| (nu2 - nu1, d))
                .ok_or_else(|| Error::Config(format!("no distance recorded for p = {p}, t = {t}")))
        })
        .collect::<Result<Vec<_>>>()?;
    rate_from_points(points, p)
}

/// Log-log regression of consecutive-level distances `|u^{ν_j} - u^{ν_{j+1}}|_p` against `ν_j - ν_{j+1}`.
pub fn kruzkov_exponent_consecutive<T: Scalar>(sweep: &SweepResult<T>, p: f64, t: f64) -> Result<KruzkovRate> {
    let nus = &sweep.viscosities;
    if nus.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: nus.len() });
    }
    let points = nus
        .windows(2)
        .map(|w| sweep.distance(w[0], w[1], p, t).map(|d| (w[0] - w[1], d)).ok_or_else(|| Error::Config(format!("no distance for p = {p}, t = {t}"))))
        .collect::<Result<Vec<_>>>()?;
    rate_from_points(points, p)
}

fn rate_from_points(points: Vec<(f64, f64)>, p: f64) -> Result<KruzkovRate> {
    let fit = loglog_slope(&points)?;
    Ok(KruzkovRate { alpha_emp: fit.0, alpha_theory: kruzkov_alpha(p), stderr: fit.1, points })
}

/// Plan of the dyadic viscosity ladder used by [`entropy_solution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderPlan {
    pub nu_start: f64,
    /// Halving stops, with a resolution error, below this viscosity.
    pub nu_floor: f64,
    pub resolution: Resolution,
}

impl Default for LadderPlan {
    fn default() -> Self {
        Self { nu_start: 0.016, nu_floor: 2.5e-4, resolution: Resolution::Ladder }
    }
}

/// Viscous approximation of the entropy solution with a certified `L_1` error.
#[derive(Debug, Clone)]
pub struct EntropyApproximation<T: Scalar> {
    pub trajectory: Trajectory<T>,
    pub nu_star: f64,
    pub tol: f64,
    /// Geometric tail bound on `|u^{ν*}(t) - u⁰(t)|_1` per output time.
    pub certified_error: Vec<f64>,
    /// `(ν_j, max_t |u^{ν_j} - u^{ν_{j+1}}|_1)` along the ladder.
    pub ladder: Vec<(f64, f64)>,
}

impl<T: Scalar> EntropyApproximation<T> {
    pub fn max_error(&self) -> f64 {
        self.certified_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Tail bound `d_{j} r/(1-r)` from the last two ladder distances, infinite
/// unless they shrink.
fn tail_bound(prev: f64, last: f64) -> f64 {
    if last == 0.0 {
        return 0.0;
    }
    let r = last / prev;
    if r < 1.0 && r.is_finite() {
        last * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Halves `ν` from `plan.nu_start` under a shared noise path until the
/// geometric tail of successive `L_1` distances drops below `tol` at every
/// output time, and returns the last (finest) run.
pub fn entropy_solution<T: Scalar>(
    u0: &SpectralField<T>,
    spec: &ForcingSpec,
    seed: u64,
    tol: f64,
    cfg: &SolverConfig<T>,
    out_times: &[f64],
    plan: LadderPlan,
) -> Result<EntropyApproximation<T>> {
    let path = path_for(spec, seed, out_times)?;
    entropy_on_path(u0, &path, tol, cfg, out_times, plan)
}

pub fn entropy_on_path<T: Scalar>(
    u0: &SpectralField<T>,
    path: &NoisePath,
    tol: f64,
    cfg: &SolverConfig<T>,
    out_times: &[f64],
    plan: LadderPlan,
) -> Result<EntropyApproximation<T>> {
    check_shared(cfg.noise_mode)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if !(plan.nu_start > 0.0 && plan.nu_start <= 1.0 && plan.nu_floor > 0.0) {
        return Err(Error::Config("ladder viscosities must lie in (0, 1]".into()));
    }
    let run = |nu: f64| -> Result<Trajectory<T>> {
        let n = match plan.resolution {
            Resolution::Fixed => cfg.n_modes,
            Resolution::Ladder => ladder_modes(nu),
        };
        let run_cfg = SolverConfig { nu: T::of(nu), n_modes: n, ..cfg.clone() };
        let mut solver = Solver::new(run_cfg.clone())?;
        let mut tr = Trajectory { times: Vec::new(), states: Vec::new(), config: run_cfg, seed: path.seed() };
        solver.run(&u0.resized(n), path, out_times, |t, u| {
            tr.times.push(t);
            tr.states.push(u.clone());
            Ok(())
        })?;
        Ok(tr)
    };
    let mut nu = plan.nu_start;
    let mut prev = run(nu)?;
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    let mut ladder = Vec::new();
    loop {
        let next_nu = 0.5 * nu;
        if next_nu < plan.nu_floor * (1.0 - 1e-12) {
            return Err(Error::NotResolved(format!("ladder reached nu = {nu} without certifying tolerance {tol}")));
        }
        let next = run(next_nu)?;
        let gap = prev.states.iter().zip(&next.states).map(|(a, b)| lp_distance(a, b, 1.0)).collect::<Result<Vec<f64>>>()?;
        ladder.push((nu, gap.iter().copied().fold(0.0, f64::max)));
        gaps.push(gap);
        nu = next_nu;
        prev = next;
        if gaps.len() >= 2 {
            let (a, b) = (&gaps[gaps.len() - 2], &gaps[gaps.len() - 1]);
            let certified: Vec<f64> = a.iter().zip(b).map(|(p, l)| tail_bound(*p, *l)).collect();
            if certified.iter().all(|e| *e < tol) {
                return Ok(EntropyApproximation { trajectory: prev, nu_star: nu, tol, certified_error: certified, ladder });
            }
        }
    }
}

/// Zero-mean antiderivative `φ` with `φ_x = u`: `φ̂_s = û_s / (2πis)`.
///
/// The additive gauge is fixed by `∫φ = 0`.
pub fn potential_field<T: Scalar>(f: &SpectralField<T>) -> SpectralField<T> {
    SpectralField::from_coeffs(
        f.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| *c / Complex::new(T::zero(), T::TAU() * T::of((i + 1) as f64)))
            .collect(),
    )
}

/// Cutoff that the certified approximation at `nu_star` resolves: the largest
/// power of two not above `RESOLVED_FRACTION / ν*`.
pub fn resolved_modes(nu_star: f64) -> usize {
    let n = (RESOLVED_FRACTION / nu_star).floor().max(1.0) as usize;
    if n.is_power_of_two() {
        n
    } else {
        n.next_power_of_two() / 2
    }
}

/// Wavenumber fraction `k ν*` below which viscous smoothing of the entropy
/// approximation stays under the statistical noise.
pub const RESOLVED_FRACTION: f64 = 0.25;

/// Bracket statistics of an ensemble of entropy approximations, taken on the
/// cutoff they resolve.
pub fn inviscid_statistics<T: Scalar>(ensemble: &[EntropyApproximation<T>], obs: Observables, window: crate::stats::BracketWindow) -> Result<EnsembleAccumulator> {
    let first = ensemble.first().ok_or_else(|| Error::Mismatch("empty entropy ensemble".into()))?;
    let nu_max = ensemble.iter().map(|e| e.nu_star).fold(0.0, f64::max);
    let resolved = resolved_modes(nu_max);
    if obs.n_modes > resolved {
        return Err(Error::NotResolved(format!("cutoff {} exceeds the {resolved} modes resolved at nu* = {nu_max}", obs.n_modes)));
    }
    if let Some(l) = obs.ls.iter().find(|l| **l < 1.0 / resolved as f64 - 1e-15) {
        return Err(Error::NotResolved(format!("increment {l} below the resolved scale 1/{resolved}")));
    }
    if ensemble.iter().any(|e| e.tol != first.tol) {
        return Err(Error::Mismatch("entropy approximations certified at different tolerances".into()));
    }
    let n_obs = obs.n_modes;
    let mut probe = Probe::new(obs.clone())?;
    let mut acc = EnsembleAccumulator::new(obs, window);
    for (path, e) in ensemble.iter().enumerate() {
        for (t, u) in e.trajectory.times.iter().zip(&e.trajectory.states) {
            acc.observe(&mut probe, path as u64, *t, &u.resized(n_obs))?;
        }
    }
    Ok(acc)
}

/// Entropy solution of the unforced equation by the Lax–Oleinik formula,
/// `u(t, x) = (x - y*)/t` with `y*` minimizing `(x - y)²/(2t) + U₀(y)`.
///
/// `potential` is a zero-mean antiderivative of `u₀` (periodic); `u_max`
/// bounds `|u₀|`.
pub fn lax_oleinik(potential: impl Fn(f64) -> f64, u_max: f64, t: f64, x: f64) -> f64 {
    let reach = u_max * t + 1e-9;
    let cost = |y: f64| (x - y).powi(2) / (2.0 * t) + potential(y);
    let n = 4000;
    let mut best = (f64::INFINITY, x);
    for j in 0..=n {
        let y = x - reach + 2.0 * reach * j as f64 / n as f64;
        let c = cost(y);
        if c < best.0 {
            best = (c, y);
        }
    }
    // golden-section refinement around the grid minimizer
    let h = 2.0 * reach / n as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (x - 0.5 * (a + b)) / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dyadic_times;
    use std::f64::consts::PI;

    type F = SpectralField<f64>;

    #[test]
    fn ladder_resolution() {
        assert_eq!(ladder_modes(0.1), 256);
        assert_eq!(ladder_modes(0.01), 512);
        assert_eq!(ladder_modes(0.001), 4096);
        assert_eq!(resolved_modes(0.001), 128);
        assert_eq!(resolved_modes(0.0021), 64);
    }

    #[test]
    fn kruzkov_theory_exponents() {
        assert_eq!(kruzkov_alpha(1.0), 0.25);
        assert!((kruzkov_alpha(4.0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_contracts() {
        let cfg = SolverConfig::new(0.1, 16).with_fixed_step(1.0 / 256.0);
        let u0 = F::basis(16, 1);
        let bad = cfg.clone().with_noise_mode(NoiseMode::ExactOu);
        assert!(matches!(
            viscosity_sweep(&u0, &ForcingSpec::default(), 1, &[0.1, 0.05], &bad, &[0.5], Resolution::Fixed, &[1.0]),
            Err(Error::Contract(_))
        ));
        assert!(viscosity_sweep(&u0, &ForcingSpec::default(), 1, &[0.05, 0.1], &cfg, &[0.5], Resolution::Fixed, &[1.0]).is_err());
        // equal viscosities on a shared path give identical states
        let path = path_for(&ForcingSpec::default(), 1, &[0.5]).unwrap();
        let a = crate::solver::solve_on_path(&u0, &path, &cfg, &[0.5]).unwrap();
        let b = crate::solver::solve_on_path(&u0, &path, &cfg, &[0.5]).unwrap();
        assert_eq!(lp_distance(&a.states[0], &b.states[0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn distances_grow_with_viscosity_gap() {
        let cfg = SolverConfig::new(0.1, 128).with_fixed_step(1.0 / 4096.0);
        let nus = [0.04, 0.02, 0.01, 0.005];
        let sweep = viscosity_sweep(&F::basis(128, -1), &ForcingSpec::default(), 3, &nus, &cfg, &[0.5], Resolution::Fixed, &[1.0, 4.0]).unwrap();
        let nu1 = 0.005;
        let d: Vec<f64> = nus[..3].iter().map(|n| sweep.distance(*n, nu1, 1.0, 0.5).unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        let rate = kruzkov_exponent(&sweep, 1.0, 0.5).unwrap();
        assert!(rate.alpha_emp >= rate.alpha_theory - 0.05, "{rate:?}");
    }

    #[test]
    fn linear_rate_matches_closed_form() {
        // Heat flow: û_s(t) = e^{-ν(2πs)²t} û_s(0), so L_2 distances are explicit.
        let n = 16;
        let t = 0.25;
        let u0 = F::from_real_coeffs(n, |s| 1.0 / (s.abs() as f64));
        let cfg = SolverConfig::new(0.1, n).with_nonlinearity(false).with_noise(false).with_fixed_step(1.0 / 1024.0);
        let nus = [0.016, 0.008, 0.004, 0.002, 0.001];
        let sweep = viscosity_sweep(&u0, &ForcingSpec::default(), 0, &nus, &cfg, &[t], Resolution::Fixed, &[2.0]).unwrap();
        let exact = |a: f64, b: f64| -> f64 {
            (1..=n)
                .map(|s| {
                    let lam = (2.0 * PI * s as f64).powi(2) * t;
                    2.0 * u0.coeffs()[s - 1].norm_sqr() * ((-a * lam).exp() - (-b * lam).exp()).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        let nu1 = 0.001;
        let closed: Vec<(f64, f64)> = nus[..4].iter().map(|&nu2| (nu2 - nu1, exact(nu2, nu1))).collect();
        let rate = kruzkov_exponent(&sweep, 2.0, t).unwrap();
        let closed_rate = loglog_slope(&closed).unwrap().0;
        assert!((rate.alpha_emp - closed_rate).abs() < 0.02, "{} vs {closed_rate}", rate.alpha_emp);
        for ((_, d), (_, e)) in rate.points.iter().zip(&closed) {
            assert!((d - e).abs() < 1e-3 * e);
        }
    }

    #[test]
    fn potential_inverts_derivative() {
        let u = F::basis(8, 1);
        let phi = potential_field(&u);
        assert!((phi.l2_norm() - u.l2_norm() / (2.0 * PI)).abs() < 1e-15);
        let back = phi.derivative();
        assert!((&back - &u).l2_norm() < 1e-15);
        let v = F::from_real_coeffs(8, |s| (s as f64).sin());
        assert!((&potential_field(&v.derivative()) - &v).l2_norm() < 1e-14);
    }

    #[test]
    fn potential_is_lipschitz_with_sup_norm() {
        let cfg = SolverConfig::new(0.01, 256).with_noise(false);
        let tr = crate::solver::solve(&F::basis(256, -1), &ForcingSpec::default(), 0, &cfg, &[0.25]).unwrap();
        let u = &tr.states[0];
        let phi = potential_field(u);
        let grid = quadrature_grid(256);
        let samples = phi.to_physical(grid).unwrap();
        let dx = 1.0 / grid as f64;
        let lip = samples.samples().windows(2).map(|w| (w[1] - w[0]).abs() / dx).fold(0.0, f64::max);
        let sup = u.lp_norm(f64::INFINITY);
        assert!(lip <= sup * (1.0 + 1e-3), "{lip} vs {sup}");
    }

    fn sine_potential(y: f64) -> f64 {
        // ∫ √2 sin(2πs) ds, zero mean
        -2f64.sqrt() * (2.0 * PI * y).cos() / (2.0 * PI)
    }

    fn l1_to_oracle(u: &F, t: f64) -> f64 {
        let m = 512;
        let samples = u.to_physical(quadrature_grid(u.n_modes())).unwrap();
        let stride = samples.n_grid() / m;
        (0..m).map(|j| (samples.samples()[j * stride] - lax_oleinik(sine_potential, 2f64.sqrt(), t, j as f64 / m as f64)).abs()).sum::<f64>() / m as f64
    }

    #[test]
    fn entropy_limit_before_shock() {
        let t = 0.05;
        let cfg = SolverConfig::new(0.1, 256).with_noise(false);
        let u0 = F::basis(256, -1);
        let plan = LadderPlan { nu_start: 0.004, nu_floor: 1e-4, resolution: Resolution::Ladder };
        let e = entropy_solution(&u0, &ForcingSpec::default(), 0, 1e-3, &cfg, &[t], plan).unwrap();
        assert!(e.max_error() < 1e-3);
        let err = l1_to_oracle(e.trajectory.states.last().unwrap(), t);
        assert!(err < 1e-3, "L1 error {err} at nu* = {}", e.nu_star);
    }

    #[test]
    fn entropy_limit_after_shock() {
        let t = 0.3;
        let cfg = SolverConfig::new(0.1, 256).with_noise(false);
        let u0 = F::basis(256, -1);
        let plan = LadderPlan { nu_start: 0.008, nu_floor: 2.5e-4, resolution: Resolution::Ladder };
        let e = entropy_solution(&u0, &ForcingSpec::default(), 0, 1e-2, &cfg, &dyadic_times(t, 4)[1..], plan).unwrap();
        let u = e.trajectory.states.last().unwrap();
        let err = l1_to_oracle(u, t);
        assert!(err < 1e-2, "L1 error {err} at nu* = {}", e.nu_star);
        // single shock at x = 1/2: the largest negative jump sits there
        let grid = quadrature_grid(u.n_modes());
        let samples = u.to_physical(grid).unwrap();
        let (j, _) = samples.samples().windows(2).enumerate().map(|(j, w)| (j, w[1] - w[0])).fold((0, 0.0), |m, (j, d)| if d < m.1 { (j, d) } else { m });
        assert!(((j as f64 + 0.5) / grid as f64 - 0.5).abs() < 0.01);
        assert!(u.lp_norm(f64::INFINITY).is_finite());
    }

    #[test]
    fn lax_oleinik_matches_characteristics_before_shock() {
        let t = 0.05;
        for x in [0.1, 0.37, 0.62, 0.9] {
            let u = lax_oleinik(sine_potential, 2f64.sqrt(), t, x);
            // characteristic foot ξ = x - u t must carry u
            let xi = x - u * t;
            assert!((u - 2f64.sqrt() * (2.0 * PI * xi).sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn ladder_stops_at_floor() {
        let cfg = SolverConfig::new(0.1, 256).with_noise(false);
        let plan = LadderPlan { nu_start: 0.01, nu_floor: 0.004, resolution: Resolution::Ladder };
        let r = entropy_solution(&F::basis(256, -1), &ForcingSpec::default(), 0, 1e-12, &cfg, &[0.25], plan);
        assert!(matches!(r, Err(Error::NotResolved(_))));
    }
}
