//! Experiment runners. Each writes its tables into `Outputs` as it goes, so a
//! failure part way keeps whatever was finished.

use std::fs::File;
use std::io::BufWriter;

use burgulence::dump::write_entropy;
use burgulence::ensemble::{path_seeds, run_sampled, window_times, Sampling};
use burgulence::inviscid::{
    entropy_solution, inviscid_statistics, kruzkov_alpha, kruzkov_exponent, resolved_modes, viscosity_sweep,
    EntropyApproximation, LadderPlan, Resolution,
};
use burgulence::mixing::{builtin_functionals, coupled_on_path, evaluate_family, functional_convergence, memory_loss_curve, CoupledRun, FunctionalTable};
use burgulence::solver::{dyadic_times, oleinik_audit, path_for, scaling_transform, solve, solve_on_path};
use burgulence::stats::{dissipation_scale, fit_power_law, geometric_grid, loglog_slope, third_moment_slope};
use burgulence::{inviscid, Config, EnsembleAccumulator, Field, Observables};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::report::{fit_row, fits_table, num, status, Outputs, Table};
use crate::RunError;

type Res = Result<(), RunError>;

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    match cfg.experiment.as_str() {
        "spectrum" => spectrum(cfg, out),
        "structure" => structure(cfg, out),
        "four-fifths" => four_fifths(cfg, out),
        "sobolev-scaling" => sobolev_scaling(cfg, out),
        "energy-balance" => energy_balance(cfg, out),
        "dissipation-scale" => dissipation(cfg, out),
        "kruzkov" => kruzkov(cfg, out),
        "entropy-stats" => entropy_stats(cfg, out),
        "mixing" => mixing(cfg, out),
        "oleinik" => oleinik(cfg, out),
        "scaling-symmetry" => scaling_symmetry(cfg, out),
        other => Err(RunError::Numerical(burgulence::Error::Config(format!("no runner for {other:?}")))),
    }
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    path_seeds(cfg.master_seed, cfg.ensemble_size)
}

fn ensemble(cfg: &ExperimentConfig, solver: &Config, obs: Observables) -> Result<EnsembleAccumulator, RunError> {
    let sampling = Sampling { window: cfg.bracket, max_dt: cfg.sample_dt, blocks: cfg.blocks };
    Ok(run_sampled(&Field::zeros(solver.n_modes), &cfg.forcing, &seeds(cfg), solver, sampling, &obs)?)
}

/// Modes for a sweep viscosity: the configured `N`, raised to a power of two
/// with `Nν >= 8`.
fn sweep_modes(nu: f64, n_modes: usize) -> usize {
    n_modes.max(((8.0 / nu).ceil() as usize).next_power_of_two())
}

/// Geometric grid of distinct integers in `[lo, hi]`.
fn integer_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut ks: Vec<f64> = geometric_grid(lo, hi, count).into_iter().map(|k| k.round().clamp(lo.ceil(), hi.floor())).collect();
    ks.dedup();
    ks
}

fn power_fit(points: &[(f64, f64)], range: (f64, f64)) -> Result<(f64, f64, (f64, f64)), burgulence::Error> {
    fit_power_law(points, Some(range)).map(|f| (f.exponent, f.stderr, f.range))
}

fn spectrum(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let (nu, n) = (cfg.solver.nu, cfg.solver.n_modes);
    let acc = ensemble(cfg, &cfg.solver, Observables::new(n, nu))?;
    let layer = cfg.fit.layer;
    let ks = integer_grid(1.0, n as f64 / layer, 48);
    let rows = acc.energy_spectrum(layer, &ks)?;
    let mut t = Table::new("spectrum.csv", &["k", "E_k", "stderr", "status"]);
    for r in &rows {
        t.row(vec![num(r.k), num(r.value.mean), num(r.value.stderr), status(&r.value).into()]);
    }
    out.write(&t)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.k, r.value.mean)).collect();
    let range = cfg.fit.spectrum.unwrap_or((10.0, (0.1 / nu).min(n as f64 / layer)));
    let mut fits = fits_table();
    fit_row(&mut fits, "spectrum", power_fit(&points, range));
    out.write(&fits)
}

fn structure_rows(acc: &EnsembleAccumulator, t: &mut Table) -> Res {
    for r in acc.structure_table()? {
        let signed = r.signed.map(|s| num(s.mean)).unwrap_or_else(|| num(f64::NAN));
        t.row(vec![num(r.p), num(r.l), num(r.value.mean), signed, num(r.value.stderr), status(&r.value).into()]);
    }
    Ok(())
}

fn structure_table() -> Table {
    Table::new("structure.csv", &["p", "l", "S", "S_signed", "stderr", "status"])
}

fn integer_orders(ps: &[f64]) -> Vec<u32> {
    ps.iter().filter(|p| p.fract() == 0.0 && **p >= 1.0).map(|p| *p as u32).collect()
}

fn structure(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let (nu, n) = (cfg.solver.nu, cfg.solver.n_modes);
    let ls = geometric_grid(1.0 / n as f64, 0.25, cfg.l_count);
    let obs = Observables::new(n, nu).with_structure(ls.clone(), cfg.ps.clone(), integer_orders(&cfg.ps));
    let acc = ensemble(cfg, &cfg.solver, obs)?;
    let mut t = structure_table();
    structure_rows(&acc, &mut t)?;
    out.write(&t)?;
    let mut fits = fits_table();
    let inertial = cfg.fit.structure.unwrap_or((5.0 * nu, 0.1));
    for &p in &cfg.ps {
        let points: Vec<(f64, f64)> = ls.iter().map(|&l| Ok((l, acc.structure_function(p, l)?.mean))).collect::<burgulence::Result<_>>()?;
        fit_row(&mut fits, &format!("structure-p{p}-inertial"), power_fit(&points, inertial));
        fit_row(&mut fits, &format!("structure-p{p}-dissipative"), power_fit(&points, (1.0 / n as f64, nu / 2.0)));
    }
    out.write(&fits)
}

fn four_fifths(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let (nu, n) = (cfg.solver.nu, cfg.solver.n_modes);
    let range = cfg.fit.four_fifths.unwrap_or((nu.sqrt(), 0.05));
    let mut ls = geometric_grid(1.0 / n as f64, 0.25, cfg.l_count);
    if range.1 > range.0 {
        ls.extend((0..9).map(|i| range.0 + (range.1 - range.0) * i as f64 / 8.0));
    }
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let obs = Observables::new(n, nu).with_structure(ls.clone(), vec![1.0, 2.0, 3.0], vec![1, 2, 3]);
    let acc = ensemble(cfg, &cfg.solver, obs)?;
    let mut t = structure_table();
    structure_rows(&acc, &mut t)?;
    out.write(&t)?;
    let eps = acc.dissipation_rate()?;
    let points: Vec<(f64, f64)> = ls.iter().map(|&l| Ok((l, acc.skew_structure_function(3, l)?.mean))).collect::<burgulence::Result<_>>()?;
    let mut fits = fits_table();
    let slope = third_moment_slope(&points, Some(range));
    fit_row(&mut fits, "third-moment", slope.clone().map(|(a, se)| (a, se, range)));
    fit_row(&mut fits, "third-moment/(-12 eps)", slope.map(|(a, se)| (a / (-12.0 * eps.mean), se / (12.0 * eps.mean), range)));
    fit_row(&mut fits, "dissipation-rate", Ok((eps.mean, eps.stderr, (f64::NAN, f64::NAN))));
    out.write(&fits)
}

fn sobolev_scaling(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let ms = [0.0, 1.0, 2.0];
    let mut t = Table::new("norms.csv", &["nu", "n_modes", "m", "value", "stderr", "status"]);
    let mut per_m: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ms.len()];
    for &nu in &cfg.sweep {
        let n = sweep_modes(nu, cfg.solver.n_modes);
        let solver = Config { nu, n_modes: n, ..cfg.solver.clone() };
        let acc = ensemble(cfg, &solver, Observables::new(n, nu).with_sobolev(ms.to_vec()))?;
        for (i, &m) in ms.iter().enumerate() {
            let e = acc.sobolev_moment(m)?;
            t.row(vec![num(nu), n.to_string(), num(m), num(e.mean), num(e.stderr), status(&e).into()]);
            per_m[i].push((1.0 / nu, e.mean));
        }
    }
    out.write(&t)?;
    let mut fits = fits_table();
    let range = per_m[0].iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    for (m, points) in ms.iter().zip(&per_m) {
        fit_row(&mut fits, &format!("sobolev-m{m}-vs-inverse-nu"), loglog_slope(points).map(|(e, se)| (e, se, range)));
    }
    out.write(&fits)
}

fn energy_balance(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let (nu, n) = (cfg.solver.nu, cfg.solver.n_modes);
    let acc = ensemble(cfg, &cfg.solver, Observables::new(n, nu))?;
    let eps = acc.dissipation_rate()?;
    let half_b0 = cfg.forcing.moment(0) / 2.0;
    let mut t = Table::new("balance.csv", &["nu", "dissipation_rate", "stderr", "half_b0", "relative_error", "status"]);
    t.row(vec![num(nu), num(eps.mean), num(eps.stderr), num(half_b0), num((eps.mean - half_b0) / half_b0), status(&eps).into()]);
    out.write(&t)
}

fn dissipation(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let mut t = Table::new("spectrum.csv", &["nu", "k", "E_k", "stderr", "status"]);
    let mut spectra = Vec::new();
    for &nu in &cfg.sweep {
        let n = sweep_modes(nu, cfg.solver.n_modes);
        let solver = Config { nu, n_modes: n, ..cfg.solver.clone() };
        let acc = ensemble(cfg, &solver, Observables::new(n, nu))?;
        let modes = acc.mode_spectrum()?;
        for r in &modes {
            t.row(vec![num(nu), num(r.k), num(r.value.mean), num(r.value.stderr), status(&r.value).into()]);
        }
        spectra.push((nu, modes.iter().map(|r| (r.k, r.value.mean)).collect::<Vec<_>>()));
    }
    out.write(&t)?;
    let mut fits = fits_table();
    let range = cfg.sweep.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), nu| (lo.min(1.0 / nu), hi.max(1.0 / nu)));
    let scale = dissipation_scale(&spectra, cfg.fit.breakpoint_threshold);
    fit_row(&mut fits, "dissipation-scale-gamma", scale.as_ref().map(|d| (d.gamma, d.stderr, range)).map_err(Clone::clone));
    if let Ok(d) = &scale {
        let band = 2.0 * cfg.forcing.max_mode() as f64;
        if d.breakpoints.iter().any(|(_, k)| *k <= band) {
            fits.flag_last(&format!("suspect: a breakpoint lies within k <= {band}, the forcing band"));
        }
        for (nu, k) in &d.breakpoints {
            fit_row(&mut fits, &format!("breakpoint-nu{nu}"), Ok((*k, f64::NAN, (*nu, *nu))));
        }
    }
    out.write(&fits)
}

/// Viscosities `ν₁ + ν₁ 2^j` from the largest gap down, then `ν₁`.
fn kruzkov_ladder(floor: f64, levels: usize) -> Vec<f64> {
    (0..levels).rev().map(|j| floor + floor * 2f64.powi(j as i32)).chain([floor]).collect()
}

fn kruzkov(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let nus = kruzkov_ladder(cfg.kruzkov_nu_floor, cfg.kruzkov_levels);
    let t = cfg.kruzkov_time;
    let n = cfg.solver.n_modes;
    let sweeps = seeds(cfg)
        .par_iter()
        .map(|&seed| viscosity_sweep(&Field::basis(n, -1), &cfg.forcing, seed, &nus, &cfg.solver, &[t], Resolution::Ladder, &cfg.kruzkov_ps))
        .collect::<burgulence::Result<Vec<_>>>()?;
    let mut table = Table::new("sweep.csv", &["seed", "nu_i", "nu_j", "p", "t", "distance"]);
    for s in &sweeps {
        for d in &s.distances {
            table.row(vec![s.trajectories[0].seed.to_string(), num(d.nu_i), num(d.nu_j), num(d.p), num(d.t), num(d.distance)]);
        }
    }
    out.write(&table)?;
    let mut fits = fits_table();
    let range = (nus[nus.len() - 2] - nus[nus.len() - 1], nus[0] - nus[nus.len() - 1]);
    for &p in &cfg.kruzkov_ps {
        let mut mean = vec![0.0; nus.len() - 1];
        for s in &sweeps {
            let rate = kruzkov_exponent(s, p, t)?;
            for (m, (_, d)) in mean.iter_mut().zip(&rate.points) {
                *m += d / sweeps.len() as f64;
            }
        }
        let gaps = nus[..nus.len() - 1].iter().map(|nu| nu - nus[nus.len() - 1]);
        let points: Vec<(f64, f64)> = gaps.zip(mean).collect();
        fit_row(&mut fits, &format!("kruzkov-p{p}"), loglog_slope(&points).map(|(e, se)| (e, se, range)));
        fit_row(&mut fits, &format!("kruzkov-p{p}-theory"), Ok((kruzkov_alpha(p), 0.0, range)));
    }
    out.write(&fits)
}

fn entropy_stats(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let times = window_times(cfg.bracket, cfg.sample_dt)?;
    let plan = LadderPlan { nu_start: cfg.entropy_nu_start, nu_floor: cfg.entropy_nu_floor, resolution: Resolution::Ladder };
    let n = cfg.solver.n_modes;
    let ensemble: Vec<EntropyApproximation<f64>> = seeds(cfg)
        .par_iter()
        .map(|&seed| entropy_solution(&Field::zeros(n), &cfg.forcing, seed, cfg.entropy_tol, &cfg.solver, &times, plan))
        .collect::<burgulence::Result<_>>()?;
    let mut ladder = Table::new("entropy.csv", &["seed", "nu_star", "n_modes", "certified_error", "dump"]);
    for (i, e) in ensemble.iter().enumerate() {
        let name = format!("entropy-{i:04}.bin");
        let path = out.path(&name);
        let file = File::create(&path).map_err(|err| RunError::Io(format!("{}: {err}", path.display())))?;
        write_entropy(BufWriter::new(file), e, cfg.forcing.moment(0))?;
        out.note(&name);
        ladder.row(vec![e.trajectory.seed.to_string(), num(e.nu_star), e.trajectory.config.n_modes.to_string(), num(e.max_error()), name]);
    }
    out.write(&ladder)?;
    let nu_max = ensemble.iter().map(|e| e.nu_star).fold(0.0, f64::max);
    let n_res = resolved_modes(nu_max);
    let ls = geometric_grid(1.0 / n_res as f64, 0.25, cfg.l_count);
    let obs = Observables::new(n_res, nu_max).with_structure(ls.clone(), cfg.ps.clone(), integer_orders(&cfg.ps));
    let acc = inviscid_statistics(&ensemble, obs, cfg.bracket)?;
    let mut t = structure_table();
    structure_rows(&acc, &mut t)?;
    out.write(&t)?;
    let modes = acc.mode_spectrum()?;
    let mut spec = Table::new("spectrum.csv", &["k", "E_k", "stderr", "status"]);
    for r in &modes {
        spec.row(vec![num(r.k), num(r.value.mean), num(r.value.stderr), status(&r.value).into()]);
    }
    out.write(&spec)?;
    let mut fits = fits_table();
    for &p in &cfg.ps {
        let points: Vec<(f64, f64)> = ls.iter().map(|&l| Ok((l, acc.structure_function(p, l)?.mean))).collect::<burgulence::Result<_>>()?;
        fit_row(&mut fits, &format!("structure-p{p}"), power_fit(&points, (1.0 / n_res as f64, 0.1)));
    }
    let points: Vec<(f64, f64)> = modes.iter().map(|r| (r.k, r.value.mean)).collect();
    fit_row(&mut fits, "spectrum", power_fit(&points, (4.0, n_res as f64 / 8.0)));
    out.write(&fits)
}

fn mixing(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let n = cfg.solver.n_modes;
    let u1 = Field::basis(n, 1).scaled(3.0);
    let u2 = &Field::basis(n, -1).scaled(-2.0) + &Field::basis(n, 3);
    let horizon = cfg.mixing_horizon;
    let count = ((horizon / cfg.mixing_sample_dt).ceil() as usize).next_power_of_two();
    let times = dyadic_times(horizon, count);
    let every = ((cfg.mixing_functional_dt / (horizon / count as f64)).round() as usize).max(1);
    let family = builtin_functionals();
    let coarse: Vec<f64> = times.iter().step_by(every).copied().collect();
    let per_seed = seeds(cfg)
        .par_iter()
        .map(|&seed| {
            let path = path_for(&cfg.forcing, seed, &times)?;
            let (mut dist, mut va, mut vb) = (Vec::new(), Vec::new(), Vec::new());
            let mut k = 0usize;
            coupled_on_path(&u1, &u2, &path, &cfg.solver, &times, |_, a, b| {
                dist.push(inviscid::lp_distance(a, b, 1.0)?);
                if k % every == 0 {
                    va.push(evaluate_family(&family, a));
                    vb.push(evaluate_family(&family, b));
                }
                k += 1;
                Ok(())
            })?;
            Ok((CoupledRun { u1_init: u1.clone(), u2_init: u2.clone(), seed, times: times.clone(), distances: dist }, va, vb))
        })
        .collect::<burgulence::Result<Vec<_>>>()?;
    let mut coupling = Table::new("coupling.csv", &["seed", "initial_distance", "final_distance", "max_expansion"]);
    let (mut ta, mut tb) = (FunctionalTable::new(&family, coarse.clone()), FunctionalTable::new(&family, coarse));
    let mut runs = Vec::with_capacity(per_seed.len());
    for (run, va, vb) in per_seed {
        let (d0, d1) = (run.distances[0], *run.distances.last().unwrap_or(&f64::NAN));
        coupling.row(vec![run.seed.to_string(), num(d0), num(d1), num(run.max_expansion())]);
        ta.push_run(run.seed, va)?;
        tb.push_run(run.seed, vb)?;
        runs.push(run);
    }
    out.write(&coupling)?;
    let curve = memory_loss_curve(&runs)?;
    let mut t = Table::new("mixing.csv", &["t", "mean_distance", "stderr"]);
    for k in (0..curve.times.len()).step_by(every) {
        t.row(vec![num(curve.times[k]), num(curve.mean[k]), num(curve.stderr[k])]);
    }
    out.write(&t)?;
    let mut g = Table::new("functional_gaps.csv", &["functional", "t", "gap", "stderr", "scale"]);
    for gap in functional_convergence(&ta, &tb)? {
        for k in 0..gap.times.len() {
            g.row(vec![gap.name.clone(), num(gap.times[k]), num(gap.gap[k]), num(gap.stderr[k]), num(gap.scale)]);
        }
    }
    out.write(&g)
}

fn oleinik(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let horizon = cfg.oleinik_horizon;
    let count = ((horizon / cfg.sample_dt.min(0.125)).ceil() as usize).next_power_of_two();
    let times = dyadic_times(horizon, count);
    let n = cfg.solver.n_modes;
    let audits = seeds(cfg)
        .par_iter()
        .map(|&seed| {
            let traj = solve(&Field::zeros(n), &cfg.forcing, seed, &cfg.solver, &times)?;
            Ok((seed, oleinik_audit(&traj, cfg.oleinik_theta)?))
        })
        .collect::<burgulence::Result<Vec<_>>>()?;
    let mut t = Table::new("oleinik.csv", &["seed", "t0", "t1", "max_positive_slope", "max_time_weighted_slope", "max_abs", "max_total_variation"]);
    for (seed, a) in audits {
        t.row(vec![
            seed.to_string(),
            num(a.window.0),
            num(a.window.1),
            num(a.max_positive_slope),
            num(a.max_time_weighted_slope),
            num(a.max_abs),
            num(a.max_total_variation),
        ]);
    }
    out.write(&t)
}

/// Without noise, `μ u(μτ)` from `μ u₀` at viscosity `νμ` against a direct run.
fn scaling_symmetry(cfg: &ExperimentConfig, out: &mut Outputs) -> Res {
    let n = cfg.solver.n_modes;
    let mu = cfg.scaling_mu;
    let quiet = cfg.solver.clone().with_noise(false);
    let u0 = &Field::basis(n, 1) + &Field::basis(n, -3).scaled(0.5);
    let count = ((cfg.scaling_horizon / 0.0625).ceil() as usize).next_power_of_two();
    let times = dyadic_times(cfg.scaling_horizon, count);
    let base = solve(&u0, &cfg.forcing, cfg.master_seed, &quiet, &times)?;
    let mapped = scaling_transform(&base, mu)?;
    let direct_path = path_for(&cfg.forcing, cfg.master_seed, &mapped.times)?;
    let direct = solve_on_path(&u0.scaled(mu), &direct_path, &mapped.config, &mapped.times)?;
    let mut t = Table::new("scaling.csv", &["tau", "relative_l2_error"]);
    for ((tau, a), b) in mapped.times.iter().zip(&mapped.states).zip(&direct.states) {
        let scale = b.l2_norm().max(f64::MIN_POSITIVE);
        t.row(vec![num(*tau), num((a - b).l2_norm() / scale)]);
    }
    out.write(&t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_descends_to_the_floor() {
        let nus = kruzkov_ladder(0.002, 4);
        for (a, b) in nus.iter().zip([0.018, 0.010, 0.006, 0.004, 0.002]) {
            assert!((a - b).abs() < 1e-15, "{nus:?}");
        }
    }

    #[test]
    fn sweep_modes_resolve() {
        assert_eq!(sweep_modes(0.05, 256), 256);
        assert_eq!(sweep_modes(0.002, 256), 4096);
    }

    #[test]
    fn integer_grid_is_distinct() {
        let ks = integer_grid(1.0, 128.0, 48);
        assert_eq!(ks[0], 1.0);
        assert_eq!(*ks.last().unwrap(), 128.0);
        assert!(ks.windows(2).all(|w| w[1] > w[0] && w[1].fract() == 0.0));
    }
}
