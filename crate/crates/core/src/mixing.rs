//! Pathwise `L_1` contraction, loss of memory, and convergence of laws.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forcing::{ForcingSpec, NoisePath};
use crate::inviscid::lp_distance;
use crate::scalar::Scalar;
use crate::solver::{path_for, NoiseMode, Solver, SolverConfig};
use crate::spectral::{grid_lp, GridEvaluator, SpectralField};
use crate::stats::to_f64;

/// Two solutions driven by one noise path and their `L_1` distance over time.
#[derive(Debug, Clone)]
pub struct CoupledRun<T: Scalar> {
    pub u1_init: SpectralField<T>,
    pub u2_init: SpectralField<T>,
    pub seed: u64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

impl<T: Scalar> CoupledRun<T> {
    /// Largest relative growth `(d_{k+1} - d_k) / (1 + d_k)` between outputs.
    pub fn max_expansion(&self) -> f64 {
        self.distances.windows(2).map(|w| (w[1] - w[0]) / (1.0 + w[0])).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs `u1` and `u2` in lockstep on `path`, calling `observe(t, u1, u2)` at each output time.
pub fn coupled_on_path<T: Scalar>(
    u1: &SpectralField<T>,
    u2: &SpectralField<T>,
    path: &NoisePath,
    cfg: &SolverConfig<T>,
    out_times: &[f64],
    mut observe: impl FnMut(f64, &SpectralField<T>, &SpectralField<T>) -> Result<()>,
) -> Result<()> {
    if cfg.noise_mode != NoiseMode::SharedIncrement {
        return Err(Error::Contract("coupled runs need shared-increment noise".into()));
    }
    let mut solver = Solver::new(cfg.clone())?;
    solver.run_lockstep(&[u1.clone(), u2.clone()], path, out_times, |t, us| observe(t, &us[0], &us[1]))?;
    Ok(())
}

pub fn coupled_run<T: Scalar>(
    u1: &SpectralField<T>,
    u2: &SpectralField<T>,
    spec: &ForcingSpec,
    seed: u64,
    cfg: &SolverConfig<T>,
    out_times: &[f64],
) -> Result<CoupledRun<T>> {
    let path = path_for(spec, seed, out_times)?;
    let mut times = Vec::with_capacity(out_times.len());
    let mut distances = Vec::with_capacity(out_times.len());
    coupled_on_path(u1, u2, &path, cfg, out_times, |t, a, b| {
        times.push(t);
        distances.push(lp_distance(a, b, 1.0)?);
        Ok(())
    })?;
    Ok(CoupledRun { u1_init: u1.clone(), u2_init: u2.clone(), seed, times, distances })
}

/// [`coupled_run`] for every seed, in parallel.
pub fn coupled_ensemble<T: Scalar>(
    u1: &SpectralField<T>,
    u2: &SpectralField<T>,
    spec: &ForcingSpec,
    seeds: &[u64],
    cfg: &SolverConfig<T>,
    out_times: &[f64],
) -> Result<Vec<CoupledRun<T>>> {
    seeds.par_iter().map(|&s| coupled_run(u1, u2, spec, s, cfg, out_times)).collect()
}

pub const MIN_COUPLED_RUNS: usize = 16;

/// Ensemble mean of `|u¹(t) - u²(t)|_1` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MemoryCurve {
    /// Largest rise `mean_{k+1} - mean_k` in units of the combined standard error.
    pub fn max_rise_in_stderr(&self) -> f64 {
        (1..self.mean.len())
            .map(|k| {
                let rise = self.mean[k] - self.mean[k - 1];
                let se = self.stderr[k].hypot(self.stderr[k - 1]);
                if rise <= 0.0 {
                    0.0
                } else if se > 0.0 {
                    rise / se
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_monotone_within(&self, k: f64) -> bool {
        self.max_rise_in_stderr() <= k
    }
}

pub fn memory_loss_curve<T: Scalar>(runs: &[CoupledRun<T>]) -> Result<MemoryCurve> {
    if runs.len() < MIN_COUPLED_RUNS {
        return Err(Error::TooFewPoints { needed: MIN_COUPLED_RUNS, got: runs.len() });
    }
    let times = runs[0].times.clone();
    if runs.iter().any(|r| r.times != times) {
        return Err(Error::Mismatch("coupled runs must share output times".into()));
    }
    let n = runs.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let m = runs.iter().map(|r| r.distances[k]).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r.distances[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean.push(m);
        stderr.push((var / n).sqrt());
    }
    Ok(MemoryCurve { times, mean, stderr })
}

/// A field together with its samples on the quadrature grid.
pub struct FieldView<'a> {
    pub field: &'a SpectralField<f64>,
    pub samples: &'a [f64],
}

impl FieldView<'_> {
    pub fn l1(&self) -> f64 {
        grid_lp(self.samples, 1.0)
    }
}

type Eval = Arc<dyn Fn(&FieldView<'_>) -> f64 + Send + Sync>;

/// Real functional on fields with declared `L_1`-Lipschitz constant and sup bound.
#[derive(Clone)]
pub struct Functional {
    name: String,
    lipschitz: f64,
    bound: f64,
    eval: Eval,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional").field("name", &self.name).field("lipschitz", &self.lipschitz).field("bound", &self.bound).finish()
    }
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

impl Functional {
    pub fn new(name: impl Into<String>, lipschitz: f64, bound: f64, eval: impl Fn(&FieldView<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), lipschitz, bound, eval: Arc::new(eval) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Lipschitz constant and sup bound both at most one.
    pub fn is_normalized(&self) -> bool {
        self.lipschitz <= 1.0 && self.bound <= 1.0
    }

    pub fn eval_view(&self, view: &FieldView<'_>) -> f64 {
        (self.eval)(view)
    }

    pub fn eval<T: Scalar>(&self, u: &SpectralField<T>) -> f64 {
        let u = to_f64(u);
        let mut ev = GridEvaluator::for_quadrature(u.n_modes());
        let samples = ev.eval(&u).to_vec();
        self.eval_view(&FieldView { field: &u, samples: &samples })
    }

    /// `min(|u - v₀|_1, 1)`.
    pub fn distance_to(v0: &SpectralField<f64>) -> Self {
        let v0 = v0.clone();
        Self::new("distance-to-reference", 1.0, 1.0, move |v| {
            let n = v.field.n_modes().max(v0.n_modes());
            let d = &v.field.resized(n) - &v0.resized(n);
            let mut ev = GridEvaluator::for_quadrature(n);
            grid_lp(ev.eval(&d), 1.0).min(1.0)
        })
    }
}

/// The built-in family: sixteen functionals with `L_1`-Lipschitz constant and
/// sup bound at most one.
pub fn builtin_functionals() -> Vec<Functional> {
    let mut out = vec![
        Functional::new("clipped-l1", 1.0, 1.0, |v| v.l1().min(1.0)),
        Functional::new("clipped-positive-part", 1.0, 1.0, |v| (v.samples.iter().map(|x| x.max(0.0)).sum::<f64>() / v.samples.len() as f64).min(1.0)),
        Functional::new("clipped-negative-part", 1.0, 1.0, |v| (v.samples.iter().map(|x| (-x).max(0.0)).sum::<f64>() / v.samples.len() as f64).min(1.0)),
        Functional::new("truncated-amplitude", 1.0, 0.5, |v| v.samples.iter().map(|x| x.abs().min(0.5)).sum::<f64>() / v.samples.len() as f64),
    ];
    for l in [0.05, 0.1, 0.25] {
        out.push(Functional::new(format!("half-increment-l1-{l}"), 1.0, 1.0, move |v| {
            let d = v.field.shift_increment(l);
            let mut ev = GridEvaluator::for_quadrature(d.n_modes());
            (0.5 * grid_lp(ev.eval(&d), 1.0)).min(1.0)
        }));
    }
    for s in [1usize, 2] {
        out.push(Functional::new(format!("mode-modulus-{s}"), 1.0, 1.0, move |v| v.field.coeffs().get(s - 1).map_or(0.0, |c| c.norm()).min(1.0)));
    }
    for s in [1usize, 2, 3] {
        out.push(Functional::new(format!("cos-moment-{s}"), 1.0, 1.0, move |v| clip(v.field.coeffs().get(s - 1).map_or(0.0, |c| c.re), -1.0, 1.0)));
        out.push(Functional::new(format!("sin-moment-{s}"), 1.0, 1.0, move |v| clip(v.field.coeffs().get(s - 1).map_or(0.0, |c| -c.im), -1.0, 1.0)));
    }
    out.push(Functional::new("square-wave-moment", 1.0, 1.0, |v| {
        let n = v.samples.len();
        let s: f64 = v.samples.iter().enumerate().map(|(j, x)| match (2 * j).cmp(&n) {
                _ if j == 0 => 0.0,
                std::cmp::Ordering::Less => *x,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => -*x,
            }).sum();
        clip(s / n as f64, -1.0, 1.0)
    }));
    out
}

/// Functional values of one ensemble: `values[run][time][functional]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTable {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub seeds: Vec<u64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Evaluates `family` on every state of one run.
pub fn evaluate_family<T: Scalar>(family: &[Functional], u: &SpectralField<T>) -> Vec<f64> {
    let u = to_f64(u);
    let mut ev = GridEvaluator::for_quadrature(u.n_modes());
    let samples = ev.eval(&u).to_vec();
    let view = FieldView { field: &u, samples: &samples };
    family.iter().map(|f| f.eval_view(&view)).collect()
}

impl FunctionalTable {
    pub fn new(family: &[Functional], times: Vec<f64>) -> Self {
        Self { names: family.iter().map(|f| f.name().to_string()).collect(), times, seeds: Vec::new(), values: Vec::new() }
    }

    pub fn push_run(&mut self, seed: u64, values: Vec<Vec<f64>>) -> Result<()> {
        if values.len() != self.times.len() || values.iter().any(|v| v.len() != self.names.len()) {
            return Err(Error::Mismatch("run does not match the table layout".into()));
        }
        self.seeds.push(seed);
        self.values.push(values);
        Ok(())
    }

    fn column(&self, k: usize, f: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |r| r[k][f])
    }
}

/// Per-functional gap `|E f(u(t; u₀¹)) - E f(u(t; u₀²))|` over time.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalGap {
    pub name: String,
    pub times: Vec<f64>,
    pub gap: Vec<f64>,
    pub stderr: Vec<f64>,
    /// RMS of the pooled samples over the second half of the time range.
    pub scale: f64,
}

impl FunctionalGap {
    pub fn final_relative_gap(&self) -> f64 {
        self.gap.last().copied().unwrap_or(f64::NAN) / self.scale
    }
}

fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = if n > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
    (m, v, n)
}

/// Gaps between two ensembles. Runs with equal seed lists are treated as
/// coupled pairs and get paired standard errors.
pub fn functional_convergence(a: &FunctionalTable, b: &FunctionalTable) -> Result<Vec<FunctionalGap>> {
    if a.names != b.names || a.times != b.times {
        return Err(Error::Mismatch("ensembles must share functionals and times".into()));
    }
    if a.values.is_empty() || b.values.is_empty() {
        return Err(Error::Mismatch("empty ensemble".into()));
    }
    let paired = a.seeds == b.seeds;
    let half = a.times.last().copied().unwrap_or(0.0) * 0.5;
    let late: Vec<usize> = (0..a.times.len()).filter(|&k| a.times[k] >= half).collect();
    let mut out = Vec::with_capacity(a.names.len());
    for (f, name) in a.names.iter().enumerate() {
        let mut gap = Vec::with_capacity(a.times.len());
        let mut stderr = Vec::with_capacity(a.times.len());
        for k in 0..a.times.len() {
            if paired {
                let (m, v, n) = mean_var(a.column(k, f).zip(b.column(k, f)).map(|(x, y)| x - y));
                gap.push(m.abs());
                stderr.push((v / n as f64).sqrt());
            } else {
                let (ma, va, na) = mean_var(a.column(k, f));
                let (mb, vb, nb) = mean_var(b.column(k, f));
                gap.push((ma - mb).abs());
                stderr.push((va / na as f64 + vb / nb as f64).sqrt());
            }
        }
        let pooled: Vec<f64> = late.iter().flat_map(|&k| a.column(k, f).chain(b.column(k, f))).collect();
        let scale = (pooled.iter().map(|x| x * x).sum::<f64>() / pooled.len() as f64).sqrt();
        out.push(FunctionalGap { name: name.clone(), times: a.times.clone(), gap, stderr, scale });
    }
    Ok(out)
}

/// Lower bound on the dual-Lipschitz distance between two empirical laws:
/// `max_f |mean_A f - mean_B f|` over a normalized family. Never exceeds 2.
pub fn dual_lipschitz_proxy(a: &[SpectralField<f64>], b: &[SpectralField<f64>], family: &[Functional]) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::Contract("functional family is empty".into()));
    }
    if let Some(f) = family.iter().find(|f| !f.is_normalized()) {
        return Err(Error::Contract(format!("functional {} is not normalized", f.name())));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Mismatch("empty sample".into()));
    }
    let means = |sample: &[SpectralField<f64>]| -> Vec<f64> {
        let mut acc = vec![0.0; family.len()];
        for u in sample {
            for (s, v) in acc.iter_mut().zip(evaluate_family(family, u)) {
                *s += v;
            }
        }
        acc.iter().map(|s| s / sample.len() as f64).collect()
    };
    let (ma, mb) = (means(a), means(b));
    Ok(ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
