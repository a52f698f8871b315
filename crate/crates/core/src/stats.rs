//! Bracket averages `⟨⟨·⟩⟩` and the statistical observables built on them.
//!
//! A [`Probe`] turns one state into a flat vector of instantaneous
//! observables; an [`EnsembleAccumulator`] sums those vectors per path and per
//! time block inside a [`BracketWindow`]. Every reported quantity is a linear
//! functional of the summed vector, so standard errors come from the spread of
//! the per-unit means.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{derivative_factor, shift_factor, GridEvaluator, SpectralField};

const TIME_TOL: f64 = 1e-9;

/// Time window `[T, T + σ)` of the bracket average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketWindow {
    pub t_start: f64,
    pub width: f64,
}

impl Default for BracketWindow {
    fn default() -> Self {
        Self { t_start: 10.0, width: 10.0 }
    }
}

impl BracketWindow {
    pub fn new(t_start: f64, width: f64) -> Result<Self> {
        if !(t_start >= 1.0 && t_start.is_finite()) {
            return Err(Error::Config(format!("bracket start must be >= 1, got {t_start}")));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("bracket width must be positive, got {width}")));
        }
        Ok(Self { t_start, width })
    }

    /// Also enforces `σ >= σ_*`.
    pub fn with_min_width(t_start: f64, width: f64, sigma_star: f64) -> Result<Self> {
        let w = Self::new(t_start, width)?;
        if width < sigma_star {
            return Err(Error::Config(format!("bracket width {width} below sigma_* = {sigma_star}")));
        }
        Ok(w)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.width
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start - TIME_TOL && t < self.t_end() - TIME_TOL
    }

    /// The two halves `[T, T + σ/2)` and `[T + σ/2, T + σ)`.
    pub fn halves(&self) -> (Self, Self) {
        let h = 0.5 * self.width;
        (Self { t_start: self.t_start, width: h }, Self { t_start: self.t_start + h, width: h })
    }

    /// Block index of `t` when the window is cut into `blocks` equal parts.
    fn block(&self, t: f64, blocks: u32) -> u32 {
        let x = ((t - self.t_start) / self.width * blocks as f64 + TIME_TOL).floor();
        (x.max(0.0) as u32).min(blocks - 1)
    }

    /// Sample times `T, T + dt, …` strictly inside the window.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let n = (self.width / dt - TIME_TOL).ceil() as usize;
        (0..n).map(|j| self.t_start + j as f64 * dt).collect()
    }
}

/// Mean with standard error; `stderr` is NaN when it cannot be estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Number of independent units behind the error bar.
    pub units: usize,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, stderr: 0.0, units: 1 }
    }

    pub fn has_error_bar(&self) -> bool {
        self.stderr.is_finite()
    }

    /// `|self - target| <= k · stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Which instantaneous observables a probe evaluates.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub n_modes: usize,
    pub nu: f64,
    /// Increment lengths `l` for structure functions.
    pub ls: Vec<f64>,
    /// Exponents of the absolute structure functions.
    pub ps: Vec<f64>,
    /// Integer exponents of the signed structure functions.
    pub skew_ps: Vec<u32>,
    pub sobolev_ms: Vec<f64>,
    pub lp_ps: Vec<f64>,
}

impl Observables {
    /// Per-mode power, Sobolev `m = 0, 1, 2` and dissipation only.
    pub fn new(n_modes: usize, nu: f64) -> Self {
        Self { n_modes, nu, ls: Vec::new(), ps: Vec::new(), skew_ps: Vec::new(), sobolev_ms: vec![0.0, 1.0, 2.0], lp_ps: Vec::new() }
    }

    pub fn with_structure(mut self, ls: Vec<f64>, ps: Vec<f64>, skew_ps: Vec<u32>) -> Self {
        self.ls = ls;
        self.ps = ps;
        self.skew_ps = skew_ps;
        self
    }

    pub fn with_sobolev(mut self, ms: Vec<f64>) -> Self {
        self.sobolev_ms = ms;
        self
    }

    pub fn with_lp(mut self, ps: Vec<f64>) -> Self {
        self.lp_ps = ps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        if let Some(l) = self.ls.iter().find(|l| !(**l > 0.0 && **l <= 0.5)) {
            return Err(Error::Config(format!("increment length {l} outside (0, 1/2]")));
        }
        if let Some(p) = self.ps.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::Config(format!("structure exponent {p} must be positive")));
        }
        if self.skew_ps.contains(&0) {
            return Err(Error::Config("skew exponents must be positive integers".into()));
        }
        if let Some(p) = self.lp_ps.iter().find(|p| !(**p >= 1.0)) {
            return Err(Error::Config(format!("L_p exponent {p} below 1")));
        }
        Ok(())
    }

    fn structure_offset(&self) -> usize {
        self.n_modes
    }

    fn skew_offset(&self) -> usize {
        self.structure_offset() + self.ls.len() * self.ps.len()
    }

    fn sobolev_offset(&self) -> usize {
        self.skew_offset() + self.ls.len() * self.skew_ps.len()
    }

    fn lp_offset(&self) -> usize {
        self.sobolev_offset() + self.sobolev_ms.len()
    }

    fn dissipation_offset(&self) -> usize {
        self.lp_offset() + self.lp_ps.len()
    }

    pub fn len(&self) -> usize {
        self.dissipation_offset() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn find(xs: &[f64], x: f64, what: &str) -> Result<usize> {
        xs.iter()
            .position(|v| (v - x).abs() <= 1e-12 * x.abs().max(1.0))
            .ok_or_else(|| Error::Config(format!("{what} {x} is not tracked")))
    }

    fn structure_index(&self, p: f64, l: f64) -> Result<usize> {
        let (pi, li) = (Self::find(&self.ps, p, "exponent")?, Self::find(&self.ls, l, "increment")?);
        Ok(self.structure_offset() + li * self.ps.len() + pi)
    }

    fn skew_index(&self, p: u32, l: f64) -> Result<usize> {
        let pi = self.skew_ps.iter().position(|q| *q == p).ok_or_else(|| Error::Config(format!("skew exponent {p} is not tracked")))?;
        let li = Self::find(&self.ls, l, "increment")?;
        Ok(self.skew_offset() + li * self.skew_ps.len() + pi)
    }
}

/// Evaluates [`Observables`] on single states.
pub struct Probe {
    obs: Observables,
    eval: GridEvaluator<f64>,
}

impl Probe {
    pub fn new(obs: Observables) -> Result<Self> {
        obs.validate()?;
        Ok(Self { eval: GridEvaluator::for_quadrature(obs.n_modes), obs })
    }

    pub fn observables(&self) -> &Observables {
        &self.obs
    }

    /// Flat observable vector of `u` (in double precision).
    pub fn measure<T: Scalar>(&mut self, u: &SpectralField<T>) -> Result<Vec<f64>> {
        let obs = &self.obs;
        if u.n_modes() != obs.n_modes {
            return Err(Error::Mismatch(format!("probe expects {} modes, got {}", obs.n_modes, u.n_modes())));
        }
        let u = to_f64(u);
        let mut out = vec![0.0; obs.len()];
        for (o, c) in out.iter_mut().zip(u.coeffs()) {
            *o = c.norm_sqr();
        }
        for (li, &l) in obs.ls.iter().enumerate() {
            let du = self.eval.eval_with(&u, |s| shift_factor(s, l));
            let n = du.len() as f64;
            for (pi, &p) in obs.ps.iter().enumerate() {
                let sum: f64 = if p == 2.0 { du.iter().map(|v| v * v).sum() } else { du.iter().map(|v| v.abs().powf(p)).sum() };
                out[obs.structure_offset() + li * obs.ps.len() + pi] = sum / n;
            }
            for (pi, &p) in obs.skew_ps.iter().enumerate() {
                let sum: f64 = du.iter().map(|v| v.powi(p as i32)).sum();
                out[obs.skew_offset() + li * obs.skew_ps.len() + pi] = sum / n;
            }
        }
        for (i, &m) in obs.sobolev_ms.iter().enumerate() {
            out[obs.sobolev_offset() + i] = u.sobolev_norm_sq(m);
        }
        if !obs.lp_ps.is_empty() {
            let v = self.eval.eval(&u);
            let n = v.len() as f64;
            for (i, &p) in obs.lp_ps.iter().enumerate() {
                out[obs.lp_offset() + i] = v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / n;
            }
        }
        out[obs.dissipation_offset()] = obs.nu * u.sobolev_norm_sq(1.0);
        Ok(out)
    }
}

pub(crate) fn to_f64<T: Scalar>(u: &SpectralField<T>) -> SpectralField<f64> {
    SpectralField::from_coeffs(u.coeffs().iter().map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy())).collect())
}

#[derive(Debug, Clone, PartialEq)]
struct Unit {
    count: u64,
    sums: Vec<f64>,
}

/// Per-(path, time block) sums of observable vectors inside a window.
///
/// Merging takes the union of units, so it is exactly associative and
/// commutative; all reductions iterate units in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    obs: Observables,
    window: BracketWindow,
    blocks: u32,
    units: BTreeMap<(u64, u32), Unit>,
    first_time: BTreeMap<u64, f64>,
    last_time: BTreeMap<u64, f64>,
}

/// Default number of time blocks per path.
pub const DEFAULT_BLOCKS: u32 = 4;

impl EnsembleAccumulator {
    pub fn new(obs: Observables, window: BracketWindow) -> Self {
        Self::with_blocks(obs, window, DEFAULT_BLOCKS)
    }

    pub fn with_blocks(obs: Observables, window: BracketWindow, blocks: u32) -> Self {
        Self { obs, window, blocks: blocks.max(1), units: BTreeMap::new(), first_time: BTreeMap::new(), last_time: BTreeMap::new() }
    }

    pub fn observables(&self) -> &Observables {
        &self.obs
    }

    pub fn window(&self) -> BracketWindow {
        self.window
    }

    pub fn paths(&self) -> usize {
        self.first_time.len()
    }

    /// Total number of time samples inside the window.
    pub fn samples(&self) -> u64 {
        self.units.values().map(|u| u.count).sum()
    }

    /// Adds one sample; samples outside the window only extend coverage.
    pub fn record(&mut self, path: u64, t: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.obs.len() {
            return Err(Error::Mismatch(format!("expected {} observables, got {}", self.obs.len(), values.len())));
        }
        let first = self.first_time.entry(path).or_insert(t);
        *first = first.min(t);
        let last = self.last_time.entry(path).or_insert(t);
        *last = last.max(t);
        if !self.window.contains(t) {
            return Ok(());
        }
        let block = self.window.block(t, self.blocks);
        let unit = self.units.entry((path, block)).or_insert_with(|| Unit { count: 0, sums: vec![0.0; values.len()] });
        unit.count += 1;
        for (s, v) in unit.sums.iter_mut().zip(values) {
            *s += v;
        }
        Ok(())
    }

    pub fn observe<T: Scalar>(&mut self, probe: &mut Probe, path: u64, t: f64, u: &SpectralField<T>) -> Result<()> {
        if probe.observables() != &self.obs {
            return Err(Error::Mismatch("probe and accumulator track different observables".into()));
        }
        if self.window.contains(t) {
            let v = probe.measure(u)?;
            self.record(path, t, &v)
        } else {
            let first = self.first_time.entry(path).or_insert(t);
            *first = first.min(t);
            let last = self.last_time.entry(path).or_insert(t);
            *last = last.max(t);
            Ok(())
        }
    }

    /// Union of two accumulators over disjoint paths.
    pub fn merge(mut self, other: Self) -> Result<Self> {
        if self.obs != other.obs || self.window != other.window || self.blocks != other.blocks {
            return Err(Error::Mismatch("accumulators differ in observables, window or blocking".into()));
        }
        for path in other.first_time.keys() {
            if self.first_time.contains_key(path) {
                return Err(Error::Mismatch(format!("path {path} present in both accumulators")));
            }
        }
        self.units.extend(other.units);
        self.first_time.extend(other.first_time);
        self.last_time.extend(other.last_time);
        Ok(self)
    }

    fn check_coverage(&self) -> Result<()> {
        let missing = || Error::WindowNotCovered { t_start: self.window.t_start, t_end: self.window.t_end() };
        if self.units.is_empty() {
            return Err(missing());
        }
        for (path, first) in &self.first_time {
            let last = self.last_time[path];
            if *first > self.window.t_start + TIME_TOL || last < self.window.t_end() - TIME_TOL {
                return Err(missing());
            }
        }
        Ok(())
    }

    /// Bracket average of the linear functional `f` of the observable vector.
    pub fn estimate(&self, f: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
        self.check_coverage()?;
        let total: f64 = self.units.values().map(|u| u.count as f64).sum();
        let z: Vec<(f64, f64)> = self.units.values().map(|u| (u.count as f64 / total, f(&u.sums) / u.count as f64)).collect();
        let mean: f64 = z.iter().map(|(w, v)| w * v).sum();
        let n = z.len();
        let stderr = if n > 1 {
            (n as f64 / (n - 1) as f64 * z.iter().map(|(w, v)| w * w * (v - mean).powi(2)).sum::<f64>()).sqrt()
        } else {
            f64::NAN
        };
        Ok(Estimate { mean, stderr, units: n })
    }

    /// `S_{p,l} = ⟨⟨∫|u(x+l) - u(x)|^p dx⟩⟩`.
    pub fn structure_function(&self, p: f64, l: f64) -> Result<Estimate> {
        let i = self.obs.structure_index(p, l)?;
        self.estimate(|v| v[i])
    }

    /// `S^s_{p,l} = ⟨⟨∫(u(x+l) - u(x))^p dx⟩⟩`.
    pub fn skew_structure_function(&self, p: u32, l: f64) -> Result<Estimate> {
        let i = self.obs.skew_index(p, l)?;
        self.estimate(|v| v[i])
    }

    /// Every tracked `(p, l)` pair.
    pub fn structure_table(&self) -> Result<Vec<StructureRow>> {
        let mut rows = Vec::new();
        for &p in &self.obs.ps {
            for &l in &self.obs.ls {
                let s = self.structure_function(p, l)?;
                let signed = match p.fract() == 0.0 && p <= u32::MAX as f64 {
                    true if self.obs.skew_ps.contains(&(p as u32)) => Some(self.skew_structure_function(p as u32, l)?),
                    _ => None,
                };
                rows.push(StructureRow { p, l, value: s, signed });
            }
        }
        Ok(rows)
    }

    /// `E_k = (1/|J|) Σ_{n ∈ J} ½⟨⟨|û_n|²⟩⟩` over `J = {n : k/M <= |n| <= Mk}`.
    pub fn energy_spectrum(&self, layer: f64, ks: &[f64]) -> Result<Vec<SpectrumRow>> {
        if !(layer > 1.0) {
            return Err(Error::Config(format!("layer parameter must exceed 1, got {layer}")));
        }
        ks.iter()
            .map(|&k| {
                let (lo, hi) = layer_bounds(k, layer)?;
                if hi > self.obs.n_modes {
                    return Err(Error::LayerExceedsCutoff { max_mode: hi, cutoff: self.obs.n_modes });
                }
                let count = 2 * (hi + 1 - lo);
                // ½|û_n|² summed over ±n is |û_n|² for n > 0
                let e = self.estimate(|v| v[lo - 1..hi].iter().sum::<f64>() / count as f64)?;
                Ok(SpectrumRow { k, value: e })
            })
            .collect()
    }

    /// Single-mode spectrum `½⟨⟨|û_n|²⟩⟩` for `n = 1..=N`.
    pub fn mode_spectrum(&self) -> Result<Vec<SpectrumRow>> {
        (1..=self.obs.n_modes).map(|n| Ok(SpectrumRow { k: n as f64, value: self.estimate(|v| 0.5 * v[n - 1])? })).collect()
    }

    /// `⟨⟨‖u‖²_m⟩⟩`.
    pub fn sobolev_moment(&self, m: f64) -> Result<Estimate> {
        let i = self.obs.sobolev_offset() + Observables::find(&self.obs.sobolev_ms, m, "Sobolev order")?;
        self.estimate(|v| v[i])
    }

    /// `⟨⟨|u|_p^p⟩⟩`.
    pub fn lp_moment(&self, p: f64) -> Result<Estimate> {
        let i = self.obs.lp_offset() + Observables::find(&self.obs.lp_ps, p, "L_p exponent")?;
        self.estimate(|v| v[i])
    }

    /// `ε = ν⟨⟨‖u‖₁²⟩⟩`.
    pub fn dissipation_rate(&self) -> Result<Estimate> {
        let i = self.obs.dissipation_offset();
        self.estimate(|v| v[i])
    }
}

/// Integer mode range of the layer `k/M <= |n| <= Mk`.
pub fn layer_bounds(k: f64, layer: f64) -> Result<(usize, usize)> {
    if !(k >= 1.0) {
        return Err(Error::Config(format!("layer centre must be >= 1, got {k}")));
    }
    let lo = ((k / layer) - 1e-12).ceil().max(1.0) as usize;
    let hi = (k * layer + 1e-12).floor() as usize;
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureRow {
    pub p: f64,
    pub l: f64,
    pub value: Estimate,
    pub signed: Option<Estimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub k: f64,
    pub value: Estimate,
}

/// Bracket average of a scalar series given per path on common `times`.
pub fn bracket_average(times: &[f64], per_path: &[Vec<f64>], window: BracketWindow) -> Result<Estimate> {
    let obs = Observables { n_modes: 0, nu: 0.0, ls: vec![], ps: vec![], skew_ps: vec![], sobolev_ms: vec![], lp_ps: vec![] };
    let mut acc = EnsembleAccumulator::new(obs, window);
    for (path, values) in per_path.iter().enumerate() {
        if values.len() != times.len() {
            return Err(Error::Mismatch("series length differs from the time grid".into()));
        }
        for (t, v) in times.iter().zip(values) {
            acc.record(path as u64, *t, &[*v])?;
        }
    }
    acc.estimate(|v| v[0])
}

/// `l` values geometrically spaced on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|j| lo * (r * j as f64).exp()).collect()
}

/// `y ≈ e^{intercept} x^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub range: (f64, f64),
    pub points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

pub const MIN_FIT_POINTS: usize = 4;

/// Least squares on `(ln x, ln y)` over points with `x` in `range` (inclusive).
pub fn fit_power_law(points: &[(f64, f64)], range: Option<(f64, f64)>) -> Result<PowerLawFit> {
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let sel: Vec<(f64, f64)> = points.iter().copied().filter(|(x, _)| *x >= lo * (1.0 - 1e-12) && *x <= hi * (1.0 + 1e-12)).collect();
    if sel.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, got: sel.len() });
    }
    if let Some(&(x, y)) = sel.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositive { x, y });
    }
    let n = sel.len() as f64;
    let lx: Vec<f64> = sel.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = sel.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { needed: 2, got: 1 });
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    let xs = sel.iter().map(|p| p.0);
    let range = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    Ok(PowerLawFit { exponent: slope, intercept, stderr, range, points: sel.len() })
}

/// Log-log least-squares slope and its standard error from at least three
/// points; unlike [`fit_power_law`] it accepts three-point sweeps.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositive { x, y });
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { needed: 2, got: 1 });
    }
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    Ok((slope, (rss / (n - 2.0) / sxx).sqrt()))
}

/// Least-squares slope of `S ≈ a·l` through the origin, with its standard error.
pub fn third_moment_slope(points: &[(f64, f64)], range: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let sel: Vec<(f64, f64)> = points.iter().copied().filter(|(l, _)| *l >= lo * (1.0 - 1e-12) && *l <= hi * (1.0 + 1e-12)).collect();
    if sel.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: sel.len() });
    }
    let sll: f64 = sel.iter().map(|(l, _)| l * l).sum();
    let slope = sel.iter().map(|(l, s)| l * s).sum::<f64>() / sll;
    let rss: f64 = sel.iter().map(|(l, s)| (s - slope * l).powi(2)).sum();
    Ok((slope, (rss / (sel.len() - 1) as f64 / sll).sqrt()))
}

/// Lower end `L(ν)ν` of the strongly inertial range with `L(ν) = ν^{-1/2}`.
pub fn strongly_inertial_start(nu: f64) -> f64 {
    nu.sqrt()
}

/// Local log-log slope at each point, by regression over `[k/√w, k·√w]`.
pub fn local_slopes(points: &[(f64, f64)], window: f64) -> Vec<Option<f64>> {
    let half = window.sqrt();
    points
        .iter()
        .map(|&(k, _)| {
            let near: Vec<(f64, f64)> = points.iter().copied().filter(|(x, _)| *x >= k / half && *x <= k * half).collect();
            if near.len() < 3 {
                return None;
            }
            fit_power_law_unchecked(&near)
        })
        .collect()
}

fn fit_power_law_unchecked(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Window factor for [`local_slopes`] used by [`spectral_breakpoint`].
pub const SLOPE_WINDOW: f64 = 2.0;

/// First `k` from which the local slope stays below `-2 - threshold` for a
/// decade `[k, 10k]`.
pub fn spectral_breakpoint(points: &[(f64, f64)], threshold: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = points.iter().copied().filter(|(k, e)| *k > 0.0 && *e > 0.0).collect();
    let points = points.as_slice();
    let slopes = local_slopes(points, SLOPE_WINDOW);
    let limit = -2.0 - threshold;
    let k_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    for (i, &(k, _)) in points.iter().enumerate() {
        if k * 10.0 > k_max * (1.0 + 1e-12) {
            break;
        }
        if !matches!(slopes[i], Some(s) if s < limit) {
            continue;
        }
        let sustained = points.iter().zip(&slopes).filter(|((x, _), _)| *x >= k && *x <= 10.0 * k).all(|(_, s)| matches!(s, Some(s) if *s < limit));
        if sustained {
            return Ok(k);
        }
    }
    Err(Error::NotResolved(format!("no sustained drop below slope {limit} within k <= {k_max}")))
}

/// Dissipation-scale fit `l_d = ν^γ` from breakpoints `k*(ν) ∝ ν^{-γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationScale {
    pub gamma: f64,
    pub stderr: f64,
    /// `(ν, k*)`, in input order.
    pub breakpoints: Vec<(f64, f64)>,
}

pub fn dissipation_scale(spectra: &[(f64, Vec<(f64, f64)>)], threshold: f64) -> Result<DissipationScale> {
    if spectra.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: spectra.len() });
    }
    let breakpoints = spectra.iter().map(|(nu, pts)| Ok((*nu, spectral_breakpoint(pts, threshold)?))).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = breakpoints.iter().map(|(nu, _)| (1.0 / nu).ln()).collect();
    let ys: Vec<f64> = breakpoints.iter().map(|(_, k)| k.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Mismatch("dissipation-scale sweep needs distinct viscosities".into()));
    }
    let gamma = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let b = my - gamma * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - b - gamma * x).powi(2)).sum();
    let stderr = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(DissipationScale { gamma, stderr, breakpoints })
}

/// `‖u(·+l) - u(·)‖²` from the spectrum: `4 Σ_{n≠0} sin²(πnl)|û_n|²`.
pub fn increment_energy<T: Scalar>(u: &SpectralField<T>, l: f64) -> f64 {
    u.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| 8.0 * (std::f64::consts::PI * (i + 1) as f64 * l).sin().powi(2) * c.norm_sqr().to_f64_lossy())
        .sum()
}

/// `k² |û_k|²` for every mode, a flat profile in the inertial range.
pub fn compensated_modes(spectrum: &[SpectrumRow]) -> Vec<(f64, f64)> {
    spectrum.iter().map(|r| (r.k, 2.0 * r.value.mean * r.k * r.k)).collect()
}

/// `max_x u_x` of `u` on the quadrature grid, in double precision.
pub fn max_slope<T: Scalar>(u: &SpectralField<T>) -> f64 {
    let u = to_f64(u);
    let mut ev = GridEvaluator::for_quadrature(u.n_modes());
    ev.eval_with(&u, |s| derivative_factor(s)).iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
}
