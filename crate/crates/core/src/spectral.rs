//! Zero-mean periodic fields on the circle `[0, 1)`.
//!
//! A field is stored as its half spectrum `û_s`, `1 <= s <= N`; the negative
//! modes are implied by `û_{-s} = conj(û_s)` and the mean `û_0` is always zero,
//! so every stored field is real and mean-free by construction. The real
//! orthonormal basis is `e_s = √2 cos(2πsx)` for `s > 0` and `√2 sin(2π|s|x)`
//! for `s < 0`, related to the complex amplitudes by
//! `û_s = (u_s - i u_{-s}) / √2`.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest grid used for `L_p` quadrature regardless of the cutoff.
pub const MIN_QUADRATURE_GRID: usize = 1024;

/// How the quadratic term `Π_N(u u_x)` is evaluated by collocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dealias {
    /// Only modes `|s| <= ⌊2N/3⌋` enter the product and receive its projection,
    /// evaluated on a `2N` grid. Exact for the retained modes.
    #[default]
    TwoThirds,
    /// All `N` modes, product evaluated on a padded grid of at least `3N + 1`
    /// points: the exact Galerkin projection.
    Exact,
    /// Plain collocation on a `2N` grid; aliasing errors are kept.
    Off,
}

impl Dealias {
    pub fn name(self) -> &'static str {
        match self {
            Dealias::TwoThirds => "two-thirds",
            Dealias::Exact => "exact",
            Dealias::Off => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two-thirds" | "2/3" | "on" | "true" => Some(Dealias::TwoThirds),
            "exact" => Some(Dealias::Exact),
            "off" | "false" => Some(Dealias::Off),
            _ => None,
        }
    }

    /// Highest mode that takes part in the nonlinearity for an `n_modes` cutoff.
    pub fn active_modes(self, n_modes: usize) -> usize {
        match self {
            Dealias::TwoThirds => 2 * n_modes / 3,
            Dealias::Exact | Dealias::Off => n_modes,
        }
    }

    fn grid(self, n_modes: usize) -> usize {
        match self {
            Dealias::TwoThirds | Dealias::Off => (2 * n_modes).max(2).next_power_of_two(),
            Dealias::Exact => (3 * n_modes + 1).next_power_of_two(),
        }
    }
}

struct FftPair<T: Scalar> {
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
}

type PlanCache = Mutex<HashMap<(TypeId, usize), Box<dyn Any + Send + Sync>>>;

fn plans<T: Scalar>(n: usize) -> Arc<FftPair<T>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().expect("fft plan cache poisoned");
    let entry = map.entry((TypeId::of::<T>(), n)).or_insert_with(|| {
        let mut planner = RealFftPlanner::<T>::new();
        let pair = Arc::new(FftPair { r2c: planner.plan_fft_forward(n), c2r: planner.plan_fft_inverse(n) });
        Box::new(pair)
    });
    entry.downcast_ref::<Arc<FftPair<T>>>().expect("plan cache type mismatch").clone()
}

fn check_grid(n_grid: usize, n_modes: usize) -> Result<()> {
    let min = (2 * n_modes).max(2);
    if n_grid < min || !n_grid.is_power_of_two() {
        return Err(Error::Resolution { n_grid, n_modes, min: min.next_power_of_two() });
    }
    Ok(())
}

/// Reusable real FFT of one size with its buffers.
pub(crate) struct Transform<T: Scalar> {
    n: usize,
    pair: Arc<FftPair<T>>,
    spectrum: Vec<Complex<T>>,
    grid: Vec<T>,
    scratch_fwd: Vec<Complex<T>>,
    scratch_inv: Vec<Complex<T>>,
}

impl<T: Scalar> Transform<T> {
    pub(crate) fn new(n: usize) -> Self {
        let pair = plans::<T>(n);
        let scratch_fwd = pair.r2c.make_scratch_vec();
        let scratch_inv = pair.c2r.make_scratch_vec();
        Self { n, spectrum: vec![Complex::default(); n / 2 + 1], grid: vec![T::zero(); n], pair, scratch_fwd, scratch_inv }
    }

    /// Writes `Σ_{s<=keep} coef(s) e^{2πisx} + c.c.` onto the grid.
    pub(crate) fn synthesize(&mut self, coeffs: &[Complex<T>], keep: usize, coef: impl Fn(usize, Complex<T>) -> Complex<T>) {
        let half = self.n / 2;
        let keep = keep.min(coeffs.len());
        self.spectrum.iter_mut().for_each(|c| *c = Complex::default());
        for s in 1..=keep.min(half) {
            self.spectrum[s] = coef(s, coeffs[s - 1]);
        }
        if keep >= half {
            // Nyquist bin is real: only the cosine part survives on the grid.
            let two = T::one() + T::one();
            self.spectrum[half] = Complex::new(two * self.spectrum[half].re, T::zero());
        }
        self.pair
            .c2r
            .process_with_scratch(&mut self.spectrum, &mut self.grid, &mut self.scratch_inv)
            .expect("inverse fft buffer sizes");
    }

    /// Forward transform of the grid; the grid buffer is clobbered.
    pub(crate) fn analyze(&mut self) {
        self.pair
            .r2c
            .process_with_scratch(&mut self.grid, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("forward fft buffer sizes");
    }

    /// Normalized amplitude `û_s` after [`Transform::analyze`].
    pub(crate) fn amplitude(&self, s: usize) -> Complex<T> {
        let n = T::of(self.n as f64);
        if 2 * s == self.n {
            Complex::new(self.spectrum[s].re / (n + n), T::zero())
        } else {
            self.spectrum[s] / n
        }
    }

    pub(crate) fn grid(&self) -> &[T] {
        &self.grid
    }

    pub(crate) fn grid_mut(&mut self) -> &mut [T] {
        &mut self.grid
    }
}

/// Evaluates fields (optionally through a per-mode multiplier) on a fixed grid.
pub struct GridEvaluator<T: Scalar> {
    tf: Transform<T>,
}

impl<T: Scalar> GridEvaluator<T> {
    pub fn new(n_grid: usize) -> Result<Self> {
        check_grid(n_grid, 1)?;
        Ok(Self { tf: Transform::new(n_grid) })
    }

    /// Grid used for quadrature of an `n_modes` field: `max(4N, 1024)` points.
    pub fn for_quadrature(n_modes: usize) -> Self {
        Self { tf: Transform::new(quadrature_grid(n_modes)) }
    }

    pub fn n_grid(&self) -> usize {
        self.tf.n
    }

    pub fn eval(&mut self, f: &SpectralField<T>) -> &[T] {
        self.eval_with(f, |_| Complex::new(T::one(), T::zero()))
    }

    /// Samples of `Σ m(s) û_s e^{2πisx} + c.c.`
    pub fn eval_with(&mut self, f: &SpectralField<T>, multiplier: impl Fn(usize) -> Complex<T>) -> &[T] {
        self.tf.synthesize(&f.coeffs, f.n_modes(), |s, c| c * multiplier(s));
        self.tf.grid()
    }
}

/// `max(4N, 1024)` rounded up to a power of two.
pub fn quadrature_grid(n_modes: usize) -> usize {
    (4 * n_modes).max(MIN_QUADRATURE_GRID).next_power_of_two()
}

/// `(mean |v|^p)^{1/p}` over grid samples, or the max for `p = ∞`.
pub fn grid_lp<T: Scalar>(samples: &[T], p: T) -> T {
    if p.is_infinite() {
        return samples.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    }
    let n = T::of(samples.len() as f64);
    let mean = if p == T::one() {
        samples.iter().map(|v| v.abs()).sum::<T>() / n
    } else if p == T::of(2.0) {
        samples.iter().map(|v| *v * *v).sum::<T>() / n
    } else {
        samples.iter().map(|v| v.abs().powf(p)).sum::<T>() / n
    };
    mean.powf(p.recip())
}

/// Truncated Fourier representation of a zero-mean real field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T: Scalar> {
    coeffs: Vec<Complex<T>>,
}

/// Equispaced samples of a field on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField<T: Scalar> {
    samples: Vec<T>,
}

impl<T: Scalar> PhysicalField<T> {
    pub fn new(samples: Vec<T>) -> Result<Self> {
        check_grid(samples.len(), 1)?;
        Ok(Self { samples })
    }

    /// Samples `g(j / n_grid)`.
    pub fn from_fn(n_grid: usize, g: impl Fn(T) -> T) -> Result<Self> {
        check_grid(n_grid, 1)?;
        let h = T::of(1.0 / n_grid as f64);
        Ok(Self { samples: (0..n_grid).map(|j| g(T::of(j as f64) * h)).collect() })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn n_grid(&self) -> usize {
        self.samples.len()
    }

    pub fn spacing(&self) -> T {
        T::of(1.0 / self.samples.len() as f64)
    }

    pub fn mean(&self) -> T {
        self.samples.iter().copied().sum::<T>() / T::of(self.samples.len() as f64)
    }

    /// Projection `Π_N` of the sampled field; the mean is discarded.
    ///
    /// When `n_grid == 2N` the top mode sits on the Nyquist bin and only its
    /// cosine part is recoverable.
    pub fn to_spectral(&self, n_modes: usize) -> Result<SpectralField<T>> {
        check_grid(self.n_grid(), n_modes)?;
        let mut tf = Transform::new(self.n_grid());
        tf.grid_mut().copy_from_slice(&self.samples);
        tf.analyze();
        Ok(SpectralField { coeffs: (1..=n_modes).map(|s| tf.amplitude(s)).collect() })
    }
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(n_modes: usize) -> Self {
        Self { coeffs: vec![Complex::default(); n_modes] }
    }

    /// Field with amplitudes `û_s = coeffs[s - 1]`.
    pub fn from_coeffs(coeffs: Vec<Complex<T>>) -> Self {
        Self { coeffs }
    }

    /// Builds a field from real basis coefficients `u_s` (`s ∈ ±1..=±N`).
    pub fn from_real_coeffs(n_modes: usize, u: impl Fn(i64) -> T) -> Self {
        let r = T::FRAC_1_SQRT_2();
        let coeffs = (1..=n_modes as i64).map(|s| Complex::new(u(s) * r, -u(-s) * r)).collect();
        Self { coeffs }
    }

    /// The basis function `e_s`.
    pub fn basis(n_modes: usize, s: i64) -> Self {
        assert!(s != 0 && s.unsigned_abs() as usize <= n_modes, "mode {s} outside 1..={n_modes}");
        Self::from_real_coeffs(n_modes, |k| if k == s { T::one() } else { T::zero() })
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    /// `û_s` for any nonzero `s` inside the cutoff, zero otherwise.
    pub fn coeff(&self, s: i64) -> Complex<T> {
        let k = s.unsigned_abs() as usize;
        if s == 0 || k > self.n_modes() {
            return Complex::default();
        }
        let c = self.coeffs[k - 1];
        if s > 0 {
            c
        } else {
            c.conj()
        }
    }

    /// Real basis coefficient `u_s = ⟨u, e_s⟩`.
    pub fn real_coeff(&self, s: i64) -> T {
        let c = self.coeff(s.abs());
        let r = T::SQRT_2();
        if s > 0 {
            r * c.re
        } else {
            -r * c.im
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Truncates or zero-pads to a new cutoff.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n_modes, Complex::default());
        Self { coeffs }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// Samples on an `n_grid` point grid (`n_grid >= 2N`, power of two).
    pub fn to_physical(&self, n_grid: usize) -> Result<PhysicalField<T>> {
        check_grid(n_grid, self.n_modes())?;
        let mut tf = Transform::new(n_grid);
        tf.synthesize(&self.coeffs, self.n_modes(), |_, c| c);
        Ok(PhysicalField { samples: tf.grid().to_vec() })
    }

    /// `L_2` inner product `⟨u, v⟩ = Σ_{s≠0} û_s conj(v̂_s)`.
    pub fn inner(&self, other: &Self) -> T {
        let two = T::of(2.0);
        two * self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<T>()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// Homogeneous Sobolev norm `(Σ |2πs|^{2m} |u_s|²)^{1/2}`, any real `m`.
    pub fn sobolev_norm(&self, m: T) -> T {
        self.sobolev_norm_sq(m).sqrt()
    }

    pub fn sobolev_norm_sq(&self, m: T) -> T {
        let two = T::of(2.0);
        let tau = T::TAU();
        two * self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (tau * T::of((i + 1) as f64)).powf(two * m) * c.norm_sqr())
            .sum::<T>()
    }

    /// `|u|_{L_p}` by quadrature on the default `max(4N, 1024)` grid.
    pub fn lp_norm(&self, p: T) -> T {
        let mut ev = GridEvaluator::for_quadrature(self.n_modes());
        grid_lp(ev.eval(self), p)
    }

    pub fn lp_norm_on(&self, p: T, n_grid: usize) -> Result<T> {
        check_grid(n_grid, self.n_modes())?;
        let mut ev = GridEvaluator::new(n_grid)?;
        Ok(grid_lp(ev.eval(self), p))
    }

    /// `∂_x u`.
    pub fn derivative(&self) -> Self {
        let tau = T::TAU();
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c * Complex::new(T::zero(), tau * T::of((i + 1) as f64))).collect();
        Self { coeffs }
    }

    /// Galerkin nonlinearity `Π_N(u u_x)` evaluated as `Π_N(½ ∂_x u²)`.
    pub fn nonlinear_term(&self, dealias: Dealias) -> Self {
        let mut ws = NonlinearWorkspace::new(self.n_modes(), dealias);
        let mut out = Self::zeros(self.n_modes());
        ws.apply(&self.coeffs, &mut out.coeffs);
        out
    }

    /// `u(· + l) - u(·)`, exact per-mode phase shift.
    pub fn shift_increment(&self, l: T) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * shift_factor(i + 1, l))
            .collect();
        Self { coeffs }
    }

    /// `max(0, max_x u_x)` on the quadrature grid.
    pub fn max_positive_slope(&self) -> T {
        let mut ev = GridEvaluator::for_quadrature(self.n_modes());
        let du = ev.eval_with(self, |s| derivative_factor(s));
        du.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    /// `|u_x|_{L_1}`, the total variation of `u`.
    pub fn total_variation(&self) -> T {
        let mut ev = GridEvaluator::for_quadrature(self.n_modes());
        grid_lp(ev.eval_with(self, |s| derivative_factor(s)), T::one())
    }
}

/// `e^{2πisl} - 1`.
pub fn shift_factor<T: Scalar>(s: usize, l: T) -> Complex<T> {
    let phase = T::TAU() * T::of(s as f64) * l;
    Complex::new(phase.cos() - T::one(), phase.sin())
}

/// `2πis`.
pub fn derivative_factor<T: Scalar>(s: usize) -> Complex<T> {
    Complex::new(T::zero(), T::TAU() * T::of(s as f64))
}

impl<T: Scalar> Add for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn add(self, rhs: Self) -> SpectralField<T> {
        assert_eq!(self.n_modes(), rhs.n_modes(), "cutoff mismatch");
        SpectralField { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl<T: Scalar> Sub for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn sub(self, rhs: Self) -> SpectralField<T> {
        assert_eq!(self.n_modes(), rhs.n_modes(), "cutoff mismatch");
        SpectralField { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl<T: Scalar> Mul<T> for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn mul(self, a: T) -> SpectralField<T> {
        self.scaled(a)
    }
}

impl<T: Scalar> Neg for &SpectralField<T> {
    type Output = SpectralField<T>;
    fn neg(self) -> SpectralField<T> {
        self.scaled(-T::one())
    }
}

/// Buffers and plan for repeated evaluation of the nonlinearity at one cutoff.
pub struct NonlinearWorkspace<T: Scalar> {
    n_modes: usize,
    active: usize,
    dealias: Dealias,
    tf: Transform<T>,
}

impl<T: Scalar> NonlinearWorkspace<T> {
    pub fn new(n_modes: usize, dealias: Dealias) -> Self {
        Self { n_modes, active: dealias.active_modes(n_modes), dealias, tf: Transform::new(dealias.grid(n_modes)) }
    }

    pub fn dealias(&self) -> Dealias {
        self.dealias
    }

    pub fn n_grid(&self) -> usize {
        self.tf.n
    }

    /// Writes `Π(u u_x)` into `out` and returns `max |u|` over the collocation grid.
    pub fn apply(&mut self, u: &[Complex<T>], out: &mut [Complex<T>]) -> T {
        debug_assert_eq!(u.len(), self.n_modes);
        debug_assert_eq!(out.len(), self.n_modes);
        self.tf.synthesize(u, self.active, |_, c| c);
        let mut umax = T::zero();
        for v in self.tf.grid_mut() {
            umax = umax.max(v.abs());
            *v = *v * *v;
        }
        self.tf.analyze();
        let pi = T::PI();
        for (i, o) in out.iter_mut().enumerate() {
            let s = i + 1;
            *o = if s <= self.active && 2 * s <= self.tf.n {
                // ½ ∂_x (u²) ↦ iπs · (u²)^_s
                self.tf.amplitude(s) * Complex::new(T::zero(), pi * T::of(s as f64))
            } else {
                Complex::default()
            };
        }
        umax
    }
}

/// Ratio `|h|_{β,r} / (|h|_{m,p}^θ |h|_q^{1-θ})` with `θ` from the Gagliardo–Nirenberg
/// exponent relation `β - 1/r = θ(m - 1/p) - (1 - θ)/q`.
///
/// Returns `None` when `θ` falls outside `[β/m, 1)`.
pub fn gagliardo_nirenberg_ratio<T: Scalar>(h: &SpectralField<T>, beta: u32, m: u32, p: T, q: T, r: T) -> Option<T> {
    let inv = |x: T| if x.is_infinite() { T::zero() } else { x.recip() };
    let (b, mm) = (T::of(beta as f64), T::of(m as f64));
    let theta = (b - inv(r) + inv(q)) / (mm - inv(p) + inv(q));
    if theta < b / mm || theta >= T::one() {
        return None;
    }
    let mut ev = GridEvaluator::for_quadrature(h.n_modes());
    let mut norm_pair = |order: u32, exp: T| {
        let d = grid_lp(ev.eval_with(h, |s| derivative_factor::<T>(s).powu(order)), exp);
        let base = grid_lp(ev.eval(h), exp);
        d + base
    };
    let lhs = norm_pair(beta, r);
    let top = norm_pair(m, p);
    let base = grid_lp(ev.eval(h), q);
    Some(lhs / (top.powf(theta) * base.powf(T::one() - theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    type F = SpectralField<f64>;

    fn random_field(n: usize, seed: u64) -> F {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        F::from_coeffs((0..n).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    /// Direct `O(n²)` synthesis, independent of the FFT path.
    fn dft_synthesis(f: &F, n_grid: usize) -> Vec<f64> {
        (0..n_grid)
            .map(|j| {
                let x = j as f64 / n_grid as f64;
                (1..=f.n_modes())
                    .map(|s| {
                        let c = f.coeffs()[s - 1];
                        let ph = 2.0 * PI * s as f64 * x;
                        2.0 * (c.re * ph.cos() - c.im * ph.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn dft_analysis(samples: &[f64], n_modes: usize) -> Vec<Complex<f64>> {
        let n = samples.len() as f64;
        (1..=n_modes)
            .map(|s| {
                samples.iter().enumerate().fold(Complex::default(), |acc, (j, v)| {
                    let ph = -2.0 * PI * s as f64 * j as f64 / n;
                    acc + Complex::new(ph.cos(), ph.sin()) * *v
                }) / n
            })
            .collect()
    }

    #[test]
    fn basis_mode_on_eight_points() {
        let e1 = F::basis(1, 1);
        assert_relative_eq!(e1.coeffs()[0].re, 1.0 / SQRT_2);
        let g = e1.to_physical(8).unwrap();
        for (j, v) in g.samples().iter().enumerate() {
            assert!((v - SQRT_2 * (2.0 * PI * j as f64 / 8.0).cos()).abs() < 1e-12);
        }
        assert!(F::zeros(4).to_physical(16).unwrap().samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grid_too_small_is_rejected() {
        assert!(matches!(F::zeros(8).to_physical(8), Err(Error::Resolution { .. })));
        assert!(matches!(F::zeros(2).to_physical(12), Err(Error::Resolution { .. })));
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        for n in 1..=8 {
            let f = random_field(n, n as u64);
            let fast = f.to_physical(32).unwrap();
            let slow = dft_synthesis(&f, 32);
            for (a, b) in fast.samples().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
            let back = fast.to_spectral(n).unwrap();
            let direct = dft_analysis(&slow, n);
            for (a, b) in back.coeffs().iter().zip(&direct) {
                assert!((a - b).norm() < 1e-12);
            }
            assert!((&back - &f).l2_norm() <= 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn sine_projects_onto_negative_mode() {
        let g = PhysicalField::from_fn(16, |x: f64| SQRT_2 * (2.0 * PI * x).sin()).unwrap();
        let f = g.to_spectral(4).unwrap();
        // û₁ = (u₁ - i u₋₁)/√2 with u₋₁ = 1.
        assert!((f.coeffs()[0] - Complex::new(0.0, -1.0 / SQRT_2)).norm() < 1e-14);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-14));
        assert!((f.real_coeff(-1) - 1.0).abs() < 1e-14);

        let c = PhysicalField::from_fn(16, |_| 3.5).unwrap().to_spectral(4).unwrap();
        assert!(c.l2_norm() < 1e-14);

        let two = PhysicalField::from_fn(32, |x: f64| SQRT_2 * (2.0 * PI * x).cos() + SQRT_2 * (4.0 * PI * x).sin())
            .unwrap()
            .to_spectral(8)
            .unwrap();
        let oracle = dft_analysis(
            &(0..32).map(|j| {
                let x = j as f64 / 32.0;
                SQRT_2 * (2.0 * PI * x).cos() + SQRT_2 * (4.0 * PI * x).sin()
            })
            .collect::<Vec<_>>(),
            8,
        );
        let nonzero: Vec<usize> = two.coeffs().iter().enumerate().filter(|(_, c)| c.norm() > 1e-12).map(|(i, _)| i + 1).collect();
        assert_eq!(nonzero, vec![1, 2]);
        for (a, b) in two.coeffs().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let e1 = F::basis(4, 1);
        assert_relative_eq!(e1.sobolev_norm(1.0), 2.0 * PI, max_relative = 1e-14);
        let f = &e1 + &F::basis(4, -2);
        assert_relative_eq!(f.sobolev_norm(1.0), 2.0 * PI * 5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(F::basis(4, 2).sobolev_norm(-1.0), 1.0 / (4.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn lp_norm_examples() {
        let e1 = F::basis(1, 1);
        assert_relative_eq!(e1.lp_norm(2.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(e1.lp_norm(f64::INFINITY), SQRT_2, max_relative = 1e-12);
        // midpoint-type error of |cos| on 1024 points
        assert_relative_eq!(e1.lp_norm(1.0), 2.0 * SQRT_2 / PI, max_relative = 1e-5);
    }

    #[test]
    fn nonlinear_term_product_to_sum() {
        // u = √2 sin 2πx: u u_x = 2π sin 4πx = π√2 e₋₂
        let u = F::basis(4, -1);
        let nl = u.nonlinear_term(Dealias::TwoThirds);
        let expected = F::basis(4, -2).scaled(PI * SQRT_2);
        assert!((&nl - &expected).l2_norm() < 1e-12);

        // u = e₁: u u_x = -2π sin 4πx = -π√2 e₋₂ (symbolic: ½∂ₓ(2cos²) = ½∂ₓ cos 4πx)
        for dealias in [Dealias::TwoThirds, Dealias::Exact, Dealias::Off] {
            let nl = F::basis(4, 1).nonlinear_term(dealias);
            let expected = F::basis(4, -2).scaled(-PI * SQRT_2);
            assert!((&nl - &expected).l2_norm() < 1e-12, "{dealias:?}");
        }
    }

    #[test]
    fn exact_nonlinearity_matches_symbolic_convolution() {
        // Π_N(u u_x)_s = Σ_{p+q=s} û_p (2πiq) û_q over |p|,|q| <= N.
        for n in 1..=4usize {
            let f = random_field(n, 40 + n as u64);
            let nl = f.nonlinear_term(Dealias::Exact);
            for s in 1..=n as i64 {
                let mut acc = Complex::default();
                for p in -(n as i64)..=n as i64 {
                    let q = s - p;
                    if p == 0 || q == 0 || q.unsigned_abs() as usize > n {
                        continue;
                    }
                    acc += f.coeff(p) * f.coeff(q) * Complex::new(0.0, 2.0 * PI * q as f64);
                }
                assert!((nl.coeff(s) - acc).norm() < 1e-12, "n={n}, s={s}");
            }
        }
    }

    #[test]
    fn shift_increment_examples() {
        let f = random_field(8, 3);
        assert!(f.shift_increment(0.0).l2_norm() < 1e-15);
        assert!(f.shift_increment(1.0).l2_norm() < 1e-13);
        for l in [0.1, 0.25, 0.37] {
            let d = F::basis(3, 1).shift_increment(l);
            assert_relative_eq!(d.inner(&d), 4.0 * (PI * l).sin().powi(2), max_relative = 1e-13);
        }
    }

    #[test]
    fn max_positive_slope_examples() {
        assert_relative_eq!(F::basis(4, -1).max_positive_slope(), 2.0 * PI * SQRT_2, max_relative = 1e-12);
        assert_eq!(F::zeros(4).max_positive_slope(), 0.0);
        // u = ½ - x projected: u_{-s} = √2/(2πs). The only positive slope sits in the Gibbs layer at the jump.
        for n in [16usize, 64, 256] {
            let saw = F::from_real_coeffs(n, |s| if s < 0 { SQRT_2 / (2.0 * PI * (-s) as f64) } else { 0.0 });
            // fine-grid oracle: the projected sawtooth rises only inside the jump layer
            let slope = saw.max_positive_slope();
            let fine = saw.to_physical(64 * n).unwrap();
            let h = 1.0 / (64 * n) as f64;
            let fd = fine.samples().windows(2).map(|w| (w[1] - w[0]) / h).fold(f64::MIN, f64::max);
            assert!(slope > 0.0);
            assert!((slope - fd).abs() / fd < 0.05);
        }
    }

    #[test]
    fn total_variation_of_cosine() {
        // |u_x|₁ of √2 cos 2πx = 4√2
        assert_relative_eq!(F::basis(2, 1).total_variation(), 4.0 * SQRT_2, max_relative = 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_is_identity(seed in 0u64..10_000, n in 1usize..64) {
            let f = random_field(n, seed);
            let g = f.to_physical(quadrature_grid(n)).unwrap();
            prop_assert!(g.mean().abs() < 1e-12);
            let back = g.to_spectral(n).unwrap();
            prop_assert!((&back - &f).l2_norm() <= 1e-12 * f.l2_norm());
        }

        #[test]
        fn parseval(seed in 0u64..10_000, n in 1usize..128) {
            let f = random_field(n, seed);
            let l2 = f.lp_norm(2.0);
            prop_assert!((l2 * l2 - f.inner(&f)).abs() <= 1e-10 * f.inner(&f));
            prop_assert!((f.sobolev_norm(0.0) - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
        }

        #[test]
        fn shift_increment_is_bounded(seed in 0u64..10_000, l in -2.0f64..2.0) {
            let f = random_field(16, seed);
            let d = f.shift_increment(l);
            prop_assert!(d.l2_norm() <= 2.0 * f.l2_norm() * (1.0 + 1e-12));
            let g = d.to_physical(64).unwrap();
            prop_assert!(g.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_orthogonality_over_many_fields() {
        for seed in 0..1000u64 {
            let n = 8 + (seed as usize % 57);
            let f = random_field(n, seed);
            for dealias in [Dealias::TwoThirds, Dealias::Exact] {
                let nl = f.nonlinear_term(dealias);
                let dot = nl.inner(&f);
                assert!(dot.abs() <= 1e-12 * nl.l2_norm() * f.l2_norm(), "seed {seed}: {dot}");
            }
        }
    }

    #[test]
    fn aliased_collocation_breaks_orthogonality() {
        let f = random_field(32, 11);
        let nl = f.nonlinear_term(Dealias::Off);
        assert!(nl.inner(&f).abs() > 1e-8 * nl.l2_norm() * f.l2_norm());
    }

    #[test]
    fn gagliardo_nirenberg_ratio_stays_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let n = rng.random_range(1..24usize);
            let decay: f64 = rng.random_range(0.0..3.0);
            let f = F::from_coeffs(
                (1..=n)
                    .map(|s| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) / (s as f64).powf(decay))
                    .collect(),
            );
            let ratio = gagliardo_nirenberg_ratio(&f, 1, 2, 2.0, 2.0, 2.0).unwrap();
            worst = worst.max(ratio);
        }
        assert!(worst.is_finite() && worst < 4.0, "worst ratio {worst}");
        assert!(gagliardo_nirenberg_ratio(&F::basis(2, 1), 1, 2, f64::INFINITY, f64::INFINITY, 1.0).is_none());
    }

    #[test]
    fn single_precision_round_trip() {
        let f = SpectralField::<f32>::basis(4, 3);
        let back = f.to_physical(16).unwrap().to_spectral(4).unwrap();
        assert!((&back - &f).l2_norm() < 1e-6);
    }
}
