//! The Wiener forcing `ξ(t, x) = Σ_s b_s β_s(t) e_s(x)` and its sample paths.
//!
//! Brownian increments live on a dyadic time grid. A path is sampled at a base
//! level and refined by Brownian-bridge midpoint splits; every Gaussian is a
//! pure function of `(seed, mode, cell, level)`, read from a ChaCha8 stream
//! keyed by the seed and positioned by the cell index. The same seed therefore
//! drives runs with different viscosities, steps and cutoffs with the same
//! noise realization.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Per-mode amplitudes `b_s` of the forcing, finitely supported.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    amplitudes: BTreeMap<i64, f64>,
    homogeneous: bool,
}

impl Default for ForcingSpec {
    /// `b_s = 1` for `1 <= |s| <= 4`: `B₀ = 8`.
    fn default() -> Self {
        Self::uniform(4, 1.0).expect("default forcing is valid")
    }
}

impl ForcingSpec {
    /// Validates `B₀ > 0`, finite amplitudes, and `b_s = b_{-s}` when `homogeneous`.
    pub fn new(amplitudes: impl IntoIterator<Item = (i64, f64)>, homogeneous: bool) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (s, b) in amplitudes {
            if s == 0 {
                return Err(Error::Forcing("mode 0 cannot be forced: the force has zero mean".into()));
            }
            if !b.is_finite() {
                return Err(Error::Forcing(format!("amplitude b_{s} = {b} is not finite")));
            }
            if map.insert(s, b).is_some() {
                return Err(Error::Forcing(format!("mode {s} given twice")));
            }
        }
        let spec = Self { amplitudes: map, homogeneous };
        if !(spec.moment(0) > 0.0) {
            return Err(Error::Forcing("B₀ = Σ b_s² must be > 0".into()));
        }
        if homogeneous {
            for (&s, &b) in &spec.amplitudes {
                if spec.amplitude(-s) != b {
                    return Err(Error::Forcing(format!("homogeneous forcing needs b_{s} = b_{}", -s)));
                }
            }
        }
        Ok(spec)
    }

    /// Homogeneous forcing with `b_s = b` for `1 <= |s| <= k`.
    pub fn uniform(k: i64, b: f64) -> Result<Self> {
        Self::new((1..=k).flat_map(|s| [(s, b), (-s, b)]), true)
    }

    pub fn amplitude(&self, s: i64) -> f64 {
        self.amplitudes.get(&s).copied().unwrap_or(0.0)
    }

    pub fn amplitudes(&self) -> &BTreeMap<i64, f64> {
        &self.amplitudes
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    /// Modes with a nonzero amplitude, ascending.
    pub fn support(&self) -> Vec<i64> {
        self.amplitudes.iter().filter(|(_, b)| **b != 0.0).map(|(s, _)| *s).collect()
    }

    /// Largest `|s|` with `b_s ≠ 0`.
    pub fn max_mode(&self) -> usize {
        self.support().iter().map(|s| s.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// `B_m = Σ |2πs|^{2m} b_s²`.
    pub fn moment(&self, m: u32) -> f64 {
        self.amplitudes.iter().map(|(s, b)| (TAU * *s as f64).powi(2 * m as i32) * b * b).sum()
    }
}

/// Standard normal from two 64-bit words (Box–Muller, fixed consumption).
fn box_muller(a: u64, b: u64) -> f64 {
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn zigzag(s: i64) -> u64 {
    ((s << 1) ^ (s >> 63)) as u64
}

/// Which independent family a Gaussian belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Family {
    /// Base-level increments and bridge midpoints of `β_s`.
    Brownian,
    /// Fresh draws for the exact Ornstein–Uhlenbeck update.
    Ou,
}

/// Sequential reader of `N(0, 1)` draws indexed by cell.
struct GaussStream {
    rng: ChaCha8Rng,
    next: u64,
}

impl GaussStream {
    fn new(seed: u64, s: i64, level: u32, family: Family) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tag = match family {
            Family::Brownian => 0u64,
            Family::Ou => 1u64,
        };
        rng.set_stream((zigzag(s) << 8) | ((level as u64) << 1) | tag);
        Self { rng, next: 0 }
    }

    fn at(&mut self, index: u64) -> f64 {
        if index != self.next {
            self.rng.set_word_pos(index as u128 * 4);
        }
        self.next = index + 1;
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        box_muller(a, b)
    }
}

/// Dyadic Brownian paths `β_s` on `[0, horizon]` for every forced mode.
///
/// Cells at level `L` have width `horizon · 2^{-L}`. Increments are computed on
/// demand; [`NoisePath::increments`] materializes one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    horizon: f64,
    base_level: u32,
    level: u32,
    modes: Vec<i64>,
    amplitudes: Vec<f64>,
}

impl NoisePath {
    /// Path whose base cells have width `horizon · 2^{-level}`.
    pub fn sample(spec: &ForcingSpec, seed: u64, horizon: f64, level: u32) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("noise horizon must be positive, got {horizon}")));
        }
        if level > 40 {
            return Err(Error::Config(format!("noise level {level} too deep")));
        }
        let modes = spec.support();
        let amplitudes = modes.iter().map(|s| spec.amplitude(*s)).collect();
        Ok(Self { seed, horizon, base_level: level, level, modes, amplitudes })
    }

    /// Splits every cell by a bridge midpoint keyed to the new level.
    pub fn refine(&self) -> Self {
        Self { level: self.level + 1, ..self.clone() }
    }

    /// Refines (never coarsens) to at least `level`.
    pub fn refined_to(&self, level: u32) -> Self {
        Self { level: self.level.max(level), ..self.clone() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn base_level(&self) -> u32 {
        self.base_level
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Forced modes, ascending.
    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    /// `b_s` of the forced mode with index `mode`.
    pub fn amplitude(&self, mode: usize) -> f64 {
        self.amplitudes[mode]
    }

    pub fn cells(&self) -> u64 {
        1u64 << self.level
    }

    pub fn cell_width(&self) -> f64 {
        cell_width(self.horizon, self.level)
    }

    pub fn cursor(&self) -> NoiseCursor<'_> {
        NoiseCursor::new(self)
    }

    /// `Δβ_s` over every cell of the current level; all zeros for an unforced mode.
    pub fn increments(&self, s: i64) -> Vec<f64> {
        let mut cur = self.cursor();
        match self.mode_index(s) {
            Some(i) => (0..self.cells()).map(|c| cur.cell(i, self.level, c)).collect(),
            None => vec![0.0; self.cells() as usize],
        }
    }

    pub fn mode_index(&self, s: i64) -> Option<usize> {
        self.modes.binary_search(&s).ok()
    }

    /// `β_s(t1) - β_s(t0)`; both ends must lie on the current grid.
    pub fn increment(&self, s: i64, t0: f64, t1: f64) -> Result<f64> {
        let w = self.cell_width();
        let misaligned = || Error::Alignment { t0, t1, cell: w };
        let c0 = grid_index(t0, w).ok_or_else(misaligned)?;
        let c1 = grid_index(t1, w).ok_or_else(misaligned)?;
        if c1 < c0 || c1 > self.cells() {
            return Err(misaligned());
        }
        let Some(i) = self.mode_index(s) else { return Ok(0.0) };
        let mut cur = self.cursor();
        Ok((c0..c1).map(|c| cur.cell(i, self.level, c)).sum())
    }
}

pub(crate) fn cell_width(horizon: f64, level: u32) -> f64 {
    horizon / (1u64 << level) as f64
}

/// Index `t / w` when `t` sits on the grid (relative tolerance 1e-9).
pub(crate) fn grid_index(t: f64, w: f64) -> Option<u64> {
    let x = t / w;
    let r = x.round();
    if r < 0.0 || (x - r).abs() > 1e-9 * r.max(1.0) {
        return None;
    }
    Some(r as u64)
}

/// Cached evaluator of cell increments for sequential access.
///
/// For each mode and requested level it keeps the bridge subtree of the
/// current base cell, so stepping through time costs about one Gaussian per
/// cell and mode.
pub struct NoiseCursor<'a> {
    path: &'a NoisePath,
    streams: HashMap<(usize, u32, Family), GaussStream>,
    subtrees: HashMap<(usize, u32), (u64, Vec<f64>)>,
}

impl<'a> NoiseCursor<'a> {
    fn new(path: &'a NoisePath) -> Self {
        Self { path, streams: HashMap::new(), subtrees: HashMap::new() }
    }

    pub fn path(&self) -> &NoisePath {
        self.path
    }

    fn normal(&mut self, mode: usize, level: u32, index: u64, family: Family) -> f64 {
        let (seed, s) = (self.path.seed, self.path.modes[mode]);
        self.streams
            .entry((mode, level, family))
            .or_insert_with(|| GaussStream::new(seed, s, level, family))
            .at(index)
    }

    /// Fresh `N(0,1)` keyed by `(seed, mode, cell, level)` in the OU family.
    pub(crate) fn fresh_normal(&mut self, mode: usize, level: u32, cell: u64) -> f64 {
        self.normal(mode, level, cell, Family::Ou)
    }

    /// `Δβ` of cell `cell` at `level` for the mode with index `mode`.
    ///
    /// Levels coarser than the base are sums of base cells; finer levels come
    /// from bridge refinement.
    pub fn cell(&mut self, mode: usize, level: u32, cell: u64) -> f64 {
        let base = self.path.base_level;
        if level < base {
            let k = 1u64 << (base - level);
            return (cell * k..(cell + 1) * k).map(|c| self.cell(mode, base, c)).sum();
        }
        let depth = level - base;
        let b = cell >> depth;
        let hit = matches!(self.subtrees.get(&(mode, level)), Some((cb, _)) if *cb == b);
        if !hit {
            let tree = self.subtree(mode, b, level);
            self.subtrees.insert((mode, level), (b, tree));
        }
        let (_, tree) = &self.subtrees[&(mode, level)];
        tree[(cell - (b << depth)) as usize]
    }

    /// Sum of cells `[c0, c1)` at `level`.
    pub fn sum(&mut self, mode: usize, level: u32, c0: u64, c1: u64) -> f64 {
        (c0..c1).map(|c| self.cell(mode, level, c)).sum()
    }

    fn subtree(&mut self, mode: usize, b: u64, level: u32) -> Vec<f64> {
        let base = self.path.base_level;
        let horizon = self.path.horizon;
        let mut vals = vec![cell_width(horizon, base).sqrt() * self.normal(mode, base, b, Family::Brownian)];
        for lev in base + 1..=level {
            let half_sd = 0.5 * cell_width(horizon, lev - 1).sqrt();
            let first_parent = b << (lev - 1 - base);
            let mut next = Vec::with_capacity(vals.len() * 2);
            for (i, parent) in vals.iter().enumerate() {
                let left = 0.5 * parent + half_sd * self.normal(mode, lev, first_parent + i as u64, Family::Brownian);
                next.push(left);
                next.push(parent - left);
            }
            vals = next;
        }
        vals
    }
}
