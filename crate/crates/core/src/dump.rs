//! Binary trajectory dump.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"BURG1"            magic
//! u32                 format version (1)
//! u32                 kind: 0 viscous run, 1 entropy approximation
//! u64                 N
//! f64                 ν, or the certified L1 tolerance when kind = 1
//! f64                 B₀
//! u64                 seed
//! u64                 count of times
//! count × f64         output times
//! count × 2N × f64    per time: Re û_1, Im û_1, …, Re û_N, Im û_N
//! ```

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::Trajectory;
use crate::spectral::SpectralField;

pub const MAGIC: &[u8; 5] = b"BURG1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    Viscous,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub n_modes: usize,
    /// `ν` for viscous runs, the certified tolerance for entropy approximations.
    pub nu_or_tol: f64,
    pub b0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField<f64>>,
}

pub fn write_dump<T: Scalar>(mut w: impl Write, header: DumpHeader, times: &[f64], states: &[SpectralField<T>]) -> Result<()> {
    if times.len() != states.len() || states.iter().any(|u| u.n_modes() != header.n_modes) {
        return Err(Error::Mismatch("dump times and states disagree with the header".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.kind as u32).to_le_bytes())?;
    w.write_all(&(header.n_modes as u64).to_le_bytes())?;
    w.write_all(&header.nu_or_tol.to_le_bytes())?;
    w.write_all(&header.b0.to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    w.write_all(&(times.len() as u64).to_le_bytes())?;
    for t in times {
        w.write_all(&t.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * header.n_modes);
    for u in states {
        buf.clear();
        for c in u.coeffs() {
            buf.extend_from_slice(&c.re.to_f64_lossy().to_le_bytes());
            buf.extend_from_slice(&c.im.to_f64_lossy().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Dumps a viscous trajectory.
pub fn write_trajectory<T: Scalar>(w: impl Write, traj: &Trajectory<T>, b0: f64) -> Result<()> {
    let header = DumpHeader { kind: DumpKind::Viscous, n_modes: traj.config.n_modes, nu_or_tol: traj.config.nu.to_f64_lossy(), b0, seed: traj.seed };
    write_dump(w, header, &traj.times, &traj.states)
}

/// Dumps an entropy approximation; the `ν` field carries its certified tolerance.
pub fn write_entropy<T: Scalar>(w: impl Write, approx: &crate::inviscid::EntropyApproximation<T>, b0: f64) -> Result<()> {
    let traj = &approx.trajectory;
    let header = DumpHeader { kind: DumpKind::Entropy, n_modes: traj.config.n_modes, nu_or_tol: approx.tol, b0, seed: traj.seed };
    write_dump(w, header, &traj.times, &traj.states)
}

fn take<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_dump(mut r: impl Read) -> Result<Dump> {
    if &take::<5>(&mut r)? != MAGIC {
        return Err(Error::Io("not a trajectory dump".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(Error::Io(format!("unsupported dump version {version}")));
    }
    let kind = match u32::from_le_bytes(take(&mut r)?) {
        0 => DumpKind::Viscous,
        1 => DumpKind::Entropy,
        k => return Err(Error::Io(format!("unknown dump kind {k}"))),
    };
    let n_modes = u64::from_le_bytes(take(&mut r)?) as usize;
    let nu_or_tol = f64::from_le_bytes(take(&mut r)?);
    let b0 = f64::from_le_bytes(take(&mut r)?);
    let seed = u64::from_le_bytes(take(&mut r)?);
    let count = u64::from_le_bytes(take(&mut r)?) as usize;
    let times = (0..count).map(|_| Ok(f64::from_le_bytes(take(&mut r)?))).collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(count);
    let mut buf = vec![0u8; 16 * n_modes];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let coeffs = buf
            .chunks_exact(16)
            .map(|c| Complex::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect();
        states.push(SpectralField::from_coeffs(coeffs));
    }
    Ok(Dump { header: DumpHeader { kind, n_modes, nu_or_tol, b0, seed }, times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverConfig;

    #[test]
    fn roundtrip() {
        let cfg = SolverConfig::new(0.05, 4);
        let states = vec![SpectralField::<f64>::basis(4, 1), SpectralField::from_real_coeffs(4, |s| s as f64 * 0.5)];
        let traj = Trajectory { times: vec![0.0, 0.5], states, config: cfg, seed: 77 };
        let mut bytes = Vec::new();
        write_trajectory(&mut bytes, &traj, 8.0).unwrap();
        assert_eq!(bytes.len(), 5 + 4 + 4 + 8 * 5 + 8 * 2 + 2 * 8 * 8);
        assert_eq!(&bytes[..5], b"BURG1");
        let d = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(d.header, DumpHeader { kind: DumpKind::Viscous, n_modes: 4, nu_or_tol: 0.05, b0: 8.0, seed: 77 });
        assert_eq!(d.times, traj.times);
        assert_eq!(d.states, traj.states);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_dump(&b"BURG2xxxxxxxx"[..]).is_err());
        let mut bytes = Vec::new();
        let traj = Trajectory { times: vec![1.0], states: vec![SpectralField::<f64>::zeros(2)], config: SolverConfig::new(0.1, 2), seed: 1 };
        write_trajectory(&mut bytes, &traj, 8.0).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_dump(bytes.as_slice()).is_err());
    }
}
