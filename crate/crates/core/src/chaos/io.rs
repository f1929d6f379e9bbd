//! Coefficient export: a text table for inspection and a binary snapshot.
//!
//! Binary layout, little-endian: magic `BSDECOEF`, `T` (f64), `N`, `d`, `p`,
//! coefficient count (u64 each), `d0` (f64), then the coefficients (f64) in
//! canonical multi-index order.

use std::io::{Read, Write};
use std::sync::Arc;

use super::ChaosCoefficients;
use crate::basis::ChaosBasisSpec;
use crate::error::{Error, Result};
use crate::multiindex::IndexUniverse;

const MAGIC: &[u8; 8] = b"BSDECOEF";

/// Tab-separated `rank`, multi-index in slot notation, value. `d0` comes first
/// with an empty index.
pub fn write_coefficient_table(coeffs: &ChaosCoefficients, mut w: impl Write) -> Result<()> {
    let basis = coeffs.basis();
    writeln!(w, "rank\tindex\tvalue")?;
    writeln!(w, "d0\t\t{:.16e}", coeffs.d0())?;
    for (rank, (index, value)) in coeffs.universe().indices().iter().zip(coeffs.values()).enumerate() {
        writeln!(w, "{rank}\t{}\t{value:.16e}", index.notation(basis))?;
    }
    Ok(())
}

pub fn write_coefficients(coeffs: &ChaosCoefficients, mut w: impl Write) -> Result<()> {
    let b = coeffs.basis();
    let mut buf = Vec::with_capacity(56 + coeffs.values().len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&b.horizon().to_le_bytes());
    for v in [b.steps(), b.dim(), b.order(), coeffs.values().len()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&coeffs.d0().to_le_bytes());
    for c in coeffs.values() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a snapshot, re-enumerating the universe it refers to.
pub fn read_coefficients(mut r: impl Read) -> Result<ChaosCoefficients> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(Error::Config("not a chaos coefficient snapshot".into()));
    }
    let mut next = || -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let horizon = f64::from_le_bytes(next()?);
    let steps = u64::from_le_bytes(next()?) as usize;
    let dim = u64::from_le_bytes(next()?) as usize;
    let order = u64::from_le_bytes(next()?) as usize;
    let count = u64::from_le_bytes(next()?) as usize;
    let d0 = f64::from_le_bytes(next()?);
    let universe = Arc::new(IndexUniverse::enumerate(ChaosBasisSpec::new(horizon, steps, dim, order)?)?);
    if universe.len() != count {
        return Err(Error::DimensionMismatch(format!(
            "snapshot holds {count} coefficients, universe has {}",
            universe.len()
        )));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let coeffs = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ChaosCoefficients::new(universe, d0, coeffs)
}
