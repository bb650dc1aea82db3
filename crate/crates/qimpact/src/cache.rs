//! On-disk reuse of eigenbases, keyed by potential, grid and state count.

use std::fs;
use std::path::{Path, PathBuf};

use qimpact_core::hamiltonian::DEFAULT_STENCIL_ORDER;
use qimpact_core::lattice::{Grid, PotentialSpec};
use qimpact_core::spectral::{eigensolve, EigenBasis, SpectralError};

use crate::artifacts::sha256_hex;

const MAGIC: &[u8; 8] = b"QIBASIS1";

pub fn basis_key(spec: &PotentialSpec, grid: &Grid, n_states: usize) -> String {
    let spec = spec.unforced();
    let text = format!(
        "{}|{:016x}|{:016x}|{}|{}|{}",
        serde_json::to_string(&spec).expect("potential serializes"),
        grid.x_min().to_bits(),
        grid.x_max().to_bits(),
        grid.n(),
        n_states,
        DEFAULT_STENCIL_ORDER
    );
    sha256_hex(text.as_bytes())[..32].to_string()
}

fn path_for(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("basis-{key}.bin"))
}

fn encode(basis: &EigenBasis) -> Vec<u8> {
    let g = basis.grid;
    let mut out = Vec::with_capacity(64 + 8 * basis.n_states() * (g.n() + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(basis.n_states() as u64).to_le_bytes());
    out.extend_from_slice(&(g.n() as u64).to_le_bytes());
    for v in [g.x_min(), g.x_max(), basis.hbar, basis.m].iter().chain(&basis.energies) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for phi in &basis.states {
        for v in phi {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8]) -> Option<EigenBasis> {
    let body = bytes.strip_prefix(MAGIC)?;
    let word = |i: usize| -> Option<[u8; 8]> { body.get(8 * i..8 * i + 8)?.try_into().ok() };
    let n_states = u64::from_le_bytes(word(0)?) as usize;
    let n = u64::from_le_bytes(word(1)?) as usize;
    if body.len() != 8 * (6 + n_states + n_states * n) {
        return None;
    }
    let f = |i: usize| f64::from_le_bytes(word(i).expect("length checked"));
    let grid = Grid::new(f(2), f(3), n).ok()?;
    let energies = (0..n_states).map(|j| f(6 + j)).collect();
    let states = (0..n_states).map(|s| (0..n).map(|i| f(6 + n_states + s * n + i)).collect()).collect();
    Some(EigenBasis { grid, energies, states, hbar: f(4), m: f(5) })
}

/// Solves for the basis, or loads it from `dir` when a matching entry exists.
pub fn cached_eigensolve(dir: Option<&Path>, spec: &PotentialSpec, grid: &Grid, n_states: usize) -> Result<EigenBasis, SpectralError> {
    let Some(dir) = dir else {
        return eigensolve(spec, grid, n_states);
    };
    let key = basis_key(spec, grid, n_states);
    let path = path_for(dir, &key);
    if let Some(basis) = fs::read(&path).ok().and_then(|b| decode(&b)) {
        if basis.grid == *grid {
            return Ok(basis);
        }
    }
    let basis = eigensolve(spec, grid, n_states)?;
    // best effort: a failed write only costs a later recomputation
    if fs::create_dir_all(dir).is_ok() {
        let tmp = dir.join(format!("basis-{key}.{}.tmp", std::process::id()));
        if fs::write(&tmp, encode(&basis)).is_ok() {
            let _ = fs::rename(&tmp, &path);
        }
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let spec = PotentialSpec::hard_wall(2.0);
        let grid = Grid::new(-6.0, 2.0, 161).unwrap();
        let basis = eigensolve(&spec, &grid, 6).unwrap();
        assert_eq!(decode(&encode(&basis)), Some(basis.clone()));
        let dir = tempfile::tempdir().unwrap();
        let first = cached_eigensolve(Some(dir.path()), &spec, &grid, 6).unwrap();
        let second = cached_eigensolve(Some(dir.path()), &spec, &grid, 6).unwrap();
        assert_eq!(first, basis);
        assert_eq!(second, basis);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(decode(b"QIBASIS1short").is_none());
    }
}
