//! Low-discrepancy point sets on the unit cube.
//!
//! Good lattice point (GLP) sets are built from a [`GeneratingVector`] with
//! [`lattice_points`]; baseline samplers (uniform random, LHS, Halton,
//! Hammersley, Sobol) live in [`samplers`]. Uniformity is measured by the
//! exact star discrepancy (d <= 2) and the Warnock L2-star discrepancy.

mod discrepancy;
pub mod io;
mod lattice;
pub mod samplers;
mod sobol;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use discrepancy::{discrepancy_report, star_discrepancy_exact, warnock_l2, DiscrepancyReport};
pub use lattice::{
    euler_phi, fibonacci_gv, has_primitive_root, is_primitive_root, korobov_search,
    lattice_points, p2_merit, primitive_roots, GeneratingVector,
};
pub use samplers::{baseline_sample, BaselineKind};
pub use sobol::SOBOL_MAX_DIM;

use io::VectorCache;

/// Which construction produced a [`PointSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Glp,
    #[serde(rename = "uniform")]
    UniformRandom,
    Lhs,
    Halton,
    Hammersley,
    Sobol,
    /// Points produced by a domain map or boundary sampler.
    Mapped,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Glp => "glp",
            Provenance::UniformRandom => "uniform",
            Provenance::Lhs => "lhs",
            Provenance::Halton => "halton",
            Provenance::Hammersley => "hammersley",
            Provenance::Sobol => "sobol",
            Provenance::Mapped => "mapped",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "glp" => Provenance::Glp,
            "uniform" | "ur" | "random" => Provenance::UniformRandom,
            "lhs" => Provenance::Lhs,
            "halton" => Provenance::Halton,
            "hammersley" => Provenance::Hammersley,
            "sobol" => Provenance::Sobol,
            "mapped" => Provenance::Mapped,
            other => return Err(Error::invalid(format!("unknown sampler `{other}`"))),
        })
    }
}

/// An ordered list of `dim`-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not form {dim}-dimensional points",
                coords.len()
            )));
        }
        Ok(Self { dim, coords, provenance, seed })
    }

    /// Builds a set of unit-cube points, rejecting coordinates outside [0, 1].
    pub fn unit_cube(dim: usize, coords: Vec<f64>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        if let Some(pos) = coords.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!(
                "coordinate {} of point {} lies outside [0, 1]",
                pos % dim.max(1),
                pos / dim.max(1)
            )));
        }
        Self::new(dim, coords, provenance, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinates.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    /// Concatenates point sets of equal dimension. Provenance and seed are
    /// taken from the first set.
    pub fn concat(sets: &[PointSet]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::invalid("cannot concatenate zero point sets"))?;
        let mut coords = Vec::with_capacity(sets.iter().map(|s| s.coords.len()).sum());
        for s in sets {
            if s.dim != first.dim {
                return Err(Error::invalid("dimension mismatch in concat"));
            }
            coords.extend_from_slice(&s.coords);
        }
        Self::new(first.dim, coords, first.provenance, first.seed)
    }
}

/// Generating vector for an `n`-point GLP set without searching: `(n; 1)`
/// in one dimension, the Fibonacci vector when `d = 2` and `n` is a Fibonacci
/// number, otherwise an entry of `cache`.
pub fn resolve_glp_vector(n: u64, d: usize, cache: Option<&VectorCache>) -> Result<GeneratingVector> {
    if d == 1 {
        return GeneratingVector::new(n, vec![1]);
    }
    if d == 2 {
        if let Ok(gv) = fibonacci_gv(n) {
            return Ok(gv);
        }
    }
    if let Some(gv) = cache.and_then(|c| c.get(n, d)) {
        return Ok(gv.clone());
    }
    Err(Error::InvalidGeneratingVector(format!(
        "no generating vector known for n = {n}, d = {d}; run `glpinn search --n {n} --dim {d}` to add one to the cache"
    )))
}

/// `n` points in `[0, 1]^d` from the named construction. `seed` only affects
/// the random samplers.
pub fn sample_unit_cube(kind: Provenance, n: usize, d: usize, seed: u64, cache: Option<&VectorCache>) -> Result<PointSet> {
    let baseline = match kind {
        Provenance::Glp => return Ok(lattice_points(&resolve_glp_vector(n as u64, d, cache)?)),
        Provenance::Mapped => return Err(Error::invalid("`mapped` is not a sampler")),
        Provenance::UniformRandom => BaselineKind::UniformRandom,
        Provenance::Lhs => BaselineKind::Lhs,
        Provenance::Halton => BaselineKind::Halton,
        Provenance::Hammersley => BaselineKind::Hammersley,
        Provenance::Sobol => BaselineKind::Sobol,
    };
    baseline_sample(baseline, n, d, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glp_vector_resolution() {
        assert_eq!(resolve_glp_vector(10946, 2, None).unwrap().h(), &[1, 6765]);
        assert_eq!(resolve_glp_vector(7, 1, None).unwrap().h(), &[1]);
        assert!(resolve_glp_vector(1000, 2, None).is_err());
        let cache = VectorCache::parse("# n d h\n1000 2 1 233\n", std::path::Path::new("mem")).unwrap();
        assert_eq!(resolve_glp_vector(1000, 2, Some(&cache)).unwrap().h(), &[1, 233]);
        assert!(resolve_glp_vector(1000, 3, Some(&cache)).is_err());
    }

    #[test]
    fn sampler_dispatch() {
        let g = sample_unit_cube(Provenance::Glp, 5, 1, 0, None).unwrap();
        assert_eq!(g.as_flat(), &[0.1, 0.3, 0.5, 0.7, 0.9]);
        let u = sample_unit_cube(Provenance::UniformRandom, 10, 3, 4, None).unwrap();
        assert_eq!((u.len(), u.seed()), (10, Some(4)));
        assert!(sample_unit_cube(Provenance::Mapped, 10, 3, 4, None).is_err());
    }
}
