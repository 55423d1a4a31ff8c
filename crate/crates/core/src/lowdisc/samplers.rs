//! Baseline samplers on the unit cube.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sobol::{sobol_points, SOBOL_MAX_DIM};
use super::{PointSet, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    #[serde(rename = "uniform")]
    UniformRandom,
    Lhs,
    Halton,
    Hammersley,
    Sobol,
}

impl BaselineKind {
    pub fn provenance(self) -> Provenance {
        match self {
            BaselineKind::UniformRandom => Provenance::UniformRandom,
            BaselineKind::Lhs => Provenance::Lhs,
            BaselineKind::Halton => Provenance::Halton,
            BaselineKind::Hammersley => Provenance::Hammersley,
            BaselineKind::Sobol => Provenance::Sobol,
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, BaselineKind::UniformRandom | BaselineKind::Lhs)
    }
}

/// The seeded 64-bit generator used for every random stream in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `n` points in `[0,1]^d` with the given construction. Deterministic
/// in `(kind, n, d, seed)`; the seed is ignored by the deterministic kinds.
pub fn baseline_sample(kind: BaselineKind, n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("sample size and dimension must be positive"));
    }
    let coords = match kind {
        BaselineKind::UniformRandom => uniform(n, d, seed),
        BaselineKind::Lhs => latin_hypercube(n, d, seed),
        BaselineKind::Halton => halton(n, d),
        BaselineKind::Hammersley => hammersley(n, d),
        BaselineKind::Sobol => {
            if d > SOBOL_MAX_DIM {
                return Err(Error::Unsupported(format!(
                    "Sobol points are available for d <= {SOBOL_MAX_DIM}, got d = {d}"
                )));
            }
            sobol_points(n, d)
        }
    };
    let seed = kind.is_random().then_some(seed);
    PointSet::new(d, coords, kind.provenance(), seed)
}

fn uniform(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n * d).map(|_| rng.random::<f64>()).collect()
}

fn latin_hypercube(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut out = vec![0.0; n * d];
    let mut cells: Vec<usize> = (0..n).collect();
    for k in 0..d {
        cells.shuffle(&mut rng);
        for (i, &c) in cells.iter().enumerate() {
            out[i * d + k] = (c as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

/// First `d` primes.
pub(crate) fn first_primes(d: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(d);
    let mut c = 2u64;
    while primes.len() < d {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points for indices `1..=n`, bases = first `d` primes.
fn halton(n: usize, d: usize) -> Vec<f64> {
    let bases = first_primes(d);
    let mut out = Vec::with_capacity(n * d);
    for i in 1..=n as u64 {
        out.extend(bases.iter().map(|&b| radical_inverse(i, b)));
    }
    out
}

/// Hammersley: `(i/n, phi_2(i), phi_3(i), ...)` for `i = 0..n`.
fn hammersley(n: usize, d: usize) -> Vec<f64> {
    let bases = first_primes(d.saturating_sub(1));
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n as u64 {
        out.push(i as f64 / n as f64);
        out.extend(bases.iter().map(|&b| radical_inverse(i, b)));
    }
    out
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Provenance>()? {
            Provenance::UniformRandom => Ok(BaselineKind::UniformRandom),
            Provenance::Lhs => Ok(BaselineKind::Lhs),
            Provenance::Halton => Ok(BaselineKind::Halton),
            Provenance::Hammersley => Ok(BaselineKind::Hammersley),
            Provenance::Sobol => Ok(BaselineKind::Sobol),
            other => Err(Error::invalid(format!("`{other}` is not a baseline sampler"))),
        }
    }
}
