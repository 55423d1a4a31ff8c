//! Computational domains and maps from the unit cube onto them.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowdisc::samplers::rng;
use crate::lowdisc::{PointSet, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// Axis-aligned box `prod_k (lo_k, hi_k)`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open unit disk centred at the origin.
    Disk,
}

impl Domain {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_bounds(&lo, &hi)?;
        Ok(Domain::Box { lo, hi })
    }

    pub fn unit_cube(d: usize) -> Self {
        Domain::Box { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Disk => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Domain::Disk => PI,
        }
    }

    /// Closed-domain membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| (*l..=*h).contains(v)),
            Domain::Disk => x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-15,
        }
    }

    /// Maps a unit-cube point set into the domain: affine for boxes, the
    /// area-preserving polar map for the disk.
    pub fn map_from_unit(&self, ps: &PointSet) -> Result<PointSet> {
        match self {
            Domain::Box { lo, hi } => map_affine(ps, lo, hi),
            Domain::Disk => map_disk(ps),
        }
    }
}

fn check_bounds(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(Error::invalid(format!(
            "box bounds must be non-empty and of equal length (got {} and {})",
            lo.len(),
            hi.len()
        )));
    }
    if let Some(k) = lo.iter().zip(hi).position(|(l, h)| !(l < h)) {
        return Err(Error::invalid(format!("box bound {k}: lo must be smaller than hi")));
    }
    Ok(())
}

/// `y_k = lo_k + (hi_k - lo_k) x_k`.
pub fn map_affine(ps: &PointSet, lo: &[f64], hi: &[f64]) -> Result<PointSet> {
    check_bounds(lo, hi)?;
    if ps.dim() != lo.len() {
        return Err(Error::invalid(format!(
            "point dimension {} does not match box dimension {}",
            ps.dim(),
            lo.len()
        )));
    }
    let d = ps.dim();
    let coords = ps
        .as_flat()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let k = i % d;
            lo[k] + (hi[k] - lo[k]) * x
        })
        .collect();
    PointSet::new(d, coords, ps.provenance(), ps.seed())
}

/// `(r, theta) -> (sqrt(r) cos 2 pi theta, sqrt(r) sin 2 pi theta)`: carries
/// the uniform measure on the square to the uniform measure on the disk.
pub fn map_disk(ps: &PointSet) -> Result<PointSet> {
    if ps.dim() != 2 {
        return Err(Error::invalid(format!("disk map needs 2-d points, got d = {}", ps.dim())));
    }
    let mut coords = Vec::with_capacity(ps.as_flat().len());
    for p in ps.iter() {
        let rho = p[0].sqrt();
        let (s, c) = (2.0 * PI * p[1]).sin_cos();
        coords.push(rho * c);
        coords.push(rho * s);
    }
    PointSet::new(2, coords, ps.provenance(), ps.seed())
}

/// `n_per_face` uniform-random points on each of the `2d` faces of the box,
/// face order `lo_1, hi_1, lo_2, hi_2, ...`.
pub fn boundary_box(lo: &[f64], hi: &[f64], n_per_face: usize, seed: u64) -> Result<PointSet> {
    check_bounds(lo, hi)?;
    if n_per_face == 0 {
        return Err(Error::invalid("n_per_face must be at least 1"));
    }
    let d = lo.len();
    let mut rng = rng(seed);
    let mut coords = Vec::with_capacity(2 * d * n_per_face * d);
    for k in 0..d {
        for fixed in [lo[k], hi[k]] {
            for _ in 0..n_per_face {
                for j in 0..d {
                    coords.push(if j == k { fixed } else { lo[j] + (hi[j] - lo[j]) * rng.random::<f64>() });
                }
            }
        }
    }
    PointSet::new(d, coords, Provenance::Mapped, Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircleMode {
    #[default]
    Equispaced,
    Random,
}

/// `n` points on the unit circle: angles `2 pi i / n`, or seeded uniform angles.
pub fn boundary_circle(n: usize, mode: CircleMode, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("circle boundary needs at least one point"));
    }
    let mut rng = rng(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = match mode {
            CircleMode::Equispaced => i as f64 / n as f64,
            CircleMode::Random => rng.random::<f64>(),
        };
        let (s, c) = (2.0 * PI * t).sin_cos();
        coords.push(c);
        coords.push(s);
    }
    let seed = (mode == CircleMode::Random).then_some(seed);
    PointSet::new(2, coords, Provenance::Mapped, seed)
}
