use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

use super::{PointSet, Provenance};

/// `(n; h_1, ..., h_d)`: the seed of a rank-1 lattice point set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneratingVector {
    n: u64,
    h: Vec<u64>,
}

impl GeneratingVector {
    /// Validates and builds a generating vector.
    ///
    /// Requires `1 <= h_j < n`, `gcd(h_j, n) = 1`, pairwise distinct
    /// multipliers and `d < n`. The one-point set `(1; 1)` is accepted as a
    /// degenerate case.
    pub fn new(n: u64, h: Vec<u64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidGeneratingVector(msg));
        if n == 0 {
            return bad("n must be positive".into());
        }
        if h.is_empty() {
            return bad("at least one multiplier is required".into());
        }
        if n >= 1 << 62 {
            return bad(format!("n = {n} is too large for 64-bit residue arithmetic"));
        }
        if n == 1 {
            if h == [1] {
                return Ok(Self { n, h });
            }
            return bad("n = 1 only admits the vector (1; 1)".into());
        }
        let d = h.len() as u64;
        if d >= n {
            return bad(format!("dimension d = {d} must be smaller than n = {n}"));
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0 || hj >= n {
                return bad(format!("multiplier h_{} = {hj} must lie in [1, {n})", j + 1));
            }
            if gcd(hj, n) != 1 {
                return bad(format!("multiplier h_{} = {hj} is not coprime to n = {n}", j + 1));
            }
            if h[..j].contains(&hj) {
                return bad(format!("multiplier {hj} appears more than once"));
            }
        }
        Ok(Self { n, h })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn h(&self) -> &[u64] {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }
}

impl fmt::Display for GeneratingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", self.n)?;
        for (j, h) in self.h.iter().enumerate() {
            let sep = if j == 0 { " " } else { ", " };
            write!(f, "{sep}{h}")?;
        }
        f.write_str(")")
    }
}

/// Lattice point set of `gv`: `x_ij = (2 q_ij - 1) / (2n)` with
/// `q_ij = i h_j mod n` taken in `1..=n` (residue 0 maps to `n`), `i = 1..=n`.
pub fn lattice_points(gv: &GeneratingVector) -> PointSet {
    let n = gv.n;
    let d = gv.dim();
    let two_n = 2.0 * n as f64;
    let mut coords = Vec::with_capacity(n as usize * d);
    // running residues i*h_j mod n
    let mut q: Vec<u64> = vec![0; d];
    for _ in 1..=n {
        for (qj, &hj) in q.iter_mut().zip(&gv.h) {
            *qj += hj;
            if *qj >= n {
                *qj -= n;
            }
            let r = if *qj == 0 { n } else { *qj };
            coords.push((2 * r - 1) as f64 / two_n);
        }
    }
    PointSet::new(d, coords, Provenance::Glp, None).expect("lattice dimension is positive")
}

/// Fibonacci lattice `(F_k; 1, F_{k-1})` for `n = F_k`, `k >= 4`.
pub fn fibonacci_gv(n: u64) -> Result<GeneratingVector> {
    // F_1 = F_2 = 1
    let (mut prev, mut cur, mut k) = (1u64, 1u64, 2u32);
    while cur < n {
        let next = prev
            .checked_add(cur)
            .ok_or_else(|| Error::InvalidGeneratingVector(format!("{n} is not a Fibonacci number")))?;
        prev = cur;
        cur = next;
        k += 1;
    }
    if cur != n {
        return Err(Error::InvalidGeneratingVector(format!("{n} is not a Fibonacci number")));
    }
    if k < 4 {
        return Err(Error::InvalidGeneratingVector(format!(
            "Fibonacci lattice needs n = F_k with k >= 4, got n = {n}"
        )));
    }
    GeneratingVector::new(n, vec![1, prev])
}

pub(crate) fn b2(t: f64) -> f64 {
    t * t - t + 1.0 / 6.0
}

/// Bernoulli-polynomial figure of merit
/// `P_2 = -1 + (1/n) sum_{i<n} prod_k (1 + 2 pi^2 B_2({i h_k / n}))`.
pub fn p2_merit(gv: &GeneratingVector) -> f64 {
    p2_of(gv.n, &gv.h)
}

fn p2_of(n: u64, h: &[u64]) -> f64 {
    let c = 2.0 * PI * PI;
    let nf = n as f64;
    let mut q: Vec<u64> = vec![0; h.len()];
    let mut sum = 0.0;
    for _ in 0..n {
        let mut prod = 1.0;
        for (qj, &hj) in q.iter_mut().zip(h) {
            prod *= 1.0 + c * b2(*qj as f64 / nf);
            *qj += hj;
            if *qj >= n {
                *qj -= n;
            }
        }
        sum += prod;
    }
    sum / nf - 1.0
}

/// Relative tolerance under which two merits count as tied. Symmetric
/// candidates (`a` and `n - a`, or `a` and its inverse in d = 2) have equal
/// merits that differ only by summation-order round-off.
const TIE_RTOL: f64 = 1e-12;

/// Korobov search: returns `(n; 1, a, a^2, ..., a^{d-1}) mod n` for the unit
/// `a` minimising [`p2_merit`]; the smallest `a` wins ties.
///
/// With `restrict_primitive_roots` the candidates are the primitive roots
/// mod `n`; otherwise every unit in `2..n`. Candidates whose powers repeat
/// are skipped.
pub fn korobov_search(n: u64, d: usize, restrict_primitive_roots: bool) -> Result<GeneratingVector> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if d as u64 >= n {
        return Err(Error::InvalidGeneratingVector(format!(
            "dimension d = {d} must be smaller than n = {n}"
        )));
    }
    if restrict_primitive_roots && !has_primitive_root(n) {
        return Err(Error::InvalidGeneratingVector(format!(
            "n = {n} has no primitive roots; widen the search to all units"
        )));
    }
    if d == 1 {
        return GeneratingVector::new(n, vec![1]);
    }
    let candidates: Vec<u64> = if restrict_primitive_roots {
        primitive_roots(n)
    } else {
        (2..n).filter(|&a| gcd(a, n) == 1).collect()
    };

    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut h = Vec::with_capacity(d);
    for a in candidates {
        h.clear();
        let mut p = 1u64;
        for _ in 0..d {
            h.push(p);
            p = mul_mod(p, a, n);
        }
        if !all_distinct(&h) {
            continue;
        }
        let merit = p2_of(n, &h);
        if best.as_ref().is_none_or(|(m, _)| merit < *m - TIE_RTOL * m.abs().max(1.0)) {
            best = Some((merit, h.clone()));
        }
    }
    let (_, h) = best.ok_or_else(|| {
        Error::InvalidGeneratingVector(format!(
            "no Korobov candidate for n = {n} yields {d} distinct multipliers"
        ))
    })?;
    GeneratingVector::new(n, h)
}

fn all_distinct(h: &[u64]) -> bool {
    let mut sorted = h.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Distinct prime factors in increasing order.
fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn euler_phi(n: u64) -> u64 {
    prime_factors(n).iter().fold(n, |acc, p| acc / p * (p - 1))
}

/// True for `n` in {2, 4, p^l, 2 p^l} with `p` an odd prime.
pub fn has_primitive_root(n: u64) -> bool {
    match n {
        0 | 1 => false,
        2 | 4 => true,
        _ => {
            let odd = if n % 2 == 0 { n / 2 } else { n };
            if odd % 2 == 0 {
                return false;
            }
            prime_factors(odd).len() == 1
        }
    }
}

pub fn is_primitive_root(a: u64, n: u64) -> bool {
    if n < 2 || gcd(a, n) != 1 {
        return false;
    }
    let phi = euler_phi(n);
    prime_factors(phi).iter().all(|q| pow_mod(a, phi / q, n) != 1)
}

/// All primitive roots mod `n` in increasing order (empty if none exist).
pub fn primitive_roots(n: u64) -> Vec<u64> {
    if !has_primitive_root(n) {
        return Vec::new();
    }
    let phi = euler_phi(n);
    let factors = prime_factors(phi);
    (1..n)
        .filter(|&a| gcd(a, n) == 1 && factors.iter().all(|q| pow_mod(a, phi / q, n) != 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(ps: &PointSet) -> Vec<Vec<f64>> {
        ps.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn five_point_lattice() {
        let gv = GeneratingVector::new(5, vec![1, 2]).unwrap();
        let pts = coords(&lattice_points(&gv));
        let expect = [[0.1, 0.3], [0.3, 0.7], [0.5, 0.1], [0.7, 0.5], [0.9, 0.9]];
        assert_eq!(pts.len(), 5);
        for (p, e) in pts.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn residue_zero_maps_to_n() {
        let gv = GeneratingVector::new(8, vec![1, 5]).unwrap();
        let pts = coords(&lattice_points(&gv));
        let expect = [
            [0.0625, 0.5625],
            [0.1875, 0.1875],
            [0.3125, 0.8125],
            [0.4375, 0.4375],
            [0.5625, 0.0625],
            [0.6875, 0.6875],
            [0.8125, 0.3125],
            [0.9375, 0.9375],
        ];
        for (p, e) in pts.iter().zip(expect) {
            assert_eq!(p.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn single_point() {
        let gv = GeneratingVector::new(1, vec![1]).unwrap();
        assert_eq!(lattice_points(&gv).as_flat(), &[0.5]);
    }

    #[test]
    fn validation_names_the_invariant() {
        let msg = |r: Result<GeneratingVector>| r.unwrap_err().to_string();
        assert!(msg(GeneratingVector::new(5, vec![2, 2])).contains("more than once"));
        assert!(msg(GeneratingVector::new(6, vec![1, 2])).contains("coprime"));
        assert!(msg(GeneratingVector::new(3, vec![1, 2, 4])).contains("smaller than n"));
        assert!(msg(GeneratingVector::new(5, vec![5])).contains("[1, 5)"));
        assert!(GeneratingVector::new(1, vec![2]).is_err());
    }

    #[test]
    fn fibonacci_vectors() {
        assert_eq!(fibonacci_gv(10946).unwrap().h(), &[1, 6765]);
        assert_eq!(fibonacci_gv(5).unwrap().h(), &[1, 3]);
        assert_eq!(fibonacci_gv(3).unwrap().h(), &[1, 2]);
        assert!(fibonacci_gv(2).is_err());
        assert!(fibonacci_gv(1).is_err());
        assert!(fibonacci_gv(100).is_err());
    }

    #[test]
    fn p2_closed_forms() {
        let one = GeneratingVector::new(1, vec![1]).unwrap();
        assert!((p2_merit(&one) - PI * PI / 3.0).abs() < 1e-12);
        let two = GeneratingVector::new(2, vec![1]).unwrap();
        assert!((p2_merit(&two) - PI * PI / 12.0).abs() < 1e-12);
    }

    #[test]
    fn primitive_root_facts() {
        assert_eq!(primitive_roots(7), vec![3, 5]);
        assert_eq!(primitive_roots(2), vec![1]);
        assert_eq!(primitive_roots(9), vec![2, 5]);
        assert!(primitive_roots(8).is_empty());
        assert!(has_primitive_root(10007));
        assert!(!has_primitive_root(10946));
        assert!(!has_primitive_root(11215));
        assert!(has_primitive_root(2 * 3001));
        assert_eq!(euler_phi(10946), 5040);
        assert!(is_primitive_root(5, 6));
    }

    #[test]
    fn korobov_edge_cases() {
        assert_eq!(korobov_search(2, 1, false).unwrap().h(), &[1]);
        assert!(korobov_search(5, 5, false).is_err());
        assert!(korobov_search(6, 5, true).is_err());
        assert!(korobov_search(10946, 2, true).is_err());
        assert!(korobov_search(10946, 2, false).is_ok());
    }
}
