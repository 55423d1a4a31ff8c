//! Integration-error rates of point sets on the unit cube.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lowdisc::{fibonacci_gv, korobov_search, lattice_points, sample_unit_cube, PointSet, Provenance};

/// Equal-weight average of `f` over the points.
pub fn qmc_integrate<F: Fn(&[f64]) -> f64>(f: F, ps: &PointSet) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::invalid("cannot integrate over an empty point set"));
    }
    Ok(ps.iter().map(f).sum::<f64>() / ps.len() as f64)
}

/// Tensor midpoint rule with `m` nodes per axis on `[0, 1]^d`, `d <= 3`.
pub fn midpoint_quadrature<F: Fn(&[f64]) -> f64>(f: F, d: usize, m: usize) -> Result<f64> {
    if !(1..=3).contains(&d) || m == 0 {
        return Err(Error::invalid(format!("midpoint quadrature supports 1 <= d <= 3 and m >= 1 (got d = {d}, m = {m})")));
    }
    let node = |i: usize| (i as f64 + 0.5) / m as f64;
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..m.pow(d as u32) {
        let mut r = i;
        for xk in x.iter_mut() {
            *xk = node(r % m);
            r /= m;
        }
        total += f(&x);
    }
    Ok(total / m.pow(d as u32) as f64)
}

/// `exp(-10 |x - 1/2|^2)`, the smooth bump used for rate sweeps.
pub fn gaussian_bump(x: &[f64]) -> f64 {
    (-10.0 * x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>()).exp()
}

/// Mean absolute error of one sampler at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sampler: Provenance,
    pub n: usize,
    pub seed_count: usize,
    pub mean_abs_err: f64,
}

/// Least-squares fit of `log err = intercept + slope log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub sampler: Provenance,
    /// `None` when some error is zero or fewer than two sizes were run.
    pub slope: Option<f64>,
    /// Root mean square residual of the fit.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSweepResult {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SlopeFit>,
}

impl RateSweepResult {
    pub fn slope(&self, sampler: Provenance) -> Option<f64> {
        self.fits.iter().find(|f| f.sampler == sampler).and_then(|f| f.slope)
    }

    /// `sampler,n,seed_count,mean_abs_err,slope`; the slope is repeated on
    /// every row of its sampler and left empty when undefined.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sampler,n,seed_count,mean_abs_err,slope")?;
        for r in &self.rows {
            let slope = self.slope(r.sampler).map(|s| format!("{s:e}")).unwrap_or_default();
            writeln!(out, "{},{},{},{:e},{}", r.sampler, r.n, r.seed_count, r.mean_abs_err, slope)?;
        }
        Ok(())
    }
}

fn sweep_points(sampler: Provenance, n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if sampler != Provenance::Glp {
        return sample_unit_cube(sampler, n, d, seed, None);
    }
    let gv = match d {
        2 => fibonacci_gv(n as u64).map_err(|_| Error::invalid(format!("GLP sweep in 2-d needs Fibonacci n, got {n}")))?,
        _ => korobov_search(n as u64, d, false)?,
    };
    Ok(lattice_points(&gv))
}

/// Ordinary least squares on `(log n, log err)`.
pub fn fit_slope(ns: &[usize], errs: &[f64]) -> (Option<f64>, Option<f64>) {
    if ns.len() < 2 || errs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return (None, None);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return (None, None);
    }
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (Some(slope), Some((rss / k).sqrt()))
}

/// Mean absolute integration error of each sampler at each `n` (averaged over
/// `seeds` for random samplers, a single run for deterministic ones) and the
/// fitted log-log slope per sampler.
pub fn rate_sweep<F: Fn(&[f64]) -> f64>(
    f: F,
    exact: f64,
    d: usize,
    samplers: &[Provenance],
    ns: &[usize],
    seeds: &[u64],
) -> Result<RateSweepResult> {
    if ns.is_empty() || seeds.is_empty() || samplers.is_empty() {
        return Err(Error::invalid("rate sweep needs samplers, sizes and seeds"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep sizes must be strictly increasing"));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &sampler in samplers {
        let random = matches!(sampler, Provenance::UniformRandom | Provenance::Lhs);
        let run_seeds = if random { seeds } else { &seeds[..1] };
        let mut errs = Vec::with_capacity(ns.len());
        for &n in ns {
            let mut total = 0.0;
            for &seed in run_seeds {
                let ps = sweep_points(sampler, n, d, seed)?;
                total += (qmc_integrate(&f, &ps)? - exact).abs();
            }
            let mean_abs_err = total / run_seeds.len() as f64;
            errs.push(mean_abs_err);
            rows.push(SweepRow { sampler, n, seed_count: run_seeds.len(), mean_abs_err });
        }
        let (slope, residual) = fit_slope(ns, &errs);
        fits.push(SlopeFit { sampler, slope, residual });
    }
    Ok(RateSweepResult { rows, fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrate_examples() {
        let mid = lattice_points(&crate::lowdisc::GeneratingVector::new(5, vec![1]).unwrap());
        assert!((qmc_integrate(|x| x[0], &mid).unwrap() - 0.5).abs() < 1e-15);
        let one = PointSet::new(1, vec![0.5], Provenance::Glp, None).unwrap();
        assert_eq!(qmc_integrate(|x| x[0], &one).unwrap(), 0.5);
        let u = sample_unit_cube(Provenance::UniformRandom, 17, 3, 1, None).unwrap();
        assert_eq!(qmc_integrate(|_| 2.5, &u).unwrap(), 2.5);
        let empty = PointSet::new(2, vec![], Provenance::Glp, None).unwrap();
        assert!(qmc_integrate(|_| 1.0, &empty).is_err());
    }

    #[test]
    fn midpoint_rule_is_exact_for_multilinear() {
        assert!((midpoint_quadrature(|x| x[0] * x[1] * x[2], 3, 7).unwrap() - 0.125).abs() < 1e-15);
        assert!(midpoint_quadrature(|_| 1.0, 4, 2).is_err());
    }

    #[test]
    fn constant_integrand_has_no_slope() {
        let r = rate_sweep(|_| 1.0, 1.0, 2, &[Provenance::Glp, Provenance::UniformRandom], &[55, 89, 144], &[1, 2])
            .unwrap();
        assert!(r.rows.iter().all(|row| row.mean_abs_err == 0.0));
        assert_eq!(r.slope(Provenance::Glp), None);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("sampler,n,seed_count,mean_abs_err,slope\nglp,55,1,0e0,\n"), "{csv}");
        assert!(csv.contains("uniform,144,2,0e0,\n"));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let ns = [10, 100, 1000];
        let (s, res) = fit_slope(&ns, &[0.1, 0.01, 0.001]);
        assert!((s.unwrap() + 1.0).abs() < 1e-12 && res.unwrap() < 1e-12);
    }

    #[test]
    fn glp_sweep_rejects_non_fibonacci_sizes() {
        assert!(rate_sweep(gaussian_bump, 0.0, 2, &[Provenance::Glp], &[100], &[0]).is_err());
        assert!(rate_sweep(gaussian_bump, 0.0, 2, &[Provenance::Glp], &[89, 55], &[0]).is_err());
    }
}
