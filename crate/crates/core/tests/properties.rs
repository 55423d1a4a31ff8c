use proptest::prelude::*;

use glpinn::domains::{map_affine, map_disk};
use glpinn::lowdisc::{
    baseline_sample, lattice_points, p2_merit, star_discrepancy_exact, warnock_l2, BaselineKind, GeneratingVector,
    PointSet, Provenance,
};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `n` and a generating vector of distinct units mod `n` with `h_1 = 1`.
fn lattice_strategy() -> impl Strategy<Value = (u64, Vec<u64>)> {
    (3u64..200, 1usize..5).prop_flat_map(|(n, d)| {
        let units: Vec<u64> = (2..n).filter(|&a| gcd(a, n) == 1).collect();
        let rest = (d - 1).min(units.len());
        (Just(n), prop::sample::subsequence(units, rest).prop_shuffle())
            .prop_map(|(n, rest)| (n, std::iter::once(1).chain(rest).collect()))
    })
}

fn midpoints(n: u64) -> Vec<f64> {
    (1..=n).map(|q| (2 * q - 1) as f64 / (2 * n) as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With unit components every coordinate projection is the 1-d midpoint set.
    #[test]
    fn lattice_projections_are_midpoint_sets((n, h) in lattice_strategy()) {
        let ps = lattice_points(&GeneratingVector::new(n, h.clone()).unwrap());
        prop_assert_eq!(ps.len() as u64, n);
        for k in 0..h.len() {
            let mut col: Vec<f64> = ps.iter().map(|p| p[k]).collect();
            col.sort_by(f64::total_cmp);
            prop_assert_eq!(&col, &midpoints(n));
        }
    }

    #[test]
    fn p2_is_invariant_under_permutation_and_reflection((n, h) in lattice_strategy(), rot in 0usize..4, flip in 0usize..4) {
        let base = p2_merit(&GeneratingVector::new(n, h.clone()).unwrap());
        let mut g = h.clone();
        let k = flip % g.len();
        g[k] = n - g[k];
        prop_assume!(!g[..k].contains(&g[k]) && !g[k + 1..].contains(&g[k]));
        let r = rot % g.len();
        g.rotate_left(r);
        let other = p2_merit(&GeneratingVector::new(n, g).unwrap());
        prop_assert!((base - other).abs() <= 1e-10 * base.abs().max(1.0), "{base} vs {other}");
    }

    #[test]
    fn star_discrepancy_of_midpoint_sets(n in 1u64..300) {
        let ps = PointSet::unit_cube(1, midpoints(n), Provenance::Glp, None).unwrap();
        let star = star_discrepancy_exact(&ps).unwrap();
        prop_assert!((star - 0.5 / n as f64).abs() < 1e-15);
    }

    /// Against a direct `O(N^2 d)` evaluation of the pairwise form.
    #[test]
    fn warnock_matches_pairwise_sum(n in 1usize..40, d in 1usize..5, seed in 0u64..1000) {
        let ps = baseline_sample(BaselineKind::UniformRandom, n, d, seed).unwrap();
        let nf = n as f64;
        let mut sq = 3f64.powi(-(d as i32));
        for p in ps.iter() {
            sq -= 2f64.powi(1 - d as i32) / nf * p.iter().map(|x| 1.0 - x * x).product::<f64>();
            for q in ps.iter() {
                sq += p.iter().zip(q).map(|(a, b)| 1.0 - a.max(*b)).product::<f64>() / (nf * nf);
            }
        }
        let w = warnock_l2(&ps).unwrap();
        prop_assert!((w * w - sq).abs() < 1e-12, "{} vs {}", w * w, sq);
    }

    /// The fraction of mapped points inside a radius-r disk tracks its area share r^2.
    #[test]
    fn disk_map_preserves_area(r in 0.1f64..0.95, seed in 0u64..100) {
        let unit = baseline_sample(BaselineKind::UniformRandom, 4000, 2, seed).unwrap();
        let disk = map_disk(&unit).unwrap();
        prop_assert!(disk.iter().all(|p| p[0].hypot(p[1]) <= 1.0 + 1e-12));
        let inside = disk.iter().filter(|p| p[0].hypot(p[1]) < r).count() as f64 / 4000.0;
        // five standard deviations of a binomial proportion
        prop_assert!((inside - r * r).abs() < 5.0 * (r * r * (1.0 - r * r) / 4000.0).sqrt() + 1e-3);
    }

    #[test]
    fn affine_map_round_trips(seed in 0u64..1000, lo in -5.0f64..0.0, width in 0.1f64..10.0, d in 1usize..6) {
        let unit = baseline_sample(BaselineKind::UniformRandom, 20, d, seed).unwrap();
        let (lo_v, hi_v) = (vec![lo; d], vec![lo + width; d]);
        let mapped = map_affine(&unit, &lo_v, &hi_v).unwrap();
        for (p, u) in mapped.iter().zip(unit.iter()) {
            for (y, x) in p.iter().zip(u) {
                prop_assert!(*y >= lo && *y <= lo + width);
                prop_assert!(((y - lo) / width - x).abs() < 1e-12);
            }
        }
    }
}
