use serde::Serialize;

use crate::error::{Error, Result};

use super::{p2_merit, GeneratingVector, PointSet};

/// Uniformity summary of a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    /// Exact star discrepancy; only computed for `d <= 2`.
    pub star: Option<f64>,
    pub l2_star: f64,
    /// P_2 figure of merit, lattice sets only.
    pub p2: Option<f64>,
}

pub fn discrepancy_report(ps: &PointSet, gv: Option<&GeneratingVector>) -> Result<DiscrepancyReport> {
    let star = if ps.dim() <= 2 { Some(star_discrepancy_exact(ps)?) } else { None };
    Ok(DiscrepancyReport {
        star,
        l2_star: warnock_l2(ps)?,
        p2: gv.map(p2_merit),
    })
}

/// Exact star discrepancy `sup_g |#{x < g}/N - vol[0, g)|` for `d <= 2`.
///
/// Upper corners range over the grid spanned by the point coordinates and 1.
/// At each corner both the open box (strict `<`, points too few) and the
/// closed box (`<=`, points too many) are evaluated, which attains the
/// supremum in both directions. Runs in O(N^2) for `d = 2`.
pub fn star_discrepancy_exact(ps: &PointSet) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::invalid("star discrepancy of an empty point set"));
    }
    match ps.dim() {
        1 => Ok(star_1d(ps.as_flat())),
        2 => Ok(star_2d(ps)),
        d => Err(Error::Unsupported(format!(
            "exact star discrepancy is limited to d <= 2 (got d = {d}); use the L2-star discrepancy"
        ))),
    }
}

fn grid(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut g: Vec<f64> = values.chain(std::iter::once(1.0)).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn star_1d(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    let mut below = 0usize; // # points < g
    for g in grid(xs.iter().copied()) {
        while below < sorted.len() && sorted[below] < g {
            below += 1;
        }
        let mut at_most = below;
        while at_most < sorted.len() && sorted[at_most] <= g {
            at_most += 1;
        }
        worst = worst.max(g - below as f64 / n).max(at_most as f64 / n - g);
    }
    worst
}

fn star_2d(ps: &PointSet) -> f64 {
    let n = ps.len();
    let nf = n as f64;
    let gx = grid(ps.iter().map(|p| p[0]));
    let gy = grid(ps.iter().map(|p| p[1]));
    // y-grid slot of every point
    let slot: Vec<usize> = ps
        .iter()
        .map(|p| gy.binary_search_by(|v| v.total_cmp(&p[1])).expect("coordinate is on the grid"))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ps.point(a)[0].total_cmp(&ps.point(b)[0]));

    // per-slot counts of points with x < gx (open) and x <= gx (closed)
    let mut open = vec![0usize; gy.len()];
    let mut closed = vec![0usize; gy.len()];
    let (mut next_open, mut next_closed) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    for &x in &gx {
        while next_open < n && ps.point(order[next_open])[0] < x {
            open[slot[order[next_open]]] += 1;
            next_open += 1;
        }
        while next_closed < n && ps.point(order[next_closed])[0] <= x {
            closed[slot[order[next_closed]]] += 1;
            next_closed += 1;
        }
        let (mut open_below, mut closed_upto) = (0usize, 0usize);
        for (j, &y) in gy.iter().enumerate() {
            // open box [0,x) x [0,y): strictly smaller y slots
            let vol = x * y;
            worst = worst.max(vol - open_below as f64 / nf);
            closed_upto += closed[j];
            worst = worst.max(closed_upto as f64 / nf - vol);
            open_below += open[j];
        }
    }
    worst
}

/// Warnock's closed form for the L2-star discrepancy:
/// `D^2 = 3^-d - 2^(1-d)/N sum_i prod_k (1 - x_ik^2)
///        + 1/N^2 sum_ij prod_k (1 - max(x_ik, x_jk))`.
pub fn warnock_l2(ps: &PointSet) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::invalid("L2-star discrepancy of an empty point set"));
    }
    let d = ps.dim() as i32;
    let nf = ps.len() as f64;
    let first: f64 = 3f64.powi(-d);
    let second: f64 = ps.iter().map(|p| p.iter().map(|x| 1.0 - x * x).product::<f64>()).sum::<f64>()
        * 2f64.powi(1 - d)
        / nf;
    let mut third = 0.0;
    for (i, p) in ps.iter().enumerate() {
        // diagonal term once, off-diagonal pairs twice
        third += p.iter().map(|x| 1.0 - x).product::<f64>();
        for q in ps.iter().skip(i + 1) {
            third += 2.0 * p.iter().zip(q).map(|(a, b)| 1.0 - a.max(*b)).product::<f64>();
        }
    }
    third /= nf * nf;
    let sq = first - second + third;
    Ok(sq.max(0.0).sqrt())
}
