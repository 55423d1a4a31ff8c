use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::dot;

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

#[derive(Clone)]
struct Trial {
    t: f64,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// The state remembers the loss and gradient at the point it last returned,
/// so consecutive steps cost one line search each.
pub struct LbfgsState {
    /// Number of stored `(s, y)` pairs.
    pub history: usize,
    /// Initial trial step once curvature pairs exist.
    pub lr: f64,
    pub c1: f64,
    pub c2: f64,
    /// Loss evaluations allowed per line search.
    pub max_evals: usize,
    pairs: VecDeque<Pair>,
    cache: Option<(Vec<f64>, f64, Vec<f64>)>,
}

/// Summary of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsStep {
    pub loss_before: f64,
    pub loss: f64,
    pub step_length: f64,
    pub evals: usize,
}

impl LbfgsState {
    /// `history` pairs, `c1 = 1e-4`, `c2 = 0.9`, initial step 1, 25
    /// evaluations per line search.
    pub fn new(history: usize) -> Self {
        Self {
            history: history.max(1),
            lr: 1.0,
            c1: 1e-4,
            c2: 0.9,
            max_evals: 25,
            pairs: VecDeque::new(),
            cache: None,
        }
    }

    pub fn history_len(&self) -> usize {
        self.pairs.len()
    }

    pub fn clear_history(&mut self) {
        self.pairs.clear();
    }

    /// One quasi-Newton step on `params`; `eval` returns the loss and its
    /// gradient at a point and may report `f64::INFINITY` for points where
    /// the loss is not finite.
    ///
    /// A failed line search returns [`Error::LineSearch`] and leaves `params`
    /// and the curvature history untouched.
    pub fn step<F>(&mut self, params: &mut [f64], mut eval: F) -> Result<LbfgsStep>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let mut evals = 0;
        let (f0, g0) = match self.cache.take() {
            Some((x, f, g)) if x == params => (f, g),
            _ => {
                evals += 1;
                let (f, g) = eval(params)?;
                if !f.is_finite() {
                    return Err(Error::NonFinite { context: "lbfgs starting loss".into(), index: 0 });
                }
                if g.len() != params.len() {
                    return Err(Error::invalid("gradient length does not match parameters"));
                }
                (f, g)
            }
        };
        if g0.iter().all(|&v| v == 0.0) {
            self.cache = Some((params.to_vec(), f0, g0));
            return Ok(LbfgsStep { loss_before: f0, loss: f0, step_length: 0.0, evals });
        }

        let mut dir = self.direction(&g0);
        let mut dphi0 = dot(&g0, &dir);
        let mut t0 = self.lr;
        if self.pairs.is_empty() || !(dphi0 < 0.0) {
            dir = g0.iter().map(|v| -v).collect();
            dphi0 = dot(&g0, &dir);
            let l1: f64 = g0.iter().map(|v| v.abs()).sum();
            t0 = self.lr * (1.0 / l1).min(1.0);
        }

        let found = self.line_search(params, f0, dphi0, &dir, t0, &mut eval, &mut evals)?;
        let Some(trial) = found else {
            self.cache = Some((params.to_vec(), f0, g0));
            return Err(Error::LineSearch { evals });
        };

        let s: Vec<f64> = dir.iter().map(|d| trial.t * d).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g0).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > f64::EPSILON * yy {
            if self.pairs.len() == self.history {
                self.pairs.pop_front();
            }
            self.pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        for (p, d) in params.iter_mut().zip(&dir) {
            *p += trial.t * d;
        }
        self.cache = Some((params.to_vec(), trial.f, trial.g));
        Ok(LbfgsStep { loss_before: f0, loss: trial.f, step_length: trial.t, evals })
    }

    /// Two-loop recursion: `-H g` with the scaled identity as initial inverse
    /// Hessian.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.pairs.len()];
        for (i, p) in self.pairs.iter().enumerate().rev() {
            alpha[i] = p.rho * dot(&p.s, &q);
            for (qj, yj) in q.iter_mut().zip(&p.y) {
                *qj -= alpha[i] * yj;
            }
        }
        if let Some(p) = self.pairs.back() {
            let gamma = 1.0 / (p.rho * dot(&p.y, &p.y));
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (i, p) in self.pairs.iter().enumerate() {
            let beta = p.rho * dot(&p.y, &q);
            for (qj, sj) in q.iter_mut().zip(&p.s) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    /// Bracketing and zoom phases of a strong-Wolfe search. When the
    /// evaluation budget runs out, the best point with sufficient decrease is
    /// accepted; `None` means no such point was seen.
    #[allow(clippy::too_many_arguments)]
    fn line_search<F>(
        &self,
        x: &[f64],
        f0: f64,
        dphi0: f64,
        dir: &[f64],
        t0: f64,
        eval: &mut F,
        evals: &mut usize,
    ) -> Result<Option<Trial>>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let mut best: Option<Trial> = None;
        let mut budget = self.max_evals;
        let armijo = |tr: &Trial| tr.f.is_finite() && tr.f <= f0 + self.c1 * tr.t * dphi0;
        let curvature = |tr: &Trial| tr.dphi.abs() <= -self.c2 * dphi0;
        let mut probe = |t: f64, best: &mut Option<Trial>, budget: &mut usize| -> Result<Trial> {
            *budget -= 1;
            *evals += 1;
            let xt: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * d).collect();
            let (f, g) = eval(&xt)?;
            let f = if f.is_finite() { f } else { f64::INFINITY };
            let dphi = if f.is_finite() { dot(&g, dir) } else { f64::NAN };
            let tr = Trial { t, f, g, dphi };
            if armijo(&tr) && best.as_ref().is_none_or(|b| tr.f < b.f) {
                *best = Some(tr.clone());
            }
            Ok(tr)
        };

        let mut prev = Trial { t: 0.0, f: f0, g: Vec::new(), dphi: dphi0 };
        let mut t = t0;
        let mut first = true;
        let (mut lo, mut hi) = loop {
            if budget == 0 {
                return Ok(best);
            }
            let cur = probe(t, &mut best, &mut budget)?;
            if !armijo(&cur) || (!first && cur.f >= prev.f) {
                break (prev, cur);
            }
            if curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.dphi >= 0.0 {
                break (cur, prev);
            }
            first = false;
            prev = cur;
            t *= 2.0;
        };

        while budget > 0 {
            if (hi.t - lo.t).abs() <= 1e-16 * lo.t.abs().max(hi.t.abs()) {
                break;
            }
            let t = interpolate(&lo, &hi);
            let cur = probe(t, &mut best, &mut budget)?;
            if !armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.dphi * (hi.t - lo.t) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(best)
    }
}

/// Minimizer of the cubic through both end points, kept inside the middle
/// 80 % of the interval; bisection when the fit is unusable.
fn interpolate(a: &Trial, b: &Trial) -> f64 {
    let (lo, hi) = (a.t.min(b.t), a.t.max(b.t));
    let mid = 0.5 * (lo + hi);
    if !(a.f.is_finite() && b.f.is_finite() && a.dphi.is_finite() && b.dphi.is_finite()) {
        return mid;
    }
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.t - b.t);
    let disc = d1 * d1 - a.dphi * b.dphi;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b.t - a.t).signum() * disc.sqrt();
    let t = b.t - (b.t - a.t) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t >= lo + margin && t <= hi - margin {
        t
    } else {
        mid
    }
}
