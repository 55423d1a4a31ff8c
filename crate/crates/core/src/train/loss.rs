use rand::Rng;
use rand_distr::StandardNormal;

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::lowdisc::samplers::rng;
use crate::lowdisc::{PointSet, Provenance};
use crate::net::{loss_gradient, BatchOutput, DerivativeBundle, LossParts, NetworkParameters, Order, Seeds, Tape};
use crate::problems::PdeProblem;

/// `u = M(x) N(x)` with `M = prod_k x_k (1 - x_k)`, which vanishes on the
/// boundary of the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroDirichlet {
    dim: usize,
}

/// Builds the multiplier wrapper for `domain`, which must be `(0, 1)^d`.
pub fn enforce_zero_dirichlet(domain: &Domain) -> Result<ZeroDirichlet> {
    match domain {
        Domain::Box { lo, hi } if lo.iter().all(|&v| v == 0.0) && hi.iter().all(|&v| v == 1.0) => {
            Ok(ZeroDirichlet { dim: lo.len() })
        }
        _ => Err(Error::Unsupported("enforced Dirichlet conditions need the unit box domain".into())),
    }
}

impl ZeroDirichlet {
    /// `M(x)`, `dM/dx_k` and `d2M/dx_k2`.
    pub fn multiplier(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let f: Vec<f64> = x.iter().map(|v| v * (1.0 - v)).collect();
        let m = f.iter().product();
        let mut grad = vec![0.0; self.dim];
        let mut hess = vec![0.0; self.dim];
        for k in 0..self.dim {
            let others: f64 = f.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, v)| v).product();
            grad[k] = (1.0 - 2.0 * x[k]) * others;
            hess[k] = -2.0 * others;
        }
        (m, grad, hess)
    }

    /// Product-rule bundle of `M N` from the bundle of `N`.
    pub fn wrap(&self, x: &[f64], net: &DerivativeBundle) -> DerivativeBundle {
        let (m, gm, hm) = self.multiplier(x);
        DerivativeBundle {
            u: m * net.u,
            grad: (0..self.dim).map(|k| gm[k] * net.u + m * net.grad[k]).collect(),
            diag_hess: (0..self.dim)
                .map(|k| hm[k] * net.u + 2.0 * gm[k] * net.grad[k] + m * net.diag_hess[k])
                .collect(),
        }
    }
}

/// Multiplier values precomputed on a fixed batch.
struct MultiplierBatch {
    m: Vec<f64>,
    grad: Vec<f64>,
    lap: Vec<f64>,
}

impl MultiplierBatch {
    fn new(w: &ZeroDirichlet, points: &PointSet) -> Self {
        let mut out = Self { m: Vec::new(), grad: Vec::new(), lap: Vec::new() };
        for x in points.iter() {
            let (m, g, h) = w.multiplier(x);
            out.m.push(m);
            out.grad.extend(g);
            out.lap.push(h.iter().sum());
        }
        out
    }
}

/// Noisy samples of the exact solution at interior points.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub points: PointSet,
    pub values: Vec<f64>,
}

/// `n_obs` uniform random points of the domain with values
/// `u*(x) (1 + noise_scale xi)`, `xi` standard normal.
pub fn make_observations(problem: &PdeProblem, n_obs: usize, seed: u64, noise_scale: f64) -> Result<Observations> {
    if n_obs == 0 {
        return Err(Error::invalid("n_obs must be at least 1"));
    }
    let d = problem.dim();
    let mut rng = rng(seed);
    let unit: Vec<f64> = (0..n_obs * d).map(|_| rng.random::<f64>()).collect();
    let unit = PointSet::new(d, unit, Provenance::UniformRandom, Some(seed))?;
    let points = problem.domain.map_from_unit(&unit)?;
    let values = points
        .iter()
        .map(|x| {
            let xi: f64 = rng.sample(StandardNormal);
            problem.exact(x) * (1.0 + noise_scale * xi)
        })
        .collect();
    Ok(Observations { points, values })
}

/// `(e_inf, e_2)`: max and Euclidean norms of `exact - pred`, each relative
/// to the same norm of `exact`.
pub fn relative_errors(pred: &[f64], exact: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != exact.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "relative errors need equal non-empty lengths (got {} and {})",
            pred.len(),
            exact.len()
        )));
    }
    let (mut dmax, mut emax, mut dsq, mut esq) = (0f64, 0f64, 0.0, 0.0);
    for (p, e) in pred.iter().zip(exact) {
        let diff = e - p;
        dmax = dmax.max(diff.abs());
        emax = emax.max(e.abs());
        dsq += diff * diff;
        esq += e * e;
    }
    if emax == 0.0 || esq == 0.0 {
        return Err(Error::invalid("exact values are identically zero"));
    }
    Ok((dmax / emax, dsq.sqrt() / esq.sqrt()))
}

/// Loss weights: `alpha1 * interior_scale` on the mean squared residual,
/// `alpha2` on the mean squared boundary misfit, 1 on the data misfit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub interior_scale: f64,
}

/// Loss parts after weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub interior: f64,
    pub boundary: f64,
    pub data: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.interior + self.boundary + self.data
    }
}

/// The empirical PINN loss over fixed point batches.
pub struct LossAssembly<'a> {
    problem: &'a PdeProblem,
    interior: PointSet,
    source: Vec<f64>,
    boundary: Option<(PointSet, Vec<f64>)>,
    data: Option<Observations>,
    weights: LossWeights,
    wrap: Option<(ZeroDirichlet, MultiplierBatch, Option<MultiplierBatch>)>,
}

impl<'a> LossAssembly<'a> {
    /// `boundary` is ignored when `enforce` is set (the term is then zero).
    pub fn new(
        problem: &'a PdeProblem,
        interior: PointSet,
        boundary: Option<PointSet>,
        data: Option<Observations>,
        weights: LossWeights,
        enforce: bool,
    ) -> Result<Self> {
        let d = problem.dim();
        if interior.is_empty() || interior.dim() != d {
            return Err(Error::invalid(format!("interior batch must hold {d}-dimensional points")));
        }
        let boundary = if enforce { None } else { boundary };
        if !enforce && boundary.as_ref().is_none_or(|b| b.is_empty()) {
            return Err(Error::invalid("a boundary batch is required unless Dirichlet conditions are enforced"));
        }
        if let Some(b) = &boundary {
            if b.dim() != d {
                return Err(Error::invalid("boundary batch dimension does not match the problem"));
            }
        }
        if let Some(o) = &data {
            if o.points.dim() != d || o.points.len() != o.values.len() {
                return Err(Error::invalid("observation batch does not match the problem"));
            }
        }
        let wrap = if enforce {
            let w = enforce_zero_dirichlet(&problem.domain)?;
            let mi = MultiplierBatch::new(&w, &interior);
            let mo = data.as_ref().map(|o| MultiplierBatch::new(&w, &o.points));
            Some((w, mi, mo))
        } else {
            None
        };
        let source = interior.iter().map(|x| problem.source(x)).collect();
        let boundary = boundary.map(|b| {
            let g = b.iter().map(|x| problem.boundary_value(x)).collect();
            (b, g)
        });
        Ok(Self { problem, interior, source, boundary, data, weights, wrap })
    }

    pub fn wrapper(&self) -> Option<ZeroDirichlet> {
        self.wrap.as_ref().map(|w| w.0)
    }

    fn batches(&self) -> Vec<(&[f64], Order)> {
        let mut b = vec![(self.interior.as_flat(), Order::Laplacian)];
        if let Some((pts, _)) = &self.boundary {
            b.push((pts.as_flat(), Order::Value));
        }
        if let Some(o) = &self.data {
            b.push((o.points.as_flat(), Order::Value));
        }
        b
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, params: &NetworkParameters) -> Result<(f64, NetworkParameters)> {
        loss_gradient(params, &self.batches(), |outs| self.evaluate(outs, params.scalars(), true).map(|(_, p)| p))
    }

    pub fn terms(&self, params: &NetworkParameters) -> Result<LossTerms> {
        let tapes: Vec<Tape<'_>> = self.batches().into_iter().map(|(p, o)| Tape::forward(params, p, o)).collect();
        let outs: Vec<&BatchOutput> = tapes.iter().map(|t| t.output()).collect();
        Ok(self.evaluate(&outs, params.scalars(), false)?.0)
    }

    /// Loss terms from outputs supplied by the caller, in batch order
    /// (interior with at least [`Order::Laplacian`], then boundary, then
    /// data). Lets closed-form solutions stand in for the network.
    pub fn terms_from_outputs(&self, outs: &[&BatchOutput], scalars: &[f64]) -> Result<LossTerms> {
        if outs.len() != self.batches().len() || outs[0].lap.len() != outs[0].n {
            return Err(Error::invalid("outputs do not match the loss batches"));
        }
        Ok(self.evaluate(outs, scalars, false)?.0)
    }

    pub fn loss(&self, params: &NetworkParameters) -> Result<f64> {
        Ok(self.terms(params)?.total())
    }

    fn evaluate(&self, outs: &[&BatchOutput], scalars: &[f64], seeds: bool) -> Result<(LossTerms, LossParts)> {
        let LossWeights { alpha1, alpha2, interior_scale } = self.weights;
        let mut terms = LossTerms::default();
        let mut parts = LossParts { loss: 0.0, seeds: Vec::new(), scalar_grad: vec![0.0; scalars.len()] };
        let mut dscal = vec![0.0; scalars.len()];

        let out = outs[0];
        let (n, d) = (out.n, out.d);
        let wi = alpha1 * interior_scale / n as f64;
        let mut s = if seeds { Seeds::zeros(out) } else { Seeds::default() };
        for i in 0..n {
            let (u, lap) = match &self.wrap {
                None => (out.u[i], out.lap[i]),
                Some((_, m, _)) => {
                    let g = &m.grad[i * d..(i + 1) * d];
                    let cross: f64 = g.iter().zip(out.gradient(i)).map(|(a, b)| a * b).sum();
                    (m.m[i] * out.u[i], m.lap[i] * out.u[i] + 2.0 * cross + m.m[i] * out.lap[i])
                }
            };
            let (r, dr_du, dr_dlap) = self.problem.residual_terms(u, lap, self.source[i], scalars, &mut dscal);
            if !r.is_finite() {
                return Err(Error::NonFinite { context: "residual at interior point".into(), index: i });
            }
            terms.interior += wi * r * r;
            if seeds {
                let c = 2.0 * wi * r;
                let (du, dlap) = (c * dr_du, c * dr_dlap);
                for (g, ds) in parts.scalar_grad.iter_mut().zip(&dscal) {
                    *g += c * ds;
                }
                match &self.wrap {
                    None => {
                        s.du[i] = du;
                        s.dlap[i] = dlap;
                    }
                    Some((_, m, _)) => {
                        s.du[i] = du * m.m[i] + dlap * m.lap[i];
                        for k in 0..d {
                            s.dgrad[i * d + k] = 2.0 * dlap * m.grad[i * d + k];
                        }
                        s.dlap[i] = dlap * m.m[i];
                    }
                }
            }
        }
        parts.seeds.push(s);

        let mut next = 1;
        if let Some((_, g)) = &self.boundary {
            let out = outs[next];
            next += 1;
            let wb = alpha2 / out.n as f64;
            let mut s = if seeds { Seeds::zeros(out) } else { Seeds::default() };
            for i in 0..out.n {
                let b = out.u[i] - g[i];
                if !b.is_finite() {
                    return Err(Error::NonFinite { context: "boundary misfit at point".into(), index: i });
                }
                terms.boundary += wb * b * b;
                if seeds {
                    s.du[i] = 2.0 * wb * b;
                }
            }
            parts.seeds.push(s);
        }
        if let Some(obs) = &self.data {
            let out = outs[next];
            let wd = 1.0 / out.n as f64;
            let mut s = if seeds { Seeds::zeros(out) } else { Seeds::default() };
            let mult = self.wrap.as_ref().and_then(|w| w.2.as_ref());
            for i in 0..out.n {
                let scale = mult.map_or(1.0, |m| m.m[i]);
                let e = scale * out.u[i] - obs.values[i];
                if !e.is_finite() {
                    return Err(Error::NonFinite { context: "data misfit at observation".into(), index: i });
                }
                terms.data += wd * e * e;
                if seeds {
                    s.du[i] = 2.0 * wd * e * scale;
                }
            }
            parts.seeds.push(s);
        }
        parts.loss = terms.total();
        Ok((terms, parts))
    }
}

/// One-shot loss value: `alpha1 V mean r^2 + alpha2 mean b^2`.
pub fn assemble_loss(
    params: &NetworkParameters,
    problem: &PdeProblem,
    interior: &PointSet,
    boundary: &PointSet,
    weights: LossWeights,
) -> Result<f64> {
    LossAssembly::new(problem, interior.clone(), Some(boundary.clone()), None, weights, false)?.loss(params)
}
