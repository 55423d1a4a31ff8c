//! The PDE problem suite: operators, closed-form sources and exact solutions.
//!
//! Every residual is written as `A[u](x) - f(x)` and depends on the network
//! only through `u` and its Laplacian, so training evaluates a single summed
//! second-order stream.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::net::DerivativeBundle;

const PEAK_A: f64 = 1000.0;

/// Target value of `k^2` in the inverse Helmholtz problem.
pub const HELMHOLTZ_K2: f64 = 9.0;
/// Initial value of the trainable `k`.
pub const HELMHOLTZ_K0: f64 = 0.1;

/// Problem selector as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemSpec {
    OnePeak,
    TwoPeakDisk,
    HelmholtzInverse,
    HdLinear { d: usize, p: f64 },
    HdNonlinear { d: usize, k: u32 },
}

impl ProblemSpec {
    pub fn build(self) -> Result<PdeProblem> {
        match self {
            ProblemSpec::OnePeak => Ok(one_peak()),
            ProblemSpec::TwoPeakDisk => Ok(two_peak_disk()),
            ProblemSpec::HelmholtzInverse => Ok(helmholtz_inverse()),
            ProblemSpec::HdLinear { d, p } => hd_linear(d, p),
            ProblemSpec::HdNonlinear { d, k } => hd_nonlinear(d, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `-lap u = f`, `u = sum_c exp(-a |x - c|^2)`.
    Peaks { a: f64, centres: Vec<Vec<f64>> },
    /// `lap u + k^2 u = f`, `u = sin 2 pi x sin 2 pi y`.
    Helmholtz,
    /// `-lap u + u^3 = f`, `u = sin((k pi / d) sum x)`.
    Cubic { d: usize, k: f64 },
}

/// One PDE problem on its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub name: String,
    pub domain: Domain,
    pub needs_data_loss: bool,
    pub trainable_scalar_names: Vec<String>,
    kind: Kind,
}

/// Peak at the origin on `(-1, 1)^2`.
pub fn one_peak() -> PdeProblem {
    PdeProblem {
        name: "one_peak".into(),
        domain: Domain::Box { lo: vec![-1.0; 2], hi: vec![1.0; 2] },
        needs_data_loss: false,
        trainable_scalar_names: Vec::new(),
        kind: Kind::Peaks { a: PEAK_A, centres: vec![vec![0.0, 0.0]] },
    }
}

/// Peaks at `(0, 0.5)` and `(0, -0.5)` on the unit disk.
pub fn two_peak_disk() -> PdeProblem {
    PdeProblem {
        name: "two_peak_disk".into(),
        domain: Domain::Disk,
        needs_data_loss: false,
        trainable_scalar_names: Vec::new(),
        kind: Kind::Peaks { a: PEAK_A, centres: vec![vec![0.0, 0.5], vec![0.0, -0.5]] },
    }
}

/// Helmholtz equation on `(0, 1)^2` with unknown wave number `k`.
pub fn helmholtz_inverse() -> PdeProblem {
    PdeProblem {
        name: "helmholtz_inverse".into(),
        domain: Domain::unit_cube(2),
        needs_data_loss: true,
        trainable_scalar_names: vec!["k".into()],
        kind: Kind::Helmholtz,
    }
}

/// Poisson equation with a Gaussian solution on `(0, 1)^d`.
pub fn hd_linear(d: usize, p: f64) -> Result<PdeProblem> {
    if d == 0 || !(p > 0.0) {
        return Err(Error::invalid(format!("hd_linear needs d >= 1 and p > 0 (got d = {d}, p = {p})")));
    }
    Ok(PdeProblem {
        name: "hd_linear".into(),
        domain: Domain::unit_cube(d),
        needs_data_loss: false,
        trainable_scalar_names: Vec::new(),
        kind: Kind::Peaks { a: p, centres: vec![vec![0.0; d]] },
    })
}

/// Cubic semilinear equation on `(0, 1)^d`.
pub fn hd_nonlinear(d: usize, k: u32) -> Result<PdeProblem> {
    if d == 0 || k == 0 {
        return Err(Error::invalid(format!("hd_nonlinear needs d >= 1 and k >= 1 (got d = {d}, k = {k})")));
    }
    Ok(PdeProblem {
        name: "hd_nonlinear".into(),
        domain: Domain::unit_cube(d),
        needs_data_loss: false,
        trainable_scalar_names: Vec::new(),
        kind: Kind::Cubic { d, k: k as f64 },
    })
}

fn sq_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl PdeProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Initial values of the trainable scalars.
    pub fn initial_scalars(&self) -> Vec<f64> {
        match self.kind {
            Kind::Helmholtz => vec![HELMHOLTZ_K0],
            _ => Vec::new(),
        }
    }

    /// True values of the trainable scalars.
    pub fn true_scalars(&self) -> Vec<f64> {
        match self.kind {
            Kind::Helmholtz => vec![HELMHOLTZ_K2.sqrt()],
            _ => Vec::new(),
        }
    }

    /// `u*(x)`.
    pub fn exact(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Peaks { a, centres } => centres.iter().map(|c| (-a * sq_dist(x, c)).exp()).sum(),
            Kind::Helmholtz => (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin(),
            Kind::Cubic { d, k } => (k * PI / *d as f64 * x.iter().sum::<f64>()).sin(),
        }
    }

    /// `u*`, its gradient and its diagonal Hessian in closed form.
    pub fn exact_bundle(&self, x: &[f64]) -> DerivativeBundle {
        let d = x.len();
        let mut b = DerivativeBundle { u: 0.0, grad: vec![0.0; d], diag_hess: vec![0.0; d] };
        match &self.kind {
            Kind::Peaks { a, centres } => {
                for c in centres {
                    let e = (-a * sq_dist(x, c)).exp();
                    b.u += e;
                    for k in 0..d {
                        let t = x[k] - c[k];
                        b.grad[k] += -2.0 * a * t * e;
                        b.diag_hess[k] += (4.0 * a * a * t * t - 2.0 * a) * e;
                    }
                }
            }
            Kind::Helmholtz => {
                let w = 2.0 * PI;
                let (sx, cx) = (w * x[0]).sin_cos();
                let (sy, cy) = (w * x[1]).sin_cos();
                b.u = sx * sy;
                b.grad = vec![w * cx * sy, w * sx * cy];
                b.diag_hess = vec![-w * w * b.u; 2];
            }
            Kind::Cubic { d: dd, k } => {
                let c = k * PI / *dd as f64;
                let (s, co) = (c * x.iter().sum::<f64>()).sin_cos();
                b.u = s;
                b.grad = vec![c * co; d];
                b.diag_hess = vec![-c * c * s; d];
            }
        }
        b
    }

    /// Source term `f(x)`.
    pub fn source(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Peaks { a, centres } => {
                let d = x.len() as f64;
                centres
                    .iter()
                    .map(|c| {
                        let r2 = sq_dist(x, c);
                        (2.0 * a * d - 4.0 * a * a * r2) * (-a * r2).exp()
                    })
                    .sum()
            }
            Kind::Helmholtz => {
                (HELMHOLTZ_K2 - 8.0 * PI * PI) * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
            }
            Kind::Cubic { d, k } => {
                let s = (k * PI / *d as f64 * x.iter().sum::<f64>()).sin();
                k * k * PI * PI / *d as f64 * s + s * s * s
            }
        }
    }

    /// Dirichlet data `g(x)` on the boundary.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Helmholtz => 0.0,
            _ => self.exact(x),
        }
    }

    /// `A[u](x) - f(x)` for a full derivative bundle.
    pub fn residual(&self, b: &DerivativeBundle, x: &[f64], scalars: &[f64]) -> f64 {
        self.residual_terms(b.u, b.laplacian(), self.source(x), scalars, &mut [0.0; 1][..scalars.len()]).0
    }

    /// Residual from `u`, `lap u` and a precomputed `f`, with its partial
    /// derivatives `(r, dr/du, dr/dlap)`; `dscalars` receives `dr/ds` for each
    /// trainable scalar.
    pub fn residual_terms(&self, u: f64, lap: f64, f: f64, scalars: &[f64], dscalars: &mut [f64]) -> (f64, f64, f64) {
        match self.kind {
            Kind::Peaks { .. } => (-lap - f, 0.0, -1.0),
            Kind::Helmholtz => {
                let k = scalars[0];
                dscalars[0] = 2.0 * k * u;
                (lap + k * k * u - f, k * k, 1.0)
            }
            Kind::Cubic { .. } => (-lap + u * u * u - f, 3.0 * u * u, -1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_peak_values() {
        let p = one_peak();
        assert_eq!(p.exact(&[0.0, 0.0]), 1.0);
        assert_eq!(p.source(&[0.0, 0.0]), 4000.0);
        let x = [0.1, -0.2];
        assert!(p.residual(&p.exact_bundle(&x), &x, &[]).abs() < 1e-8);
        assert_eq!(p.domain.volume(), 4.0);
    }

    #[test]
    fn two_peak_values() {
        let p = two_peak_disk();
        assert_eq!(p.exact(&[0.0, 0.5]), 1.0 + (-1000f64).exp());
        assert_eq!(p.exact(&[0.0, 0.0]), 2.0 * (-250f64).exp());
        let x = [0.3, 0.4];
        assert!(p.residual(&p.exact_bundle(&x), &x, &[]).abs() < 1e-8);
    }

    #[test]
    fn helmholtz_values() {
        let p = helmholtz_inverse();
        assert_eq!(p.true_scalars()[0] * p.true_scalars()[0], 9.0);
        assert_eq!(p.initial_scalars(), vec![0.1]);
        assert!((p.source(&[0.25, 0.25]) - (9.0 - 8.0 * PI * PI)).abs() < 1e-12);
        assert!((p.source(&[0.25, 0.25]) + 69.9568).abs() < 1e-4);
        let x = [0.3, 0.7];
        assert!(p.residual(&p.exact_bundle(&x), &x, &[3.0]).abs() < 1e-8);
        assert!(p.residual(&p.exact_bundle(&x), &x, &[2.0]).abs() > 1e-3);
    }

    #[test]
    fn hd_values() {
        let p = hd_linear(5, 10.0).unwrap();
        assert_eq!(p.exact(&[0.0; 5]), 1.0);
        assert_eq!(p.source(&[0.0; 5]), 100.0);
        let q = hd_nonlinear(5, 4).unwrap();
        assert_eq!(q.source(&[0.0; 5]), 0.0);
        assert!(q.source(&[0.25; 5]).abs() < 1e-12);
        assert!(hd_linear(0, 1.0).is_err() && hd_linear(3, 0.0).is_err() && hd_nonlinear(3, 0).is_err());
    }

    #[test]
    fn cubic_term_scales_with_u() {
        // residual(c u*) = -c lap u* + c^3 u*^3 - f
        let p = hd_nonlinear(3, 2).unwrap();
        let x = [0.1, 0.5, 0.3];
        let b = p.exact_bundle(&x);
        for c in [0.0, 1.0, 2.0] {
            let scaled = DerivativeBundle {
                u: c * b.u,
                grad: b.grad.iter().map(|g| c * g).collect(),
                diag_hess: b.diag_hess.iter().map(|h| c * h).collect(),
            };
            let expect = -c * b.laplacian() + c.powi(3) * b.u.powi(3) - p.source(&x);
            assert!((p.residual(&scaled, &x, &[]) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_round_trip() {
        let s: ProblemSpec = serde_json::from_str(r#"{"name":"hd_linear","d":5,"p":10.0}"#).unwrap();
        assert_eq!(s, ProblemSpec::HdLinear { d: 5, p: 10.0 });
        assert_eq!(s.build().unwrap().dim(), 5);
        let s: ProblemSpec = serde_json::from_str(r#"{"name":"one_peak"}"#).unwrap();
        assert_eq!(s.build().unwrap().name, "one_peak");
    }
}
