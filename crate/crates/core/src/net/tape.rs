//! Batched second-order forward passes and their reverse sweep.
//!
//! For a batch of `n` points in `R^d` the forward pass carries several
//! streams through every layer, stacked row-wise into one matrix so each
//! layer costs a single GEMM:
//!
//! * stream `0`: values,
//! * streams `1..=d`: first directional derivatives along `e_k`,
//! * then either `d` second directional derivatives along `e_k`
//!   ([`Order::Second`]) or their sum, the Laplacian ([`Order::Laplacian`]).
//!
//! Affine maps act on every stream (the bias only on values); an activation
//! `a = f(z)` maps `(z, z', z'')` to `(f(z), f'(z) z', f''(z) z'^2 + f'(z) z'')`,
//! and the Laplacian stream to `f''(z) sum_k z_k'^2 + f'(z) lap z`. The
//! reverse sweep differentiates exactly this computation, so the parameter
//! gradient of any loss built from the outputs is exact.

use std::cell::RefCell;

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

use super::NetworkParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Values only.
    Value,
    /// Values, input gradient and Laplacian (`d + 2` streams).
    Laplacian,
    /// Values, input gradient and diagonal input Hessian (`2d + 1` streams).
    Second,
}

impl Order {
    fn streams(self, d: usize) -> usize {
        match self {
            Order::Value => 1,
            Order::Laplacian => d + 2,
            Order::Second => 2 * d + 1,
        }
    }
}

/// `u`, `du/dx_k` and `d2u/dx_k2` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub u: f64,
    pub grad: Vec<f64>,
    pub diag_hess: Vec<f64>,
}

impl DerivativeBundle {
    pub fn laplacian(&self) -> f64 {
        self.diag_hess.iter().sum()
    }
}

/// Network outputs over a batch. `grad` and `diag_hess` are `n x d`
/// row-major; `lap` has one entry per point. Fields an order does not
/// compute are empty (`diag_hess` is only filled by [`Order::Second`]).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub n: usize,
    pub d: usize,
    pub order: Order,
    pub u: Vec<f64>,
    pub grad: Vec<f64>,
    pub lap: Vec<f64>,
    pub diag_hess: Vec<f64>,
}

impl BatchOutput {
    /// Full bundle at point `i`; requires [`Order::Second`] for the Hessian.
    pub fn bundle(&self, i: usize) -> DerivativeBundle {
        let row = |v: &[f64]| if v.is_empty() { Vec::new() } else { v[i * self.d..(i + 1) * self.d].to_vec() };
        DerivativeBundle { u: self.u[i], grad: row(&self.grad), diag_hess: row(&self.diag_hess) }
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.grad[i * self.d..(i + 1) * self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.grad).chain(&self.lap).chain(&self.diag_hess).all(|v| v.is_finite())
    }
}

/// Loss adjoints of one batch's outputs, laid out like [`BatchOutput`]:
/// `dL/du`, `dL/d(du/dx_k)`, `dL/d(lap u)` and `dL/d(d2u/dx_k2)`. Unused
/// fields may be left empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Seeds {
    pub du: Vec<f64>,
    pub dgrad: Vec<f64>,
    pub dlap: Vec<f64>,
    pub dhess: Vec<f64>,
}

impl Seeds {
    pub fn zeros(out: &BatchOutput) -> Self {
        let nd = out.n * out.d;
        match out.order {
            Order::Value => Self { du: vec![0.0; out.n], ..Default::default() },
            Order::Laplacian => Self {
                du: vec![0.0; out.n],
                dgrad: vec![0.0; nd],
                dlap: vec![0.0; out.n],
                dhess: Vec::new(),
            },
            Order::Second => Self {
                du: vec![0.0; out.n],
                dgrad: vec![0.0; nd],
                dlap: vec![0.0; out.n],
                dhess: vec![0.0; nd],
            },
        }
    }
}

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// Zeroed scratch buffer, recycled across tapes on the same thread.
fn take(len: usize) -> Vec<f64> {
    let mut v = POOL.with(|p| p.borrow_mut().pop()).unwrap_or_default();
    v.clear();
    v.resize(len, 0.0);
    v
}

fn give(v: Vec<f64>) {
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < 64 {
            p.push(v);
        }
    });
}

fn view(buf: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), buf).expect("buffer shape")
}

fn view_mut(buf: &mut [f64], rows: usize, cols: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((rows, cols), buf).expect("buffer shape")
}

struct Hidden {
    /// Stacked layer input, `S n x fan_in`.
    input: Vec<f64>,
    /// Stacked pre-activation, `S n x width` (empty for value-only tapes).
    z: Vec<f64>,
    width: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
    /// `sum_k z_k'^2` per element, Laplacian tapes only.
    q: Vec<f64>,
}

/// Recorded forward pass over one batch.
pub struct Tape<'p> {
    params: &'p NetworkParameters,
    n: usize,
    d: usize,
    order: Order,
    hidden: Vec<Hidden>,
    last_input: Vec<f64>,
    output: BatchOutput,
}

impl Drop for Tape<'_> {
    fn drop(&mut self) {
        for h in self.hidden.drain(..) {
            for v in [h.input, h.z, h.s1, h.s2, h.s3, h.q] {
                if v.capacity() > 0 {
                    give(v);
                }
            }
        }
        give(std::mem::take(&mut self.last_input));
    }
}

impl<'p> Tape<'p> {
    /// Runs the network on `points` (`n x d`, row-major).
    pub fn forward(params: &'p NetworkParameters, points: &[f64], order: Order) -> Self {
        let arch = params.architecture();
        let d = arch.input_dim;
        assert_eq!(points.len() % d, 0, "point buffer is not a multiple of the input dimension");
        let n = points.len() / d;
        let s = order.streams(d);
        let act = arch.activation;

        let mut a = take(s * n * d);
        a[..n * d].copy_from_slice(points);
        if order != Order::Value {
            for k in 0..d {
                for i in 0..n {
                    a[((1 + k) * n + i) * d + k] = 1.0;
                }
            }
        }
        let mut fan_in = d;

        let last = params.num_layers() - 1;
        let mut hidden = Vec::with_capacity(last);
        for l in 0..last {
            let (w, b) = params.layer(l);
            let width = b.len();
            let rows = s * n;
            let mut z = take(rows * width);
            general_mat_mul(1.0, &view(&a, rows, fan_in), &w.t(), 0.0, &mut view_mut(&mut z, rows, width));
            for row in z[..n * width].chunks_exact_mut(width) {
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                }
            }
            let block = n * width;
            let mut next = take(rows * width);
            let mut s1 = take(block);
            let second = order != Order::Value;
            let (mut s2, mut s3) = if second { (take(block), take(block)) } else { (Vec::new(), Vec::new()) };
            for i in 0..block {
                let (f, f1, f2, f3) = act.derivatives(z[i]);
                next[i] = f;
                s1[i] = f1;
                if second {
                    s2[i] = f2;
                    s3[i] = f3;
                }
            }
            let mut q = Vec::new();
            if second {
                let (_, rest) = next.split_at_mut(block);
                let (nfirst, nsecond) = rest.split_at_mut(d * block);
                let zfirst = &z[block..(1 + d) * block];
                let zsecond = &z[(1 + d) * block..];
                for k in 0..d {
                    let r = k * block..(k + 1) * block;
                    let (zf, af) = (&zfirst[r.clone()], &mut nfirst[r]);
                    for i in 0..block {
                        af[i] = s1[i] * zf[i];
                    }
                }
                match order {
                    Order::Second => {
                        for k in 0..d {
                            let r = k * block..(k + 1) * block;
                            let (zf, zs, as_) = (&zfirst[r.clone()], &zsecond[r.clone()], &mut nsecond[r]);
                            for i in 0..block {
                                as_[i] = s2[i] * zf[i] * zf[i] + s1[i] * zs[i];
                            }
                        }
                    }
                    Order::Laplacian => {
                        q = take(block);
                        for k in 0..d {
                            let zf = &zfirst[k * block..(k + 1) * block];
                            for i in 0..block {
                                q[i] += zf[i] * zf[i];
                            }
                        }
                        for i in 0..block {
                            nsecond[i] = s2[i] * q[i] + s1[i] * zsecond[i];
                        }
                    }
                    Order::Value => unreachable!(),
                }
            }
            let z = if second {
                z
            } else {
                give(z);
                Vec::new()
            };
            hidden.push(Hidden { input: a, z, width, s1, s2, s3, q });
            a = next;
            fan_in = width;
        }

        let (w, b) = params.layer(last);
        let mut z = take(s * n);
        general_mat_mul(1.0, &view(&a, s * n, fan_in), &w.t(), 0.0, &mut view_mut(&mut z, s * n, 1));
        let u: Vec<f64> = z[..n].iter().map(|v| v + b[0]).collect();
        let mut grad = Vec::new();
        let mut lap = Vec::new();
        let mut diag_hess = Vec::new();
        if order != Order::Value {
            grad = vec![0.0; n * d];
            for k in 0..d {
                for i in 0..n {
                    grad[i * d + k] = z[(1 + k) * n + i];
                }
            }
        }
        match order {
            Order::Value => {}
            Order::Laplacian => lap = z[(1 + d) * n..(2 + d) * n].to_vec(),
            Order::Second => {
                diag_hess = vec![0.0; n * d];
                for k in 0..d {
                    for i in 0..n {
                        diag_hess[i * d + k] = z[(1 + d + k) * n + i];
                    }
                }
                lap = diag_hess.chunks_exact(d).map(|r| r.iter().sum()).collect();
            }
        }
        give(z);
        let output = BatchOutput { n, d, order, u, grad, lap, diag_hess };
        Self { params, n, d, order, hidden, last_input: a, output }
    }

    pub fn output(&self) -> &BatchOutput {
        &self.output
    }

    /// Adds the parameter gradient implied by `seeds` to `grad`.
    pub fn backward(&self, seeds: &Seeds, grad: &mut NetworkParameters) {
        let (n, d) = (self.n, self.d);
        let s = self.order.streams(d);
        assert_eq!(seeds.du.len(), n, "seed length mismatch");
        let get = |v: &[f64], i: usize| if v.is_empty() { 0.0 } else { v[i] };

        let mut dout = take(s * n);
        dout[..n].copy_from_slice(&seeds.du);
        if self.order != Order::Value {
            for k in 0..d {
                for i in 0..n {
                    dout[(1 + k) * n + i] = get(&seeds.dgrad, i * d + k);
                }
            }
        }
        match self.order {
            Order::Value => {}
            Order::Laplacian => {
                for i in 0..n {
                    dout[(1 + d) * n + i] = get(&seeds.dlap, i);
                }
            }
            Order::Second => {
                for k in 0..d {
                    for i in 0..n {
                        dout[(1 + d + k) * n + i] = get(&seeds.dhess, i * d + k) + get(&seeds.dlap, i);
                    }
                }
            }
        }

        let last = self.params.num_layers() - 1;
        let last_fan_in = self.hidden.last().map_or(d, |h| h.width);
        let mut da = self.accumulate_layer(last, &dout, &self.last_input, last_fan_in, grad, true);
        give(dout);

        for l in (0..last).rev() {
            let rec = &self.hidden[l];
            let width = rec.width;
            let block = n * width;
            let mut dz = take(s * block);
            {
                let (dzv, dzrest) = dz.split_at_mut(block);
                for i in 0..block {
                    dzv[i] = da[i] * rec.s1[i];
                }
                if self.order != Order::Value {
                    let zs = &rec.z;
                    let (dzf, dzs2) = dzrest.split_at_mut(d * block);
                    for k in 0..d {
                        let f = (1 + k) * block;
                        let (zf, daf, out_f) = (&zs[f..f + block], &da[f..f + block], &mut dzf[k * block..(k + 1) * block]);
                        for i in 0..block {
                            dzv[i] += daf[i] * rec.s2[i] * zf[i];
                            out_f[i] = daf[i] * rec.s1[i];
                        }
                    }
                    match self.order {
                        Order::Second => {
                            for k in 0..d {
                                let f = (1 + k) * block;
                                let sc = (1 + d + k) * block;
                                let (zf, zsec, das2) = (&zs[f..f + block], &zs[sc..sc + block], &da[sc..sc + block]);
                                let r = k * block..(k + 1) * block;
                                let (out_f, out_s) = (&mut dzf[r.clone()], &mut dzs2[r]);
                                for i in 0..block {
                                    let (s1, s2, s3) = (rec.s1[i], rec.s2[i], rec.s3[i]);
                                    dzv[i] += das2[i] * (s3 * zf[i] * zf[i] + s2 * zsec[i]);
                                    out_f[i] += 2.0 * das2[i] * s2 * zf[i];
                                    out_s[i] = das2[i] * s1;
                                }
                            }
                        }
                        Order::Laplacian => {
                            let sc = (1 + d) * block;
                            let (zl, dal) = (&zs[sc..sc + block], &da[sc..sc + block]);
                            for i in 0..block {
                                dzv[i] += dal[i] * (rec.s3[i] * rec.q[i] + rec.s2[i] * zl[i]);
                                dzs2[i] = dal[i] * rec.s1[i];
                            }
                            for k in 0..d {
                                let f = (1 + k) * block;
                                let zf = &zs[f..f + block];
                                let out_f = &mut dzf[k * block..(k + 1) * block];
                                for i in 0..block {
                                    out_f[i] += 2.0 * dal[i] * rec.s2[i] * zf[i];
                                }
                            }
                        }
                        Order::Value => unreachable!(),
                    }
                }
            }
            give(da);
            let fan_in = if l == 0 { d } else { self.hidden[l - 1].width };
            da = self.accumulate_layer(l, &dz, &rec.input, fan_in, grad, l > 0);
            give(dz);
        }
        give(da);
    }

    /// Adds `dW += dz^T input` and `db += sum of value rows of dz`; returns
    /// `dz W` when `propagate` is set.
    fn accumulate_layer(
        &self,
        l: usize,
        dz: &[f64],
        input: &[f64],
        fan_in: usize,
        grad: &mut NetworkParameters,
        propagate: bool,
    ) -> Vec<f64> {
        let n = self.n;
        let rows = input.len() / fan_in;
        let fan_out = dz.len() / rows;
        let dz_v = view(dz, rows, fan_out);
        {
            let (gw, gb) = grad.layer_mut(l);
            general_mat_mul(1.0, &dz_v.t(), &view(input, rows, fan_in), 1.0, &mut view_mut(gw, fan_out, fan_in));
            for row in dz[..n * fan_out].chunks_exact(fan_out) {
                for (g, v) in gb.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        if !propagate {
            return Vec::new();
        }
        let (w, _) = self.params.layer(l);
        let mut da = take(rows * fan_in);
        general_mat_mul(1.0, &dz_v, &w, 0.0, &mut view_mut(&mut da, rows, fan_in));
        da
    }
}

/// Exact `u`, input gradient and diagonal input Hessian at one point.
pub fn input_derivatives(params: &NetworkParameters, x: &[f64]) -> DerivativeBundle {
    Tape::forward(params, x, Order::Second).output().bundle(0)
}

/// Network values at many points, evaluated in chunks.
pub fn predict(params: &NetworkParameters, points: &[f64]) -> Vec<f64> {
    const CHUNK: usize = 8192;
    let d = params.architecture().input_dim;
    let mut out = Vec::with_capacity(points.len() / d);
    for chunk in points.chunks(CHUNK * d) {
        out.extend_from_slice(&Tape::forward(params, chunk, Order::Value).output().u);
    }
    out
}

/// What a loss evaluator returns: the loss, one [`Seeds`] per batch and
/// `dL/d(scalar)` for each trainable scalar.
pub struct LossParts {
    pub loss: f64,
    pub seeds: Vec<Seeds>,
    pub scalar_grad: Vec<f64>,
}

/// Loss and its exact gradient with respect to every weight, bias and
/// trainable scalar.
///
/// Each batch `(points, order)` is run forward; `evaluate` turns the outputs
/// into a scalar loss together with the loss adjoints of those outputs, which
/// are then swept back through the recorded passes. Batches are reduced in
/// order, so the result is deterministic.
pub fn loss_gradient<F>(
    params: &NetworkParameters,
    batches: &[(&[f64], Order)],
    evaluate: F,
) -> Result<(f64, NetworkParameters)>
where
    F: FnOnce(&[&BatchOutput]) -> Result<LossParts>,
{
    let tapes: Vec<Tape<'_>> = batches.iter().map(|(pts, order)| Tape::forward(params, pts, *order)).collect();
    let outputs: Vec<&BatchOutput> = tapes.iter().map(|t| t.output()).collect();
    let parts = evaluate(&outputs)?;
    if !parts.loss.is_finite() {
        let index = outputs.iter().position(|o| !o.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite { context: "loss in batch".into(), index });
    }
    if parts.seeds.len() != tapes.len() || parts.scalar_grad.len() != params.scalar_names().len() {
        return Err(Error::invalid("loss evaluator returned mismatched adjoints"));
    }
    let mut grad = params.zeros_like();
    for (tape, seeds) in tapes.iter().zip(&parts.seeds) {
        tape.backward(seeds, &mut grad);
    }
    grad.scalars_mut().copy_from_slice(&parts.scalar_grad);
    Ok((parts.loss, grad))
}
