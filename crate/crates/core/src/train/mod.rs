//! Loss assembly, the two-phase training loop and error metrics.

mod config;
mod loss;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

pub use config::{
    AdamConfig, BoundaryConfig, DataConfig, ExperimentConfig, LbfgsConfig, LossConfig, NetworkConfig, SamplerConfig,
    TestSetConfig,
};
pub use loss::{
    assemble_loss, enforce_zero_dirichlet, make_observations, relative_errors, LossAssembly, LossTerms, LossWeights,
    Observations, ZeroDirichlet,
};

use crate::domains::{boundary_box, boundary_circle, Domain};
use crate::error::{Error, Result};
use crate::lowdisc::io::VectorCache;
use crate::lowdisc::samplers::rng;
use crate::lowdisc::{lattice_points, sample_unit_cube, GeneratingVector, PointSet, Provenance};
use crate::net::{init_xavier, predict, save_checkpoint, Architecture, NetworkParameters};
use crate::optim::{AdamState, LbfgsState};
use crate::problems::PdeProblem;

/// Held-out points with exact solution values.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub points: PointSet,
    pub exact: Vec<f64>,
}

impl TestSet {
    pub fn build(problem: &PdeProblem, cfg: &TestSetConfig) -> Result<Self> {
        let d = problem.dim();
        let points = match *cfg {
            TestSetConfig::Grid { per_axis } => {
                if d != 2 {
                    return Err(Error::Config(format!("grid test sets are 2-d only, problem has d = {d}")));
                }
                let (lo, hi) = match &problem.domain {
                    Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
                    Domain::Disk => (vec![-1.0; 2], vec![1.0; 2]),
                };
                let node = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64;
                let mut coords = Vec::with_capacity(2 * per_axis * per_axis);
                for i in 0..per_axis {
                    for j in 0..per_axis {
                        let x = [node(0, i), node(1, j)];
                        if problem.domain.contains(&x) {
                            coords.extend_from_slice(&x);
                        }
                    }
                }
                PointSet::new(2, coords, Provenance::Mapped, None)?
            }
            TestSetConfig::Random { n, seed } => {
                let mut r = rng(seed);
                let unit: Vec<f64> = (0..n * d).map(|_| r.random::<f64>()).collect();
                let unit = PointSet::new(d, unit, Provenance::UniformRandom, Some(seed))?;
                problem.domain.map_from_unit(&unit)?
            }
        };
        let exact = points.iter().map(|x| problem.exact(x)).collect();
        Ok(Self { points, exact })
    }
}

/// One logged epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub loss: f64,
    pub e_inf: f64,
    pub e_2: f64,
    /// `|k - k*|` for problems with a trainable wave number.
    pub k_abs_err: Option<f64>,
    /// `|k^2 - k*^2|`.
    pub k_sq_abs_err: Option<f64>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricRow>,
    pub params: NetworkParameters,
    /// Epochs whose L-BFGS line search failed and was skipped.
    pub lbfgs_failures: Vec<usize>,
    pub wall_clock_secs: f64,
    pub test: TestSet,
    /// Final predictions on the test set.
    pub predictions: Vec<f64>,
    /// Generating vector of the interior set, for GLP runs.
    pub generating_vector: Option<GeneratingVector>,
}

impl TrainReport {
    pub fn last(&self) -> &MetricRow {
        self.rows.last().expect("a report holds at least the epoch-0 row")
    }

    /// `epoch,loss,e_inf,e_2[,k_abs_err]`.
    pub fn write_metrics_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let with_k = self.rows.iter().any(|r| r.k_abs_err.is_some());
        writeln!(out, "epoch,loss,e_inf,e_2{}", if with_k { ",k_abs_err" } else { "" })?;
        for r in &self.rows {
            write!(out, "{},{:e},{:e},{:e}", r.epoch, r.loss, r.e_inf, r.e_2)?;
            if let Some(k) = r.k_abs_err {
                write!(out, ",{k:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// `x,y,u_pred,u_exact,abs_err` over the test set (2-d problems).
    pub fn write_predictions_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,u_pred,u_exact,abs_err")?;
        for ((x, p), e) in self.test.points.iter().zip(&self.predictions).zip(&self.test.exact) {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e}", x[0], x[1], p, e, (e - p).abs())?;
        }
        Ok(())
    }

    /// Writes `<name>_metrics.csv`, `<name>_pred.csv` (2-d only) and the
    /// checkpoint `<name>_ckpt.bin` with its `.json` sidecar into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = &self.config.name;
        let mut written = Vec::new();
        let metrics = dir.join(format!("{stem}_metrics.csv"));
        let mut buf = Vec::new();
        self.write_metrics_csv(&mut buf)?;
        fs::write(&metrics, buf)?;
        written.push(metrics);
        if self.test.points.dim() == 2 {
            let pred = dir.join(format!("{stem}_pred.csv"));
            let mut buf = Vec::new();
            self.write_predictions_csv(&mut buf)?;
            fs::write(&pred, buf)?;
            written.push(pred);
        }
        let ckpt = dir.join(format!("{stem}_ckpt.bin"));
        save_checkpoint(&self.params, &ckpt)?;
        written.push(ckpt.with_extension("json"));
        written.push(ckpt);
        Ok(written)
    }
}

/// Interior, boundary and observation batches of a config, mapped into the
/// problem domain.
pub struct Batches {
    pub interior: PointSet,
    pub boundary: Option<PointSet>,
    pub data: Option<Observations>,
    pub generating_vector: Option<GeneratingVector>,
}

pub fn build_batches(cfg: &ExperimentConfig, problem: &PdeProblem) -> Result<Batches> {
    let d = problem.dim();
    let s = &cfg.sampler;
    let (unit, gv) = if s.kind == Provenance::Glp {
        let gv = match &s.vector {
            Some(h) => GeneratingVector::new(s.n as u64, h.clone())?,
            None => {
                let cache = s.vector_cache.as_deref().map(VectorCache::load).transpose()?;
                crate::lowdisc::resolve_glp_vector(s.n as u64, d, cache.as_ref())?
            }
        };
        if gv.dim() != d {
            return Err(Error::Config(format!("generating vector has d = {}, problem needs {d}", gv.dim())));
        }
        (lattice_points(&gv), Some(gv))
    } else {
        (sample_unit_cube(s.kind, s.n, d, s.seed, None)?, None)
    };
    let interior = problem.domain.map_from_unit(&unit)?;
    let boundary = match (&cfg.boundary, &problem.domain) {
        (BoundaryConfig::None, _) => None,
        (BoundaryConfig::Box { per_face, seed }, Domain::Box { lo, hi }) => Some(boundary_box(lo, hi, *per_face, *seed)?),
        (BoundaryConfig::Circle { n, mode, seed }, Domain::Disk) => Some(boundary_circle(*n, *mode, *seed)?),
        (b, dom) => return Err(Error::Config(format!("boundary scheme {b:?} does not fit domain {dom:?}"))),
    };
    let data = match &cfg.data {
        Some(dc) => Some(make_observations(problem, dc.n_obs, dc.seed, dc.noise_scale)?),
        None if problem.needs_data_loss => {
            return Err(Error::Config(format!("problem `{}` needs a `data` section", problem.name)))
        }
        None => None,
    };
    Ok(Batches { interior, boundary, data, generating_vector: gv })
}

/// Runs the config; see [`train_run_with`].
pub fn train_run(cfg: &ExperimentConfig) -> Result<TrainReport> {
    train_run_with(cfg, |_| {})
}

/// Xavier initialisation, `adam.epochs` Adam steps, then `lbfgs.epochs`
/// L-BFGS steps, all full batch. Metrics on the test set are recorded at
/// epoch 0, every `log_every` epochs and at the last epoch; `on_row` sees
/// each row as it is produced. The run is deterministic given the config.
pub fn train_run_with<F: FnMut(&MetricRow)>(cfg: &ExperimentConfig, mut on_row: F) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = cfg.problem.build()?;
    let d = problem.dim();
    let batches = build_batches(cfg, &problem)?;
    let test = TestSet::build(&problem, &cfg.test)?;

    let weights = LossWeights {
        alpha1: cfg.loss.alpha1,
        alpha2: cfg.loss.alpha2,
        interior_scale: if cfg.loss.volume_factor { problem.domain.volume() } else { 1.0 },
    };
    let assembly =
        LossAssembly::new(&problem, batches.interior, batches.boundary, batches.data, weights, cfg.enforce_dirichlet)?;
    let wrapper = assembly.wrapper();

    let arch = Architecture::uniform(d, cfg.network.width, cfg.network.depth, cfg.network.activation)?;
    let mut params = init_xavier(&arch, cfg.seed);
    for (name, v) in problem.trainable_scalar_names.iter().zip(problem.initial_scalars()) {
        params = params.with_scalar(name, v);
    }
    let k_true = problem.true_scalars();

    let evaluate = |params: &NetworkParameters| -> Vec<f64> {
        let raw = predict(params, test.points.as_flat());
        match wrapper {
            Some(w) => raw.iter().zip(test.points.iter()).map(|(u, x)| w.multiplier(x).0 * u).collect(),
            None => raw,
        }
    };
    let mut rows = Vec::new();
    let mut log = |epoch: usize, params: &NetworkParameters| -> Result<()> {
        let loss = assembly.loss(params).map_err(|e| diverged(epoch, e))?;
        let (e_inf, e_2) = relative_errors(&evaluate(params), &test.exact)?;
        let (k_abs_err, k_sq_abs_err) = match (params.scalars().first(), k_true.first()) {
            (Some(k), Some(kt)) => (Some((k - kt).abs()), Some((k * k - kt * kt).abs())),
            _ => (None, None),
        };
        let row = MetricRow { epoch, loss, e_inf, e_2, k_abs_err, k_sq_abs_err };
        on_row(&row);
        rows.push(row);
        Ok(())
    };
    let total = cfg.total_epochs();
    let due = |e: usize| e % cfg.log_every == 0 || e == total;

    log(0, &params)?;
    let mut adam = AdamState::new(params.as_slice().len(), cfg.adam.lr);
    for epoch in 1..=cfg.adam.epochs {
        let (_, grad) = assembly.loss_and_grad(&params).map_err(|e| diverged(epoch, e))?;
        adam.step(params.as_mut_slice(), grad.as_slice()).map_err(|e| diverged(epoch, e))?;
        if due(epoch) {
            log(epoch, &params)?;
        }
    }

    let mut lbfgs = LbfgsState::new(cfg.lbfgs.history);
    lbfgs.lr = cfg.lbfgs.lr;
    let mut scratch = params.clone();
    let mut failures = Vec::new();
    let mut stalled = false;
    for epoch in cfg.adam.epochs + 1..=total {
        if !stalled {
            let mut objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
                scratch.as_mut_slice().copy_from_slice(x);
                match assembly.loss_and_grad(&scratch) {
                    Ok((l, g)) => Ok((l, g.as_slice().to_vec())),
                    Err(Error::NonFinite { .. }) => Ok((f64::INFINITY, vec![0.0; x.len()])),
                    Err(e) => Err(e),
                }
            };
            match lbfgs.step(params.as_mut_slice(), &mut objective) {
                Ok(_) => {}
                Err(Error::LineSearch { .. }) => {
                    // retry from steepest descent; a second failure in a row
                    // means no further progress is possible
                    stalled = failures.last() == Some(&(epoch - 1)) && lbfgs.history_len() == 0;
                    failures.push(epoch);
                    lbfgs.clear_history();
                }
                Err(e) => return Err(diverged(epoch, e)),
            }
        }
        if due(epoch) {
            log(epoch, &params)?;
        }
    }

    let predictions = evaluate(&params);
    Ok(TrainReport {
        config: cfg.clone(),
        rows,
        params,
        lbfgs_failures: failures,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        test,
        predictions,
        generating_vector: batches.generating_vector,
    })
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { .. } => Error::Diverged { epoch, source: Box::new(e) },
        other => other,
    }
}
