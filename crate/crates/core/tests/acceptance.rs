//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL line
//! for each and exits non-zero if any failed.
//!
//! The training criteria load the shipped desk configs from `configs/` and
//! take tens of minutes each on one core.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use glpinn::lowdisc::samplers::rng;
use glpinn::lowdisc::{
    baseline_sample, fibonacci_gv, lattice_points, star_discrepancy_exact, warnock_l2, BaselineKind,
    GeneratingVector, PointSet, Provenance,
};
use glpinn::net::{init_xavier, input_derivatives, loss_gradient, Activation, Architecture, LossParts, Order, Seeds};
use glpinn::optim::{AdamState, LbfgsState};
use glpinn::problems::{hd_linear, hd_nonlinear, helmholtz_inverse, one_peak, two_peak_disk, PdeProblem};
use glpinn::qmcbench::{gaussian_bump, midpoint_quadrature, rate_sweep};
use glpinn::train::{train_run, ExperimentConfig, TrainReport};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(stem: &str) -> Result<TrainReport, String> {
    let path = configs_dir().join(format!("{stem}.json"));
    let cfg = ExperimentConfig::load(&path).map_err(|e| format!("{stem}: {e}"))?;
    train_run(&cfg).map_err(|e| format!("{stem}: {e}"))
}

fn metrics_csv(report: &TrainReport) -> Vec<u8> {
    let mut buf = Vec::new();
    report.write_metrics_csv(&mut buf).expect("writing to a Vec");
    buf
}

fn lattice_exactness() -> Outcome {
    let ps = lattice_points(&GeneratingVector::new(5, vec![1, 2]).map_err(|e| e.to_string())?);
    let expected = [0.1, 0.3, 0.3, 0.7, 0.5, 0.1, 0.7, 0.5, 0.9, 0.9];
    if ps.as_flat() != expected {
        return Err(format!("(5; 1, 2) gave {:?}", ps.as_flat()));
    }
    // q = i (1, 5) mod 8 with residue 0 mapped to 8
    let ps = lattice_points(&GeneratingVector::new(8, vec![1, 5]).map_err(|e| e.to_string())?);
    let q = [(1, 5), (2, 2), (3, 7), (4, 4), (5, 1), (6, 6), (7, 3), (8, 8)];
    let expected: Vec<f64> = q.iter().flat_map(|&(a, b)| [(2 * a - 1) as f64 / 16.0, (2 * b - 1) as f64 / 16.0]).collect();
    check(ps.as_flat() == expected.as_slice(), "(5; 1, 2) and (8; 1, 5) match exactly".into())
}

/// Integrates `(#{x < g}/N - prod g)^2` over the unit cube. The integrand is
/// a polynomial of degree two per coordinate on each cell cut by the point
/// coordinates, so two Gauss-Legendre nodes per axis and cell are exact.
fn l2_star_grid_oracle(ps: &PointSet) -> f64 {
    let d = ps.dim();
    let nf = ps.len() as f64;
    let cuts: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut c: Vec<f64> = ps.iter().map(|p| p[k]).chain([0.0, 1.0]).collect();
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    let gl = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut cell = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let width: Vec<f64> = (0..d).map(|k| cuts[k][cell[k] + 1] - cuts[k][cell[k]]).collect();
        for node in 0..(1usize << d) {
            let g: Vec<f64> = (0..d).map(|k| cuts[k][cell[k]] + width[k] * gl[(node >> k) & 1]).collect();
            let count = ps.iter().filter(|p| p.iter().zip(&g).all(|(x, gk)| x < gk)).count() as f64;
            let local = count / nf - g.iter().product::<f64>();
            total += local * local * width.iter().product::<f64>() / (1usize << d) as f64;
        }
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            cell[k] += 1;
            if cell[k] + 1 < cuts[k].len() {
                break;
            }
            cell[k] = 0;
            k += 1;
        }
    }
}

fn discrepancy_oracles() -> Outcome {
    for n in 1..=64usize {
        let coords: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect();
        let ps = PointSet::unit_cube(1, coords, Provenance::Glp, None).map_err(|e| e.to_string())?;
        let star = star_discrepancy_exact(&ps).map_err(|e| e.to_string())?;
        let want = 1.0 / (2 * n) as f64;
        if (star - want).abs() > 1e-15 {
            return Err(format!("midpoint set N = {n}: star {star} vs {want}"));
        }
    }
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for set in 0..20u64 {
        let n = r.random_range(1..=10usize);
        let d = r.random_range(1..=3usize);
        let ps = baseline_sample(BaselineKind::UniformRandom, n, d, 1000 + set).map_err(|e| e.to_string())?;
        let w = warnock_l2(&ps).map_err(|e| e.to_string())?.powi(2);
        let oracle = l2_star_grid_oracle(&ps);
        worst = worst.max((w - oracle).abs() / oracle);
    }
    check(worst < 1e-3, format!("star = 1/(2N) for N = 1..64; Warnock vs grid oracle max rel err {worst:.2e}"))
}

fn uniformity_ordering() -> Outcome {
    let glp = lattice_points(&fibonacci_gv(987).map_err(|e| e.to_string())?);
    let d_glp = star_discrepancy_exact(&glp).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut best_ur = f64::INFINITY;
    for seed in 0..10 {
        let ur = baseline_sample(BaselineKind::UniformRandom, 987, 2, seed).map_err(|e| e.to_string())?;
        let d_ur = star_discrepancy_exact(&ur).map_err(|e| e.to_string())?;
        best_ur = best_ur.min(d_ur);
        wins += usize::from(d_glp < d_ur);
    }
    check(wins == 10, format!("GLP star {d_glp:.3e} below UR on {wins}/10 seeds (best UR {best_ur:.3e})"))
}

fn integration_rates() -> Outcome {
    let exact = midpoint_quadrature(gaussian_bump, 2, 2000).map_err(|e| e.to_string())?;
    let ns = [55, 144, 377, 987, 2584, 6765, 10946];
    let seeds: Vec<u64> = (0..20).collect();
    let res = rate_sweep(gaussian_bump, exact, 2, &[Provenance::UniformRandom, Provenance::Glp], &ns, &seeds)
        .map_err(|e| e.to_string())?;
    let ur = res.slope(Provenance::UniformRandom).ok_or("UR slope undefined")?;
    let glp = res.slope(Provenance::Glp).ok_or("GLP slope undefined")?;
    check((-0.65..=-0.35).contains(&ur) && glp <= -0.9, format!("slopes UR {ur:.3}, GLP {glp:.3}"))
}

fn rel_inf(approx: &[f64], exact: &[f64]) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    approx.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn derivative_correctness() -> Outcome {
    let arch = Architecture::uniform(2, 40, 4, Activation::Tanh).map_err(|e| e.to_string())?;
    let params = init_xavier(&arch, 100);
    let mut r = rng(11);
    let points: Vec<f64> = (0..100).map(|_| r.random_range(-1.0..1.0)).collect();

    let (mut g_an, mut g_fd, mut h_an, mut h_fd) = (vec![], vec![], vec![], vec![]);
    for x in points.chunks_exact(2) {
        let b = input_derivatives(&params, x);
        let u0 = glpinn::net::forward(&params, x);
        for k in 0..2 {
            let shifted = |h: f64| {
                let mut y = x.to_vec();
                y[k] += h;
                glpinn::net::forward(&params, &y)
            };
            let (hg, hh) = (1e-5, 1e-4);
            g_an.push(b.grad[k]);
            g_fd.push((shifted(hg) - shifted(-hg)) / (2.0 * hg));
            h_an.push(b.diag_hess[k]);
            h_fd.push((shifted(hh) - 2.0 * u0 + shifted(-hh)) / (hh * hh));
        }
    }
    let e_grad = rel_inf(&g_fd, &g_an);
    let e_hess = rel_inf(&h_fd, &h_an);

    // a loss touching every output stream: sum u^2 + sum |grad u|^2 + sum (lap u)^2
    let loss_of = |p: &glpinn::net::NetworkParameters| -> (f64, glpinn::net::NetworkParameters) {
        loss_gradient(p, &[(&points, Order::Laplacian)], |outs| {
            let o = outs[0];
            let mut seeds = Seeds::zeros(o);
            let mut loss = 0.0;
            for (s, v) in seeds.du.iter_mut().zip(&o.u) {
                loss += v * v;
                *s = 2.0 * v;
            }
            for (s, v) in seeds.dgrad.iter_mut().zip(&o.grad) {
                loss += v * v;
                *s = 2.0 * v;
            }
            for (s, v) in seeds.dlap.iter_mut().zip(&o.lap) {
                loss += v * v;
                *s = 2.0 * v;
            }
            Ok(LossParts { loss, seeds: vec![seeds], scalar_grad: vec![] })
        })
        .expect("finite loss")
    };
    let (_, grad) = loss_of(&params);
    let h = 1e-6;
    let mut p_fd = Vec::with_capacity(grad.as_slice().len());
    let mut shifted = params.clone();
    for i in 0..params.as_slice().len() {
        let v = params.as_slice()[i];
        shifted.as_mut_slice()[i] = v + h;
        let up = loss_of(&shifted).0;
        shifted.as_mut_slice()[i] = v - h;
        let down = loss_of(&shifted).0;
        shifted.as_mut_slice()[i] = v;
        p_fd.push((up - down) / (2.0 * h));
    }
    let e_param = rel_inf(&p_fd, grad.as_slice());
    check(
        e_grad < 1e-5 && e_hess < 1e-3 && e_param < 1e-5,
        format!("rel err grad {e_grad:.2e}, diag hess {e_hess:.2e}, params {e_param:.2e}"),
    )
}

fn problem_consistency() -> Outcome {
    let problems: Vec<PdeProblem> = vec![
        one_peak(),
        two_peak_disk(),
        helmholtz_inverse(),
        hd_linear(5, 10.0).map_err(|e| e.to_string())?,
        hd_nonlinear(5, 4).map_err(|e| e.to_string())?,
    ];
    let mut worst: f64 = 0.0;
    for (i, p) in problems.iter().enumerate() {
        let unit = baseline_sample(BaselineKind::UniformRandom, 100, p.dim(), 500 + i as u64).map_err(|e| e.to_string())?;
        let pts = p.domain.map_from_unit(&unit).map_err(|e| e.to_string())?;
        let scalars = p.true_scalars();
        for x in pts.iter() {
            let r = p.residual(&p.exact_bundle(x), x, &scalars).abs();
            if !(r < 1e-8) {
                return Err(format!("{}: |residual| = {r:e} at {x:?}", p.name));
            }
            worst = worst.max(r);
        }
    }
    check(true, format!("max |residual(u*)| = {worst:.2e} over 5 problems"))
}

fn onepeak_ordering() -> Outcome {
    let glp = run_config("onepeak_glp_desk")?;
    let ur = run_config("onepeak_ur_desk")?;
    let (eg, eu) = (glp.last().e_2, ur.last().e_2);
    check(eg < eu && eg < 0.2, format!("e_2 GLP {eg:.4e}, UR {eu:.4e}"))
}

fn helmholtz_inverse_desk() -> Outcome {
    let clean = run_config("helmholtz_glp_noise0_desk")?;
    let k = clean.params.scalars()[0];
    let k_sq_err = (k * k - 9.0).abs();
    let glp = run_config("helmholtz_glp_noise5_desk")?;
    let ur = run_config("helmholtz_ur_noise5_desk")?;
    let (eg, eu) = (glp.last().e_2, ur.last().e_2);
    check(
        k_sq_err < 0.1 && eg < eu,
        format!("noiseless k = {k:.6}, |k^2 - 9| = {k_sq_err:.3e}; 5% noise e_2 GLP {eg:.4e}, UR {eu:.4e}"),
    )
}

fn nonlinear5_ordering() -> Outcome {
    let glp = run_config("hd_nonlinear5_glp_desk")?;
    let ur = run_config("hd_nonlinear5_ur_desk")?;
    let (eg, eu) = (glp.last().e_2, ur.last().e_2);
    check(eg < eu, format!("e_2 GLP {eg:.4e}, UR {eu:.4e}"))
}

fn optimizer_sanity() -> Outcome {
    // f = x^T A x / 2 with A SPD
    let a = [[4.0, 1.0], [1.0, 3.0]];
    let mut eval = |x: &[f64]| {
        let g = vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        Ok((0.5 * (x[0] * g[0] + x[1] * g[1]), g))
    };
    let mut state = LbfgsState::new(50);
    let mut x = [1.0, -2.0];
    let mut lbfgs_steps = None;
    for step in 1..=10 {
        state.step(&mut x, &mut eval).map_err(|e| e.to_string())?;
        let (_, g) = eval(&x).map_err(|e: glpinn::Error| e.to_string())?;
        if g[0].hypot(g[1]) < 1e-10 {
            lbfgs_steps = Some(step);
            break;
        }
    }
    let mut adam = AdamState::new(1, 0.01);
    let mut theta = [1.0];
    let mut adam_steps = None;
    for step in 1..=1000 {
        let g = [theta[0]];
        adam.step(&mut theta, &g).map_err(|e| e.to_string())?;
        if 0.5 * theta[0] * theta[0] < 1e-4 {
            adam_steps = Some(step);
            break;
        }
    }
    check(
        lbfgs_steps.is_some() && adam_steps.is_some(),
        format!("L-BFGS steps {lbfgs_steps:?}, Adam steps {adam_steps:?}"),
    )
}

fn determinism() -> Outcome {
    let stem = "helmholtz_glp_noise0_desk";
    let first = metrics_csv(&run_config(stem)?);
    let second = metrics_csv(&run_config(stem)?);
    check(first == second, format!("{stem}: {} bytes, identical = {}", first.len(), first == second))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("lattice exactness", lattice_exactness),
        ("discrepancy oracles", discrepancy_oracles),
        ("uniformity ordering", uniformity_ordering),
        ("integration rates", integration_rates),
        ("derivative correctness", derivative_correctness),
        ("problem consistency", problem_consistency),
        ("optimizer sanity", optimizer_sanity),
        ("desk one-peak ordering", onepeak_ordering),
        ("desk inverse Helmholtz", helmholtz_inverse_desk),
        ("desk 5-d nonlinear ordering", nonlinear5_ordering),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
