//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgbh_core::deviation::{
    controllability_gramian, mdp_tail_estimate, pseudoinverse_value, rate_function_endpoint,
    SkeletonMap, SpeedFunction, TailSample,
};
use sgbh_core::model::{
    advective, advective_derivative, reaction, reaction_derivative, reaction_second_derivative,
    ModelParams, NoiseCoefficient,
};
use sgbh_core::montecarlo::{
    run_clt, run_heat_oracle, run_prop31, EnsembleSpec, Experiment, ExperimentSetup,
};
use sgbh_core::noise::{mix_seed, ControlPath, NoiseRealization, NoiseSpec};
use sgbh_core::solvers::{SolverConfig, SolverContext};
use sgbh_core::spectral::{
    apply_semigroup, build_basis, heat_kernel, heat_kernel_point, Field, Grid1D, KernelMethod,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(id: u32, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "[{}] {id}. {name}: {} ({:.1} s of {:.0} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    pass
}

fn kernel_cross_validation() -> Outcome {
    let grid = Grid1D::new(63).unwrap();
    let times: Vec<f64> = (0..12).map(|k| 0.01 * 50f64.powf(k as f64 / 11.0)).collect();
    let mut kernel_err: f64 = 0.0;
    for &t in &times {
        let a = heat_kernel(t, &grid, KernelMethod::Images, 10).unwrap();
        let b = heat_kernel(t, &grid, KernelMethod::Eigen, 200).unwrap();
        kernel_err = kernel_err.max(a.max_abs_diff(&b));
    }

    let basis = build_basis(32, &Grid1D::new(128).unwrap()).unwrap();
    let coeffs: Vec<f64> = (1..=basis.n_modes()).map(|j| 1.0 / j as f64).collect();
    let field = Field::Spectral(coeffs);
    let mut semigroup_err: f64 = 0.0;
    for &(s, t) in &[(0.01, 0.02), (0.1, 0.05), (0.3, 0.2)] {
        let two = apply_semigroup(&apply_semigroup(&field, s, &basis).unwrap(), t, &basis).unwrap();
        let one = apply_semigroup(&field, s + t, &basis).unwrap();
        for (a, b) in two.values().iter().zip(one.values()) {
            semigroup_err = semigroup_err.max((a - b).abs());
        }
    }

    // sub-stochasticity on a 50 x 50 (t, x) lattice, integrals by trapezoid on 399 nodes
    let fine = Grid1D::new(399).unwrap();
    let ys = fine.nodes();
    let mut worst_mass: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for it in 0..50 {
        let t = 0.01 + (0.5 - 0.01) * it as f64 / 49.0;
        for ix in 0..50 {
            let x = (ix as f64 + 0.5) / 50.0;
            let row: Vec<f64> = ys
                .iter()
                .map(|&y| heat_kernel_point(t, x, y, KernelMethod::Images, 10))
                .collect();
            min_value = row.iter().copied().fold(min_value, f64::min);
            worst_mass = worst_mass.max(fine.integrate(&row));
        }
    }
    Outcome {
        pass: kernel_err < 1e-8 && semigroup_err < 1e-12 && worst_mass <= 1.0 && min_value >= 0.0,
        detail: format!(
            "kernel max diff {kernel_err:.2e}, semigroup {semigroup_err:.1e}, max mass {worst_mass:.6}, min G {min_value:.1e}"
        ),
    }
}

/// Fourth-order central difference.
fn derivative(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = 1e-3;
    (-f(u + 2.0 * h) + 8.0 * f(u + h) - 8.0 * f(u - h) + f(u - 2.0 * h)) / (12.0 * h)
}

fn derivative_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for delta in 1..=3u32 {
        for &gamma in &[0.25, 0.5, 0.75] {
            for _ in 0..100 {
                let u = -1.2 + 2.4 * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                let checks = [
                    (derivative(|v| advective(v, delta), u), advective_derivative(u, delta)),
                    (derivative(|v| reaction(v, gamma, delta), u), reaction_derivative(u, gamma, delta)),
                    (
                        derivative(|v| reaction_derivative(v, gamma, delta), u),
                        reaction_second_derivative(u, gamma, delta),
                    ),
                ];
                for (fd, exact) in checks {
                    worst = worst.max((fd - exact).abs() / exact.abs());
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max relative error {worst:.2e} over 900 points x 3 derivatives"),
    }
}

fn heat_setup(dt: f64, n_modes: usize) -> ExperimentSetup {
    ExperimentSetup {
        params: ModelParams {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        },
        noise: NoiseSpec::new(n_modes, 0.3).unwrap(),
        solver: SolverConfig {
            dt,
            t_end: 0.25,
            n_modes,
            n_points: 4 * n_modes,
            blowup_threshold: 1e3,
        },
        g: NoiseCoefficient::constant(1.0),
        initial: Field::zeros_spectral(n_modes),
    }
}

fn ou_oracle() -> Outcome {
    let spec = EnsembleSpec {
        n_paths: 2000,
        base_seed: 11,
        eps_list: vec![1.0],
        coupled: true,
        experiment: Experiment::HeatOracle,
        workers: None,
    };
    let report = run_heat_oracle(&spec, &heat_setup(1e-4, 32)).unwrap();
    let worst = report.modes.iter().map(|m| m.z.abs()).fold(0.0, f64::max);
    Outcome {
        pass: report.fraction_within_3 >= 0.95,
        detail: format!(
            "{:.1}% of 32 modes with |z| <= 3 (max |z| {worst:.2}), means within 3 se: {}",
            100.0 * report.fraction_within_3,
            report.means_within_3se
        ),
    }
}

fn prop31_scaling() -> Outcome {
    let mut linear = heat_setup(1e-3, 32);
    linear.solver.n_points = 256;
    let spec = EnsembleSpec {
        n_paths: 200,
        base_seed: 31,
        eps_list: vec![1e-2, 1e-3, 1e-4],
        coupled: true,
        experiment: Experiment::Prop31,
        workers: None,
    };
    let lin = run_prop31(&spec, &linear).unwrap();
    let lin_fit = lin.fit.clone().unwrap();

    let nonlinear_spec = EnsembleSpec {
        n_paths: 500,
        ..spec
    };
    let full = run_prop31(&nonlinear_spec, &ExperimentSetup::default()).unwrap();
    let fit = full.fit.clone().unwrap();
    let target = 4.0;
    let rejected: usize = full.rows.iter().map(|r| r.n_rejected).sum();
    Outcome {
        pass: (lin_fit.slope - target).abs() <= 0.05
            && fit.slope >= target - 0.3
            && fit.r2 >= 0.99
            && full.check("rejection_rate") == Some(true),
        detail: format!(
            "linear slope {:.4}, nonlinear slope {:.3} (r2 {:.5}), rejected {rejected}",
            lin_fit.slope, fit.slope, fit.r2
        ),
    }
}

fn clt() -> Outcome {
    let spec = EnsembleSpec {
        n_paths: 500,
        base_seed: 32,
        eps_list: vec![1e-1, 1e-2, 1e-3],
        coupled: true,
        experiment: Experiment::Clt,
        workers: None,
    };
    let report = run_clt(&spec, &ExperimentSetup::default()).unwrap();
    let fit = report.fit.clone().unwrap();
    let decreasing = report.check("strictly_decreasing") == Some(true);

    let mut linear = heat_setup(1e-3, 32);
    linear.solver.n_points = 256;
    let lin = run_clt(
        &EnsembleSpec {
            n_paths: 50,
            ..spec.clone()
        },
        &linear,
    )
    .unwrap();
    let residual = lin.rows.iter().map(|r| r.mean).fold(0.0, f64::max);
    let means: Vec<String> = report.rows.iter().map(|r| format!("{:.3e}", r.mean)).collect();
    Outcome {
        pass: decreasing && fit.slope >= 0.4 && residual < 1e-9,
        detail: format!(
            "means [{}], order {:.3}, linear residual {residual:.1e}",
            means.join(", "),
            fit.slope
        ),
    }
}

fn rate_function() -> Outcome {
    let cfg = SolverConfig {
        dt: 1e-3,
        t_end: 0.25,
        n_modes: 8,
        n_points: 64,
        blowup_threshold: 1e3,
    };
    let params = ModelParams::default();
    let ctx = SolverContext::new(&params, &NoiseSpec::new(8, 0.3).unwrap(), &cfg).unwrap();
    let mut init = vec![0.0; 8];
    init[0] = 0.6;
    let u0 = ctx.solve_deterministic(&Field::Spectral(init)).unwrap();
    let reference = ctx.reference(&u0).unwrap();
    let g = NoiseCoefficient::affine(1.0, 0.5);
    let tol = 1e-8;
    let map = SkeletonMap::new(&ctx, &reference, &g).unwrap();
    let n_steps = ctx.n_steps();
    let control = |seed: u64| {
        let n = NoiseRealization::sample(8, 1.0, n_steps, seed).unwrap();
        ControlPath::new(8, cfg.dt, n_steps, n.increments().to_vec()).unwrap()
    };

    let zero = rate_function_endpoint(&Field::zeros_spectral(8), &ctx, &reference, &g, tol).unwrap();
    let zero_ok = zero.value == 0.0;

    let psi = map.forward(&control(1).scaled(0.5)).unwrap();
    let one = rate_function_endpoint(&Field::Spectral(psi.clone()), &ctx, &reference, &g, tol).unwrap();
    let scaled: Vec<f64> = psi.iter().map(|v| 3.0 * v).collect();
    let three = rate_function_endpoint(&Field::Spectral(scaled), &ctx, &reference, &g, tol).unwrap();
    let homogeneity = (three.value - 9.0 * one.value).abs() / (9.0 * one.value);

    let gram = controllability_gramian(&ctx, &reference, &g, 8).unwrap();
    let oracle = pseudoinverse_value(&gram, &psi).unwrap();
    let oracle_err = (one.value - oracle).abs() / oracle;

    let mut feasibility_gap = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let h = control(100 + seed);
        let target = map.forward(&h).unwrap();
        let res = rate_function_endpoint(&Field::Spectral(target), &ctx, &reference, &g, tol).unwrap();
        feasibility_gap = feasibility_gap.max(res.value - h.action());
    }

    let mut adjoint_err: f64 = 0.0;
    for seed in 0..5u64 {
        let h = control(500 + seed);
        let w: Vec<f64> = NoiseRealization::sample(8, 1.0, 1, 900 + seed).unwrap().increments().to_vec();
        let lhs: f64 = map.forward(&h).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum();
        let star = map.adjoint(&w);
        let rhs: f64 = cfg.dt * h.values().iter().zip(star.values()).map(|(a, b)| a * b).sum::<f64>();
        adjoint_err = adjoint_err.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Outcome {
        pass: zero_ok
            && one.converged
            && homogeneity <= 1e-6
            && oracle_err <= 1e-8
            && feasibility_gap <= 1e-8
            && adjoint_err <= 1e-10,
        detail: format!(
            "I(0)={}, homogeneity {homogeneity:.1e}, CG vs Gramian {oracle_err:.1e} ({} its), feasibility gap {feasibility_gap:.2e}, adjoint {adjoint_err:.1e}",
            zero.value, one.iterations
        ),
    }
}

fn mdp_consistency() -> Outcome {
    let setup = ExperimentSetup::default();
    let ctx = SolverContext::new(&setup.params, &setup.noise, &setup.solver).unwrap();
    let u0 = ctx.solve_deterministic(&setup.initial).unwrap();
    let reference = ctx.reference(&u0).unwrap();
    let n_steps = ctx.n_steps();
    let mut identity_err: f64 = 0.0;
    let mut reduction_err: f64 = 0.0;
    for path in 0..3u64 {
        let noise = NoiseRealization::sample(setup.noise.n_modes, setup.solver.dt, n_steps, mix_seed(77, path)).unwrap();
        for &eps in &[1e-2, 1e-4] {
            let u = ctx.solve_spde(&setup.initial, &setup.g, eps, &noise).unwrap();
            for &theta in &[0.1, 0.25, 0.4] {
                let speed = SpeedFunction::power_law(theta).unwrap();
                let z = ctx.solve_mdp_process(&reference, &setup.g, eps, &speed, &noise).unwrap();
                let s = speed.deviation_scale(eps);
                for ((a, b), c) in u0.all_coeffs().iter().zip(z.all_coeffs()).zip(u.all_coeffs()) {
                    identity_err = identity_err.max((a + s * b - c).abs());
                }
            }
            let v = ctx
                .solve_mdp_process(&reference, &setup.g, eps, &SpeedFunction::Unit, &noise)
                .unwrap();
            for ((a, b), c) in u.all_coeffs().iter().zip(u0.all_coeffs()).zip(v.all_coeffs()) {
                reduction_err = reduction_err.max(((a - b) / eps.sqrt() - c).abs());
            }
        }
    }

    let speed = SpeedFunction::power_law(0.25).unwrap();
    let eps_list = [1e-1, 1e-2, 1e-3];
    let samples: Vec<TailSample> = eps_list
        .iter()
        .map(|&eps| {
            let sup_norms = (0..100u64)
                .map(|path| {
                    let noise =
                        NoiseRealization::sample(setup.noise.n_modes, setup.solver.dt, n_steps, mix_seed(78, path)).unwrap();
                    ctx.solve_mdp_process(&reference, &setup.g, eps, &speed, &noise)
                        .unwrap()
                        .sup_norm()
                })
                .collect();
            TailSample {
                eps,
                sup_norms,
                n_rejected: 0,
            }
        })
        .collect();
    let rhos: Vec<f64> = (0..25).map(|k| 0.05 * k as f64).chain([1e6]).collect();
    let tail = mdp_tail_estimate(&samples, &rhos).unwrap();
    let last = tail.sup_over_eps.last().unwrap().1;
    Outcome {
        pass: identity_err < 1e-9 && reduction_err < 1e-9 && tail.monotone_in_rho && last == 0.0,
        detail: format!(
            "identity {identity_err:.1e}, theta=0 reduction {reduction_err:.1e}, tail monotone {}, sup_eps P(>1e6) = {last}",
            tail.monotone_in_rho
        ),
    }
}

fn report_bytes(workers: usize) -> Vec<u8> {
    let mut setup = ExperimentSetup::default();
    setup.solver.t_end = 0.1;
    let spec = EnsembleSpec {
        n_paths: 24,
        base_seed: 8,
        eps_list: vec![1e-1, 1e-2, 1e-3],
        coupled: true,
        experiment: Experiment::Prop31,
        workers: Some(workers),
    };
    let mut out = Vec::new();
    let prop = run_prop31(&spec, &setup).unwrap();
    prop.write_csv(&mut out).unwrap();
    out.extend(serde_json::to_vec_pretty(&prop).unwrap());
    let clt = run_clt(
        &EnsembleSpec {
            experiment: Experiment::Clt,
            ..spec.clone()
        },
        &setup,
    )
    .unwrap();
    clt.write_csv(&mut out).unwrap();
    out.extend(serde_json::to_vec_pretty(&clt).unwrap());
    let mut heat = heat_setup(1e-3, 16);
    heat.solver.t_end = 0.1;
    let oracle = run_heat_oracle(
        &EnsembleSpec {
            experiment: Experiment::HeatOracle,
            eps_list: vec![0.5],
            ..spec
        },
        &heat,
    )
    .unwrap();
    out.extend(serde_json::to_vec_pretty(&oracle).unwrap());
    out
}

fn reproducibility() -> Outcome {
    let reference = report_bytes(1);
    let same = [2, 3, 4].iter().all(|&w| report_bytes(w) == reference);
    Outcome {
        pass: same && report_bytes(1) == reference,
        detail: format!("{} report bytes identical across 1-4 workers: {same}", reference.len()),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "kernel cross-validation", secs(10), kernel_cross_validation),
        criterion(2, "derivative oracles", secs(1), derivative_oracles),
        criterion(3, "stochastic heat OU oracle", secs(120), ou_oracle),
        criterion(4, "moment scaling eps^(p/2)", secs(300), prop31_scaling),
        criterion(5, "central limit convergence", secs(300), clt),
        criterion(6, "rate function", secs(60), rate_function),
        criterion(7, "rescaled process consistency", secs(120), mdp_consistency),
        criterion(8, "reproducibility", secs(600), reproducibility),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
