//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line (visible with `--nocapture`).

use std::sync::Arc;
use std::time::Instant;

use carleman_lab::carleman::{
    adjoint_check, conjugated_apply, decompose_p, sweep_verify, weight_fn_catalog, Bump,
    CarlemanWeight, SweepConfig,
};
use carleman_lab::cli::{self, Cli};
use carleman_lab::continuation::{decay_experiment, extract_cauchy, interior_error, reconstruct};
use carleman_lab::domain::coeffs::{preset, CoefficientBuilder};
use carleman_lab::domain::{build_grid, DomainSpec, Field, Grid, SpatialDomain};
use carleman_lab::forward::{
    convergence_study, solve_forward, ForwardProblem, TermMask,
};
use carleman_lab::geometry::mu_levels;
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn verdict(criterion: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} [{detail}]",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn unit_spec() -> DomainSpec {
    DomainSpec {
        spatial: SpatialDomain::Interval { lo: 0.0, hi: 1.0 },
        t_max: 1.0,
        a_max: 1.0,
        tau_min: 0.0,
        tau_max: 1.0,
    }
}

fn unit_grid(n: usize) -> Arc<Grid> {
    build_grid(&unit_spec(), &[n, n, n, n]).unwrap()
}

/// Random bump with radii large enough to resolve on the 9-node level, so
/// refinement orders are measured in the asymptotic regime.
fn resolved_bump(rng: &mut ChaCha8Rng) -> Bump {
    use rand::Rng;
    let mut center = vec![0.0; 4];
    let mut radius = vec![0.0; 4];
    for k in 0..4 {
        center[k] = 0.45 + 0.1 * rng.random::<f64>();
        radius[k] = 0.22 + 0.08 * rng.random::<f64>();
    }
    Bump { center, radius }
}

#[test]
fn criterion_1_conjugation_identity() {
    let start = Instant::now();
    let coeffs = preset("constant").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let bumps: Vec<Bump> = (0..10).map(|_| resolved_bump(&mut rng)).collect();
    let base = CarlemanWeight::new(
        weight_fn_catalog("quadratic").unwrap(),
        1.0,
        1.0,
        4.0,
        [0.5, 0.5, 0.5],
    )
    .unwrap();
    let levels = [9usize, 17, 33];
    let grids: Vec<Arc<Grid>> = levels.iter().map(|&n| unit_grid(n)).collect();

    let mut worst_regroup = 0.0f64;
    let mut worst_order = f64::INFINITY;
    for bump in &bumps {
        for (s, lambda) in [(4.0, 1.0), (4.0, 2.0), (16.0, 1.0), (16.0, 2.0)] {
            let w = base.with_params(s, lambda);
            // exact regrouping P1 + P2 = expanded, checked midscale
            let u17 = bump.to_field(grids[1].clone());
            let dec = decompose_p(&u17, &w, &coeffs).unwrap();
            let scale = dec.expanded.max_abs().max(1e-300);
            for i in 0..u17.grid.len() {
                let d = (dec.p1.data[i] + dec.p2.data[i] - dec.expanded.data[i]).abs();
                worst_regroup = worst_regroup.max(d / scale);
            }
            // refinement of the direct-vs-expanded mismatch
            let mut errs = Vec::new();
            for g in &grids {
                let u = bump.to_field(g.clone());
                let (mut direct, expanded) = conjugated_apply(&u, &w, &coeffs).unwrap();
                direct.axpy(-1.0, &expanded);
                errs.push(direct.l2_norm() / expanded.l2_norm().max(1e-300));
            }
            let order = (errs[1] / errs[2]).log2();
            worst_order = worst_order.min(order);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_regroup <= 1e-12 && worst_order >= 1.8 && elapsed < 120.0;
    verdict(
        1,
        "conjugation identity",
        ok,
        &format!(
            "regroup {worst_regroup:.2e}, min order {worst_order:.2}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_2_adjoint_identity() {
    let start = Instant::now();
    let varying = CoefficientBuilder::new("t")
        .growth(Arc::new(|tau| 0.3 + 0.5 * tau), Arc::new(|_| 0.5))
        .build();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bu = resolved_bump(&mut rng);
    let bv = resolved_bump(&mut rng);
    let mut resid = Vec::new();
    for n in [9usize, 17, 33] {
        let g = unit_grid(n);
        resid.push(adjoint_check(&bu.to_field(g.clone()), &bv.to_field(g), &varying).unwrap());
    }
    let order = (resid[1] / resid[2]).log2();
    let monotone = resid[0] > resid[1] && resid[1] > resid[2];
    // constant growth modulus: the discrete identity telescopes exactly
    let g_const = CoefficientBuilder::new("t").growth_const(0.4).build();
    let g33 = unit_grid(33);
    let r_const = adjoint_check(&bu.to_field(g33.clone()), &bv.to_field(g33), &g_const).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = order >= 1.8 && monotone && r_const <= 1e-8 && elapsed < 60.0;
    verdict(
        2,
        "adjoint identity",
        ok,
        &format!(
            "order {order:.2}, residuals {:.3e}/{:.3e}/{:.3e}, g-const {r_const:.2e}, {elapsed:.1}s",
            resid[0], resid[1], resid[2]
        ),
    );
}

#[test]
fn criterion_3_empirical_carleman_estimate() {
    let start = Instant::now();
    let coeffs = preset("constant").unwrap();
    let g = unit_grid(17);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let bumps: Vec<Field> = (0..20)
        .map(|_| Bump::random(&g, 2, &mut rng).to_field(g.clone()))
        .collect();
    let base = CarlemanWeight::new(
        weight_fn_catalog("affine-sweep").unwrap(),
        0.2,
        1.0,
        4.0,
        [0.5, 0.5, 0.5],
    )
    .unwrap();
    let cfg = SweepConfig {
        s_values: vec![4.0, 8.0, 16.0, 32.0, 64.0],
        lambda_values: vec![1.0, 2.0, 4.0],
        divergence_factor: 1.5,
    };
    let rep = sweep_verify(&bumps, &base, &coeffs, &cfg).unwrap();
    let all_finite = rep
        .rows
        .iter()
        .all(|r| !r.skipped && r.ratio.is_finite() && r.ln_lhs_total.is_finite());
    let mut worst_growth = 0.0f64;
    for bump_id in 0..bumps.len() {
        for &lambda in &cfg.lambda_values {
            let trace = rep.ratio_trace(bump_id, lambda);
            let last = trace[trace.len() - 1].1;
            let prev = trace[trace.len() - 2].1;
            worst_growth = worst_growth.max((last - prev).exp());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = all_finite && rep.verdict && worst_growth <= 1.5 && elapsed < 600.0;
    verdict(
        3,
        "empirical Carleman estimate",
        ok,
        &format!(
            "300 rows finite: {all_finite}, worst ratio(64)/ratio(32) {worst_growth:.3}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_4_forward_solver_mms() {
    let start = Instant::now();
    let spec = DomainSpec {
        t_max: 0.5,
        ..unit_spec()
    };
    // combined splitting: transport + diffusion-reaction, birth off,
    // u* = cos(pi x) sin(pi a) sin(pi tau) e^{-t}
    let (nu, cc, g0) = (0.05, 0.2, 0.4);
    let mask = TermMask {
        birth: false,
        ..TermMask::default()
    };
    let combined = convergence_study(
        3,
        9,
        |n| {
            Ok(ForwardProblem {
                grid: build_grid(&spec, &[n, n, n, n])?,
                coeffs: CoefficientBuilder::new("t")
                    .diffusion_const(nu)
                    .reaction_const(cc)
                    .growth_const(g0)
                    .build(),
                initial: Arc::new(|x, a, tau| (PI * x[0]).cos() * (PI * a).sin() * (PI * tau).sin()),
                source: Some(Arc::new(move |x, t, a, tau| {
                    let e = (-t).exp();
                    let sx = (PI * x[0]).cos();
                    e * sx
                        * ((-1.0 + nu * PI * PI + cc) * (PI * a).sin() * (PI * tau).sin()
                            + PI * (PI * a).cos() * (PI * tau).sin()
                            + g0 * PI * (PI * a).sin() * (PI * tau).cos())
                })),
                mask,
            })
        },
        |x, t, a, tau| (PI * x[0]).cos() * (PI * a).sin() * (PI * tau).sin() * (-t).exp(),
    )
    .unwrap();
    let combined_order = *combined.orders.last().unwrap();

    // pure diffusion: second order in (x, t)
    let dmask = TermMask {
        advect_age: false,
        advect_size: false,
        birth: false,
        diffusion: true,
    };
    let factor = -1.0 + nu * PI * PI + cc;
    let diffusion = convergence_study(
        3,
        5,
        |n| {
            Ok(ForwardProblem {
                grid: build_grid(&spec, &[n, n, 3, 3])?,
                coeffs: CoefficientBuilder::new("t")
                    .diffusion_const(nu)
                    .reaction_const(cc)
                    .build(),
                initial: Arc::new(|x, _, _| (PI * x[0]).cos()),
                source: Some(Arc::new(move |x, t, _, _| {
                    factor * (PI * x[0]).cos() * (-t).exp()
                })),
                mask: dmask,
            })
        },
        |x, t, _, _| (PI * x[0]).cos() * (-t).exp(),
    )
    .unwrap();
    let diffusion_order = *diffusion.orders.last().unwrap();

    // zero data stays bitwise zero
    let zero = solve_forward(&ForwardProblem {
        grid: build_grid(&spec, &[9, 9, 9, 9]).unwrap(),
        coeffs: preset("constant").unwrap(),
        initial: Arc::new(|_, _, _| 0.0),
        source: None,
        mask: TermMask::default(),
    })
    .unwrap();
    let bitwise_zero = zero.field.data.iter().all(|v| v.to_bits() == 0);

    let elapsed = start.elapsed().as_secs_f64();
    let ok = combined_order >= 0.9 && diffusion_order >= 1.8 && bitwise_zero && elapsed < 300.0;
    verdict(
        4,
        "forward-solver MMS",
        ok,
        &format!(
            "combined order {combined_order:.2}, diffusion order {diffusion_order:.2}, zero bitwise: {bitwise_zero}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_5_geometry() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut ok = true;
    for kind in ["unit-ball", "unit-interval", "interval-gamma"] {
        let cli = Cli::parse_from([
            "carleman-lab",
            if kind == "interval-gamma" {
                "uc-demo"
            } else {
                "geometry-check"
            },
        ]);
        let mut cfg = cli::resolve_config(&cli).unwrap();
        if kind == "unit-ball" {
            cfg.geometry.kind = "unit-ball".into();
            cfg.geometry.n = 0; // pick via suggest_n
        }
        let (geo, _) = cli::build_geometry(&cfg).unwrap();
        let strict = geo.mu[0] < geo.mu[1] && geo.mu[1] < geo.mu[2] && geo.mu[2] < geo.mu[3];
        let rep = carleman_lab::geometry::verify_inclusions(&geo, 10_000, 42);
        ok &= strict && rep.pass && rep.counterexamples.is_empty();
        detail.push_str(&format!(
            "{kind}: mu strict {strict}, {} inner / {} outer / {} flips, {} counterexamples; ",
            rep.inner_checked,
            rep.outer_checked,
            rep.flip_checked,
            rep.counterexamples.len()
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 60.0;
    detail.push_str(&format!("{elapsed:.1}s"));
    verdict(5, "section-3 geometry", ok, &detail);
}

#[test]
fn criterion_6_decay_mechanism() {
    let start = Instant::now();
    // example levels: lambda = 1, ||d|| = 1, beta eps^2 = 0.4, N = 4
    let mu = mu_levels(1.0, 0.4, 1.0, 4);
    let exact_gap = (0.9f64).exp() - (0.65f64).exp();
    let gap_ok = ((mu[3] - mu[2]) - exact_gap).abs() < 1e-14;
    let at_10 = (-2.0 * 10.0 * exact_gap).exp();
    let approx_ok = (1.8e-5..2.0e-5).contains(&at_10);

    // decay table on a shipped geometry
    let cli = Cli::parse_from(["carleman-lab", "uc-demo"]);
    let cfg = cli::resolve_config(&cli).unwrap();
    let (geo, spec) = cli::build_geometry(&cfg).unwrap();
    let g = build_grid(&spec, &[9, 9, 9, 9]).unwrap();
    let u = Field::from_fn(g, |x, t, a, tau| (1.0 + x[0]) * t * a * tau);
    let s_values = [2.0, 4.0, 8.0, 10.0, 16.0];
    let table = decay_experiment(&u, &geo, &s_values).unwrap();
    let mut bound_ok = table.verdict;
    for row in &table.rows {
        let expect = geo.decay_bound(row.s);
        bound_ok &= ((row.bound - expect) / expect).abs() <= 1e-12;
    }
    let slope_expect = -2.0 * (geo.mu[3] - geo.mu[2]);
    let mut slope_ok = true;
    for pair in table.rows.windows(2) {
        let slope = (pair[1].bound.ln() - pair[0].bound.ln()) / (pair[1].s - pair[0].s);
        slope_ok &= (slope - slope_expect).abs() <= 1e-10;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = gap_ok && approx_ok && bound_ok && slope_ok && elapsed < 60.0;
    verdict(
        6,
        "decay mechanism",
        ok,
        &format!(
            "mu4-mu3 exact: {gap_ok}, s=10 bound {at_10:.4e}, column exact: {bound_ok}, slope exact: {slope_ok}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_7_unique_continuation() {
    let start = Instant::now();
    let cli = Cli::parse_from(["carleman-lab", "uc-demo"]);
    let cfg = cli::resolve_config(&cli).unwrap();
    let (geo, spec) = cli::build_geometry(&cfg).unwrap();
    let grid = build_grid(&spec, &cfg.resolution4().unwrap()).unwrap();
    let coeffs = preset(&cfg.preset).unwrap();
    let traj = solve_forward(&ForwardProblem {
        grid,
        coeffs: coeffs.clone(),
        initial: cli::demo_initial(&spec),
        source: None,
        mask: TermMask::default(),
    })
    .unwrap();

    let exact_data = extract_cauchy(&traj.field, &geo, 0.0, cfg.seed).unwrap();
    let rec = reconstruct(&exact_data, &geo, &coeffs, cfg.uc.s, 1e-6).unwrap();
    let err_exact = interior_error(&geo, &rec.field, &traj.field).unwrap();

    let noisy_data = extract_cauchy(&traj.field, &geo, 0.01, cfg.seed).unwrap();
    let rec_noisy = reconstruct(&noisy_data, &geo, &coeffs, cfg.uc.s, 1e-3).unwrap();
    let err_noisy = interior_error(&geo, &rec_noisy.field, &traj.field).unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let ok = err_exact <= 0.1 && err_noisy <= 0.3 && elapsed < 600.0;
    verdict(
        7,
        "unique-continuation demonstration",
        ok,
        &format!("exact {err_exact:.4}, 1% noise {err_noisy:.4}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for sub in ["geometry-check", "simulate"] {
        let base = std::env::temp_dir().join(format!(
            "carleman-accept-{}-{sub}",
            std::process::id()
        ));
        let mut csvs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        for pass in 0..2 {
            let out = base.join(pass.to_string());
            let _ = std::fs::remove_dir_all(&out);
            let cli = Cli::parse_from([
                "carleman-lab",
                sub,
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "7",
            ]);
            assert_eq!(cli::run(&cli), 0, "{sub} run failed");
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
                .unwrap()
                .filter_map(|e| {
                    let p = e.unwrap().path();
                    if p.extension().is_some_and(|x| x == "csv") {
                        Some((
                            p.file_name().unwrap().to_string_lossy().into_owned(),
                            std::fs::read(&p).unwrap(),
                        ))
                    } else {
                        None
                    }
                })
                .collect();
            files.sort();
            csvs.push(files);
        }
        let identical = csvs[0] == csvs[1] && !csvs[0].is_empty();
        ok &= identical;
        detail.push_str(&format!("{sub}: {} CSVs identical: {identical}; ", csvs[0].len()));
        let _ = std::fs::remove_dir_all(&base);
    }
    let elapsed = start.elapsed().as_secs_f64();
    detail.push_str(&format!("{elapsed:.1}s"));
    verdict(8, "determinism", ok, &detail);
}
