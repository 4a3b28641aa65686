//! Command-line front end: four experiment subcommands sharing the same
//! flag set, each writing a manifest plus CSV/SVG artifacts into --out.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::carleman::{weight_fn_catalog, Bump, CarlemanWeight};
use crate::carleman::sweep::{sweep_verify, SweepConfig};
use crate::config::{parse_list, parse_resolution, ExperimentConfig};
use crate::continuation::{decay_experiment, extract_cauchy, interior_error, reconstruct};
use crate::domain::coeffs::{preset, preset_with_csv_reaction};
use crate::domain::{build_grid, CoefficientSet, DomainSpec, SpatialDomain};
use crate::error::{Error, Result};
use crate::exec;
use crate::forward::{solve_forward, ForwardProblem, TermMask};
use crate::geometry::{
    build_uc_geometry, suggest_n, verify_inclusions, weight_catalog, Gamma, UCGeometry,
};
use crate::report::{write_csv, write_json, write_svg_plot, Cell, Series, Table};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser, Debug)]
#[command(name = "carleman-lab", version, about = "Numerical laboratory for weighted energy estimates and unique continuation in a structured population model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment config; flags below override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Artifact directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Nodes per axis: N or N,N,N,N for (x, t, a, tau).
    #[arg(long, global = true)]
    pub resolution: Option<String>,

    /// Comma-separated s values for sweeps.
    #[arg(long = "s-list", global = true)]
    pub s_list: Option<String>,

    /// Comma-separated lambda values for sweeps.
    #[arg(long = "lambda-list", global = true)]
    pub lambda_list: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// Run the forward splitting solver and dump diagnostics.
    Simulate,
    /// Sweep the weighted energy inequality over (s, lambda).
    CarlemanVerify,
    /// Reconstruct a forward solution from lateral Cauchy data.
    UcDemo,
    /// Build the level-set geometry and verify the inclusion chain.
    GeometryCheck,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CarlemanVerify => "carleman-verify",
            Command::UcDemo => "uc-demo",
            Command::GeometryCheck => "geometry-check",
        }
    }
}

/// Defaults tuned per experiment; a config file replaces them wholesale.
fn default_config_for(kind: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.kind = kind.to_string();
    if kind == "uc-demo" {
        cfg.geometry.kind = "interval-gamma".into();
        cfg.geometry.omega0_lo = 0.75;
        cfg.geometry.omega0_hi = 1.0;
        cfg.geometry.n = 16;
        cfg.geometry.center = [0.36, 0.64, 0.5];
        cfg.sweep.s_list = vec![2.0, 4.0, 8.0, 10.0, 16.0];
    }
    cfg
}

/// Resolve config file + flag overrides into a validated config.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => default_config_for(kind),
    };
    cfg.kind = kind.to_string();
    if let Some(out) = &cli.out {
        cfg.out = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = &cli.resolution {
        cfg.resolution = parse_resolution(r)?;
    }
    if let Some(s) = &cli.s_list {
        cfg.sweep.s_list = parse_list(s)?;
    }
    if let Some(l) = &cli.lambda_list {
        cfg.sweep.lambda_list = parse_list(l)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Honor CARLEMAN_LAB_THREADS: 1 forces the sequential path, larger values
/// cap the rayon pool.
pub fn apply_thread_cap() {
    if let Ok(v) = std::env::var("CARLEMAN_LAB_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => {
                eprintln!("ignoring CARLEMAN_LAB_THREADS={v:?}: expected a positive integer");
            }
            Ok(1) => exec::force_sequential(true),
            Ok(_n) => {
                #[cfg(feature = "parallel")]
                {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(_n)
                        .build_global();
                }
            }
        }
    }
}

/// Run an experiment; returns the process exit code (0 ok, 1 verdict
/// failure, 2 config/runtime error).
pub fn run(cli: &Cli) -> i32 {
    apply_thread_cap();
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let started = Instant::now();
    let out = PathBuf::from(&cfg.out);
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return 2;
    }
    let outcome = match cfg.kind.as_str() {
        "simulate" => run_simulate(&cfg, &out),
        "carleman-verify" => run_carleman_verify(&cfg, &out),
        "uc-demo" => run_uc_demo(&cfg, &out),
        "geometry-check" => run_geometry_check(&cfg, &out),
        _ => unreachable!("validated"),
    };
    match outcome {
        Ok(run) => {
            let code = if run.verdict { 0 } else { 1 };
            if let Err(e) = write_manifest(&cfg, &out, &run, started.elapsed().as_millis()) {
                eprintln!("error: {e}");
                return 2;
            }
            if !run.verdict {
                eprintln!("verdict failure: {}", run.summary);
            } else {
                println!("{}", run.summary);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

struct RunOutcome {
    verdict: bool,
    summary: String,
    artifacts: Vec<String>,
    details: serde_json::Value,
}

fn write_manifest(
    cfg: &ExperimentConfig,
    out: &Path,
    run: &RunOutcome,
    elapsed_ms: u128,
) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "carleman-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg).map_err(std::io::Error::other)?,
        "verdict": run.verdict,
        "artifacts": run.artifacts,
        "elapsed_ms": elapsed_ms as u64,
        "details": run.details,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

fn load_coeffs(cfg: &ExperimentConfig) -> Result<CoefficientSet> {
    match &cfg.reaction_csv {
        Some(p) => preset_with_csv_reaction(&cfg.preset, Path::new(p)),
        None => preset(&cfg.preset),
    }
}

/// Build the unique-continuation geometry described by the config. Only
/// 1-D habitats carry a full grid; the unit-ball catalog entry is used for
/// sampling-based checks.
pub fn build_geometry(cfg: &ExperimentConfig) -> Result<(UCGeometry, DomainSpec)> {
    let base = weight_catalog(&cfg.geometry.kind)?;
    let g = &cfg.geometry;
    let mut spec = cfg.domain.to_spec();
    let (omega0, gamma) = match cfg.geometry.kind.as_str() {
        "unit-ball" => {
            spec.spatial = SpatialDomain::Ball { dim: 2, radius: 1.0 };
            (
                SpatialDomain::Ball {
                    dim: 2,
                    radius: g.omega0_hi,
                },
                Gamma::ball_full(1.0),
            )
        }
        "interval-gamma" => {
            let (_, hi) = match spec.spatial {
                SpatialDomain::Interval { lo, hi } => (lo, hi),
                _ => return Err(Error::Config("interval geometry needs an interval habitat".into())),
            };
            (
                SpatialDomain::Interval {
                    lo: g.omega0_lo,
                    hi: g.omega0_hi,
                },
                Gamma::interval_right(hi),
            )
        }
        _ => {
            let (lo, hi) = match spec.spatial {
                SpatialDomain::Interval { lo, hi } => (lo, hi),
                _ => return Err(Error::Config("interval geometry needs an interval habitat".into())),
            };
            (
                SpatialDomain::Interval {
                    lo: g.omega0_lo,
                    hi: g.omega0_hi,
                },
                Gamma::interval_both(lo, hi),
            )
        }
    };
    let n = if g.n == 0 {
        suggest_n(&base, &omega0, 64)?
    } else {
        g.n
    };
    let geo = build_uc_geometry(base, &spec, omega0, gamma, g.epsilon, n, g.lambda, g.center)?;
    Ok((geo, spec))
}

fn run_geometry_check(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let (geo, _spec) = build_geometry(cfg)?;
    let inc = verify_inclusions(&geo, 10_000, cfg.seed);

    let mut levels = Table::new(
        "levels",
        &["kind", "epsilon", "n", "lambda", "beta_w", "mu1", "mu2", "mu3", "mu4"],
    );
    levels.push(vec![
        Cell::Text(cfg.geometry.kind.clone()),
        Cell::Float(geo.epsilon),
        Cell::Int(geo.n_param as i64),
        Cell::Float(geo.lambda),
        Cell::Float(geo.beta_w),
        Cell::Float(geo.mu[0]),
        Cell::Float(geo.mu[1]),
        Cell::Float(geo.mu[2]),
        Cell::Float(geo.mu[3]),
    ]);
    let mut artifacts = vec![rel(out, &write_csv(out, &levels)?)];

    let mut checks = Table::new("inclusions", &["check", "samples", "counterexamples"]);
    checks.push(vec![
        Cell::Text("inner".into()),
        Cell::Int(inc.inner_checked as i64),
        Cell::Int(count_prefix(&inc.counterexamples, "inner") as i64),
    ]);
    checks.push(vec![
        Cell::Text("outer".into()),
        Cell::Int(inc.outer_checked as i64),
        Cell::Int(count_prefix(&inc.counterexamples, "outer") as i64),
    ]);
    checks.push(vec![
        Cell::Text("boundary-flip".into()),
        Cell::Int(inc.flip_checked as i64),
        Cell::Int(count_prefix(&inc.counterexamples, "flip") as i64),
    ]);
    artifacts.push(rel(out, &write_csv(out, &checks)?));

    // cross-section of phi through the center against the four levels
    let bounds = geo.spec.spatial.bounds();
    let (xlo, xhi) = bounds[0];
    let m = 200;
    let dim = geo.spec.spatial.dim();
    let phi_pts: Vec<(f64, f64)> = (0..=m)
        .map(|i| {
            let x0 = xlo + (xhi - xlo) * i as f64 / m as f64;
            let x = vec![x0, 0.0];
            (
                x0,
                geo.phi(&x[..dim], geo.center[0], geo.center[1], geo.center[2]),
            )
        })
        .collect();
    let mut series = vec![Series {
        label: "phi at center".into(),
        points: phi_pts,
    }];
    for (k, mu) in geo.mu.iter().enumerate() {
        series.push(Series {
            label: format!("mu{}", k + 1),
            points: vec![(xlo, *mu), (xhi, *mu)],
        });
    }
    let svg = out.join("phi_section.svg");
    write_svg_plot(&svg, "phi cross-section vs levels", "x", "phi", &series, false)?;
    artifacts.push(rel(out, &svg));

    Ok(RunOutcome {
        verdict: inc.pass,
        summary: format!(
            "geometry-check: {} inner + {} outer samples, {} boundary nodes, {} counterexamples",
            inc.inner_checked,
            inc.outer_checked,
            inc.flip_checked,
            inc.counterexamples.len()
        ),
        artifacts,
        details: serde_json::json!({
            "mu": geo.mu,
            "beta_w": geo.beta_w,
            "n": geo.n_param,
            "counterexamples": inc.counterexamples,
        }),
    })
}

fn count_prefix(v: &[String], p: &str) -> usize {
    v.iter().filter(|s| s.starts_with(p)).count()
}

fn run_carleman_verify(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let spec = cfg.domain.to_spec();
    let grid = build_grid(&spec, &cfg.resolution4()?)?;
    let coeffs = load_coeffs(cfg)?;
    let weight = CarlemanWeight::new(
        weight_fn_catalog(&cfg.sweep.weight)?,
        cfg.sweep.beta_w,
        1.0,
        1.0,
        cfg.sweep.weight_center,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bumps: Vec<_> = (0..cfg.sweep.bumps.max(1))
        .map(|_| Bump::random(&grid, 2, &mut rng).to_field(grid.clone()))
        .collect();
    let sweep_cfg = SweepConfig {
        s_values: cfg.sweep.s_list.clone(),
        lambda_values: cfg.sweep.lambda_list.clone(),
        divergence_factor: cfg.sweep.divergence_factor,
    };
    let report = sweep_verify(&bumps, &weight, &coeffs, &sweep_cfg)?;

    let mut table = Table::new(
        "sweep",
        &[
            "bump", "s", "lambda", "lhs_transport", "lhs_gradient", "lhs_zeroth",
            "lhs_total", "rhs", "ratio", "skipped", "note",
        ],
    );
    for r in &report.rows {
        table.push(vec![
            Cell::Int(r.bump_id as i64),
            Cell::Float(r.s),
            Cell::Float(r.lambda),
            Cell::LnFloat(r.ln_lhs_transport),
            Cell::LnFloat(r.ln_lhs_gradient),
            Cell::LnFloat(r.ln_lhs_zeroth),
            Cell::LnFloat(r.ln_lhs_total),
            Cell::LnFloat(r.ln_rhs),
            Cell::LnFloat(r.ln_lhs_total - r.ln_rhs),
            Cell::Bool(r.skipped),
            Cell::Text(r.note.clone()),
        ]);
    }
    let mut artifacts = vec![rel(out, &write_csv(out, &table)?)];

    let mut series = Vec::new();
    for &lambda in &cfg.sweep.lambda_list {
        let trace = report.ratio_trace(0, lambda);
        if !trace.is_empty() {
            series.push(Series {
                label: format!("lambda={lambda}"),
                points: trace
                    .iter()
                    .map(|&(s, lr)| (s, lr / std::f64::consts::LN_10))
                    .collect(),
            });
        }
    }
    if !series.is_empty() {
        let svg = out.join("ratio_trace.svg");
        write_svg_plot(&svg, "lhs/rhs ratio, bump 0", "s", "log10 ratio", &series, false)?;
        artifacts.push(rel(out, &svg));
    }

    Ok(RunOutcome {
        verdict: report.verdict,
        summary: format!(
            "carleman-verify: {} rows over {} bumps, {} offenders",
            report.rows.len(),
            bumps.len(),
            report.offenders.len()
        ),
        artifacts,
        details: serde_json::json!({
            "offenders": report.offenders,
            "rows": report.rows.len(),
        }),
    })
}

/// Initial density used by simulate and uc-demo: mild spatial modulation
/// times compactly supported age/size profiles (zero at tau_min, so the
/// inflow condition holds exactly).
pub fn demo_initial(spec: &DomainSpec) -> crate::forward::InitialFn {
    let (a_c, a_r) = (0.32 * spec.a_max, 0.28 * spec.a_max);
    let tau_c = spec.tau_min + 0.36 * (spec.tau_max - spec.tau_min);
    let tau_r = 0.35 * (spec.tau_max - spec.tau_min);
    Arc::new(move |x: &[f64], a: f64, tau: f64| {
        let poly = |r: f64| {
            let q = 1.0 - r * r;
            if q > 0.0 {
                q.powi(4)
            } else {
                0.0
            }
        };
        (1.0 + 0.3 * (std::f64::consts::PI * x[0]).cos())
            * poly((a - a_c) / a_r)
            * poly((tau - tau_c) / tau_r)
    })
}

fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let spec = cfg.domain.to_spec();
    let grid = build_grid(&spec, &cfg.resolution4()?)?;
    let coeffs = load_coeffs(cfg)?;
    let problem = ForwardProblem {
        grid: grid.clone(),
        coeffs,
        initial: demo_initial(&spec),
        source: None,
        mask: TermMask::default(),
    };
    let traj = solve_forward(&problem)?;

    let t_axis = grid.t_axis();
    let dt = grid.spacing[t_axis];
    let mut diag = Table::new("simulate", &["step", "time", "total_population", "max_norm"]);
    let mut pop_points = Vec::new();
    for (i, (&pop, &mx)) in traj
        .total_population
        .iter()
        .zip(&traj.max_norm)
        .enumerate()
    {
        diag.push(vec![
            Cell::Int(i as i64),
            Cell::Float(i as f64 * dt),
            Cell::Float(pop),
            Cell::Float(mx),
        ]);
        pop_points.push((i as f64 * dt, pop));
    }
    let mut artifacts = vec![rel(out, &write_csv(out, &diag)?)];

    // final-time slice for downstream inspection
    let nt = grid.shape[t_axis];
    let mut slice = Table::new("final_slice", &["x", "a", "tau", "u"]);
    let naxes = grid.naxes();
    let mut c = [0.0; 5];
    let mut idx = vec![0usize; naxes];
    for i in 0..grid.len() {
        grid.unravel(i, &mut idx);
        if idx[t_axis] != nt - 1 {
            continue;
        }
        grid.coords(i, &mut c[..naxes]);
        slice.push(vec![
            Cell::Float(c[0]),
            Cell::Float(c[naxes - 2]),
            Cell::Float(c[naxes - 1]),
            Cell::Float(traj.field.data[i]),
        ]);
    }
    artifacts.push(rel(out, &write_csv(out, &slice)?));

    let svg = out.join("population.svg");
    write_svg_plot(
        &svg,
        "total population",
        "t",
        "integral of u",
        &[Series {
            label: cfg.preset.clone(),
            points: pop_points,
        }],
        false,
    )?;
    artifacts.push(rel(out, &svg));

    let finite = traj.field.all_finite();
    Ok(RunOutcome {
        verdict: finite,
        summary: format!(
            "simulate: {} steps, final population {:.6e}, initial birth mismatch {:.3e}",
            traj.total_population.len().saturating_sub(1),
            traj.total_population.last().copied().unwrap_or(0.0),
            traj.initial_mismatch
        ),
        artifacts,
        details: serde_json::json!({
            "initial_mismatch": traj.initial_mismatch,
            "final_population": traj.total_population.last(),
            "max_norm": traj.max_norm.iter().cloned().fold(0.0f64, f64::max),
        }),
    })
}

fn run_uc_demo(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let (geo, spec) = build_geometry(cfg)?;
    if spec.spatial.dim() != 1 {
        return Err(Error::Unsupported("uc-demo runs on interval habitats".into()));
    }
    let grid = build_grid(&spec, &cfg.resolution4()?)?;
    let coeffs = load_coeffs(cfg)?;
    let problem = ForwardProblem {
        grid: grid.clone(),
        coeffs: coeffs.clone(),
        initial: demo_initial(&spec),
        source: None,
        mask: TermMask::default(),
    };
    let traj = solve_forward(&problem)?;

    let mut table = Table::new(
        "uc_demo",
        &[
            "alpha", "s", "noise", "equation_residual", "data_mismatch",
            "interior_error", "cg_iterations", "converged",
        ],
    );
    let mut errors = Vec::new();
    for (alpha, noise) in [(cfg.uc.alpha, 0.0), (cfg.uc.noise_alpha, cfg.uc.noise)] {
        let data = extract_cauchy(&traj.field, &geo, noise, cfg.seed)?;
        let rec = reconstruct(&data, &geo, &coeffs, cfg.uc.s, alpha)?;
        let err = interior_error(&geo, &rec.field, &traj.field)?;
        errors.push(err);
        table.push(vec![
            Cell::Float(alpha),
            Cell::Float(cfg.uc.s),
            Cell::Float(noise),
            Cell::Float(rec.equation_residual),
            Cell::Float(rec.data_mismatch),
            Cell::Float(err),
            Cell::Int(rec.cg.iterations as i64),
            Cell::Bool(rec.cg.converged),
        ]);
    }
    let mut artifacts = vec![rel(out, &write_csv(out, &table)?)];

    let decay = decay_experiment(&traj.field, &geo, &cfg.sweep.s_list)?;
    let mut dt = Table::new("decay", &["s", "bound", "carleman_ratio", "measured", "skipped"]);
    for r in &decay.rows {
        dt.push(vec![
            Cell::Float(r.s),
            Cell::Float(r.bound),
            Cell::Float(r.carleman_ratio),
            Cell::Float(r.measured),
            Cell::Bool(r.skipped),
        ]);
    }
    artifacts.push(rel(out, &write_csv(out, &dt)?));

    let svg = out.join("decay.svg");
    write_svg_plot(
        &svg,
        "interior decay bound",
        "s",
        "bound",
        &[Series {
            label: "exp(-2 s (mu4 - mu3))".into(),
            points: decay.rows.iter().map(|r| (r.s, r.bound)).collect(),
        }],
        true,
    )?;
    artifacts.push(rel(out, &svg));

    let verdict = errors[0] <= 0.1 && errors[1] <= 0.3 && decay.verdict;
    Ok(RunOutcome {
        verdict,
        summary: format!(
            "uc-demo: interior error {:.4} exact, {:.4} at {}% noise",
            errors[0],
            errors[1],
            100.0 * cfg.uc.noise
        ),
        artifacts,
        details: serde_json::json!({
            "interior_error_exact": errors[0],
            "interior_error_noisy": errors[1],
            "decay_verdict": decay.verdict,
            "mu": geo.mu,
        }),
    })
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::parse_from(args)
    }

    #[test]
    fn flags_override_config_defaults() {
        let c = cli(&[
            "carleman-lab",
            "geometry-check",
            "--seed",
            "7",
            "--resolution",
            "9",
            "--s-list",
            "2,4",
        ]);
        let cfg = resolve_config(&c).unwrap();
        assert_eq!(cfg.kind, "geometry-check");
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.resolution, vec![9]);
        assert_eq!(cfg.sweep.s_list, vec![2.0, 4.0]);
    }

    #[test]
    fn bad_resolution_is_config_error() {
        let c = cli(&["carleman-lab", "simulate", "--resolution", "9,9"]);
        assert!(resolve_config(&c).is_err());
    }

    #[test]
    fn subcommand_wins_over_config_kind() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.toml");
        std::fs::write(&p, "kind = \"simulate\"\n").unwrap();
        let mut c = cli(&["carleman-lab", "geometry-check"]);
        c.config = Some(p);
        let cfg = resolve_config(&c).unwrap();
        assert_eq!(cfg.kind, "geometry-check");
    }

    #[test]
    fn geometry_check_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = default_config_for("geometry-check");
        let run = run_geometry_check(&cfg, dir.path()).unwrap();
        assert!(run.verdict, "{:?}", run.details);
        assert!(dir.path().join("levels.csv").exists());
        assert!(dir.path().join("inclusions.csv").exists());
        assert!(dir.path().join("phi_section.svg").exists());
    }
}
