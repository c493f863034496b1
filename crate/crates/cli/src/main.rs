//! Command-line front end: configure a system from a TOML file, run
//! estimations, sweeps and the verification suites, and emit CSV or JSON.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 capability exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mayerkit::mayer::{coefficient_bound, decompose_pressure, estimate_c_n};
use mayerkit::report::{fmt_float, Table};
use mayerkit::ursell::{connected_graphs, EdgeWeights};
use mayerkit::{
    BuiltSystem, Configuration, Error, McSpec, RunConfig, SamplerSpec, ShellSpec,
};

#[derive(Parser)]
#[command(
    name = "mayerkit",
    about = "Activity-expansion numerics for particle systems with fixed boundary configurations",
    version
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Path to the run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the estimator master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (csv | json); defaults to the config, then csv.
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Report convergence radii and the constants feeding them.
    Radius,
    /// Estimate one anchored expansion coefficient.
    Cn {
        /// Coefficient order.
        #[arg(long)]
        n: usize,
        /// Anchor coordinates, comma-separated; defaults to the origin.
        #[arg(long)]
        x0: Option<String>,
    },
    /// Split the pressure into the interior polynomial and the bounded
    /// remainder at each activity.
    Decompose {
        /// Comma-separated activities.
        #[arg(long = "lambda-list", default_value = "0.0")]
        lambda_list: String,
    },
    /// Evaluate the remainder bound along a box-size sweep.
    Sweep {
        /// Comma-separated half sides.
        #[arg(long = "half-sides")]
        half_sides: String,
        /// Activity at which the remainder bound is reported.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run a named verification suite (graphs | bounds | identity | oracle | all).
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Dump per-graph contributions of the connected-part sum (up to 4 points).
    Graphs {
        /// Semicolon-separated points, coordinates comma-separated.
        #[arg(long)]
        points: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::OverCap { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_system(common: &Common) -> Result<(BuiltSystem, RunConfig), Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = common.seed {
        config.estimator.seed = seed;
    }
    if let Some(samples) = common.samples {
        config.estimator.samples = samples;
    }
    let base = path.parent().map(|p| p.to_path_buf());
    let system = config.build(base.as_deref())?;
    Ok((system, config))
}

fn emit(common: &Common, config: Option<&RunConfig>, table: Table) -> Result<(), Error> {
    let format = common
        .format
        .clone()
        .or_else(|| config.and_then(|c| c.output.format.clone()))
        .unwrap_or_else(|| "csv".into());
    let text = match format.as_str() {
        "csv" => table.to_csv(),
        "json" => table.to_json(),
        other => {
            return Err(Error::Config(format!(
                "unknown format '{other}' (csv | json)"
            )))
        }
    };
    let out = common
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.out.clone().map(PathBuf::from)));
    match out {
        Some(path) => {
            std::fs::write(&path, &text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(cfg) = config {
                let summary = serde_json::json!({
                    "config_hash": cfg.hash(),
                    "config": cfg,
                    "rows": table.rows.len(),
                    "columns": table.columns,
                });
                let spath = path.with_extension("summary.json");
                std::fs::write(&spath, mayerkit::report::to_json_pretty(&summary))
                    .map_err(|e| Error::Config(format!("{}: {e}", spath.display())))?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse '{t}' in {what}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Radius => {
            let (sys, config) = load_system(&cli.common)?;
            let beta = sys.thermo.beta;
            let rho = sys.boundary.rho_omega();
            let mut t = Table::new(vec![
                "config_hash",
                "beta",
                "c_decl",
                "c_v",
                "kappa",
                "rho_omega",
                "radius_free",
                "radius_boundary",
            ]);
            t.push_row(vec![
                sys.config_hash.clone(),
                fmt_float(beta),
                fmt_float(sys.potential.c_decl()),
                fmt_float(sys.potential.c_v_integral(beta)?),
                fmt_float(sys.potential.kappa()),
                fmt_float(rho),
                fmt_float(sys.potential.radius_free(beta)?),
                fmt_float(sys.potential.radius_boundary(beta, rho)?),
            ]);
            emit(&cli.common, Some(&config), t)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cn { n, x0 } => {
            let (sys, config) = load_system(&cli.common)?;
            let x0 = match x0 {
                Some(text) => parse_floats(text, "--x0")?,
                None => vec![0.0; sys.cube.dimension()],
            };
            let model = sys.model();
            let est = estimate_c_n(&model, &x0, *n, &sys.sampler)?;
            let bound =
                coefficient_bound(&sys.potential, sys.thermo.beta, *n, sys.boundary.rho_omega())?;
            let mut t = Table::new(vec![
                "config_hash",
                "half_side",
                "order",
                "x0",
                "value",
                "std_error",
                "samples",
                "bound",
                "method",
            ]);
            t.push_row(vec![
                sys.config_hash.clone(),
                fmt_float(sys.cube.half_side()),
                n.to_string(),
                x0.iter().map(|c| fmt_float(*c)).collect::<Vec<_>>().join(";"),
                fmt_float(est.value),
                fmt_float(est.std_error),
                est.samples.to_string(),
                fmt_float(bound),
                format!("{:?}", est.method),
            ]);
            emit(&cli.common, Some(&config), t)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Decompose { lambda_list } => {
            let (sys, config) = load_system(&cli.common)?;
            let lambdas = parse_floats(lambda_list, "--lambda-list")?;
            let model = sys.model();
            let mc = match sys.sampler {
                SamplerSpec::Mc(spec) => spec,
                SamplerSpec::Grid { .. } => McSpec::new(config.estimator.seed, 100_000),
            };
            let mut t = Table::new(vec![
                "config_hash",
                "half_side",
                "lambda",
                "n_cut",
                "eta",
                "eta_err",
                "xi_bound",
                "g_shrink",
                "radius_free",
                "radius_boundary",
                "in_boundary_disc",
            ]);
            let dec = decompose_pressure(&model, &sys.shell, 0.0, &mc)?;
            for &lambda in &lambdas {
                let (eta, err) = {
                    let (v, e) = dec.eta_at(num_complex::Complex64::new(lambda, 0.0));
                    (v.re, e)
                };
                t.push_row(vec![
                    sys.config_hash.clone(),
                    fmt_float(sys.cube.half_side()),
                    fmt_float(lambda),
                    dec.n_cut.to_string(),
                    fmt_float(eta),
                    fmt_float(err),
                    fmt_float(dec.xi_bound(lambda.abs())),
                    fmt_float(dec.g_shrink),
                    fmt_float(dec.radius_free),
                    fmt_float(dec.radius_boundary),
                    dec.in_boundary_disc(lambda.abs()).to_string(),
                ]);
            }
            emit(&cli.common, Some(&config), t)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { half_sides, lambda } => {
            let (_, mut config) = load_system(&cli.common)?;
            let halves = parse_floats(half_sides, "--half-sides")?;
            let mut t = Table::new(vec![
                "config_hash",
                "half_side",
                "n_cut",
                "rho_omega",
                "g_shrink",
                "lambda",
                "xi_bound",
                "radius_free",
                "radius_boundary",
            ]);
            let hash = config.hash();
            for &half in &halves {
                config.box_.half_side = half;
                let sys = config
                    .build(cli.common.config.as_deref().and_then(|p| p.parent()))?;
                let shell = ShellSpec::new(config.shell.h_exponent)?;
                let n_cut = shell.order_cutoff(&sys.cube, sys.potential.range())?;
                let regions = shell.regions(&sys.cube)?;
                let g = mayerkit::mayer::remainder_shrink_factor(
                    &regions,
                    sys.cube.volume(),
                    n_cut,
                );
                let beta = sys.thermo.beta;
                let rho = sys.boundary.rho_omega();
                let radius_boundary = sys.potential.radius_boundary(beta, rho)?;
                let lam = lambda.unwrap_or(sys.thermo.lambda);
                let xi = lam.abs()
                    * (beta * sys.potential.kappa() * rho).exp()
                    * (beta * sys.potential.c_decl() + 1.0).exp()
                    * g;
                t.push_row(vec![
                    hash.clone(),
                    fmt_float(half),
                    n_cut.to_string(),
                    fmt_float(rho),
                    fmt_float(g),
                    fmt_float(lam),
                    fmt_float(xi),
                    fmt_float(sys.potential.radius_free(beta)?),
                    fmt_float(radius_boundary),
                ]);
            }
            emit(&cli.common, Some(&config), t)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let checks = mayerkit::verify::run_suite(suite)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!(
                    "{} {} — {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!(
                "suite '{suite}': {} checks, {} passed, {failed} failed",
                checks.len(),
                checks.len() - failed,
            );
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Graphs { points } => {
            let (sys, config) = load_system(&cli.common)?;
            let pts: Vec<Vec<f64>> = points
                .split(';')
                .map(|p| parse_floats(p, "--points"))
                .collect::<Result<_, _>>()?;
            let m = pts.len();
            if m > 4 {
                return Err(Error::over_cap("per-graph dump", m, 4));
            }
            let cfg = Configuration::from_points(&pts)?;
            if cfg.dimension() != sys.cube.dimension() {
                return Err(Error::Config(
                    "point dimension disagrees with the configured system".into(),
                ));
            }
            let w = EdgeWeights::from_configuration(&sys.potential, sys.thermo.beta, &cfg);
            let mut t = Table::new(vec![
                "config_hash",
                "graph_index",
                "edge_mask",
                "edge_count",
                "product",
            ]);
            for (idx, g) in connected_graphs(m)?.enumerate() {
                let mut prod = 1.0;
                for (i, j) in g.edge_list() {
                    prod *= w.f(i, j);
                }
                t.push_row(vec![
                    sys.config_hash.clone(),
                    idx.to_string(),
                    format!("{:b}", g.edges),
                    g.edge_count().to_string(),
                    fmt_float(prod),
                ]);
            }
            emit(&cli.common, Some(&config), t)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
