//! Named verification checks shared by the CLI `verify` subcommand and the
//! acceptance suite. Every check is deterministic under its seed and
//! returns a pass/fail outcome with a one-line detail.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{BoundaryConfig, GeneratorSpec};
use crate::error::Result;
use crate::geometry::{Cube, CubeGrid, ShellSpec};
use crate::mayer::{
    check_inside_identity, coefficient_bound, estimate_c_n, estimate_c_n_volume_avg,
    remainder_shrink_factor, MajorantSeries, Model, SamplerSpec,
};
use crate::oracle::{consistency_check, tonks_pressure_coefficients};
use crate::potential::PairPotential;
use crate::sampler::McSpec;
use crate::ursell::{
    count_connected_graphs, count_trees, for_each_tree, tree_bound, ursell_graph_sum,
    ursell_subset_recursion, Configuration, EdgeWeights,
};

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

fn preset_pair() -> (PairPotential, PairPotential) {
    (
        PairPotential::hard_rod(1.0).expect("preset"),
        PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0)).expect("preset"),
    )
}

fn random_configuration(rng: &mut ChaCha8Rng, m: usize, span: f64) -> Configuration {
    Configuration::new(1, (0..m).map(|_| rng.random_range(0.0..span)).collect())
        .expect("nonempty")
}

/// Connected labeled graph counts for 3..=6 vertices against the exhaustive
/// enumeration's known values, and tree counts against `m^(m-2)`.
pub fn suite_graphs() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let expect = [(3usize, 4u64), (4, 38), (5, 728), (6, 26704)];
    for (m, want) in expect {
        let got = count_connected_graphs(m)?;
        out.push(CheckOutcome::new(
            format!("connected-graph-count-{m}"),
            got == want,
            format!("{got} (expected {want})"),
        ));
    }
    for m in 2..=8usize {
        let mut n = 0u64;
        for_each_tree(m, |_| n += 1)?;
        let want = count_trees(m)?;
        out.push(CheckOutcome::new(
            format!("tree-count-{m}"),
            n == want,
            format!("{n} (expected {want})"),
        ));
    }
    Ok(out)
}

/// Graph-sum versus subset-recursion agreement on random configurations.
pub fn dual_method_check(
    potential: &PairPotential,
    beta: f64,
    sizes: &[usize],
    configs_per_size: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for &m in sizes {
        for _ in 0..configs_per_size {
            let cfg = random_configuration(&mut rng, m, 0.9 * m as f64);
            let w = EdgeWeights::from_configuration(potential, beta, &cfg);
            let a = ursell_graph_sum(&w)?;
            let b = ursell_subset_recursion(&w)?;
            let rel = (a - b).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-10 {
                failures += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "ursell-dual-method",
        failures == 0,
        format!(
            "worst relative deviation {worst:.3e} over {} configurations",
            sizes.len() * configs_per_size
        ),
    ))
}

/// Spanning-tree bound dominates the connected-part magnitude on random
/// configurations.
pub fn tree_domination_check(
    potential: &PairPotential,
    beta: f64,
    sizes: &[usize],
    configs_per_size: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    for &m in sizes {
        for _ in 0..configs_per_size {
            let cfg = random_configuration(&mut rng, m, 0.9 * m as f64);
            let w = EdgeWeights::from_configuration(potential, beta, &cfg);
            let phi = ursell_subset_recursion(&w)?;
            let bound = tree_bound(potential, beta, &cfg)?;
            min_slack = min_slack.min(bound - phi.abs());
            if phi.abs() > bound * (1.0 + 1e-12) + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "tree-bound-domination",
        violations == 0,
        format!(
            "{violations} violations over {} configurations (min slack {min_slack:.3e})",
            sizes.len() * configs_per_size
        ),
    ))
}

/// Boundary-energy bound over sampled interior points for one preset and
/// one generator.
pub fn boundary_bound_check(
    label: &str,
    potential: &PairPotential,
    cube: &Cube,
    spec: GeneratorSpec,
    samples: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let grid = CubeGrid::default_for(cube, potential.range())?;
    let omega = BoundaryConfig::generate(spec, cube, &grid, potential, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
    let half = cube.half_side();
    let d = cube.dimension();
    let xs: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..d).map(|_| rng.random_range(-half..half)).collect())
        .collect();
    let report = omega.check_energy_bound(potential, cube, &xs)?;
    Ok(CheckOutcome::new(
        format!("boundary-energy-bound-{label}"),
        report.pass,
        format!(
            "{} points from {} samples violated (rho = {:.4})",
            report.violations,
            report.checked,
            omega.rho_omega()
        ),
    ))
}

/// The six preset-by-generator combinations of the boundary-energy check.
pub fn suite_boundary_bounds(samples: usize) -> Result<Vec<CheckOutcome>> {
    let (hard_rod, square_well) = preset_pair();
    let cube = Cube::new(1, 20.0)?;
    let mut out = Vec::new();
    for (pname, p) in [("hard-rod", &hard_rod), ("square-well", &square_well)] {
        let explicit: Vec<Vec<f64>> = (0..10)
            .map(|k| vec![20.0 + 0.09 * (k as f64 + 0.5)])
            .chain((0..10).map(|k| vec![-20.0 - 0.09 * (k as f64 + 0.5)]))
            .collect();
        let combos: [(&str, GeneratorSpec); 3] = [
            ("explicit", GeneratorSpec::Explicit { points: explicit }),
            ("grid", GeneratorSpec::GridShell { spacing: 0.25 }),
            ("poisson", GeneratorSpec::PoissonShell { intensity: 2.0 }),
        ];
        for (gname, spec) in combos {
            out.push(boundary_bound_check(
                &format!("{pname}-{gname}"),
                p,
                &cube,
                spec,
                samples,
                41,
            )?);
        }
    }
    Ok(out)
}

/// Shared-seed identity between boundary and free coefficients for interior
/// anchors and orders within the cutoff.
pub fn inside_identity_check(
    anchors: usize,
    samples_per_estimate: u64,
    seed: u64,
) -> Result<CheckOutcome> {
    let potential = PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0))?;
    let cube = Cube::new(1, 100.0)?;
    let grid = CubeGrid::aligned(&cube, 0.25)?;
    let omega = BoundaryConfig::generate(
        GeneratorSpec::GridShell { spacing: 0.25 },
        &cube,
        &grid,
        &potential,
        seed,
    )?;
    let model = Model::new(&potential, &cube, &omega, 1.0)?;
    let shell = ShellSpec::default();
    let n_cut = shell.order_cutoff(&cube, potential.range())?;
    let h = shell.h(cube.half_side());
    let inner = cube.half_side() - h;
    let mut failures = 0usize;
    let mut checked = 0usize;
    for a in 0..anchors {
        // interior anchors, strictly inside the inner cube
        let x0 = -0.99 * inner + 1.98 * inner * a as f64 / (anchors.max(2) - 1) as f64;
        for n in 0..=n_cut {
            let report = check_inside_identity(
                &model,
                &[x0],
                n,
                &SamplerSpec::Mc(McSpec::new(seed, samples_per_estimate)),
            )?;
            checked += 1;
            if !report.bitwise_equal {
                failures += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "interior-identity",
        failures == 0,
        format!("{failures} of {checked} (anchor, order) pairs differed bitwise"),
    ))
}

/// Estimated coefficient magnitudes stay below the closed-form bounds.
pub fn coefficient_bound_check(
    max_order: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    let (hard_rod, square_well) = preset_pair();
    let cube = Cube::new(1, 20.0)?;
    let mut out = Vec::new();
    for (pname, p) in [("hard-rod", &hard_rod), ("square-well", &square_well)] {
        let grid = CubeGrid::default_for(&cube, p.range())?;
        let free = BoundaryConfig::free(1);
        let omega = BoundaryConfig::generate(
            GeneratorSpec::GridShell { spacing: 0.5 },
            &cube,
            &grid,
            p,
            seed,
        )?;
        for (bname, boundary) in [("free", &free), ("omega", &omega)] {
            let model = Model::new(p, &cube, boundary, 1.0)?;
            let mut worst_margin = f64::INFINITY;
            let mut pass = true;
            for n in 0..=max_order {
                let est = estimate_c_n(
                    &model,
                    &[0.0],
                    n,
                    &SamplerSpec::Mc(McSpec::new(seed, samples)),
                )?;
                let bound = coefficient_bound(p, 1.0, n, boundary.rho_omega())?;
                let margin = bound - (est.value.abs() - 3.0 * est.std_error);
                worst_margin = worst_margin.min(margin);
                if margin < 0.0 {
                    pass = false;
                }
            }
            out.push(CheckOutcome::new(
                format!("coefficient-bound-{pname}-{bname}"),
                pass,
                format!("min margin {worst_margin:.3e} through order {max_order}"),
            ));
        }
    }
    Ok(out)
}

/// Majorant sandwich between its per-term factorial brackets, plus the cap
/// at the convergence radius.
pub fn majorant_check(radii: usize) -> Result<Vec<CheckOutcome>> {
    let (hard_rod, square_well) = preset_pair();
    let mut out = Vec::new();
    for (pname, p) in [("hard-rod", &hard_rod), ("square-well", &square_well)] {
        let series = MajorantSeries::new(p, 1.0)?;
        let rs = series.r_star();
        let mut sandwich_ok = true;
        let mut worst = 0.0f64;
        for k in 0..radii {
            let r = rs * (k as f64 + 0.5) / radii as f64;
            let theta = series.theta(r)?;
            let (lo, hi) = series.stirling_brackets(r)?;
            if !(lo <= theta.value + theta.tail_bound && theta.value <= hi) {
                sandwich_ok = false;
            }
            worst = worst.max(theta.tail_bound);
        }
        out.push(CheckOutcome::new(
            format!("majorant-brackets-{pname}"),
            sandwich_ok,
            format!("{radii} radii below the convergence radius"),
        ));
        let at_rs = series.theta(rs)?;
        out.push(CheckOutcome::new(
            format!("majorant-cap-{pname}"),
            !at_rs.divergent && at_rs.value + at_rs.tail_bound < series.cap_at_r_star(),
            format!(
                "theta(r*) = {:.6} vs cap {:.6}",
                at_rs.value,
                series.cap_at_r_star()
            ),
        ));
        let past = series.theta(2.0 * rs)?;
        out.push(CheckOutcome::new(
            format!("majorant-divergence-{pname}"),
            past.divergent,
            "diverges past the radius".to_string(),
        ));
    }
    Ok(out)
}

/// Interior-polynomial magnitude bound on the free-radius circle, and the
/// monotone decay of the remainder shrink factor along a box sweep.
pub fn eta_and_shrink_checks(
    circle_points: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    use num_complex::Complex64;
    let mut out = Vec::new();
    let (hard_rod, square_well) = preset_pair();
    for (pname, p) in [("hard-rod", &hard_rod), ("square-well", &square_well)] {
        let cube = Cube::new(1, 100.0)?;
        let free = BoundaryConfig::free(1);
        let model = Model::new(p, &cube, &free, 1.0)?;
        let dec = crate::mayer::decompose_pressure(
            &model,
            &ShellSpec::default(),
            0.0,
            &McSpec::new(seed, samples),
        )?;
        let radius = dec.radius_free;
        let mut worst = f64::NEG_INFINITY;
        let mut pass = true;
        for k in 0..circle_points {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / circle_points as f64;
            let lambda = Complex64::from_polar(radius, angle);
            let (eta, err) = dec.eta_at(lambda);
            let margin = dec.eta_bound_rhs(radius) - (eta.norm() + 3.0 * err);
            worst = worst.max(eta.norm() / dec.eta_bound_rhs(radius));
            if margin < 0.0 {
                pass = false;
            }
        }
        out.push(CheckOutcome::new(
            format!("eta-circle-bound-{pname}"),
            pass,
            format!("worst |eta|/bound = {worst:.4} over {circle_points} points"),
        ));
    }

    // shrink-factor sweep with a fixed-density boundary
    let (_, square_well) = preset_pair();
    let shell = ShellSpec::default();
    let mut prev_g = f64::INFINITY;
    let mut prev_xi = f64::INFINITY;
    let mut gs = Vec::new();
    let mut monotone = true;
    for half in [25.0, 100.0, 400.0, 1600.0] {
        let cube = Cube::new(1, half)?;
        let n_cut = shell.order_cutoff(&cube, square_well.range())?;
        let regions = shell.regions(&cube)?;
        let g = remainder_shrink_factor(&regions, cube.volume(), n_cut);
        // fixed certified density: grid shell with constant spacing
        let grid = CubeGrid::default_for(&cube, square_well.range())?;
        let omega = BoundaryConfig::generate(
            GeneratorSpec::GridShell { spacing: 0.5 },
            &cube,
            &grid,
            &square_well,
            seed,
        )?;
        let rho = omega.rho_omega();
        let lam = 0.5 * square_well.radius_boundary(1.0, rho)?;
        let xi = lam
            * (square_well.kappa() * rho).exp()
            * (square_well.c_decl() + 1.0).exp()
            * g;
        if g >= prev_g || xi >= prev_xi {
            monotone = false;
        }
        prev_g = g;
        prev_xi = xi;
        gs.push(g);
    }
    let final_ratio = gs.last().unwrap() / gs.first().unwrap();
    out.push(CheckOutcome::new(
        "remainder-shrink-sweep",
        monotone && final_ratio < 0.15,
        format!(
            "g: {:?}, final/initial = {final_ratio:.4}",
            gs.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>()
        ),
    ));
    Ok(out)
}

/// Two-route series consistency at the given depth: deterministic grids for
/// the free system, seeded Monte Carlo for a boundary-laden one.
pub fn oracle_checks(n_max: usize, mc_samples: u64, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let (hard_rod, square_well) = preset_pair();

    let cube = Cube::new(1, 5.0)?;
    let free = BoundaryConfig::free(1);
    let model = Model::new(&hard_rod, &cube, &free, 1.0)?;
    let det = consistency_check(
        &model,
        n_max,
        &SamplerSpec::Grid {
            points_per_axis: 60,
        },
    )?;
    out.push(CheckOutcome::new(
        "series-consistency-deterministic",
        det.pass,
        summarize_consistency(&det),
    ));

    let grid = CubeGrid::aligned(&cube, 0.25)?;
    let omega = BoundaryConfig::generate(
        GeneratorSpec::GridShell { spacing: 0.5 },
        &cube,
        &grid,
        &square_well,
        seed,
    )?;
    let model = Model::new(&square_well, &cube, &omega, 1.0)?;
    let mc = consistency_check(&model, n_max, &SamplerSpec::Mc(McSpec::new(seed, mc_samples)))?;
    out.push(CheckOutcome::new(
        "series-consistency-mc",
        mc.pass,
        summarize_consistency(&mc),
    ));

    // activity-series oracle values for unit rods
    let c = tonks_pressure_coefficients(4, 1.0)?;
    let expect = [1.0, -1.0, 1.5, -8.0 / 3.0];
    let ok = c
        .iter()
        .zip(expect)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
    out.push(CheckOutcome::new(
        "hard-rod-series-oracle",
        ok,
        format!("{c:?}"),
    ));
    Ok(out)
}

fn summarize_consistency(report: &crate::oracle::ConsistencyReport) -> String {
    report
        .rows
        .iter()
        .map(|r| {
            format!(
                "n={}: {:.6e} vs {:.6e} (tol {:.1e})",
                r.order, r.log_coeff, r.expansion_side, r.tolerance
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Volume-averaged pressure coefficients against the exact rod series.
pub fn tonks_match_check(grid_points: usize, mc_samples: u64, seed: u64) -> Result<Vec<CheckOutcome>> {
    let hard_rod = PairPotential::hard_rod(1.0)?;
    let oracle = tonks_pressure_coefficients(4, 1.0)?;
    let mut out = Vec::new();

    // orders 1..=3 on the deterministic grid in a box of half side 50;
    // the leftover deviation is the genuine 1/volume correction
    let cube = Cube::new(1, 50.0)?;
    let free = BoundaryConfig::free(1);
    let model = Model::new(&hard_rod, &cube, &free, 1.0)?;
    for order in 1..=3usize {
        let est = estimate_c_n_volume_avg(
            &model,
            order,
            &SamplerSpec::Grid {
                points_per_axis: grid_points,
            },
        )?;
        let want = oracle[order - 1];
        let rel = (est.value - want).abs() / want.abs();
        out.push(CheckOutcome::new(
            format!("rod-series-order-{order}"),
            rel <= 0.02,
            format!("{:.6} vs {want:.6} (rel {rel:.4})", est.value),
        ));
    }

    // order 4 by Monte Carlo in a much larger box, so the finite-volume
    // correction sits far below the statistical resolution
    let cube = Cube::new(1, 10_000.0)?;
    let model = Model::new(&hard_rod, &cube, &free, 1.0)?;
    let est = estimate_c_n_volume_avg(&model, 4, &SamplerSpec::Mc(McSpec::new(seed, mc_samples)))?;
    let want = oracle[3];
    let dev = (est.value - want).abs();
    out.push(CheckOutcome::new(
        "rod-series-order-4-mc",
        dev <= 3.0 * est.std_error,
        format!(
            "{:.6} vs {want:.6} ({:.2} sigma, sigma {:.2e})",
            est.value,
            dev / est.std_error,
            est.std_error
        ),
    ));
    Ok(out)
}

/// Named suites exposed by the CLI.
pub fn run_suite(name: &str) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    match name {
        "graphs" => {
            out.extend(suite_graphs()?);
        }
        "bounds" => {
            let (hard_rod, square_well) = preset_pair();
            for (label, p) in [("hard-rod", &hard_rod), ("square-well", &square_well)] {
                let mut check =
                    dual_method_check(p, 1.0, &[3, 4, 5, 6], 100, 1001)?;
                check.name = format!("{}-{label}", check.name);
                out.push(check);
                let mut check = tree_domination_check(p, 1.0, &[2, 3, 4, 5, 6], 2000, 77)?;
                check.name = format!("{}-{label}", check.name);
                out.push(check);
            }
            out.extend(coefficient_bound_check(4, 40_000, 5)?);
            out.extend(majorant_check(20)?);
            out.extend(suite_boundary_bounds(100_000)?);
        }
        "identity" => {
            out.push(inside_identity_check(7, 2000, 13)?);
        }
        "oracle" => {
            out.extend(oracle_checks(3, 400_000, 29)?);
            out.extend(tonks_match_check(200, 1_000_000, 17)?);
        }
        "all" => {
            out.extend(run_suite("graphs")?);
            out.extend(run_suite("bounds")?);
            out.extend(run_suite("identity")?);
            out.extend(run_suite("oracle")?);
        }
        other => {
            return Err(crate::error::Error::Config(format!(
                "unknown suite '{other}' (expected graphs|bounds|identity|oracle|all)"
            )));
        }
    }
    Ok(out)
}
