//! Independent cross-checks: direct partition-function coefficients from the
//! Boltzmann integrand, a formal power-series logarithm with first-order
//! error propagation, and the exact one-dimensional hard-rod activity
//! series obtained by reverting its parametric equation of state.
//!
//! Nothing here touches the connected-graph machinery; the integrands are
//! assembled from the Boltzmann factor directly, so agreement with the
//! expansion coefficients is a genuine two-route check.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Cube;
use crate::mayer::{
    estimate_c_n_volume_avg, mayer_coefficient_global_grid, MayerEstimate, Model, SamplerSpec,
};
use crate::sampler::{chunked_mean, ctx, McSpec};
use crate::ursell::Accumulator;

/// Coefficients `Z_n` of the grand-canonical sum `sum_n Z_n lambda^n`,
/// with `Z_0 = 1` exact.
#[derive(Clone, Debug)]
pub struct TruncatedXi {
    pub coeffs: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Real coefficient list with per-coefficient errors.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalSeries {
    pub coeffs: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Direct Monte Carlo caps: the integrand is an `n`-fold box integral.
pub const XI_MC_CAP: usize = 6;
/// Deterministic-grid cap (one dimension, sorted-sector enumeration).
pub const XI_GRID_CAP: usize = 4;

fn boltzmann_factor(model: &Model, coords: &[f64], n: usize) -> f64 {
    let d = model.cube.dimension();
    let mut energy = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut r2 = 0.0;
            for k in 0..d {
                let dx = coords[i * d + k] - coords[j * d + k];
                r2 += dx * dx;
            }
            energy += model.potential.evaluate_unchecked(r2.sqrt());
            if energy.is_infinite() {
                return 0.0;
            }
        }
    }
    let mut value = (-model.beta * energy).exp();
    for i in 0..n {
        value *= model.boundary.weight_unchecked(
            model.potential,
            model.cube,
            model.beta,
            &coords[i * d..(i + 1) * d],
        );
        if value == 0.0 {
            return 0.0;
        }
    }
    value
}

/// Direct coefficients `Z_n = 1/n! * int over Lambda^n of
/// exp(-beta sum v) * prod weight`, for `n <= n_max`.
pub fn xi_coefficients(
    model: &Model,
    n_max: usize,
    sampler: &SamplerSpec,
) -> Result<TruncatedXi> {
    let mut coeffs = vec![1.0];
    let mut errors = vec![0.0];
    for n in 1..=n_max {
        let (z, e) = match sampler {
            SamplerSpec::Mc(spec) => xi_coefficient_mc(model, n, spec)?,
            SamplerSpec::Grid { points_per_axis } => {
                (xi_coefficient_grid(model, n, *points_per_axis)?, 0.0)
            }
        };
        coeffs.push(z);
        errors.push(e);
    }
    Ok(TruncatedXi { coeffs, errors })
}

fn xi_coefficient_mc(model: &Model, n: usize, spec: &McSpec) -> Result<(f64, f64)> {
    if n > XI_MC_CAP {
        return Err(Error::over_cap("partition coefficient", n, XI_MC_CAP));
    }
    let d = model.cube.dimension();
    let half = model.cube.half_side();
    let scale = model.cube.volume().powi(n as i32) / factorial(n);
    let outcome = chunked_mean(
        spec,
        ctx::partition(n),
        || vec![0.0f64; n * d],
        |coords, rng| {
            for c in coords.iter_mut() {
                *c = rng.random_range(-half..half);
            }
            boltzmann_factor(model, coords, n)
        },
    );
    Ok((outcome.mean * scale, outcome.std_error * scale))
}

/// Deterministic midpoint-grid coefficient in one dimension. The integrand
/// is symmetric, so the sum runs over sorted index tuples with multinomial
/// multiplicities.
fn xi_coefficient_grid(model: &Model, n: usize, points: usize) -> Result<f64> {
    if model.cube.dimension() != 1 {
        return Err(Error::InvalidGeometry(
            "deterministic grids support one dimension only".into(),
        ));
    }
    if n > XI_GRID_CAP {
        return Err(Error::over_cap(
            "deterministic partition coefficient",
            n,
            XI_GRID_CAP,
        ));
    }
    if points < 2 {
        return Err(Error::InvalidGeometry("need at least 2 grid points".into()));
    }
    let half = model.cube.half_side();
    let h = 2.0 * half / points as f64;
    let mut coords = vec![0.0f64; n];
    let mut idx = vec![0usize; n];
    let mut acc = Accumulator::default();
    loop {
        for (slot, &i) in idx.iter().enumerate() {
            coords[slot] = -half + (i as f64 + 0.5) * h;
        }
        let b = boltzmann_factor(model, &coords, n);
        if b != 0.0 {
            // permutations of this sorted multiset
            let mut perms = factorial(n);
            let mut run = 1usize;
            for k in 1..n {
                if idx[k] == idx[k - 1] {
                    run += 1;
                    perms /= run as f64;
                } else {
                    run = 1;
                }
            }
            acc.add(b * perms);
        }
        // next nonincreasing tuple: idx[0] >= idx[1] >= ... >= idx[n-1]
        let mut k = 0;
        loop {
            if k == n {
                return Ok(acc.value() * h.powi(n as i32) / factorial(n));
            }
            idx[k] += 1;
            if idx[k] < points {
                let head = idx[k];
                for slot in idx.iter_mut().take(k) {
                    *slot = head;
                }
                break;
            }
            k += 1;
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// Coefficients of `log` of a series with unit constant term, by the
/// standard convolution recurrence; errors propagate through the exact
/// first-order sensitivities.
pub fn series_log(xi: &TruncatedXi) -> Result<FormalSeries> {
    if xi.coeffs.first() != Some(&1.0) {
        return Err(Error::InvalidSeries(
            "the logarithm needs a unit constant term".into(),
        ));
    }
    let n_max = xi.coeffs.len() - 1;
    let z = &xi.coeffs;
    let mut l = vec![0.0f64; n_max + 1];
    // jac[n][j] = d l_n / d Z_j, lower triangular
    let mut jac = vec![vec![0.0f64; n_max + 1]; n_max + 1];
    for n in 1..=n_max {
        let mut acc = z[n];
        jac[n][n] = 1.0;
        for k in 1..n {
            acc -= (k as f64 / n as f64) * l[k] * z[n - k];
            for j in 1..=k {
                jac[n][j] -= (k as f64 / n as f64) * jac[k][j] * z[n - k];
            }
            jac[n][n - k] -= (k as f64 / n as f64) * l[k];
        }
        l[n] = acc;
    }
    let mut errors = vec![0.0f64; n_max + 1];
    for n in 1..=n_max {
        let mut var = 0.0;
        for j in 1..=n {
            var += (jac[n][j] * xi.errors[j]).powi(2);
        }
        errors[n] = var.sqrt();
    }
    Ok(FormalSeries { coeffs: l, errors })
}

/// Exponential of a series with zero constant term (round-trip companion of
/// [`series_log`]).
pub fn series_exp(l: &FormalSeries) -> Result<FormalSeries> {
    if l.coeffs.first() != Some(&0.0) {
        return Err(Error::InvalidSeries(
            "the exponential needs a zero constant term".into(),
        ));
    }
    let n_max = l.coeffs.len() - 1;
    let mut e = vec![0.0f64; n_max + 1];
    e[0] = 1.0;
    for n in 1..=n_max {
        let mut acc = 0.0;
        for k in 1..=n {
            acc += k as f64 * l.coeffs[k] * e[n - k];
        }
        e[n] = acc / n as f64;
    }
    Ok(FormalSeries {
        coeffs: e,
        errors: vec![0.0; n_max + 1],
    })
}

/// Activity-series coefficients of the reduced pressure for the
/// one-dimensional hard-rod gas of diameter `a`, orders `1..=n_max`.
///
/// The parametric equation of state gives the activity as an entire series
/// in the reduced pressure, `lambda(p) = sum_k a^{k-1} p^k / (k-1)!`;
/// reverting that series (triangular solve, exact up to rounding) yields
/// the pressure as a series in the activity.
pub fn tonks_pressure_coefficients(n_max: usize, a: f64) -> Result<Vec<f64>> {
    if n_max == 0 || !(a > 0.0) {
        return Err(Error::InvalidSeries(
            "need n_max >= 1 and a positive diameter".into(),
        ));
    }
    // lambda(p) coefficients u_1..u_n
    let mut u = vec![0.0f64; n_max + 1];
    let mut fact = 1.0;
    for (k, slot) in u.iter_mut().enumerate().skip(1) {
        // a^{k-1} / (k-1)!
        if k >= 2 {
            fact *= (k - 1) as f64;
        }
        *slot = a.powi(k as i32 - 1) / fact;
    }
    // revert: find c with sum_k u_k P(lambda)^k = lambda
    let mut c = vec![0.0f64; n_max + 1];
    c[1] = 1.0 / u[1];
    let mut powers: Vec<Vec<f64>> = Vec::new(); // powers[k] = coefficients of P^k
    for n in 2..=n_max {
        // rebuild truncated powers of the partial series
        powers.clear();
        powers.push(vec![0.0; n_max + 1]); // P^0 unused
        powers.push(c.clone());
        for k in 2..=n {
            let prev = powers[k - 1].clone();
            let mut next = vec![0.0f64; n_max + 1];
            for i in 1..=n {
                if prev[i] == 0.0 {
                    continue;
                }
                for j in 1..=(n - i) {
                    next[i + j] += prev[i] * c[j];
                }
            }
            powers.push(next);
        }
        let mut residual = 0.0;
        for k in 2..=n {
            residual += u[k] * powers[k][n];
        }
        c[n] = -residual / u[1];
    }
    Ok(c[1..].to_vec())
}

/// One order of the two-route comparison.
#[derive(Clone, Debug)]
pub struct ConsistencyRow {
    pub order: usize,
    /// Coefficient of the series logarithm of the direct sums.
    pub log_coeff: f64,
    pub log_err: f64,
    /// Volume times the expansion coefficient of the same order.
    pub expansion_side: f64,
    pub expansion_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub pass: bool,
}

/// Compare the series logarithm of directly computed partition sums with
/// the expansion coefficients, order by order up to `n_max`.
///
/// Deterministic grids use the *same* midpoint atoms on both routes, so the
/// two sides agree to rounding (gate 1e-8 relative). Monte Carlo routes are
/// independently seeded and gated at three combined standard deviations,
/// with the log-side error widened by a factor 2 to absorb the nonlinearity
/// of the propagation.
pub fn consistency_check(
    model: &Model,
    n_max: usize,
    sampler: &SamplerSpec,
) -> Result<ConsistencyReport> {
    let volume = model.cube.volume();
    let xi = xi_coefficients(model, n_max, sampler)?;
    let log = series_log(&xi)?;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let expansion: MayerEstimate = match sampler {
            SamplerSpec::Grid { points_per_axis } => {
                mayer_coefficient_global_grid(model, n, *points_per_axis)?
            }
            SamplerSpec::Mc(_) => estimate_c_n_volume_avg(model, n, sampler)?,
        };
        let lhs = log.coeffs[n];
        let rhs = volume * expansion.value;
        let rhs_err = volume * expansion.std_error;
        let (tolerance, pass) = match sampler {
            SamplerSpec::Grid { .. } => {
                let tol = 1e-8 * lhs.abs().max(1.0);
                (tol, (lhs - rhs).abs() <= tol)
            }
            SamplerSpec::Mc(_) => {
                let tol =
                    3.0 * (rhs_err.powi(2) + (2.0 * log.errors[n]).powi(2)).sqrt();
                (tol, (lhs - rhs).abs() <= tol)
            }
        };
        rows.push(ConsistencyRow {
            order: n,
            log_coeff: lhs,
            log_err: log.errors[n],
            expansion_side: rhs,
            expansion_err: rhs_err,
            tolerance,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConsistencyReport { rows, pass })
}

/// Closed-form hard-rod partition coefficient
/// `Z_n = (V - (n-1) a)^n / n!` for `V >= (n-1) a` (free boundary).
pub fn hard_rod_xi_exact(cube: &Cube, a: f64, n: usize) -> f64 {
    let v = cube.volume() - (n.saturating_sub(1)) as f64 * a;
    if v < 0.0 {
        0.0
    } else {
        v.powi(n as i32) / factorial(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryConfig, GeneratorSpec};
    use crate::potential::PairPotential;
    use crate::geometry::CubeGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hard_rod_system(half: f64) -> (PairPotential, Cube, BoundaryConfig) {
        (
            PairPotential::hard_rod(1.0).unwrap(),
            Cube::new(1, half).unwrap(),
            BoundaryConfig::free(1),
        )
    }

    #[test]
    fn z0_and_z1() {
        let (p, cube, free) = hard_rod_system(5.0);
        let model = Model::new(&p, &cube, &free, 1.0).unwrap();
        let xi = xi_coefficients(
            &model,
            1,
            &SamplerSpec::Grid {
                points_per_axis: 100,
            },
        )
        .unwrap();
        assert_eq!(xi.coeffs[0], 1.0);
        assert_relative_eq!(xi.coeffs[1], 10.0, max_relative = 1e-12);
    }

    #[test]
    fn hard_rod_z2_matches_closed_form() {
        let (p, cube, free) = hard_rod_system(5.0);
        let model = Model::new(&p, &cube, &free, 1.0).unwrap();
        let xi = xi_coefficients(
            &model,
            2,
            &SamplerSpec::Grid {
                points_per_axis: 200,
            },
        )
        .unwrap();
        let exact = hard_rod_xi_exact(&cube, 1.0, 2);
        assert_relative_eq!(exact, 40.5, max_relative = 1e-12);
        // midpoint grid resolves the excluded band to O(h) only
        assert_relative_eq!(xi.coeffs[2], exact, max_relative = 0.02);
    }

    #[test]
    fn grid_handles_order_three_and_four() {
        let (p, cube, free) = hard_rod_system(3.0);
        let model = Model::new(&p, &cube, &free, 1.0).unwrap();
        let run = |points| {
            xi_coefficients(
                &model,
                4,
                &SamplerSpec::Grid {
                    points_per_axis: points,
                },
            )
            .unwrap()
        };
        let coarse = run(100);
        let fine = run(200);
        // midpoint error on the excluded-volume indicators is O(h)
        for (n, gate) in [(3usize, 0.02), (4, 0.05)] {
            let exact = hard_rod_xi_exact(&cube, 1.0, n);
            let rel = (fine.coeffs[n] - exact).abs() / exact;
            assert!(rel <= gate, "n={n}: rel {rel}");
            assert!(
                rel < (coarse.coeffs[n] - exact).abs() / exact,
                "n={n}: error should shrink with resolution"
            );
        }
        assert!(xi_coefficients(
            &model,
            5,
            &SamplerSpec::Grid {
                points_per_axis: 20
            }
        )
        .is_err());
    }

    #[test]
    fn mc_z2_within_errors() {
        let (p, cube, free) = hard_rod_system(5.0);
        let model = Model::new(&p, &cube, &free, 1.0).unwrap();
        let xi = xi_coefficients(&model, 2, &SamplerSpec::Mc(McSpec::new(21, 400_000)))
            .unwrap();
        let exact = hard_rod_xi_exact(&cube, 1.0, 2);
        assert!(
            (xi.coeffs[2] - exact).abs() <= 4.0 * xi.errors[2],
            "{} vs {exact} +- {}",
            xi.coeffs[2],
            xi.errors[2]
        );
    }

    #[test]
    fn log_of_one_plus_lambda() {
        let xi = TruncatedXi {
            coeffs: vec![1.0, 1.0, 0.0, 0.0, 0.0],
            errors: vec![0.0; 5],
        };
        let l = series_log(&xi).unwrap();
        let expect = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25];
        for (a, b) in l.coeffs.iter().zip(expect) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn log_of_truncated_exponential() {
        let c = 0.7f64;
        let xi = TruncatedXi {
            coeffs: (0..6).map(|n| c.powi(n) / factorial(n as usize)).collect(),
            errors: vec![0.0; 6],
        };
        let l = series_log(&xi).unwrap();
        assert_relative_eq!(l.coeffs[1], c, max_relative = 1e-14);
        for n in 2..6 {
            assert!(l.coeffs[n].abs() < 1e-14);
        }
    }

    #[test]
    fn log_rejects_wrong_constant() {
        let xi = TruncatedXi {
            coeffs: vec![2.0, 1.0],
            errors: vec![0.0; 2],
        };
        assert!(series_log(&xi).is_err());
    }

    #[test]
    fn tonks_reversion_values() {
        let c = tonks_pressure_coefficients(6, 1.0).unwrap();
        let expect = [1.0, -1.0, 1.5, -8.0 / 3.0, 125.0 / 24.0, -54.0 / 5.0];
        for (a, b) in c.iter().zip(expect) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        // scaling in the diameter: order n picks up a^{n-1}
        let c2 = tonks_pressure_coefficients(4, 2.0).unwrap();
        for (n, v) in c2.iter().enumerate() {
            assert_relative_eq!(
                *v,
                c[n] * (2.0f64).powi(n as i32),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn consistency_deterministic_hard_rods() {
        let (p, cube, free) = hard_rod_system(5.0);
        let model = Model::new(&p, &cube, &free, 1.0).unwrap();
        let report = consistency_check(
            &model,
            3,
            &SamplerSpec::Grid {
                points_per_axis: 60,
            },
        )
        .unwrap();
        assert!(report.pass, "{:?}", report.rows);
    }

    #[test]
    fn consistency_mc_with_boundary() {
        let p = PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0)).unwrap();
        let cube = Cube::new(1, 5.0).unwrap();
        let grid = CubeGrid::aligned(&cube, 0.25).unwrap();
        let omega = BoundaryConfig::generate(
            GeneratorSpec::GridShell { spacing: 0.5 },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        let model = Model::new(&p, &cube, &omega, 1.0).unwrap();
        let report =
            consistency_check(&model, 3, &SamplerSpec::Mc(McSpec::new(13, 400_000)))
                .unwrap();
        assert!(report.pass, "{:?}", report.rows);
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(coeffs in prop::collection::vec(-0.4f64..0.4, 7)) {
            let mut z = vec![1.0];
            z.extend(coeffs);
            let xi = TruncatedXi { errors: vec![0.0; z.len()], coeffs: z.clone() };
            let l = series_log(&xi).unwrap();
            let back = series_exp(&l).unwrap();
            for (a, b) in back.coeffs.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
