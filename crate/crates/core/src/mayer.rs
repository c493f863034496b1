//! Coefficient estimators for the activity expansion of the finite-volume
//! pressure, the interior/boundary split with its rigorous remainder bound,
//! and the majorant series controlling convergence.
//!
//! Index conventions. The *anchored* coefficient of order `n` is
//!
//! ```text
//! c_n(x0) = 1/(n+1)! * int over Lambda^n of
//!           Phi(x0, x1, .., xn) * prod_i weight(x_i) dx
//! ```
//!
//! with `c_0 = 1` exactly; the anchor carries no boundary weight. The
//! *volume-averaged* coefficient of order `n` is the coefficient of
//! `lambda^n` in the pressure series, equal to the box average of
//! `weight(x0) * c_{n-1}(x0)`. The connected part vanishes whenever any
//! point strays farther than `n * range` from the anchor, so integrands are
//! sampled on the box intersected with that ball; the enclosing-box volume
//! enters analytically and out-of-ball draws contribute exact zeros.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryConfig;
use crate::error::{Error, Result};
use crate::geometry::{Cube, Regions, ShellSpec};
use crate::potential::PairPotential;
use crate::sampler::{chunked_mean, ctx, McOutcome, McSpec};
use crate::ursell::{
    separation, Accumulator, EdgeWeights, UrsellWorkspace, SUBSET_RECURSION_CAP,
};

/// Deterministic tensor grids stay exact-cost only in one dimension and up
/// to three integration axes.
pub const GRID_AXES_CAP: usize = 3;
/// Hard ceiling on grid resolution per axis.
pub const GRID_POINTS_CAP: usize = 200;

/// Immutable bundle describing one finite-volume system.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    pub potential: &'a PairPotential,
    pub cube: &'a Cube,
    pub boundary: &'a BoundaryConfig,
    pub beta: f64,
}

impl<'a> Model<'a> {
    pub fn new(
        potential: &'a PairPotential,
        cube: &'a Cube,
        boundary: &'a BoundaryConfig,
        beta: f64,
    ) -> Result<Self> {
        if potential.dimension() != cube.dimension()
            || boundary.dimension() != cube.dimension()
        {
            return Err(Error::InvalidGeometry(
                "potential, box and boundary dimensions must agree".into(),
            ));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Model {
            potential,
            cube,
            boundary,
            beta,
        })
    }

    /// Same system with the exterior particles removed.
    pub fn with_free_boundary(&self, free: &'a BoundaryConfig) -> Model<'a> {
        Model {
            boundary: free,
            ..*self
        }
    }

    fn dimension(&self) -> usize {
        self.cube.dimension()
    }
}

/// How an estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorMethod {
    MonteCarlo,
    Grid,
}

/// Estimator selection for coefficient integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SamplerSpec {
    Mc(McSpec),
    /// Deterministic midpoint tensor grid (one-dimensional systems only).
    Grid { points_per_axis: usize },
}

/// One estimated expansion coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MayerEstimate {
    pub order: usize,
    pub x0: Option<Vec<f64>>,
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: EstimatorMethod,
}

impl MayerEstimate {
    fn exact(order: usize, x0: Option<Vec<f64>>, value: f64, method: EstimatorMethod) -> Self {
        MayerEstimate {
            order,
            x0,
            value,
            std_error: 0.0,
            samples: 0,
            method,
        }
    }
}

/// Per-axis sampling window `box ∩ [x0 - reach, x0 + reach]`.
struct Window {
    lo: Vec<f64>,
    len: Vec<f64>,
    volume: f64,
}

fn window(cube: &Cube, x0: &[f64], reach: f64) -> Window {
    let half = cube.half_side();
    let mut lo = Vec::with_capacity(x0.len());
    let mut len = Vec::with_capacity(x0.len());
    let mut volume = 1.0;
    for &c in x0 {
        let a = (c - reach).max(-half);
        let b = (c + reach).min(half);
        lo.push(a);
        len.push(b - a);
        volume *= b - a;
    }
    Window { lo, len, volume }
}

fn factorial(m: usize) -> f64 {
    (1..=m as u64).map(|k| k as f64).product()
}

/// Per-chunk scratch for coefficient sampling.
struct CoeffScratch {
    coords: Vec<f64>,
    weights: EdgeWeights,
    ws: UrsellWorkspace,
}

impl CoeffScratch {
    fn new(d: usize, m: usize) -> Self {
        CoeffScratch {
            coords: vec![0.0; d * m],
            weights: EdgeWeights::from_matrix(m, &[]),
            ws: UrsellWorkspace::default(),
        }
    }
}

/// Connected-part value for the points currently in `scratch.coords`,
/// or an exact zero when some point is out of reach of the anchor.
fn connected_part(
    model: &Model,
    scratch: &mut CoeffScratch,
    m: usize,
    reach: f64,
) -> f64 {
    let d = model.dimension();
    let anchor = &scratch.coords[0..d];
    for i in 1..m {
        if separation(d, anchor, &scratch.coords[i * d..(i + 1) * d]) >= reach {
            return 0.0;
        }
    }
    scratch
        .weights
        .fill_from_coords(model.potential, model.beta, &scratch.coords, d);
    crate::ursell::ursell_subset_recursion_with(&scratch.weights, &mut scratch.ws)
        .expect("order checked by caller")
}

fn boundary_weight_product(model: &Model, scratch: &CoeffScratch, m: usize) -> f64 {
    if model.boundary.is_empty() {
        return 1.0;
    }
    let d = model.dimension();
    let mut prod = 1.0;
    for i in 1..m {
        prod *= model.boundary.weight_unchecked(
            model.potential,
            model.cube,
            model.beta,
            &scratch.coords[i * d..(i + 1) * d],
        );
    }
    prod
}

fn check_order(n: usize) -> Result<()> {
    if n + 1 > SUBSET_RECURSION_CAP {
        return Err(Error::over_cap(
            "coefficient order",
            n,
            SUBSET_RECURSION_CAP - 1,
        ));
    }
    Ok(())
}

/// Anchored coefficient `c_n(x0)`.
///
/// Returns exactly 1 at order 0. Deterministic for a fixed seed; the Monte
/// Carlo path draws each of the `n` integration points uniformly from the
/// box window around the anchor and never consults the boundary for the
/// anchor itself.
pub fn estimate_c_n(
    model: &Model,
    x0: &[f64],
    n: usize,
    sampler: &SamplerSpec,
) -> Result<MayerEstimate> {
    check_order(n)?;
    if !model.cube.contains(x0) {
        return Err(Error::OutsideBox);
    }
    if n == 0 {
        return Ok(MayerEstimate::exact(
            0,
            Some(x0.to_vec()),
            1.0,
            method_of(sampler),
        ));
    }
    let d = model.dimension();
    let m = n + 1;
    let reach = n as f64 * model.potential.range();
    let win = window(model.cube, x0, reach);
    let scale = win.volume.powi(n as i32) / factorial(m);
    match sampler {
        SamplerSpec::Mc(spec) => {
            let outcome = chunked_mean(
                spec,
                ctx::anchored(n),
                || CoeffScratch::new(d, m),
                |scratch, rng| {
                    scratch.coords[0..d].copy_from_slice(x0);
                    for i in 1..m {
                        for k in 0..d {
                            scratch.coords[i * d + k] =
                                win.lo[k] + rng.random_range(0.0..1.0) * win.len[k];
                        }
                    }
                    let phi = connected_part(model, scratch, m, reach);
                    if phi == 0.0 {
                        0.0
                    } else {
                        phi * boundary_weight_product(model, scratch, m)
                    }
                },
            );
            Ok(estimate_from_outcome(n, Some(x0.to_vec()), outcome, scale))
        }
        SamplerSpec::Grid { points_per_axis } => {
            let axes = grid_axes(&win, n, *points_per_axis, d)?;
            let mut acc = Accumulator::default();
            let mut scratch = CoeffScratch::new(d, m);
            scratch.coords[0..d].copy_from_slice(x0);
            let count = tensor_sum(&axes, &mut scratch, 1, &mut |scratch| {
                let phi = connected_part(model, scratch, m, reach);
                if phi == 0.0 {
                    0.0
                } else {
                    phi * boundary_weight_product(model, scratch, m)
                }
            }, &mut acc);
            let cell: f64 = axes.iter().map(|a| a.step).product();
            Ok(MayerEstimate {
                order: n,
                x0: Some(x0.to_vec()),
                value: acc.value() * cell / factorial(m),
                std_error: 0.0,
                samples: count,
                method: EstimatorMethod::Grid,
            })
        }
    }
}

/// Volume-averaged coefficient of `lambda^order` in the pressure series.
///
/// Averages `weight(x0) * c_{order-1}(x0)` over the box; the anchor is the
/// first integration variable.
pub fn estimate_c_n_volume_avg(
    model: &Model,
    order: usize,
    sampler: &SamplerSpec,
) -> Result<MayerEstimate> {
    if order == 0 {
        return Err(Error::InvalidSeries(
            "the pressure series starts at order 1".into(),
        ));
    }
    let n = order - 1;
    check_order(n)?;
    let d = model.dimension();
    let m = n + 1;
    let half = model.cube.half_side();
    let reach = n as f64 * model.potential.range();
    match sampler {
        SamplerSpec::Mc(spec) => {
            let outcome = chunked_mean(
                spec,
                ctx::volume_avg(order),
                || CoeffScratch::new(d, m),
                |scratch, rng| {
                    for k in 0..d {
                        scratch.coords[k] = rng.random_range(-half..half);
                    }
                    let f0 = model.boundary.weight_unchecked(
                        model.potential,
                        model.cube,
                        model.beta,
                        &scratch.coords[0..d],
                    );
                    if n == 0 {
                        return f0;
                    }
                    let x0: Vec<f64> = scratch.coords[0..d].to_vec();
                    let win = window(model.cube, &x0, reach);
                    for i in 1..m {
                        for k in 0..d {
                            scratch.coords[i * d + k] =
                                win.lo[k] + rng.random_range(0.0..1.0) * win.len[k];
                        }
                    }
                    let phi = connected_part(model, scratch, m, reach);
                    if phi == 0.0 {
                        return 0.0;
                    }
                    f0 * phi
                        * boundary_weight_product(model, scratch, m)
                        * win.volume.powi(n as i32)
                        / factorial(m)
                },
            );
            Ok(estimate_from_outcome(order, None, outcome, 1.0))
        }
        SamplerSpec::Grid { points_per_axis } => {
            if d != 1 {
                return Err(Error::InvalidGeometry(
                    "deterministic grids support one dimension only".into(),
                ));
            }
            if n > GRID_AXES_CAP - 1 {
                return Err(Error::over_cap(
                    "volume-averaged grid order",
                    order,
                    GRID_AXES_CAP,
                ));
            }
            let points = clamp_points(*points_per_axis)?;
            let h0 = 2.0 * half / points as f64;
            let mut acc = Accumulator::default();
            let mut scratch = CoeffScratch::new(d, m);
            let mut total: u64 = 0;
            for i0 in 0..points {
                let x0 = -half + (i0 as f64 + 0.5) * h0;
                scratch.coords[0] = x0;
                let f0 = model.boundary.weight_unchecked(
                    model.potential,
                    model.cube,
                    model.beta,
                    &scratch.coords[0..1],
                );
                if n == 0 {
                    acc.add(f0 * h0);
                    total += 1;
                    continue;
                }
                let win = window(model.cube, &[x0], reach);
                let axes = grid_axes(&win, n, points, 1)?;
                let cell: f64 = axes.iter().map(|a| a.step).product();
                let mut inner = Accumulator::default();
                total += tensor_sum(&axes, &mut scratch, 1, &mut |scratch| {
                    let phi = connected_part(model, scratch, m, reach);
                    if phi == 0.0 {
                        0.0
                    } else {
                        phi * boundary_weight_product(model, scratch, m)
                    }
                }, &mut inner);
                acc.add(f0 * inner.value() * cell / factorial(m) * h0);
            }
            Ok(MayerEstimate {
                order,
                x0: None,
                value: acc.value() / model.cube.volume(),
                std_error: 0.0,
                samples: total,
                method: EstimatorMethod::Grid,
            })
        }
    }
}

/// Coefficient of `lambda^order` in the pressure series on the *global*
/// midpoint grid: every axis uses the same atoms over the whole box. This is
/// the discrete-measure counterpart of the direct partition-function sums,
/// and agrees with their series logarithm to rounding error by construction.
pub fn mayer_coefficient_global_grid(
    model: &Model,
    order: usize,
    points_per_axis: usize,
) -> Result<MayerEstimate> {
    if model.dimension() != 1 {
        return Err(Error::InvalidGeometry(
            "deterministic grids support one dimension only".into(),
        ));
    }
    if order == 0 || order > GRID_AXES_CAP {
        return Err(Error::over_cap(
            "global-grid coefficient order",
            order,
            GRID_AXES_CAP,
        ));
    }
    let points = clamp_points(points_per_axis)?;
    let half = model.cube.half_side();
    let h = 2.0 * half / points as f64;
    let m = order;
    let mut scratch = CoeffScratch::new(1, m);
    let mut idx = vec![0usize; m];
    let mut acc = Accumulator::default();
    let mut count = 0u64;
    loop {
        for (slot, &i) in idx.iter().enumerate() {
            scratch.coords[slot] = -half + (i as f64 + 0.5) * h;
        }
        // connected part over all m points, every vertex weighted
        let phi = if m == 1 {
            1.0
        } else {
            scratch
                .weights
                .fill_from_coords(model.potential, model.beta, &scratch.coords, 1);
            crate::ursell::ursell_subset_recursion_with(&scratch.weights, &mut scratch.ws)?
        };
        if phi != 0.0 {
            let mut f = 1.0;
            for i in 0..m {
                f *= model.boundary.weight_unchecked(
                    model.potential,
                    model.cube,
                    model.beta,
                    &scratch.coords[i..i + 1],
                );
            }
            acc.add(phi * f);
        }
        count += 1;
        let mut axis = 0;
        loop {
            if axis == m {
                let value =
                    acc.value() * h.powi(m as i32) / factorial(m) / model.cube.volume();
                return Ok(MayerEstimate {
                    order,
                    x0: None,
                    value,
                    std_error: 0.0,
                    samples: count,
                    method: EstimatorMethod::Grid,
                });
            }
            idx[axis] += 1;
            if idx[axis] < points {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

struct Axis {
    lo: f64,
    step: f64,
    count: usize,
}

fn clamp_points(points: usize) -> Result<usize> {
    if points < 2 || points > GRID_POINTS_CAP {
        return Err(Error::InvalidGeometry(format!(
            "grid points per axis must lie in [2, {GRID_POINTS_CAP}], got {points}"
        )));
    }
    Ok(points)
}

/// Midpoint axes for the `n` inner integration variables. Axis counts are
/// staggered (`m`, `m-1`, `m-3`, ...) so pair-difference breakpoints of
/// piecewise-constant integrands are not phase-locked across axes.
fn grid_axes(win: &Window, n: usize, points: usize, d: usize) -> Result<Vec<Axis>> {
    if d != 1 {
        return Err(Error::InvalidGeometry(
            "deterministic grids support one dimension only".into(),
        ));
    }
    if n > GRID_AXES_CAP {
        return Err(Error::over_cap("grid axes", n, GRID_AXES_CAP));
    }
    let points = clamp_points(points)?;
    let mut axes = Vec::with_capacity(n);
    for j in 1..=n {
        let count = points.saturating_sub(2 * j - 1).max(8);
        axes.push(Axis {
            lo: win.lo[0],
            step: win.len[0] / count as f64,
            count,
        });
    }
    Ok(axes)
}

/// Odometer sum of `eval` over the tensor grid, filling coordinates starting
/// at point index `first`. Returns the number of grid nodes visited.
fn tensor_sum(
    axes: &[Axis],
    scratch: &mut CoeffScratch,
    first: usize,
    eval: &mut dyn FnMut(&mut CoeffScratch) -> f64,
    acc: &mut Accumulator,
) -> u64 {
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut count = 0u64;
    loop {
        for (j, axis) in axes.iter().enumerate() {
            scratch.coords[first + j] = axis.lo + (idx[j] as f64 + 0.5) * axis.step;
        }
        acc.add(eval(scratch));
        count += 1;
        let mut k = 0;
        loop {
            if k == n {
                return count;
            }
            idx[k] += 1;
            if idx[k] < axes[k].count {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn method_of(sampler: &SamplerSpec) -> EstimatorMethod {
    match sampler {
        SamplerSpec::Mc(_) => EstimatorMethod::MonteCarlo,
        SamplerSpec::Grid { .. } => EstimatorMethod::Grid,
    }
}

fn estimate_from_outcome(
    order: usize,
    x0: Option<Vec<f64>>,
    outcome: McOutcome,
    scale: f64,
) -> MayerEstimate {
    MayerEstimate {
        order,
        x0,
        value: outcome.mean * scale,
        std_error: outcome.std_error * scale.abs(),
        samples: outcome.samples,
        method: EstimatorMethod::MonteCarlo,
    }
}

/// Truncated activity series around one anchor.
#[derive(Clone, Debug)]
pub struct PiSeries {
    pub coeffs: Vec<MayerEstimate>,
}

impl PiSeries {
    /// Evaluate at a complex activity; the error combines per-coefficient
    /// standard errors in quadrature.
    pub fn value_at(&self, lambda: Complex64) -> (Complex64, f64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for c in &self.coeffs {
            let w = lambda.powu(c.order as u32);
            value += w * c.value;
            var += (w.norm() * c.std_error).powi(2);
        }
        (value, var.sqrt())
    }
}

/// Anchored series `sum_{n <= n_max} c_n(x0) lambda^n`.
pub fn pi_series(
    model: &Model,
    x0: &[f64],
    n_max: usize,
    sampler: &SamplerSpec,
) -> Result<PiSeries> {
    let mut coeffs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        coeffs.push(estimate_c_n(model, x0, n, sampler)?);
    }
    Ok(PiSeries { coeffs })
}

/// Interior split of the anchored series: free-boundary coefficients up to
/// the cutoff, boundary-dependent tail estimates beyond it, and the rigorous
/// tail bound valid on the boundary-dependent activity disc.
#[derive(Clone, Debug)]
pub struct PqSplit {
    pub head_free: PiSeries,
    pub tail_omega: PiSeries,
    /// `exp(beta c_decl + 1) / n_cut^{3/2}`, a uniform bound on the tail
    /// modulus on the activity disc.
    pub tail_bound: f64,
    /// True when the anchor sits deep enough for the head to coincide with
    /// the boundary-dependent coefficients.
    pub anchor_in_interior: bool,
}

pub fn split_p_q(
    model: &Model,
    shell: &ShellSpec,
    x0: &[f64],
    n_tail: usize,
    sampler: &SamplerSpec,
) -> Result<PqSplit> {
    let n_cut = shell.order_cutoff(model.cube, model.potential.range())?;
    if n_cut < 1 {
        return Err(Error::BoxTooSmall(
            "order cutoff must be at least 1 for the split".into(),
        ));
    }
    let free = BoundaryConfig::free(model.dimension());
    let model_free = model.with_free_boundary(&free);
    let mut head = Vec::new();
    for n in 0..=n_cut {
        head.push(estimate_c_n(&model_free, x0, n, sampler)?);
    }
    let mut tail = Vec::new();
    for n in (n_cut + 1)..=n_tail.max(n_cut) {
        tail.push(estimate_c_n(model, x0, n, sampler)?);
    }
    Ok(PqSplit {
        head_free: PiSeries { coeffs: head },
        tail_omega: PiSeries { coeffs: tail },
        tail_bound: (model.beta * model.potential.c_decl() + 1.0).exp()
            / (n_cut as f64).powf(1.5),
        anchor_in_interior: shell.in_interior(model.cube, x0)?,
    })
}

/// Shared-seed comparison of a coefficient with and without the boundary.
#[derive(Clone, Debug)]
pub struct InsideIdentityReport {
    pub with_boundary: MayerEstimate,
    pub free: MayerEstimate,
    pub bitwise_equal: bool,
}

/// Estimate `c_n(x0)` twice with the same stream, with the model boundary
/// and with the free one. For anchors deeper than the shell width and
/// orders within the cutoff every sampled point stays out of reach of the
/// boundary, so the two sums agree bit for bit.
pub fn check_inside_identity(
    model: &Model,
    x0: &[f64],
    n: usize,
    sampler: &SamplerSpec,
) -> Result<InsideIdentityReport> {
    let with_boundary = estimate_c_n(model, x0, n, sampler)?;
    let free = BoundaryConfig::free(model.dimension());
    let free_est = estimate_c_n(&model.with_free_boundary(&free), x0, n, sampler)?;
    let bitwise_equal = with_boundary.value.to_bits() == free_est.value.to_bits();
    Ok(InsideIdentityReport {
        with_boundary,
        free: free_est,
        bitwise_equal,
    })
}

/// Uniform magnitude bound on the anchored coefficient of order `n`:
/// `exp(beta kappa rho n) * (n+1)^(n-1)/(n+1)! * exp(beta c_decl (n+1)) * C_v^n`.
pub fn coefficient_bound(
    potential: &PairPotential,
    beta: f64,
    n: usize,
    rho_omega: f64,
) -> Result<f64> {
    let m = n + 1;
    // m^(m-2) / m!, kept in range by interleaving the products
    let mut ratio = 1.0f64;
    for k in 1..=m {
        ratio *= m as f64 / k as f64;
    }
    ratio /= (m * m) as f64;
    let cv = potential.c_v_integral(beta)?;
    Ok((beta * potential.kappa() * rho_omega * n as f64).exp()
        * ratio
        * (beta * potential.c_decl() * m as f64).exp()
        * cv.powi(n as i32))
}

/// Free-boundary specialization of [`coefficient_bound`].
pub fn coefficient_bound_free(potential: &PairPotential, beta: f64, n: usize) -> Result<f64> {
    coefficient_bound(potential, beta, n, 0.0)
}

/// Numerical evaluation of the majorant series
/// `Theta(r) = exp(beta c_decl) * sum_n (n+1)^(n-1)/(n+1)! * q^n`,
/// `q = exp(beta c_decl) * r * C_v`. Finite exactly when `e * q <= 1`.
#[derive(Clone, Copy, Debug)]
pub struct MajorantSeries {
    pub beta: f64,
    pub c_decl: f64,
    pub c_v: f64,
}

/// Summed majorant value with a rigorous truncation tail.
#[derive(Clone, Copy, Debug)]
pub struct ThetaValue {
    pub value: f64,
    pub divergent: bool,
    pub terms: usize,
    pub tail_bound: f64,
}

const THETA_TERM_CAP: usize = 10_000;

impl MajorantSeries {
    pub fn new(potential: &PairPotential, beta: f64) -> Result<Self> {
        Ok(MajorantSeries {
            beta,
            c_decl: potential.c_decl(),
            c_v: potential.c_v_integral(beta)?,
        })
    }

    /// Largest radius with a finite majorant:
    /// `1 / (exp(beta c_decl + 1) * C_v)`.
    pub fn r_star(&self) -> f64 {
        1.0 / ((self.beta * self.c_decl + 1.0).exp() * self.c_v)
    }

    /// `(8/7) exp(beta c_decl + 1)`, the closed-form cap on the majorant at
    /// its convergence radius.
    pub fn cap_at_r_star(&self) -> f64 {
        8.0 / 7.0 * (self.beta * self.c_decl + 1.0).exp()
    }

    /// Sum the series at radius `r` with a 10^4-term cap. The returned tail
    /// bound covers truncation; `divergent` is set past the radius.
    pub fn theta(&self, r: f64) -> Result<ThetaValue> {
        if r < 0.0 {
            return Err(Error::InvalidSeries("radius must be >= 0".into()));
        }
        let prefactor = (self.beta * self.c_decl).exp();
        let q = prefactor * r * self.c_v;
        let qp = std::f64::consts::E * q;
        // the series still converges exactly at the radius; tolerate the
        // rounding of q at r = r_star
        if qp > 1.0 + 1e-12 {
            return Ok(ThetaValue {
                value: f64::INFINITY,
                divergent: true,
                terms: 0,
                tail_bound: f64::INFINITY,
            });
        }
        let mut term = 1.0f64;
        let mut acc = Accumulator::default();
        acc.add(term);
        let mut n = 0usize;
        while n < THETA_TERM_CAP {
            n += 1;
            term *= q * (1.0 + 1.0 / n as f64).powi(n as i32 - 2);
            acc.add(term);
            if term < 1e-18 * acc.value() {
                break;
            }
        }
        // per-term Stirling envelope: term_k <= (e/sqrt(2 pi)) qp^k (k+1)^(-5/2)
        let stirling = std::f64::consts::E / (2.0 * std::f64::consts::PI).sqrt();
        let tail = if qp < 1.0 - 1e-9 {
            stirling * qp.powi(n as i32 + 1) / ((n as f64 + 2.0).powf(2.5) * (1.0 - qp))
        } else {
            stirling * (2.0 / 3.0) / (n as f64).powf(1.5)
        };
        Ok(ThetaValue {
            value: prefactor * acc.value(),
            divergent: false,
            terms: n,
            tail_bound: prefactor * tail,
        })
    }

    /// Rigorous sandwich for the majorant from per-term factorial bounds
    /// (`sqrt(2 pi n) n^n e^-n <= n! <= e sqrt(n) n^n e^-n`), with the
    /// order-zero term kept exact. Valid for `r` up to the radius.
    pub fn stirling_brackets(&self, r: f64) -> Result<(f64, f64)> {
        let prefactor = (self.beta * self.c_decl).exp();
        let qp = std::f64::consts::E * prefactor * r * self.c_v;
        if qp > 1.0 + 1e-12 {
            return Err(Error::InvalidSeries(
                "brackets are only defined up to the convergence radius".into(),
            ));
        }
        let mut s = 0.0f64;
        let mut pw = 1.0f64;
        let cap = 200_000usize;
        let mut n = 0usize;
        while n < cap {
            n += 1;
            pw *= qp;
            let t = pw / (n as f64 + 1.0).powf(2.5);
            s += t;
            if t < 1e-16 * (1.0 + s) {
                break;
            }
        }
        // truncated sum underestimates; add the geometric/zeta tail on the
        // upper side only
        let tail = if qp < 1.0 - 1e-9 {
            pw * qp / ((n as f64 + 2.0).powf(2.5) * (1.0 - qp))
        } else {
            (2.0 / 3.0) / (n as f64).powf(1.5)
        };
        let stirling = std::f64::consts::E / (2.0 * std::f64::consts::PI).sqrt();
        let lower = prefactor * (1.0 + s);
        let upper = prefactor * (1.0 + stirling * (s + tail));
        Ok((lower, upper))
    }
}

/// Shrinking factor of the rigorous remainder bound:
/// `(8/7) * (inner_fraction / n_cut^{3/2} + shell_fraction)`.
pub fn remainder_shrink_factor(regions: &Regions, box_volume: f64, n_cut: usize) -> f64 {
    8.0 / 7.0
        * (regions.inner_volume / box_volume / (n_cut as f64).powf(1.5)
            + regions.shell_volume / box_volume)
}

/// Pressure split into an interior polynomial (estimated) and a remainder
/// carried as a rigorous bound.
#[derive(Clone, Debug)]
pub struct PressureDecomposition {
    pub beta: f64,
    pub lambda: f64,
    pub n_cut: usize,
    /// Anchored free-boundary coefficients averaged over the interior
    /// region; entry `n` multiplies `lambda^{n+1}`.
    pub eta_coeffs: Vec<MayerEstimate>,
    pub g_shrink: f64,
    pub rho_omega: f64,
    pub kappa: f64,
    pub c_decl: f64,
    pub radius_free: f64,
    pub radius_boundary: f64,
    pub inner_volume: f64,
    pub shell_volume: f64,
    pub box_volume: f64,
}

impl PressureDecomposition {
    /// Interior polynomial at a complex activity, with propagated error.
    pub fn eta_at(&self, lambda: Complex64) -> (Complex64, f64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for (n, c) in self.eta_coeffs.iter().enumerate() {
            let w = lambda.powu(n as u32 + 1);
            value += w * c.value;
            var += (w.norm() * c.std_error).powi(2);
        }
        (value, var.sqrt())
    }

    pub fn eta(&self) -> (f64, f64) {
        let (v, e) = self.eta_at(Complex64::new(self.lambda, 0.0));
        (v.re, e)
    }

    /// Rigorous remainder bound at activity modulus `r`.
    pub fn xi_bound(&self, r: f64) -> f64 {
        r * (self.beta * self.kappa * self.rho_omega).exp()
            * (self.beta * self.c_decl + 1.0).exp()
            * self.g_shrink
    }

    /// Right-hand side of the interior-polynomial bound at modulus `r`.
    pub fn eta_bound_rhs(&self, r: f64) -> f64 {
        8.0 / 7.0 * (self.beta * self.c_decl + 1.0).exp() * r
    }

    pub fn in_boundary_disc(&self, r: f64) -> bool {
        r <= self.radius_boundary
    }
}

/// Estimate the interior polynomial and assemble the remainder bound for
/// one activity. The interior coefficients are free-boundary averages over
/// the interior region (order 0 contributes the region fraction exactly);
/// the remainder is never estimated, only bounded.
pub fn decompose_pressure(
    model: &Model,
    shell: &ShellSpec,
    lambda: f64,
    sampler: &McSpec,
) -> Result<PressureDecomposition> {
    let range = model.potential.range();
    let n_cut = shell.order_cutoff(model.cube, range)?;
    if n_cut < 1 {
        return Err(Error::BoxTooSmall(
            "order cutoff must be at least 1; enlarge the box".into(),
        ));
    }
    check_order(n_cut)?;
    let regions = shell.regions(model.cube)?;
    let box_volume = model.cube.volume();
    let inner_fraction = regions.inner_volume / box_volume;
    let d = model.dimension();
    let free = BoundaryConfig::free(d);
    let model_free = model.with_free_boundary(&free);
    let inner_half = regions.inner_half_side;

    let mut eta_coeffs = Vec::with_capacity(n_cut + 1);
    eta_coeffs.push(MayerEstimate::exact(
        0,
        None,
        inner_fraction,
        EstimatorMethod::MonteCarlo,
    ));
    for n in 1..=n_cut {
        let m = n + 1;
        let outcome = chunked_mean(
            sampler,
            ctx::interior(n),
            || CoeffScratch::new(d, m),
            |scratch, rng| {
                for k in 0..d {
                    scratch.coords[k] = rng.random_range(-inner_half..inner_half);
                }
                let x0: Vec<f64> = scratch.coords[0..d].to_vec();
                let win = window(model_free.cube, &x0, n as f64 * range);
                for i in 1..m {
                    for k in 0..d {
                        scratch.coords[i * d + k] =
                            win.lo[k] + rng.random_range(0.0..1.0) * win.len[k];
                    }
                }
                let phi = connected_part(&model_free, scratch, m, n as f64 * range);
                if phi == 0.0 {
                    0.0
                } else {
                    phi * win.volume.powi(n as i32) / factorial(m)
                }
            },
        );
        eta_coeffs.push(estimate_from_outcome(n, None, outcome, inner_fraction));
    }

    let rho = model.boundary.rho_omega();
    Ok(PressureDecomposition {
        beta: model.beta,
        lambda,
        n_cut,
        eta_coeffs,
        g_shrink: remainder_shrink_factor(&regions, box_volume, n_cut),
        rho_omega: rho,
        kappa: model.potential.kappa(),
        c_decl: model.potential.c_decl(),
        radius_free: model.potential.radius_free(model.beta)?,
        radius_boundary: model.potential.radius_boundary(model.beta, rho)?,
        inner_volume: regions.inner_volume,
        shell_volume: regions.shell_volume,
        box_volume,
    })
}

/// Partial pressure series `sum_{n <= n_max} c_n lambda^n` with propagated
/// error, using volume-averaged coefficients.
pub fn pressure_partial(
    model: &Model,
    lambda: f64,
    n_max: usize,
    sampler: &SamplerSpec,
) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut var = 0.0;
    for order in 1..=n_max {
        let est = estimate_c_n_volume_avg(model, order, sampler)?;
        let w = lambda.powi(order as i32);
        value += w * est.value;
        var += (w * est.std_error).powi(2);
    }
    Ok((value, var.sqrt()))
}
