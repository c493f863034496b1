//! Finite-range stable pair potentials and their derived constants.
//!
//! A potential is radial, vanishes at separations `r >= range`, and may carry
//! a hard core (`v = +inf` for `r < hard_core`). Stability is tracked through
//! a *declared* constant `c_decl`: any constant for which
//! `sum_{i<j} v(x_i - x_j) >= -c_decl * n` holds on every n-point
//! configuration. The optimal such constant is generally out of reach; every
//! bound in this crate stays valid with a conservative declaration.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One radial piece: `value` on the half-open shell `[r_lo, r_hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub r_lo: f64,
    pub r_hi: f64,
    pub value: f64,
}

/// Radial profile between the hard core and the range cutoff.
#[derive(Clone)]
pub enum Profile {
    /// Canonical representation; derived integrals are exact finite sums.
    Piecewise(Vec<Piece>),
    /// Smooth profile; derived integrals use adaptive quadrature.
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Piecewise(p) => f.debug_tuple("Piecewise").field(p).finish(),
            Profile::Radial(_) => f.write_str("Radial(..)"),
        }
    }
}

/// Finite-range stable pair potential with declared stability constant.
#[derive(Clone, Debug)]
pub struct PairPotential {
    dimension: usize,
    range: f64,
    hard_core: f64,
    c_decl: f64,
    profile: Profile,
}

/// Inverse temperature and activity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoParams {
    pub beta: f64,
    pub lambda: f64,
}

impl ThermoParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "activity must be a nonnegative real, got {lambda}"
            )));
        }
        Ok(ThermoParams { beta, lambda })
    }
}

/// Volume of the d-dimensional Euclidean ball of radius `r`.
///
/// Computed by the two-step recurrence `V_d = V_{d-2} * 2 pi r^2 / d`,
/// exact up to rounding for every integer dimension.
pub fn ball_volume(dimension: usize, r: f64) -> f64 {
    match dimension {
        0 => 1.0,
        1 => 2.0 * r,
        d => ball_volume(d - 2, r) * 2.0 * PI * r * r / d as f64,
    }
}

/// Surface area of the (d-1)-sphere of radius `r` in d dimensions.
fn sphere_surface(dimension: usize, r: f64) -> f64 {
    dimension as f64 * ball_volume(dimension, 1.0) * r.powi(dimension as i32 - 1)
}

impl PairPotential {
    pub fn new(
        dimension: usize,
        range: f64,
        hard_core: f64,
        c_decl: f64,
        profile: Profile,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidPotential("dimension must be >= 1".into()));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "range must be positive, got {range}"
            )));
        }
        if !(0.0..=range).contains(&hard_core) {
            return Err(Error::InvalidPotential(format!(
                "hard core must satisfy 0 <= a <= range, got {hard_core}"
            )));
        }
        if c_decl < 0.0 || !c_decl.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "declared stability constant must be >= 0, got {c_decl}"
            )));
        }
        if let Profile::Piecewise(pieces) = &profile {
            let mut prev_hi = hard_core;
            for p in pieces {
                if !(p.r_lo < p.r_hi) {
                    return Err(Error::InvalidPotential(format!(
                        "empty piece [{}, {})",
                        p.r_lo, p.r_hi
                    )));
                }
                if p.r_lo < prev_hi - 1e-12 {
                    return Err(Error::InvalidPotential(
                        "pieces must be sorted, non-overlapping and start at the hard core"
                            .into(),
                    ));
                }
                if p.r_hi > range + 1e-12 {
                    return Err(Error::InvalidPotential(
                        "pieces must end at or before the range".into(),
                    ));
                }
                if !p.value.is_finite() {
                    return Err(Error::InvalidPotential(
                        "divergent piece values are not allowed outside the hard core".into(),
                    ));
                }
                if p.value < -2.0 * c_decl {
                    return Err(Error::InvalidPotential(format!(
                        "piece value {} violates the declared stability bound v >= {}",
                        p.value,
                        -2.0 * c_decl
                    )));
                }
                prev_hi = p.r_hi;
            }
        }
        Ok(PairPotential {
            dimension,
            range,
            hard_core,
            c_decl,
            profile,
        })
    }

    /// Pure hard-core potential (a hard rod in one dimension).
    pub fn hard_sphere(dimension: usize, a: f64) -> Result<Self> {
        PairPotential::new(dimension, a, a, 0.0, Profile::Piecewise(vec![]))
    }

    /// One-dimensional hard rod of diameter `a`.
    pub fn hard_rod(a: f64) -> Result<Self> {
        PairPotential::hard_sphere(1, a)
    }

    /// One-dimensional hard-core square well: `+inf` below `a`, depth
    /// `-epsilon` on `[a, range)`, zero beyond.
    ///
    /// The default declared constant is `epsilon * ceil(range / a)`: a rod
    /// admits at most `ceil(range / a)` well partners per side, so the energy
    /// per particle is bounded below by that count times the depth. Callers
    /// holding a sharper constant may pass it explicitly.
    pub fn square_well(a: f64, epsilon: f64, range: f64, c_decl: Option<f64>) -> Result<Self> {
        if !(a > 0.0) || !(epsilon >= 0.0) || !(range > a) {
            return Err(Error::InvalidPotential(
                "square well needs 0 < a < range and epsilon >= 0".into(),
            ));
        }
        let c = c_decl.unwrap_or_else(|| epsilon * (range / a).ceil());
        PairPotential::new(
            1,
            range,
            a,
            c,
            Profile::Piecewise(vec![Piece {
                r_lo: a,
                r_hi: range,
                value: -epsilon,
            }]),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn hard_core(&self) -> f64 {
        self.hard_core
    }

    pub fn c_decl(&self) -> f64 {
        self.c_decl
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Evaluate `v(r)`. Returns `+inf` exactly inside the hard core and `0.0`
    /// exactly at separations at or beyond the range.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::NegativeSeparation(r));
        }
        Ok(self.evaluate_unchecked(r))
    }

    /// Same as [`evaluate`](Self::evaluate) without the sign check; hot paths
    /// call this with separations computed from norms.
    #[inline]
    pub fn evaluate_unchecked(&self, r: f64) -> f64 {
        if r < self.hard_core {
            return f64::INFINITY;
        }
        if r >= self.range {
            return 0.0;
        }
        match &self.profile {
            Profile::Piecewise(pieces) => {
                for p in pieces {
                    if r >= p.r_lo && r < p.r_hi {
                        return p.value;
                    }
                }
                0.0
            }
            Profile::Radial(f) => f(r),
        }
    }

    /// Negative part `v^-(r) = max(0, -v(r))`.
    pub fn negative_part(&self, r: f64) -> Result<f64> {
        let v = self.evaluate(r)?;
        Ok(if v.is_infinite() { 0.0 } else { (-v).max(0.0) })
    }

    /// The constant `kappa = 4 * c_decl * V_d(range)` controlling the worst
    /// boundary energy per unit boundary density.
    pub fn kappa(&self) -> f64 {
        4.0 * self.c_decl * ball_volume(self.dimension, self.range)
    }

    /// `C_v(beta) = integral over R^d of (1 - exp(-beta |v(x)|)) dx`.
    ///
    /// Exact finite sum for piecewise profiles; adaptive Simpson with
    /// tolerance 1e-8 otherwise. The hard core contributes its full ball
    /// volume (the integrand is 1 there).
    pub fn c_v_integral(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "beta must be positive, got {beta}"
            )));
        }
        let core = ball_volume(self.dimension, self.hard_core);
        match &self.profile {
            Profile::Piecewise(pieces) => {
                let mut total = core;
                for p in pieces {
                    let hi = p.r_hi.min(self.range);
                    let shell =
                        ball_volume(self.dimension, hi) - ball_volume(self.dimension, p.r_lo);
                    total += shell * (1.0 - (-beta * p.value.abs()).exp());
                }
                Ok(total)
            }
            Profile::Radial(_) => {
                let g = |r: f64| -> Result<f64> {
                    let v = self.evaluate_unchecked(r);
                    if !v.is_finite() {
                        return Err(Error::InvalidPotential(
                            "divergent profile outside the hard core".into(),
                        ));
                    }
                    Ok(sphere_surface(self.dimension, r) * (1.0 - (-beta * v.abs()).exp()))
                };
                let tail = adaptive_simpson(&g, self.hard_core, self.range, 1e-8, 40)?;
                Ok(core + tail)
            }
        }
    }

    /// Activity radius independent of the boundary:
    /// `1 / (exp(beta * c_decl + 1) * C_v(beta))`.
    pub fn radius_free(&self, beta: f64) -> Result<f64> {
        let cv = self.c_v_integral(beta)?;
        Ok(1.0 / ((beta * self.c_decl + 1.0).exp() * cv))
    }

    /// Boundary-dependent activity radius: the free radius shrunk by
    /// `exp(-beta * kappa * rho_omega)`.
    pub fn radius_boundary(&self, beta: f64, rho_omega: f64) -> Result<f64> {
        if rho_omega < 0.0 {
            return Err(Error::InvalidBoundary(format!(
                "boundary density must be >= 0, got {rho_omega}"
            )));
        }
        Ok(self.radius_free(beta)? / (beta * self.kappa() * rho_omega).exp())
    }
}

/// Outcome of the randomized stability search.
#[derive(Clone, Copy, Debug)]
pub struct StabilityEstimate {
    /// Best observed value of `-(1/n) sum_{i<j} v(x_i - x_j)`; a certified
    /// lower bound on the optimal stability constant.
    pub lower_bound: f64,
    /// True when the lower bound exceeds the declared constant, i.e. the
    /// declaration is provably invalid.
    pub exceeds_declared: bool,
    pub trials: usize,
}

/// Randomized lower bound on the optimal stability constant.
///
/// Draws `trials` configurations of `n` points in a cube sized to keep pairs
/// within interaction range, skipping hard-core overlaps (their energy is
/// `+inf`, never the supremum). The empty-interaction value 0 is always a
/// valid starting point.
pub fn stability_lower_bound(
    potential: &PairPotential,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    use rand::Rng;
    use rand::SeedableRng;

    if n < 2 {
        return Err(Error::InvalidPotential(
            "stability search needs n >= 2".into(),
        ));
    }
    let d = potential.dimension();
    let span = potential.range() * (1.0 + (n as f64).powf(1.0 / d as f64));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut coords = vec![0.0f64; n * d];
    for _ in 0..trials {
        for c in coords.iter_mut() {
            *c = rng.random_range(0.0..span);
        }
        let mut energy = 0.0;
        let mut overlap = false;
        'pairs: for i in 0..n {
            for j in (i + 1)..n {
                let mut r2 = 0.0;
                for k in 0..d {
                    let dx = coords[i * d + k] - coords[j * d + k];
                    r2 += dx * dx;
                }
                let v = potential.evaluate_unchecked(r2.sqrt());
                if v.is_infinite() {
                    overlap = true;
                    break 'pairs;
                }
                energy += v;
            }
        }
        if !overlap {
            best = best.max(-energy / n as f64);
        }
    }
    Ok(StabilityEstimate {
        lower_bound: best,
        exceeds_declared: best > potential.c_decl(),
        trials,
    })
}

fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse<F>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            Ok(left + right + delta / 15.0)
        } else {
            Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
        }
    }
    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square_well_unit() -> PairPotential {
        // a = 0.5, depth 1, range 1; the tight constant 1 is valid in d = 1:
        // at most one well partner fits on each side at hard-core spacing.
        PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0)).unwrap()
    }

    #[test]
    fn evaluate_hard_rod() {
        let p = PairPotential::hard_rod(1.0).unwrap();
        assert_eq!(p.evaluate(0.5).unwrap(), f64::INFINITY);
        assert_eq!(p.evaluate(1.5).unwrap(), 0.0);
        assert_eq!(p.evaluate(1.0).unwrap(), 0.0);
        assert!(p.evaluate(-0.1).is_err());
    }

    #[test]
    fn evaluate_square_well() {
        let p = square_well_unit();
        assert_eq!(p.evaluate(0.7).unwrap(), -1.0);
        assert_eq!(p.evaluate(0.3).unwrap(), f64::INFINITY);
        assert_eq!(p.evaluate(1.0).unwrap(), 0.0);
        // outside-range samples vanish identically
        for k in 0..32 {
            let r = 1.0 + k as f64 * (1.0 / 31.0);
            assert_eq!(p.evaluate(r).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_part_values() {
        let sw = square_well_unit();
        assert_eq!(sw.negative_part(0.7).unwrap(), 1.0);
        assert_eq!(sw.negative_part(0.3).unwrap(), 0.0); // +inf has no negative part
        let hr = PairPotential::hard_rod(1.0).unwrap();
        for k in 0..16 {
            assert_eq!(hr.negative_part(k as f64 * 0.2).unwrap(), 0.0);
        }
        // bounded above by 2 c_decl
        for k in 0..64 {
            let r = k as f64 * 0.03;
            assert!(sw.negative_part(r).unwrap() <= 2.0 * sw.c_decl());
        }
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(ball_volume(1, 1.0), 2.0);
        assert_relative_eq!(ball_volume(2, 1.0), PI, max_relative = 1e-15);
        assert_relative_eq!(
            ball_volume(3, 2.0),
            32.0 * PI / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn kappa_values() {
        let hr = PairPotential::hard_rod(1.0).unwrap();
        assert_eq!(hr.kappa(), 0.0);
        let p = PairPotential::new(1, 1.0, 0.0, 1.0, Profile::Piecewise(vec![])).unwrap();
        assert_eq!(p.kappa(), 8.0);
        let q = PairPotential::new(3, 1.0, 0.0, 2.0, Profile::Piecewise(vec![])).unwrap();
        assert_relative_eq!(q.kappa(), 32.0 * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn c_v_hard_rod_is_core_volume() {
        let p = PairPotential::hard_rod(1.0).unwrap();
        for beta in [0.1, 1.0, 10.0] {
            assert_eq!(p.c_v_integral(beta).unwrap(), 2.0);
        }
    }

    #[test]
    fn c_v_square_well_exact_piecewise_sum() {
        let p = square_well_unit();
        let expect = 2.0 * (0.5 + 0.5 * (1.0 - (-1.0f64).exp()));
        assert_relative_eq!(p.c_v_integral(1.0).unwrap(), expect, max_relative = 1e-15);
        assert_relative_eq!(
            p.c_v_integral(1.0).unwrap(),
            1.6321205588285577,
            max_relative = 1e-12
        );
    }

    #[test]
    fn c_v_vanishes_at_high_temperature_without_core() {
        let p = PairPotential::new(
            1,
            1.0,
            0.0,
            0.5,
            Profile::Piecewise(vec![Piece {
                r_lo: 0.0,
                r_hi: 1.0,
                value: -1.0,
            }]),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for beta in [1.0, 0.1, 0.01, 0.001] {
            let cv = p.c_v_integral(beta).unwrap();
            assert!(cv < prev);
            prev = cv;
        }
        assert!(prev < 0.002 * 2.0 + 1e-12);
    }

    #[test]
    fn c_v_monotone_in_beta() {
        let p = square_well_unit();
        let mut prev = 0.0;
        for k in 1..=20 {
            let cv = p.c_v_integral(0.25 * k as f64).unwrap();
            assert!(cv >= prev);
            prev = cv;
        }
    }

    #[test]
    fn c_v_radial_matches_piecewise() {
        // same square well expressed as a closure
        let radial = PairPotential::new(
            1,
            1.0,
            0.5,
            1.0,
            Profile::Radial(Arc::new(|r| if r < 1.0 { -1.0 } else { 0.0 })),
        )
        .unwrap();
        let exact = square_well_unit().c_v_integral(1.0).unwrap();
        assert_relative_eq!(radial.c_v_integral(1.0).unwrap(), exact, epsilon = 1e-7);
    }

    #[test]
    fn radii() {
        let hr = PairPotential::hard_rod(1.0).unwrap();
        assert_relative_eq!(
            hr.radius_free(1.0).unwrap(),
            0.18393972058572117,
            max_relative = 1e-14
        );
        let sw = square_well_unit();
        assert_relative_eq!(
            sw.radius_free(1.0).unwrap(),
            0.08291990594968583,
            max_relative = 1e-12
        );
        // rho = 0 reduces to the free radius, exactly
        assert_eq!(
            sw.radius_boundary(1.0, 0.0).unwrap(),
            sw.radius_free(1.0).unwrap()
        );
        // kappa = 0 makes the boundary radius insensitive to rho
        assert_eq!(
            hr.radius_boundary(1.0, 3.7).unwrap(),
            hr.radius_free(1.0).unwrap()
        );
        // kappa = 8 case: one factor of e^2 per 0.25 density
        let p = PairPotential::new(1, 1.0, 0.0, 1.0, Profile::Piecewise(vec![])).unwrap();
        assert_relative_eq!(
            p.radius_boundary(1.0, 0.25).unwrap(),
            p.radius_free(1.0).unwrap() / (2.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn radius_boundary_strictly_decreasing_when_kappa_positive() {
        let sw = square_well_unit();
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let r = sw.radius_boundary(1.0, 0.2 * k as f64).unwrap();
            assert!(r < prev || k == 0);
            prev = r;
        }
    }

    #[test]
    fn stability_search_hard_rod_is_zero() {
        let p = PairPotential::hard_rod(1.0).unwrap();
        for n in [2, 4, 8] {
            let est = stability_lower_bound(&p, n, 2000, 7).unwrap();
            assert_eq!(est.lower_bound, 0.0);
            assert!(!est.exceeds_declared);
        }
    }

    #[test]
    fn stability_search_square_well_finds_pair() {
        let p = square_well_unit();
        let est = stability_lower_bound(&p, 2, 5000, 11).unwrap();
        assert!(est.lower_bound >= 0.5);
        assert!(!est.exceeds_declared);
    }

    #[test]
    fn stability_never_exceeds_declared_on_presets() {
        for p in [
            PairPotential::hard_rod(1.0).unwrap(),
            PairPotential::square_well(0.5, 1.0, 1.0, None).unwrap(),
        ] {
            for n in 2..=8 {
                let est = stability_lower_bound(&p, n, 10_000, 3 + n as u64).unwrap();
                assert!(
                    !est.exceeds_declared,
                    "n={n}: bound {} above declared {}",
                    est.lower_bound,
                    p.c_decl()
                );
            }
        }
    }

    #[test]
    fn zero_potential_stability() {
        let p = PairPotential::new(1, 1.0, 0.0, 0.0, Profile::Piecewise(vec![])).unwrap();
        let est = stability_lower_bound(&p, 4, 1000, 5).unwrap();
        assert_eq!(est.lower_bound, 0.0);
    }

    #[test]
    fn square_well_default_constant() {
        let p = PairPotential::square_well(0.5, 1.0, 1.0, None).unwrap();
        assert_eq!(p.c_decl(), 2.0);
    }

    #[test]
    fn rejects_unstable_declaration() {
        assert!(PairPotential::new(
            1,
            1.0,
            0.0,
            0.1,
            Profile::Piecewise(vec![Piece {
                r_lo: 0.0,
                r_hi: 1.0,
                value: -1.0
            }])
        )
        .is_err());
    }
}
