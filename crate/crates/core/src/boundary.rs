//! Fixed particle configurations outside the box, their certified density,
//! and the one-body energy and weight they induce inside the box.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeGrid};
use crate::potential::PairPotential;

/// How a boundary configuration is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneratorSpec {
    /// Verbatim list of points; anything outside the interaction collar is
    /// dropped at construction (it cannot influence the box).
    Explicit { points: Vec<Vec<f64>> },
    /// Lattice of points at `(k + 1/2) * spacing` per axis, restricted to
    /// the collar. Deterministic.
    GridShell { spacing: f64 },
    /// Homogeneous Poisson process of the given intensity on the collar.
    PoissonShell { intensity: f64 },
}

/// Per-cell occupation counts of a boundary configuration.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub cell_size: f64,
    pub counts: BTreeMap<Vec<i64>, u32>,
}

impl DensityField {
    /// Maximum over cells of count / cell volume; 0 for an empty field.
    pub fn max_density(&self, grid: &CubeGrid) -> f64 {
        self.counts
            .values()
            .map(|&c| c as f64 / grid.cell_volume())
            .fold(0.0, f64::max)
    }
}

/// A locally finite multiset of fixed particles in the exterior collar of a
/// box, with a certified per-cell density bound. Immutable once built.
#[derive(Clone, Debug)]
pub struct BoundaryConfig {
    dimension: usize,
    points: Vec<f64>, // flat, stride = dimension
    rho_omega: f64,
    spec: GeneratorSpec,
    seed: u64,
}

/// Outcome of sampling the boundary-energy bound over interior points.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEnergyReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest observed slack `w - (-kappa * rho)` over finite values.
    pub worst_slack: f64,
    pub pass: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl BoundaryConfig {
    /// Free boundary condition: no exterior particles.
    pub fn free(dimension: usize) -> Self {
        BoundaryConfig {
            dimension,
            points: Vec::new(),
            rho_omega: 0.0,
            spec: GeneratorSpec::Explicit { points: vec![] },
            seed: 0,
        }
    }

    /// Build a configuration from a generator spec. Only points in the open
    /// collar `0 < dist(y, box) < range` are kept; the density certificate is
    /// computed against `grid` immediately. Deterministic for a fixed seed.
    pub fn generate(
        spec: GeneratorSpec,
        cube: &Cube,
        grid: &CubeGrid,
        potential: &PairPotential,
        seed: u64,
    ) -> Result<Self> {
        let d = cube.dimension();
        if potential.dimension() != d || grid.dimension() != d {
            return Err(Error::InvalidBoundary(
                "potential, box and grid dimensions must agree".into(),
            ));
        }
        let range = potential.range();
        let mut flat: Vec<f64> = Vec::new();
        let mut keep = |y: &[f64]| {
            let outside = !cube.contains(y);
            if outside && cube.exterior_distance(y) < range {
                flat.extend_from_slice(y);
            }
        };
        match &spec {
            GeneratorSpec::Explicit { points } => {
                for p in points {
                    if p.len() != d {
                        return Err(Error::InvalidBoundary(format!(
                            "point of dimension {} in a {d}-dimensional model",
                            p.len()
                        )));
                    }
                    keep(p);
                }
            }
            GeneratorSpec::GridShell { spacing } => {
                let s = *spacing;
                if !(s > 0.0) {
                    return Err(Error::InvalidBoundary("spacing must be positive".into()));
                }
                let reach = cube.half_side() + range;
                let klo = (-reach / s - 0.5).floor() as i64;
                let khi = (reach / s - 0.5).ceil() as i64;
                let mut idx = vec![klo; d];
                'odometer: loop {
                    let y: Vec<f64> = idx.iter().map(|&k| (k as f64 + 0.5) * s).collect();
                    keep(&y);
                    let mut axis = 0;
                    loop {
                        if axis == d {
                            break 'odometer;
                        }
                        idx[axis] += 1;
                        if idx[axis] <= khi {
                            break;
                        }
                        idx[axis] = klo;
                        axis += 1;
                    }
                }
            }
            GeneratorSpec::PoissonShell { intensity } => {
                if *intensity < 0.0 {
                    return Err(Error::InvalidBoundary("intensity must be >= 0".into()));
                }
                if *intensity > 0.0 {
                    // Poisson points on the frame box minus the cube, thinned
                    // to the collar; thinning a Poisson process keeps it
                    // Poisson on the kept region.
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let reach = cube.half_side() + range;
                    let frame = (2.0 * reach).powi(d as i32) - cube.volume();
                    let n = sample_poisson(&mut rng, intensity * frame);
                    let mut y = vec![0.0f64; d];
                    for _ in 0..n {
                        loop {
                            for c in y.iter_mut() {
                                *c = rng.random_range(-reach..reach);
                            }
                            if !cube.contains(&y) {
                                break;
                            }
                        }
                        keep(&y);
                    }
                }
            }
        }
        let mut config = BoundaryConfig {
            dimension: d,
            points: flat,
            rho_omega: 0.0,
            spec,
            seed,
        };
        config.rho_omega = config.certify_density(grid).max_density(grid);
        let _ = config.rho_omega;
        Ok(config)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dimension)
    }

    /// The certified density bound.
    pub fn rho_omega(&self) -> f64 {
        self.rho_omega
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Recompute the per-cell occupation counts. Idempotent; the maximum
    /// density equals the stored certificate when evaluated on the grid the
    /// configuration was certified against.
    pub fn certify_density(&self, grid: &CubeGrid) -> DensityField {
        let mut counts: BTreeMap<Vec<i64>, u32> = BTreeMap::new();
        for p in self.points() {
            *counts.entry(grid.cell_of(p)).or_insert(0) += 1;
        }
        DensityField {
            cell_size: grid.cell_size(),
            counts,
        }
    }

    /// Potential energy felt at `x` inside the box from the fixed exterior
    /// particles: the finite sum of `v(|x - y|)` over collar points within
    /// range. Exactly 0 when `x` is farther than the range from the
    /// boundary; `+inf` when a boundary particle overlaps the hard core.
    pub fn boundary_energy(
        &self,
        potential: &PairPotential,
        cube: &Cube,
        x: &[f64],
    ) -> Result<f64> {
        if !cube.contains(x) {
            return Err(Error::OutsideBox);
        }
        Ok(self.boundary_energy_unchecked(potential, cube, x))
    }

    #[inline]
    pub(crate) fn boundary_energy_unchecked(
        &self,
        potential: &PairPotential,
        cube: &Cube,
        x: &[f64],
    ) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        // finite range: nothing reaches deeper than one range into the box
        if cube.half_side() - x.iter().fold(0.0f64, |m, &c| m.max(c.abs()))
            >= potential.range()
        {
            return 0.0;
        }
        let mut w = 0.0;
        for y in self.points() {
            let r = dist(x, y);
            if r < potential.range() {
                w += potential.evaluate_unchecked(r);
            }
        }
        w
    }

    /// One-body boundary weight `exp(-beta * w(x))`: exactly 1 deep inside,
    /// exactly 0 on hard-core overlap.
    pub fn weight(
        &self,
        potential: &PairPotential,
        cube: &Cube,
        beta: f64,
        x: &[f64],
    ) -> Result<f64> {
        Ok((-beta * self.boundary_energy(potential, cube, x)?).exp())
    }

    #[inline]
    pub(crate) fn weight_unchecked(
        &self,
        potential: &PairPotential,
        cube: &Cube,
        beta: f64,
        x: &[f64],
    ) -> f64 {
        if self.points.is_empty() {
            return 1.0;
        }
        (-beta * self.boundary_energy_unchecked(potential, cube, x)).exp()
    }

    /// Sample the two-sided boundary-energy bound: `w = 0` exactly where the
    /// distance to the boundary is at least the range, and
    /// `w >= -kappa * rho_omega` elsewhere (`+inf` passes trivially).
    pub fn check_energy_bound(
        &self,
        potential: &PairPotential,
        cube: &Cube,
        samples: &[Vec<f64>],
    ) -> Result<BoundaryEnergyReport> {
        let kappa = potential.kappa();
        let floor = -kappa * self.rho_omega;
        let mut violations = 0usize;
        let mut worst_slack = f64::INFINITY;
        for x in samples {
            let w = self.boundary_energy(potential, cube, x)?;
            let deep = cube.dist_to_boundary(x)? >= potential.range();
            if deep {
                if w != 0.0 {
                    violations += 1;
                }
            } else if w.is_finite() {
                let slack = w - floor;
                worst_slack = worst_slack.min(slack);
                if w < floor {
                    violations += 1;
                }
            }
        }
        Ok(BoundaryEnergyReport {
            checked: samples.len(),
            violations,
            worst_slack,
            pass: violations == 0,
        })
    }
}

fn sample_poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    use rand_distr::Distribution;
    if mean == 0.0 {
        return 0;
    }
    let poi = rand_distr::Poisson::new(mean).expect("positive finite mean");
    poi.sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square_well() -> PairPotential {
        PairPotential::square_well(0.5, 1.0, 1.0, Some(1.0)).unwrap()
    }

    fn setup(half: f64) -> (Cube, CubeGrid) {
        let cube = Cube::new(1, half).unwrap();
        let grid = CubeGrid::aligned(&cube, 0.25).unwrap();
        (cube, grid)
    }

    #[test]
    fn collar_filter_drops_far_and_interior_points() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::Explicit {
                points: vec![vec![5.3], vec![7.0], vec![4.0], vec![-5.9], vec![-6.0]],
            },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        // 5.3 and -5.9 survive; 7.0 and -6.0 are beyond range, 4.0 is interior
        assert_eq!(cfg.len(), 2);
    }

    #[test]
    fn energy_single_point() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::Explicit {
                points: vec![vec![5.2]],
            },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        // x = L - 0.3 sits at distance 0.5 from the boundary point: in-well
        assert_eq!(cfg.boundary_energy(&p, &cube, &[4.7]).unwrap(), -1.0);
        assert_relative_eq!(
            cfg.weight(&p, &cube, 1.0, &[4.7]).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        // deep interior: exact zero / exact one
        assert_eq!(cfg.boundary_energy(&p, &cube, &[0.0]).unwrap(), 0.0);
        assert_eq!(cfg.weight(&p, &cube, 1.0, &[0.0]).unwrap(), 1.0);
        // hard-core overlap with the fixed particle
        assert_eq!(
            cfg.boundary_energy(&p, &cube, &[4.9]).unwrap(),
            f64::INFINITY
        );
        assert_eq!(cfg.weight(&p, &cube, 1.0, &[4.9]).unwrap(), 0.0);
        // outside the box is rejected
        assert!(cfg.boundary_energy(&p, &cube, &[5.5]).is_err());
    }

    #[test]
    fn free_boundary_is_zero_everywhere() {
        let (cube, _) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::free(1);
        for x in [-4.9, -1.0, 0.0, 3.3, 4.99] {
            assert_eq!(cfg.boundary_energy(&p, &cube, &[x]).unwrap(), 0.0);
            assert_eq!(cfg.weight(&p, &cube, 1.0, &[x]).unwrap(), 1.0);
        }
    }

    #[test]
    fn energy_unchanged_by_far_points() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let near = vec![vec![5.2], vec![-5.4]];
        let mut with_far = near.clone();
        with_far.push(vec![6.5]);
        with_far.push(vec![-40.0]);
        let a = BoundaryConfig::generate(
            GeneratorSpec::Explicit { points: near },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        let b = BoundaryConfig::generate(
            GeneratorSpec::Explicit { points: with_far },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        for k in 0..100 {
            let x = [-5.0 + 10.0 * (k as f64 + 0.5) / 100.0];
            assert_eq!(
                a.boundary_energy(&p, &cube, &x).unwrap(),
                b.boundary_energy(&p, &cube, &x).unwrap()
            );
        }
    }

    #[test]
    fn grid_shell_counts() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::GridShell { spacing: 0.5 },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        // collar width 1 on each side, two lattice points per side
        assert_eq!(cfg.len(), 4);
        // lattice spacing 0.5 on a 0.25 grid: one point per occupied cell
        assert_eq!(cfg.rho_omega(), 4.0);
    }

    #[test]
    fn certification_density_one_point_per_cell() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let pts: Vec<Vec<f64>> = (0..4).map(|k| vec![5.0 + 0.25 * k as f64 + 0.125]).collect();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::Explicit { points: pts },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        assert_eq!(cfg.rho_omega(), 4.0);
        // re-certification is idempotent
        assert_eq!(cfg.certify_density(&grid).max_density(&grid), 4.0);
    }

    #[test]
    fn empty_and_zero_intensity() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::PoissonShell { intensity: 0.0 },
            &cube,
            &grid,
            &p,
            99,
        )
        .unwrap();
        assert!(cfg.is_empty());
        assert_eq!(cfg.rho_omega(), 0.0);
        assert_eq!(BoundaryConfig::free(1).rho_omega(), 0.0);
    }

    #[test]
    fn poisson_deterministic_under_seed() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let make = |seed| {
            BoundaryConfig::generate(
                GeneratorSpec::PoissonShell { intensity: 2.0 },
                &cube,
                &grid,
                &p,
                seed,
            )
            .unwrap()
        };
        let a = make(7);
        let b = make(7);
        assert_eq!(a.points, b.points);
        assert_eq!(a.rho_omega(), b.rho_omega());
        assert!(a.rho_omega().is_finite());
        // all stored points live in the open collar
        for y in a.points() {
            assert!(!cube.contains(y));
            assert!(cube.exterior_distance(y) < p.range());
        }
    }

    #[test]
    fn duplicate_points_allowed() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::Explicit {
                points: vec![vec![5.2], vec![5.2]],
            },
            &cube,
            &grid,
            &p,
            0,
        )
        .unwrap();
        assert_eq!(cfg.len(), 2);
        assert_eq!(cfg.boundary_energy(&p, &cube, &[4.7]).unwrap(), -2.0);
        assert_eq!(cfg.rho_omega(), 8.0);
    }

    #[test]
    fn energy_bound_sampled() {
        let (cube, grid) = setup(5.0);
        let p = square_well();
        let cfg = BoundaryConfig::generate(
            GeneratorSpec::PoissonShell { intensity: 2.0 },
            &cube,
            &grid,
            &p,
            3,
        )
        .unwrap();
        let xs: Vec<Vec<f64>> = (0..20_000)
            .map(|k| vec![-5.0 + 10.0 * (k as f64 + 0.5) / 20_000.0])
            .collect();
        let report = cfg.check_energy_bound(&p, &cube, &xs).unwrap();
        assert!(report.pass, "violations: {}", report.violations);
    }
}
