//! Run configuration: a single structured text file describing the
//! potential, box, grid, shell, boundary, thermodynamic point and estimator
//! settings. Unknown keys are errors; every run echoes a hash of the
//! effective configuration so emitted rows can be traced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryConfig, GeneratorSpec};
use crate::error::{Error, Result};
use crate::geometry::{Cube, CubeGrid, ShellSpec};
use crate::mayer::{Model, SamplerSpec};
use crate::potential::{PairPotential, Piece, Profile, ThermoParams};
use crate::sampler::McSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default = "default_dimension")]
    pub d: usize,
    #[serde(default)]
    pub range: Option<f64>,
    #[serde(default)]
    pub hard_core: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub c_decl: Option<f64>,
    #[serde(default)]
    pub pieces: Option<Vec<[f64; 3]>>,
}

fn default_dimension() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub half_side: f64,
    #[serde(default)]
    pub d: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    #[serde(default = "default_h_exponent")]
    pub h_exponent: f64,
}

fn default_h_exponent() -> f64 {
    0.5
}

impl Default for ShellConfig {
    fn default() -> Self {
        ShellConfig {
            h_exponent: default_h_exponent(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpecConfig {
    pub kind: String,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub intensity: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub points_file: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoConfig {
    pub beta: f64,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_chunk")]
    pub chunk: u64,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_seed() -> u64 {
    1
}
fn default_samples() -> u64 {
    100_000
}
fn default_chunk() -> u64 {
    4096
}
fn default_method() -> String {
    "mc".into()
}
fn default_grid_points() -> usize {
    200
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            seed: default_seed(),
            samples: default_samples(),
            chunk: default_chunk(),
            method: default_method(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub out: Option<String>,
}

/// The whole run configuration. Round-trips losslessly through
/// serialization; the canonical re-serialization feeds the config hash.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(rename = "box")]
    pub box_: BoxConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub shell: ShellConfig,
    #[serde(default)]
    pub boundary: Option<BoundarySpecConfig>,
    pub thermo: ThermoConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A fully constructed system, owning every model object.
#[derive(Clone, Debug)]
pub struct BuiltSystem {
    pub potential: PairPotential,
    pub cube: Cube,
    pub grid: CubeGrid,
    pub shell: ShellSpec,
    pub boundary: BoundaryConfig,
    pub thermo: ThermoParams,
    pub sampler: SamplerSpec,
    pub config_hash: String,
}

impl BuiltSystem {
    pub fn model(&self) -> Model<'_> {
        Model {
            potential: &self.potential,
            cube: &self.cube,
            boundary: &self.boundary,
            beta: self.thermo.beta,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Stable hash of the canonical re-serialization.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).unwrap_or_default();
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    fn build_potential(&self) -> Result<PairPotential> {
        let p = &self.potential;
        match p.preset.as_deref() {
            Some("hard_rod") | Some("hard_sphere") => {
                let a = p.hard_core.or(p.range).unwrap_or(1.0);
                PairPotential::hard_sphere(p.d, a)
            }
            Some("square_well") => {
                if p.d != 1 {
                    return Err(Error::Config(
                        "the square-well preset is one-dimensional".into(),
                    ));
                }
                PairPotential::square_well(
                    p.hard_core.unwrap_or(0.5),
                    p.epsilon.unwrap_or(1.0),
                    p.range.unwrap_or(1.0),
                    p.c_decl,
                )
            }
            Some(other) => Err(Error::Config(format!(
                "unknown potential preset '{other}' (hard_rod | square_well)"
            ))),
            None => {
                let pieces = p.pieces.as_ref().ok_or_else(|| {
                    Error::Config("custom potentials need a pieces table".into())
                })?;
                let range = p.range.ok_or_else(|| {
                    Error::Config("custom potentials need an explicit range".into())
                })?;
                PairPotential::new(
                    p.d,
                    range,
                    p.hard_core.unwrap_or(0.0),
                    p.c_decl.unwrap_or(0.0),
                    Profile::Piecewise(
                        pieces
                            .iter()
                            .map(|&[lo, hi, value]| Piece {
                                r_lo: lo,
                                r_hi: hi,
                                value,
                            })
                            .collect(),
                    ),
                )
            }
        }
    }

    fn build_boundary(
        &self,
        cube: &Cube,
        grid: &CubeGrid,
        potential: &PairPotential,
        base_dir: Option<&Path>,
    ) -> Result<BoundaryConfig> {
        let Some(spec) = &self.boundary else {
            return Ok(BoundaryConfig::free(cube.dimension()));
        };
        let seed = spec.seed.unwrap_or(0);
        let generator = match spec.kind.as_str() {
            "free" => return Ok(BoundaryConfig::free(cube.dimension())),
            "explicit" => {
                let mut points = spec.points.clone().unwrap_or_default();
                if let Some(file) = &spec.points_file {
                    let path = match base_dir {
                        Some(dir) => dir.join(file),
                        None => Path::new(file).to_path_buf(),
                    };
                    points.extend(read_points_csv(&path, cube.dimension())?);
                }
                GeneratorSpec::Explicit { points }
            }
            "grid" => GeneratorSpec::GridShell {
                spacing: spec
                    .spacing
                    .ok_or_else(|| Error::Config("grid boundary needs a spacing".into()))?,
            },
            "poisson" => GeneratorSpec::PoissonShell {
                intensity: spec.intensity.ok_or_else(|| {
                    Error::Config("poisson boundary needs an intensity".into())
                })?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown boundary kind '{other}' (explicit | grid | poisson | free)"
                )))
            }
        };
        BoundaryConfig::generate(generator, cube, grid, potential, seed)
    }

    /// Validate and construct every model object. `base_dir` anchors
    /// relative paths referenced by the configuration.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<BuiltSystem> {
        let potential = self.build_potential()?;
        if let Some(d) = self.box_.d {
            if d != potential.dimension() {
                return Err(Error::Config(format!(
                    "box dimension {d} disagrees with the potential dimension {}",
                    potential.dimension()
                )));
            }
        }
        let cube = Cube::new(potential.dimension(), self.box_.half_side)?;
        let grid = match self.grid.delta {
            Some(delta) => CubeGrid::aligned(&cube, delta)?,
            None => CubeGrid::default_for(&cube, potential.range())?,
        };
        let shell = ShellSpec::new(self.shell.h_exponent)?;
        let boundary = self.build_boundary(&cube, &grid, &potential, base_dir)?;
        let thermo = ThermoParams::new(self.thermo.beta, self.thermo.lambda)?;
        let sampler = match self.estimator.method.as_str() {
            "mc" => SamplerSpec::Mc(
                McSpec::new(self.estimator.seed, self.estimator.samples)
                    .with_chunk(self.estimator.chunk),
            ),
            "grid" => SamplerSpec::Grid {
                points_per_axis: self.estimator.grid_points,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator method '{other}' (mc | grid)"
                )))
            }
        };
        Ok(BuiltSystem {
            potential,
            cube,
            grid,
            shell,
            boundary,
            thermo,
            sampler,
            config_hash: self.hash(),
        })
    }
}

fn read_points_csv(path: &Path, dimension: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "{}:{}: cannot parse '{tok}' as a coordinate",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != dimension {
            return Err(Error::Config(format!(
                "{}:{}: expected {dimension} columns, found {}",
                path.display(),
                lineno + 1,
                row.len()
            )));
        }
        out.push(row);
    }
    Ok(out)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
