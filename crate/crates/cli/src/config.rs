use std::f64::consts::PI;
use std::path::PathBuf;

use reeblab::blowup::{FrameOptions, RotationOptions};
use reeblab::dynamics::OrbitSearchOptions;
use reeblab::entropy::EntropyOptions;
use reeblab::geometry::{LiouvilleGrid, ModelDescriptor};
use reeblab::liftaxiom::LiftCheckOptions;
use reeblab::measures::CrossingOptions;
use reeblab::sfs::{CriterionOptions, DiagnosticsOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Model,
    Orbits,
    Rotnum,
    Linking,
    Liouville,
    Criterion,
    Entropy,
    Lift,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Orbits => "orbits",
            Command::Rotnum => "rotnum",
            Command::Linking => "linking",
            Command::Liouville => "liouville",
            Command::Criterion => "criterion",
            Command::Entropy => "entropy",
            Command::Lift => "lift",
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, Command::Rotnum | Command::Lift)
    }

    fn default_model(self) -> ModelDescriptor {
        match self {
            Command::Lift => ModelDescriptor::lift_box(),
            _ => ModelDescriptor::round_sphere(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub model: Option<ModelDescriptor>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn model(&self) -> ModelDescriptor {
        self.model.clone().unwrap_or_else(|| self.command.default_model())
    }

    /// Parameter object for the command; an absent object means all defaults.
    pub fn params<T: for<'de> Deserialize<'de>>(&self) -> serde_json::Result<T> {
        match &self.params {
            serde_json::Value::Null => serde_json::from_value(serde_json::json!({})),
            v => serde_json::from_value(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub n_samples: usize,
    pub tol: f64,
    pub helicity_pairs: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            tol: 1e-9,
            helicity_pairs: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitsParams {
    pub n_seeds: usize,
    pub t_max: f64,
    pub search: OrbitSearchOptions,
}

impl Default for OrbitsParams {
    fn default() -> Self {
        Self {
            n_seeds: 200,
            t_max: 5.0,
            search: OrbitSearchOptions::default(),
        }
    }
}

/// A periodic orbit given by a point on it and its period.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub base_point: [f64; 4],
    pub period: f64,
}

impl OrbitSpec {
    fn z2_zero() -> Self {
        Self {
            base_point: [1.0, 0.0, 0.0, 0.0],
            period: PI,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotnumParams {
    pub orbits: Vec<OrbitSpec>,
    /// `(p, q)` pairs evaluated on every orbit.
    pub classes: Vec<[f64; 2]>,
    pub frame: FrameOptions,
    pub rotation: RotationOptions,
    pub search: OrbitSearchOptions,
}

impl Default for RotnumParams {
    fn default() -> Self {
        Self {
            orbits: vec![OrbitSpec::z2_zero()],
            classes: vec![[1.0, 0.0], [0.0, 1.0]],
            frame: FrameOptions::default(),
            rotation: RotationOptions::default(),
            search: OrbitSearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkingParams {
    /// Seifert mesh JSON; the built-in Hopf disk when absent.
    pub mesh: Option<PathBuf>,
    pub link_periods: Vec<f64>,
    pub n_list: Vec<usize>,
    pub n_samples: usize,
    pub helicity_pairs: usize,
    pub crossing: CrossingOptions,
}

impl Default for LinkingParams {
    fn default() -> Self {
        Self {
            mesh: None,
            link_periods: vec![PI],
            n_list: vec![10, 100, 1000],
            n_samples: 64,
            helicity_pairs: 20_000,
            crossing: CrossingOptions::default(),
        }
    }
}

/// The open set `{x_coordinate > threshold}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpenSetParams {
    pub coordinate: usize,
    pub threshold: f64,
    pub mc_samples: usize,
    pub shell_deltas: Vec<f64>,
}

impl Default for OpenSetParams {
    fn default() -> Self {
        Self {
            coordinate: 0,
            threshold: 0.3,
            mc_samples: 400_000,
            shell_deltas: vec![0.1, 0.01, 0.001],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiouvilleParams {
    pub n_list: Vec<usize>,
    pub n_samples: usize,
    pub grid: LiouvilleGrid,
    pub open_set: Option<OpenSetParams>,
}

impl Default for LiouvilleParams {
    fn default() -> Self {
        Self {
            n_list: vec![10, 100, 1000],
            n_samples: 256,
            grid: LiouvilleGrid::default(),
            open_set: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionParams {
    pub basepoint: [f64; 4],
    pub n_points: usize,
    pub options: DiagnosticsOptions,
}

impl Default for SectionParams {
    fn default() -> Self {
        Self {
            basepoint: [0.0, 0.0, 1.0, 0.0],
            n_points: 100,
            options: DiagnosticsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriterionParams {
    pub link: Vec<OrbitSpec>,
    /// Class coefficients per link component; the linking dual of the first
    /// component when absent.
    pub coeffs: Option<Vec<f64>>,
    /// Hopf-fiber orbit measures (round sphere only).
    pub n_fibers: usize,
    pub n_segments: usize,
    pub segment_duration: f64,
    pub segment_step: f64,
    pub segment_tol: f64,
    pub orbit_samples: usize,
    pub options: CriterionOptions,
    /// Run the LP search over `{y, −y}`.
    pub search: bool,
    pub section: Option<SectionParams>,
}

impl Default for CriterionParams {
    fn default() -> Self {
        Self {
            link: vec![OrbitSpec::z2_zero()],
            coeffs: None,
            n_fibers: 50,
            n_segments: 20,
            segment_duration: 20.0,
            segment_step: 1.0,
            segment_tol: 1e-11,
            orbit_samples: 128,
            options: CriterionOptions::default(),
            search: true,
            section: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropySystemKind {
    Reeb,
    CatMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    pub system: EntropySystemKind,
    pub cloud_size: usize,
    /// Side of the seeded box for the cat-map cloud; uniform when absent.
    pub box_delta: Option<f64>,
    pub t_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub tol: f64,
    pub options: EntropyOptions,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            system: EntropySystemKind::Reeb,
            cloud_size: 400,
            box_delta: None,
            t_list: (1..=8).map(f64::from).collect(),
            eps_list: vec![0.6, 0.4],
            tol: 1e-10,
            options: EntropyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftParams {
    pub z0: [f64; 2],
    pub eps: f64,
    pub check: LiftCheckOptions,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            z0: [0.01, 0.0],
            eps: 0.05,
            check: LiftCheckOptions::default(),
        }
    }
}
