//! Run configuration: a flat TOML file, every key optional.
//!
//! ```toml
//! command = "convergence"          # optional; must match the subcommand
//! seed = 0
//! stabilization = "auto"           # auto | xz | acute | none
//! omega_factor = 0.6               # xz only; default δ/3
//! acute_mu = 1.1
//!
//! mesh.family = "xz_square"        # xz_square | acute_rhombus | file:<path>
//! mesh.levels = [2, 3, 4, 5, 6]    # or a single level
//!
//! problem.kind = "sine_product"    # sine_product | zero | nonneg_density | rough_density
//! problem.nu = 1.0
//! problem.c_f = 1.0
//! problem.x_jump = 0.5             # rough_density only
//! problem.coupling = "local_linear" # or nonlocal_convolution
//! problem.kernel_amplitude = 0.5
//! problem.kernel_width = 0.1
//!
//! hamiltonian.kind = "huber"       # huber | finite
//! hamiltonian.R = 1.0
//! hamiltonian.epsilon = 0.0
//! hamiltonian.drifts = [[1.0, 0.0], [0.0, 1.0]]
//! hamiltonian.costs = [0.0, 0.0]
//!
//! solver.tol_outer = 1e-9
//! solver.max_outer = 200
//! solver.damping = 0.5
//! solver.tol_newton = 1e-11
//! solver.max_newton = 50
//!
//! convergence.reference_offset = 2
//! verify.level = 4
//! verify.trials = 200
//! verify.pairs = 50
//! verify.samples = 1000
//!
//! output.dir = "out"
//! ```
//!
//! Relative mesh file paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mfg_core::analysis::{MeshFamily, StabilizationChoice};
use mfg_core::hamiltonian::{finite_control, huber_ball, HamiltonianSpec};
use mfg_core::mesh::read_mesh;
use mfg_core::problem::{
    make_manufactured, make_nonneg_density_problem, make_rough_density_problem_at, make_sine_problem, Coupling,
    Domain, GaussianKernel, MfgProblem, SmoothField,
};
use mfg_core::solver::SolverConfig;
use mfg_core::stabilization::DEFAULT_MU;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    One(usize),
    Many(Vec<usize>),
}

impl Levels {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Self::One(l) => vec![*l],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub family: String,
    pub levels: Levels,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            family: "xz_square".into(),
            levels: Levels::Many(vec![2, 3, 4, 5, 6]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: String,
    pub nu: f64,
    pub c_f: f64,
    pub x_jump: f64,
    pub coupling: String,
    pub kernel_amplitude: f64,
    pub kernel_width: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: "sine_product".into(),
            nu: 1.0,
            c_f: 1.0,
            x_jump: 0.5,
            coupling: "local_linear".into(),
            kernel_amplitude: 0.5,
            kernel_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSection {
    pub kind: String,
    #[serde(rename = "R")]
    pub radius: f64,
    pub epsilon: f64,
    pub drifts: Vec<[f64; 2]>,
    pub costs: Vec<f64>,
}

impl Default for HamiltonianSection {
    fn default() -> Self {
        Self {
            kind: "huber".into(),
            radius: 1.0,
            epsilon: 0.0,
            drifts: vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            costs: vec![0.0; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_outer: f64,
    pub max_outer: usize,
    pub damping: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol_outer: d.tol_outer,
            max_outer: d.max_outer,
            damping: d.damping,
            tol_newton: d.tol_newton,
            max_newton: d.max_newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub reference_offset: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { reference_offset: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub level: usize,
    pub trials: usize,
    pub pairs: usize,
    pub samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            level: 4,
            trials: 200,
            pairs: 50,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub seed: u64,
    pub stabilization: String,
    pub omega_factor: Option<f64>,
    pub acute_mu: f64,
    pub mesh: MeshSection,
    pub problem: ProblemSection,
    pub hamiltonian: HamiltonianSection,
    pub solver: SolverSection,
    pub convergence: ConvergenceSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            stabilization: "auto".into(),
            omega_factor: None,
            acute_mu: DEFAULT_MU,
            mesh: MeshSection::default(),
            problem: ProblemSection::default(),
            hamiltonian: HamiltonianSection::default(),
            solver: SolverSection::default(),
            convergence: ConvergenceSection::default(),
            verify: VerifySection::default(),
            output: OutputSection::default(),
        }
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| input(format!("config: {e}")))
    }

    /// Reads a config file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf), CliError> {
        match path {
            None => Ok((Self::default(), PathBuf::from("."))),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((Self::parse(&text)?, base))
            }
        }
    }

    /// SHA-256 of the canonical JSON form, defaults included. The output
    /// directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn levels(&self) -> Result<Vec<usize>, CliError> {
        let levels = self.mesh.levels.to_vec();
        if levels.is_empty() {
            return Err(input("mesh.levels is empty"));
        }
        if levels.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(input("mesh.levels must be consecutive and increasing"));
        }
        Ok(levels)
    }

    pub fn finest_level(&self) -> Result<usize, CliError> {
        Ok(*self.levels()?.last().unwrap())
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            tol_outer: s.tol_outer,
            max_outer: s.max_outer,
            damping: s.damping,
            tol_newton: s.tol_newton,
            max_newton: s.max_newton,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn family(&self, base_dir: &Path) -> Result<(MeshFamily, Domain), CliError> {
        match self.mesh.family.as_str() {
            "xz_square" => Ok((MeshFamily::XzSquare, Domain::UnitSquare)),
            "acute_rhombus" => Ok((MeshFamily::AcuteRhombus, Domain::Rhombus)),
            other => match other.strip_prefix("file:") {
                Some(p) => {
                    let path = base_dir.join(p);
                    let mesh = read_mesh(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
                    Ok((MeshFamily::Custom(mesh), Domain::Custom))
                }
                None => Err(input(format!("unknown mesh.family {other:?}"))),
            },
        }
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec, CliError> {
        let h = &self.hamiltonian;
        let spec = match h.kind.as_str() {
            "huber" => huber_ball(h.radius)?,
            "finite" => finite_control(h.drifts.clone(), h.costs.clone(), h.epsilon)?,
            other => return Err(input(format!("unknown hamiltonian.kind {other:?}"))),
        };
        Ok(spec)
    }

    pub fn problem(&self, domain: Domain) -> Result<MfgProblem, CliError> {
        let p = &self.problem;
        let h = self.hamiltonian()?;
        let mut problem = match p.kind.as_str() {
            "sine_product" => make_sine_problem(p.nu, h, p.c_f, domain)?,
            "zero" => make_manufactured(p.nu, h, p.c_f, SmoothField::zero(), SmoothField::zero(), domain)?,
            "nonneg_density" => make_nonneg_density_problem(p.nu, h, p.c_f, domain)?,
            "rough_density" => {
                if domain != Domain::UnitSquare {
                    return Err(input("rough_density is defined on the unit square only"));
                }
                make_rough_density_problem_at(p.nu, h, p.c_f, p.x_jump)?
            }
            "custom" => return Err(input("custom exact solutions are disabled")),
            other => return Err(input(format!("unknown problem.kind {other:?}"))),
        };
        match p.coupling.as_str() {
            "local_linear" => {}
            "nonlocal_convolution" => {
                if problem.exact.is_some() {
                    return Err(input("nonlocal coupling has no manufactured solution; use nonneg_density or rough_density"));
                }
                let offset = Arc::clone(problem.coupling.offset());
                let kernel = GaussianKernel {
                    amplitude: p.kernel_amplitude,
                    width: p.kernel_width,
                };
                if !(kernel.amplitude >= 0.0 && kernel.width > 0.0) {
                    return Err(input("kernel needs amplitude ≥ 0 and width > 0"));
                }
                problem.coupling = Coupling::NonlocalConvolution {
                    c_f: p.c_f,
                    offset,
                    kernel,
                };
            }
            other => return Err(input(format!("unknown problem.coupling {other:?}"))),
        }
        Ok(problem)
    }

    /// `auto` becomes the acute construction when every angle of the base
    /// mesh is strictly acute (red refinement keeps the angles) and the
    /// edge tensor otherwise.
    pub fn stabilization(&self, family: &MeshFamily, allow_unstabilized: bool) -> Result<StabilizationChoice, CliError> {
        let xz = StabilizationChoice::Xz {
            omega_factor: self.omega_factor,
        };
        let acute = StabilizationChoice::Acute { mu: self.acute_mu };
        match self.stabilization.as_str() {
            "auto" => Ok(if family.base()?.check_acute()? > 0.0 { acute } else { xz }),
            "xz" => Ok(xz),
            "acute" => Ok(acute),
            "none" if allow_unstabilized => Ok(StabilizationChoice::None),
            "none" => Err(input("stabilization = \"none\" voids the maximum principle; pass --allow-unstabilized")),
            other => Err(input(format!("unknown stabilization {other:?}"))),
        }
    }
}
