//! Scenario documents: robot, start, goal, obstacles and every planner setting.
//!
//! ```json
//! {
//!   "id": "planar_2r_example",
//!   "robot_model": "../robots/planar_2r.json",
//!   "q_start": [0.523, 0.785],
//!   "goal": [-0.05, 0.05],
//!   "obstacles": [{"id": "o1", "center": [0.0, 0.08, 0.0], "radius": 0.02}],
//!   "contact_cfg": {"epsilon": 0.01, "padding": 0.0, "tracked_links": [1, 2]},
//!   "planner_cfg": {"k_d": 1.0},
//!   "solver_opts": {},
//!   "seed": 0
//! }
//! ```
//!
//! `robot_model` is a path relative to the scenario file, `bundled:<name>`, or an inline robot
//! description. Omitted settings take their defaults; `tracked_links` defaults to every link.

use std::path::{Path, PathBuf};
use std::time::Duration;

use fliqc_core::geometry::SphereObstacleFile;
use fliqc_core::kinematics::{bundled, RobotModelFile};
use fliqc_core::{ContactConfig, CostSpec, PlannerConfig, RobotModel, SolverOptions, StepConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::motion::ReversalScript;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotRef {
    Path(String),
    Inline(Box<RobotModelFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactCfgFile {
    pub epsilon: f64,
    #[serde(default = "defaults::padding")]
    pub padding: f64,
    #[serde(default = "defaults::influence_margin")]
    pub influence_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_links: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerCfgFile {
    pub h: f64,
    pub k_d: f64,
    pub k_q: f64,
    pub k_c: f64,
    pub mu: f64,
    pub goal_tol: f64,
    pub max_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostFile>,
}

impl Default for PlannerCfgFile {
    fn default() -> Self {
        let d = PlannerConfig::<f64>::default();
        Self {
            h: d.h,
            k_d: d.k_d,
            k_q: d.k_q,
            k_c: d.k_c,
            mu: d.mu,
            goal_tol: d.goal_tol,
            max_iters: d.max_iters,
            cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptsFile {
    pub rho0: f64,
    pub beta: f64,
    pub comp_tol: f64,
    pub stat_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Wall-clock budget per solve in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
}

impl Default for SolverOptsFile {
    fn default() -> Self {
        let d = SolverOptions::<f64>::default();
        Self {
            rho0: d.rho0,
            beta: d.beta,
            comp_tol: d.comp_tol,
            stat_tol: d.stat_tol,
            max_outer: d.max_outer,
            max_inner: d.max_inner,
            time_budget_s: None,
        }
    }
}

/// Boxes that batch runs sample from: joint-space start and task-space goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub q_start_lo: Vec<f64>,
    pub q_start_hi: Vec<f64>,
    pub goal_lo: Vec<f64>,
    pub goal_hi: Vec<f64>,
    #[serde(default = "defaults::max_attempts")]
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub id: String,
    pub robot_model: RobotRef,
    pub q_start: Vec<f64>,
    pub goal: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<SphereObstacleFile>,
    pub contact_cfg: ContactCfgFile,
    #[serde(default)]
    pub planner_cfg: PlannerCfgFile,
    #[serde(default)]
    pub solver_opts: SolverOptsFile,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacle_motion: Vec<ReversalScript>,
}

mod defaults {
    pub fn padding() -> f64 {
        0.15
    }
    pub fn influence_margin() -> f64 {
        0.02
    }
    pub fn max_attempts() -> usize {
        10_000
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    /// Robot reference as resolved at load time (relative paths made absolute).
    pub robot_ref: RobotRef,
    pub core: fliqc_core::Scenario<f64>,
    pub seed: u64,
    pub sampling: Option<Sampling>,
    pub motion: Vec<ReversalScript>,
}

fn resolve_robot(r: &RobotRef, base: &Path) -> Result<(RobotRef, RobotModel<f64>)> {
    match r {
        RobotRef::Inline(file) => Ok((r.clone(), (**file).clone().into_model()?)),
        RobotRef::Path(p) => {
            if let Some(name) = p.strip_prefix("bundled:") {
                let text = bundled::by_name(name)
                    .ok_or_else(|| HarnessError::Invalid(format!("no bundled robot named {name}")))?;
                return Ok((r.clone(), RobotModel::from_json(text)?));
            }
            let path = base.join(p);
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
            let file: RobotModelFile = parse(&text, &path.display().to_string())?;
            let abs = std::path::absolute(&path).unwrap_or(path);
            Ok((RobotRef::Path(abs.display().to_string()), file.into_model()?))
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, file: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
        file: file.to_string(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn vec3(v: &[f64], what: &str) -> Result<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(HarnessError::Invalid(format!("{what} has non-finite entries")));
    }
    Ok(DVector::from_column_slice(v))
}

impl ScenarioFile {
    /// Resolve references and defaults. `base` is the directory relative paths start from.
    pub fn resolve(&self, base: &Path) -> Result<Scenario> {
        let (robot_ref, model) = resolve_robot(&self.robot_model, base)?;
        let n = model.n();
        let q_start = vec3(&self.q_start, "q_start")?;
        let goal = vec3(&self.goal, "goal")?;
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| o.into_obstacle())
            .collect::<fliqc_core::Result<Vec<_>>>()?;
        for (i, o) in obstacles.iter().enumerate() {
            if obstacles[..i].iter().any(|p| p.id == o.id) {
                return Err(HarnessError::Invalid(format!("duplicate obstacle id {}", o.id)));
            }
        }
        for m in &self.obstacle_motion {
            if !obstacles.iter().any(|o| o.id == m.id) {
                return Err(HarnessError::Invalid(format!("obstacle_motion refers to unknown obstacle {}", m.id)));
            }
        }
        let c = &self.contact_cfg;
        let contact = ContactConfig {
            epsilon: c.epsilon,
            padding: c.padding,
            influence_margin: c.influence_margin,
            tracked_links: c.tracked_links.clone().unwrap_or_else(|| (1..=model.links()).collect()),
        };
        let p = &self.planner_cfg;
        let cost = match &p.cost {
            None => CostSpec::default(),
            Some(cf) => CostSpec {
                q: match &cf.q {
                    Some(rows) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                            return Err(HarnessError::Invalid(format!("cost Q must be {n}×{n}")));
                        }
                        Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
                    }
                    None => None,
                },
                c: cf.c.as_deref().map(DVector::from_column_slice),
            },
        };
        let planner = PlannerConfig {
            h: p.h,
            k_d: p.k_d,
            k_q: p.k_q,
            k_c: p.k_c,
            mu: p.mu,
            goal_tol: p.goal_tol,
            max_iters: p.max_iters,
            cost,
        };
        let s = &self.solver_opts;
        let time_budget = match s.time_budget_s {
            Some(t) if !(t >= 0.0 && t.is_finite()) => {
                return Err(HarnessError::Invalid("time_budget_s must be a non-negative number".into()))
            }
            t => t.map(Duration::from_secs_f64),
        };
        let solver = SolverOptions {
            rho0: s.rho0,
            beta: s.beta,
            comp_tol: s.comp_tol,
            stat_tol: s.stat_tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            time_budget,
            warm_start: None,
        };
        let core = fliqc_core::Scenario {
            model,
            q_start,
            goal,
            obstacles,
            config: StepConfig { contact, planner, solver },
        };
        core.validate()?;
        if let Some(smp) = &self.sampling {
            let dims = [
                ("sampling.q_start_lo", smp.q_start_lo.len(), n),
                ("sampling.q_start_hi", smp.q_start_hi.len(), n),
                ("sampling.goal_lo", smp.goal_lo.len(), core.model.task_dim()),
                ("sampling.goal_hi", smp.goal_hi.len(), core.model.task_dim()),
            ];
            for (what, got, want) in dims {
                if got != want {
                    return Err(HarnessError::Invalid(format!("{what} has {got} entries, expected {want}")));
                }
            }
            let ordered = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).all(|(a, b)| a <= b);
            if !ordered(&smp.q_start_lo, &smp.q_start_hi) || !ordered(&smp.goal_lo, &smp.goal_hi) {
                return Err(HarnessError::Invalid("sampling box lower corner exceeds upper corner".into()));
            }
        }
        Ok(Scenario {
            id: self.id.clone(),
            robot_ref,
            core,
            seed: self.seed,
            sampling: self.sampling.clone(),
            motion: self.obstacle_motion.clone(),
        })
    }
}

impl Scenario {
    /// Document form with every default written out.
    pub fn to_file(&self) -> ScenarioFile {
        let cfg = &self.core.config;
        let p = &cfg.planner;
        let s = &cfg.solver;
        ScenarioFile {
            id: self.id.clone(),
            robot_model: self.robot_ref.clone(),
            q_start: self.core.q_start.iter().copied().collect(),
            goal: self.core.goal.iter().copied().collect(),
            obstacles: self.core.obstacles.iter().map(SphereObstacleFile::from_obstacle).collect(),
            contact_cfg: ContactCfgFile {
                epsilon: cfg.contact.epsilon,
                padding: cfg.contact.padding,
                influence_margin: cfg.contact.influence_margin,
                tracked_links: Some(cfg.contact.tracked_links.clone()),
            },
            planner_cfg: PlannerCfgFile {
                h: p.h,
                k_d: p.k_d,
                k_q: p.k_q,
                k_c: p.k_c,
                mu: p.mu,
                goal_tol: p.goal_tol,
                max_iters: p.max_iters,
                cost: (p.cost != CostSpec::default()).then(|| CostFile {
                    q: p.cost.q.as_ref().map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()),
                    c: p.cost.c.as_ref().map(|c| c.iter().copied().collect()),
                }),
            },
            solver_opts: SolverOptsFile {
                rho0: s.rho0,
                beta: s.beta,
                comp_tol: s.comp_tol,
                stat_tol: s.stat_tol,
                max_outer: s.max_outer,
                max_inner: s.max_inner,
                time_budget_s: s.time_budget.map(|d| d.as_secs_f64()),
            },
            seed: self.seed,
            sampling: self.sampling.clone(),
            obstacle_motion: self.motion.clone(),
        }
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let file: ScenarioFile = parse(text, "<inline>")?;
        file.resolve(base)
    }
}

/// Read and validate a scenario document.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: ScenarioFile = parse(&text, &path.display().to_string())?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    file.resolve(&base)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&scenario.to_file())?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
