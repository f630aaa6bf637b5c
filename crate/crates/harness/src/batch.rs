use fliqc_core::geometry::min_surface_distance;
use fliqc_core::{ee_position, integrate, plan_with, step, JointState, Outcome, SphereObstacle, Trajectory, WarmStart};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::metrics::{metrics, MetricsRow};
use crate::motion::advance_obstacles;
use crate::scenario::{Sampling, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over successful runs; zero when there are none.
    pub mean_path_length: f64,
    pub mean_avg_joint_movement: f64,
    pub violations_among_successes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub rows: Vec<MetricsRow>,
    /// Sampled start configuration and goal per run.
    pub samples: Vec<(DVector<f64>, DVector<f64>)>,
    pub aggregate: Aggregate,
}

/// Plan a scenario once, moving obstacles with its reversal scripts.
pub fn run_scenario(scenario: &Scenario) -> Result<Trajectory<f64>> {
    let mut scripts = scenario.motion.clone();
    for s in &mut scripts {
        s.reset();
    }
    Ok(plan_with(&scenario.core, |obs, h| advance_obstacles(obs, h, &mut scripts))?)
}

/// A fixed-length run together with the obstacle layout at every state.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub traj: Trajectory<f64>,
    pub obstacles: Vec<Vec<SphereObstacle<f64>>>,
}

/// Run exactly `n_steps` control steps without stopping at the goal. Stops early only when a
/// step is infeasible.
pub fn simulate(scenario: &Scenario, n_steps: usize) -> Result<Rollout> {
    let core = &scenario.core;
    core.validate()?;
    let mut scripts = scenario.motion.clone();
    for s in &mut scripts {
        s.reset();
    }
    let h = core.config.planner.h;
    let mut state = JointState::new(core.q_start.clone());
    let mut obstacles = core.obstacles.clone();
    let mut warm = WarmStart::default();
    let mut traj = Trajectory {
        ee_path: vec![ee_position(&core.model, &state)?],
        states: vec![state.clone()],
        steps: Vec::with_capacity(n_steps),
        outcome: Outcome::IterBudget,
        h,
    };
    let mut history = vec![obstacles.clone()];
    for _ in 0..n_steps {
        let res = step(&core.model, &state, &obstacles, &core.goal, &core.config, &mut warm)?;
        let infeasible = res.infeasible();
        state = integrate(&state, &res.qdot, h);
        advance_obstacles(&mut obstacles, h, &mut scripts);
        traj.ee_path.push(ee_position(&core.model, &state)?);
        traj.states.push(state.clone());
        traj.steps.push(res);
        history.push(obstacles.clone());
        if infeasible {
            traj.outcome = Outcome::Infeasible;
            break;
        }
    }
    if traj.outcome != Outcome::Infeasible {
        let last = traj.ee_path.last().expect("at least the start state");
        if (&core.goal - last).norm() <= core.config.planner.goal_tol {
            traj.outcome = Outcome::ReachedGoal;
        }
    }
    Ok(Rollout { traj, obstacles: history })
}

/// Start and goal clear ε against every obstacle, and the goal is not already reached.
pub fn is_feasible_pair(scenario: &Scenario, q: &DVector<f64>, goal: &DVector<f64>) -> Result<bool> {
    let core = &scenario.core;
    let cfg = &core.config.contact;
    let state = JointState::new(q.clone());
    if let Some(d) = min_surface_distance(&core.model, &state, &core.obstacles, cfg)? {
        if d < cfg.epsilon {
            return Ok(false);
        }
    }
    let g = core.model.task_space.lift(goal);
    let ee_pad = cfg.padding + core.model.link_radius[core.model.links() - 1];
    for o in &core.obstacles {
        if (g - o.center).norm() - o.radius - ee_pad < cfg.epsilon {
            return Ok(false);
        }
    }
    let ee = ee_position(&core.model, &state)?;
    Ok((goal - ee).norm() > core.config.planner.goal_tol)
}

fn uniform(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        lo.len(),
        lo.iter().zip(hi).map(|(a, b)| if a < b { rng.random_range(*a..*b) } else { *a }),
    )
}

/// Draw `n_runs` feasible start/goal pairs by rejection sampling.
pub fn sample_pairs(
    scenario: &Scenario,
    sampling: &Sampling,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let mut found = None;
        for _ in 0..sampling.max_attempts {
            let q = uniform(&mut rng, &sampling.q_start_lo, &sampling.q_start_hi);
            let g = uniform(&mut rng, &sampling.goal_lo, &sampling.goal_hi);
            if is_feasible_pair(scenario, &q, &g)? {
                found = Some((q, g));
                break;
            }
        }
        out.push(found.ok_or_else(|| {
            HarnessError::Invalid(format!(
                "run {run}: no feasible start/goal pair in {} attempts",
                sampling.max_attempts
            ))
        })?);
    }
    Ok(out)
}

pub fn aggregate(rows: &[MetricsRow]) -> Aggregate {
    let ok: Vec<&MetricsRow> = rows.iter().filter(|r| r.success).collect();
    let mean = |f: fn(&MetricsRow) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    Aggregate {
        runs: rows.len(),
        successes: ok.len(),
        success_rate: if rows.is_empty() { 0.0 } else { ok.len() as f64 / rows.len() as f64 },
        mean_path_length: mean(|r| r.path_length),
        mean_avg_joint_movement: mean(|r| r.avg_joint_movement),
        violations_among_successes: ok.iter().map(|r| r.safety_violations).sum(),
    }
}

/// Plan `n_runs` start/goal pairs drawn from the scenario's sampling boxes (or the fixed pair
/// when it has none). Runs execute in parallel; rows come back in run order.
pub fn run_batch(template: &Scenario, n_runs: usize, seed: u64) -> Result<BatchReport> {
    if n_runs == 0 {
        return Err(HarnessError::Invalid("n_runs must be at least 1".into()));
    }
    let samples = match &template.sampling {
        Some(s) => sample_pairs(template, s, n_runs, seed)?,
        None => vec![(template.core.q_start.clone(), template.core.goal.clone()); n_runs],
    };
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(run, (q, g))| {
            let mut sc = template.clone();
            sc.core.q_start = q.clone();
            sc.core.goal = g.clone();
            let traj = run_scenario(&sc)?;
            Ok(metrics(&traj, &template.id, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&rows);
    Ok(BatchReport { rows, samples, aggregate })
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

