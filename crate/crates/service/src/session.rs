//! Simulation state owned by the tick loop.

use fliqc_core::kinematics::ChainPoses;
use fliqc_core::{ee_position, integrate, step, JointState, SphereObstacle, StepResult, WarmStart};
use fliqc_harness::{advance_obstacles, iir_filter, FilterState, ReversalScript, Scenario};
use nalgebra::{DVector, Vector3};

use crate::wire::{ClientMessage, ServerState, WireContact, WireObstacle, WireSegment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    /// Broadcast rate (Hz).
    pub tick_rate: f64,
    /// IIR coefficient for client obstacle updates.
    pub filter_a: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { tick_rate: 250.0, filter_a: 0.9 }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return Err(format!("tick rate must be positive, got {}", self.tick_rate));
        }
        if !(0.0..1.0).contains(&self.filter_a) {
            return Err(format!("filter coefficient must lie in [0, 1), got {}", self.filter_a));
        }
        Ok(())
    }
}

pub struct Session {
    scenario: Scenario,
    cfg: SessionConfig,
    steps_per_tick: usize,
    state: JointState<f64>,
    goal: DVector<f64>,
    obstacles: Vec<SphereObstacle<f64>>,
    filters: Vec<FilterState>,
    /// Latest client position per obstacle; `None` until the first update.
    targets: Vec<Option<Vector3<f64>>>,
    scripts: Vec<ReversalScript>,
    warm: WarmStart<f64>,
    paused: bool,
    tick: u64,
    violation: bool,
    last: Option<StepResult<f64>>,
}

impl Session {
    pub fn new(scenario: Scenario, cfg: SessionConfig) -> Result<Self, String> {
        cfg.validate()?;
        scenario.core.validate().map_err(|e| e.to_string())?;
        let h = scenario.core.config.planner.h;
        let steps_per_tick = ((1.0 / (cfg.tick_rate * h)).round() as usize).max(1);
        let mut s = Self {
            state: JointState::new(scenario.core.q_start.clone()),
            goal: scenario.core.goal.clone(),
            obstacles: Vec::new(),
            filters: Vec::new(),
            targets: Vec::new(),
            scripts: Vec::new(),
            warm: WarmStart::default(),
            paused: false,
            tick: 0,
            violation: false,
            last: None,
            steps_per_tick,
            cfg,
            scenario,
        };
        s.reset();
        Ok(s)
    }

    pub fn reset(&mut self) {
        let core = &self.scenario.core;
        self.state = JointState::new(core.q_start.clone());
        self.goal = core.goal.clone();
        self.obstacles = core.obstacles.clone();
        self.filters = self.obstacles.iter().map(|o| FilterState::new(o.center, self.cfg.filter_a)).collect();
        self.targets = vec![None; self.obstacles.len()];
        self.scripts = self.scenario.motion.clone();
        for s in &mut self.scripts {
            s.reset();
        }
        self.warm.clear();
        self.paused = false;
        self.violation = false;
        self.last = None;
    }

    pub fn obstacle_ids(&self) -> Vec<String> {
        self.obstacles.iter().map(|o| o.id.clone()).collect()
    }

    pub fn steps_per_tick(&self) -> usize {
        self.steps_per_tick
    }

    pub fn tick_rate(&self) -> f64 {
        self.cfg.tick_rate
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn state(&self) -> &JointState<f64> {
        &self.state
    }

    pub fn obstacles(&self) -> &[SphereObstacle<f64>] {
        &self.obstacles
    }

    pub fn handle(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::ObstacleUpdate { index, center } => {
                if let Some(t) = self.targets.get_mut(index) {
                    *t = Some(Vector3::from(center));
                }
            }
            ClientMessage::Pause => self.paused = true,
            ClientMessage::Resume => self.paused = false,
            ClientMessage::Reset => self.reset(),
            ClientMessage::SetGoal(g) => {
                let task = self.scenario.core.model.task_space;
                self.goal = task.project(&Vector3::from(g));
                self.warm.clear();
            }
        }
    }

    /// Filter client-driven obstacles once, then run the planner steps of one tick. Pauses the
    /// session when a step is infeasible.
    pub fn tick(&mut self) -> fliqc_core::Result<()> {
        self.tick += 1;
        self.violation = false;
        if self.paused {
            return Ok(());
        }
        for (i, target) in self.targets.iter().enumerate() {
            if let Some(u) = target {
                let (fs, x) = iir_filter(self.filters[i].clone(), u);
                self.filters[i] = fs;
                self.obstacles[i].center = x;
                self.obstacles[i].velocity = Vector3::zeros();
            }
        }
        let core = &self.scenario.core;
        let h = core.config.planner.h;
        for _ in 0..self.steps_per_tick {
            let res = step(&core.model, &self.state, &self.obstacles, &self.goal, &core.config, &mut self.warm)?;
            let infeasible = res.infeasible();
            let inside = res.contacts.iter().any(|c| c.penetrating || c.psi < c.epsilon - 1e-9);
            if inside || (!infeasible && !res.safety_ok) {
                self.violation = true;
            }
            self.state = integrate(&self.state, &res.qdot, h);
            let scripted: Vec<usize> = (0..self.obstacles.len()).filter(|i| self.targets[*i].is_none()).collect();
            for i in scripted {
                advance_obstacles(&mut self.obstacles[i..=i], h, &mut self.scripts);
                self.filters[i] = FilterState::new(self.obstacles[i].center, self.cfg.filter_a);
            }
            self.last = Some(res);
            if infeasible {
                self.paused = true;
                break;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> fliqc_core::Result<ServerState> {
        let model = &self.scenario.core.model;
        let arr = |v: &Vector3<f64>| [v.x, v.y, v.z];
        let chain = ChainPoses::compute(model, &self.state)?;
        let mut link_segments = Vec::new();
        for link in 1..=model.links() {
            for (p0, p1) in chain.world_segments(model, link) {
                link_segments.push(WireSegment { link, p0: arr(&p0), p1: arr(&p1) });
            }
        }
        let ee = model.task_space.lift(&ee_position(model, &self.state)?);
        let goal = model.task_space.lift(&self.goal);
        let (contacts, solver_status, step_time_us) = match &self.last {
            Some(r) => (
                r.contacts
                    .iter()
                    .enumerate()
                    .map(|(i, c)| WireContact {
                        link: c.link_index,
                        obstacle_id: c.obstacle_id.clone(),
                        psi: c.psi,
                        epsilon: c.epsilon,
                        lambda: r.lambdas[i],
                        predicted: r.predicted_distances[i],
                        normal: arr(&c.normal),
                    })
                    .collect(),
                format!("{:?}", r.solver.status),
                r.wall_time.as_secs_f64() * 1e6,
            ),
            None => (Vec::new(), "Idle".to_string(), 0.0),
        };
        Ok(ServerState {
            tick: self.tick,
            t: self.state.t,
            q: self.state.q.iter().copied().collect(),
            ee: arr(&ee),
            goal: arr(&goal),
            link_segments,
            obstacles: self
                .obstacles
                .iter()
                .map(|o| WireObstacle { id: o.id.clone(), center: arr(&o.center), radius: o.radius })
                .collect(),
            contacts,
            solver_status,
            step_time_us,
            paused: self.paused,
            violation: self.violation,
        })
    }
}
