//! Ground truth, sensing, communication and the per-step agent cycle.
//!
//! One step of the simulation runs in fixed phases so that no agent sees
//! another agent's move before its own: the world advances, every agent
//! senses and updates its filter and search grid, agents in range exchange
//! grids and plan jointly, overlapping trackers are resolved, and finally
//! every agent moves. All randomness comes from labelled streams derived
//! from one seed, so adding an agent never perturbs the ground truth.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::{LifetimeLaw, ScenarioConfig, SearchPolicy, SpawnRegion, TargetScript};
use crate::error::Result;
use crate::metrics::searched_fraction;
use crate::overlap::OverlapLedger;
use crate::phd::{phd_estimate, phd_update, resample, Estimate, ParticlePhd};
use crate::planner::{build_graph, greedy_path, joint_plan, search_control, Plan, SearchGraph};
use crate::search::SearchGrid;
use crate::track::{best_evaluation, evaluate_track_controls};
use crate::world::{
    admissible_controls_within, in_sensing_range, measure, KinematicState, Measurement, MotionModel, Position, Rect,
    SensorModel,
};

const STREAM_WORLD: u64 = 1;
const STREAM_PLACEMENT: u64 = 2;
const STREAM_COORDINATION: u64 = 3;
const STREAM_AGENT_BASE: u64 = 1 << 16;
const STREAMS_PER_AGENT: u64 = 4;

/// Independent random stream `label` of the master `seed`.
pub fn rng_stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

fn agent_stream(seed: u64, agent: usize, slot: u64) -> ChaCha8Rng {
    rng_stream(seed, STREAM_AGENT_BASE + agent as u64 * STREAMS_PER_AGENT + slot)
}

/// A scripted ground-truth target.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub id: usize,
    pub state: KinematicState,
    pub birth: usize,
    /// First step at which the target no longer exists, once known.
    pub death: Option<usize>,
    scheduled_death: Option<usize>,
}

impl Target {
    pub fn alive_at(&self, k: usize) -> bool {
        self.birth <= k && self.death.is_none_or(|d| k < d)
    }
}

/// Ground truth at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: usize,
    pub area: Rect,
    pub targets: Vec<Target>,
}

impl WorldState {
    pub fn empty(area: Rect) -> Self {
        Self { time: 0, area, targets: Vec::new() }
    }

    /// Draws the whole target script (birth steps, initial states and
    /// scheduled lifetimes) at time 0.
    pub fn scripted<R: Rng + ?Sized>(area: Rect, script: &TargetScript, rng: &mut R) -> Self {
        let mut targets = Vec::with_capacity(script.count);
        for id in 0..script.count {
            let birth = rng.random_range(script.birth_first..=script.birth_last);
            let p = match script.spawn {
                SpawnRegion::Uniform => area.sample_uniform(rng),
                SpawnRegion::Center => area.center(),
            };
            let heading = rng.random::<f64>() * std::f64::consts::TAU;
            let state =
                KinematicState::target(p.x, script.speed * heading.cos(), p.y, script.speed * heading.sin());
            let lifetime = match script.lifetime {
                LifetimeLaw::Survival => None,
                LifetimeLaw::Fixed => Some(script.mean_lifetime.round().max(1.0) as usize),
                LifetimeLaw::Geometric => Some(sample_geometric(1.0 / script.mean_lifetime, rng)),
            };
            targets.push(Target { id, state, birth, death: None, scheduled_death: lifetime.map(|l| birth + l) });
        }
        Self { time: 0, area, targets }
    }

    pub fn alive(&self) -> impl Iterator<Item = &Target> {
        let k = self.time;
        self.targets.iter().filter(move |t| t.alive_at(k))
    }
}

/// Number of trials up to and including the first success (support 1, 2, ...).
fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> usize {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / (1.0 - p).ln()).floor() as usize + 1
}

/// Advances the ground truth by one step.
///
/// Targets alive at the previous step die at their scheduled step, or with
/// probability `1 - pS` under the survival law, and otherwise move with
/// process noise; a target that leaves the area dies. Targets whose birth
/// step is reached become alive with their scripted state.
pub fn step_world<R: Rng + ?Sized>(world: &mut WorldState, script: &TargetScript, motion: &MotionModel, rng: &mut R) {
    let prev = world.time;
    let k = prev + 1;
    world.time = k;
    for t in &mut world.targets {
        if !t.alive_at(prev) {
            continue;
        }
        if t.scheduled_death == Some(k) {
            t.death = Some(k);
            continue;
        }
        if script.lifetime == LifetimeLaw::Survival && !rng.random_bool(motion.survival()) {
            t.death = Some(k);
            continue;
        }
        t.state = KinematicState::from_array(motion.sample_next(&t.state.as_array(), rng), t.state.label);
        if !world.area.contains(&t.state.position()) {
            t.death = Some(k);
        }
    }
}

/// Noisy detections of the live targets inside the footprint at `s`.
pub fn detect_targets<R: Rng>(world: &WorldState, s: Position, sensor: &SensorModel, rng: &mut R) -> Vec<Measurement> {
    let mut z = Vec::new();
    for t in world.alive() {
        if in_sensing_range(t.state.position(), s, sensor.side) && rng.random_bool(sensor.pd_max) {
            z.push(measure(&t.state, s, sensor, Some(rng as &mut dyn RngCore)));
        }
    }
    z
}

/// Poisson number of false alarms, uniform in position over the footprint at `s`.
pub fn sample_clutter<R: Rng + ?Sized>(s: Position, sensor: &SensorModel, rng: &mut R) -> Vec<Measurement> {
    if sensor.clutter_rate <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(sensor.clutter_rate).expect("positive rate").sample(rng) as usize;
    let footprint = sensor.footprint(s);
    (0..count).map(|_| sensor.noiseless(footprint.sample_uniform(rng), s)).collect()
}

/// Target detections followed by clutter, both drawn from `rng`.
pub fn generate_measurements<R: Rng>(
    world: &WorldState,
    s: Position,
    sensor: &SensorModel,
    rng: &mut R,
) -> Vec<Measurement> {
    let mut z = detect_targets(world, s, sensor, rng);
    z.extend(sample_clutter(s, sensor, rng));
    z
}

/// All unordered pairs of positions within `range` of each other.
pub fn communication_pairs(positions: &[Position], range: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i].distance(&positions[j]) <= range {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Agents exchange search grids unless they are partners in a joint plan
/// they are still executing.
pub fn exchange_allowed(i: usize, cohort_i: &BTreeSet<usize>, j: usize, cohort_j: &BTreeSet<usize>) -> bool {
    !(cohort_i.contains(&j) && cohort_j.contains(&i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Searching,
    Tracking,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Searching => "searching",
            Mode::Tracking => "tracking",
        }
    }
}

#[derive(Debug, Clone)]
struct PlanState {
    plan: Plan,
    /// Unvisited cells when the plan was made, sorted.
    basis: Vec<usize>,
}

/// One mobile agent with its local filter, search grid and plan.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub position: Position,
    previous: Position,
    pub mode: Mode,
    /// Posterior after sensing, or the prediction for the next step after moving.
    pub phd: ParticlePhd,
    pub grid: SearchGrid,
    plan: Option<PlanState>,
    /// Other agents of the joint plan currently being executed.
    pub cohort: BTreeSet<usize>,
    pub estimate: Estimate,
    empty_steps: usize,
    release: usize,
    events: Vec<&'static str>,
    sense_rng: ChaCha8Rng,
    clutter_rng: ChaCha8Rng,
    filter_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
}

impl Agent {
    fn new(id: usize, position: Position, grid: SearchGrid, phd: ParticlePhd, seed: u64) -> Self {
        Self {
            id,
            position,
            previous: position,
            mode: Mode::Searching,
            phd,
            grid,
            plan: None,
            cohort: BTreeSet::new(),
            estimate: Estimate { count: 0, states: Vec::new() },
            empty_steps: 0,
            release: 0,
            events: Vec::new(),
            sense_rng: agent_stream(seed, id, 0),
            clutter_rng: agent_stream(seed, id, 1),
            filter_rng: agent_stream(seed, id, 2),
            policy_rng: agent_stream(seed, id, 3),
        }
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref().map(|p| &p.plan)
    }

    fn adopt_plan(&mut self, plan: Plan) {
        self.plan = Some(PlanState { basis: self.grid.unvisited(), plan });
    }

    fn drop_plan(&mut self) {
        self.plan = None;
        self.cohort.clear();
    }

    fn to_searching(&mut self, tag: &'static str) {
        self.mode = Mode::Searching;
        self.empty_steps = 0;
        self.drop_plan();
        self.events.push(tag);
    }
}

/// Per-step snapshot used for the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Searched fraction of the max-fused grids of all agents.
    pub searched: f64,
    /// Live targets as `(id, position)`.
    pub truth: Vec<(usize, Position)>,
    /// Union of the position estimates of all tracking agents.
    pub estimates: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub step: usize,
    pub agent_id: usize,
    pub mode: Mode,
    pub position: Position,
    pub n_hat: usize,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub step: usize,
    pub target_id: usize,
    pub position: Position,
    pub alive: bool,
}

/// Everything recorded during one trial.
#[derive(Debug, Clone, Default)]
pub struct TrialRecord {
    pub steps: Vec<StepRecord>,
    pub events: Vec<EventRow>,
    pub truth: Vec<TruthRow>,
}

/// A running simulation of one scenario and seed.
pub struct Simulation {
    config: ScenarioConfig,
    area: Rect,
    graph: SearchGraph,
    filter_motion: MotionModel,
    truth_motion: MotionModel,
    world: WorldState,
    agents: Vec<Agent>,
    ledger: OverlapLedger,
    world_rng: ChaCha8Rng,
    coord_rng: ChaCha8Rng,
    record: TrialRecord,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let area = config.area();
        let geometry = config.grid_geometry()?;
        let grid = SearchGrid::new(geometry, config.search.decay, config.search.threshold, config.search.initial_value)?;
        let filter_motion = config.motion.model()?;
        let truth_motion = MotionModel::constant_velocity(config.motion.dt, config.motion.survival, config.targets.noise_scale)?;

        let mut world_rng = rng_stream(seed, STREAM_WORLD);
        let world = WorldState::scripted(area, &config.targets, &mut world_rng);
        let mut placement = rng_stream(seed, STREAM_PLACEMENT);
        let agents = (0..config.agents)
            .map(|id| {
                let p = area.sample_uniform(&mut placement);
                Agent::new(id, p, grid.clone(), ParticlePhd::new(config.phd), seed)
            })
            .collect();

        Ok(Self {
            config: *config,
            area,
            graph: build_graph(&geometry, config.search.connectivity),
            filter_motion,
            truth_motion,
            world,
            agents,
            ledger: OverlapLedger::new(config.overlap.window, config.overlap.cutoff, config.overlap.threshold),
            world_rng,
            coord_rng: rng_stream(seed, STREAM_COORDINATION),
            record: TrialRecord::default(),
        })
    }

    /// Moves agent `i` to `p` (both its current and previous position), for scripted scenarios.
    pub fn place_agent(&mut self, i: usize, p: Position) {
        let agent = &mut self.agents[i];
        agent.position = p;
        agent.previous = p;
    }

    /// Puts agent `i` in tracking mode with the given intensity, for scripted scenarios.
    pub fn begin_tracking(&mut self, i: usize, phd: ParticlePhd) {
        let agent = &mut self.agents[i];
        agent.phd = phd;
        agent.mode = Mode::Tracking;
        agent.empty_steps = 0;
        agent.drop_plan();
    }

    /// Mutable access to the ground truth, for scripted scenarios.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    /// Max-fusion of every agent's search grid.
    pub fn fused_grid(&self) -> SearchGrid {
        let mut fused = self.agents[0].grid.clone();
        for a in &self.agents[1..] {
            fused.fuse_in_place(&a.grid).expect("all agents share the grid geometry");
        }
        fused
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn graph(&self) -> &SearchGraph {
        &self.graph
    }

    pub fn record(&self) -> &TrialRecord {
        &self.record
    }

    /// Runs the configured horizon and returns the record.
    pub fn run(mut self) -> Result<TrialRecord> {
        for _ in 0..self.config.horizon {
            self.step()?;
        }
        Ok(self.record)
    }

    /// Executes one full step.
    pub fn step(&mut self) -> Result<()> {
        step_world(&mut self.world, &self.config.targets, &self.truth_motion, &mut self.world_rng);
        for i in 0..self.agents.len() {
            self.sense(i)?;
        }
        self.coordinate()?;
        for i in 0..self.agents.len() {
            self.act(i)?;
        }
        self.log_step();
        Ok(())
    }

    fn sense(&mut self, i: usize) -> Result<()> {
        let cfg = &self.config;
        let sensor = &cfg.sensor;
        let agent = &mut self.agents[i];
        agent.events.clear();
        agent.grid.predict_in_place(agent.previous, sensor.side);
        agent.grid.update_in_place(agent.position, sensor.side);

        if !cfg.tracking.enabled {
            return Ok(());
        }
        let s = agent.position;
        if let Some(support) = sensor.footprint(s).intersection(&self.area) {
            agent.phd.add_births(&support, &mut agent.filter_rng);
        }
        let window = Rect::square(s, sensor.side + 2.0 * cfg.tracking.window_margin);
        if let Some(window) = window.intersection(&self.area) {
            agent.phd.retain_within(&window);
        } else {
            agent.phd.clear();
        }
        let mut z = detect_targets(&self.world, s, sensor, &mut agent.sense_rng);
        z.extend(sample_clutter(s, sensor, &mut agent.clutter_rng));
        let posterior = phd_update(&agent.phd, &z, s, sensor)?;
        agent.phd = resample(&posterior, cfg.phd.particles_per_target, &mut agent.filter_rng);
        // Only the footprint is observed; mass outside it is not evidence of a target.
        agent.estimate = phd_estimate(&agent.phd, Some(&sensor.footprint(s)));

        agent.release = agent.release.saturating_sub(1);
        let n_hat = agent.estimate.count;
        match agent.mode {
            Mode::Searching if n_hat >= 1 && agent.release == 0 => {
                agent.mode = Mode::Tracking;
                agent.empty_steps = 0;
                agent.drop_plan();
                agent.events.push("detect");
            }
            Mode::Tracking if n_hat == 0 => {
                agent.empty_steps += 1;
                if agent.empty_steps >= cfg.tracking.lost_steps {
                    agent.to_searching("lost");
                }
            }
            Mode::Tracking => agent.empty_steps = 0,
            Mode::Searching => {}
        }
        Ok(())
    }

    /// Overlap resolution, grid exchange and joint planning.
    fn coordinate(&mut self) -> Result<()> {
        let positions: Vec<Position> = self.agents.iter().map(|a| a.position).collect();
        let pairs = communication_pairs(&positions, self.config.comms.range);

        if self.config.tracking.enabled && self.config.overlap.enabled {
            let mut in_range = BTreeSet::new();
            for &(i, j) in &pairs {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                if a.mode != Mode::Tracking || b.mode != Mode::Tracking {
                    continue;
                }
                in_range.insert((i, j));
                let ei: Vec<Position> = a.estimate.states.iter().map(|x| x.position()).collect();
                let ej: Vec<Position> = b.estimate.states.iter().map(|x| x.position()).collect();
                self.ledger.overlap_step(i, j, &ei, &ej, a.position, b.position, self.config.sensor.side);
                if let Some(who) = self.ledger.decide_switch(i, j, &mut self.coord_rng) {
                    let agent = &mut self.agents[who];
                    agent.release = self.config.tracking.release_steps;
                    agent.to_searching("release");
                }
            }
            for i in 0..self.agents.len() {
                for j in (i + 1)..self.agents.len() {
                    if !in_range.contains(&(i, j)) {
                        self.ledger.reset(i, j);
                    }
                }
            }
        }

        // The random baseline neither communicates nor cooperates.
        if self.config.search.policy == SearchPolicy::Random {
            return Ok(());
        }

        // Connected components over the pairs that are allowed to exchange.
        let n = self.agents.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j) in &pairs {
            if exchange_allowed(i, &self.agents[i].cohort, j, &self.agents[j].cohort) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut components: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = find(&mut parent, i);
            components[r].push(i);
        }
        for members in components.into_iter().filter(|m| m.len() >= 2) {
            let mut fused = self.agents[members[0]].grid.clone();
            for &m in &members[1..] {
                fused.fuse_in_place(&self.agents[m].grid)?;
            }
            for &m in &members {
                self.agents[m].grid = fused.clone();
                self.agents[m].events.push("exchange");
            }
            let searchers: Vec<usize> =
                members.iter().copied().filter(|&m| self.agents[m].mode == Mode::Searching).collect();
            if searchers.is_empty() {
                continue;
            }
            let geometry = *fused.geometry();
            let starts: Vec<usize> = searchers.iter().map(|&m| geometry.cell_of(self.agents[m].position)).collect();
            let plans = joint_plan(&self.graph, &fused.unvisited(), &starts)?;
            for (&m, mut plan) in searchers.iter().zip(plans) {
                plan.owner = m;
                let agent = &mut self.agents[m];
                agent.adopt_plan(plan);
                agent.cohort = searchers.iter().copied().filter(|&o| o != m).collect();
                agent.events.push("joint_plan");
            }
        }
        Ok(())
    }

    fn act(&mut self, i: usize) -> Result<()> {
        let cfg = self.config;
        let controls = admissible_controls_within(self.agents[i].position, &cfg.control, &self.area);
        let choice = match self.agents[i].mode {
            Mode::Tracking => self.tracking_control(i, &controls)?,
            Mode::Searching => {
                if cfg.tracking.enabled {
                    let agent = &mut self.agents[i];
                    agent.phd.propagate_survivors(&self.filter_motion, &mut agent.filter_rng);
                }
                match cfg.search.policy {
                    SearchPolicy::Planned => self.planned_control(i, &controls),
                    SearchPolicy::Random => self.random_control(i, &controls),
                }
            }
        };
        let agent = &mut self.agents[i];
        agent.previous = agent.position;
        agent.position = controls[choice];
        Ok(())
    }

    fn tracking_control(&mut self, i: usize, controls: &[Position]) -> Result<usize> {
        let cfg = &self.config;
        let agent = &mut self.agents[i];
        agent.phd.propagate_survivors(&self.filter_motion, &mut agent.filter_rng);
        let predicted = phd_estimate(&agent.phd, None);
        let evals = evaluate_track_controls(&agent.phd, &predicted.states, controls, &cfg.sensor, cfg.tracking.alpha)?;
        Ok(best_evaluation(&evals).unwrap_or(0))
    }

    /// Next cell to head for while searching: the first unvisited cell of the
    /// current plan, replanning greedily when the plan is spent or stale.
    fn next_waypoint(&mut self, i: usize) -> usize {
        let replan_fraction = self.config.search.replan_fraction;
        let agent = &mut self.agents[i];
        let unvisited = agent.grid.unvisited();

        let stale = match &agent.plan {
            None => true,
            Some(ps) => {
                let assigned: BTreeSet<usize> = ps.plan.assigned.iter().copied().collect();
                let now: BTreeSet<usize> = unvisited.iter().copied().collect();
                let before: BTreeSet<usize> = ps.basis.iter().copied().collect();
                // Changes the agent did not cause by following its own plan.
                let external = before.difference(&now).filter(|c| !assigned.contains(c)).count()
                    + now.difference(&before).count();
                let exhausted = ps.plan.assigned.iter().all(|c| !agent.grid.is_unvisited(*c));
                exhausted || external as f64 > replan_fraction * before.len().max(1) as f64
            }
        };
        if stale {
            agent.cohort.clear();
            let start = agent.grid.geometry().cell_of(agent.position);
            if unvisited.is_empty() {
                agent.plan = None;
            } else {
                let mut plan = greedy_path(&self.graph, &unvisited, start).expect("valid start cell");
                plan.owner = agent.id;
                agent.adopt_plan(plan);
                agent.events.push("replan");
            }
        }
        match &agent.plan {
            Some(ps) => ps
                .plan
                .assigned
                .iter()
                .copied()
                .find(|&c| agent.grid.is_unvisited(c))
                .unwrap_or_else(|| patrol_cell(&agent.grid, agent.position)),
            None => patrol_cell(&agent.grid, agent.position),
        }
    }

    fn planned_control(&mut self, i: usize, controls: &[Position]) -> usize {
        let cell = self.next_waypoint(i);
        search_control(controls, self.graph.center(cell))
    }

    /// Uniform choice among the moves that approach the nearest unvisited cell.
    fn random_control(&mut self, i: usize, controls: &[Position]) -> usize {
        let agent = &mut self.agents[i];
        let geometry = *agent.grid.geometry();
        let target = agent
            .grid
            .unvisited()
            .into_iter()
            .map(|c| geometry.center(c))
            .min_by(|a, b| a.distance(&agent.position).total_cmp(&b.distance(&agent.position)))
            .unwrap_or_else(|| geometry.center(patrol_cell(&agent.grid, agent.position)));
        let d0 = agent.position.distance(&target);
        let closer: Vec<usize> = (0..controls.len()).filter(|&k| controls[k].distance(&target) < d0 - 1e-9).collect();
        if closer.is_empty() {
            agent.policy_rng.random_range(0..controls.len())
        } else {
            closer[agent.policy_rng.random_range(0..closer.len())]
        }
    }

    fn log_step(&mut self) {
        let k = self.world.time;
        let fused = self.fused_grid();
        let searched = searched_fraction(&fused, self.config.metrics.searched_threshold);
        let truth: Vec<(usize, Position)> = self.world.alive().map(|t| (t.id, t.state.position())).collect();
        let estimates: Vec<Position> = self
            .agents
            .iter()
            .filter(|a| a.mode == Mode::Tracking)
            .flat_map(|a| a.estimate.states.iter().map(|x| x.position()))
            .collect();
        self.record.steps.push(StepRecord { step: k, searched, truth, estimates });

        for a in &mut self.agents {
            let tag = if a.events.is_empty() { "none".to_string() } else { a.events.join(";") };
            self.record.events.push(EventRow {
                step: k,
                agent_id: a.id,
                mode: a.mode,
                position: a.position,
                n_hat: a.estimate.count,
                tag,
            });
        }
        for t in &self.world.targets {
            if t.birth <= k && t.death.is_none_or(|d| k <= d) {
                self.record.truth.push(TruthRow {
                    step: k,
                    target_id: t.id,
                    position: t.state.position(),
                    alive: t.alive_at(k),
                });
            }
        }
    }
}

/// Least recently searched cell, nearest first, then lowest id.
fn patrol_cell(grid: &SearchGrid, s: Position) -> usize {
    let g = grid.geometry();
    (0..grid.len())
        .min_by(|&a, &b| {
            grid.value(a)
                .total_cmp(&grid.value(b))
                .then(g.center(a).distance(&s).total_cmp(&g.center(b).distance(&s)))
        })
        .expect("grids are nonempty")
}

/// Runs one trial of `config` with `seed`.
pub fn simulate(config: &ScenarioConfig, seed: u64) -> Result<TrialRecord> {
    Simulation::new(config, seed)?.run()
}

/// Writes `step, agent_id, mode, x, y, n_hat, event_tag` rows.
pub fn write_events_csv<W: Write>(rows: &[EventRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "agent_id", "mode", "x", "y", "n_hat", "event_tag"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.agent_id.to_string(),
            r.mode.as_str().to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.n_hat.to_string(),
            r.tag.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `step, target_id, x, y, alive` rows.
pub fn write_truth_csv<W: Write>(rows: &[TruthRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "target_id", "x", "y", "alive"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.target_id.to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.alive.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
