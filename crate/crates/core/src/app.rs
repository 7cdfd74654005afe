//! Orchestrator: the integrated explore-map-plan loop, run configuration,
//! artifact output (metrics/trajectory/events/grid snapshots with atomic
//! renames), and the entry points behind the CLI subcommands.

use crate::error::{Error, Result};
use crate::evidential::LossConfig;
use crate::global_planner::{
    build_connectivity, classify_regions, decompose_regions, plan_global_tour,
    snap_traversable, MapMasks, PlannerConfig, Region, RegionGraph, RegionLattice,
    RegionState,
};
use crate::local_planner::{
    escape_plan, interpolate_trajectory, plan_viewpoint_tour, segment_clear,
    select_local_goal, select_target_viewpoints, LocalGoal, LocalPlanConfig, Trajectory,
};
use crate::mapping::{MapState, MappingConfig};
use crate::metrics::{ause, completion_metrics, extract_surface_points, EvalReport};
use crate::tsp::{held_karp_open, open_path_tsp, path_cost};
use crate::world::{scene_apartment, scene_single_room, scene_two_rooms, CameraIntrinsics, Pose, Scene};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    FrontierOnly,
    RandomWalk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Scene: a JSON file path or one of the bundled names
    /// (single_room, two_rooms, apartment).
    pub scene: String,
    /// Simulated step budget for the episode.
    pub budget: usize,
    /// Steps between evaluation reports.
    pub eval_every: usize,
    /// Spacing of the ground-truth surface sample lattice (meters).
    pub gt_sample_spacing: f64,
    pub mode: Mode,
    pub rng_seed: u64,
    pub out_dir: String,
    pub camera: CameraIntrinsics,
    pub mapping: MappingConfig,
    pub loss: LossConfig,
    pub planner: PlannerConfig,
    pub local: LocalPlanConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: "single_room".into(),
            budget: 300,
            eval_every: 500,
            gt_sample_spacing: 0.05,
            mode: Mode::Full,
            rng_seed: 0,
            out_dir: "runs/out".into(),
            camera: CameraIntrinsics::default(),
            mapping: MappingConfig::default(),
            loss: LossConfig::default(),
            planner: PlannerConfig::default(),
            local: LocalPlanConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.eval_every == 0 {
            return Err(Error::Config("budget and eval_every must be >= 1".into()));
        }
        if self.gt_sample_spacing <= 0.0 {
            return Err(Error::Config("gt_sample_spacing must be positive".into()));
        }
        self.camera.validate()?;
        self.mapping.validate()?;
        self.local.validate()?;
        Ok(())
    }
}

pub fn resolve_scene(name: &str) -> Result<Scene> {
    match name {
        "single_room" => Ok(scene_single_room()),
        "two_rooms" => Ok(scene_two_rooms()),
        "apartment" => Ok(scene_apartment()),
        path => Scene::load(Path::new(path)),
    }
}

/// Write a file through a temp sibling + rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("dat")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Live state of one exploration episode.
pub struct EpisodeState {
    pub scene: Scene,
    pub map: MapState,
    pub pose: Pose,
    pub step: usize,
    pub graph: Option<RegionGraph>,
    pub global_tour: Vec<usize>,
    pub global_goal: Option<usize>,
    pub trajectory: Trajectory,
    pub cursor: usize,
    pub frontier_history: BTreeSet<usize>,
    /// Goal regions proven unreachable; skipped by subsequent tours.
    pub blacklisted: BTreeSet<usize>,
    pub events: Vec<String>,
    pub done: bool,
    /// Voxels the step-level bumper refused to enter; the planner treats
    /// them as blocked so an aborted trajectory is not replanned verbatim.
    pub bumped: BTreeSet<usize>,
    /// Last few goal regions, newest last. Goal selection deprioritizes them:
    /// two adjacent slow-to-resolve regions would otherwise trade the goal
    /// back and forth indefinitely while the rest of the tour starves.
    pub recent_goals: VecDeque<usize>,
    stall: usize,
}

fn yaw_sweep(pose: &Pose, cfg: &LocalPlanConfig) -> Result<Trajectory> {
    let f0 = pose.forward();
    let yaw0 = f0.y.atan2(f0.x);
    let mut seq = vec![*pose];
    for k in 1..=8 {
        let yaw = yaw0 + k as f64 / 8.0 * std::f64::consts::TAU;
        seq.push(Pose::looking(pose.position, Vector3::new(yaw.cos(), yaw.sin(), 0.0)));
    }
    interpolate_trajectory(&seq, cfg)
}

impl EpisodeState {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let scene = resolve_scene(&cfg.scene)?;
        let map = MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), cfg.mapping.clone())?;
        let pose = scene.spawn;
        // bootstrap: a full in-place yaw sweep observes the surroundings
        // before the first planning event
        let trajectory = yaw_sweep(&pose, &cfg.local)?;
        Ok(Self {
            scene,
            map,
            pose,
            step: 0,
            graph: None,
            global_tour: Vec::new(),
            global_goal: None,
            trajectory,
            cursor: 0,
            frontier_history: BTreeSet::new(),
            blacklisted: BTreeSet::new(),
            events: Vec::new(),
            done: false,
            bumped: BTreeSet::new(),
            recent_goals: VecDeque::new(),
            stall: 0,
        })
    }

    fn log(&mut self, msg: String) {
        self.events.push(format!("[{:>6}] {msg}", self.step));
    }

    fn lattice(&self, cfg: &RunConfig) -> RegionLattice {
        RegionLattice::new(&self.scene.bounds, cfg.planner.region_size)
    }

    fn current_region_id(&self, lattice: &RegionLattice, regions: &[Region]) -> Option<usize> {
        if let Some(c) = lattice.cell_of(self.pose.position) {
            let id = lattice.linear(c);
            if regions.iter().any(|r| r.id == id) {
                return Some(id);
            }
        }
        regions
            .iter()
            .min_by(|a, b| {
                let da = (a.rp - self.pose.position).norm();
                let db = (b.rp - self.pose.position).norm();
                da.partial_cmp(&db).unwrap()
            })
            .map(|r| r.id)
    }

    /// The local planning domain: the current region cell plus its 26
    /// lattice neighbors that host regions.
    fn domain(&self, lattice: &RegionLattice, regions: &[Region], current: usize) -> BTreeSet<usize> {
        let cur = regions.iter().find(|r| r.id == current).map(|r| r.cell);
        let mut out = BTreeSet::new();
        if let Some(cell) = cur {
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let c = [
                            cell[0] as i64 + dx,
                            cell[1] as i64 + dy,
                            cell[2] as i64 + dz,
                        ];
                        if c.iter()
                            .zip(&lattice.dims)
                            .all(|(&v, &d)| v >= 0 && (v as usize) < d)
                        {
                            let id =
                                lattice.linear([c[0] as usize, c[1] as usize, c[2] as usize]);
                            if regions.iter().any(|r| r.id == id) {
                                out.insert(id);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Record a bumper refusal so planning stops routing through the spot.
    pub fn note_bump(&mut self, p: Vector3<f64>) {
        if let Some(i) = self.map.tsdf.world_to_index(p) {
            self.bumped.insert(self.map.tsdf.linear(i));
        }
    }

    /// Step-level safety check against the map plus a proximity bumper.
    pub fn motion_blocked(&self, next: Vector3<f64>, r_robot: f64) -> bool {
        // observed-occupied voxels within the robot radius block motion
        let g = &self.map.tsdf;
        if let Some(i0) = g.world_to_index(next) {
            let r = (r_robot / g.resolution).ceil() as isize;
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        let mut j = [0usize; 3];
                        let mut ok = true;
                        for (a, d) in [dx, dy, dz].iter().enumerate() {
                            let c = i0[a] as isize + d;
                            if c < 0 || c as usize >= g.dims[a] {
                                ok = false;
                                break;
                            }
                            j[a] = c as usize;
                        }
                        if !ok {
                            continue;
                        }
                        let l = g.linear(j);
                        if self.map.weight.data[l] > 0.0
                            && g.data[l] <= 0.0
                            && (g.voxel_center(j) - next).norm() <= r_robot
                        {
                            return true;
                        }
                    }
                }
            }
        }
        // proximity bumper: refuse to enter space the simulator knows is
        // inside a wall (models a contact/ultrasound stop, keeps the agent
        // collision-free even when moving through never-observed space)
        self.scene.gt_sdf(next) < r_robot
    }

    /// One planning event: refresh region state, refresh the global tour if
    /// needed, build a new local trajectory.
    pub fn plan(&mut self, cfg: &RunConfig, rng: &mut ChaCha12Rng) -> Result<()> {
        let lattice = self.lattice(cfg);
        let mut masks = MapMasks::build(&self.map, &self.scene.bounds, &cfg.planner);
        for &l in &self.bumped {
            masks.blocked[l] = true;
        }
        let masks = masks;
        let mut regions = decompose_regions(&self.scene.bounds, &cfg.planner, &self.map, &masks);
        classify_regions(
            &mut regions,
            &self.map,
            &masks,
            &cfg.planner,
            &lattice,
            &mut self.frontier_history,
        );
        let current = match self.current_region_id(&lattice, &regions) {
            Some(c) => c,
            None => {
                self.log("no regions found; episode ends".into());
                self.done = true;
                return Ok(());
            }
        };
        let graph = build_connectivity(&regions, &self.map, &masks, &cfg.planner, &lattice);

        // termination: nothing left to explore
        let exploring = regions
            .iter()
            .filter(|r| r.state == RegionState::Exploring && !self.blacklisted.contains(&r.id))
            .count();
        let unexplored = regions
            .iter()
            .filter(|r| r.state == RegionState::Unexplored && !self.blacklisted.contains(&r.id))
            .count();
        if exploring == 0 && unexplored == 0 {
            self.log("all regions explored".into());
            self.done = true;
            self.graph = Some(graph);
            return Ok(());
        }

        // refresh the global tour when the goal is reached or stale
        let goal_still_valid = self.global_goal.map_or(false, |g| {
            g != current
                && graph
                    .region(g)
                    .map_or(false, |r| r.state == RegionState::Exploring)
                && !self.blacklisted.contains(&g)
        });
        if !goal_still_valid {
            let mut pruned = graph.clone();
            pruned.regions.retain(|r| !self.blacklisted.contains(&r.id));
            let tour = if pruned.region(current).is_some() {
                plan_global_tour(&pruned, current, &cfg.planner)?
            } else {
                Default::default()
            };
            for &u in &tour.unreachable {
                self.log(format!("region {u} unreachable from {current}; dropped"));
                self.blacklisted.insert(u);
            }
            self.global_tour = tour.order;
            // regions stacked above/below the agent flip in and out of
            // "current" as it changes z-layer; preferring a goal outside the
            // agent's own cell column keeps the tour from ping-ponging
            let d = lattice.dims;
            let column = |id: usize| (id % d[0], (id / d[0]) % d[1]);
            let cur_col = column(current);
            // also skip recently-targeted regions when possible (cooldown),
            // so the goal keeps advancing along the tour instead of trading
            // between the two nearest exploring regions
            let fresh = |g: usize| !self.recent_goals.contains(&g);
            self.global_goal = self
                .global_tour
                .iter()
                .copied()
                .find(|&g| g != current && column(g) != cur_col && fresh(g))
                .or_else(|| {
                    self.global_tour.iter().copied().find(|&g| g != current && fresh(g))
                })
                .or_else(|| {
                    self.global_tour
                        .iter()
                        .copied()
                        .find(|&g| g != current && column(g) != cur_col)
                })
                .or_else(|| self.global_tour.iter().copied().find(|&g| g != current))
                .or(self.global_tour.first().copied());
            if self.global_goal.is_none() {
                // no exploring region reachable: head for the nearest
                // unexplored region to open a new frontier
                self.global_goal = regions
                    .iter()
                    .filter(|r| {
                        r.state == RegionState::Unexplored
                            && !self.blacklisted.contains(&r.id)
                    })
                    .min_by(|a, b| {
                        let da = (a.rp - self.pose.position).norm();
                        let db = (b.rp - self.pose.position).norm();
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|r| r.id);
            }
            if let Some(g) = self.global_goal {
                if self.recent_goals.back() != Some(&g) {
                    self.recent_goals.push_back(g);
                    if self.recent_goals.len() > 4 {
                        self.recent_goals.pop_front();
                    }
                }
                self.log(format!(
                    "global tour {:?}, goal {g} (exploring {exploring}, unexplored {unexplored})",
                    self.global_tour
                ));
            }
        }
        let goal_id = match self.global_goal {
            Some(g) => g,
            None => {
                self.log("no reachable goal region; episode ends".into());
                self.done = true;
                self.graph = Some(graph);
                return Ok(());
            }
        };
        let goal_rp = graph
            .region(goal_id)
            .map(|r| r.rp)
            .unwrap_or_else(|| lattice.cell_center({
                let d = &lattice.dims;
                let x = goal_id % d[0];
                let r = goal_id / d[0];
                [x, r % d[1], r / d[1]]
            }));

        // RPs are free-space centroids and may sit inside the clearance
        // band; motion targets must be traversable voxel centers
        let goal_pos = snap_traversable(&self.map, &masks, goal_rp, 1.0)
            .map(|i| self.map.tsdf.voxel_center(i))
            .unwrap_or(goal_rp);

        let domain = self.domain(&lattice, &regions, current);

        // if observation has since closed the clearance band over our own
        // voxel, step out to the nearest traversable center before planning
        if let Some(i0) = self.map.tsdf.world_to_index(self.pose.position) {
            if !masks.traversable(i0) {
                if let Some(j) =
                    snap_traversable(&self.map, &masks, self.pose.position, 0.6)
                {
                    let c = self.map.tsdf.voxel_center(j);
                    if (c - self.pose.position).norm() > 1e-6 {
                        let nudge = interpolate_trajectory(
                            &[self.pose, Pose::looking(c, c - self.pose.position)],
                            &cfg.local,
                        )?;
                        self.log("stepping back into traversable space".into());
                        self.set_trajectory(nudge);
                        self.graph = Some(graph);
                        return Ok(());
                    }
                }
            }
        }

        if cfg.mode == Mode::RandomWalk {
            self.plan_random_walk(cfg, &masks, rng)?;
            self.graph = Some(graph);
            return Ok(());
        }

        // candidate pool per mode
        let threshold = cfg.planner.u_threshold;
        let pool: Vec<([usize; 3], f64)> = match cfg.mode {
            Mode::Full => {
                let s = cfg.planner.pool_stride.max(1);
                let mut v = self.map.high_uncertainty_voxels(threshold);
                if s > 1 {
                    v.retain(|(i, _)| i.iter().all(|&c| c % s == 0));
                }
                v
            }
            Mode::FrontierOnly => {
                // frontier voxels, unit weight each: scores become
                // frontier-voxel counts in view
                let mut v: Vec<([usize; 3], f64)> = regions
                    .iter()
                    .flat_map(|r| r.frontier_voxels.iter())
                    .map(|&l| (self.map.tsdf.unlinear(l), 1.0))
                    .collect();
                v.sort_by_key(|(i, _)| self.map.tsdf.linear(*i));
                v
            }
            Mode::RandomWalk => unreachable!(),
        };

        let vps = select_target_viewpoints(
            &self.map,
            &masks,
            &lattice,
            &domain,
            &pool,
            &cfg.local,
        )?;
        let goal_choice = select_local_goal(
            self.pose.position,
            goal_pos,
            &lattice,
            &domain,
            &vps,
        );
        match goal_choice {
            Some(choice) => {
                let (goal_pose, goal_vp) = match choice {
                    LocalGoal::Direct(p) => (p, None),
                    LocalGoal::Viewpoint(i) => (vps[i].pose, Some(i)),
                };
                let mids: Vec<_> = vps
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != goal_vp)
                    .map(|(_, v)| v.clone())
                    .collect();
                match plan_viewpoint_tour(
                    &self.map, &masks, &self.pose, &goal_pose, &mids, &cfg.local,
                ) {
                    Ok(tour) => {
                        if !tour.dropped.is_empty() {
                            self.log(format!(
                                "dropped {} unreachable viewpoints",
                                tour.dropped.len()
                            ));
                        }
                        match interpolate_trajectory(&tour.poses, &cfg.local) {
                            Ok(t) => {
                                self.log(format!(
                                    "local tour: {} viewpoints, {:.1}s",
                                    mids.len(),
                                    t.duration()
                                ));
                                self.set_trajectory(t);
                            }
                            Err(_) => self.fallback(cfg, &masks, &graph, goal_id)?,
                        }
                    }
                    Err(e) => {
                        self.log(format!("viewpoint tour failed ({e}); escaping"));
                        self.fallback(cfg, &masks, &graph, goal_id)?;
                    }
                }
            }
            None => {
                self.log("no informative viewpoints; escape".into());
                self.fallback(cfg, &masks, &graph, goal_id)?;
            }
        }
        self.graph = Some(graph);
        Ok(())
    }

    fn fallback(
        &mut self,
        cfg: &RunConfig,
        masks: &MapMasks,
        graph: &RegionGraph,
        goal_id: usize,
    ) -> Result<()> {
        match escape_plan(&self.map, masks, graph, &self.pose, goal_id, &cfg.local)? {
            Some(t) => {
                self.log(format!("escape toward region {goal_id}, {:.1}s", t.duration()));
                self.set_trajectory(t);
            }
            None => {
                self.log(format!("region {goal_id} unreachable; blacklisted"));
                self.blacklisted.insert(goal_id);
                self.global_goal = None;
                self.stall += 1;
                if self.stall > 16 {
                    self.log("stalled repeatedly; episode ends".into());
                    self.done = true;
                } else {
                    // gather more data in place, then replan
                    let sweep = yaw_sweep(&self.pose, &cfg.local)?;
                    self.set_trajectory(sweep);
                }
            }
        }
        Ok(())
    }

    fn plan_random_walk(
        &mut self,
        cfg: &RunConfig,
        masks: &MapMasks,
        rng: &mut ChaCha12Rng,
    ) -> Result<()> {
        let g = &self.map.tsdf;
        for _ in 0..200 {
            let i = [
                rng.gen_range(0..g.dims[0]),
                rng.gen_range(0..g.dims[1]),
                rng.gen_range(0..g.dims[2]),
            ];
            if !masks.traversable_known(i) {
                continue;
            }
            let p = g.voxel_center(i);
            let d = (p - self.pose.position).norm();
            if d < 0.5 || !segment_clear(&self.map, masks, self.pose.position, p) {
                continue;
            }
            let goal = Pose::looking(p, p - self.pose.position);
            let traj = interpolate_trajectory(&[self.pose, goal], &cfg.local)?;
            self.log(format!("random goal at {p:?}"));
            self.set_trajectory(traj);
            return Ok(());
        }
        self.log("random walk found no goal; sweeping in place".into());
        let sweep = yaw_sweep(&self.pose, &cfg.local)?;
        self.set_trajectory(sweep);
        Ok(())
    }

    fn set_trajectory(&mut self, t: Trajectory) {
        self.trajectory = t;
        self.cursor = 0;
        self.stall = 0;
    }
}

fn evaluate(
    map: &MapState,
    scene: &Scene,
    gt: &[Vector3<f64>],
    step: usize,
) -> Result<EvalReport> {
    let recon = extract_surface_points(&map.tsdf, &map.weight);
    let (completion_cm, completion_ratio_pct) = completion_metrics(gt, &recon, 0.05)?;
    // AUSE over gt surface points: true SDF there is 0, so the magnitude of
    // the fused TSDF is the prediction error
    let mut errors = Vec::new();
    let mut uncert = Vec::new();
    for p in gt {
        if map.tsdf.in_interior(*p) {
            errors.push(map.tsdf.trilinear_sample(*p)?.abs());
            uncert.push(map.query_epistemic(*p)?);
        }
    }
    let a = if errors.len() >= 2 { ause(&errors, &uncert)? } else { 0.0 };
    let _ = scene;
    Ok(EvalReport {
        step,
        completion_cm,
        completion_ratio_pct,
        ause: a,
        n_gt_points: gt.len(),
    })
}

fn metrics_csv(rows: &[EvalReport]) -> String {
    let mut s = String::from("step,completion_cm,completion_ratio_pct,ause,n_gt_points\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step, r.completion_cm, r.completion_ratio_pct, r.ause, r.n_gt_points
        );
    }
    s
}

/// Run a full episode and write all artifacts into cfg.out_dir.
pub fn run_episode(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let mut ep = EpisodeState::new(cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    let gt = ep.scene.gt_surface_samples(cfg.gt_sample_spacing);
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut traj_csv = String::from("t,px,py,pz,qw,qx,qy,qz\n");
    let mut sim_time = 0.0f64;
    let r_robot = cfg.planner.r_robot;

    while ep.step < cfg.budget && !ep.done {
        // advance along the active trajectory (replan when exhausted)
        if ep.cursor >= ep.trajectory.samples.len() {
            ep.plan(cfg, &mut rng)?;
            if ep.done {
                break;
            }
            continue;
        }
        let sample = ep.trajectory.samples[ep.cursor];
        if sample.pose.position != ep.pose.position
            && ep.motion_blocked(sample.pose.position, r_robot)
        {
            ep.log("motion blocked; aborting trajectory".into());
            ep.note_bump(sample.pose.position);
            ep.cursor = ep.trajectory.samples.len();
            continue;
        }
        ep.pose = sample.pose;
        ep.cursor += 1;
        sim_time += cfg.local.traj_dt;
        debug_assert!(
            ep.scene.gt_sdf(ep.pose.position) >= r_robot - 1e-9,
            "agent collided at {:?}",
            ep.pose.position
        );

        // observe + map
        let frame = ep.scene.render_depth(ep.pose, &cfg.camera)?;
        ep.map.fuse_depth(&frame);
        let have_depth = frame.depths.iter().any(|&d| d > 0.0);
        if have_depth {
            for _ in 0..cfg.mapping.grad_steps_per_frame {
                let batch = ep.map.sample_training_points(&frame, &mut rng)?;
                ep.map.uncertainty_step(&batch, &cfg.loss)?;
            }
        }
        ep.step += 1;

        let q = ep.pose.orientation.quaternion();
        let _ = writeln!(
            traj_csv,
            "{},{},{},{},{},{},{},{}",
            sim_time, ep.pose.position.x, ep.pose.position.y, ep.pose.position.z,
            q.w, q.i, q.j, q.k
        );

        if ep.step % cfg.eval_every == 0 {
            reports.push(evaluate(&ep.map, &ep.scene, &gt, ep.step)?);
        }
    }
    if reports.last().map_or(true, |r| r.step != ep.step) {
        reports.push(evaluate(&ep.map, &ep.scene, &gt, ep.step)?);
    }
    let status = if ep.done { "explored" } else { "budget" };
    ep.log(format!("episode finished ({status}) after {} steps", ep.step));

    // artifacts
    write_atomic(&out.join("metrics.csv"), metrics_csv(&reports).as_bytes())?;
    write_atomic(&out.join("trajectory.csv"), traj_csv.as_bytes())?;
    write_atomic(&out.join("events.log"), (ep.events.join("\n") + "\n").as_bytes())?;
    write_atomic(
        &out.join("config.json"),
        serde_json::to_string_pretty(cfg).expect("config serializes").as_bytes(),
    )?;
    write_atomic(&out.join("scene.json"), ep.scene.to_json().as_bytes())?;
    for (name, grid) in [
        ("tsdf.bin", &ep.map.tsdf),
        ("weight.bin", &ep.map.weight),
        ("v_rho.bin", &ep.map.v_rho),
        ("v_tau.bin", &ep.map.v_tau),
    ] {
        let mut buf = Vec::new();
        grid.write_binary(&mut buf)?;
        write_atomic(&out.join(name), &buf)?;
    }
    Ok(reports.last().expect("at least one report").clone())
}

/// Rebuild the map from a run directory's snapshots.
pub fn load_run_dir(dir: &Path) -> Result<(RunConfig, Scene, MapState)> {
    let cfg = RunConfig::load(&dir.join("config.json"))?;
    let scene = Scene::load(&dir.join("scene.json"))?;
    let read = |name: &str| -> Result<crate::grid::VoxelGrid> {
        let bytes = std::fs::read(dir.join(name))?;
        crate::grid::VoxelGrid::read_binary(&mut bytes.as_slice())
    };
    let mut map =
        MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), cfg.mapping.clone())?;
    map.tsdf = read("tsdf.bin")?;
    map.weight = read("weight.bin")?;
    map.v_rho = read("v_rho.bin")?;
    map.v_tau = read("v_tau.bin")?;
    if map.tsdf.dims != map.weight.dims
        || map.tsdf.dims != map.v_rho.dims
        || map.tsdf.dims != map.v_tau.dims
    {
        return Err(Error::Config("snapshot grids are misaligned".into()));
    }
    Ok((cfg, scene, map))
}

/// Recompute the final evaluation from a run directory's snapshots.
pub fn eval_run_dir(dir: &Path) -> Result<EvalReport> {
    let (cfg, scene, map) = load_run_dir(dir)?;
    let gt = scene.gt_surface_samples(cfg.gt_sample_spacing);
    evaluate(&map, &scene, &gt, 0)
}

fn ply(points: &[Vector3<f64>]) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

/// Export the reconstructed and ground-truth surface point sets as ASCII PLY.
pub fn export_pointcloud(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let (cfg, scene, map) = load_run_dir(dir)?;
    let recon = extract_surface_points(&map.tsdf, &map.weight);
    let gt = scene.gt_surface_samples(cfg.gt_sample_spacing);
    let recon_path = dir.join("recon.ply");
    let gt_path = dir.join("gt.ply");
    write_atomic(&recon_path, ply(&recon).as_bytes())?;
    write_atomic(&gt_path, ply(&gt).as_bytes())?;
    Ok((recon_path, gt_path))
}

#[derive(Debug, Clone, Serialize)]
pub struct TspBench {
    pub n: usize,
    pub trials: usize,
    pub mean_gap_pct: f64,
    pub max_gap_pct: f64,
    pub heuristic_wins: usize,
}

/// Heuristic-vs-oracle gap report on random Euclidean instances.
pub fn bench_tsp(n: usize, trials: usize, seed: u64) -> Result<TspBench> {
    if n < 2 || n > 16 {
        return Err(Error::Config("bench-tsp supports 2 <= n <= 16".into()));
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut wins = 0;
    for _ in 0..trials {
        let pts: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2))
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let order = open_path_tsp(&cost, 0)?;
        let heur = path_cost(&cost, &order);
        let opt = held_karp_open(&cost, 0)?;
        let gap = if opt > 0.0 { (heur - opt) / opt * 100.0 } else { 0.0 };
        sum += gap;
        max = max.max(gap);
        if gap <= 1e-9 {
            wins += 1;
        }
    }
    Ok(TspBench {
        n,
        trials,
        mean_gap_pct: sum / trials as f64,
        max_gap_pct: max,
        heuristic_wins: wins,
    })
}
