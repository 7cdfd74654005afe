//! Informative 6-DoF viewpoint extraction: visibility-constrained
//! uncertainty accumulation over a position/orientation lattice, greedy
//! submodular selection with lazy re-scoring, the dummy-node viewpoint TSP,
//! trajectory interpolation, and the escape fallback over the region graph.

use crate::astar::{astar_grid, dijkstra, extract_path};
use crate::error::{Error, Result};
use crate::global_planner::{MapMasks, RegionGraph, RegionLattice, snap_traversable};
use crate::mapping::MapState;
use crate::tsp::{cycle_tsp, cycle_tsp_exact};
use crate::world::{CameraIntrinsics, Pose};
use nalgebra::Vector3;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalPlanConfig {
    pub pos_step_xy: f64,
    pub pos_step_z: f64,
    pub orientations_per_pos: usize,
    pub top_k: usize,
    /// Accumulated-uncertainty acceptance threshold.
    pub eta: f64,
    pub max_viewpoints: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Conic FoV half-angle (radians); mean of the camera's H/V FoV halved.
    pub cone_half_angle: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub traj_dt: f64,
}

impl Default for LocalPlanConfig {
    fn default() -> Self {
        Self {
            pos_step_xy: 0.2,
            pos_step_z: 1.0,
            orientations_per_pos: 30,
            top_k: 100,
            eta: 10.0,
            max_viewpoints: 8,
            d_min: 0.5,
            d_max: 5.0,
            cone_half_angle: CameraIntrinsics::default().mean_fov() / 2.0,
            v_max: 1.0,
            omega_max: 1.57,
            traj_dt: 0.1,
        }
    }
}

impl LocalPlanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(Error::Config("need 0 < d_min < d_max".into()));
        }
        if self.orientations_per_pos == 0
            || self.top_k == 0
            || self.max_viewpoints == 0
            || self.pos_step_xy <= 0.0
            || self.pos_step_z <= 0.0
            || self.v_max <= 0.0
            || self.omega_max <= 0.0
            || self.traj_dt <= 0.0
            || self.cone_half_angle <= 0.0
        {
            return Err(Error::Config("local planner parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Viewpoint {
    pub pose: Pose,
    /// Accumulated rectified epistemic uncertainty of `covered`.
    pub score: f64,
    /// Linear voxel ids this viewpoint covers.
    pub covered: Vec<usize>,
}

/// Golden-spiral sphere lattice with poles included, so n = 2 yields the two
/// z-extremes.
pub fn fibonacci_directions(n: usize) -> Result<Vec<Vector3<f64>>> {
    if n == 0 {
        return Err(Error::Domain("need at least one direction".into()));
    }
    if n == 1 {
        return Ok(vec![Vector3::new(0.0, 0.0, 1.0)]);
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        out.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
    }
    Ok(out)
}

/// Sphere-march the fused TSDF from `from` toward `to`; unknown (high
/// uncertainty) space is transparent, observed non-positive TSDF blocks.
pub fn line_of_sight(
    map: &MapState,
    masks: &MapMasks,
    from: Vector3<f64>,
    to: Vector3<f64>,
) -> bool {
    let res = map.cfg.voxel_res;
    let delta = to - from;
    let dist = delta.norm();
    if dist < res {
        return true;
    }
    let dir = delta / dist;
    let mut t = 0.5 * res;
    // stop just short of the destination voxel so the target itself (often
    // a surface or unknown voxel) never occludes
    let t_end = dist - 0.75 * res;
    while t < t_end {
        let p = from + dir * t;
        match map.tsdf.world_to_index(p) {
            None => {
                t += res;
            }
            Some(i) => {
                let l = masks.linear(i);
                if masks.unknown[l] {
                    t += res;
                } else {
                    let s = map.tsdf.data[l];
                    if s <= 0.0 {
                        return false;
                    }
                    t += s.max(0.5 * res);
                }
            }
        }
    }
    true
}

/// Score one candidate pose against the sorted high-uncertainty pool.
/// Accepts up to top_k voxels passing distance, cone, and (optionally)
/// line-of-sight tests; entries listed in `skip` are filtered out.
pub fn accumulate_view_uncertainty(
    map: &MapState,
    masks: &MapMasks,
    pose: &Pose,
    uncertain: &[([usize; 3], f64)],
    cfg: &LocalPlanConfig,
    skip: Option<&[bool]>,
    check_los: bool,
) -> (f64, Vec<usize>) {
    let forward = pose.forward();
    let cos_cone = cfg.cone_half_angle.cos();
    let mut score = 0.0;
    let mut covered = Vec::new();
    for (idx, u) in uncertain {
        if covered.len() >= cfg.top_k {
            break;
        }
        let l = masks.linear(*idx);
        if skip.map_or(false, |s| s[l]) {
            continue;
        }
        let c = map.tsdf.voxel_center(*idx);
        let d = c - pose.position;
        let dist = d.norm();
        if dist < cfg.d_min || dist > cfg.d_max {
            continue;
        }
        if d.dot(&forward) < cos_cone * dist {
            continue;
        }
        if check_los && !line_of_sight(map, masks, pose.position, c) {
            continue;
        }
        score += u;
        covered.push(l);
    }
    (score, covered)
}

/// Max-coverage greedy on explicit covered sets: accept the argmax while its
/// marginal value exceeds `eta`, filtering covered elements between picks.
/// Shared semantics with `select_target_viewpoints`; also serves as the
/// enumerable fixture for the (1 - 1/e) approximation bound.
pub fn greedy_coverage(
    covers: &[Vec<usize>],
    weights: &[f64],
    budget: usize,
    eta: f64,
) -> Vec<usize> {
    let mut taken = vec![false; covers.len()];
    let mut used = vec![false; weights.len()];
    let mut picks = Vec::new();
    while picks.len() < budget {
        let mut best = usize::MAX;
        let mut best_v = eta;
        for (i, cov) in covers.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let v: f64 = cov.iter().filter(|&&e| !used[e]).map(|&e| weights[e]).sum();
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        taken[best] = true;
        for &e in &covers[best] {
            used[e] = true;
        }
        picks.push(best);
    }
    picks
}

/// Candidate positions: the (pos_step_xy, pos_step_xy, pos_step_z) lattice
/// inside the domain cells, kept where the robot has observed free space
/// with clearance. Falls back to optimistic traversability when the map is
/// too young to certify anything.
fn candidate_positions(
    map: &MapState,
    masks: &MapMasks,
    lattice: &RegionLattice,
    domain: &BTreeSet<usize>,
    cfg: &LocalPlanConfig,
) -> Vec<Vector3<f64>> {
    let mut strict = Vec::new();
    let mut loose = Vec::new();
    for &cell_id in domain {
        let cell = {
            let d = &lattice.dims;
            let x = cell_id % d[0];
            let r = cell_id / d[0];
            [x, r % d[1], r / d[1]]
        };
        let bb = lattice.cell_aabb(cell);
        let nx = ((bb.max[0] - bb.min[0]) / cfg.pos_step_xy).round().max(1.0) as usize;
        let ny = ((bb.max[1] - bb.min[1]) / cfg.pos_step_xy).round().max(1.0) as usize;
        let nz = ((bb.max[2] - bb.min[2]) / cfg.pos_step_z).round().max(1.0) as usize;
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let p = Vector3::new(
                        bb.min[0] + (ix as f64 + 0.5) * cfg.pos_step_xy,
                        bb.min[1] + (iy as f64 + 0.5) * cfg.pos_step_xy,
                        bb.min[2] + (iz as f64 + 0.5) * cfg.pos_step_z,
                    );
                    if let Some(i) = map.tsdf.world_to_index(p) {
                        if masks.traversable_known(i) {
                            strict.push(p);
                        } else if masks.traversable(i) {
                            loose.push(p);
                        }
                    }
                }
            }
        }
    }
    if strict.is_empty() {
        loose
    } else {
        strict
    }
}

/// Greedy informative-viewpoint selection over the local domain. `uncertain`
/// is the sorted high-uncertainty voxel list (descending); entries of the
/// pool may carry arbitrary nonnegative values (the frontier-count baseline
/// reuses this with unit weights).
pub fn select_target_viewpoints(
    map: &MapState,
    masks: &MapMasks,
    lattice: &RegionLattice,
    domain: &BTreeSet<usize>,
    uncertain: &[([usize; 3], f64)],
    cfg: &LocalPlanConfig,
) -> Result<Vec<Viewpoint>> {
    cfg.validate()?;
    if uncertain.is_empty() || domain.is_empty() {
        return Ok(Vec::new());
    }
    let positions = candidate_positions(map, masks, lattice, domain, cfg);
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    // restrict the pool to voxels any candidate could possibly see
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in &positions {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pool: Vec<([usize; 3], f64)> = uncertain
        .iter()
        .filter(|(idx, _)| {
            let c = map.tsdf.voxel_center(*idx);
            (0..3).all(|a| c[a] >= lo[a] - cfg.d_max && c[a] <= hi[a] + cfg.d_max)
        })
        .cloned()
        .collect();
    if pool.is_empty() {
        return Ok(Vec::new());
    }

    let dirs = fibonacci_directions(cfg.orientations_per_pos)?;
    struct Cand {
        pose: Pose,
        pos_id: usize,
        /// Cached score: an upper bound unless stage == 2 at the current
        /// generation. Stage 0: position-level annulus bound (shared by all
        /// orientations); stage 1: cone bound without line-of-sight; stage
        /// 2: exact score.
        cached: f64,
        stage: u8,
        gen: u64,
        alive: bool,
    }
    // coarse aggregation of the pool: bound stages work on ~1 m buckets
    // (mass + bounding sphere) instead of raw voxels, so refining a
    // candidate costs microseconds rather than a full pool scan
    struct Bucket {
        c: Vector3<f64>,
        r: f64,
        mass: f64,
    }
    let buckets: Vec<Bucket> = {
        let b = 1.0f64;
        let mut acc: BTreeMap<[i64; 3], (Vector3<f64>, Vector3<f64>, f64)> = BTreeMap::new();
        for (idx, u) in &pool {
            let c = map.tsdf.voxel_center(*idx);
            let key = [
                (c.x / b).floor() as i64,
                (c.y / b).floor() as i64,
                (c.z / b).floor() as i64,
            ];
            let e = acc.entry(key).or_insert((c, c, 0.0));
            for a in 0..3 {
                e.0[a] = e.0[a].min(c[a]);
                e.1[a] = e.1[a].max(c[a]);
            }
            e.2 += u;
        }
        acc.into_values()
            .map(|(lo, hi, mass)| Bucket {
                c: (lo + hi) * 0.5,
                r: (hi - lo).norm() * 0.5 + 1e-9,
                mass,
            })
            .collect()
    };
    // annulus bound: mass of every bucket whose sphere meets [d_min, d_max]
    let annulus_bound = |p: &Vector3<f64>| -> f64 {
        buckets
            .iter()
            .filter(|bk| {
                let d = (bk.c - p).norm();
                d - bk.r <= cfg.d_max && d + bk.r >= cfg.d_min
            })
            .map(|bk| bk.mass)
            .sum()
    };
    // cone bound: additionally require angular overlap with the view cone
    let cone_bound = |pose: &Pose| -> f64 {
        let forward = pose.forward();
        buckets
            .iter()
            .filter(|bk| {
                let d = bk.c - pose.position;
                let dist = d.norm();
                if dist - bk.r > cfg.d_max || dist + bk.r < cfg.d_min {
                    return false;
                }
                if dist <= bk.r {
                    return true;
                }
                let ang = (d.dot(&forward) / dist).clamp(-1.0, 1.0).acos();
                let margin = (bk.r / dist).min(1.0).asin();
                ang <= cfg.cone_half_angle + margin
            })
            .map(|bk| bk.mass)
            .sum()
    };
    // no score can exceed the mass of the top_k most uncertain pool voxels,
    // so cap every bound there; without the cap the bucket bounds (which sum
    // unbounded mass) never prune anything
    let s_topk: f64 = pool.iter().take(cfg.top_k).map(|(_, u)| u).sum();
    let pos_bounds: Vec<f64> =
        positions.iter().map(|p| annulus_bound(p).min(s_topk)).collect();
    // per-position pool subset (annulus only), built on first use; keeps the
    // exact scoring pass off the full pool
    let mut pos_pool: Vec<Option<Vec<([usize; 3], f64)>>> = vec![None; positions.len()];
    let mut cands: Vec<Cand> = Vec::with_capacity(positions.len() * dirs.len());
    for (pi, p) in positions.iter().enumerate() {
        for d in &dirs {
            let pose = Pose::looking(*p, *d);
            let bound = pos_bounds[pi];
            cands.push(Cand {
                pose,
                pos_id: pi,
                cached: bound,
                stage: 0,
                gen: 0,
                alive: bound > cfg.eta,
            });
        }
    }

    let mut covered = vec![false; map.tsdf.len()];
    let mut gen: u64 = 1; // generation counter; bumps on every acceptance
    let mut out: Vec<Viewpoint> = Vec::new();
    while out.len() < cfg.max_viewpoints {
        // ceiling for the current pick: top_k uncovered pool voxels; any
        // candidate reaching it is an argmax and is accepted on the spot
        let cap = {
            let mut s = 0.0;
            let mut k = 0;
            for (idx, u) in &pool {
                if covered[map.tsdf.linear(*idx)] {
                    continue;
                }
                s += u;
                k += 1;
                if k >= cfg.top_k {
                    break;
                }
            }
            s
        };
        // lazy argmax: refine the current best through the bound hierarchy
        // until its exact score is fresh
        let best = loop {
            let mut best = usize::MAX;
            let mut best_v = cfg.eta;
            for (i, c) in cands.iter().enumerate() {
                if c.alive && c.cached > best_v {
                    best_v = c.cached;
                    best = i;
                }
            }
            if best == usize::MAX {
                break None;
            }
            if cands[best].stage == 2 && cands[best].gen == gen {
                break Some(best);
            }
            let score = if cands[best].stage == 0 {
                cands[best].stage = 1;
                cone_bound(&cands[best].pose).min(s_topk)
            } else {
                let pi = cands[best].pos_id;
                if pos_pool[pi].is_none() {
                    let p = positions[pi];
                    pos_pool[pi] = Some(
                        pool.iter()
                            .filter(|(idx, _)| {
                                let d = (map.tsdf.voxel_center(*idx) - p).norm();
                                d >= cfg.d_min && d <= cfg.d_max
                            })
                            .cloned()
                            .collect(),
                    );
                }
                let subset = pos_pool[pi].as_ref().unwrap();
                let (s, _) = accumulate_view_uncertainty(
                    map, masks, &cands[best].pose, subset, cfg, Some(&covered), true,
                );
                cands[best].stage = 2;
                cands[best].gen = gen;
                if s >= cap - 1e-9 {
                    cands[best].cached = s;
                    break Some(best);
                }
                s
            };
            cands[best].cached = cands[best].cached.min(score);
            if cands[best].cached <= cfg.eta {
                cands[best].alive = false;
            }
        };
        let best = match best {
            Some(b) => b,
            None => break,
        };
        let subset = pos_pool[cands[best].pos_id].as_ref().expect("scored above");
        let (score, cov) = accumulate_view_uncertainty(
            map, masks, &cands[best].pose, subset, cfg, Some(&covered), true,
        );
        let pos_id = cands[best].pos_id;
        cands[best].alive = false;
        for &l in &cov {
            covered[l] = true;
        }
        out.push(Viewpoint { pose: cands[best].pose, score, covered: cov });
        gen += 1;
        // re-examine the remaining rotations at the accepted position
        let mut rot_ids: Vec<usize> = (0..cands.len())
            .filter(|&i| cands[i].alive && cands[i].pos_id == pos_id)
            .collect();
        rot_ids.sort_by(|&a, &b| cands[b].cached.partial_cmp(&cands[a].cached).unwrap());
        for i in rot_ids {
            if out.len() >= cfg.max_viewpoints {
                break;
            }
            let (s, cov) = accumulate_view_uncertainty(
                map, masks, &cands[i].pose, subset, cfg, Some(&covered), true,
            );
            cands[i].alive = false;
            if s > cfg.eta {
                for &l in &cov {
                    covered[l] = true;
                }
                out.push(Viewpoint { pose: cands[i].pose, score: s, covered: cov });
                gen += 1;
            }
        }
    }
    Ok(out)
}

/// Local goal choice per the hierarchical rule.
#[derive(Debug, Clone)]
pub enum LocalGoal {
    /// The global goal lies inside the domain; head straight for it.
    Direct(Pose),
    /// Index into the viewpoint list.
    Viewpoint(usize),
}

pub fn select_local_goal(
    current: Vector3<f64>,
    global_goal: Vector3<f64>,
    lattice: &RegionLattice,
    domain: &BTreeSet<usize>,
    viewpoints: &[Viewpoint],
) -> Option<LocalGoal> {
    if let Some(cell) = lattice.cell_of(global_goal) {
        if domain.contains(&lattice.linear(cell)) {
            let dir = global_goal - current;
            let forward = if dir.norm() > 1e-9 { dir } else { Vector3::x() };
            return Some(LocalGoal::Direct(Pose::looking(global_goal, forward)));
        }
    }
    // most informative viewpoint from the region closest to the goal;
    // ties on distance break by higher score, then lower id
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, vp) in viewpoints.iter().enumerate() {
        let cell = lattice.cell_of(vp.pose.position)?;
        let d = (lattice.cell_center(cell) - global_goal).norm();
        let better = match best {
            None => true,
            Some((bd, bs, _)) => {
                d < bd - 1e-9 || ((d - bd).abs() <= 1e-9 && vp.score > bs + 1e-12)
            }
        };
        if better {
            best = Some((d, vp.score, i));
        }
    }
    best.map(|(_, _, i)| LocalGoal::Viewpoint(i))
}

/// Traversal time between poses: simultaneous translate + rotate.
pub fn traversal_time(a: &Pose, b: &Pose, cfg: &LocalPlanConfig) -> f64 {
    let d = (b.position - a.position).norm();
    let ang = a.orientation.angle_to(&b.orientation);
    (d / cfg.v_max).max(ang / cfg.omega_max)
}

/// Straight-segment clearance against the traversability mask.
pub fn segment_clear(
    map: &MapState,
    masks: &MapMasks,
    a: Vector3<f64>,
    b: Vector3<f64>,
) -> bool {
    let res = map.cfg.voxel_res;
    let delta = b - a;
    let dist = delta.norm();
    let n = (dist / (0.5 * res)).ceil().max(1.0) as usize;
    for s in 0..=n {
        let p = a + delta * (s as f64 / n as f64);
        match map.tsdf.world_to_index(p) {
            Some(i) if masks.traversable(i) => {}
            _ => return false,
        }
    }
    true
}

/// Greedy line-of-sight shortcutting ("string pulling") over a waypoint
/// chain: from each anchor, jump to the farthest point still reachable by a
/// clear straight segment. Collapses Manhattan A* staircases into a few long
/// legs, which matters because every leg pays the full reorientation time.
fn shortcut_path(
    map: &MapState,
    masks: &MapMasks,
    pts: &[Vector3<f64>],
) -> Vec<Vector3<f64>> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut out = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !segment_clear(map, masks, pts[i], pts[j]) {
            j -= 1;
        }
        out.push(pts[j]);
        i = j;
    }
    out
}

/// Connected-component labels of the traversable mask (6-connectivity);
/// lets the tour builder skip A* between provably disconnected nodes.
fn traversable_components(masks: &MapMasks) -> Vec<u32> {
    let dims = masks.dims;
    let total = dims[0] * dims[1] * dims[2];
    let mut comp = vec![0u32; total];
    let mut next = 1u32;
    let mut queue = VecDeque::new();
    for seed in 0..total {
        let sx = seed % dims[0];
        let r = seed / dims[0];
        let si = [sx, r % dims[1], r / dims[1]];
        if comp[seed] != 0 || !masks.traversable(si) {
            continue;
        }
        comp[seed] = next;
        queue.push_back(si);
        while let Some(i) = queue.pop_front() {
            for a in 0..3 {
                for d in [-1isize, 1] {
                    let v = i[a] as isize + d;
                    if v < 0 || v as usize >= dims[a] {
                        continue;
                    }
                    let mut j = i;
                    j[a] = v as usize;
                    let lj = masks.linear(j);
                    if comp[lj] == 0 && masks.traversable(j) {
                        comp[lj] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        next += 1;
    }
    comp
}

/// Tour over [start, viewpoints..., goal]; `order` indexes that node list.
#[derive(Debug, Clone)]
pub struct ViewpointTour {
    /// Node order: always begins with 0 (start) and ends with 1 (goal).
    pub order: Vec<usize>,
    /// Pose sequence after expanding multi-hop legs through the graph.
    pub poses: Vec<Pose>,
    pub cost: f64,
    /// Viewpoint node ids dropped for unreachability.
    pub dropped: Vec<usize>,
}

/// Dummy-node viewpoint TSP: a zero-cost dummy adjacent only to start and
/// goal turns the fixed-endpoints Hamiltonian path into a cycle instance.
pub fn plan_viewpoint_tour(
    map: &MapState,
    masks: &MapMasks,
    start: &Pose,
    goal: &Pose,
    viewpoints: &[Viewpoint],
    cfg: &LocalPlanConfig,
) -> Result<ViewpointTour> {
    let mut nodes: Vec<Pose> = vec![*start, *goal];
    nodes.extend(viewpoints.iter().map(|v| v.pose));
    let n = nodes.len();
    // direct collision-free edges with traversal-time weight
    let mut direct = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        direct[i][i] = 0.0;
        for j in i + 1..n {
            if segment_clear(map, masks, nodes[i].position, nodes[j].position) {
                let t = traversal_time(&nodes[i], &nodes[j], cfg);
                direct[i][j] = t;
                direct[j][i] = t;
            }
        }
    }
    // complete missing edges with voxel-A* detours: straight segments alone
    // cannot thread doorways, which strands every viewpoint beyond a wall
    let g = &map.tsdf;
    let snapped: Vec<Option<[usize; 3]>> = nodes
        .iter()
        .map(|p| snap_traversable(map, masks, p.position, 0.5))
        .collect();
    let comp = traversable_components(masks);
    let mut detours: BTreeMap<(usize, usize), Vec<Vector3<f64>>> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if direct[i][j].is_finite() {
                continue;
            }
            let (sa, sb) = match (snapped[i], snapped[j]) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            if comp[masks.linear(sa)] != comp[masks.linear(sb)] {
                continue;
            }
            let fine = match astar_grid(g.dims, g.resolution, sa, sb, |v| masks.traversable(v)) {
                Some((p, _)) => p,
                None => continue,
            };
            // shortcut the staircase path, then keep only interior bends
            let mut chain = vec![nodes[i].position];
            chain.extend(fine.iter().map(|&v| g.voxel_center(v)));
            chain.push(nodes[j].position);
            let smooth = shortcut_path(map, masks, &chain);
            let poly: Vec<Vector3<f64>> =
                smooth[1..smooth.len() - 1].to_vec();
            let mut len = 0.0;
            let mut prev = nodes[i].position;
            for p in &poly {
                len += (p - prev).norm();
                prev = *p;
            }
            len += (nodes[j].position - prev).norm();
            let ang = nodes[i].orientation.angle_to(&nodes[j].orientation);
            let t = (len / cfg.v_max).max(ang / cfg.omega_max);
            direct[i][j] = t;
            direct[j][i] = t;
            let mut rev = poly.clone();
            rev.reverse();
            detours.insert((i, j), poly);
            detours.insert((j, i), rev);
        }
    }
    // metric closure + hop reconstruction (Floyd-Warshall; n is tiny)
    let mut dist = direct.clone();
    let mut via = vec![vec![usize::MAX; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let alt = dist[i][k] + dist[k][j];
                if alt < dist[i][j] - 1e-12 {
                    dist[i][j] = alt;
                    via[i][j] = k;
                }
            }
        }
    }
    if dist[0][1].is_infinite() {
        return Err(Error::Domain(
            "viewpoint graph disconnected: goal unreachable from start".into(),
        ));
    }
    let mut keep: Vec<usize> = vec![0, 1];
    let mut dropped = Vec::new();
    for v in 2..n {
        if dist[0][v].is_finite() {
            keep.push(v);
        } else {
            dropped.push(v);
        }
    }
    // dummy-augmented cycle instance over the kept nodes
    let m = keep.len();
    let dummy = m;
    let big = 1e9;
    let mut cost = vec![vec![0.0; m + 1]; m + 1];
    for a in 0..m {
        for b in 0..m {
            cost[a][b] = dist[keep[a]][keep[b]];
        }
        let is_endpoint = keep[a] <= 1;
        cost[a][dummy] = if is_endpoint { 0.0 } else { big };
        cost[dummy][a] = cost[a][dummy];
    }
    // instances are tiny (start + goal + <= max_viewpoints + dummy), so the
    // exact DP is the default; the heuristic covers oversized edge cases
    let mut cyc = if cost.len() <= 14 { cycle_tsp_exact(&cost)? } else { cycle_tsp(&cost)? };
    let d_at = cyc.iter().position(|&x| x == dummy).unwrap();
    cyc.rotate_left(d_at);
    cyc.remove(0); // drop the dummy; remaining is an open path
    let mut order: Vec<usize> = cyc.iter().map(|&x| keep[x]).collect();
    if order.first() == Some(&1) {
        order.reverse();
    }
    if order.first() != Some(&0) || order.last() != Some(&1) {
        return Err(Error::Domain("viewpoint tour failed to pin start and goal".into()));
    }
    let tour_cost: f64 =
        order.windows(2).map(|w| dist[w[0]][w[1]]).sum();
    // expand multi-hop legs into explicit via poses
    fn expand(
        via: &[Vec<usize>],
        nodes: &[Pose],
        detours: &BTreeMap<(usize, usize), Vec<Vector3<f64>>>,
        i: usize,
        j: usize,
        out: &mut Vec<Pose>,
    ) {
        let k = via[i][j];
        if k == usize::MAX {
            if let Some(poly) = detours.get(&(i, j)) {
                let mut prev =
                    out.last().map(|p| p.position).unwrap_or(nodes[i].position);
                for &p in poly {
                    if (p - prev).norm() > 1e-9 {
                        out.push(Pose::looking(p, p - prev));
                        prev = p;
                    }
                }
            }
            out.push(nodes[j]);
        } else {
            expand(via, nodes, detours, i, k, out);
            expand(via, nodes, detours, k, j, out);
        }
    }
    let mut poses = vec![nodes[0]];
    for w in order.windows(2) {
        expand(&via, &nodes, &detours, w[0], w[1], &mut poses);
    }
    Ok(ViewpointTour { order, poses, cost: tour_cost, dropped })
}

#[derive(Debug, Clone, Copy)]
pub struct TrajSample {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajSample>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

/// Piecewise linear position + slerp orientation sampling at traj_dt.
pub fn interpolate_trajectory(poses: &[Pose], cfg: &LocalPlanConfig) -> Result<Trajectory> {
    if poses.len() < 2 {
        return Err(Error::Domain("trajectory needs at least two poses".into()));
    }
    let mut samples = vec![TrajSample { t: 0.0, pose: poses[0] }];
    let mut t0 = 0.0;
    for w in poses.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dur = traversal_time(a, b, cfg);
        if dur < 1e-12 {
            continue; // coincident poses: skip the leg
        }
        let mut s = 1usize;
        while (s as f64) * cfg.traj_dt < dur - 1e-9 {
            let f = (s as f64) * cfg.traj_dt / dur;
            let q = a
                .orientation
                .try_slerp(&b.orientation, f, 1e-12)
                .unwrap_or(b.orientation);
            samples.push(TrajSample {
                t: t0 + (s as f64) * cfg.traj_dt,
                pose: Pose::new(a.position + (b.position - a.position) * f, q),
            });
            s += 1;
        }
        t0 += dur;
        samples.push(TrajSample { t: t0, pose: *b });
    }
    if samples.len() < 2 {
        return Err(Error::Domain("all trajectory legs were degenerate".into()));
    }
    Ok(Trajectory { samples })
}

/// Escape fallback: region-graph A* to the goal region, pass-through poses at
/// the RPs facing travel, voxel-level detours for blocked legs. None when the
/// goal region is unreachable on both graphs.
pub fn escape_plan(
    map: &MapState,
    masks: &MapMasks,
    graph: &RegionGraph,
    current: &Pose,
    goal_region: usize,
    cfg: &LocalPlanConfig,
) -> Result<Option<Trajectory>> {
    let goal_idx = match graph.region_index(goal_region) {
        Some(i) => i,
        None => return Ok(None),
    };
    // locate the current region: containing cell if it is a region, else the
    // nearest RP
    let cur_idx = graph
        .lattice
        .cell_of(current.position)
        .map(|c| graph.lattice.linear(c))
        .and_then(|id| graph.region_index(id))
        .or_else(|| {
            (0..graph.regions.len()).min_by(|&a, &b| {
                let da = (graph.regions[a].rp - current.position).norm();
                let db = (graph.regions[b].rp - current.position).norm();
                da.partial_cmp(&db).unwrap()
            })
        });
    let cur_idx = match cur_idx {
        Some(i) => i,
        None => return Ok(None),
    };
    if cur_idx == goal_idx {
        let raw = graph.regions[goal_idx].rp;
        let rp = snap_traversable(map, masks, raw, 0.75)
            .map(|i| map.tsdf.voxel_center(i))
            .unwrap_or(raw);
        let dir = rp - current.position;
        if dir.norm() < 1e-9 {
            return Ok(None); // already at the goal RP; nothing to plan
        }
        let seq = vec![*current, Pose::looking(rp, dir)];
        return Ok(Some(interpolate_trajectory(&seq, cfg)?));
    }
    let adj = graph.adjacency();
    let (dist, parent) = dijkstra(&adj, cur_idx);
    let path = match extract_path(&parent, &dist, goal_idx) {
        Some(p) => p,
        None => return Ok(None),
    };
    // waypoints: current position, then the RPs along the region path,
    // snapped out of the clearance band (the centroid of a region's free
    // voxels can land next to a wall)
    let mut waypoints = vec![current.position];
    for &ri in path.iter().skip(1) {
        let rp = graph.regions[ri].rp;
        let w = snap_traversable(map, masks, rp, 0.75)
            .map(|i| map.tsdf.voxel_center(i))
            .unwrap_or(rp);
        if (w - waypoints.last().unwrap()).norm() > 1e-9 {
            waypoints.push(w);
        }
    }
    let mut seq: Vec<Pose> = vec![*current];
    for w in waypoints.windows(2).collect::<Vec<_>>() {
        let (a, b) = (w[0], w[1]);
        if segment_clear(map, masks, a, b) {
            seq.push(Pose::looking(b, b - a));
        } else {
            // voxel-level detour for the blocked leg
            let sa = snap_traversable(map, masks, a, 0.5);
            let sb = snap_traversable(map, masks, b, 0.5);
            let (sa, sb) = match (sa, sb) {
                (Some(x), Some(y)) => (x, y),
                _ => return Ok(None),
            };
            let g = &map.tsdf;
            let fine = astar_grid(g.dims, g.resolution, sa, sb, |i| masks.traversable(i));
            let fine = match fine {
                Some((p, _)) => p,
                None => return Ok(None),
            };
            // shortcut the staircase path, facing travel on each leg
            let mut chain = vec![a];
            chain.extend(fine.iter().map(|&i| g.voxel_center(i)));
            chain.push(b);
            let smooth = shortcut_path(map, masks, &chain);
            let pts: Vec<Vector3<f64>> = smooth[1..smooth.len() - 1].to_vec();
            let mut prev = a;
            for p in pts {
                if (p - prev).norm() < 1e-9 {
                    continue;
                }
                seq.push(Pose::looking(p, p - prev));
                prev = p;
            }
            if (b - prev).norm() > 1e-9 {
                seq.push(Pose::looking(b, b - prev));
            }
        }
    }
    if seq.len() < 2 {
        return Ok(None);
    }
    Ok(Some(interpolate_trajectory(&seq, cfg)?))
}
