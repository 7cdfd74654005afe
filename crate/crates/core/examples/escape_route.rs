//! Escape planning: when the local neighborhood holds no informative
//! viewpoints, route to a distant region through the region graph with
//! collision-checked legs and voxel-level detours.

use std::collections::BTreeSet;

use evexplore::global_planner::{
    build_connectivity, classify_regions, decompose_regions, MapMasks, PlannerConfig,
    RegionLattice,
};
use evexplore::local_planner::{escape_plan, LocalPlanConfig};
use evexplore::mapping::{MapState, MappingConfig};
use evexplore::world::{scene_two_rooms, Pose};
use nalgebra::Vector3;

fn main() {
    let scene = scene_two_rooms();
    let map_cfg = MappingConfig::default();
    let pcfg = PlannerConfig::default();
    let lcfg = LocalPlanConfig::default();

    // Fabricate a fully observed map from the ground-truth SDF so the route
    // quality is easy to inspect; online maps produce the same machinery.
    let mut map =
        MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), map_cfg).unwrap();
    for l in 0..map.tsdf.len() {
        let c = map.tsdf.voxel_center(map.tsdf.unlinear(l));
        map.tsdf.data[l] = scene.gt_sdf(c).clamp(-0.1, 0.1);
        map.weight.data[l] = 1.0;
    }

    let masks = MapMasks::build(&map, &scene.bounds, &pcfg);
    let lattice = RegionLattice::new(&scene.bounds, pcfg.region_size);
    let mut regions = decompose_regions(&scene.bounds, &pcfg, &map, &masks);
    let mut history = BTreeSet::new();
    classify_regions(&mut regions, &map, &masks, &pcfg, &lattice, &mut history);
    let graph = build_connectivity(&regions, &map, &masks, &pcfg, &lattice);

    // From the south-west corner of the west room to a region deep in the
    // east room: the only way through is the 0.9 m doorway.
    let start = Pose::looking(Vector3::new(0.8, 0.8, 1.2), Vector3::x());
    let goal_region = lattice.linear(lattice.cell_of(Vector3::new(7.2, 0.8, 1.2)).unwrap());
    let traj = escape_plan(&map, &masks, &graph, &start, goal_region, &lcfg)
        .unwrap()
        .expect("goal region should be reachable");

    println!(
        "escape to region {goal_region}: {} samples over {:.2} s",
        traj.samples.len(),
        traj.duration()
    );
    let mut min_clear = f64::INFINITY;
    let mut crossed = false;
    for s in &traj.samples {
        min_clear = min_clear.min(scene.gt_sdf(s.pose.position));
        crossed |= (s.pose.position.x - 4.0).abs() < 0.2;
    }
    println!(
        "minimum true clearance along the path: {min_clear:.3} m (robot radius {:.2} m)",
        pcfg.r_robot
    );
    println!("path crosses the doorway wall plane: {crossed}");
    for s in traj.samples.iter().step_by(traj.samples.len() / 12).take(13) {
        println!(
            "  t={:>5.2}s  ({:+.2}, {:+.2}, {:+.2})",
            s.t, s.pose.position.x, s.pose.position.y, s.pose.position.z
        );
    }
}
