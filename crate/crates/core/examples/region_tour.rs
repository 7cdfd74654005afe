//! Hierarchical global planning: decompose the scene into 1 m regions,
//! classify them from a partial scan, build the traversability-validated
//! connectivity graph and plan a frontier-weighted coverage tour.

use std::collections::BTreeSet;

use evexplore::evidential::LossConfig;
use evexplore::global_planner::{
    build_connectivity, classify_regions, decompose_regions, plan_global_tour,
    MapMasks, PlannerConfig, RegionLattice, RegionState,
};
use evexplore::mapping::{MapState, MappingConfig};
use evexplore::world::{scene_two_rooms, CameraIntrinsics, Pose};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let scene = scene_two_rooms();
    let map_cfg = MappingConfig::default();
    let cfg = PlannerConfig::default();
    let k = CameraIntrinsics::default();
    let mut map =
        MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), map_cfg.clone()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(3);

    // Scan only the west room; the east room stays unknown.
    let eye = Vector3::new(2.0, 2.0, 1.2);
    for s in 0..24 {
        let yaw = s as f64 / 24.0 * std::f64::consts::TAU;
        let frame = scene
            .render_depth(
                Pose::looking(eye, Vector3::new(yaw.cos(), yaw.sin(), 0.0)),
                &k,
            )
            .unwrap();
        map.fuse_depth(&frame);
        for _ in 0..map_cfg.grad_steps_per_frame {
            let batch = map.sample_training_points(&frame, &mut rng).unwrap();
            map.uncertainty_step(&batch, &LossConfig::default()).unwrap();
        }
    }

    let masks = MapMasks::build(&map, &scene.bounds, &cfg);
    let lattice = RegionLattice::new(&scene.bounds, cfg.region_size);
    let mut regions = decompose_regions(&scene.bounds, &cfg, &map, &masks);
    let mut history = BTreeSet::new();
    classify_regions(&mut regions, &map, &masks, &cfg, &lattice, &mut history);
    let graph = build_connectivity(&regions, &map, &masks, &cfg, &lattice);

    let count = |s: RegionState| regions.iter().filter(|r| r.state == s).count();
    println!(
        "{} regions: {} explored, {} exploring, {} unexplored; {} connectivity edges",
        regions.len(),
        count(RegionState::Explored),
        count(RegionState::Exploring),
        count(RegionState::Unexplored),
        graph.edges.len()
    );
    for r in regions.iter().filter(|r| r.state == RegionState::Exploring) {
        println!(
            "  exploring region {:>2} at cell {:?}: {} frontier voxels, rp ({:.2}, {:.2}, {:.2})",
            r.id, r.cell, r.frontier_count, r.rp.x, r.rp.y, r.rp.z
        );
    }

    let current = lattice.linear(lattice.cell_of(eye).unwrap());
    let tour = plan_global_tour(&graph, current, &cfg).unwrap();
    println!("tour from region {current}: {:?}", tour.order);
    if !tour.unreachable.is_empty() {
        println!("unreachable exploring regions: {:?}", tour.unreachable);
    }
}
