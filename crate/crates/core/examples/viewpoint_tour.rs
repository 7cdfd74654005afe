//! Informative local planning: select greedy coverage viewpoints over the
//! high-uncertainty voxel pool, order them with an exact start/goal-pinned
//! tour, and interpolate the flyable trajectory.

use std::collections::BTreeSet;

use evexplore::evidential::LossConfig;
use evexplore::global_planner::{MapMasks, PlannerConfig, RegionLattice};
use evexplore::local_planner::{
    interpolate_trajectory, plan_viewpoint_tour, select_target_viewpoints,
    LocalPlanConfig,
};
use evexplore::mapping::{MapState, MappingConfig};
use evexplore::world::{scene_single_room, CameraIntrinsics, Pose};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let scene = scene_single_room();
    let map_cfg = MappingConfig::default();
    let pcfg = PlannerConfig::default();
    let lcfg = LocalPlanConfig::default();
    let k = CameraIntrinsics::default();
    let mut map =
        MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), map_cfg.clone()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(11);

    // Partial scan: look only east, so the west half keeps high uncertainty.
    let eye = Vector3::new(1.2, 2.0, 1.2);
    for s in 0..6 {
        let yaw = (s as f64 - 2.5) * 0.25;
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

    let masks = MapMasks::build(&map, &scene.bounds, &pcfg);
    let lattice = RegionLattice::new(&scene.bounds, pcfg.region_size);
    // Planning domain: every region cell of the (single-room) scene.
    let domain: BTreeSet<usize> = (0..lattice.dims[0] * lattice.dims[1] * lattice.dims[2])
        .collect();
    let pool = map.high_uncertainty_voxels(MapState::default_uncertainty_threshold(&map_cfg));
    println!("{} voxels above the uncertainty threshold", pool.len());

    let vps = select_target_viewpoints(&map, &masks, &lattice, &domain, &pool, &lcfg).unwrap();
    for (i, vp) in vps.iter().enumerate() {
        println!(
            "viewpoint {i}: pos ({:+.2}, {:+.2}, {:+.2}) score {:>7.1} covers {} voxels",
            vp.pose.position.x,
            vp.pose.position.y,
            vp.pose.position.z,
            vp.score,
            vp.covered.len()
        );
    }
    if vps.is_empty() {
        println!("no viewpoint cleared the acceptance threshold");
        return;
    }

    let start = Pose::looking(eye, Vector3::x());
    let goal = Pose::looking(Vector3::new(3.0, 2.0, 1.2), Vector3::x());
    let tour = plan_viewpoint_tour(&map, &masks, &start, &goal, &vps, &lcfg).unwrap();
    println!(
        "tour order {:?}, motion cost {:.2} s, {} viewpoints dropped",
        tour.order,
        tour.cost,
        tour.dropped.len()
    );
    let traj = interpolate_trajectory(&tour.poses, &lcfg).unwrap();
    println!(
        "trajectory: {} samples over {:.2} s",
        traj.samples.len(),
        traj.duration()
    );
}
