//! Acceptance suite: one test per headline criterion, each printing a single
//! pass/fail line (run with `--nocapture` to see PASS lines; failures are
//! reported by the harness either way).

use std::collections::BTreeSet;
use std::time::Instant;

use evexplore::evidential::{
    loss_and_grad, natural_to_nig, nig_entropy, posterior_entropy, posterior_update,
    LossConfig, NaturalStats,
};
use evexplore::global_planner::{
    build_connectivity, classify_regions, decompose_regions, MapMasks, PlannerConfig,
    RegionLattice,
};
use evexplore::local_planner::{escape_plan, greedy_coverage, LocalPlanConfig};
use evexplore::mapping::{MapState, MappingConfig};
use evexplore::metrics::ause;
use evexplore::tsp::{
    held_karp_open, is_two_opt_minimal, open_path_tsp, path_cost,
};
use evexplore::world::{scene_single_room, scene_two_rooms, CameraIntrinsics, Pose};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn verdict(criterion: &str, pass: bool) {
    println!("[acceptance] {criterion}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion failed: {criterion}");
}

fn random_stats(rng: &mut ChaCha12Rng) -> NaturalStats {
    let chi1 = rng.gen_range(-2.0..2.0);
    let var = rng.gen_range(0.01..4.0);
    NaturalStats::new(chi1, chi1 * chi1 + var, rng.gen_range(0.5..500.0))
}

#[test]
fn criterion_01_nig_conjugacy() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut ok = true;
    for _ in 0..1000 {
        let prior = random_stats(&mut rng);
        let a = random_stats(&mut rng);
        let b = random_stats(&mut rng);
        let seq = posterior_update(posterior_update(prior, a).unwrap(), b).unwrap();
        let merged = NaturalStats::new(
            (a.n * a.chi1 + b.n * b.chi1) / (a.n + b.n),
            (a.n * a.chi2 + b.n * b.chi2) / (a.n + b.n),
            a.n + b.n,
        );
        let batch = posterior_update(prior, merged).unwrap();
        ok &= (seq.chi1 - batch.chi1).abs() < 1e-9
            && (seq.chi2 - batch.chi2).abs() < 1e-9
            && (seq.n - batch.n).abs() < 1e-9;
    }
    ok &= t0.elapsed().as_secs_f64() < 1.0;
    verdict("1 NIG conjugacy (batch == sequential, 1000 cases, <1s)", ok);
}

#[test]
fn criterion_02_entropy_vs_monte_carlo() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let mut ok = true;
    for _ in 0..10 {
        let m = natural_to_nig(random_stats(&mut rng)).unwrap();
        // Monte-Carlo differential entropy of the joint (mu, sigma^2):
        // sigma^2 ~ InvGamma(alpha, beta) via 1/Gamma, mu ~ N(mu0, sigma^2/lambda).
        let gamma = rand_distr::Gamma::new(m.alpha, 1.0 / m.beta).unwrap();
        let n = 1_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            let var = 1.0 / rng.sample(gamma);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let mu = m.mu0 + z * (var / m.lambda).sqrt();
            let log_pdf = 0.5 * (m.lambda / (2.0 * std::f64::consts::PI * var)).ln()
                - m.lambda * (mu - m.mu0) * (mu - m.mu0) / (2.0 * var)
                + m.alpha * m.beta.ln()
                - evexplore::special::ln_gamma(m.alpha)
                - (m.alpha + 1.0) * var.ln()
                - m.beta / var;
            acc -= log_pdf;
        }
        let mc = acc / n as f64;
        ok &= (mc - nig_entropy(m)).abs() < 0.05;
    }
    // Frozen value for the map prior (mu0=0, lambda=1, alpha=1/2, beta=3/2).
    let prior = natural_to_nig(NaturalStats::new(0.0, 3.0, 1.0)).unwrap();
    ok &= (nig_entropy(prior) - 7.0265).abs() < 1e-3;
    ok &= t0.elapsed().as_secs_f64() < 30.0;
    verdict("2 NIG entropy (closed form vs 1e6-sample MC, prior ~= 7.0265)", ok);
}

#[test]
fn criterion_03_gradient_vs_finite_differences() {
    let t0 = Instant::now();
    let cfg = MappingConfig::default();
    let hyper = cfg.hyper();
    let loss_cfg = LossConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    let mut ok = true;
    for _ in 0..100 {
        let s_gt = rng.gen_range(-0.1..0.1);
        let s_i = rng.gen_range(-0.1..0.1);
        let rho = rng.gen_range(-16.0..-4.0);
        let tau = rng.gen_range(-2.0..4.0);
        let prior = hyper.prior;
        let (_, d_rho, d_tau) =
            loss_and_grad(s_gt, prior, s_i, rho, tau, &hyper, &loss_cfg).unwrap();
        let f = |r: f64, t: f64| {
            loss_and_grad(s_gt, prior, s_i, r, t, &hyper, &loss_cfg).unwrap().0
        };
        let h = 1e-5;
        let fd_rho = (f(rho + h, tau) - f(rho - h, tau)) / (2.0 * h);
        let fd_tau = (f(rho, tau + h) - f(rho, tau - h)) / (2.0 * h);
        for (a, b) in [(d_rho, fd_rho), (d_tau, fd_tau)] {
            let tol = 1e-4 * a.abs().max(b.abs());
            ok &= (a - b).abs() <= tol.max(1e-7);
        }
    }
    ok &= t0.elapsed().as_secs_f64() < 5.0;
    verdict("3 analytic gradients vs central differences (100 cases)", ok);
}

#[test]
fn criterion_04_uncertainty_tracks_error() {
    let t0 = Instant::now();
    let scene = scene_two_rooms();
    let cfg = MappingConfig::default();
    let loss_cfg = LossConfig::default();
    let k = CameraIntrinsics::default();
    let hyper = cfg.hyper();
    let tr = cfg.tr;
    let gt = scene.gt_surface_samples(0.1);

    let mut ranking_wins = 0;
    let mut separation_ok = true;
    let seeds = 20u64;
    for seed in 0..seeds {
        let mut map =
            MapState::new(scene.bounds.min_v(), scene.bounds.max_v(), cfg.clone()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        // Scripted 40-frame partial scan: a 240-degree sweep of the west room.
        let eye = Vector3::new(2.0, 2.0, 1.2);
        for s in 0..40 {
            let yaw = (s as f64 / 39.0 - 0.5) * (4.0 * std::f64::consts::PI / 3.0);
            let pose = Pose::looking(eye, Vector3::new(yaw.cos(), yaw.sin(), 0.0));
            let frame = scene.render_depth(pose, &k).unwrap();
            map.fuse_depth(&frame);
            for _ in 0..cfg.grad_steps_per_frame {
                let batch = map.sample_training_points(&frame, &mut rng).unwrap();
                map.uncertainty_step(&batch, &loss_cfg).unwrap();
            }
        }

        // AUSE of the learned ranking vs a shuffled ranking of |TSDF| errors
        // at ground-truth surface points.
        let mut errors = Vec::new();
        let mut uncert = Vec::new();
        for p in &gt {
            if map.tsdf.in_interior(*p) {
                errors.push(map.tsdf.trilinear_sample(*p).unwrap().abs());
                uncert.push(map.query_epistemic(*p).unwrap());
            }
        }
        let learned = ause(&errors, &uncert).unwrap();
        let mut shuffled = uncert.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let random = ause(&errors, &shuffled).unwrap();
        if learned < random {
            ranking_wins += 1;
        }

        // Epistemic separation: unobserved voxels vs observed-surface voxels.
        let (mut u_unobs, mut n_unobs, mut u_surf, mut n_surf) = (0.0, 0usize, 0.0, 0usize);
        for l in 0..map.tsdf.len() {
            let u = posterior_entropy(
                map.tsdf.data[l],
                map.v_rho.data[l],
                map.v_tau.data[l],
                &hyper,
            );
            if map.weight.data[l] == 0.0 {
                u_unobs += u;
                n_unobs += 1;
            } else if map.tsdf.data[l].abs() < tr {
                u_surf += u;
                n_surf += 1;
            }
        }
        let gap = u_unobs / n_unobs as f64 - u_surf / n_surf as f64;
        separation_ok &= gap >= 1.0;
    }
    let ok = ranking_wins >= 19 && separation_ok && t0.elapsed().as_secs_f64() < 300.0;
    println!("[acceptance]   detail: ranking wins {ranking_wins}/{seeds}");
    verdict("4 uncertainty-error correlation (AUSE + 1 nat separation, 20 seeds)", ok);
}

#[test]
fn criterion_05_coverage_beats_frontier_baseline() {
    let t0 = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let run = |mode: evexplore::app::Mode, seed: u64, tag: &str| {
        // Shared configuration for both modes; only `mode` and `seed` differ.
        // 300 frames is a frame budget, so the platform needs realistic desk-
        // robot dynamics (3 m/s, pi rad/s, 0.5 s control steps) to tour an
        // apartment; 5 cm voxels are required because surface extraction
        // samples at the voxel pitch, capping the 5 cm completion ratio well
        // below 90% on a 10 cm grid regardless of exploration quality.
        let cfg = evexplore::app::RunConfig {
            scene: "apartment".into(),
            budget: 300,
            eval_every: 300,
            gt_sample_spacing: 0.05,
            mode,
            rng_seed: seed,
            out_dir: base.path().join(format!("{tag}_{seed}")).to_string_lossy().into(),
            mapping: MappingConfig { voxel_res: 0.05, ..Default::default() },
            planner: PlannerConfig {
                region_size: 2.5,
                pool_stride: 3,
                n_obs_floor: 5.0,
                ..Default::default()
            },
            local: LocalPlanConfig {
                v_max: 3.0,
                omega_max: 3.14,
                traj_dt: 0.5,
                max_viewpoints: 4,
                top_k: 1500,
                eta: 100.0,
                orientations_per_pos: 12,
                pos_step_xy: 0.5,
                ..Default::default()
            },
            ..Default::default()
        };
        evexplore::app::run_episode(&cfg).unwrap().completion_ratio_pct
    };
    let full: Vec<f64> =
        (0..3).map(|s| run(evexplore::app::Mode::Full, s, "full")).collect();
    let frontier: Vec<f64> =
        (0..3).map(|s| run(evexplore::app::Mode::FrontierOnly, s, "frontier")).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "[acceptance]   detail: full {full:.1?} (mean {:.1}%) vs frontier {frontier:.1?} (mean {:.1}%)",
        mean(&full),
        mean(&frontier)
    );
    let ok = mean(&full) >= mean(&frontier)
        && full.iter().all(|&r| r >= 90.0)
        && t0.elapsed().as_secs_f64() < 900.0;
    verdict("5 coverage: full >= frontier mean, full >= 90% on 3 seeds", ok);
}

#[test]
fn criterion_06_tsp_quality() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let mut ok = true;
    // Exhaustive-oracle sizes.
    for n in 2..=12usize {
        for _ in 0..10 {
            let pts: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
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
            let order = open_path_tsp(&cost, 0).unwrap();
            let c = path_cost(&cost, &order);
            ok &= c >= held_karp_open(&cost, 0).unwrap() - 1e-9;
            ok &= is_two_opt_minimal(&cost, &order);
        }
    }
    // Mean-gap bound on 200 random N=10 instances.
    let mut gap = 0.0;
    for _ in 0..200 {
        let pts: Vec<(f64, f64)> =
            (0..10).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let cost: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                (0..10)
                    .map(|j| {
                        ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
                    })
                    .collect()
            })
            .collect();
        let c = path_cost(&cost, &open_path_tsp(&cost, 0).unwrap());
        let opt = held_karp_open(&cost, 0).unwrap();
        gap += (c - opt) / opt;
    }
    ok &= gap / 200.0 <= 0.08;
    ok &= t0.elapsed().as_secs_f64() < 120.0;
    verdict("6 TSP: never below optimum, 2-opt minimal, mean gap <= 8%", ok);
}

#[test]
fn criterion_07_greedy_approximation_bound() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    let bound = 1.0 - (-1.0f64).exp();
    let mut ok = true;
    for _ in 0..200 {
        let n_elems = rng.gen_range(3..=10usize);
        let n_sets = rng.gen_range(2..=12usize);
        let budget = rng.gen_range(1..=4usize);
        let weights: Vec<f64> = (0..n_elems).map(|_| rng.gen_range(0.1..5.0)).collect();
        let covers: Vec<Vec<usize>> = (0..n_sets)
            .map(|_| (0..n_elems).filter(|_| rng.gen_bool(0.4)).collect())
            .collect();
        let value = |sets: &[usize]| {
            let mut used = vec![false; n_elems];
            for &s in sets {
                for &e in &covers[s] {
                    used[e] = true;
                }
            }
            used.iter()
                .enumerate()
                .filter(|(_, &u)| u)
                .map(|(e, _)| weights[e])
                .sum::<f64>()
        };
        let picks = greedy_coverage(&covers, &weights, budget, 0.0);
        // Brute-force optimum over all subsets of size <= budget.
        let mut opt = 0.0f64;
        for mask in 0u32..(1 << n_sets) {
            if mask.count_ones() as usize > budget {
                continue;
            }
            let sets: Vec<usize> =
                (0..n_sets).filter(|&i| mask >> i & 1 == 1).collect();
            opt = opt.max(value(&sets));
        }
        ok &= value(&picks) >= bound * opt - 1e-9;
    }
    ok &= t0.elapsed().as_secs_f64() < 60.0;
    verdict("7 greedy coverage >= (1 - 1/e) * OPT on 200 enumerable instances", ok);
}

#[test]
fn criterion_08_initial_evidence_near_one() {
    let scene = scene_single_room();
    let map = MapState::new(
        scene.bounds.min_v(),
        scene.bounds.max_v(),
        MappingConfig::default(),
    )
    .unwrap();
    let mut ok = true;
    for l in 0..map.tsdf.len() {
        let n = map.evidence(map.tsdf.unlinear(l));
        ok &= (0.999..=1.0).contains(&n);
    }
    verdict("8 initial per-voxel evidence in [0.999, 1.0]", ok);
}

#[test]
fn criterion_09_escape_reaches_goal_collision_free() {
    let t0 = Instant::now();
    let scene = scene_two_rooms();
    let pcfg = PlannerConfig::default();
    let lcfg = LocalPlanConfig::default();
    // Fully observed map from the ground-truth SDF: the fixture isolates the
    // escape machinery from mapping noise.
    let mut map = MapState::new(
        scene.bounds.min_v(),
        scene.bounds.max_v(),
        MappingConfig::default(),
    )
    .unwrap();
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

    // Goal deep in the east room: several regions away, through the doorway.
    let start = Pose::looking(Vector3::new(1.0, 0.8, 1.2), Vector3::x());
    let goal_pos = Vector3::new(7.0, 0.8, 1.2);
    let goal_region = lattice.linear(lattice.cell_of(goal_pos).unwrap());
    let traj = escape_plan(&map, &masks, &graph, &start, goal_region, &lcfg)
        .unwrap()
        .expect("goal region reachable through the doorway");
    let end = traj.samples.last().unwrap().pose.position;
    let mut ok = lattice.cell_of(end) == lattice.cell_of(goal_pos);
    for s in &traj.samples {
        ok &= scene.gt_sdf(s.pose.position) >= pcfg.r_robot - 1e-9;
    }
    ok &= t0.elapsed().as_secs_f64() < 30.0;
    verdict("9 escape plan reaches the goal region, collision-free", ok);
}

#[test]
fn criterion_10_determinism() {
    let base = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let cfg = evexplore::app::RunConfig {
            scene: "single_room".into(),
            budget: 40,
            eval_every: 20,
            gt_sample_spacing: 0.2,
            rng_seed: 9,
            out_dir: base.path().join(dir).to_string_lossy().into(),
            ..Default::default()
        };
        evexplore::app::run_episode(&cfg).unwrap();
        std::fs::read(base.path().join(dir).join("metrics.csv")).unwrap()
    };
    let ok = run("a") == run("b");
    verdict("10 identical config + seed give byte-identical metrics.csv", ok);
}
