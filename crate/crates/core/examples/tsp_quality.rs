//! Tour-solver quality check: compare the 2-opt/Or-opt heuristics against
//! exact Held-Karp dynamic programming on random Euclidean instances.

use evexplore::tsp::{
    cycle_cost, cycle_tsp, held_karp_cycle, held_karp_open, open_path_tsp, path_cost,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_instance(n: usize, rng: &mut ChaCha12Rng) -> Vec<Vec<f64>> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                    (dx * dx + dy * dy).sqrt()
                })
                .collect()
        })
        .collect()
}

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let trials = 200;
    let n = 10;
    let (mut open_gap, mut cyc_gap, mut open_exact, mut cyc_exact) = (0.0, 0.0, 0, 0);
    for _ in 0..trials {
        let cost = random_instance(n, &mut rng);
        let open = path_cost(&cost, &open_path_tsp(&cost, 0).unwrap());
        let open_opt = held_karp_open(&cost, 0).unwrap();
        let cyc = cycle_cost(&cost, &cycle_tsp(&cost).unwrap());
        let cyc_opt = held_karp_cycle(&cost).unwrap();
        open_gap += (open - open_opt) / open_opt;
        cyc_gap += (cyc - cyc_opt) / cyc_opt;
        open_exact += usize::from(open <= open_opt + 1e-9);
        cyc_exact += usize::from(cyc <= cyc_opt + 1e-9);
    }
    println!("{trials} random Euclidean instances with n = {n}:");
    println!(
        "open path : mean optimality gap {:.3}%, exactly optimal on {}/{trials}",
        100.0 * open_gap / trials as f64,
        open_exact
    );
    println!(
        "cycle     : mean optimality gap {:.3}%, exactly optimal on {}/{trials}",
        100.0 * cyc_gap / trials as f64,
        cyc_exact
    );
}
