//! End-to-end exploration episode: run the full active-reconstruction loop
//! (render, fuse, train, plan hierarchically, move) in a bundled scene and
//! print the final evaluation plus the produced artifacts.

use evexplore::app::{run_episode, Mode, RunConfig};

fn main() {
    let out = std::env::temp_dir().join("evexplore_example_episode");
    let cfg = RunConfig {
        scene: "two_rooms".into(),
        budget: 120,
        eval_every: 40,
        gt_sample_spacing: 0.1,
        mode: Mode::Full,
        rng_seed: 1,
        out_dir: out.to_string_lossy().into_owned(),
        ..RunConfig::default()
    };

    let report = run_episode(&cfg).unwrap();
    println!(
        "final evaluation at step {}: completion {:.2} cm, {:.1}% within 5 cm, AUSE {:.4}",
        report.step, report.completion_cm, report.completion_ratio_pct, report.ause
    );
    println!("artifacts in {}:", out.display());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for n in names {
        println!("  {n}");
    }
    println!("(evaluate or export later with: evexplore eval --run-dir <dir>)");
}
