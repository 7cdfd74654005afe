//! Closed-form Normal-Inverse-Gamma updates: fuse per-observation pseudo
//! statistics into the prior and watch the epistemic entropy collapse as
//! evidence accumulates.

use evexplore::evidential::{
    natural_to_nig, nig_entropy, posterior_update, NaturalStats,
};

fn main() {
    // Weak prior: zero mean, variance ~ 3, one pseudo-observation.
    let prior = NaturalStats::new(0.0, 3.0, 1.0);
    let prior_nig = natural_to_nig(prior).unwrap();
    println!(
        "prior: mu0={:+.3} lambda={:.3} alpha={:.3} beta={:.3}  H={:.4} nats",
        prior_nig.mu0,
        prior_nig.lambda,
        prior_nig.alpha,
        prior_nig.beta,
        nig_entropy(prior_nig)
    );

    // A sensor repeatedly reports a signed distance of 0.07 m with small
    // per-observation scatter. Each row fuses another batch of evidence.
    let observed = 0.07;
    let scatter2 = 0.01;
    for &n_i in &[1.0, 4.0, 16.0, 64.0, 256.0] {
        let pseudo = NaturalStats::new(observed, observed * observed + scatter2, n_i);
        let post = posterior_update(prior, pseudo).unwrap();
        let m = natural_to_nig(post).unwrap();
        println!(
            "n_i={:>5.0}: mu0={:+.4} alpha={:>7.2} beta={:>7.3}  H={:+.4} nats",
            n_i,
            m.mu0,
            m.alpha,
            m.beta,
            nig_entropy(m)
        );
    }

    // Conjugacy: fusing two batches sequentially equals fusing their sum.
    let a = NaturalStats::new(0.1, 0.05, 10.0);
    let b = NaturalStats::new(-0.2, 0.09, 5.0);
    let seq = posterior_update(posterior_update(prior, a).unwrap(), b).unwrap();
    let joint = posterior_update(
        prior,
        NaturalStats::new(
            (a.n * a.chi1 + b.n * b.chi1) / (a.n + b.n),
            (a.n * a.chi2 + b.n * b.chi2) / (a.n + b.n),
            a.n + b.n,
        ),
    )
    .unwrap();
    println!(
        "conjugacy check: sequential=({:+.6}, {:+.6}, {:.1})  joint=({:+.6}, {:+.6}, {:.1})",
        seq.chi1, seq.chi2, seq.n, joint.chi1, joint.chi2, joint.n
    );
}
