//! Evaluation against ground truth: zero-crossing surface extraction from the
//! fused TSDF, point-based completion metrics, and AUSE sparsification for
//! uncertainty quality.

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub step: usize,
    pub completion_cm: f64,
    pub completion_ratio_pct: f64,
    pub ause: f64,
    pub n_gt_points: usize,
}

/// Linear zero-crossings on grid edges whose endpoints are both observed.
/// This is the marching-cubes vertex set, used as a point-level surface
/// stand-in (unobserved endpoints are culled).
pub fn extract_surface_points(tsdf: &VoxelGrid, weight: &VoxelGrid) -> Vec<Vector3<f64>> {
    assert_eq!(tsdf.dims, weight.dims, "grids must be aligned");
    let dims = tsdf.dims;
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let i = [x, y, z];
                let l1 = tsdf.linear(i);
                for axis in 0..3 {
                    if i[axis] + 1 >= dims[axis] {
                        continue;
                    }
                    let mut j = i;
                    j[axis] += 1;
                    let l2 = tsdf.linear(j);
                    if weight.data[l1] <= 0.0 || weight.data[l2] <= 0.0 {
                        continue;
                    }
                    let (a, b) = (tsdf.data[l1], tsdf.data[l2]);
                    if a * b >= 0.0 {
                        continue;
                    }
                    let t = a / (a - b);
                    let c1 = tsdf.voxel_center(i);
                    let c2 = tsdf.voxel_center(j);
                    out.push(c1 + (c2 - c1) * t);
                }
            }
        }
    }
    out
}

/// Uniform-bucket spatial hash for nearest-neighbor queries.
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Vector3<f64>>,
}

impl PointIndex {
    pub fn build(points: &[Vector3<f64>], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets, points: points.to_vec() }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Distance to the nearest indexed point; None if the index is empty.
    pub fn nearest_dist(&self, q: Vector3<f64>) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let (kx, ky, kz) = Self::key(&q, self.cell);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            // closest possible squared distance from q to any cell in this
            // ring; once it exceeds the best hit we are done
            if ring > 0 {
                let ring_min = (ring - 1) as f64 * self.cell;
                if best.is_finite() && ring_min > best {
                    break;
                }
                // hard stop: the ring has exhausted every bucket
                if ring as f64 * self.cell > 1e6 {
                    break;
                }
            }
            let mut any_bucket = false;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue; // shell only
                        }
                        if let Some(ids) =
                            self.buckets.get(&(kx + dx, ky + dy, kz + dz))
                        {
                            any_bucket = true;
                            for &i in ids {
                                best = best.min((self.points[i] - q).norm());
                            }
                        }
                    }
                }
            }
            let _ = any_bucket;
            ring += 1;
            // safety: stop when the ring certainly covers every bucket
            if ring > 2_000 {
                break;
            }
        }
        if best.is_finite() {
            Some(best)
        } else {
            // fall back to brute force (pathological spread)
            self.points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min).into()
        }
    }
}

/// Mean gt-to-reconstruction distance (cm) and the percentage of gt points
/// within `threshold` meters. Empty reconstruction: (+inf, 0).
pub fn completion_metrics(
    gt: &[Vector3<f64>],
    recon: &[Vector3<f64>],
    threshold: f64,
) -> Result<(f64, f64)> {
    if gt.is_empty() {
        return Err(Error::Domain("completion metrics need ground-truth points".into()));
    }
    if recon.is_empty() {
        return Ok((f64::INFINITY, 0.0));
    }
    // The hash cell is a pure performance knob (queries stay exact); a cell
    // much smaller than typical miss distances makes the shell walk around
    // far-from-surface queries enumerate millions of empty cells.
    let index = PointIndex::build(recon, threshold.max(0.5));
    let mut sum = 0.0;
    let mut within = 0usize;
    for g in gt {
        let d = index.nearest_dist(*g).expect("recon nonempty");
        sum += d;
        if d <= threshold {
            within += 1;
        }
    }
    Ok((
        100.0 * sum / gt.len() as f64, // meters -> cm
        100.0 * within as f64 / gt.len() as f64,
    ))
}

/// Mean of `errors` after (stably) removing the `k` entries ranked highest by
/// `rank`; ties keep original order, lower index removed first.
fn sparsified_mean(errors: &[f64], rank: &[f64], k: usize) -> f64 {
    let n = errors.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rank[b].partial_cmp(&rank[a]).unwrap().then(a.cmp(&b)));
    let keep = &order[k..];
    if keep.is_empty() {
        return 0.0;
    }
    keep.iter().map(|&i| errors[i]).sum::<f64>() / keep.len() as f64
}

/// Area Under the Sparsification Error: trapezoidal area between the
/// uncertainty-ranked and oracle (true-error-ranked) sparsification curves,
/// both normalized by the full-set mean error.
pub fn ause(errors: &[f64], uncertainties: &[f64]) -> Result<f64> {
    if errors.len() != uncertainties.len() {
        return Err(Error::Domain("errors/uncertainties length mismatch".into()));
    }
    if errors.len() < 2 {
        return Err(Error::Domain("AUSE needs at least two samples".into()));
    }
    if errors.iter().any(|&e| e < 0.0) {
        return Err(Error::Domain("errors must be nonnegative".into()));
    }
    let n = errors.len();
    let mean0 = errors.iter().sum::<f64>() / n as f64;
    if mean0 == 0.0 {
        return Ok(0.0);
    }
    let fractions: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    let mut diff = Vec::with_capacity(fractions.len());
    for &f in &fractions {
        let k = ((f * n as f64).floor() as usize).min(n - 1);
        let cu = sparsified_mean(errors, uncertainties, k) / mean0;
        let ce = sparsified_mean(errors, errors, k) / mean0;
        diff.push(cu - ce);
    }
    // trapezoid over f in [0, 0.99]
    let mut area = 0.0;
    for w in diff.windows(2) {
        area += 0.5 * (w[0] + w[1]) * 0.01;
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelGrid;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn plane_crossings_at_interpolated_height() {
        // TSDF of the plane z = 1.55 on a grid whose voxel centers sit at
        // multiples of 0.1 (1.5 and 1.6 straddle the plane)
        let mut tsdf = VoxelGrid {
            origin: Vector3::new(-0.05, -0.05, 0.95),
            resolution: 0.1,
            dims: [6, 6, 12],
            data: vec![0.0; 6 * 6 * 12],
        };
        let mut weight = VoxelGrid { data: vec![1.0; tsdf.len()], ..tsdf.clone() };
        for l in 0..tsdf.len() {
            let c = tsdf.voxel_center(tsdf.unlinear(l));
            tsdf.data[l] = 1.55 - c.z;
        }
        let pts = extract_surface_points(&tsdf, &weight);
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p.z - 1.55).abs() < 1e-12, "crossing at {p:?}");
        }
        // all-positive field yields nothing
        for v in &mut tsdf.data {
            *v = 0.3;
        }
        assert!(extract_surface_points(&tsdf, &weight).is_empty());
        // sign flip with an unobserved endpoint is culled
        for l in 0..tsdf.len() {
            let c = tsdf.voxel_center(tsdf.unlinear(l));
            tsdf.data[l] = 1.55 - c.z;
            if c.z > 1.55 {
                weight.data[l] = 0.0;
            }
        }
        assert!(extract_surface_points(&tsdf, &weight).is_empty());
    }

    #[test]
    fn crossing_points_lie_on_the_interpolant() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut tsdf =
            VoxelGrid::covering(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0), 0.1, 0.0);
        let weight = VoxelGrid { data: vec![1.0; tsdf.len()], ..tsdf.clone() };
        for v in &mut tsdf.data {
            *v = rng.gen_range(-0.1..0.1);
        }
        for p in extract_surface_points(&tsdf, &weight) {
            if tsdf.in_interior(p) {
                // points on axis-aligned edges between centers: the trilinear
                // interpolant along the edge is the 1-D linear interpolant
                let s = tsdf.trilinear_sample(p).unwrap();
                assert!(s.abs() <= 1e-9, "residual {s} at {p:?}");
            }
        }
    }

    #[test]
    fn completion_fixtures() {
        let gt: Vec<Vector3<f64>> =
            (0..10).map(|i| Vector3::new(i as f64 * 0.3, 0.0, 0.0)).collect();
        // identical
        let (cm, pct) = completion_metrics(&gt, &gt, 0.05).unwrap();
        assert_eq!(cm, 0.0);
        assert_eq!(pct, 100.0);
        // uniform 0.03 m offset
        let recon: Vec<Vector3<f64>> =
            gt.iter().map(|p| p + Vector3::new(0.0, 0.03, 0.0)).collect();
        let (cm, pct) = completion_metrics(&gt, &recon, 0.05).unwrap();
        assert!((cm - 3.0).abs() < 1e-9);
        assert_eq!(pct, 100.0);
        // half at 0.02, half at 0.08 -> (5.0 cm, 50%)
        let recon: Vec<Vector3<f64>> = gt
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let off = if i < 5 { 0.02 } else { 0.08 };
                p + Vector3::new(0.0, off, 0.0)
            })
            .collect();
        let (cm, pct) = completion_metrics(&gt, &recon, 0.05).unwrap();
        assert!((cm - 5.0).abs() < 1e-9);
        assert!((pct - 50.0).abs() < 1e-9);
        // empty recon sentinel, empty gt error
        let (cm, pct) = completion_metrics(&gt, &[], 0.05).unwrap();
        assert!(cm.is_infinite());
        assert_eq!(pct, 0.0);
        assert!(completion_metrics(&[], &gt, 0.05).is_err());
    }

    #[test]
    fn spatial_hash_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let recon: Vec<Vector3<f64>> = (0..200)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    )
                })
                .collect();
            let index = PointIndex::build(&recon, 0.17);
            for _ in 0..50 {
                let q = Vector3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                );
                let fast = index.nearest_dist(q).unwrap();
                let brute = recon
                    .iter()
                    .map(|p| (p - q).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!((fast - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn completion_monotone_under_supersets() {
        let mut rng = StdRng::seed_from_u64(4);
        let gt: Vec<Vector3<f64>> = (0..50)
            .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let mut recon: Vec<Vector3<f64>> =
            (0..5).map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (cm, _) = completion_metrics(&gt, &recon, 0.05).unwrap();
            assert!(cm <= last + 1e-12);
            last = cm;
            for _ in 0..5 {
                recon.push(Vector3::new(rng.gen(), rng.gen(), rng.gen()));
            }
        }
    }

    #[test]
    fn ause_perfect_ranking_is_zero() {
        let errors: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let a = ause(&errors, &errors).unwrap();
        assert!(a.abs() < 1e-12, "AUSE {a}");
    }

    #[test]
    fn ause_zero_errors_defined_zero() {
        assert_eq!(ause(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn worst_ranking_is_permutation_maximum() {
        // brute force over all rank permutations of small error lists
        fn permutations(v: Vec<usize>) -> Vec<Vec<usize>> {
            if v.len() <= 1 {
                return vec![v];
            }
            let mut out = Vec::new();
            for i in 0..v.len() {
                let mut rest = v.clone();
                let x = rest.remove(i);
                for mut p in permutations(rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        let mut rng = StdRng::seed_from_u64(13);
        for n in [4usize, 5, 6] {
            let errors: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let reversed: Vec<f64> = errors.iter().map(|e| -e).collect();
            let worst = ause(&errors, &reversed).unwrap();
            let mut max_perm = f64::NEG_INFINITY;
            for perm in permutations((0..n).collect()) {
                // ranking that removes in the order given by perm
                let mut rank = vec![0.0; n];
                for (pos, &i) in perm.iter().enumerate() {
                    rank[i] = (n - pos) as f64;
                }
                let a = ause(&errors, &rank).unwrap();
                assert!(a >= -1e-12, "negative AUSE {a}");
                max_perm = max_perm.max(a);
            }
            assert!(
                worst >= max_perm - 1e-9,
                "n={n}: anti-ranking {worst} below permutation max {max_perm}"
            );
        }
    }

    #[test]
    fn constant_uncertainty_positive_unless_constant_errors() {
        let errors = vec![0.1, 0.5, 0.2, 0.9, 0.05, 0.4];
        let flat = vec![1.0; errors.len()];
        assert!(ause(&errors, &flat).unwrap() > 0.0);
        let const_err = vec![0.3; 6];
        assert!(ause(&const_err, &flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ause_rejects_bad_input() {
        assert!(ause(&[1.0], &[1.0]).is_err());
        assert!(ause(&[1.0, 2.0], &[1.0]).is_err());
        assert!(ause(&[-1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
