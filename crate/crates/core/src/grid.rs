//! Dense axis-aligned voxel grids with trilinear sampling and its adjoint.
//!
//! Linearization is x-fastest: `data[ix + dims[0]*(iy + dims[1]*iz)]`, which
//! also fixes the layout of the binary dump format.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

/// The 8 corner indices and weights a point interpolates from.
#[derive(Debug, Clone, Copy)]
pub struct TrilinearSupport {
    pub corners: [usize; 8],
    pub weights: [f64; 8],
}

impl VoxelGrid {
    pub fn new(origin: Vector3<f64>, resolution: f64, dims: [usize; 3], fill: f64) -> Self {
        assert!(resolution > 0.0 && dims.iter().all(|&d| d > 0));
        Self { origin, resolution, dims, data: vec![fill; dims[0] * dims[1] * dims[2]] }
    }

    /// Grid covering `[min, max]` so that every point of the box lies in the
    /// sampleable interior (one voxel of padding on each side).
    pub fn covering(min: Vector3<f64>, max: Vector3<f64>, resolution: f64, fill: f64) -> Self {
        let origin = min - Vector3::repeat(resolution);
        let dims = [
            ((max.x - min.x) / resolution).ceil() as usize + 3,
            ((max.y - min.y) / resolution).ceil() as usize + 3,
            ((max.z - min.z) / resolution).ceil() as usize + 3,
        ];
        Self::new(origin, resolution, dims, fill)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn linear(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    #[inline]
    pub fn unlinear(&self, l: usize) -> [usize; 3] {
        let x = l % self.dims[0];
        let r = l / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    /// World position of a voxel center. Centers sit at origin + (i + 1/2) h.
    #[inline]
    pub fn voxel_center(&self, i: [usize; 3]) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (i[0] as f64 + 0.5) * self.resolution,
                (i[1] as f64 + 0.5) * self.resolution,
                (i[2] as f64 + 0.5) * self.resolution,
            )
    }

    /// Voxel whose cell contains `p`, or None outside the grid volume.
    pub fn world_to_index(&self, p: Vector3<f64>) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.resolution;
            if f < 0.0 {
                return None;
            }
            let i = f as usize;
            if i >= self.dims[a] {
                return None;
            }
            idx[a] = i;
        }
        Some(idx)
    }

    #[inline]
    pub fn get(&self, i: [usize; 3]) -> f64 {
        self.data[self.linear(i)]
    }

    #[inline]
    pub fn set(&mut self, i: [usize; 3], v: f64) {
        let l = self.linear(i);
        self.data[l] = v;
    }

    /// True when `p` lies between the first and last voxel centers on every axis.
    pub fn in_interior(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|a| {
            let f = (p[a] - self.origin[a]) / self.resolution - 0.5;
            f >= 0.0 && f <= (self.dims[a] - 1) as f64
        })
    }

    /// Clamp `p` onto the sampleable interior.
    pub fn clamp_to_interior(&self, p: Vector3<f64>) -> Vector3<f64> {
        let mut q = p;
        for a in 0..3 {
            let lo = self.origin[a] + 0.5 * self.resolution;
            let hi = self.origin[a] + ((self.dims[a] - 1) as f64 + 0.5) * self.resolution;
            q[a] = q[a].clamp(lo, hi);
        }
        q
    }

    /// Corner cells and partition-of-unity weights for trilinear interpolation.
    pub fn support(&self, p: Vector3<f64>) -> Result<TrilinearSupport> {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.resolution - 0.5;
            if f < 0.0 || f > (self.dims[a] - 1) as f64 {
                return Err(Error::OutOfInterior([p.x, p.y, p.z]));
            }
            let mut i = f.floor() as usize;
            // exact upper boundary: step back one cell, fraction 1
            if i >= self.dims[a] - 1 {
                i = self.dims[a] - 2;
            }
            base[a] = i;
            frac[a] = f - i as f64;
        }
        let mut corners = [0usize; 8];
        let mut weights = [0f64; 8];
        for c in 0..8 {
            let dx = c & 1;
            let dy = (c >> 1) & 1;
            let dz = (c >> 2) & 1;
            corners[c] = self.linear([base[0] + dx, base[1] + dy, base[2] + dz]);
            let wx = if dx == 1 { frac[0] } else { 1.0 - frac[0] };
            let wy = if dy == 1 { frac[1] } else { 1.0 - frac[1] };
            let wz = if dz == 1 { frac[2] } else { 1.0 - frac[2] };
            weights[c] = wx * wy * wz;
        }
        Ok(TrilinearSupport { corners, weights })
    }

    /// 8-corner trilinear blend at `p`.
    pub fn trilinear_sample(&self, p: Vector3<f64>) -> Result<f64> {
        let s = self.support(p)?;
        Ok(s.corners.iter().zip(s.weights).map(|(&c, w)| self.data[c] * w).sum())
    }

    /// Adds `upstream * weight` into the 8 corners around `p`.
    pub fn trilinear_adjoint(&mut self, p: Vector3<f64>, upstream: f64) -> Result<()> {
        let s = self.support(p)?;
        for (&c, w) in s.corners.iter().zip(s.weights) {
            self.data[c] += upstream * w;
        }
        Ok(())
    }

    /// Binary dump: origin (3 x f64), resolution (f64), dims (3 x u32), then
    /// the raw f64 array, all little-endian, x-fastest.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        for v in [self.origin.x, self.origin.y, self.origin.z, self.resolution] {
            w.write_all(&v.to_le_bytes())?;
        }
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut f8 = [0u8; 8];
        let mut head = [0f64; 4];
        for h in &mut head {
            r.read_exact(&mut f8)?;
            *h = f64::from_le_bytes(f8);
        }
        let mut dims = [0usize; 3];
        let mut f4 = [0u8; 4];
        for d in &mut dims {
            r.read_exact(&mut f4)?;
            *d = u32::from_le_bytes(f4) as usize;
        }
        if head[3] <= 0.0 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Domain("invalid grid header".into()));
        }
        let mut data = vec![0f64; dims[0] * dims[1] * dims[2]];
        for v in &mut data {
            r.read_exact(&mut f8)?;
            *v = f64::from_le_bytes(f8);
        }
        Ok(Self { origin: Vector3::new(head[0], head[1], head[2]), resolution: head[3], dims, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(dims: [usize; 3]) -> VoxelGrid {
        VoxelGrid::new(Vector3::new(-0.3, 0.1, 0.0), 0.25, dims, 0.0)
    }

    #[test]
    fn index_round_trip() {
        let g = grid([4, 5, 6]);
        for l in 0..g.len() {
            let i = g.unlinear(l);
            assert_eq!(g.linear(i), l);
            assert_eq!(g.world_to_index(g.voxel_center(i)), Some(i));
        }
    }

    #[test]
    fn sample_at_center_is_exact() {
        let mut g = grid([4, 4, 4]);
        let i = [2, 1, 3];
        g.set(i, 7.25);
        assert_eq!(g.trilinear_sample(g.voxel_center(i)).unwrap(), 7.25);
    }

    #[test]
    fn sample_at_cell_center_is_mean() {
        let mut g = grid([3, 3, 3]);
        let mut sum = 0.0;
        for c in 0..8 {
            let i = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let v = (c * c) as f64 + 0.5;
            g.set(i, v);
            sum += v;
        }
        let p = (g.voxel_center([0, 0, 0]) + g.voxel_center([1, 1, 1])) * 0.5;
        assert!((g.trilinear_sample(p).unwrap() - sum / 8.0).abs() < 1e-12);
    }

    #[test]
    fn affine_fields_sampled_exactly() {
        let mut g = grid([5, 6, 4]);
        let (a, b, c, d) = (1.3, -0.7, 2.1, 0.4);
        for l in 0..g.len() {
            let p = g.voxel_center(g.unlinear(l));
            g.data[l] = a * p.x + b * p.y + c * p.z + d;
        }
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Vector3::new(
                rng.gen_range(-0.175..0.575),
                rng.gen_range(0.225..1.35),
                rng.gen_range(0.125..0.8),
            );
            let want = a * p.x + b * p.y + c * p.z + d;
            assert!((g.trilinear_sample(p).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_interior_rejected() {
        let g = grid([3, 3, 3]);
        assert!(g.trilinear_sample(Vector3::new(-100.0, 0.2, 0.2)).is_err());
        assert!(!g.in_interior(Vector3::new(-100.0, 0.2, 0.2)));
        let p = g.clamp_to_interior(Vector3::new(-100.0, 0.2, 0.2));
        assert!(g.in_interior(p));
    }

    #[test]
    fn adjoint_at_center_hits_one_voxel() {
        let mut g = grid([4, 4, 4]);
        g.trilinear_adjoint(g.voxel_center([1, 2, 1]), 1.0).unwrap();
        for l in 0..g.len() {
            let want = if g.unlinear(l) == [1, 2, 1] { 1.0 } else { 0.0 };
            assert_eq!(g.data[l], want);
        }
    }

    #[test]
    fn adjoint_matches_directional_derivative() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut g = grid([4, 5, 3]);
        for v in &mut g.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        for _ in 0..50 {
            let p = Vector3::new(
                rng.gen_range(-0.17..0.57),
                rng.gen_range(0.23..1.1),
                rng.gen_range(0.13..0.6),
            );
            let s = g.support(p).unwrap();
            let h = 1e-6;
            for (k, &c) in s.corners.iter().enumerate() {
                let base = g.trilinear_sample(p).unwrap();
                g.data[c] += h;
                let bumped = g.trilinear_sample(p).unwrap();
                g.data[c] -= h;
                assert!(((bumped - base) / h - s.weights[k]).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn weights_partition_of_unity(
            px in -0.17f64..0.57, py in 0.23f64..1.34, pz in 0.13f64..0.85
        ) {
            let g = grid([5, 6, 4]);
            let s = g.support(Vector3::new(px, py, pz)).unwrap();
            let sum: f64 = s.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.weights.iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn binary_round_trip(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut g = grid([3, 4, 2]);
            for v in &mut g.data {
                *v = rng.gen_range(-10.0..10.0);
            }
            let mut buf = Vec::new();
            g.write_binary(&mut buf).unwrap();
            let back = VoxelGrid::read_binary(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
