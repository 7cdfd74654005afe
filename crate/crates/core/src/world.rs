//! Synthetic box-world environments: analytic depth-camera rendering plus
//! exact SDF and surface oracles used for training targets and evaluation.
//!
//! Scenes are a bounding room shell plus solid axis-aligned boxes. The camera
//! frame is +z forward, +x right, +y down; depths are z-depths with 0.0 as
//! the invalid sentinel.

use crate::error::{Error, Result};
use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// 6-DoF pose: position plus unit quaternion. Camera forward is body +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    /// Pose at `position` looking along `forward` with zero roll (camera +x
    /// kept horizontal). Falls back to the world x axis when `forward` is
    /// (anti)parallel to world up.
    pub fn looking(position: Vector3<f64>, forward: Vector3<f64>) -> Self {
        let f = forward.normalize();
        let mut right = f.cross(&WORLD_UP);
        if right.norm() < 1e-9 {
            right = Vector3::new(1.0, 0.0, 0.0);
        } else {
            right = right.normalize();
        }
        let down = f.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
            right, down, f,
        ]));
        Self { position, orientation: UnitQuaternion::from_rotation_matrix(&rot) }
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.orientation * Vector3::new(0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn min_v(&self) -> Vector3<f64> {
        Vector3::from(self.min)
    }

    pub fn max_v(&self) -> Vector3<f64> {
        Vector3::from(self.max)
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// SDF of the solid box: negative inside.
    pub fn sdf(&self, p: Vector3<f64>) -> f64 {
        let mut q = [0f64; 3];
        for a in 0..3 {
            q[a] = (self.min[a] - p[a]).max(p[a] - self.max[a]);
        }
        let outside = Vector3::new(q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)).norm();
        let inside = q[0].max(q[1]).max(q[2]).min(0.0);
        outside + inside
    }

    /// Smallest positive t where the ray enters the box, for origins outside.
    pub fn ray_enter(&self, o: Vector3<f64>, d: Vector3<f64>) -> Option<f64> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for a in 0..3 {
            if d[a].abs() < 1e-15 {
                if o[a] < self.min[a] || o[a] > self.max[a] {
                    return None;
                }
            } else {
                let inv = 1.0 / d[a];
                let (t0, t1) = ((self.min[a] - o[a]) * inv, (self.max[a] - o[a]) * inv);
                t_enter = t_enter.max(t0.min(t1));
                t_exit = t_exit.min(t0.max(t1));
            }
        }
        if t_enter <= t_exit && t_enter > 0.0 {
            Some(t_enter)
        } else {
            None
        }
    }

    /// First positive t where a ray starting inside leaves the box.
    pub fn ray_exit(&self, o: Vector3<f64>, d: Vector3<f64>) -> Option<f64> {
        let mut t_exit = f64::INFINITY;
        for a in 0..3 {
            if d[a].abs() >= 1e-15 {
                let inv = 1.0 / d[a];
                let (t0, t1) = ((self.min[a] - o[a]) * inv, (self.max[a] - o[a]) * inv);
                t_exit = t_exit.min(t0.max(t1));
            }
        }
        if t_exit.is_finite() && t_exit > 0.0 {
            Some(t_exit)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        // Desk-scale defaults: 90 deg horizontal FoV.
        Self { width: 160, height: 120, focal: 80.0, min_range: 0.05, max_range: 8.0 }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.focal <= 0.0 {
            return Err(Error::Config("camera dimensions and focal must be positive".into()));
        }
        if !(0.0 < self.min_range && self.min_range < self.max_range) {
            return Err(Error::Config("need 0 < min_range < max_range".into()));
        }
        Ok(())
    }

    /// Unit camera-frame direction through the center of pixel (u, v).
    pub fn pixel_dir(&self, u: usize, v: usize) -> Vector3<f64> {
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        Vector3::new(
            (u as f64 + 0.5 - cx) / self.focal,
            (v as f64 + 0.5 - cy) / self.focal,
            1.0,
        )
        .normalize()
    }

    /// Mean of horizontal and vertical FoV, in radians.
    pub fn mean_fov(&self) -> f64 {
        let h = 2.0 * (self.width as f64 / (2.0 * self.focal)).atan();
        let v = 2.0 * (self.height as f64 / (2.0 * self.focal)).atan();
        0.5 * (h + v)
    }
}

#[derive(Debug, Clone)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    /// Row-major height x width z-depths; 0.0 marks an invalid pixel.
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub fn depth(&self, u: usize, v: usize) -> f64 {
        self.depths[v * self.intrinsics.width + u]
    }

    /// World point of a valid pixel, from its z-depth.
    pub fn unproject(&self, u: usize, v: usize) -> Vector3<f64> {
        let k = &self.intrinsics;
        let z = self.depth(u, v);
        let cx = k.width as f64 / 2.0;
        let cy = k.height as f64 / 2.0;
        let cam = Vector3::new(
            (u as f64 + 0.5 - cx) / k.focal * z,
            (v as f64 + 0.5 - cy) / k.focal * z,
            z,
        );
        self.pose.position + self.pose.orientation * cam
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub bounds: Aabb,
    pub boxes: Vec<Aabb>,
    pub spawn: Pose,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    bounds: Aabb,
    boxes: Vec<Aabb>,
    spawn: SpawnFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnFile {
    position: [f64; 3],
    /// Unit quaternion as [w, x, y, z].
    quaternion: [f64; 4],
}

impl Scene {
    pub fn new(bounds: Aabb, boxes: Vec<Aabb>, spawn: Pose) -> Result<Self> {
        let s = Self { bounds, boxes, spawn };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.boxes {
            if (0..3).any(|a| b.max[a] <= b.min[a]) {
                return Err(Error::Config(format!("box {b:?} has non-positive extent")));
            }
            if (0..3).any(|a| b.min[a] < self.bounds.min[a] || b.max[a] > self.bounds.max[a]) {
                return Err(Error::Config(format!("box {b:?} outside bounds")));
            }
        }
        if self.gt_sdf(self.spawn.position) <= 0.0 {
            return Err(Error::Config("spawn position is not in free space".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SceneFile = serde_json::from_str(text)?;
        let q = f.spawn.quaternion;
        let quat = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            q[0], q[1], q[2], q[3],
        ));
        Self::new(f.bounds, f.boxes, Pose::new(Vector3::from(f.spawn.position), quat))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let q = self.spawn.orientation.quaternion();
        let f = SceneFile {
            bounds: self.bounds,
            boxes: self.boxes.clone(),
            spawn: SpawnFile {
                position: [self.spawn.position.x, self.spawn.position.y, self.spawn.position.z],
                quaternion: [q.w, q.i, q.j, q.k],
            },
        };
        serde_json::to_string_pretty(&f).expect("scene serializes")
    }

    /// Signed distance to the solid union: the boxes plus the region outside
    /// the bounds shell. Negative inside a box or outside the bounds.
    pub fn gt_sdf(&self, p: Vector3<f64>) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..3 {
            d = d.min(p[a] - self.bounds.min[a]).min(self.bounds.max[a] - p[a]);
        }
        for b in &self.boxes {
            d = d.min(b.sdf(p));
        }
        d
    }

    /// Smallest positive hit distance along a ray, against boxes and the
    /// bounds shell. Errors if the origin is inside a box.
    pub fn ray_intersect(&self, origin: Vector3<f64>, dir: Vector3<f64>) -> Result<Option<f64>> {
        for b in &self.boxes {
            if b.sdf(origin) < 0.0 {
                return Err(Error::Domain("ray origin inside a solid box".into()));
            }
        }
        let mut best = self.bounds.ray_exit(origin, dir);
        for b in &self.boxes {
            if let Some(t) = b.ray_enter(origin, dir) {
                best = Some(best.map_or(t, |c: f64| c.min(t)));
            }
        }
        Ok(best)
    }

    /// Analytic z-depth render. Deterministic; hits beyond max_range or
    /// closer than min_range come back as 0.0.
    pub fn render_depth(&self, pose: Pose, k: &CameraIntrinsics) -> Result<DepthImage> {
        k.validate()?;
        let mut depths = vec![0f64; k.width * k.height];
        for v in 0..k.height {
            for u in 0..k.width {
                let dir_cam = k.pixel_dir(u, v);
                let dir_world = pose.orientation * dir_cam;
                if let Some(t) = self.ray_intersect(pose.position, dir_world)? {
                    let z = t * dir_cam.z;
                    if z >= k.min_range && z <= k.max_range {
                        depths[v * k.width + u] = z;
                    }
                }
            }
        }
        Ok(DepthImage { intrinsics: *k, pose, depths })
    }

    /// Regular samples on every box face and the interior of the bounds
    /// shell, dropping points lying in or on another solid.
    pub fn gt_surface_samples(&self, spacing: f64) -> Vec<Vector3<f64>> {
        assert!(spacing > 0.0);
        const TOL: f64 = 1e-9;
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut push = |p: Vector3<f64>, skip_box: Option<usize>, scene: &Scene| {
            // drop anything inside/on another solid
            for (j, b) in scene.boxes.iter().enumerate() {
                if Some(j) != skip_box && b.sdf(p) < TOL {
                    return;
                }
            }
            if skip_box.is_some() {
                // box-face sample on (or outside) the bounds shell is internal
                let mut shell = f64::INFINITY;
                for a in 0..3 {
                    shell = shell.min(p[a] - scene.bounds.min[a]).min(scene.bounds.max[a] - p[a]);
                }
                if shell < TOL {
                    return;
                }
            }
            let key = (
                (p.x / TOL).round() as i64,
                (p.y / TOL).round() as i64,
                (p.z / TOL).round() as i64,
            );
            if seen.insert(key) {
                out.push(p);
            }
        };

        let face_lattice = |bb: &Aabb, mut emit: Box<dyn FnMut(Vector3<f64>) + '_>| {
            for axis in 0..3 {
                let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                let n1 = ((bb.max[a1] - bb.min[a1]) / spacing).ceil().max(1.0) as usize;
                let n2 = ((bb.max[a2] - bb.min[a2]) / spacing).ceil().max(1.0) as usize;
                for side in [bb.min[axis], bb.max[axis]] {
                    for i in 0..=n1 {
                        for j in 0..=n2 {
                            let mut p = Vector3::zeros();
                            p[axis] = side;
                            p[a1] = bb.min[a1] + (bb.max[a1] - bb.min[a1]) * i as f64 / n1 as f64;
                            p[a2] = bb.min[a2] + (bb.max[a2] - bb.min[a2]) * j as f64 / n2 as f64;
                            emit(p);
                        }
                    }
                }
            }
        };

        let boxes = self.boxes.clone();
        for (bi, b) in boxes.iter().enumerate() {
            face_lattice(b, Box::new(|p| push(p, Some(bi), self)));
        }
        face_lattice(&self.bounds.clone(), Box::new(|p| push(p, None, self)));
        out
    }
}

/// Scene (a): a single empty 4 x 4 x 2.5 m room.
pub fn scene_single_room() -> Scene {
    Scene::new(
        Aabb::new([0.0, 0.0, 0.0], [4.0, 4.0, 2.5]),
        vec![],
        Pose::looking(Vector3::new(2.0, 2.0, 1.2), Vector3::new(1.0, 0.0, 0.0)),
    )
    .expect("valid bundled scene")
}

/// Scene (b): two rooms joined by a single 0.9 m doorway.
pub fn scene_two_rooms() -> Scene {
    Scene::new(
        Aabb::new([0.0, 0.0, 0.0], [8.0, 4.0, 2.5]),
        vec![
            Aabb::new([3.9, 0.0, 0.0], [4.1, 1.5, 2.5]),
            Aabb::new([3.9, 2.4, 0.0], [4.1, 4.0, 2.5]),
        ],
        Pose::looking(Vector3::new(2.0, 2.0, 1.2), Vector3::new(1.0, 0.0, 0.0)),
    )
    .expect("valid bundled scene")
}

/// Scene (c): four-room 10 x 8 x 2.5 m apartment around a central corridor.
pub fn scene_apartment() -> Scene {
    let mut boxes = Vec::new();
    // corridor walls with door gaps at x in [2.2, 3.2] and [7.0, 8.0]
    for y in [[3.2, 3.4], [4.6, 4.8]] {
        boxes.push(Aabb::new([0.0, y[0], 0.0], [2.2, y[1], 2.5]));
        boxes.push(Aabb::new([3.2, y[0], 0.0], [7.0, y[1], 2.5]));
        boxes.push(Aabb::new([8.0, y[0], 0.0], [10.0, y[1], 2.5]));
    }
    // room dividers
    boxes.push(Aabb::new([4.9, 0.0, 0.0], [5.1, 3.2, 2.5]));
    boxes.push(Aabb::new([4.9, 4.8, 0.0], [5.1, 8.0, 2.5]));
    Scene::new(
        Aabb::new([0.0, 0.0, 0.0], [10.0, 8.0, 2.5]),
        boxes,
        Pose::looking(Vector3::new(1.0, 4.0, 1.2), Vector3::new(1.0, 0.0, 0.0)),
    )
    .expect("valid bundled scene")
}
