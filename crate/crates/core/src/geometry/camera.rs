use nalgebra::{Matrix4, Vector2};

use super::{Mat3, RigidTransform, Vec3, DEGENERACY_RATIO};
use crate::error::{Error, Result};

/// Pinhole camera: pixel intrinsics plus a world→camera extrinsic transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    intrinsics: Mat3,
    extrinsics: RigidTransform,
}

impl CameraModel {
    pub fn new(intrinsics: Mat3, extrinsics: RigidTransform) -> Result<Self> {
        let k = &intrinsics;
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(Error::Domain("intrinsics need positive focal entries".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::Domain("intrinsics must be upper triangular".into()));
        }
        if !k.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite intrinsics".into()));
        }
        Ok(Self { intrinsics, extrinsics })
    }

    /// Square-pixel camera with principal point `(cx, cy)`.
    pub fn pinhole(focal: f64, cx: f64, cy: f64, extrinsics: RigidTransform) -> Result<Self> {
        Self::new(Mat3::new(focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0), extrinsics)
    }

    /// Camera centered at `eye` looking at `target`, with world +z as up.
    pub fn look_at(focal: f64, cx: f64, cy: f64, eye: Vec3, target: Vec3) -> Result<Self> {
        let forward = (target - eye).normalize();
        let up = Vec3::z();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::Domain("look_at direction parallel to up axis".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let extrinsics = RigidTransform::new(rotation, -(rotation * eye))?;
        Self::pinhole(focal, cx, cy, extrinsics)
    }

    pub fn intrinsics(&self) -> &Mat3 {
        &self.intrinsics
    }

    pub fn extrinsics(&self) -> &RigidTransform {
        &self.extrinsics
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vec3 {
        *self.extrinsics.inverse().translation()
    }

    fn projection_rows(&self) -> nalgebra::Matrix3x4<f64> {
        let mut p = nalgebra::Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(self.extrinsics.rotation());
        p.fixed_view_mut::<3, 1>(0, 3).copy_from(self.extrinsics.translation());
        p
    }
}

/// The calibrated camera pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub names: [String; 2],
    pub cameras: [CameraModel; 2],
}

impl CameraRig {
    /// Two 640×480 cameras about 1 m from the tabletop workspace with a 0.9 m baseline.
    pub fn default_rig() -> Self {
        let target = Vec3::new(0.5, 0.0, 0.1);
        let a =
            CameraModel::look_at(615.0, 320.0, 240.0, Vec3::new(1.3, 0.45, 0.6), target).expect("default rig is valid");
        let b = CameraModel::look_at(615.0, 320.0, 240.0, Vec3::new(1.3, -0.45, 0.6), target)
            .expect("default rig is valid");
        Self {
            names: ["left".into(), "right".into()],
            cameras: [a, b],
        }
    }

    pub fn triangulate(&self, px_a: &Vector2<f64>, px_b: &Vector2<f64>) -> Result<Vec3> {
        triangulate(&self.cameras[0], px_a, &self.cameras[1], px_b)
    }
}

/// Perspective projection of a world point to pixels.
pub fn project(camera: &CameraModel, point: &Vec3) -> Result<Vector2<f64>> {
    let pc = camera.extrinsics.apply(point);
    if !(pc.z > 0.0) {
        return Err(Error::Domain(format!(
            "point at depth {:.3e} is not in front of the camera",
            pc.z
        )));
    }
    let uvw = camera.intrinsics * pc;
    Ok(Vector2::new(uvw.x / uvw.z, uvw.y / uvw.z))
}

/// Homogeneous DLT triangulation from two views, solved by SVD in normalized image coordinates.
pub fn triangulate(cam_a: &CameraModel, px_a: &Vector2<f64>, cam_b: &CameraModel, px_b: &Vector2<f64>) -> Result<Vec3> {
    let mut a = Matrix4::zeros();
    for (view, (cam, px)) in [(cam_a, px_a), (cam_b, px_b)].into_iter().enumerate() {
        let k_inv = cam
            .intrinsics
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular intrinsics".into()))?;
        let ray = k_inv * Vec3::new(px.x, px.y, 1.0);
        let (x, y) = (ray.x / ray.z, ray.y / ray.z);
        let p = cam.projection_rows();
        let row0 = p.row(2) * x - p.row(0);
        let row1 = p.row(2) * y - p.row(1);
        a.set_row(2 * view, &row0);
        a.set_row(2 * view + 1, &row1);
    }
    let svd = a.svd(false, true);
    let sv = svd.singular_values;
    let condition = if sv[0] > 0.0 { sv[2] / sv[0] } else { 0.0 };
    if !(condition >= DEGENERACY_RATIO) {
        return Err(Error::Degenerate {
            what: "two-view geometry",
            condition,
        });
    }
    let v_t = svd.v_t.expect("requested V^T");
    let x = v_t.row(3).transpose();
    let scale = x.norm();
    if !(x[3].abs() / scale >= DEGENERACY_RATIO) {
        return Err(Error::Degenerate {
            what: "two-view geometry (point at infinity)",
            condition: x[3].abs() / scale,
        });
    }
    Ok(Vec3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]))
}
