//! Calibrated two-view geometry, rigid transforms and rotation encodings.

mod camera;
mod rigid;
mod rotation6d;

pub use camera::{project, triangulate, CameraModel, CameraRig};
pub use rigid::{kabsch, rotation_angle, RigidTransform};
pub use rotation6d::{decode_rotation6d, encode_rotation6d, Rotation6D};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Smallest-to-largest singular value ratio below which a problem is treated as rank deficient.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// Tolerance used when validating orthonormal rotation blocks.
pub const ROTATION_TOL: f64 = 1e-9;

pub(crate) fn is_rotation(r: &Mat3, tol: f64) -> bool {
    let gram = r.transpose() * r - Mat3::identity();
    gram.iter().all(|v| v.abs() <= tol) && (r.determinant() - 1.0).abs() <= tol
}
