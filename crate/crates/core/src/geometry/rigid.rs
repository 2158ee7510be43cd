use nalgebra::{Matrix3xX, Rotation3, Unit};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{encode_rotation6d, is_rotation, Mat3, Vec3, DEGENERACY_RATIO, ROTATION_TOL};
use crate::error::{Error, Result};

/// A proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotation blocks that are not orthonormal with det +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !is_rotation(&rotation, ROTATION_TOL) {
            return Err(Error::Domain("rotation block is not a proper rotation".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Rotation about `axis` by `angle` radians, then translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn with_translation(mut self, translation: Vec3) -> Self {
        self.translation = translation;
        self
    }

    pub fn with_rotation(mut self, rotation: Mat3) -> Self {
        self.rotation = rotation;
        self
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// 4×4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &nalgebra::Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Domain("homogeneous matrix bottom row must be 0 0 0 1".into()));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }
}

/// Angle (radians) of the relative rotation `a⁻¹ b`.
pub fn rotation_angle(a: &Mat3, b: &Mat3) -> f64 {
    let rel = a.transpose() * b;
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Least-squares rigid transform taking `source` onto `target`
/// (orthogonal Procrustes with reflection correction).
pub fn kabsch(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::contract(format!(
            "kabsch needs equal point counts, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::Degenerate {
            what: "point set (fewer than 3 points)",
            condition: 0.0,
        });
    }
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;

    let src = Matrix3xX::from_iterator(
        source.len(),
        source
            .iter()
            .flat_map(|p| (p - cs).into_iter().copied().collect::<Vec<_>>()),
    );
    let dst = Matrix3xX::from_iterator(
        target.len(),
        target
            .iter()
            .flat_map(|p| (p - ct).into_iter().copied().collect::<Vec<_>>()),
    );

    for (pts, what) in [(&src, "source points (collinear)"), (&dst, "target points (collinear)")] {
        let sv = pts.clone().svd(false, false).singular_values;
        let condition = if sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
        if condition < DEGENERACY_RATIO {
            return Err(Error::Degenerate { what, condition });
        }
    }

    let h: Mat3 = &src * dst.transpose();
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    let translation = ct - rotation * cs;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    translation: [f64; 3],
    rotation6d: [f64; 6],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRepr {
            translation: [self.translation.x, self.translation.y, self.translation.z],
            rotation6d: encode_rotation6d(&self.rotation).0,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(d)?;
        let rot = super::decode_rotation6d(&super::Rotation6D(repr.rotation6d)).map_err(serde::de::Error::custom)?;
        Ok(RigidTransform::from_parts_unchecked(rot, Vec3::from(repr.translation)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use nalgebra::UnitQuaternion;
    use rand::Rng;

    fn random_transform(rng: &mut impl Rng) -> RigidTransform {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        RigidTransform::new(*q.to_rotation_matrix().matrix(), t).unwrap()
    }

    fn random_cloud(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    fn max_abs(m: &Mat3) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = rng_for(1, "rigid", 0);
        for _ in 0..100 {
            let t = random_transform(&mut rng);
            let id = t.compose(&t.inverse());
            assert!(max_abs(&(id.rotation - Mat3::identity())) < 1e-9);
            assert!(id.translation.norm() < 1e-9);
        }
    }

    #[test]
    fn kabsch_identity_case() {
        let mut rng = rng_for(2, "rigid", 0);
        let pts = random_cloud(&mut rng, 6);
        let t = kabsch(&pts, &pts).unwrap();
        assert!(max_abs(&(t.rotation - Mat3::identity())) < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn kabsch_recovers_known_transform() {
        let mut rng = rng_for(3, "rigid", 0);
        for _ in 0..100 {
            let truth = random_transform(&mut rng);
            let src = random_cloud(&mut rng, 8);
            let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
            let est = kabsch(&src, &dst).unwrap();
            assert!(max_abs(&(est.rotation - truth.rotation)) < 1e-9);
            assert!((est.translation - truth.translation).norm() < 1e-9);
            assert!(is_rotation(&est.rotation, 1e-9));
        }
    }

    #[test]
    fn kabsch_corrects_reflection() {
        let src = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 0.0),
        ];
        let mirrored: Vec<_> = src.iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        let est = kabsch(&src, &mirrored).unwrap();
        assert!((est.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kabsch_equivariance_under_rigid_motion() {
        let mut rng = rng_for(4, "rigid", 0);
        for _ in 0..20 {
            let truth = random_transform(&mut rng);
            let g = random_transform(&mut rng);
            let src = random_cloud(&mut rng, 5);
            let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
            let base = kabsch(&src, &dst).unwrap();
            let gs: Vec<_> = src.iter().map(|p| g.apply(p)).collect();
            let gd: Vec<_> = dst.iter().map(|p| g.apply(p)).collect();
            let moved = kabsch(&gs, &gd).unwrap();
            let conj = g.compose(&base).compose(&g.inverse());
            assert!(max_abs(&(moved.rotation - conj.rotation)) < 1e-8);
            assert!((moved.translation - conj.translation).norm() < 1e-8);
        }
    }

    #[test]
    fn kabsch_rejects_collinear_and_short_inputs() {
        let line: Vec<_> = (0..3).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(kabsch(&line, &line), Err(Error::Degenerate { .. })));
        let two = &line[..2];
        assert!(matches!(kabsch(two, two), Err(Error::Degenerate { .. })));
        assert!(matches!(kabsch(&line, two), Err(Error::Contract(_))));
    }

    #[test]
    fn homogeneous_round_trip() {
        let mut rng = rng_for(5, "rigid", 0);
        let t = random_transform(&mut rng);
        let back = RigidTransform::from_homogeneous(&t.to_homogeneous()).unwrap();
        assert_eq!(back, t);
    }
}
