use serde::{Deserialize, Serialize};

use super::{Mat3, Vec3, DEGENERACY_RATIO};
use crate::error::{Error, Result};

/// First two columns of a rotation matrix, flattened column by column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation6D(pub [f64; 6]);

pub fn encode_rotation6d(r: &Mat3) -> Rotation6D {
    let c0 = r.column(0);
    let c1 = r.column(1);
    Rotation6D([c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]])
}

/// Gram–Schmidt on the two halves, third column by cross product.
pub fn decode_rotation6d(v: &Rotation6D) -> Result<Mat3> {
    let a = Vec3::new(v.0[0], v.0[1], v.0[2]);
    let b = Vec3::new(v.0[3], v.0[4], v.0[5]);
    let (na, nb) = (a.norm(), b.norm());
    if !(na.is_finite() && nb.is_finite()) || na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate {
            what: "6D rotation (zero half)",
            condition: 0.0,
        });
    }
    let e0 = a / na;
    let residual = b - e0 * e0.dot(&b);
    let condition = residual.norm() / nb;
    if condition < DEGENERACY_RATIO {
        return Err(Error::Degenerate {
            what: "6D rotation (parallel halves)",
            condition,
        });
    }
    let e1 = residual.normalize();
    let e2 = e0.cross(&e1);
    Ok(Mat3::from_columns(&[e0, e1, e2]))
}
