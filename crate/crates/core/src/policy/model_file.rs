//! Binary policy file: magic, version, length-prefixed JSON header, little-endian f64 parameters.

use serde::{Deserialize, Serialize};

use super::{Normalizer, Policy, PolicyConfig, PolicyNet};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"FGPOLICY";
pub const MODEL_VERSION: u32 = 1;
const MAX_HEADER: usize = 1 << 16;

#[derive(Serialize, Deserialize)]
struct Header {
    config: PolicyConfig,
    normalizer: Normalizer,
    mask_force: bool,
    param_count: usize,
}

fn bad(message: impl Into<String>) -> Error {
    Error::parse(0, message)
}

impl Policy {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            config: self.config().clone(),
            normalizer: self.normalizer.clone(),
            mask_force: self.mask_force,
            param_count: self.net.param_count(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.net.param_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MODEL_MAGIC {
            return Err(bad("not a policy file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != MODEL_VERSION {
            return Err(bad(format!("unsupported policy file version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        if hlen > MAX_HEADER || bytes.len() < 16 + hlen {
            return Err(bad("truncated policy header"));
        }
        let header: Header =
            serde_json::from_slice(&bytes[16..16 + hlen]).map_err(|e| bad(format!("policy header: {e}")))?;
        header.config.validate()?;
        let body = &bytes[16 + hlen..];
        if Some(body.len()) != header.param_count.checked_mul(8) {
            return Err(bad(format!(
                "expected {} parameters, found {} bytes",
                header.param_count,
                body.len()
            )));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        let n = &header.normalizer;
        if !(n.force_scale.is_finite() && n.force_scale > 0.0)
            || n.position_std.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || n.position_mean.iter().any(|m| !m.is_finite())
        {
            return Err(bad("invalid normalizer"));
        }
        let net = PolicyNet::from_params(header.config, params).map_err(|e| bad(e.to_string()))?;
        Ok(Policy {
            net,
            normalizer: header.normalizer,
            mask_force: header.mask_force,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = PolicyNet::new(PolicyConfig::new(4, 4), 3).unwrap();
        let p = Policy {
            net,
            normalizer: Normalizer::identity(),
            mask_force: true,
        };
        let back = Policy::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let net = PolicyNet::new(PolicyConfig::new(3, 1), 0).unwrap();
        let bytes = Policy {
            net,
            normalizer: Normalizer::identity(),
            mask_force: false,
        }
        .to_bytes();
        assert!(Policy::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Policy::from_bytes(b"FGPOLICY").is_err());
        assert!(Policy::from_bytes(&[0u8; 64]).is_err());
    }
}
