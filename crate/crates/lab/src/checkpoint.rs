//! KNN1 model checkpoints.
//!
//! ```text
//! "KNN1" | u32 version | u64 len | JSON {spec, param_count, dtype: "f32"} | u64 count | f32 params
//! ```
//!
//! Parameters are stored in layer order, each layer's weights before its
//! biases. Optimiser state is not saved.

use std::path::Path;

use krylov_core::nn::{Network, NetworkSpec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"KNN1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    param_count: usize,
    dtype: String,
}

pub fn encode(net: &Network<f32>) -> Vec<u8> {
    let header = Header {
        spec: net.spec().clone(),
        param_count: net.param_count(),
        dtype: "f32".into(),
    };
    let json = serde_json::to_vec(&header).expect("serialisable header");
    let mut buf = Vec::with_capacity(28 + json.len() + 4 * net.param_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf
}

fn take<'a>(data: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    if data.len() - *pos < n {
        return Err(LabError::format(*pos as u64, format!("truncated {what}")));
    }
    let s = &data[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

pub fn decode(data: &[u8]) -> Result<Network<f32>> {
    let mut pos = 0;
    if take(data, &mut pos, 4, "magic")? != MAGIC {
        return Err(LabError::format(0, "bad magic, expected \"KNN1\""));
    }
    let version = u32::from_le_bytes(take(data, &mut pos, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(LabError::format(4, format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(take(data, &mut pos, 8, "header length")?.try_into().unwrap());
    let at = pos as u64;
    let json = take(data, &mut pos, len as usize, "header")?;
    let header: Header = serde_json::from_slice(json)
        .map_err(|e| LabError::format(at, format!("bad header JSON: {e}")))?;
    if header.dtype != "f32" {
        return Err(LabError::format(at, format!("unsupported dtype {}", header.dtype)));
    }
    let mut net = Network::<f32>::new(header.spec)
        .map_err(|e| LabError::format(at, format!("bad architecture: {e}")))?;
    let at = pos as u64;
    let count = u64::from_le_bytes(take(data, &mut pos, 8, "parameter count")?.try_into().unwrap());
    if count as usize != net.param_count() || header.param_count != net.param_count() {
        return Err(LabError::format(
            at,
            format!("{count} parameters stored, architecture needs {}", net.param_count()),
        ));
    }
    let raw = take(data, &mut pos, 4 * net.param_count(), "parameters")?;
    if pos != data.len() {
        return Err(LabError::format(pos as u64, "trailing bytes after parameters"));
    }
    let params = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    net.set_params(params)?;
    Ok(net)
}

pub fn save_model(path: &Path, net: &Network<f32>) -> Result<()> {
    fsutil::atomic_write(path, &encode(net))
}

pub fn load_model(path: &Path) -> Result<Network<f32>> {
    decode(&fsutil::read(path)?)
}
