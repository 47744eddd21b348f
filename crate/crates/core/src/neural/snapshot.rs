// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Binary parameter snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content                                           |
//! |-------|---------------------------------------------------|
//! | 8     | magic `QTPOLICY`                                  |
//! | 4     | format version (`u32`, currently 1)               |
//! | 1     | architecture tag: 0 dense, 1 LSTM                 |
//! | 4     | input length `n_in` (`u32`)                       |
//! | 4     | descriptor count `k` (`u32`)                      |
//! | 4·k   | dense hidden widths, or LSTM `units, head` (`u32`) |
//! | 8     | `μ*` (`f64`)                                      |
//! | 8     | seed (`u64`)                                      |
//! | 8     | parameter count (`u64`)                           |
//! | 8·n   | parameters (`f64`) in layer order, row-major      |

use std::io::{Read, Write};

use super::{Architecture, PolicyNetwork};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"QTPOLICY";
const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(net: &PolicyNetwork, seed: u64, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let (tag, desc) = match net.architecture() {
        Architecture::Dense { hidden } => (0u8, hidden),
        Architecture::Lstm { units, head } => (1u8, vec![units, head]),
    };
    out.write_all(&[tag])?;
    out.write_all(&(net.input_len() as u32).to_le_bytes())?;
    out.write_all(&(desc.len() as u32).to_le_bytes())?;
    for d in desc {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    out.write_all(&net.mu_star().to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&(net.param_count() as u64).to_le_bytes())?;
    for p in net.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

/// Returns the network and the seed stored in the header.
pub fn read_snapshot<R: Read>(mut input: R) -> Result<(PolicyNetwork, u64)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let mut tag = [0u8; 1];
    input.read_exact(&mut tag)?;
    let n_in = read_u32(&mut input)? as usize;
    let k = read_u32(&mut input)? as usize;
    if k > 1024 {
        return Err(Error::Snapshot(format!("implausible descriptor length {k}")));
    }
    let desc = (0..k)
        .map(|_| read_u32(&mut input).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let arch = match (tag[0], desc.as_slice()) {
        (0, _) => Architecture::Dense { hidden: desc },
        (1, &[units, head]) => Architecture::Lstm { units, head },
        (t, _) => return Err(Error::Snapshot(format!("unknown architecture tag {t} with descriptor {desc:?}"))),
    };
    let mu_star = f64::from_le_bytes(read_array(&mut input)?);
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let mut net = PolicyNetwork::zeros(&arch, n_in, mu_star)?;
    if count != net.param_count() {
        return Err(Error::Snapshot(format!(
            "header declares {count} parameters, architecture needs {}",
            net.param_count()
        )));
    }
    for p in net.params_mut() {
        *p = f64::from_le_bytes(read_array(&mut input)?);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after parameters".into()));
    }
    Ok((net, seed))
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| Error::Snapshot(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(input)?))
}
