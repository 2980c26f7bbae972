//! Dataset bundle serialization.
//!
//! Layout (version 1, all integers little-endian u32 unless noted):
//!
//! ```text
//! magic   8 bytes  "HGNDATA\0"
//! version u32      1
//! M, N    u32, u32
//! M user ids, then N item ids, each as u32 length + UTF-8 bytes
//! per user: sequence length n, n item indices, train length, val length
//! ```
//!
//! Ids and sequences are written in internal index order, so preparing the
//! same input twice produces byte-identical bundles.

use super::{InteractionLog, SplitLog};
use crate::error::HgnError;
use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"HGNDATA\0";
const VERSION: u32 = 1;

pub fn write_bundle(split: &SplitLog, path: impl AsRef<Path>) -> Result<(), HgnError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| HgnError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| HgnError::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    write_u32(&mut w, VERSION).map_err(io_err)?;
    write_u32(&mut w, split.num_users() as u32).map_err(io_err)?;
    write_u32(&mut w, split.num_items() as u32).map_err(io_err)?;
    for id in &split.log.user_ids {
        write_str(&mut w, id).map_err(io_err)?;
    }
    for id in &split.log.item_ids {
        write_str(&mut w, id).map_err(io_err)?;
    }
    for u in 0..split.num_users() {
        let seq = &split.log.sequences[u];
        write_u32(&mut w, seq.len() as u32).map_err(io_err)?;
        for &item in seq {
            write_u32(&mut w, item).map_err(io_err)?;
        }
        let (t, v) = split.bounds(u);
        write_u32(&mut w, t as u32).map_err(io_err)?;
        write_u32(&mut w, (v - t) as u32).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<SplitLog, HgnError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HgnError::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(HgnError::Format("not a dataset bundle".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(HgnError::Format(format!(
            "unsupported bundle version {version} (expected {VERSION})"
        )));
    }
    let num_users = read_u32(&mut r)? as usize;
    let num_items = read_u32(&mut r)? as usize;

    let user_ids: Vec<String> = (0..num_users)
        .map(|_| read_str(&mut r))
        .collect::<Result<_, _>>()?;
    let item_ids: Vec<String> = (0..num_items)
        .map(|_| read_str(&mut r))
        .collect::<Result<_, _>>()?;

    let mut sequences = Vec::with_capacity(num_users);
    let mut bounds = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let n = read_u32(&mut r)? as usize;
        let mut seq = Vec::with_capacity(n);
        for _ in 0..n {
            let item = read_u32(&mut r)?;
            if item as usize >= num_items {
                return Err(HgnError::Format(format!(
                    "item index {item} out of range (N = {num_items})"
                )));
            }
            seq.push(item);
        }
        let train = read_u32(&mut r)? as usize;
        let val = read_u32(&mut r)? as usize;
        if train + val > n {
            return Err(HgnError::Format("split bounds exceed sequence".into()));
        }
        sequences.push(seq);
        bounds.push((train, train + val));
    }

    let user_index: HashMap<String, u32> = user_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    let item_index: HashMap<String, u32> = item_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();

    let log = InteractionLog {
        num_users,
        num_items,
        sequences,
        user_ids,
        item_ids,
        user_index,
        item_index,
    };
    SplitLog::new(log, bounds)
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), HgnError> {
    r.read_exact(buf)
        .map_err(|_| HgnError::Format("truncated bundle".into()))
}

fn read_u32(r: &mut impl Read) -> Result<u32, HgnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String, HgnError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(HgnError::Format("unreasonable string length".into()));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| HgnError::Format("invalid UTF-8 in id".into()))
}
