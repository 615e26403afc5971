//! Binary checkpoint: `DHC1` + version byte, a UTF-8 header ending in a
//! blank line, then every parameter as little-endian f64 in manifest order.
//!
//! Header layout:
//!
//! ```text
//! step = <optimizer steps taken>
//! taxonomy_hash = <16 hex digits>
//! [taxonomy]
//! <taxonomy file>
//! [config]
//! <config file>
//! [params]
//! <name> <rows> <cols> <byte offset>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::hierarchy::CategoryTree;
use crate::model::DhcModel;
use crate::nncore::{Matrix, Rng};

pub const MAGIC: &[u8; 4] = b"DHC1";
pub const FORMAT_VERSION: u8 = 1;

pub fn encode_checkpoint(model: &DhcModel, config: &TrainConfig) -> Vec<u8> {
    let tree = model.tree();
    let mut header = String::new();
    let _ = writeln!(header, "step = {}", model.params().step());
    let _ = writeln!(header, "taxonomy_hash = {:016x}", tree.fingerprint());
    header.push_str("[taxonomy]\n");
    header.push_str(&tree.to_taxonomy_string());
    header.push_str("[config]\n");
    header.push_str(&config.to_config_string());
    header.push_str("[params]\n");
    let mut offset = 0usize;
    for p in model.params().iter() {
        let _ = writeln!(header, "{} {} {} {}", p.name, p.value.rows(), p.value.cols(), offset);
        offset += p.value.as_slice().len() * 8;
    }
    header.push('\n');

    let mut out = Vec::with_capacity(5 + header.len() + offset);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(header.as_bytes());
    for p in model.params().iter() {
        for v in p.value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Rebuilds the model and config. With `expected` set, the stored taxonomy
/// must hash to the same fingerprint.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<&CategoryTree>) -> Result<(DhcModel, TrainConfig)> {
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(Error::Version("not a DHC1 checkpoint".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Version(format!(
            "format version {} (this build reads {FORMAT_VERSION})",
            bytes[4]
        )));
    }
    let body = &bytes[5..];
    let end = body
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(&body[..end + 1]).map_err(|_| bad("header is not UTF-8"))?;
    let data = &body[end + 2..];

    let mut step = None;
    let mut hash = None;
    let (mut taxonomy, mut config, mut manifest) = (String::new(), String::new(), Vec::new());
    let mut section = "";
    for line in header.lines() {
        match line {
            "[taxonomy]" | "[config]" | "[params]" => {
                section = line;
                continue;
            }
            _ => {}
        }
        match section {
            "" => {
                let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("bad header line `{line}`")))?;
                match k {
                    "step" => step = Some(v.parse::<u64>().map_err(|_| bad("bad step"))?),
                    "taxonomy_hash" => {
                        hash = Some(u64::from_str_radix(v, 16).map_err(|_| bad("bad taxonomy hash"))?)
                    }
                    _ => return Err(bad(format!("unknown header key `{k}`"))),
                }
            }
            "[taxonomy]" => {
                taxonomy.push_str(line);
                taxonomy.push('\n');
            }
            "[config]" => {
                config.push_str(line);
                config.push('\n');
            }
            _ => {
                let f: Vec<&str> = line.split(' ').collect();
                let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad manifest line `{line}`")));
                if f.len() != 4 {
                    return Err(bad(format!("bad manifest line `{line}`")));
                }
                manifest.push(ManifestEntry {
                    name: f[0].to_string(),
                    rows: num(f[1])?,
                    cols: num(f[2])?,
                    offset: num(f[3])?,
                });
            }
        }
    }
    let step = step.ok_or_else(|| bad("missing step"))?;
    let hash = hash.ok_or_else(|| bad("missing taxonomy hash"))?;

    let tree = CategoryTree::load(&taxonomy)?;
    if tree.fingerprint() != hash {
        return Err(bad("stored taxonomy does not match its hash"));
    }
    if let Some(t) = expected {
        if t.fingerprint() != hash {
            return Err(bad(format!(
                "taxonomy hash mismatch: checkpoint {hash:016x}, supplied {:016x}",
                t.fingerprint()
            )));
        }
    }
    let config = TrainConfig::parse(&config)?;
    let mut model = DhcModel::new(&tree, &config.model_config(), &mut Rng::new(0))?;

    if manifest.len() != model.params().len() {
        return Err(bad(format!(
            "{} stored parameters, model has {}",
            manifest.len(),
            model.params().len()
        )));
    }
    let mut expected_offset = 0usize;
    for entry in &manifest {
        let id = model
            .params()
            .id(&entry.name)
            .ok_or_else(|| bad(format!("unexpected parameter `{}`", entry.name)))?;
        let target = model.params_mut().value_mut(id);
        if target.shape() != (entry.rows, entry.cols) {
            return Err(bad(format!(
                "`{}` is {}x{}, model expects {:?}",
                entry.name, entry.rows, entry.cols, target.shape()
            )));
        }
        if entry.offset != expected_offset {
            return Err(bad(format!("`{}` at offset {}, expected {expected_offset}", entry.name, entry.offset)));
        }
        let len = entry.rows * entry.cols * 8;
        let chunk = data
            .get(entry.offset..entry.offset + len)
            .ok_or_else(|| bad(format!("truncated data for `{}`", entry.name)))?;
        let values = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        *target = Matrix::from_vec(entry.rows, entry.cols, values)?;
        expected_offset += len;
    }
    if data.len() != expected_offset {
        return Err(bad(format!("{} trailing bytes", data.len() - expected_offset)));
    }
    model.params_mut().set_step(step);
    Ok((model, config))
}

pub fn save_checkpoint(model: &DhcModel, config: &TrainConfig, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, config)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(DhcModel, TrainConfig)> {
    load_checkpoint_checked(path, None)
}

pub fn load_checkpoint_checked(path: &Path, expected: Option<&CategoryTree>) -> Result<(DhcModel, TrainConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expected)
}
