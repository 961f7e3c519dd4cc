//! Versioned text checkpoints.
//!
//! Layout: a magic line, one variant-header line, then one block per tensor
//! in canonical order. Values print with 17 significant digits, which
//! round-trips every finite f64 bit-exactly.

use std::fs;
use std::path::Path;

use crate::cells::{CellFamily, CellParams, VariantConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "gustcast-checkpoint v1";

pub fn save_checkpoint(params: &CellParams, path: &Path) -> Result<()> {
    params.validate()?;
    if !params.is_finite() {
        return Err(Error::NonFinite("checkpoint parameters"));
    }
    let v = params.variant;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!(
        "family={} cifg={} peephole={} compression={} input_dim={} cell_dim={}\n",
        v.family().as_str(),
        v.cifg() as u8,
        v.peephole() as u8,
        v.compression() as u8,
        v.input_dim(),
        v.cell_dim()
    ));
    for ((name, rows, cols), data) in params.tensor_specs().iter().zip(params.slices()) {
        out.push_str(&format!("tensor {name} {rows} {cols}\n"));
        for r in 0..*rows {
            let row = &data[r * cols..(r + 1) * cols];
            for (k, value) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{value:.16e}"));
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<CellParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::CheckpointParse("empty file".into()))?
        .trim_end();
    if magic != MAGIC {
        return Err(Error::VersionMismatch {
            expected: MAGIC.into(),
            got: magic.into(),
        });
    }
    let header = lines
        .next()
        .ok_or_else(|| Error::CheckpointParse("missing variant header".into()))?;
    let variant = parse_header(header)?;
    let mut params = CellParams::zeros(variant);
    let specs = params.tensor_specs();
    {
        let mut slices = params.slices_mut();
        for (k, (name, rows, cols)) in specs.iter().enumerate() {
            let tag = lines
                .next()
                .ok_or_else(|| Error::CheckpointParse(format!("truncated before tensor {name}")))?;
            let toks: Vec<&str> = tag.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "tensor" {
                return Err(Error::CheckpointParse(format!("expected a tensor block, got {tag:?}")));
            }
            let got_rows: usize = toks[2]
                .parse()
                .map_err(|_| Error::CheckpointParse(format!("bad row count {:?} for tensor {name}", toks[2])))?;
            let got_cols: usize = toks[3]
                .parse()
                .map_err(|_| Error::CheckpointParse(format!("bad column count {:?} for tensor {name}", toks[3])))?;
            if toks[1] != *name || got_rows != *rows || got_cols != *cols {
                return Err(Error::CheckpointShape(format!(
                    "expected tensor {name} {rows}x{cols}, got {} {got_rows}x{got_cols}",
                    toks[1]
                )));
            }
            let dst = &mut slices[k];
            for r in 0..*rows {
                let line = lines.next().ok_or_else(|| {
                    Error::CheckpointParse(format!("truncated inside tensor {name} at row {r}"))
                })?;
                let mut col = 0;
                for tok in line.split_whitespace() {
                    if col >= *cols {
                        return Err(Error::CheckpointShape(format!(
                            "tensor {name} row {r} has more than {cols} values"
                        )));
                    }
                    dst[r * cols + col] = tok.parse().map_err(|_| {
                        Error::CheckpointParse(format!("bad number {tok:?} in tensor {name}"))
                    })?;
                    col += 1;
                }
                if col != *cols {
                    return Err(Error::CheckpointShape(format!(
                        "tensor {name} row {r} has {col} values, expected {cols}"
                    )));
                }
            }
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::CheckpointParse("trailing content after the final tensor".into()));
    }
    params.validate()?;
    Ok(params)
}

fn parse_header(line: &str) -> Result<VariantConfig> {
    const KEYS: [&str; 6] = ["family", "cifg", "peephole", "compression", "input_dim", "cell_dim"];
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != KEYS.len() {
        return Err(Error::CheckpointParse(format!(
            "variant header needs {} fields, got {}",
            KEYS.len(),
            toks.len()
        )));
    }
    let mut vals = Vec::with_capacity(KEYS.len());
    for (tok, key) in toks.iter().zip(KEYS) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::CheckpointParse(format!("bad header field {tok:?}")))?;
        if k != key {
            return Err(Error::CheckpointParse(format!("expected header key {key}, got {k}")));
        }
        vals.push(v);
    }
    let family: CellFamily = vals[0].parse()?;
    let flag = |s: &str, key: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::CheckpointParse(format!("flag {key} must be 0 or 1, got {other:?}"))),
    };
    let cifg = flag(vals[1], "cifg")?;
    let peephole = flag(vals[2], "peephole")?;
    let compression = flag(vals[3], "compression")?;
    let input_dim: usize = vals[4]
        .parse()
        .map_err(|_| Error::CheckpointParse(format!("bad input_dim {:?}", vals[4])))?;
    let cell_dim: usize = vals[5]
        .parse()
        .map_err(|_| Error::CheckpointParse(format!("bad cell_dim {:?}", vals[5])))?;
    VariantConfig::new(family, cifg, peephole, compression, input_dim, cell_dim)
}
