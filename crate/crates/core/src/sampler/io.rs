//! Latent matrix files and trace CSV.
//!
//! Latent file layout, all little-endian:
//!
//! ```text
//! magic    4 bytes  "LATB"
//! version  u32      1
//! blocks   u32
//! per block:
//!   part_id u32, rows u32, cols u32, frozen u8, 3 zero bytes,
//!   rows·cols f64 values in row-major order
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{LatentBlock, StepTrace};
use crate::error::{Error, Result};

pub const LATENT_MAGIC: &[u8; 4] = b"LATB";
pub const LATENT_VERSION: u32 = 1;

pub fn write_latents(out: &mut impl Write, blocks: &[LatentBlock]) -> std::io::Result<()> {
    out.write_all(LATENT_MAGIC)?;
    out.write_all(&LATENT_VERSION.to_le_bytes())?;
    out.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for b in blocks {
        let (rows, cols) = b.tokens.shape();
        for v in [b.part_id as u32, rows as u32, cols as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&[b.frozen as u8, 0, 0, 0])?;
        for r in 0..rows {
            for c in 0..cols {
                out.write_all(&b.tokens[(r, c)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_latents(input: &mut impl Read) -> Result<Vec<LatentBlock>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io("<latents>", e))?;
    let fail = |offset: usize, message: &str| Error::Format {
        path: "<latents>".into(),
        offset,
        message: message.into(),
    };
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| fail(pos, "truncated latent file"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != LATENT_MAGIC {
        return Err(fail(0, "bad magic"));
    }
    let u32_le = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let version = u32_le(take(4)?);
    if version != LATENT_VERSION {
        return Err(fail(4, "unsupported latent file version"));
    }
    let count = u32_le(take(4)?) as usize;
    let mut blocks = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let part_id = u32_le(take(4)?) as usize;
        let rows = u32_le(take(4)?) as usize;
        let cols = u32_le(take(4)?) as usize;
        let frozen = take(4)?[0] != 0;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        blocks.push(LatentBlock {
            part_id,
            tokens: DMatrix::from_row_slice(rows, cols, &values),
            frozen,
        });
    }
    Ok(blocks)
}

/// Columns: `step,t,alpha_c[_l<k>]…,lambda_t,norm_part_<id>…`, plus an optional
/// trailing column given by name and per-step values.
pub fn write_trace_csv(
    out: &mut impl Write,
    trace: &[StepTrace],
    extra: Option<(&str, &[f64])>,
) -> std::io::Result<()> {
    let Some(first) = trace.first() else {
        return writeln!(out, "step,t,alpha_c,lambda_t");
    };
    let mut header = vec!["step".to_string(), "t".into()];
    if first.alphas.len() == 1 {
        header.push("alpha_c".into());
    } else {
        header.extend((0..first.alphas.len()).map(|l| format!("alpha_c_l{l}")));
    }
    header.push("lambda_t".into());
    header.extend(first.norms.iter().map(|(id, _)| format!("norm_part_{id}")));
    if let Some((name, _)) = extra {
        header.push(name.into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in trace.iter().enumerate() {
        let mut cells = vec![row.step.to_string(), row.t.to_string()];
        cells.extend(row.alphas.iter().map(f64::to_string));
        cells.push(row.lambda.to_string());
        cells.extend(row.norms.iter().map(|(_, n)| n.to_string()));
        if let Some((_, values)) = extra {
            cells.push(values.get(i).map(f64::to_string).unwrap_or_default());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
