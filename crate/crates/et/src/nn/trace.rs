//! Attention matrices captured during a forward pass.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::tensor::TensorError;

/// One attention call: head-averaged matrix plus the raw per-head matrices,
/// all post-softmax (rows are probability vectors).
#[derive(Clone, Debug)]
pub struct TraceLayer {
    pub q_len: usize,
    pub k_len: usize,
    pub avg: Vec<f64>,
    pub heads: Vec<Vec<f64>>,
}

/// Per-layer attention record for one forward pass.
#[derive(Clone, Debug, Default)]
pub struct AttentionTrace {
    pub layers: Vec<TraceLayer>,
}

impl AttentionTrace {
    pub fn new() -> Self {
        AttentionTrace { layers: Vec::new() }
    }

    pub(crate) fn record(&mut self, q_len: usize, k_len: usize, heads: Vec<Vec<f64>>) {
        let mut avg = vec![0.0; q_len * k_len];
        for head in &heads {
            for (a, &h) in avg.iter_mut().zip(head) {
                *a += h;
            }
        }
        let scale = 1.0 / heads.len() as f64;
        for a in &mut avg {
            *a *= scale;
        }
        self.layers.push(TraceLayer {
            q_len,
            k_len,
            avg,
            heads,
        });
    }

    /// One CSV per layer: `<stem>.layer<i>.csv`, row = query, col = key.
    pub fn export_csv(&self, dir: &Path, stem: &str) -> Result<(), TensorError> {
        for (i, layer) in self.layers.iter().enumerate() {
            let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.layer{i}.csv")))?);
            write_matrix_csv(&mut w, &layer.avg, layer.q_len, layer.k_len)?;
        }
        Ok(())
    }

    /// One 8-bit PGM heatmap per layer: `<stem>.layer<i>.pgm`.
    pub fn export_pgm(&self, dir: &Path, stem: &str) -> Result<(), TensorError> {
        for (i, layer) in self.layers.iter().enumerate() {
            write_pgm(
                &dir.join(format!("{stem}.layer{i}.pgm")),
                &layer.avg,
                layer.q_len,
                layer.k_len,
            )?;
        }
        Ok(())
    }
}

pub(crate) fn write_matrix_csv<W: Write>(
    w: &mut W,
    data: &[f64],
    rows: usize,
    cols: usize,
) -> Result<(), TensorError> {
    for r in 0..rows {
        let row: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{v:.9}"))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub(crate) fn write_pgm(
    path: &Path,
    data: &[f64],
    rows: usize,
    cols: usize,
) -> Result<(), TensorError> {
    let max = data.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = data
        .iter()
        .map(|&v| ((v / max) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}
