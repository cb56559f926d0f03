use super::NnError;
use crate::tensor::Tensor;

/// Sinusoidal position/temporal encoding.
///
/// `PE[p, 2i] = sin(p / 10000^(2i/dim))`, `PE[p, 2i+1] = cos(same)`. Used as
/// positional encoding for language tokens and temporal encoding for
/// observation/action streams; always added to embeddings, never
/// concatenated.
pub fn sinusoidal_encoding(length: usize, dim: usize) -> Result<Tensor, NnError> {
    if dim % 2 != 0 {
        return Err(NnError::OddDim(dim));
    }
    assert!(length >= 1);
    let mut data = vec![0.0; length * dim];
    for p in 0..length {
        for i in 0..dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = p as f64 * freq;
            data[p * dim + 2 * i] = angle.sin();
            data[p * dim + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Tensor::new(data, vec![length, dim]).unwrap())
}

/// Rows of the encoding for explicit (possibly non-contiguous) indices.
pub fn sinusoidal_rows(indices: &[usize], dim: usize) -> Result<Tensor, NnError> {
    let max = indices.iter().copied().max().unwrap_or(0);
    let full = sinusoidal_encoding(max + 1, dim)?;
    let mut data = Vec::with_capacity(indices.len() * dim);
    for &p in indices {
        data.extend_from_slice(&full.data[p * dim..(p + 1) * dim]);
    }
    Ok(Tensor::new(data, vec![indices.len(), dim]).unwrap())
}
