use crate::error::{ensure_len, Error, Result};
use crate::numkit::Matrix;

/// `P·(B_1 ⊙ … ⊙ B_k ⊙ T + b0)`, with `P` omitted when absent.
pub fn fuse(
    branch_outputs: &[Vec<f64>],
    trunk_output: &[f64],
    b0: &[f64],
    projection: Option<&Matrix>,
) -> Result<Vec<f64>> {
    let p = trunk_output.len();
    if branch_outputs.is_empty() {
        return Err(Error::shape("fusion needs at least one branch output"));
    }
    for b in branch_outputs {
        ensure_len("branch output", b.len(), p)?;
    }
    ensure_len("fusion bias", b0.len(), p)?;
    let mut out: Vec<f64> = trunk_output.to_vec();
    for b in branch_outputs {
        for (o, v) in out.iter_mut().zip(b) {
            *o *= v;
        }
    }
    for (o, c) in out.iter_mut().zip(b0) {
        *o += c;
    }
    match projection {
        Some(m) => m.matvec(&out),
        None => Ok(out),
    }
}

/// Elementwise product of `vectors` leaving out index `skip`.
pub(crate) fn product_except(vectors: &[&[f64]], skip: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![1.0; dim];
    for (j, v) in vectors.iter().enumerate() {
        if j != skip {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o *= x;
            }
        }
    }
    out
}

pub(crate) fn product(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    product_except(vectors, usize::MAX, dim)
}
