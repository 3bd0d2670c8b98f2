use crate::error::{ensure_len, Error, Result};

/// One teacher-forced training pair: state at `anchor`, target at `anchor + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundledSample {
    pub anchor: usize,
    pub beta: usize,
    pub ic: Vec<f64>,
    /// Each boundary series sampled at `anchor + beta`.
    pub bc_inputs: Vec<f64>,
    pub r: f64,
    pub target: Vec<f64>,
}

/// Sub-trajectories of length `τ` in a series of `n_t` outputs.
pub fn subtrajectory_count(n_t: usize, tau: usize) -> Result<usize> {
    check_window(n_t, tau)?;
    Ok(n_t - tau + 1)
}

fn check_window(n_t: usize, tau: usize) -> Result<()> {
    if tau == 0 || tau >= n_t {
        return Err(Error::argument(format!(
            "look-forward window {tau} must be in 1..{n_t} for {n_t} outputs"
        )));
    }
    Ok(())
}

/// Anchors `0..N_t−τ`, each emitting `τ` samples that share the anchor state.
///
/// `trajectory` holds state columns; `bc_series` holds one full-length series
/// per boundary.
pub fn make_bundles(
    trajectory: &[Vec<f64>],
    bc_series: &[Vec<f64>],
    r: f64,
    tau: usize,
) -> Result<Vec<BundledSample>> {
    let n_t = trajectory.len();
    check_window(n_t, tau)?;
    for s in bc_series {
        ensure_len("boundary series", s.len(), n_t)?;
    }
    let mut out = Vec::with_capacity((n_t - tau) * tau);
    for anchor in 0..n_t - tau {
        for beta in 1..=tau {
            let t = anchor + beta;
            out.push(BundledSample {
                anchor,
                beta,
                ic: trajectory[anchor].clone(),
                bc_inputs: bc_series.iter().map(|s| s[t]).collect(),
                r,
                target: trajectory[t].clone(),
            });
        }
    }
    Ok(out)
}

/// Values of each series at `anchor+1 ..= anchor+τ`, clamped to the series end.
pub fn bc_window(bc_series: &[Vec<f64>], anchor: usize, tau: usize) -> Vec<Vec<f64>> {
    bc_series
        .iter()
        .map(|s| {
            (1..=tau)
                .map(|b| s[(anchor + b).min(s.len().saturating_sub(1))])
                .collect()
        })
        .collect()
}
