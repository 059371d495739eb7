use crate::error::Result;
use crate::residual::{sparsify_quantize, SparseResidual};
use crate::transport::RESIDUAL_FIXED_BYTES;

/// Descending geometric ladder of candidate thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaLadder {
    steps: Vec<f32>,
}

impl ThetaLadder {
    pub fn geometric(theta_max: f32, theta_min: f32, count: usize) -> Self {
        let count = count.max(2);
        let ratio = (theta_min as f64 / theta_max as f64).powf(1.0 / (count - 1) as f64);
        let mut steps: Vec<f32> = (0..count).map(|k| (theta_max as f64 * ratio.powi(k as i32)) as f32).collect();
        *steps.last_mut().unwrap() = theta_min;
        Self { steps }
    }

    pub fn steps(&self) -> &[f32] {
        &self.steps
    }

    pub fn min(&self) -> f32 {
        *self.steps.last().unwrap()
    }
}

impl Default for ThetaLadder {
    fn default() -> Self {
        Self::geometric(0.5, 0.02, 256)
    }
}

#[derive(Clone, Debug)]
pub struct ThetaFit {
    pub residual: SparseResidual,
    pub payload: Vec<u8>,
    /// Encode-and-measure trials spent.
    pub trials: usize,
}

impl ThetaFit {
    pub fn packet_bytes(&self) -> usize {
        RESIDUAL_FIXED_BYTES + self.payload.len()
    }
}

/// Smallest ladder threshold whose residual packet fits `budget_bytes`.
///
/// Sizes are measured by actually entropy coding each candidate (binary
/// search over the ladder). If no threshold fits, the residual is empty.
pub fn fit_theta(
    avg: &[f64],
    dims: (usize, usize),
    quant_step: f32,
    gop_id: u64,
    window: u16,
    budget_bytes: usize,
    ladder: &ThetaLadder,
) -> Result<ThetaFit> {
    let steps = ladder.steps();
    let build = |theta: f32| -> Result<(SparseResidual, Vec<u8>)> {
        let sr = sparsify_quantize(avg, dims, theta, quant_step, gop_id, window)?;
        let payload = sr.encode_payload();
        Ok((sr, payload))
    };
    let fits = |payload: &[u8]| RESIDUAL_FIXED_BYTES + payload.len() <= budget_bytes;
    let mut trials = 0;
    let mut best: Option<(SparseResidual, Vec<u8>)> = None;
    // invariant: steps[..lo] fit (or are untested), steps[hi..] do not fit
    let (mut lo, mut hi) = (0usize, steps.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        trials += 1;
        let (sr, payload) = build(steps[mid])?;
        if fits(&payload) {
            best = Some((sr, payload));
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let (residual, payload) = match best {
        Some(b) => b,
        None => {
            let sr = SparseResidual::empty(gop_id, dims, steps[0], quant_step, window);
            let payload = sr.encode_payload();
            (sr, payload)
        }
    };
    Ok(ThetaFit { residual, payload, trials })
}
