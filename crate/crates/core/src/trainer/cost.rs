use serde::{Deserialize, Serialize};

use crate::net::ForwardTrace;
use crate::numkit::norm2;

/// Constants of the gate-dynamics penalty `eta * xi^|d_{t+1} - d_t|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePenalty {
    pub eta: f64,
    pub xi: f64,
}

impl Default for GatePenalty {
    fn default() -> Self {
        GatePenalty { eta: 1e-4, xi: 100.0 }
    }
}

impl GatePenalty {
    /// Penalty for one transition of the DA vector.
    pub fn value(&self, delta_norm: f64) -> f64 {
        self.eta * self.xi.powf(delta_norm)
    }

    /// Gradient of the transition penalty with respect to `delta`.
    /// Zero at `delta = 0`, where the norm has no derivative.
    pub fn grad(&self, delta: &[f64]) -> Vec<f64> {
        let norm = norm2(delta);
        if norm == 0.0 {
            return vec![0.0; delta.len()];
        }
        let scale = self.value(norm) * self.xi.ln() / norm;
        delta.iter().map(|x| x * scale).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `-sum_t log p_t[target_t]`
    pub cross_entropy: f64,
    /// Norm of the DA vector left after the last step.
    pub final_da_norm: f64,
    pub gate_penalty: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.cross_entropy + self.final_da_norm + self.gate_penalty
    }
}

/// Per-sentence training cost: cross-entropy, plus the norm of the final
/// DA vector, plus one gate penalty per step.
pub fn sentence_cost(
    trace: &ForwardTrace,
    targets: &[usize],
    penalty: &GatePenalty,
) -> (f64, CostBreakdown) {
    assert_eq!(targets.len(), trace.len(), "one target per step");
    let cross_entropy = trace
        .steps
        .iter()
        .zip(targets)
        .map(|(s, &y)| -s.p[y].ln())
        .sum();
    let gate_penalty = (0..trace.len())
        .map(|k| {
            let delta: Vec<f64> = trace
                .d(k + 1)
                .iter()
                .zip(trace.d(k))
                .map(|(a, b)| a - b)
                .collect();
            penalty.value(norm2(&delta))
        })
        .sum();
    let b = CostBreakdown {
        cross_entropy,
        final_da_norm: norm2(trace.d_final()),
        gate_penalty,
    };
    (b.total(), b)
}
