use sha2::{Digest, Sha256};

/// Error metrics evaluated after a training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub feature_mismatch: f64,
    pub reward_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based training step.
    pub step: usize,
    pub metrics: StepMetrics,
    pub selected_count: Option<usize>,
    pub lambda: Option<f64>,
}

/// Per-step metric trace of one seeded training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub seed: u64,
    /// Metrics at `w_0`, before any update.
    pub initial: Option<StepMetrics>,
    pub steps: Vec<StepRecord>,
    pub final_weights: Vec<f64>,
    /// Soft value iterations that hit `max_iter` without reaching `tol`.
    pub nonconverged_solves: usize,
}

impl RunRecord {
    pub fn final_metrics(&self) -> Option<StepMetrics> {
        self.steps.last().map(|s| s.metrics).or(self.initial)
    }

    /// SHA-256 over the little-endian bytes of the final weights.
    pub fn weights_digest(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.final_weights {
            h.update(w.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
