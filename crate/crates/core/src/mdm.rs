//! Trust mathematics for edge weights.
//!
//! An edge `i -> j` is scored with the classic trust equation
//! `T = C * R * I / S`, where credibility `C` comes from a scaling-law loss
//! of the head model, reliability `R` is the head's running mean confidence,
//! intimacy `I` is one minus the running mean cosine similarity of the two
//! agents' outputs, and self-orientation `S` is the head's unused debate
//! capacity. Confidences are recalibrated into coarse bands before use.
//!
//! All functions here are pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constant term of the scaling-law loss; the infimum of [`scaling_loss`].
pub const LOSS_FLOOR: f64 = 1.69;
const PARAM_COEFF: f64 = 406.4;
const PARAM_EXP: f64 = 0.34;
const TOKEN_COEFF: f64 = 410.7;
const TOKEN_EXP: f64 = 0.28;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdmError {
    #[error("confidence {0} is outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("scaling-law inputs must be positive and finite (n = {n}, m = {m})")]
    NonPositiveScale { n: f64, m: f64 },
    #[error("round index must be at least 1")]
    ZeroRound,
    #[error("cosine {0} is outside [-1, 1]")]
    CosineOutOfRange(f64),
    #[error("participation {p} exceeds capacity {max} at round {d} with {n} agents")]
    ParticipationOverflow { p: u32, max: u32, d: u32, n: usize },
    #[error("need at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("invalid recalibration thresholds: require 0 < lo < mid < hi <= 1")]
    BadThresholds,
}

/// Band edges for confidence recalibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationThresholds {
    pub hi: f64,
    pub mid: f64,
    pub lo: f64,
}

impl Default for RecalibrationThresholds {
    fn default() -> Self {
        Self {
            hi: 0.8,
            mid: 0.6,
            lo: 0.3,
        }
    }
}

impl RecalibrationThresholds {
    pub fn new(hi: f64, mid: f64, lo: f64) -> Result<Self, MdmError> {
        let t = Self { hi, mid, lo };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MdmError> {
        if 0.0 < self.lo && self.lo < self.mid && self.mid < self.hi && self.hi <= 1.0 {
            Ok(())
        } else {
            Err(MdmError::BadThresholds)
        }
    }
}

/// Snap a raw confidence into the recalibrated bands: `hi` at or above
/// `hi`, `mid` in `[mid, hi)`, unchanged in `[lo, mid)`, `lo` below `lo`.
pub fn recalibrate(h: f64, t: &RecalibrationThresholds) -> Result<f64, MdmError> {
    if !(0.0..=1.0).contains(&h) {
        return Err(MdmError::ConfidenceOutOfRange(h));
    }
    Ok(if h >= t.hi {
        t.hi
    } else if h >= t.mid {
        t.mid
    } else if h >= t.lo {
        h
    } else {
        t.lo
    })
}

/// Pre-training loss predicted from parameter count `n_params` and
/// training-token count `m_tokens`.
pub fn scaling_loss(n_params: f64, m_tokens: f64) -> Result<f64, MdmError> {
    let ok = |x: f64| x.is_finite() && x > 0.0;
    if !ok(n_params) || !ok(m_tokens) {
        return Err(MdmError::NonPositiveScale {
            n: n_params,
            m: m_tokens,
        });
    }
    Ok(PARAM_COEFF / n_params.powf(PARAM_EXP) + TOKEN_COEFF / m_tokens.powf(TOKEN_EXP) + LOSS_FLOOR)
}

/// Reciprocal of [`scaling_loss`]; always below `1 / 1.69`.
pub fn credibility(n_params: f64, m_tokens: f64) -> Result<f64, MdmError> {
    scaling_loss(n_params, m_tokens).map(|loss| 1.0 / loss)
}

fn running_mean(prev: f64, d: u32, value: f64) -> Result<f64, MdmError> {
    if d == 0 {
        return Err(MdmError::ZeroRound);
    }
    let d = f64::from(d);
    Ok((prev * (d - 1.0) + value) / d)
}

/// Fold the round `d - 1` confidence into the running reliability. At
/// `d = 1` the previous value is ignored.
pub fn update_reliability(r_prev: f64, d: u32, h_prev: f64) -> Result<f64, MdmError> {
    if !(0.0..=1.0).contains(&h_prev) {
        return Err(MdmError::ConfidenceOutOfRange(h_prev));
    }
    running_mean(r_prev, d, h_prev)
}

/// Fold the round `d - 1` cosine similarity into the running pair mean.
pub fn update_sim(sim_prev: f64, d: u32, cos_val: f64) -> Result<f64, MdmError> {
    if !(-1.0..=1.0).contains(&cos_val) {
        return Err(MdmError::CosineOutOfRange(cos_val));
    }
    running_mean(sim_prev, d, cos_val)
}

pub fn intimacy(sim: f64) -> f64 {
    1.0 - sim
}

/// Maximum participation an agent can have accumulated before round `d`.
pub fn participation_capacity(d: u32, n: usize) -> u32 {
    d.saturating_sub(1) * (n.saturating_sub(1) as u32)
}

/// Unused debate capacity `(d-1)(n-1) - p`, clamped below at 1.
///
/// The unclamped value is 0 for every edge in round 1 and for any head that
/// has participated at full capacity, which would divide the edge weight by
/// zero.
pub fn self_orientation(d: u32, n: usize, p: u32) -> Result<f64, MdmError> {
    self_orientation_with_capacity(d, n, p, participation_capacity(d, n))
}

/// [`self_orientation`] against an explicit capacity, for participation
/// counting modes whose per-round ceiling differs from `n - 1`.
pub fn self_orientation_with_capacity(
    d: u32,
    n: usize,
    p: u32,
    capacity: u32,
) -> Result<f64, MdmError> {
    if d == 0 {
        return Err(MdmError::ZeroRound);
    }
    if n < 2 {
        return Err(MdmError::TooFewAgents(n));
    }
    if p > capacity {
        return Err(MdmError::ParticipationOverflow {
            p,
            max: capacity,
            d,
            n,
        });
    }
    Ok(f64::from(capacity - p).max(1.0))
}

pub fn edge_weight(c: f64, r: f64, i: f64, s: f64) -> f64 {
    debug_assert!(s >= 1.0, "self-orientation must be clamped before use");
    c * r * i / s
}

/// Edge weight from the individual-ability factors alone.
pub fn edge_weight_cr_only(c: f64, r: f64) -> f64 {
    c * r
}
