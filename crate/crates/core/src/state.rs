//! Per-debate accumulators behind the edge weights.

use serde::{Deserialize, Serialize};

use crate::matrix::PairMatrix;
use crate::mdm::{self, MdmError};

/// Which endpoint of a retained edge `i -> j` is credited with a
/// participation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipationCounting {
    /// The head `i`, whose answer was read.
    #[default]
    Head,
    /// The tail `j`, who read it.
    Tail,
    /// Both endpoints.
    Both,
}

impl ParticipationCounting {
    /// Most participations one agent can collect in a single round.
    pub fn per_round_capacity(self, n: usize) -> u32 {
        let base = n.saturating_sub(1) as u32;
        match self {
            ParticipationCounting::Head | ParticipationCounting::Tail => base,
            ParticipationCounting::Both => 2 * base,
        }
    }
}

/// Trust accumulators for one debate, advanced once per round barrier.
///
/// After [`advance`](Self::advance) to round `d`, `reliability` and
/// `sim_avg` are means over rounds `0..d`, and `participation` counts
/// retained edges over rounds `1..d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateState {
    pub n: usize,
    pub round: u32,
    pub counting: ParticipationCounting,
    pub credibility: Vec<f64>,
    pub reliability: Vec<f64>,
    pub participation: Vec<u32>,
    pub sim_avg: PairMatrix<f64>,
    pub weight_raw: PairMatrix<f64>,
    pub weight_bin: PairMatrix<u8>,
}

impl DebateState {
    pub fn new(credibility: Vec<f64>, counting: ParticipationCounting) -> Result<Self, MdmError> {
        let n = credibility.len();
        if n < 2 {
            return Err(MdmError::TooFewAgents(n));
        }
        Ok(Self {
            n,
            round: 0,
            counting,
            credibility,
            reliability: vec![0.0; n],
            participation: vec![0; n],
            sim_avg: PairMatrix::filled(n, 0.0),
            weight_raw: PairMatrix::filled(n, 0.0),
            weight_bin: PairMatrix::filled(n, 0),
        })
    }

    /// Enter the next round, folding in the previous round's recalibrated
    /// confidences and pairwise output cosines.
    pub fn advance(&mut self, confidences: &[f64], cosines: &PairMatrix<f64>) -> Result<(), MdmError> {
        assert_eq!(confidences.len(), self.n, "one confidence per agent");
        assert_eq!(cosines.n(), self.n, "cosine matrix must match agent count");
        let d = self.round + 1;
        for (r, &h) in self.reliability.iter_mut().zip(confidences) {
            *r = mdm::update_reliability(*r, d, h)?;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let s = mdm::update_sim(*self.sim_avg.get(i, j), d, *cosines.get(i, j))?;
                    self.sim_avg.set(i, j, s);
                }
            }
        }
        self.round = d;
        self.weight_raw = PairMatrix::filled(self.n, 0.0);
        self.weight_bin = PairMatrix::filled(self.n, 0);
        Ok(())
    }

    pub fn capacity(&self) -> u32 {
        self.round.saturating_sub(1) * self.counting.per_round_capacity(self.n)
    }

    pub fn self_orientation(&self, agent: usize) -> Result<f64, MdmError> {
        mdm::self_orientation_with_capacity(
            self.round,
            self.n,
            self.participation[agent],
            self.capacity(),
        )
    }

    pub fn intimacy(&self, head: usize, tail: usize) -> f64 {
        mdm::intimacy(*self.sim_avg.get(head, tail))
    }

    /// Full trust-formula weights for every ordered pair.
    pub fn compute_mdm_weights(&mut self) -> Result<(), MdmError> {
        let s: Vec<f64> = (0..self.n)
            .map(|i| self.self_orientation(i))
            .collect::<Result<_, _>>()?;
        let mut w = PairMatrix::filled(self.n, 0.0);
        for (i, &s_i) in s.iter().enumerate() {
            for j in 0..self.n {
                if i != j {
                    let value = mdm::edge_weight(self.credibility[i], self.reliability[i], self.intimacy(i, j), s_i);
                    w.set(i, j, value);
                }
            }
        }
        self.weight_raw = w;
        Ok(())
    }

    /// Credibility-times-reliability weights (no pair terms).
    pub fn compute_cr_weights(&mut self) {
        let (c, r) = (&self.credibility, &self.reliability);
        self.weight_raw = PairMatrix::from_fn(self.n, |i, j| {
            if i == j {
                0.0
            } else {
                mdm::edge_weight_cr_only(c[i], r[i])
            }
        });
    }

    pub fn set_raw_weights(&mut self, weights: PairMatrix<f64>) {
        assert_eq!(weights.n(), self.n);
        self.weight_raw = weights;
    }

    /// Store the binarized graph for this round and credit participation
    /// for every retained edge.
    pub fn apply_mask(&mut self, bin: PairMatrix<u8>) {
        assert_eq!(bin.n(), self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j || *bin.get(i, j) == 0 {
                    continue;
                }
                match self.counting {
                    ParticipationCounting::Head => self.participation[i] += 1,
                    ParticipationCounting::Tail => self.participation[j] += 1,
                    ParticipationCounting::Both => {
                        self.participation[i] += 1;
                        self.participation[j] += 1;
                    }
                }
            }
        }
        self.weight_bin = bin;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(n: usize, v: f64) -> PairMatrix<f64> {
        PairMatrix::filled(n, v)
    }

    #[test]
    fn round_one_self_orientation_is_uniformly_clamped() {
        let mut st = DebateState::new(vec![0.4; 4], ParticipationCounting::Head).unwrap();
        st.advance(&[0.8, 0.6, 0.45, 0.3], &cos(4, 0.5)).unwrap();
        for i in 0..4 {
            assert_eq!(st.self_orientation(i).unwrap(), 1.0);
        }
        st.compute_mdm_weights().unwrap();
        for i in 0..4 {
            for (_, w) in st.weight_raw.incoming(i) {
                assert!(w.is_finite());
            }
        }
        assert!((st.weight_raw.get(0, 1) - 0.4 * 0.8 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn participation_counts_follow_mode() {
        let mut bin = PairMatrix::filled(3, 0u8);
        bin.set(0, 1, 1);
        bin.set(0, 2, 1);
        bin.set(2, 1, 1);
        for (mode, expect) in [
            (ParticipationCounting::Head, vec![2, 0, 1]),
            (ParticipationCounting::Tail, vec![0, 2, 1]),
            (ParticipationCounting::Both, vec![2, 2, 2]),
        ] {
            let mut st = DebateState::new(vec![0.4; 3], mode).unwrap();
            st.advance(&[0.5; 3], &cos(3, 0.0)).unwrap();
            st.apply_mask(bin.clone());
            assert_eq!(st.participation, expect);
            st.advance(&[0.5; 3], &cos(3, 0.0)).unwrap();
            for i in 0..3 {
                assert!(st.participation[i] <= st.capacity());
                assert!(st.self_orientation(i).is_ok());
            }
        }
    }

    #[test]
    fn cr_weights_ignore_pair_terms() {
        let mut st = DebateState::new(vec![0.5, 0.25], ParticipationCounting::Head).unwrap();
        st.advance(&[0.8, 0.4], &cos(2, 1.0)).unwrap();
        st.compute_cr_weights();
        assert!((st.weight_raw.get(0, 1) - 0.4).abs() < 1e-15);
        assert!((st.weight_raw.get(1, 0) - 0.1).abs() < 1e-15);
        st.compute_mdm_weights().unwrap();
        assert_eq!(*st.weight_raw.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_single_agent() {
        assert!(DebateState::new(vec![0.5], ParticipationCounting::Head).is_err());
    }
}
