//! Sparse debate graph construction.
//!
//! Every round each tail agent `j` scores its `n - 1` incoming edges and keeps
//! a subset of heads to read. The default rule keeps every edge whose weight
//! is at least the mean of the tail's incoming weights; alternatives keep the
//! top `k`, drop the bottom `k`, keep those at or above the median, or keep
//! everything.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::PairMatrix;
use crate::types::AgentId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("cannot average an empty weight list")]
    EmptyWeights,
    #[error("k = {k} is out of range for {edges} incoming edges")]
    KOutOfRange { k: usize, edges: usize },
    #[error("missing peer score for answer of agent {answer} from scorer {scorer}")]
    MissingScore { answer: usize, scorer: usize },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("strategy `{0}` needs a k value")]
    MissingK(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningStrategy {
    /// Keep edges at or above the tail's mean incoming weight.
    #[default]
    Aat,
    /// Keep the `k` heaviest edges.
    TopK(usize),
    /// Drop the `k` lightest edges.
    BotK(usize),
    /// Keep edges at or above the median incoming weight.
    Amt,
    /// Keep every edge.
    FullyConnected,
}

impl PruningStrategy {
    /// Parse the config spelling (`aat`, `top_k`, `bot_k`, `amt`, `full`).
    pub fn from_config(name: &str, k: Option<usize>) -> Result<Self, TopologyError> {
        let need_k = || k.ok_or_else(|| TopologyError::MissingK(name.to_owned()));
        match name {
            "aat" => Ok(Self::Aat),
            "top_k" => Ok(Self::TopK(need_k()?)),
            "bot_k" => Ok(Self::BotK(need_k()?)),
            "amt" => Ok(Self::Amt),
            "full" => Ok(Self::FullyConnected),
            other => Err(TopologyError::UnknownStrategy(other.to_owned())),
        }
    }

    pub fn config_name(&self) -> &'static str {
        match self {
            Self::Aat => "aat",
            Self::TopK(_) => "top_k",
            Self::BotK(_) => "bot_k",
            Self::Amt => "amt",
            Self::FullyConnected => "full",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            Self::TopK(k) | Self::BotK(k) => Some(*k),
            _ => None,
        }
    }

    /// Check `k` against a debate of `n` agents. Bottom-k must leave at
    /// least one head.
    pub fn validate(&self, n: usize) -> Result<(), TopologyError> {
        let edges = n.saturating_sub(1);
        match *self {
            Self::TopK(k) if k == 0 || k > edges => Err(TopologyError::KOutOfRange { k, edges }),
            Self::BotK(k) if k == 0 || k >= edges => Err(TopologyError::KOutOfRange { k, edges }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationStrategy {
    /// Full trust formula.
    #[default]
    Mdm,
    /// Credibility times reliability only.
    #[serde(rename = "mdm_cr")]
    MdmCrOnly,
    /// Each head's own recalibrated confidence.
    #[serde(rename = "self")]
    SelfEvaluation,
    /// Mean score the head's answer received from its peers.
    #[serde(rename = "peer")]
    PeerEvaluation,
}

impl EvaluationStrategy {
    pub fn config_name(&self) -> &'static str {
        match self {
            Self::Mdm => "mdm",
            Self::MdmCrOnly => "mdm_cr",
            Self::SelfEvaluation => "self",
            Self::PeerEvaluation => "peer",
        }
    }

    /// Self and peer evaluation threshold against the whole graph rather
    /// than per tail.
    pub fn uses_global_threshold(&self) -> bool {
        matches!(self, Self::SelfEvaluation | Self::PeerEvaluation)
    }
}

impl FromStr for EvaluationStrategy {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mdm" => Ok(Self::Mdm),
            "mdm_cr" => Ok(Self::MdmCrOnly),
            "self" => Ok(Self::SelfEvaluation),
            "peer" => Ok(Self::PeerEvaluation),
            other => Err(TopologyError::UnknownStrategy(other.to_owned())),
        }
    }
}

impl fmt::Display for EvaluationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_name())
    }
}

/// Arithmetic mean, clamped into `[min, max]` of the inputs so that rounding
/// can never push the threshold above every value.
fn robust_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let sum: f64 = values.iter().sum();
    let mean = sum / values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Some(mean.clamp(lo, hi))
}

pub fn average_incoming(weights: &[f64]) -> Result<f64, TopologyError> {
    robust_mean(weights).ok_or(TopologyError::EmptyWeights)
}

/// Error-free `a + b = hi + lo`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let bv = hi - a;
    let lo = (a - (hi - bv)) + (b - bv);
    (hi, lo)
}

/// Sign of the exact (unrounded) sum of `terms`, using non-overlapping
/// partial sums. The most significant partial carries the sign.
fn exact_sum_sign(terms: impl IntoIterator<Item = f64>) -> std::cmp::Ordering {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in terms {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let (hi, lo) = two_sum(x, y);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials
        .iter()
        .rev()
        .find(|p| **p != 0.0)
        .map_or(std::cmp::Ordering::Equal, |p| p.total_cmp(&0.0))
}

/// `value >= mean(values)`, decided on the exact sum `sum(value - v)` so the
/// comparison is free of rounding.
fn at_least_mean(value: f64, values: &[f64]) -> bool {
    let terms = values.iter().flat_map(|&v| {
        let (hi, lo) = two_sum(value, -v);
        [hi, lo]
    });
    exact_sum_sign(terms).is_ge()
}

/// Retain entries `>= mean`. The comparison is exact, so the maximum always
/// survives and equal weights are all retained.
pub fn prune_aat(weights: &[f64]) -> Vec<bool> {
    weights.iter().map(|&w| at_least_mean(w, weights)).collect()
}

/// Retain the `k` largest; ties go to the lower index.
pub fn prune_topk(weights: &[f64], k: usize) -> Result<Vec<bool>, TopologyError> {
    if k == 0 || k > weights.len() {
        return Err(TopologyError::KOutOfRange {
            k,
            edges: weights.len(),
        });
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut mask = vec![false; weights.len()];
    for &idx in &order[..k] {
        mask[idx] = true;
    }
    Ok(mask)
}

/// Drop the `k` smallest; among ties the higher index is dropped first.
pub fn prune_botk(weights: &[f64], k: usize) -> Result<Vec<bool>, TopologyError> {
    if k == 0 || k >= weights.len() {
        return Err(TopologyError::KOutOfRange {
            k,
            edges: weights.len(),
        });
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a)));
    let mut mask = vec![true; weights.len()];
    for &idx in &order[..k] {
        mask[idx] = false;
    }
    Ok(mask)
}

fn central_pair(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        (sorted[mid], sorted[mid])
    } else {
        (sorted[mid - 1], sorted[mid])
    })
}

/// Retain entries `>= median`; even counts use the midpoint of the two
/// central values.
pub fn prune_amt(weights: &[f64]) -> Vec<bool> {
    match central_pair(weights) {
        Some((a, b)) => weights.iter().map(|&w| at_least_mean(w, &[a, b])).collect(),
        None => Vec::new(),
    }
}

/// Agents whose score is at least the mean over all agents.
pub fn prune_global(scores: &[f64]) -> Vec<bool> {
    prune_aat(scores)
}

/// Heads selected by `mask`, in the order given.
pub fn debate_set(mask: &[bool], heads: &[AgentId]) -> Vec<AgentId> {
    debug_assert_eq!(mask.len(), heads.len());
    heads
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Edge `i -> j` carries head `i`'s confidence, for every tail.
pub fn weights_self_eval(confidences: &[f64]) -> PairMatrix<f64> {
    PairMatrix::from_fn(confidences.len(), |i, j| if i == j { 0.0 } else { confidences[i] })
}

/// `scores[i][k]` is scorer `k`'s rating of agent `i`'s answer. Edge
/// `i -> j` carries the mean of `i`'s received scores.
pub fn weights_peer_eval(scores: &PairMatrix<Option<f64>>) -> Result<PairMatrix<f64>, TopologyError> {
    let n = scores.n();
    let mut head_score = Vec::with_capacity(n);
    for answer in 0..n {
        let mut sum = 0.0;
        for scorer in (0..n).filter(|&k| k != answer) {
            sum += scores
                .get(answer, scorer)
                .ok_or(TopologyError::MissingScore { answer, scorer })?;
        }
        head_score.push(sum / n.saturating_sub(1).max(1) as f64);
    }
    Ok(weights_self_eval(&head_score))
}

/// Binarize a round's raw weights into the retained-edge matrix.
///
/// Under self and peer evaluation with the default rule, the threshold is
/// the mean over all agents' scores and one global head set applies to every
/// tail.
pub fn build_graph(
    weights: &PairMatrix<f64>,
    pruning: PruningStrategy,
    evaluation: EvaluationStrategy,
) -> Result<PairMatrix<u8>, TopologyError> {
    let n = weights.n();
    pruning.validate(n)?;
    let mut bin = PairMatrix::filled(n, 0u8);

    if pruning == PruningStrategy::Aat && evaluation.uses_global_threshold() {
        // Head scores are tail-independent here; read them off any column.
        let scores: Vec<f64> = (0..n)
            .map(|i| *weights.get(i, if i == 0 { 1 } else { 0 }))
            .collect();
        let keep = prune_global(&scores);
        for i in (0..n).filter(|&i| keep[i]) {
            for j in (0..n).filter(|&j| j != i) {
                bin.set(i, j, 1);
            }
        }
        return Ok(bin);
    }

    for tail in 0..n {
        let (heads, incoming): (Vec<usize>, Vec<f64>) =
            weights.incoming(tail).map(|(h, &w)| (h, w)).unzip();
        let mask = match pruning {
            PruningStrategy::Aat => prune_aat(&incoming),
            PruningStrategy::TopK(k) => prune_topk(&incoming, k)?,
            PruningStrategy::BotK(k) => prune_botk(&incoming, k)?,
            PruningStrategy::Amt => prune_amt(&incoming),
            PruningStrategy::FullyConnected => vec![true; incoming.len()],
        };
        for (head, keep) in heads.into_iter().zip(mask) {
            if keep {
                bin.set(head, tail, 1);
            }
        }
    }
    Ok(bin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<AgentId> {
        (1..=n).map(|i| AgentId(format!("A{i}"))).collect()
    }

    #[test]
    fn average_values() {
        assert!((average_incoming(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(average_incoming(&[0.3, 0.3]).unwrap(), 0.3);
        assert_eq!(average_incoming(&[0.77]).unwrap(), 0.77);
        assert_eq!(average_incoming(&[]), Err(TopologyError::EmptyWeights));
    }

    #[test]
    fn aat_examples() {
        assert_eq!(prune_aat(&[0.2, 0.4, 0.6]), vec![false, true, true]);
        assert_eq!(prune_aat(&[0.3, 0.3, 0.3]), vec![true, true, true]);
        assert_eq!(prune_aat(&[1.0]), vec![true]);
        // naive sum/len of three 0.1s rounds above 0.1
        assert_eq!(prune_aat(&[0.1, 0.1, 0.1]), vec![true; 3]);
    }

    #[test]
    fn topk_botk_amt_examples() {
        assert_eq!(prune_topk(&[0.2, 0.4, 0.6], 1).unwrap(), vec![false, false, true]);
        assert_eq!(prune_botk(&[0.2, 0.4, 0.6], 1).unwrap(), vec![false, true, true]);
        assert_eq!(prune_amt(&[0.2, 0.4, 0.6]), vec![false, true, true]);
        assert_eq!(prune_amt(&[0.1, 0.2, 0.3, 0.4]), vec![false, false, true, true]);
    }

    #[test]
    fn tie_breaks_are_by_position() {
        assert_eq!(prune_topk(&[0.5, 0.5, 0.5], 2).unwrap(), vec![true, true, false]);
        assert_eq!(prune_botk(&[0.5, 0.5, 0.5], 1).unwrap(), vec![true, true, false]);
        assert_eq!(prune_botk(&[0.1, 0.5, 0.1, 0.9], 1).unwrap(), vec![true, true, false, true]);
    }

    #[test]
    fn k_bounds() {
        assert!(prune_topk(&[0.1, 0.2], 0).is_err());
        assert!(prune_topk(&[0.1, 0.2], 3).is_err());
        assert!(prune_botk(&[0.1, 0.2], 2).is_err());
        assert!(PruningStrategy::TopK(4).validate(5).is_ok());
        assert!(PruningStrategy::TopK(5).validate(5).is_err());
        assert!(PruningStrategy::BotK(3).validate(5).is_ok());
        assert!(PruningStrategy::BotK(4).validate(5).is_err());
    }

    #[test]
    fn debate_set_selection() {
        let heads = ids(3);
        assert_eq!(
            debate_set(&[false, true, true], &heads),
            vec![AgentId::from("A2"), AgentId::from("A3")]
        );
    }

    #[test]
    fn full_and_uniform_graphs_keep_everything() {
        let w = PairMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { (i * 7 + j) as f64 });
        let full = build_graph(&w, PruningStrategy::FullyConnected, EvaluationStrategy::Mdm).unwrap();
        let uniform = PairMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { 0.25 });
        let aat = build_graph(&uniform, PruningStrategy::Aat, EvaluationStrategy::Mdm).unwrap();
        for tail in 0..4 {
            assert_eq!(full.incoming(tail).filter(|(_, &b)| b == 1).count(), 3);
            assert_eq!(aat.incoming(tail).filter(|(_, &b)| b == 1).count(), 3);
        }
    }

    #[test]
    fn self_eval_uses_graph_average() {
        let w = weights_self_eval(&[0.8, 0.6, 0.3]);
        let bin = build_graph(&w, PruningStrategy::Aat, EvaluationStrategy::SelfEvaluation).unwrap();
        // mean 0.5667: agents 0 and 1 are heads for every other tail
        assert_eq!(*bin.get(0, 1), 1);
        assert_eq!(*bin.get(0, 2), 1);
        assert_eq!(*bin.get(1, 0), 1);
        assert_eq!(*bin.get(1, 2), 1);
        for tail in 0..3 {
            assert_eq!(*bin.get(2, tail), 0);
        }
        let eq = weights_self_eval(&[0.5, 0.5, 0.5]);
        let bin = build_graph(&eq, PruningStrategy::Aat, EvaluationStrategy::SelfEvaluation).unwrap();
        assert_eq!(bin.incoming(0).filter(|(_, &b)| b == 1).count(), 2);
    }

    #[test]
    fn self_eval_two_agents() {
        let w = weights_self_eval(&[0.7, 0.4]);
        let bin = build_graph(&w, PruningStrategy::Aat, EvaluationStrategy::SelfEvaluation).unwrap();
        assert_eq!(*bin.get(0, 1), 1);
        assert_eq!(*bin.get(1, 0), 0);
    }

    #[test]
    fn peer_eval_means() {
        let mut s = PairMatrix::filled(3, None);
        s.set(0, 1, Some(0.5));
        s.set(0, 2, Some(0.7));
        s.set(1, 0, Some(0.0));
        s.set(1, 2, Some(0.0));
        s.set(2, 0, Some(0.2));
        s.set(2, 1, Some(0.2));
        let w = weights_peer_eval(&s).unwrap();
        assert!((w.get(0, 1) - 0.6).abs() < 1e-15);
        assert!((w.get(0, 2) - 0.6).abs() < 1e-15);
        let bin = build_graph(&w, PruningStrategy::Aat, EvaluationStrategy::PeerEvaluation).unwrap();
        // agent 1 scored zero by everyone is pruned everywhere
        assert!(bin.incoming(0).all(|(h, &b)| h != 1 || b == 0));
        assert!(bin.incoming(2).all(|(h, &b)| h != 1 || b == 0));

        s.set(2, 1, None);
        assert_eq!(
            weights_peer_eval(&s),
            Err(TopologyError::MissingScore { answer: 2, scorer: 1 })
        );
    }

    #[test]
    fn strategy_names_round_trip() {
        for (name, k) in [("aat", None), ("top_k", Some(2)), ("bot_k", Some(1)), ("amt", None), ("full", None)] {
            let s = PruningStrategy::from_config(name, k).unwrap();
            assert_eq!(s.config_name(), name);
            assert_eq!(s.k(), k);
        }
        assert!(PruningStrategy::from_config("top_k", None).is_err());
        assert!(PruningStrategy::from_config("star", None).is_err());
        for name in ["mdm", "mdm_cr", "self", "peer"] {
            assert_eq!(name.parse::<EvaluationStrategy>().unwrap().config_name(), name);
        }
    }
}
