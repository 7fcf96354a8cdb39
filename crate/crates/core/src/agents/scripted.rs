//! Deterministic offline backends.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::normalize_free_text;
use super::{AgentBackend, AgentError, Generation, GenerationRequest, RequestPurpose};

const AGREE_SCORE: f64 = 0.9;
const DISAGREE_SCORE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub answer: String,
    pub confidence: f64,
}

impl ScriptStep {
    pub fn new(answer: impl Into<String>, confidence: f64) -> Self {
        Self {
            answer: answer.into(),
            confidence,
        }
    }
}

/// How a scripted agent answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScriptedBehavior {
    /// Replay `steps[round]`; the last step repeats past the end.
    FixedSequence { steps: Vec<ScriptStep> },
    /// Start from `initial`, then adopt the most common answer among the
    /// received answers plus its own previous one. Ties keep the previous
    /// answer when it is tied, else take the earliest received.
    CopyMajority { initial: String, confidences: Vec<f64> },
    /// Always the same answer.
    Stubborn { answer: String, confidence: f64 },
}

impl ScriptedBehavior {
    pub fn stubborn(answer: impl Into<String>, confidence: f64) -> Self {
        Self::Stubborn {
            answer: answer.into(),
            confidence,
        }
    }

    pub fn copy_majority(initial: impl Into<String>, confidences: Vec<f64>) -> Self {
        Self::CopyMajority {
            initial: initial.into(),
            confidences,
        }
    }

    pub fn fixed(steps: Vec<ScriptStep>) -> Self {
        Self::FixedSequence { steps }
    }

    fn confidence_at(schedule: &[f64], round: u32) -> f64 {
        let idx = (round as usize).min(schedule.len().saturating_sub(1));
        schedule.get(idx).copied().unwrap_or(0.5)
    }

    /// Answer and confidence for a round given what the agent was shown.
    pub fn step(&self, round: u32, received: &[String], own_previous: Option<&str>) -> ScriptStep {
        match self {
            Self::FixedSequence { steps } => {
                let idx = (round as usize).min(steps.len().saturating_sub(1));
                steps.get(idx).cloned().unwrap_or_else(|| ScriptStep::new("", 0.5))
            }
            Self::Stubborn { answer, confidence } => ScriptStep::new(answer.clone(), *confidence),
            Self::CopyMajority { initial, confidences } => {
                let confidence = Self::confidence_at(confidences, round);
                if round == 0 {
                    return ScriptStep::new(initial.clone(), confidence);
                }
                let own = own_previous.unwrap_or(initial);
                ScriptStep::new(copy_majority_choice(own, received), confidence)
            }
        }
    }
}

fn copy_majority_choice(own: &str, received: &[String]) -> String {
    // (first spelling seen, count), keyed by normalized text, in first-seen order
    let mut tally: Vec<(String, String, usize)> = Vec::new();
    for ans in std::iter::once(own).chain(received.iter().map(String::as_str)) {
        let key = normalize_free_text(ans);
        match tally.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.2 += 1,
            None => tally.push((key, ans.to_owned(), 1)),
        }
    }
    let best = tally.iter().map(|t| t.2).max().unwrap_or(0);
    // index 0 is the agent's own answer, so the first tied entry prefers it
    tally
        .into_iter()
        .find(|t| t.2 == best)
        .map(|t| t.1)
        .unwrap_or_else(|| own.to_owned())
}

/// Render a reply in the three-field answer format.
pub fn format_reply(answer: &str, explanation: &str, confidence: f64) -> String {
    format!("Answer: ({answer})\nExplanation: ({explanation})\nConfidence Score: ({confidence})")
}

/// Backend that follows a [`ScriptedBehavior`], optionally per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBackend {
    pub behavior: ScriptedBehavior,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_question: BTreeMap<String, ScriptedBehavior>,
    /// Rounds in which every call fails, for exercising failure handling.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub fail_rounds: BTreeSet<u32>,
}

impl ScriptedBackend {
    pub fn new(behavior: ScriptedBehavior) -> Self {
        Self {
            behavior,
            per_question: BTreeMap::new(),
            fail_rounds: BTreeSet::new(),
        }
    }

    pub fn with_question(mut self, question_id: impl Into<String>, behavior: ScriptedBehavior) -> Self {
        self.per_question.insert(question_id.into(), behavior);
        self
    }

    pub fn failing_in(mut self, round: u32) -> Self {
        self.fail_rounds.insert(round);
        self
    }

    fn behavior_for(&self, question_id: &str) -> &ScriptedBehavior {
        self.per_question.get(question_id).unwrap_or(&self.behavior)
    }
}

impl AgentBackend for ScriptedBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Generation, AgentError> {
        if self.fail_rounds.contains(&req.round) {
            return Err(AgentError::Unavailable {
                attempts: 1,
                cause: format!("scripted failure in round {}", req.round),
            });
        }
        let behavior = self.behavior_for(req.question_id);
        match req.purpose {
            RequestPurpose::Answer => {
                let step = behavior.step(req.round, req.received, req.own_previous);
                let explanation = format!("scripted reasoning for {}", step.answer);
                Ok(Generation::text(format_reply(&step.answer, &explanation, step.confidence)))
            }
            RequestPurpose::PeerScore { answer } => {
                let mine = match req.own_previous {
                    Some(prev) => prev.to_owned(),
                    None => behavior.step(req.round.saturating_sub(1), &[], None).answer,
                };
                let score = if normalize_free_text(&mine) == normalize_free_text(answer) {
                    AGREE_SCORE
                } else {
                    DISAGREE_SCORE
                };
                Ok(Generation::text(format!("Score: ({score})")))
            }
        }
    }

    fn describe(&self) -> String {
        "scripted".to_owned()
    }
}

/// Repeats the first answer it is shown; answers `answer` when shown
/// nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoBackend {
    pub answer: String,
}

impl AgentBackend for EchoBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Generation, AgentError> {
        match req.purpose {
            RequestPurpose::Answer => {
                let answer = req.received.first().unwrap_or(&self.answer);
                Ok(Generation::text(format_reply(answer, "echoed", 0.5)))
            }
            RequestPurpose::PeerScore { .. } => Ok(Generation::text("Score: (0.5)")),
        }
    }

    fn describe(&self) -> String {
        "echo".to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{parse_reply, GenerationParams};

    fn req<'a>(
        round: u32,
        received: &'a [String],
        own: Option<&'a str>,
        params: &'a GenerationParams,
    ) -> GenerationRequest<'a> {
        GenerationRequest {
            question_id: "q",
            round,
            prompt: "",
            received,
            own_previous: own,
            purpose: RequestPurpose::Answer,
            seed: 7,
            params,
        }
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn copy_majority_rules() {
        assert_eq!(copy_majority_choice("C", &s(&["A", "A", "B"])), "A");
        assert_eq!(copy_majority_choice("C", &s(&["A"])), "C");
        assert_eq!(copy_majority_choice("C", &s(&["A", "B"])), "C");
        assert_eq!(copy_majority_choice("A", &s(&["B", "C"])), "A");
        assert_eq!(copy_majority_choice("C", &s(&["B", "B", "A", "A"])), "B");
    }

    #[test]
    fn scripted_is_deterministic() {
        let p = GenerationParams::default();
        let b = ScriptedBackend::new(ScriptedBehavior::copy_majority("C", vec![0.9, 0.7]));
        let recv = s(&["A", "A"]);
        let one = b.generate(&req(1, &recv, Some("C"), &p)).unwrap().text;
        let two = b.generate(&req(1, &recv, Some("C"), &p)).unwrap().text;
        assert_eq!(one, two);
        let parsed = parse_reply(&one);
        assert_eq!(parsed.answer, "A");
        assert_eq!(parsed.confidence_raw, 0.7);
        assert!(parsed.flags.is_empty());
    }

    #[test]
    fn fixed_sequence_repeats_last() {
        let b = ScriptedBehavior::fixed(vec![ScriptStep::new("x", 0.4), ScriptStep::new("y", 0.9)]);
        assert_eq!(b.step(0, &[], None).answer, "x");
        assert_eq!(b.step(5, &[], None).answer, "y");
    }

    #[test]
    fn failure_rounds_and_per_question() {
        let p = GenerationParams::default();
        let b = ScriptedBackend::new(ScriptedBehavior::stubborn("A", 0.9))
            .with_question("q", ScriptedBehavior::stubborn("Z", 0.9))
            .failing_in(2);
        assert!(b.generate(&req(2, &[], None, &p)).is_err());
        let text = b.generate(&req(1, &[], None, &p)).unwrap().text;
        assert_eq!(parse_reply(&text).answer, "Z");
    }

    #[test]
    fn peer_scores_agreement() {
        let p = GenerationParams::default();
        let b = ScriptedBackend::new(ScriptedBehavior::stubborn("A", 0.9));
        let mut r = req(1, &[], Some("A"), &p);
        r.purpose = RequestPurpose::PeerScore { answer: "a" };
        assert_eq!(b.generate(&r).unwrap().text, "Score: (0.9)");
        r.purpose = RequestPurpose::PeerScore { answer: "B" };
        assert_eq!(b.generate(&r).unwrap().text, "Score: (0.2)");
    }

    #[test]
    fn echo_repeats_first_received() {
        let p = GenerationParams::default();
        let e = EchoBackend { answer: "seed".into() };
        let recv = s(&["x", "y"]);
        assert_eq!(parse_reply(&e.generate(&req(1, &recv, None, &p)).unwrap().text).answer, "x");
        assert_eq!(parse_reply(&e.generate(&req(0, &[], None, &p)).unwrap().text).answer, "seed");
    }
}
