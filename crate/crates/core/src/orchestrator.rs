//! End-to-end debate execution.
//!
//! A debate runs in three phases:
//!
//! 1. every agent answers the question independently (round 0);
//! 2. for rounds `1..=D`, edge weights are recomputed from rounds `0..d`,
//!    each agent's incoming edges are pruned, and each agent regenerates its
//!    answer from the previous-round answers of its retained heads; the
//!    debate stops early once all normalized answers agree;
//! 3. the last round's answers are majority-voted.
//!
//! All state mutation happens between rounds. Calls inside a round only
//! read the previous round and may run concurrently.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::agents::{
    build_initial_prompt, build_peer_score_prompt, build_regen_prompt, normalize_answer, parse_reply,
    parse_score, AgentBackend, AgentError, Generation, GenerationParams, GenerationRequest,
    PromptError, RequestPurpose, DEFAULT_PEER_SCORE,
};
use crate::matrix::PairMatrix;
use crate::mdm::{self, MdmError, RecalibrationThresholds};
use crate::parallel::parallel_map;
use crate::similarity::{cosine, local_embed, EmbeddingProvider, SimilarityError};
use crate::state::{DebateState, ParticipationCounting};
use crate::tokenize::Tokenizer;
use crate::topology::{self, EvaluationStrategy, PruningStrategy, TopologyError};
use crate::types::{
    AgentId, AgentOutput, AgentProfile, DebugExchange, NoMajorityReason, OutputFlag, Question,
    RoundRecord, Transcript, VoteOutcome, WeightsSnapshot,
};

pub const DEFAULT_MAX_ROUNDS: u32 = 5;

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("invalid debate setup: {0}")]
    Config(String),
    #[error(transparent)]
    Mdm(#[from] MdmError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("every agent failed in round {round}")]
    AllAgentsFailed { round: u32, partial: Box<Transcript> },
}

/// Per-debate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Maximum debate rounds `D`; 0 runs the initial phase only.
    pub max_rounds: u32,
    pub pruning: PruningStrategy,
    pub evaluation: EvaluationStrategy,
    pub thresholds: RecalibrationThresholds,
    pub participation: ParticipationCounting,
    pub generation: GenerationParams,
    /// Concurrent backend calls within a round.
    pub parallelism: usize,
    pub seed: u64,
    /// Record every request/response pair in the transcript.
    pub debug: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            pruning: PruningStrategy::Aat,
            evaluation: EvaluationStrategy::Mdm,
            thresholds: RecalibrationThresholds::default(),
            participation: ParticipationCounting::Head,
            generation: GenerationParams::default(),
            parallelism: 4,
            seed: 0,
            debug: false,
        }
    }
}

/// A roster entry: profile plus the backend that answers for it.
#[derive(Clone)]
pub struct DebateAgent {
    pub profile: AgentProfile,
    pub backend: Arc<dyn AgentBackend>,
}

impl DebateAgent {
    pub fn new(profile: AgentProfile, backend: Arc<dyn AgentBackend>) -> Self {
        let mut profile = profile;
        if profile.backend_ref.is_empty() {
            profile.backend_ref = backend.describe();
        }
        Self { profile, backend }
    }
}

/// A finished debate: its transcript and the final trust state.
#[derive(Debug, Clone)]
pub struct DebateRun {
    pub transcript: Transcript,
    pub state: DebateState,
}

/// Plurality vote. Ties go to the larger summed confidence, then to the
/// answer whose first supporter has the lowest index. When every answer is
/// distinct the result is [`NoMajorityReason::AllDistinct`].
pub fn majority_vote(answers: &[String], confidences: &[f64]) -> VoteOutcome {
    assert_eq!(answers.len(), confidences.len(), "one confidence per answer");
    // (answer, count, confidence sum, first supporter index), first-seen order
    let mut tally: Vec<(&str, usize, f64, usize)> = Vec::new();
    for (idx, (a, &c)) in answers.iter().zip(confidences).enumerate() {
        match tally.iter_mut().find(|t| t.0 == a.as_str()) {
            Some(t) => {
                t.1 += 1;
                t.2 += c;
            }
            None => tally.push((a.as_str(), 1, c, idx)),
        }
    }
    if tally.iter().all(|t| t.1 == 1) {
        return VoteOutcome::NoMajority {
            reason: NoMajorityReason::AllDistinct,
        };
    }
    let best = tally
        .iter()
        .max_by(|x, y| {
            x.1.cmp(&y.1)
                .then(x.2.total_cmp(&y.2))
                .then(y.3.cmp(&x.3))
        })
        .expect("non-empty tally");
    VoteOutcome::Answer {
        answer: best.0.to_owned(),
        supporters: best.1,
    }
}

/// True iff every answer is identical.
pub fn consensus(answers: &[String]) -> bool {
    answers.windows(2).all(|w| w[0] == w[1])
}

fn cosine_matrix(outputs: &[AgentOutput]) -> Result<PairMatrix<f64>, DebateError> {
    let n = outputs.len();
    let mut m = PairMatrix::filled(n, 1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = match (&outputs[i].embedding, &outputs[j].embedding) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(DebateError::Config("output is missing its embedding".into())),
            };
            let c = cosine(a, b)?;
            m.set(i, j, c);
            m.set(j, i, c);
        }
    }
    Ok(m)
}

/// Runs debates for a fixed roster.
pub struct Orchestrator<'a> {
    agents: Vec<DebateAgent>,
    embedder: &'a dyn EmbeddingProvider,
    tokenizer: &'a dyn Tokenizer,
    config: RunConfig,
}

struct CallResult {
    output: Option<AgentOutput>,
    exchanges: Vec<(String, String)>,
    error: Option<AgentError>,
}

impl<'a> Orchestrator<'a> {
    /// Validates the roster and sorts it by agent id.
    pub fn new(
        mut agents: Vec<DebateAgent>,
        embedder: &'a dyn EmbeddingProvider,
        tokenizer: &'a dyn Tokenizer,
        config: RunConfig,
    ) -> Result<Self, DebateError> {
        let n = agents.len();
        if n < 2 {
            return Err(DebateError::Config(format!("need at least two agents, got {n}")));
        }
        agents.sort_by(|a, b| a.profile.agent_id.cmp(&b.profile.agent_id));
        let ids: BTreeSet<&AgentId> = agents.iter().map(|a| &a.profile.agent_id).collect();
        if ids.len() != n {
            return Err(DebateError::Config("agent ids must be unique".into()));
        }
        if let Some(bad) = agents.iter().find(|a| !a.profile.is_valid()) {
            return Err(DebateError::Config(format!(
                "agent {} needs positive parameter and token counts",
                bad.profile.agent_id
            )));
        }
        config.thresholds.validate()?;
        config.pruning.validate(n)?;
        Ok(Self {
            agents,
            embedder,
            tokenizer,
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn profiles(&self) -> Vec<AgentProfile> {
        self.agents.iter().map(|a| a.profile.clone()).collect()
    }

    fn n(&self) -> usize {
        self.agents.len()
    }

    fn build_output(&self, idx: usize, round: u32, question: &Question, gen: &Generation) -> Result<AgentOutput, MdmError> {
        let parsed = parse_reply(&gen.text);
        let normalized = normalize_answer(&parsed.answer, question.task_kind);
        let confidence = mdm::recalibrate(parsed.confidence_raw, &self.config.thresholds)?;
        let embedded = self.embedder.embed(&gen.text);
        let mut flags = parsed.flags;
        if normalized.fell_back {
            flags.push(OutputFlag::NormalizationFallback);
        }
        if embedded.fell_back {
            flags.push(OutputFlag::EmbeddingFallback);
        }
        flags.sort();
        Ok(AgentOutput {
            agent_id: self.agents[idx].profile.agent_id.clone(),
            round,
            raw_text: gen.text.clone(),
            extracted_answer: parsed.answer,
            answer: normalized.value,
            explanation: parsed.explanation,
            confidence_raw: parsed.confidence_raw,
            confidence,
            embedding: Some(embedded.vector),
            flags,
            usage: gen.usage,
        })
    }

    /// Output used when an agent's call failed: the previous output carried
    /// forward at the floor confidence, or an empty answer in round 0.
    fn failed_output(&self, idx: usize, round: u32, prev: Option<&AgentOutput>) -> AgentOutput {
        let lo = self.config.thresholds.lo;
        let mut out = match prev {
            Some(p) => p.clone(),
            None => AgentOutput {
                agent_id: self.agents[idx].profile.agent_id.clone(),
                round,
                raw_text: String::new(),
                extracted_answer: String::new(),
                answer: String::new(),
                explanation: String::new(),
                confidence_raw: lo,
                confidence: lo,
                embedding: Some(local_embed("", self.embedder.dimension(), 0)),
                flags: Vec::new(),
                usage: None,
            },
        };
        out.round = round;
        out.confidence_raw = lo;
        out.confidence = lo;
        out.usage = None;
        if !out.flags.contains(&OutputFlag::AgentFailed) {
            out.flags.push(OutputFlag::AgentFailed);
            out.flags.sort();
        }
        out
    }

    fn call_all(
        &self,
        question: &Question,
        round: u32,
        prompts: &[String],
        received: &[Vec<String>],
        prev: Option<&[AgentOutput]>,
    ) -> Result<Vec<CallResult>, MdmError> {
        let results = parallel_map(self.n(), self.config.parallelism, |idx| {
            let request = GenerationRequest {
                question_id: &question.id,
                round,
                prompt: &prompts[idx],
                received: &received[idx],
                own_previous: prev.map(|p| p[idx].extracted_answer.as_str()),
                purpose: RequestPurpose::Answer,
                seed: self.config.seed,
                params: &self.config.generation,
            };
            match self.agents[idx].backend.generate(&request) {
                Ok(gen) => {
                    let exchanges = if gen.exchanges.is_empty() {
                        vec![(prompts[idx].clone(), gen.text.clone())]
                    } else {
                        gen.exchanges.clone()
                    };
                    self.build_output(idx, round, question, &gen).map(|o| CallResult {
                        output: Some(o),
                        exchanges,
                        error: None,
                    })
                }
                Err(e) => Ok(CallResult {
                    output: None,
                    exchanges: Vec::new(),
                    error: Some(e),
                }),
            }
        });
        results.into_iter().collect()
    }

    /// Peer scores on the previous round: `scores[i][k]` is agent `k`'s
    /// rating of agent `i`'s answer.
    fn collect_peer_scores(&self, question: &Question, round: u32, prev: &[AgentOutput]) -> PairMatrix<Option<f64>> {
        let n = self.n();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
            .collect();
        let scores = parallel_map(pairs.len(), self.config.parallelism, |p| {
            let (answer_idx, scorer) = pairs[p];
            let answer = prev[answer_idx].extracted_answer.as_str();
            let Ok(prompt) = build_peer_score_prompt(&question.text, answer) else {
                return DEFAULT_PEER_SCORE;
            };
            let request = GenerationRequest {
                question_id: &question.id,
                round,
                prompt: &prompt,
                received: &[],
                own_previous: Some(prev[scorer].extracted_answer.as_str()),
                purpose: RequestPurpose::PeerScore { answer },
                seed: self.config.seed,
                params: &self.config.generation,
            };
            match self.agents[scorer].backend.generate(&request) {
                Ok(gen) => parse_score(&gen.text).score,
                Err(e) => {
                    warn!(round, scorer, error = %e, "peer scoring failed, using default");
                    DEFAULT_PEER_SCORE
                }
            }
        });
        let mut m = PairMatrix::filled(n, None);
        for ((i, k), s) in pairs.into_iter().zip(scores) {
            m.set(i, k, Some(s));
        }
        m
    }

    fn finish_round(
        &self,
        round: u32,
        results: Vec<CallResult>,
        prev: Option<&[AgentOutput]>,
    ) -> (Vec<AgentOutput>, Vec<DebugExchange>, bool) {
        let mut outputs = Vec::with_capacity(self.n());
        let mut exchanges = Vec::new();
        let mut failures = 0;
        for (idx, r) in results.into_iter().enumerate() {
            let id = &self.agents[idx].profile.agent_id;
            if self.config.debug {
                exchanges.extend(r.exchanges.into_iter().map(|(request, response)| DebugExchange {
                    agent_id: id.clone(),
                    request,
                    response,
                }));
            }
            match r.output {
                Some(o) => outputs.push(o),
                None => {
                    failures += 1;
                    if let Some(e) = &r.error {
                        warn!(agent = %id, round, error = %e, "agent failed");
                    }
                    outputs.push(self.failed_output(idx, round, prev.map(|p| &p[idx])));
                }
            }
        }
        (outputs, exchanges, failures == self.n())
    }

    fn transcript(&self, question: &Question, rounds: Vec<RoundRecord>, terminated_early: bool) -> Transcript {
        let final_outcome = match rounds.last() {
            Some(last) => majority_vote(&last.answers(), &last.confidences()),
            None => VoteOutcome::NoMajority {
                reason: NoMajorityReason::AllDistinct,
            },
        };
        Transcript {
            question_id: question.id.clone(),
            question_text: question.text.clone(),
            gold_answer: question.gold.clone(),
            task_kind: question.task_kind,
            agents: self.profiles(),
            max_rounds: self.config.max_rounds,
            tokenizer: self.tokenizer.name().to_owned(),
            rounds_used: rounds.last().map_or(0, |r| r.round),
            rounds,
            final_outcome,
            terminated_early,
            aborted: None,
        }
    }

    fn abort(&self, question: &Question, rounds: Vec<RoundRecord>, round: u32) -> DebateError {
        let mut partial = self.transcript(question, rounds, false);
        partial.aborted = Some(format!("every agent failed in round {round}"));
        DebateError::AllAgentsFailed {
            round,
            partial: Box::new(partial),
        }
    }

    pub fn run(&self, question: &Question) -> Result<DebateRun, DebateError> {
        let n = self.n();
        let cfg = &self.config;
        let credibility = self
            .agents
            .iter()
            .map(|a| mdm::credibility(a.profile.param_count_n, a.profile.pretrain_tokens_m))
            .collect::<Result<Vec<_>, _>>()?;
        let mut state = DebateState::new(credibility, cfg.participation)?;
        let mut rounds: Vec<RoundRecord> = Vec::new();

        info!(question = %question.id, round = 0, "round started");
        let prompt = build_initial_prompt(&question.text)?;
        let prompts = vec![prompt; n];
        let received = vec![Vec::new(); n];
        let results = self.call_all(question, 0, &prompts, &received, None)?;
        let (outputs, exchanges, all_failed) = self.finish_round(0, results, None);
        if all_failed {
            return Err(self.abort(question, rounds, 0));
        }
        let answers: Vec<String> = outputs.iter().map(|o| o.answer.clone()).collect();
        rounds.push(RoundRecord {
            round: 0,
            outputs,
            debate_sets: vec![Vec::new(); n],
            weights: None,
            consensus: consensus(&answers),
            prompt_token_counts: prompts.iter().map(|p| self.tokenizer.count(p)).collect(),
            peer_scores: None,
            exchanges,
        });
        info!(question = %question.id, round = 0, "round finished");

        let mut terminated_early = false;
        for d in 1..=cfg.max_rounds {
            info!(question = %question.id, round = d, "round started");
            let prev = rounds.last().expect("round 0 exists").outputs.clone();

            // Step 1: edge weights from rounds 0..d
            let confidences: Vec<f64> = prev.iter().map(|o| o.confidence).collect();
            state.advance(&confidences, &cosine_matrix(&prev)?)?;
            let mut peer_scores = None;
            match cfg.evaluation {
                EvaluationStrategy::Mdm => state.compute_mdm_weights()?,
                EvaluationStrategy::MdmCrOnly => state.compute_cr_weights(),
                EvaluationStrategy::SelfEvaluation => {
                    state.set_raw_weights(topology::weights_self_eval(&confidences))
                }
                EvaluationStrategy::PeerEvaluation => {
                    let scores = self.collect_peer_scores(question, d, &prev);
                    state.set_raw_weights(topology::weights_peer_eval(&scores)?);
                    peer_scores = Some(PairMatrix::from_fn(n, |i, k| scores.get(i, k).unwrap_or(0.0)));
                }
            }

            // Step 2: sparse graph
            let bin = topology::build_graph(&state.weight_raw, cfg.pruning, cfg.evaluation)?;
            let weights = WeightsSnapshot {
                raw: state.weight_raw.clone(),
                bin: bin.clone(),
            };
            state.apply_mask(bin);
            let heads: Vec<Vec<usize>> = (0..n)
                .map(|tail| {
                    state
                        .weight_bin
                        .incoming(tail)
                        .filter(|(_, &b)| b == 1)
                        .map(|(h, _)| h)
                        .collect()
                })
                .collect();

            // Step 3: regeneration
            let received: Vec<Vec<String>> = heads
                .iter()
                .map(|hs| hs.iter().map(|&h| prev[h].extracted_answer.clone()).collect())
                .collect();
            let prompts: Vec<String> = received
                .iter()
                .map(|r| {
                    if r.is_empty() {
                        build_initial_prompt(&question.text)
                    } else {
                        build_regen_prompt(&question.text, r)
                    }
                })
                .collect::<Result<_, _>>()?;
            let results = self.call_all(question, d, &prompts, &received, Some(&prev))?;
            let (outputs, exchanges, all_failed) = self.finish_round(d, results, Some(&prev));
            if all_failed {
                return Err(self.abort(question, rounds, d));
            }

            // Step 4: termination
            let answers: Vec<String> = outputs.iter().map(|o| o.answer.clone()).collect();
            let agreed = consensus(&answers);
            rounds.push(RoundRecord {
                round: d,
                outputs,
                debate_sets: heads
                    .iter()
                    .map(|hs| hs.iter().map(|&h| self.agents[h].profile.agent_id.clone()).collect())
                    .collect(),
                weights: Some(weights),
                consensus: agreed,
                prompt_token_counts: prompts.iter().map(|p| self.tokenizer.count(p)).collect(),
                peer_scores,
                exchanges,
            });
            info!(question = %question.id, round = d, consensus = agreed, "round finished");
            if agreed {
                terminated_early = d < cfg.max_rounds;
                break;
            }
        }

        Ok(DebateRun {
            transcript: self.transcript(question, rounds, terminated_early),
            state,
        })
    }
}

/// Run one debate and return its transcript.
pub fn run_debate(
    question: &Question,
    agents: Vec<DebateAgent>,
    embedder: &dyn EmbeddingProvider,
    tokenizer: &dyn Tokenizer,
    config: RunConfig,
) -> Result<Transcript, DebateError> {
    Orchestrator::new(agents, embedder, tokenizer, config)?
        .run(question)
        .map(|r| r.transcript)
}

/// Rebuild the trust state from a transcript alone, recomputing each
/// round's weights and retained edges from the preceding rounds.
///
/// Returns the state after the last recorded round, plus the recomputed
/// binarized graphs for comparison with the recorded ones.
pub fn replay_state(
    transcript: &Transcript,
    config: &RunConfig,
) -> Result<(DebateState, Vec<PairMatrix<u8>>), DebateError> {
    let credibility = transcript
        .agents
        .iter()
        .map(|a| mdm::credibility(a.param_count_n, a.pretrain_tokens_m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut state = DebateState::new(credibility, config.participation)?;
    let mut graphs = Vec::new();
    for pair in transcript.rounds.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let confidences = prev.confidences();
        state.advance(&confidences, &cosine_matrix(&prev.outputs)?)?;
        match config.evaluation {
            EvaluationStrategy::Mdm => state.compute_mdm_weights()?,
            EvaluationStrategy::MdmCrOnly => state.compute_cr_weights(),
            EvaluationStrategy::SelfEvaluation => {
                state.set_raw_weights(topology::weights_self_eval(&confidences))
            }
            EvaluationStrategy::PeerEvaluation => {
                let recorded = cur
                    .peer_scores
                    .as_ref()
                    .ok_or_else(|| DebateError::Config("peer scores missing from transcript".into()))?;
                let scores = PairMatrix::from_fn(recorded.n(), |i, k| Some(*recorded.get(i, k)));
                state.set_raw_weights(topology::weights_peer_eval(&scores)?);
            }
        }
        let bin = topology::build_graph(&state.weight_raw, config.pruning, config.evaluation)?;
        graphs.push(bin.clone());
        state.apply_mask(bin);
    }
    Ok((state, graphs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn vote_examples() {
        assert_eq!(
            majority_vote(&s(&["a", "a", "b"]), &[0.5; 3]),
            VoteOutcome::Answer {
                answer: "a".into(),
                supporters: 2
            }
        );
        assert_eq!(
            majority_vote(&s(&["a", "b", "c"]), &[0.5; 3]),
            VoteOutcome::NoMajority {
                reason: NoMajorityReason::AllDistinct
            }
        );
        assert_eq!(
            majority_vote(&s(&["a", "a", "b", "b"]), &[0.8, 0.8, 0.6, 0.6]).answer(),
            Some("a")
        );
        assert_eq!(
            majority_vote(&s(&["b", "b", "a", "a"]), &[0.6, 0.6, 0.8, 0.8]).answer(),
            Some("a")
        );
        // equal confidence sums fall to the earliest supporter
        assert_eq!(
            majority_vote(&s(&["b", "a", "a", "b"]), &[0.5; 4]).answer(),
            Some("b")
        );
    }

    #[test]
    fn consensus_examples() {
        assert!(consensus(&s(&["a", "a", "a"])));
        assert!(!consensus(&s(&["a", "a", "b"])));
        let n = |x: &str| normalize_answer(x, crate::types::TaskKind::Numeric).value;
        assert!(consensus(&[n("1000.5"), n("1000.50")]));
    }
}
