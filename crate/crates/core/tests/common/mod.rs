#![allow(dead_code)]

use std::sync::Arc;

use sparse_debate::agents::ScriptStep;
use sparse_debate::{
    AgentProfile, DebateAgent, LocalEmbedder, Orchestrator, PruningStrategy, RunConfig, ScriptedBackend,
    ScriptedBehavior, WhitespaceTokenizer,
};

pub static EMBEDDER: LocalEmbedder = LocalEmbedder {
    dimension: 512,
    seed: 0x5eed_d0c5,
};
pub static TOKENIZER: WhitespaceTokenizer = WhitespaceTokenizer;

pub fn agent(id: &str, behavior: ScriptedBehavior) -> DebateAgent {
    agent_sized(id, 7e9, 2e12, ScriptedBackend::new(behavior))
}

pub fn agent_sized(id: &str, n: f64, m: f64, backend: ScriptedBackend) -> DebateAgent {
    DebateAgent::new(AgentProfile::new(id, n, m), Arc::new(backend))
}

pub fn fixed(steps: &[(&str, f64)]) -> ScriptedBehavior {
    ScriptedBehavior::fixed(steps.iter().map(|&(a, c)| ScriptStep::new(a, c)).collect())
}

/// Three CopyMajority agents on "A", one on "C", and a stubborn "B".
pub fn divergence_roster() -> Vec<DebateAgent> {
    vec![
        agent("a1", ScriptedBehavior::copy_majority("A", vec![0.9])),
        agent("a2", ScriptedBehavior::copy_majority("A", vec![0.9])),
        agent("a3", ScriptedBehavior::copy_majority("A", vec![0.9])),
        agent("a4", ScriptedBehavior::copy_majority("C", vec![0.9])),
        agent("a5", ScriptedBehavior::stubborn("B", 0.3)),
    ]
}

pub fn config(max_rounds: u32, pruning: PruningStrategy) -> RunConfig {
    RunConfig {
        max_rounds,
        pruning,
        parallelism: 1,
        seed: 7,
        ..RunConfig::default()
    }
}

pub fn orchestrator(agents: Vec<DebateAgent>, cfg: RunConfig) -> Orchestrator<'static> {
    Orchestrator::new(agents, &EMBEDDER, &TOKENIZER, cfg).expect("valid roster")
}

/// Twenty questions with per-question scripts. Every seventh question has
/// no gold answer; every fifth has a stubborn dissenter.
pub fn batch_dataset(count: usize) -> (sparse_debate::harness::Dataset, Vec<DebateAgent>) {
    use sparse_debate::harness::{Dataset, DatasetRecord};
    use sparse_debate::TaskKind;

    let mut records = Vec::new();
    let mut a1 = ScriptedBackend::new(ScriptedBehavior::stubborn("A", 0.5));
    let mut a2 = a1.clone();
    let mut a3 = a1.clone();
    let mut a4 = a1.clone();
    for i in 0..count {
        let id = format!("q{i:02}");
        records.push(DatasetRecord {
            id: id.clone(),
            question: format!("Question number {i}: which option?"),
            gold: (i % 7 != 6).then(|| "A".to_owned()),
            choices: None,
            task_kind: TaskKind::FreeText,
        });
        a1 = a1.with_question(&id, ScriptedBehavior::copy_majority(if i % 3 == 0 { "B" } else { "A" }, vec![0.9]));
        a2 = a2.with_question(&id, ScriptedBehavior::copy_majority("A", vec![0.7, 0.8]));
        a3 = a3.with_question(&id, fixed(&[(if i % 2 == 0 { "C" } else { "A" }, 0.6), ("A", 0.8)]));
        a4 = a4.with_question(&id, ScriptedBehavior::stubborn(if i % 5 == 0 { "B" } else { "A" }, 0.4));
    }
    let roster = vec![
        agent_sized("a1", 7e9, 2e12, a1),
        agent_sized("a2", 13e9, 2e12, a2),
        agent_sized("a3", 70e9, 2e12, a3),
        agent_sized("a4", 1e9, 1e12, a4),
    ];
    (Dataset::new("scripted", records), roster)
}
