use std::sync::LazyLock;

use regex::Regex;

use crate::types::OutputFlag;

/// Confidence assumed when a reply carries none.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;
/// Score assumed when a peer-score reply carries none.
pub const DEFAULT_PEER_SCORE: f64 = 0.5;

static LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(answer|explanation|confidence\s*score)\s*:").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)").unwrap());
static SCORE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bscore\s*:\s*\(?\s*([-+]?(?:\d+\.?\d*|\.\d+))").unwrap());

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub answer: String,
    pub explanation: String,
    /// Always in `[0, 1]`.
    pub confidence_raw: f64,
    /// Sorted, deduplicated.
    pub flags: Vec<OutputFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Field {
    Answer,
    Explanation,
    Confidence,
}

fn strip_field(value: &str) -> &str {
    let v = value.trim();
    match v.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        Some(inner) => inner.trim(),
        None => v,
    }
}

fn clamp_unit(value: f64, flags: &mut Vec<OutputFlag>) -> f64 {
    if (0.0..=1.0).contains(&value) {
        value
    } else {
        flags.push(OutputFlag::ClampedConfidence);
        value.clamp(0.0, 1.0)
    }
}

/// Extract the answer, explanation, and confidence fields of a reply.
///
/// Labels are matched case-insensitively at their first occurrence; each
/// field runs to the next label. Never fails: missing pieces fall back to
/// defaults and are reported in `flags`.
pub fn parse_reply(raw: &str) -> ParsedReply {
    // every label occurrence in text order: (field, start, end)
    let labels: Vec<(Field, usize, usize)> = LABEL
        .captures_iter(raw)
        .map(|caps| {
            let m = caps.get(0).unwrap();
            let name = caps[1].to_ascii_lowercase();
            let field = if name == "answer" {
                Field::Answer
            } else if name == "explanation" {
                Field::Explanation
            } else {
                Field::Confidence
            };
            (field, m.start(), m.end())
        })
        .collect();
    // first occurrence of a field; its value runs to the next label of any kind
    let value_of = |field: Field| -> Option<&str> {
        let idx = labels.iter().position(|(f, _, _)| *f == field)?;
        let start = labels[idx].2;
        let end = labels.get(idx + 1).map_or(raw.len(), |next| next.1);
        Some(strip_field(&raw[start..end]))
    };

    let mut flags = Vec::new();

    let answer = match value_of(Field::Answer) {
        Some(a) => a.to_owned(),
        None => {
            flags.push(OutputFlag::FallbackWholeText);
            let prefix = labels.first().map_or(raw, |(_, start, _)| &raw[..*start]).trim();
            if prefix.is_empty() { raw.trim() } else { prefix }.to_owned()
        }
    };

    let explanation = match value_of(Field::Explanation) {
        Some(e) if !e.is_empty() => e.to_owned(),
        _ => {
            flags.push(OutputFlag::MissingExplanation);
            String::new()
        }
    };

    let parsed = value_of(Field::Confidence)
        .and_then(|c| NUMBER.find(c))
        .and_then(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.is_finite());
    let confidence_raw = match parsed {
        Some(v) => clamp_unit(v, &mut flags),
        None => {
            flags.push(OutputFlag::MissingConfidence);
            DEFAULT_CONFIDENCE
        }
    };

    flags.sort();
    flags.dedup();
    ParsedReply {
        answer,
        explanation,
        confidence_raw,
        flags,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedScore {
    pub score: f64,
    pub missing: bool,
    pub clamped: bool,
}

/// Read a `Score: (x)` line; defaults to 0.5 when absent.
pub fn parse_score(raw: &str) -> ParsedScore {
    let value = SCORE
        .captures(raw)
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| v.is_finite());
    match value {
        Some(v) => ParsedScore {
            score: v.clamp(0.0, 1.0),
            missing: false,
            clamped: !(0.0..=1.0).contains(&v),
        },
        None => ParsedScore {
            score: DEFAULT_PEER_SCORE,
            missing: true,
            clamped: false,
        },
    }
}
