use std::sync::LazyLock;

use regex::Regex;

use crate::types::TaskKind;

static FIRST_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?(?:\d[\d,]*(?:\.\d+)?|\.\d+)").unwrap());
static UPPER_CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-J]\b").unwrap());
static LOWER_CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[a-j]\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedAnswer {
    pub value: String,
    /// Set when the task-specific rule found nothing and free-text
    /// normalization was used instead.
    pub fell_back: bool,
}

/// Trim, collapse whitespace, lowercase, and drop trailing sentence
/// punctuation.
pub fn normalize_free_text(answer: &str) -> String {
    let collapsed = answer.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .to_lowercase()
        .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | ';' | ':' | '!' | '?'))
        .to_owned()
}

fn canonical_number(token: &str) -> String {
    let cleaned: String = token.chars().filter(|&c| c != ',').collect();
    let (negative, body) = match cleaned.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, cleaned.as_str()),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let int_part = int_part.trim_start_matches('0');
    let int_part = if int_part.is_empty() { "0" } else { int_part };
    let frac_part = frac_part.trim_end_matches('0');
    let mut out = String::new();
    if negative && !(int_part == "0" && frac_part.is_empty()) {
        out.push('-');
    }
    out.push_str(int_part);
    if !frac_part.is_empty() {
        out.push('.');
        out.push_str(frac_part);
    }
    out
}

/// "I think ..." : a capital I followed by a lowercase word is the pronoun.
fn is_pronoun(text: &str, letter: &str, end: usize) -> bool {
    letter == "I" && {
        let mut rest = text[end..].chars();
        rest.next() == Some(' ') && rest.next().is_some_and(|c| c.is_lowercase())
    }
}

/// Canonical form used for voting, consensus, and scoring.
///
/// Numeric answers keep the first number with separators and trailing zeros
/// removed; multiple-choice answers keep the first standalone letter A-J
/// (uppercase preferred over lowercase).
pub fn normalize_answer(answer: &str, kind: TaskKind) -> NormalizedAnswer {
    let task_specific = match kind {
        TaskKind::FreeText => {
            return NormalizedAnswer {
                value: normalize_free_text(answer),
                fell_back: false,
            }
        }
        TaskKind::Numeric => FIRST_NUMBER.find(answer).map(|m| canonical_number(m.as_str())),
        TaskKind::MultipleChoice => UPPER_CHOICE
            .find_iter(answer)
            .find(|m| !is_pronoun(answer, m.as_str(), m.end()))
            .map(|m| m.as_str().to_owned())
            .or_else(|| LOWER_CHOICE.find(answer).map(|m| m.as_str().to_ascii_uppercase())),
    };
    match task_specific {
        Some(value) => NormalizedAnswer {
            value,
            fell_back: false,
        },
        None => NormalizedAnswer {
            value: normalize_free_text(answer),
            fell_back: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str, k: TaskKind) -> String {
        normalize_answer(s, k).value
    }

    #[test]
    fn numeric() {
        assert_eq!(norm("  The answer is 1,000.50 ", TaskKind::Numeric), "1000.5");
        assert_eq!(norm("42.0", TaskKind::Numeric), "42");
        assert_eq!(norm("007", TaskKind::Numeric), "7");
        assert_eq!(norm("-0.00", TaskKind::Numeric), "0");
        assert_eq!(norm("x = -3.25 m", TaskKind::Numeric), "-3.25");
        assert_eq!(norm(".5", TaskKind::Numeric), "0.5");
        assert_eq!(norm("1000.5", TaskKind::Numeric), norm("1000.50", TaskKind::Numeric));
        let none = normalize_answer("No Idea", TaskKind::Numeric);
        assert!(none.fell_back);
        assert_eq!(none.value, "no idea");
    }

    #[test]
    fn multiple_choice() {
        assert_eq!(norm("(C)", TaskKind::MultipleChoice), "C");
        assert_eq!(norm("I think it is a B", TaskKind::MultipleChoice), "B");
        assert_eq!(norm("answer: d", TaskKind::MultipleChoice), "D");
        assert!(normalize_answer("none of them", TaskKind::MultipleChoice).fell_back);
    }

    #[test]
    fn free_text() {
        assert_eq!(norm("Paris.", TaskKind::FreeText), "paris");
        assert_eq!(norm("paris", TaskKind::FreeText), "paris");
        assert_eq!(norm("  New\n  York  ", TaskKind::FreeText), "new york");
    }
}
