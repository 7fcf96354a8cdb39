use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("answer text is empty")]
    EmptyAnswer,
    #[error("regeneration prompt needs at least one received answer")]
    NoReceivedAnswers,
}

const ANSWER_FORMAT: &str = "Also, evaluate how confident you are that your answer is correct. \
Your confidence score should between 0 and 1.
The format of your answer must be:
          Answer: (...)
          Explanation: (...)
          Confidence Score: (...)";

pub fn build_initial_prompt(question: &str) -> Result<String, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(format!(
        "Question: {question}\n\
         Please think it step by step and generate an answer and an explanation for your answer.\n\
         {ANSWER_FORMAT}"
    ))
}

/// Regeneration prompt with one line per received answer, in the order
/// given (callers pass ascending head id order).
pub fn build_regen_prompt(question: &str, received: &[String]) -> Result<String, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if received.is_empty() {
        return Err(PromptError::NoReceivedAnswers);
    }
    let mut out = format!("Question: {question}\n\nThere are some answers generated by other LLM agents:\n");
    for answer in received {
        out.push_str("One LLM agent answer: ");
        out.push_str(answer);
        out.push('\n');
    }
    out.push_str(
        "Using these answers as additional information, please generate a new answer and an \
         explanation for your answer.\n",
    );
    out.push_str(ANSWER_FORMAT);
    Ok(out)
}

pub fn build_peer_score_prompt(question: &str, answer: &str) -> Result<String, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if answer.trim().is_empty() {
        return Err(PromptError::EmptyAnswer);
    }
    Ok(format!(
        "Question: {question}\n\n\
         One LLM agent gave the following answer:\n{answer}\n\n\
         Evaluate how likely it is that this answer is correct. Your score should be between 0 and 1.\n\
         The format of your reply must be:\n          Score: (...)"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_prompt_layout() {
        let p = build_initial_prompt("2+2=?").unwrap();
        assert!(p.starts_with("Question: 2+2=?\nPlease think it step by step"));
        assert!(p.contains("          Answer: (...)\n          Explanation: (...)\n          Confidence Score: (...)"));
        assert_eq!(build_initial_prompt("  \n"), Err(PromptError::EmptyQuestion));
        let multi = build_initial_prompt("line one\nline two").unwrap();
        assert!(multi.contains("Question: line one\nline two\n"));
    }

    #[test]
    fn regen_prompt_lines() {
        let r = vec!["4".to_owned(), "five".to_owned()];
        let p = build_regen_prompt("2+2=?", &r).unwrap();
        assert_eq!(p.matches("One LLM agent answer:").count(), 2);
        assert!(p.contains("One LLM agent answer: 4\nOne LLM agent answer: five\n"));
        assert_eq!(p, build_regen_prompt("2+2=?", &r).unwrap());
        assert_eq!(build_regen_prompt("q", &[]), Err(PromptError::NoReceivedAnswers));
        let four: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        assert_eq!(build_regen_prompt("q", &four).unwrap().matches("One LLM agent answer:").count(), 4);
    }

    #[test]
    fn peer_prompt_is_fixed() {
        let a = build_peer_score_prompt("q", "42").unwrap();
        assert_eq!(a, build_peer_score_prompt("q", "42").unwrap());
        assert!(a.contains("Score: (...)"));
        assert!(build_peer_score_prompt("q", "").is_err());
    }
}
