use super::{AnswerSource, HarnessError};

/// What an endpoint returned for the first answer token.
#[derive(Debug, Clone, Copy)]
pub enum AnswerEvidence<'a> {
    /// `(token, logprob)` alternatives.
    Logprobs(&'a [(String, f64)]),
    Text(&'a str),
}

/// Case-folds, strips punctuation and collapses whitespace.
pub fn normalize_answer(s: &str) -> String {
    let kept: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Yes,
    No,
}

fn token_polarity(token: &str, affirmative: &[String], negative: &[String]) -> Option<Polarity> {
    let t = normalize_answer(token);
    if t.is_empty() {
        return None;
    }
    let hits = |lexemes: &[String]| {
        lexemes
            .iter()
            .map(|l| normalize_answer(l))
            .any(|l| !l.is_empty() && l.starts_with(&t))
    };
    match (hits(affirmative), hits(negative)) {
        (true, false) => Some(Polarity::Yes),
        (false, true) => Some(Polarity::No),
        _ => None,
    }
}

fn text_polarity(text: &str, affirmative: &[String], negative: &[String]) -> Option<Polarity> {
    let norm = normalize_answer(text);
    let words: Vec<&str> = norm.split(' ').collect();
    // length in words of the longest lexeme opening the answer
    let longest = |lexemes: &[String]| {
        lexemes
            .iter()
            .map(|l| normalize_answer(l))
            .filter(|l| {
                let lw: Vec<&str> = l.split(' ').collect();
                !l.is_empty() && words.len() >= lw.len() && words[..lw.len()] == lw[..]
            })
            .map(|l| l.split(' ').count())
            .max()
    };
    match (longest(affirmative), longest(negative)) {
        (Some(_), None) => Some(Polarity::Yes),
        (None, Some(_)) => Some(Polarity::No),
        (Some(a), Some(b)) if a != b => Some(if a > b { Polarity::Yes } else { Polarity::No }),
        _ => None,
    }
}

/// Splits answer mass into `(p_yes, p_no, source)`.
///
/// Logprob mode sums `exp(logprob)` over every alternative whose normalized token equals
/// a lexeme or is a prefix of one; tokens that could start both polarities are ignored.
/// Text mode assigns the full mass to the polarity whose lexeme opens the answer.
pub fn extract_yes_no(
    evidence: AnswerEvidence<'_>,
    affirmative: &[String],
    negative: &[String],
) -> Result<(f64, f64, AnswerSource), HarnessError> {
    match evidence {
        AnswerEvidence::Logprobs(tokens) => {
            let (mut yes, mut no) = (0.0, 0.0);
            for (token, logprob) in tokens {
                match token_polarity(token, affirmative, negative) {
                    Some(Polarity::Yes) => yes += logprob.exp(),
                    Some(Polarity::No) => no += logprob.exp(),
                    None => {}
                }
            }
            if yes + no > 0.0 {
                Ok((yes, no, AnswerSource::Logprobs))
            } else {
                let seen: Vec<&str> = tokens.iter().map(|(t, _)| t.as_str()).collect();
                Err(HarnessError::AnswerUnrecognized(seen.join("|")))
            }
        }
        AnswerEvidence::Text(text) => match text_polarity(text, affirmative, negative) {
            Some(Polarity::Yes) => Ok((1.0, 0.0, AnswerSource::TextMatch)),
            Some(Polarity::No) => Ok((0.0, 1.0, AnswerSource::TextMatch)),
            None => Err(HarnessError::AnswerUnrecognized(text.to_string())),
        },
    }
}
