use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::ExpertError;
use crate::cd::Direction;

pub const SYSTEM_PROMPT: &str = "You will be given a text describing two columns in a dataset. \
The text will be delimited by backticks as in a code block. The first column is also referred \
to as \"x\" and the second column as \"y\". Based on the text description between backticks, is \
it more likely that 1) x causes y, or that 2) y causes x? Please choose one and only one of \
these two options.";

const FENCE: &str = "```";

/// Returns `(system, user)` messages for one description.
pub fn build_prompt(description: &str) -> Result<(String, String), ExpertError> {
    if description.trim().is_empty() {
        return Err(ExpertError::EmptyDescription);
    }
    let user = format!("{FENCE}  {description}  {FENCE}");
    Ok((SYSTEM_PROMPT.to_string(), user))
}

static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^0-9A-Za-z])([12])\)").expect("marker regex"));
static PHRASE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(x causes y|y causes x)\b").expect("phrase regex"));

/// Extracts the chosen option from a free-text answer.
///
/// Numbered markers (`1)` / `2)`) take precedence over the phrases
/// `x causes y` / `y causes x`. Conflicting signals are an error.
pub fn parse_answer(raw: &str) -> Result<Direction, ExpertError> {
    let markers: BTreeSet<Direction> = MARKER
        .captures_iter(raw)
        .map(|c| {
            if &c[1] == "1" {
                Direction::Forward
            } else {
                Direction::Backward
            }
        })
        .collect();
    let phrases: BTreeSet<Direction> = PHRASE
        .captures_iter(raw)
        .map(|c| {
            if c[1].eq_ignore_ascii_case("x causes y") {
                Direction::Forward
            } else {
                Direction::Backward
            }
        })
        .collect();

    let single = |s: &BTreeSet<Direction>| (s.len() == 1).then(|| *s.iter().next().unwrap());
    let ambiguous = || ExpertError::Ambiguous(truncate(raw));
    match markers.len() {
        2 => Err(ambiguous()),
        1 => {
            let d = single(&markers).unwrap();
            match single(&phrases) {
                Some(p) if p != d => Err(ambiguous()),
                _ => Ok(d),
            }
        }
        _ => match phrases.len() {
            0 => Err(ExpertError::Unparseable(truncate(raw))),
            1 => Ok(single(&phrases).unwrap()),
            _ => Err(ambiguous()),
        },
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}
