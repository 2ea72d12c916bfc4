/// Reference with no word tokens.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("word error rate is undefined for an empty reference")]
    EmptyReference,
}

/// Minimum number of word substitutions, deletions and insertions turning
/// `reference` into `hypothesis`.
pub fn word_edit_distance<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> usize {
    let n = hypothesis.len();
    let mut prev: Vec<usize> = (0..=n).collect();
    let mut curr = vec![0; n + 1];
    for (i, r) in reference.iter().enumerate() {
        curr[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r.as_ref() != h.as_ref());
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[n]
}

/// Edit distance over lowercased whitespace tokens, divided by the reference
/// length. Punctuation is compared as produced.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<f64, MetricError> {
    let lower = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>();
    let r = lower(reference);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let h = lower(hypothesis);
    Ok(word_edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(word_error_rate("first riddle", "first riddle"), Ok(0.0));
        assert_eq!(word_error_rate("first riddle", "test riddle"), Ok(0.5));
        assert_eq!(word_error_rate("a b c", ""), Ok(1.0));
        assert_eq!(word_error_rate("   ", "x"), Err(MetricError::EmptyReference));
    }

    #[test]
    fn case_insensitive_and_insertions() {
        assert_eq!(word_error_rate("First Riddle", "first RIDDLE"), Ok(0.0));
        assert_eq!(word_error_rate("a", "a b c"), Ok(2.0));
        assert_eq!(word_error_rate("riddle,", "riddle"), Ok(1.0));
    }
}
