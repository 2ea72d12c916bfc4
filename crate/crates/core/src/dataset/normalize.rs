use crate::text::strip_punctuation;

const ARTICLES: [&str; 3] = ["the", "a", "an"];

/// Canonical form used for every answer comparison.
///
/// Lowercases, removes every character that is not a letter, digit or
/// whitespace, drops standalone articles and collapses whitespace.
/// Non-ASCII letters survive. The function is idempotent.
pub fn normalize_answer(text: &str) -> String {
    strip_punctuation(&text.to_lowercase())
        .split_whitespace()
        .filter(|tok| !ARTICLES.contains(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_answer("The Polarization!"), "polarization");
        assert_eq!(normalize_answer("a  tissue"), "tissue");
        assert_eq!(normalize_answer("H2SO4 (sulphuric acid)"), "h2so4 sulphuric acid");
        assert_eq!(normalize_answer(""), "");
    }

    #[test]
    fn articles_only_as_whole_tokens() {
        assert_eq!(normalize_answer("An answer"), "answer");
        assert_eq!(normalize_answer("theory of a thermal anomaly"), "theory of thermal anomaly");
    }

    #[test]
    fn keeps_non_ascii_letters() {
        assert_eq!(normalize_answer("Ångström unit"), "ångström unit");
    }

    proptest! {
        #[test]
        fn idempotent_and_clean(s in "\\PC{0,40}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once.clone());
            for c in once.chars() {
                prop_assert!(c == ' ' || c.is_alphanumeric());
                prop_assert!(c.to_lowercase().eq(std::iter::once(c)));
            }
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
            for tok in once.split(' ') {
                prop_assert!(!ARTICLES.contains(&tok));
            }
        }
    }
}
