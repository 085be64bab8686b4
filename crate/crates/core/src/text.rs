//! String normalization shared by lookups, matching and alignment.

use std::collections::BTreeSet;

/// Trim, collapse internal whitespace runs to a single space, lowercase.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Lowercased word tokens. Any character that is not alphanumeric acts as a
/// separator, so whitespace and punctuation both split and are dropped.
pub fn word_tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

/// Normalized equality without the caller holding onto the normalized forms.
pub fn same_text(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_and_lowercases() {
        assert_eq!(normalize("  John   Quincy\tAdams "), "john quincy adams");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn tokens_split_on_punctuation() {
        let t = word_tokens("place-of birth, (USA)");
        let want: BTreeSet<String> = ["place", "of", "birth", "usa"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(t, want);
        assert!(word_tokens("--").is_empty());
    }

    #[test]
    fn tokens_are_a_set() {
        assert_eq!(word_tokens("name Name NAME").len(), 1);
    }
}
