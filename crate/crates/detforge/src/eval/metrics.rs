//! Text-similarity metrics: ROUGE-L F1 over code tokens and normalized
//! character-level Levenshtein similarity.

/// Split code into tokens: maximal runs of `[A-Za-z0-9_]` plus every
/// other non-whitespace character as its own single-character token.
/// Case-sensitive.
pub fn tokenize_code(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for item_a in a {
        for (j, item_b) in b.iter().enumerate() {
            curr[j + 1] = if item_a == item_b {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L F1 (balanced, β = 1) between a generated and a reference
/// token sequence.
///
/// Precision is `|LCS| / |generated|`, recall `|LCS| / |reference|`.
/// Both sequences empty scores 1.0; exactly one empty scores 0.0.
pub fn rouge_l_f1<T: PartialEq>(generated: &[T], reference: &[T]) -> f64 {
    match (generated.is_empty(), reference.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let lcs = lcs_length(generated, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / generated.len() as f64;
    let recall = lcs / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// [`rouge_l_f1`] over [`tokenize_code`] token streams.
pub fn rouge_l_f1_text(generated: &str, reference: &str) -> f64 {
    rouge_l_f1(&tokenize_code(generated), &tokenize_code(reference))
}

/// Levenshtein edit distance over characters, two-row dynamic program.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, c_a) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, c_b) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(c_a != c_b);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Normalized Levenshtein similarity: `1 − distance / max(|a|, |b|)`,
/// with two empty strings scoring 1.0.
pub fn levenshtein_similarity(generated: &str, reference: &str) -> f64 {
    let max_len = generated.chars().count().max(reference.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(generated, reference) as f64 / max_len as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer_splits_identifiers_and_punctuation() {
        assert_eq!(
            tokenize_code("where ResultType != 0"),
            toks(&["where", "ResultType", "!", "=", "0"])
        );
        assert_eq!(tokenize_code("a_b1 | c"), toks(&["a_b1", "|", "c"]));
        assert_eq!(tokenize_code("  \n\t "), Vec::<String>::new());
        // Case matters.
        assert_ne!(tokenize_code("Where"), tokenize_code("where"));
    }

    #[test]
    fn rouge_frozen_values() {
        assert_eq!(
            rouge_l_f1(&toks(&["a", "b", "c"]), &toks(&["a", "b", "c"])),
            1.0
        );
        assert_eq!(rouge_l_f1(&toks(&["a"]), &toks(&["b"])), 0.0);
        // generated [a,x,b] vs reference [a,b,y,z]: LCS = [a,b], P = 2/3,
        // R = 2/4, F1 = 4/7.
        let f1 = rouge_l_f1(&toks(&["a", "x", "b"]), &toks(&["a", "b", "y", "z"]));
        assert!((f1 - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(rouge_l_f1::<String>(&[], &[]), 1.0);
        assert_eq!(rouge_l_f1(&[], &toks(&["a"])), 0.0);
        assert_eq!(rouge_l_f1(&toks(&["a"]), &[]), 0.0);
    }

    #[test]
    fn levenshtein_frozen_values() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein_similarity("abc", "abc"), 1.0);
        assert_eq!(levenshtein_similarity("", "abc"), 0.0);
        assert!((levenshtein_similarity("kitten", "sitting") - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(levenshtein_similarity("", ""), 1.0);
    }

    #[test]
    fn unicode_counts_scalar_values() {
        assert_eq!(levenshtein("héllo", "hello"), 1);
        assert_eq!(levenshtein_similarity("é", "é"), 1.0);
    }

    proptest! {
        #[test]
        fn rouge_is_symmetric_and_bounded(a in "[ab|(). ]{0,20}", b in "[ab|(). ]{0,20}") {
            let ta = tokenize_code(&a);
            let tb = tokenize_code(&b);
            let fwd = rouge_l_f1(&ta, &tb);
            let rev = rouge_l_f1(&tb, &ta);
            prop_assert!((fwd - rev).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fwd));
            prop_assert_eq!(fwd == 1.0, ta == tb);
        }

        #[test]
        fn levenshtein_is_symmetric_and_bounded(a in ".{0,20}", b in ".{0,20}") {
            let fwd = levenshtein_similarity(&a, &b);
            let rev = levenshtein_similarity(&b, &a);
            prop_assert!((fwd - rev).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fwd));
            let ca: Vec<char> = a.chars().collect();
            let cb: Vec<char> = b.chars().collect();
            prop_assert_eq!(fwd == 1.0, ca == cb);
        }

        #[test]
        fn lcs_never_exceeds_either_length(a in proptest::collection::vec(0u8..4, 0..12), b in proptest::collection::vec(0u8..4, 0..12)) {
            let lcs = lcs_length(&a, &b);
            prop_assert!(lcs <= a.len() && lcs <= b.len());
        }
    }
}
