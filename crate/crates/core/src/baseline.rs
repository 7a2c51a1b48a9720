//! Dictionary-matching extractor: the non-neural reference system.

use crate::knowledge::KnowledgeBase;
use crate::spanlabel::find_span;

/// Returns the most frequent knowledge-base value of `attribute` whose token
/// sequence occurs contiguously in the title, or `None` (NULL) when the
/// attribute is unseen or none of its values occur. The KB value order
/// (count descending, lexicographic ties) makes the first hit the answer.
pub fn dictionary_extract(
    title_tokens: &[String],
    attribute: &str,
    kb: &KnowledgeBase,
) -> Option<Vec<String>> {
    kb.values(attribute)
        .iter()
        .find(|v| {
            find_span(title_tokens, &v.tokens)
                .expect("knowledge-base values are non-empty")
                .is_some()
        })
        .map(|v| v.tokens.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CleanTuple, CleanValue};
    use crate::rng::SplitMix64;
    use crate::tokenize::tokenize;

    fn tup(title: &str, attr: &str, value: &str) -> CleanTuple {
        CleanTuple {
            title: title.to_string(),
            attribute: attr.to_string(),
            value: CleanValue::from(value.to_string()),
        }
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn picks_most_frequent_matching_value() {
        let train: Vec<CleanTuple> = std::iter::repeat(tup("t", "color", "red"))
            .take(5)
            .chain(std::iter::repeat(tup("u", "color", "blue")).take(2))
            .collect();
        let kb = KnowledgeBase::build(&train);
        let title = toks("red and blue jacket");
        assert_eq!(dictionary_extract(&title, "color", &kb), Some(toks("red")));
    }

    #[test]
    fn unseen_attribute_returns_null() {
        let kb = KnowledgeBase::build(&[tup("t", "color", "red")]);
        assert_eq!(dictionary_extract(&toks("red shirt"), "material", &kb), None);
        assert_eq!(dictionary_extract(&toks("green shirt"), "color", &kb), None);
    }

    #[test]
    fn multi_token_values_match_as_sequences() {
        let kb = KnowledgeBase::build(&[
            tup("t", "color", "dark blue"),
            tup("u", "color", "blue"),
        ]);
        // "dark blue" and "blue" tie on count 1; lexicographic order puts
        // "blue" first, and both occur in the title.
        assert_eq!(
            dictionary_extract(&toks("nice dark blue coat"), "color", &kb),
            Some(toks("blue"))
        );
        assert_eq!(
            dictionary_extract(&toks("dark blue coat"), "color", &kb),
            Some(toks("blue"))
        );
    }

    #[test]
    fn output_is_always_a_kb_value_or_null() {
        let kb = KnowledgeBase::build(&[
            tup("a", "attr", "v1"),
            tup("b", "attr", "v2 v3"),
        ]);
        let surfaces: Vec<String> = kb.values("attr").iter().map(|v| v.surface()).collect();
        for title in ["v1 x", "v2 v3 y", "v3 v2", "zzz"] {
            match dictionary_extract(&toks(title), "attr", &kb) {
                Some(v) => assert!(surfaces.contains(&v.join(" "))),
                None => {}
            }
        }
    }

    /// Brute-force oracle: enumerate all (value, position) matches and take
    /// the one with the highest count, breaking ties by surface.
    fn oracle(title: &[String], attribute: &str, kb: &KnowledgeBase) -> Option<Vec<String>> {
        let mut candidates: Vec<(u64, String, Vec<String>)> = Vec::new();
        for v in kb.values(attribute) {
            for start in 0..title.len() {
                if start + v.tokens.len() <= title.len()
                    && title[start..start + v.tokens.len()] == v.tokens[..]
                {
                    candidates.push((v.count, v.surface(), v.tokens.clone()));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        candidates.into_iter().next().map(|(_, _, t)| t)
    }

    #[test]
    fn agrees_with_brute_force_on_random_corpora() {
        let mut rng = SplitMix64::new(2024);
        let words = ["w0", "w1", "w2", "w3", "w4", "w5"];
        for _ in 0..500 {
            let mut train = Vec::new();
            for _ in 0..rng.gen_range(12) + 1 {
                let v = if rng.gen_range(4) == 0 {
                    format!("{} {}", words[rng.gen_range(6)], words[rng.gen_range(6)])
                } else {
                    words[rng.gen_range(6)].to_string()
                };
                train.push(tup("t", "attr", &v));
            }
            let kb = KnowledgeBase::build(&train);
            let title: Vec<String> = (0..rng.gen_range(10) + 1)
                .map(|_| words[rng.gen_range(6)].to_string())
                .collect();
            assert_eq!(
                dictionary_extract(&title, "attr", &kb),
                oracle(&title, "attr", &kb),
                "title {title:?}"
            );
        }
    }

    #[test]
    fn is_deterministic_across_runs() {
        let train = vec![
            tup("a", "color", "red"),
            tup("b", "color", "blue"),
            tup("c", "color", "red"),
        ];
        let kb1 = KnowledgeBase::build(&train);
        let kb2 = KnowledgeBase::build(&train);
        let title = toks("blue red thing");
        assert_eq!(
            dictionary_extract(&title, "color", &kb1),
            dictionary_extract(&title, "color", &kb2)
        );
    }
}
