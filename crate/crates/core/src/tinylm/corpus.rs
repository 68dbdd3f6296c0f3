//! Built-in synthetic corpora for training toy models without external
//! data. Each corpus is a deterministic list of byte-token sequences.

use super::tokenizer::{ByteTokenizer, TokenId};

const SENTENCES: &[&str] = &[
    "the quick brown fox jumps over the lazy dog.",
    "pack my box with five dozen liquor jugs.",
    "a loop repeats the same step for each item in a list.",
    "recursion solves a problem by calling itself on smaller parts.",
    "sort the numbers first and then search with two pointers.",
    "a hash map stores keys so lookup takes constant time.",
    "greedy choices work when local best implies global best.",
    "dynamic programming stores answers to avoid repeated work.",
    "binary search halves the range until the target is found.",
    "a stack pops the most recent item first.",
];

/// Named built-in corpora:
/// - `cycle3`: one long sequence repeating three symbols (minimal sanity
///   corpus for loss-decrease checks).
/// - `sentences`: short English sentences about programming techniques,
///   repeated; gives trained models letter-level structure.
pub fn builtin_corpus(name: &str) -> Option<Vec<Vec<TokenId>>> {
    let tok = ByteTokenizer;
    match name {
        "cycle3" => {
            let seq: Vec<TokenId> = (0..300).map(|i| [b'a', b'b', b'c'][i % 3] as TokenId).collect();
            Some(vec![seq])
        }
        "sentences" => Some(
            SENTENCES
                .iter()
                .cycle()
                .take(40)
                .map(|s| tok.encode(s))
                .collect(),
        ),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_exist_and_are_nonempty() {
        for name in ["cycle3", "sentences"] {
            let corpus = builtin_corpus(name).unwrap();
            assert!(!corpus.is_empty());
            assert!(corpus.iter().all(|s| s.len() >= 2));
        }
        assert!(builtin_corpus("nope").is_none());
    }
}
