//! Simulator tokenization: lowercased whitespace split with punctuation
//! detached as separate single-char tokens. Deterministic and
//! language-agnostic; shared by the n-gram memorizer and the scripted
//! transforms so both sides of the harness see identical streams.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                word.push(lc);
            }
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Join tokens back into a single string with plain spaces. The result is
/// not typographically pretty but round-trips through [`tokenize`].
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_words_and_detaches_punctuation() {
        assert_eq!(
            tokenize("Hello, world. It's me"),
            vec!["hello", ",", "world", ".", "it", "'", "s", "me"]
        );
    }

    #[test]
    fn lowercases() {
        assert_eq!(tokenize("ABC def"), vec!["abc", "def"]);
    }

    #[test]
    fn empty_and_whitespace_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t ").is_empty());
    }

    proptest! {
        #[test]
        fn detokenize_round_trips(tokens in proptest::collection::vec("[a-z]{1,8}|[.,!?]", 0..20)) {
            let tokens: Vec<String> = tokens;
            let text = detokenize(&tokens);
            prop_assert_eq!(tokenize(&text), tokens);
        }
    }
}
