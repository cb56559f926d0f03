//! Whitespace + punctuation tokenizer.

/// Natural text is lowercased and punctuation split into its own tokens;
/// synthetic tokens are kept verbatim.
pub fn tokenize(text: &str, natural: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        if !natural {
            tokens.push(word.to_string());
            continue;
        }
        let mut current = String::new();
        for ch in word.chars() {
            if matches!(ch, '.' | ',' | '!' | '?' | ';' | ':') {
                if !current.is_empty() {
                    tokens.push(current.to_lowercase());
                    current = String::new();
                }
                tokens.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            tokens.push(current.to_lowercase());
        }
    }
    tokens
}

/// Space-joined token sequence; the inverse of [`tokenize`] on already
/// tokenized text.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}
