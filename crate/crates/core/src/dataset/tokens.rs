use std::collections::HashSet;

fn is_separator(c: char) -> bool {
    c.is_whitespace() || c.is_ascii_punctuation()
}

/// Splits on whitespace and ASCII punctuation, dropping the separators.
/// Case is preserved and repeated tokens are kept, so the result is a
/// multiset in text order.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(is_separator).filter(|t| !t.is_empty()).collect()
}

/// Cuts `text` just after its `max_tokens`-th token. Returns the (possibly
/// shortened) text and whether anything was cut.
pub fn truncate_to_tokens(text: &str, max_tokens: usize) -> (&str, bool) {
    let mut count = 0;
    let mut in_token = false;
    for (i, c) in text.char_indices() {
        if is_separator(c) {
            if in_token && count == max_tokens {
                let rest_has_tokens = text[i..].chars().any(|c| !is_separator(c));
                return if rest_has_tokens {
                    (&text[..i], true)
                } else {
                    (text, false)
                };
            }
            in_token = false;
        } else if !in_token {
            in_token = true;
            count += 1;
            if count > max_tokens {
                return (&text[..i], true);
            }
        }
    }
    (text, false)
}

/// Jaccard similarity of the token *sets* (multiplicities collapsed).
/// Two empty inputs are defined to have similarity 1.
pub fn jaccard<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> f64 {
    let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
