//! Tokenization shared by captions, templates and lexicons.
//!
//! A caption is split on Unicode whitespace; leading and trailing punctuation
//! of each chunk is peeled off into single-character tokens, so
//! `"Therefore,"` becomes `["therefore", ","]`. The reserved literals
//! [`MASK_TOKEN`] and [`ANSWER_TOKEN`] always survive as whole tokens.

/// Replacement for attribute-revealing words.
pub const MASK_TOKEN: &str = "[MASK]";
/// Answer slot terminating every prompt.
pub const ANSWER_TOKEN: &str = "[Answer]";

const RESERVED: [&str; 2] = [MASK_TOKEN, ANSWER_TOKEN];

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Returns true when `text` contains a reserved literal anywhere.
pub fn contains_reserved(text: &str) -> bool {
    RESERVED.iter().any(|r| text.contains(r))
}

/// Lowercases and collapses runs of whitespace into single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Lowercased tokens. Reserved tokens keep their canonical casing.
pub fn tokenize(text: &str) -> Vec<String> {
    surface_tokens(text).into_iter().map(|t| if is_reserved(&t) { t } else { t.to_lowercase() }).collect()
}

/// Tokens with their original casing. Lexicon matching lowercases on the fly.
pub fn surface_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    if chunk.is_empty() {
        return;
    }
    // Earliest reserved literal inside the chunk, if any.
    let hit = RESERVED.iter().filter_map(|r| chunk.find(r).map(|pos| (pos, *r))).min_by_key(|(pos, _)| *pos);
    if let Some((pos, literal)) = hit {
        split_chunk(&chunk[..pos], out);
        out.push(literal.to_string());
        split_chunk(&chunk[pos + literal.len()..], out);
        return;
    }

    let mut leading = Vec::new();
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if !is_punct(c) {
            break;
        }
        leading.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }
    let mut trailing = Vec::new();
    while let Some(c) = rest.chars().next_back() {
        if !is_punct(c) {
            break;
        }
        trailing.push(c.to_string());
        rest = &rest[..rest.len() - c.len_utf8()];
    }
    out.extend(leading);
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.extend(trailing.into_iter().rev());
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_control())
}

/// True for tokens made of punctuation only.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punct)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_trailing_punctuation() {
        assert_eq!(
            tokenize("Therefore, the gender is [Answer]"),
            vec!["therefore", ",", "the", "gender", "is", "[Answer]"]
        );
    }

    #[test]
    fn keeps_inner_punctuation() {
        assert_eq!(tokenize("a well-lit room."), vec!["a", "well-lit", "room", "."]);
        assert_eq!(tokenize("\"hi!\""), vec!["\"", "hi", "!", "\""]);
    }

    #[test]
    fn reserved_tokens_survive_adjacent_punctuation() {
        assert_eq!(tokenize("([MASK])."), vec!["(", "[MASK]", ")", "."]);
        assert_eq!(tokenize("x[Answer]"), vec!["x", "[Answer]"]);
    }

    #[test]
    fn surface_keeps_case() {
        assert_eq!(surface_tokens("A Man"), vec!["A", "Man"]);
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("  A  Man\tsits \n"), "a man sits");
    }

    #[test]
    fn unicode_whitespace() {
        assert_eq!(tokenize("a\u{2003}b"), vec!["a", "b"]);
    }
}
