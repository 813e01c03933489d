/// Characters split off the edges of a whitespace-delimited chunk. `#` is
/// excluded because it is the digit placeholder.
fn is_detachable(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && c != '#'
}

/// Lowercases and replaces every ASCII digit with `#`.
pub fn normalize_token(token: &str) -> String {
    token
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_ascii_digit() { '#' } else { c })
        .collect()
}

/// Whitespace tokenization with edge punctuation detached, then lowercasing
/// and per-digit `#` replacement.
///
/// ```
/// use slotfill::text::preprocess;
/// assert_eq!(preprocess("Concord."), vec!["concord", "."]);
/// assert_eq!(preprocess("December 24th"), vec!["december", "##th"]);
/// ```
pub fn preprocess(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|&&c| is_detachable(c)).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|&&c| is_detachable(c)).count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        let core: String = chars[lead..chars.len() - trail].iter().collect();
        out.push(core);
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out.into_iter().map(|t| normalize_token(&t)).collect()
}
