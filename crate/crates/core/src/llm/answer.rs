/// Finds the chosen option label in a model reply, or `None` to abstain.
///
/// Rules, first match wins: an `Answer: X` line; then the earliest `(X)` or
/// `option X`; then a label standing alone on its own line. Labels match
/// case-insensitively and the returned value is always one of `valid_labels`.
pub fn extract_answer_label(text: &str, valid_labels: &[&str]) -> Option<String> {
    let canonical = |token: &str| -> Option<String> {
        valid_labels
            .iter()
            .find(|l| l.eq_ignore_ascii_case(token))
            .map(|l| l.to_string())
    };

    // (1) "Answer: X"
    for line in text.lines() {
        let lower = line.to_ascii_lowercase();
        if let Some(pos) = lower.find("answer") {
            let rest = &line[pos + "answer".len()..];
            let rest = rest.trim_start_matches(['*', ' ', '\t']);
            if let Some(rest) = rest.strip_prefix(':') {
                let token = leading_token(rest.trim_start_matches(['*', ' ', '\t', '(']));
                if let Some(l) = canonical(token) {
                    return Some(l);
                }
            }
        }
    }

    // (2) "(X)" or "option X", earliest occurrence
    let lower = text.to_ascii_lowercase();
    let mut best: Option<(usize, String)> = None;
    for label in valid_labels {
        let l = label.to_ascii_lowercase();
        let candidates = [
            lower.find(&format!("({l})")),
            find_word(&lower, &format!("option {l}")),
        ];
        for pos in candidates.into_iter().flatten() {
            if best.as_ref().is_none_or(|(p, _)| pos < *p) {
                best = Some((pos, label.to_string()));
            }
        }
    }
    if let Some((_, l)) = best {
        return Some(l);
    }

    // (3) lone label line
    text.lines()
        .map(|line| {
            line.trim()
                .trim_end_matches(['.', ')', ':'])
                .trim_start_matches('(')
        })
        .find_map(canonical)
}

fn leading_token(s: &str) -> &str {
    let end = s
        .char_indices()
        .find(|(_, c)| !c.is_alphanumeric())
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    &s[..end]
}

/// Position of `needle` not followed by an alphanumeric character.
fn find_word(hay: &str, needle: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(i) = hay[from..].find(needle) {
        let start = from + i;
        let end = start + needle.len();
        let before_ok = hay[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return Some(start);
        }
        from = end;
    }
    None
}
