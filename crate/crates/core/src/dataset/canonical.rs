use unicode_normalization::UnicodeNormalization;

/// Canonical text form used for equality tests: NFC, trimmed, with every
/// run of whitespace collapsed to a single space.
pub fn canonicalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_and_trims() {
        assert_eq!(canonicalize("a  b "), "a b");
        assert_eq!(canonicalize("\t x\n\ny  "), "x y");
        assert_eq!(canonicalize(""), "");
        assert_eq!(canonicalize("   "), "");
    }

    #[test]
    fn idempotent() {
        for s in ["a b", "caf\u{0065}\u{0301}  au lait", "  ok\u{3000}wide "] {
            let once = canonicalize(s);
            assert_eq!(canonicalize(&once), once);
        }
    }
}
