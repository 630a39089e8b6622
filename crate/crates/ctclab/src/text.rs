//! Shared text normalization.
//!
//! Every transcript and reference string passes through [`normalize`] before
//! vocabulary construction, target encoding or error-rate scoring, so word
//! boundaries mean the same thing everywhere.

use unicode_normalization::UnicodeNormalization;

/// Normalize a transcript: NFC, lowercase, runs of whitespace collapsed to a
/// single ASCII space, leading/trailing whitespace removed.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let lower = nfc.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    let mut in_space = true; // swallow leading whitespace
    for ch in lower.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push(' ');
                in_space = true;
            }
        } else {
            out.push(ch);
            in_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Split a normalized string into words. Empty input yields no words.
pub fn words(text: &str) -> Vec<&str> {
    text.split(' ').filter(|w| !w.is_empty()).collect()
}
