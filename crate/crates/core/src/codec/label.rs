//! Label normalization.
//!
//! Raw corpus labels such as `playlist_owner`, `fromloc.city_name` or
//! `AddToPlaylist` are rewritten into lowercase words separated by single
//! spaces so a pretrained tokenizer sees ordinary text.

use super::CodecError;

/// Normalize a raw intent or slot-type label.
///
/// Word boundaries are any non-alphanumeric character (underscores, dots,
/// hyphens, whitespace, ...) and every lowercase-to-uppercase transition.
/// The result is lowercased and joined with single spaces. The function is
/// idempotent on its own output.
pub fn normalize_label(raw: &str) -> Result<String, CodecError> {
    if raw.is_empty() {
        return Err(CodecError::InvalidLabel(raw.to_owned()));
    }

    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;

    for ch in raw.chars() {
        if !ch.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        // uppercase letters without a lowercase mapping never start a word,
        // otherwise the output would not be a fixed point
        let upper = ch.is_uppercase() && ch.to_lowercase().ne(std::iter::once(ch));
        if upper && prev_lower && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        current.extend(ch.to_lowercase().filter(|c| c.is_alphanumeric()));
        prev_lower = ch.is_lowercase();
    }
    if !current.is_empty() {
        words.push(current);
    }

    if words.is_empty() {
        return Err(CodecError::InvalidLabel(raw.to_owned()));
    }
    Ok(words.join(" "))
}
