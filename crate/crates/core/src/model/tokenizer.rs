//! Byte-level tokenizer with four reserved ids.

pub const BOS: u32 = 0;
pub const SEP: u32 = 1;
pub const EOS: u32 = 2;
pub const VIS: u32 = 3;
pub const BYTE_OFFSET: u32 = 4;
pub const VOCAB_SIZE: usize = 256 + BYTE_OFFSET as usize;

pub fn tokenize(text: &str) -> Vec<u32> {
    tokenize_bytes(text.as_bytes())
}

pub fn tokenize_bytes(bytes: &[u8]) -> Vec<u32> {
    bytes.iter().map(|&b| b as u32 + BYTE_OFFSET).collect()
}

/// Inverse of [`tokenize_bytes`]; `None` if any id is a special token or
/// out of range.
pub fn detokenize_bytes(ids: &[u32]) -> Option<Vec<u8>> {
    ids.iter()
        .map(|&id| {
            id.checked_sub(BYTE_OFFSET)
                .and_then(|b| u8::try_from(b).ok())
        })
        .collect()
}

pub fn detokenize(ids: &[u32]) -> Option<String> {
    String::from_utf8(detokenize_bytes(ids)?).ok()
}
