use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use super::canonical::canonicalize;
use super::record::PreferenceRecord;

/// 128-bit content digest (truncated SHA-256).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest128(pub [u8; 16]);

impl Digest128 {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        let full = Sha256::digest(bytes);
        let mut out = [0u8; 16];
        out.copy_from_slice(&full[..16]);
        Digest128(out)
    }
}

impl fmt::Display for Digest128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

fn push_field(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

/// Content fingerprint of a record. Id, source and judgment are excluded, so
/// the same comparison imported from two sources collides. The image is
/// identified by its reference string.
pub fn fingerprint(record: &PreferenceRecord) -> Digest128 {
    let image = record
        .image_ref
        .as_deref()
        .map(|r| Digest128::of_bytes(r.as_bytes()));
    fingerprint_with_image(record, image)
}

/// Like [`fingerprint`], with the image identified by a caller-supplied
/// digest (typically [`super::ImageFeatures::content_digest`]).
pub fn fingerprint_with_image(record: &PreferenceRecord, image: Option<Digest128>) -> Digest128 {
    let mut h = Sha256::new();
    push_field(&mut h, canonicalize(&record.prompt).as_bytes());
    push_field(&mut h, canonicalize(&record.chosen).as_bytes());
    push_field(&mut h, canonicalize(&record.rejected).as_bytes());
    match image {
        Some(d) => {
            h.update([1u8]);
            h.update(d.0);
        }
        None => h.update([0u8]),
    }
    let full = h.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&full[..16]);
    Digest128(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::record::{sample_record, Source};

    #[test]
    fn ignores_id_and_source() {
        let a = sample_record("a");
        let mut b = sample_record("zzz");
        b.source = Source::RlaifV;
        b.chosen = format!(" {} ", b.chosen.replace(' ', "  "));
        assert_eq!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn sensitive_to_content() {
        let a = sample_record("a");
        let mut b = a.clone();
        b.chosen.push('!');
        assert_ne!(fingerprint(&a), fingerprint(&b));
        let mut c = a.clone();
        c.image_ref = None;
        assert_ne!(fingerprint(&a), fingerprint(&c));
    }

    #[test]
    fn field_boundaries_matter() {
        let mut a = sample_record("a");
        a.prompt = "ab".into();
        a.chosen = "c".into();
        let mut b = a.clone();
        b.prompt = "a".into();
        b.chosen = "bc".into();
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }
}
