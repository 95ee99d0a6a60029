//! Precomputed image features and their binary file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "IMGF" | version: u32 | m: u32 | d_img: u32 | m * d_img f32 values, row-major
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::fingerprint::Digest128;
use super::DatasetError;

const MAGIC: &[u8; 4] = b"IMGF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// `m` feature vectors of width `d_img`, standing in for frozen visual
/// encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    m: usize,
    d_img: usize,
    data: Vec<f32>,
}

impl ImageFeatures {
    pub fn new(m: usize, d_img: usize, data: Vec<f32>) -> Result<Self, DatasetError> {
        if m == 0 || d_img == 0 {
            return Err(DatasetError::Features("feature matrix must have m >= 1 and d_img >= 1".into()));
        }
        if data.len() != m * d_img {
            return Err(DatasetError::Features(format!(
                "expected {} values for {m}x{d_img}, got {}",
                m * d_img,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::Features(format!("non-finite feature value at index {i}")));
        }
        Ok(Self { m, d_img, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d_img(&self) -> usize {
        self.d_img
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d_img..(i + 1) * self.d_img]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&(self.d_img as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(DatasetError::Features("missing IMGF header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(DatasetError::Features(format!("unsupported feature file version {version}")));
        }
        let (m, d_img) = (word(8) as usize, word(12) as usize);
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * m * d_img {
            return Err(DatasetError::Features(format!(
                "header declares {m}x{d_img} but payload holds {} bytes",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(m, d_img, data)
    }

    /// Digest of the serialized matrix; identical features give identical
    /// digests regardless of which file they were read from.
    pub fn content_digest(&self) -> Digest128 {
        Digest128::of_bytes(&self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            DatasetError::Features(msg) => DatasetError::Features(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_bytes()).map_err(|e| DatasetError::io(path, e))
    }
}

/// Resolves `image_ref` strings to feature files under a root directory,
/// caching what it has loaded.
#[derive(Debug, Default)]
pub struct FeatureStore {
    root: PathBuf,
    cache: Mutex<HashMap<String, Arc<ImageFeatures>>>,
}

impl FeatureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), cache: Mutex::default() }
    }

    pub fn resolve(&self, image_ref: &str) -> PathBuf {
        let p = Path::new(image_ref);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn load(&self, image_ref: &str) -> Result<Arc<ImageFeatures>, DatasetError> {
        if let Some(f) = self.cache.lock().unwrap().get(image_ref) {
            return Ok(Arc::clone(f));
        }
        let features = Arc::new(ImageFeatures::read(&self.resolve(image_ref))?);
        self.cache
            .lock()
            .unwrap()
            .insert(image_ref.to_string(), Arc::clone(&features));
        Ok(features)
    }

    /// Registers in-memory features under a reference name.
    pub fn insert(&self, image_ref: &str, features: ImageFeatures) {
        self.cache.lock().unwrap().insert(image_ref.to_string(), Arc::new(features));
    }
}
