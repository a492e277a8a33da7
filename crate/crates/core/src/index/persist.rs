//! On-disk layout: `index.meta.json`, `vectors.f32` (little-endian f32,
//! row-major, insertion order) and `chunks.jsonl` (one chunk per line, same
//! order). The graph is not stored; loading re-inserts every entry.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HnswParams, IndexError, QueryParams, VectorIndex};
use crate::corpus::{self, Chunk};
use crate::embedding::EmbeddingVector;

pub const META_FILE: &str = "index.meta.json";
pub const VECTORS_FILE: &str = "vectors.f32";
pub const CHUNKS_FILE: &str = "chunks.jsonl";

const FORMAT: &str = "advisor-vector-index";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format: String,
    version: u32,
    dims: usize,
    count: usize,
    provider: String,
    build_params: HnswParams,
    query_params: QueryParams,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_owned(),
        source,
    }
}

fn corrupt(path: &Path, message: impl Into<String>) -> IndexError {
    IndexError::Corrupt {
        path: path.to_owned(),
        message: message.into(),
    }
}

/// Write to `<name>.tmp` then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IndexError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl VectorIndex {
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut block = Vec::with_capacity(self.len() * self.dims * 4);
        for v in &self.vectors {
            for x in v.as_slice() {
                block.extend_from_slice(&x.to_le_bytes());
            }
        }
        write_atomic(&dir.join(VECTORS_FILE), &block)?;

        let mut lines = String::new();
        for c in &self.chunks {
            lines.push_str(&serde_json::to_string(c).expect("chunk serializes"));
            lines.push('\n');
        }
        write_atomic(&dir.join(CHUNKS_FILE), lines.as_bytes())?;

        let meta = Meta {
            format: FORMAT.into(),
            version: VERSION,
            dims: self.dims,
            count: self.len(),
            provider: self.provider.clone(),
            build_params: self.build,
            query_params: self.query,
        };
        let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        write_atomic(&dir.join(META_FILE), json.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let meta_path = dir.join(META_FILE);
        let raw = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: Meta =
            serde_json::from_str(&raw).map_err(|e| corrupt(&meta_path, e.to_string()))?;
        if meta.format != FORMAT || meta.version != VERSION {
            return Err(corrupt(
                &meta_path,
                format!("unsupported format {} v{}", meta.format, meta.version),
            ));
        }

        let vec_path = dir.join(VECTORS_FILE);
        let block = fs::read(&vec_path).map_err(io_err(&vec_path))?;
        if block.len() != meta.count * meta.dims * 4 {
            return Err(corrupt(
                &vec_path,
                format!("expected {} bytes, found {}", meta.count * meta.dims * 4, block.len()),
            ));
        }

        let chunks_path = dir.join(CHUNKS_FILE);
        let chunks: Vec<Chunk> = corpus::read_jsonl(&chunks_path)
            .map_err(|e| corrupt(&chunks_path, e.to_string()))?;
        if chunks.len() != meta.count {
            return Err(corrupt(
                &chunks_path,
                format!("expected {} chunks, found {}", meta.count, chunks.len()),
            ));
        }

        let mut idx = VectorIndex::new(meta.dims, meta.provider, meta.build_params, meta.query_params);
        let row_bytes = meta.dims * 4;
        for (i, chunk) in chunks.into_iter().enumerate() {
            let row = &block[i * row_bytes..(i + 1) * row_bytes];
            let values = row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let v = EmbeddingVector::from_unit(values)
                .map_err(|e| corrupt(&vec_path, format!("row {i}: {e}")))?;
            idx.add(chunk, v)?;
        }
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::chunk;
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = VectorIndex::with_defaults(3, "fallback");
        for i in 0..20 {
            let f = i as f64 + 1.0;
            let v = EmbeddingVector::normalize(vec![f, 1.0 / f, (f * 0.7).cos()]).unwrap();
            idx.add(chunk(&format!("c{i}")), v).unwrap();
        }
        idx.save(dir.path()).unwrap();
        let back = VectorIndex::load(dir.path()).unwrap();
        assert_eq!(back.chunks(), idx.chunks());
        let q = EmbeddingVector::normalize(vec![0.3, 0.3, 0.9]).unwrap();
        let a = serde_json::to_string(&idx.exact_search(&q, 20).unwrap()).unwrap();
        let b = serde_json::to_string(&back.exact_search(&q, 20).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_vectors_are_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = VectorIndex::with_defaults(2, "fallback");
        idx.add(chunk("a"), EmbeddingVector::normalize(vec![1.0, 1.0]).unwrap()).unwrap();
        idx.save(dir.path()).unwrap();
        fs::write(dir.path().join(VECTORS_FILE), [0u8; 5]).unwrap();
        assert!(matches!(VectorIndex::load(dir.path()), Err(IndexError::Corrupt { .. })));
    }
}
