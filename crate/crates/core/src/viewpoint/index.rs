//! The embedding table and its on-disk encoding.
//!
//! File layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes   "MVIX"
//! version      u32       1
//! dim          u32       embedding width d
//! rows         u64       number of viewpoints n
//! fingerprint  32 bytes  scene content hash
//! embeddings   n * d f32 row-major, unit norm
//! viewpoints   n * 6 f64 alpha, beta, r, tx, ty, tz
//! ```

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use crate::scene::{SceneModel, Viewpoint};

use super::IndexError;

pub const MAGIC: &[u8; 4] = b"MVIX";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 32;
/// Tolerance on stored row norms.
pub const NORM_TOLERANCE: f64 = 1e-4;
pub const MAX_DIM: usize = 1 << 16;

/// Row-aligned viewpoints and unit-norm embeddings for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewpointIndex {
    dim: usize,
    fingerprint: [u8; 32],
    viewpoints: Vec<Viewpoint>,
    embeddings: Vec<f32>,
}

/// One query hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub score: f64,
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

impl ViewpointIndex {
    pub fn from_parts(
        dim: usize,
        fingerprint: [u8; 32],
        viewpoints: Vec<Viewpoint>,
        embeddings: Vec<f32>,
    ) -> Result<Self, IndexError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(IndexError::Format(format!("dimension {dim} out of range")));
        }
        if Some(embeddings.len()) != viewpoints.len().checked_mul(dim) {
            return Err(IndexError::Format(format!(
                "{} floats do not form {} rows of width {dim}",
                embeddings.len(),
                viewpoints.len()
            )));
        }
        for (row, v) in viewpoints.iter().enumerate() {
            v.validate()
                .map_err(|e| IndexError::Format(format!("row {row}: {e}")))?;
        }
        for (row, e) in embeddings.chunks_exact(dim).enumerate() {
            let norm = dot(e, e).sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(IndexError::Format(format!("row {row}: norm {norm} is not 1")));
            }
        }
        Ok(Self {
            dim,
            fingerprint,
            viewpoints,
            embeddings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn viewpoint(&self, row: usize) -> Viewpoint {
        self.viewpoints[row]
    }

    pub fn embedding(&self, row: usize) -> &[f32] {
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    /// Fails unless the index was built from `scene`.
    pub fn check_scene(&self, scene: &SceneModel) -> Result<(), IndexError> {
        if self.fingerprint != scene.fingerprint() {
            return Err(IndexError::StaleIndex);
        }
        Ok(())
    }

    /// Exact top-`k` rows by cosine similarity. Equal scores go to the lower
    /// row. `query` must be unit norm; `k` is capped at the row count.
    pub fn query(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>, IndexError> {
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut hits: Vec<Neighbor> = self
            .embeddings
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(row, e)| Neighbor {
                row,
                score: dot(e, query),
            })
            .collect();
        let order = |a: &Neighbor, b: &Neighbor| -> Ordering {
            b.score.total_cmp(&a.score).then(a.row.cmp(&b.row))
        };
        let k = k.min(hits.len());
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_unstable_by(order);
        // Rounding can push a unit-norm dot product just past 1. Ranking
        // uses the raw value; only the reported score is clamped.
        for h in &mut hits {
            h.score = h.score.clamp(-1.0, 1.0);
        }
        Ok(hits)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.embeddings.len() * 4 + self.len() * 48);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        for x in &self.embeddings {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for v in &self.viewpoints {
            for x in [v.alpha, v.beta, v.r, v.tx, v.ty, v.tz] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Strict decoder: rejects bad magic, unknown versions, truncation,
    /// trailing bytes and rows that break the index invariants.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let bad = |m: &str| IndexError::Format(m.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported version {version}")));
        }
        let dim = u32_at(8) as usize;
        let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let fingerprint: [u8; 32] = bytes[20..52].try_into().unwrap();
        if dim == 0 || dim > MAX_DIM {
            return Err(IndexError::Format(format!("dimension {dim} out of range")));
        }
        let body = (rows as u128) * (dim as u128 * 4 + 48);
        if body != (bytes.len() - HEADER_LEN) as u128 {
            return Err(IndexError::Format(format!(
                "{} body bytes, header implies {body}",
                bytes.len() - HEADER_LEN
            )));
        }
        let rows = rows as usize;
        let emb_end = HEADER_LEN + rows * dim * 4;
        let embeddings = bytes[HEADER_LEN..emb_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let viewpoints = bytes[emb_end..]
            .chunks_exact(48)
            .map(|c| {
                let f = |i: usize| f64::from_le_bytes(c[i * 8..i * 8 + 8].try_into().unwrap());
                Viewpoint {
                    alpha: f(0),
                    beta: f(1),
                    r: f(2),
                    tx: f(3),
                    ty: f(4),
                    tz: f(5),
                }
            })
            .collect();
        Self::from_parts(dim, fingerprint, viewpoints, embeddings)
    }

    pub fn write(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes()).map_err(|e| IndexError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IndexError> {
        let bytes = fs::read(path).map_err(|e| IndexError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f32]) -> Vec<f32> {
        let n = dot(v, v).sqrt() as f32;
        v.iter().map(|x| x / n).collect()
    }

    fn small() -> ViewpointIndex {
        let rows = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let embeddings = rows.iter().flat_map(|r| unit(r)).collect();
        let viewpoints = (0..4).map(|i| Viewpoint::new(1.0, i as f64, 1.0, [0.0; 3])).collect();
        ViewpointIndex::from_parts(3, [7; 32], viewpoints, embeddings).unwrap()
    }

    #[test]
    fn ties_go_to_lower_row_and_k_is_capped() {
        let idx = small();
        let hits = idx.query(&[1.0, 0.0, 0.0], 10).unwrap();
        let rows: Vec<_> = hits.iter().map(|h| h.row).collect();
        assert_eq!(rows, [0, 2, 3, 1]);
        assert_eq!(hits[0].score, 1.0);
        assert!((hits[2].score - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(idx.query(&[1.0, 0.0, 0.0], 1).unwrap()[0].row, 0);
        assert!(matches!(idx.query(&[1.0, 0.0, 0.0], 0), Err(IndexError::InvalidK)));
        assert!(matches!(idx.query(&[1.0, 0.0], 1), Err(IndexError::DimensionMismatch { .. })));
    }

    #[test]
    fn bytes_round_trip_and_layout() {
        let idx = small();
        let bytes = idx.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 3 * 4 + 4 * 48);
        assert_eq!(&bytes[..4], b"MVIX");
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 4);
        assert_eq!(ViewpointIndex::from_bytes(&bytes).unwrap(), idx);
    }

    #[test]
    fn decoder_is_strict() {
        let bytes = small().to_bytes();
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(ViewpointIndex::from_bytes(&trailing).is_err());
        assert!(ViewpointIndex::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(ViewpointIndex::from_bytes(&magic).is_err());
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(ViewpointIndex::from_bytes(&version).is_err());
        // Scale one embedding so its norm is no longer 1.
        let mut norm = bytes.clone();
        norm[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(ViewpointIndex::from_bytes(&norm).is_err());
        // Huge row count must fail before allocating.
        let mut rows = bytes;
        rows[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(ViewpointIndex::from_bytes(&rows).is_err());
    }

    #[test]
    fn empty_index_cannot_be_queried() {
        let idx = ViewpointIndex::from_parts(3, [0; 32], vec![], vec![]).unwrap();
        assert!(matches!(idx.query(&[1.0, 0.0, 0.0], 1), Err(IndexError::EmptyIndex)));
        assert_eq!(ViewpointIndex::from_bytes(&idx.to_bytes()).unwrap(), idx);
    }
}
