//! Binary file format for a built structure.
//!
//! Little-endian throughout. The file opens with the 4-byte tag `ARIF` and a
//! one-byte ASCII format version (`1`), both checked before anything else is
//! read. Then:
//!
//! ```text
//! alpha f64 | m u64 | edges u64 | h u64 | zeta u64 | sigma u64 | chain_elements u64
//! perm [u32; m] | parent [u32; m] | size [u32; m] | representative [u8; m]
//! reps u64 | tdn [u32; reps]            (one per representative, ascending rank)
//! admissible u64 | order [u32; admissible]
//! grid u8                               (0 = none, 1 = present)
//!   dims [u64; 3] | connectivity u8 | mask [u8; dims product]
//! ```
//!
//! TDP values are not stored; they are recomputed as `tdn / size`, which
//! reproduces them exactly.

use std::fs;
use std::path::{Path, PathBuf};

use ari_core::{
    AdmissibleIndex, ClusterBounds, ClusterForest, Connectivity, GridSpec, TdpStructure,
};

pub const TAG: &[u8; 4] = b"ARIF";
pub const VERSION: u8 = b'1';

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a structure file (missing ARIF tag)")]
    BadTag,
    #[error("unsupported structure format version {found:?}, expected {VERSION:?}")]
    Version { found: char },
    #[error("structure file is truncated")]
    Truncated,
    #[error("corrupt structure file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Core(#[from] ari_core::Error),
}

type Result<T> = std::result::Result<T, PersistError>;

/// A structure together with what is needed to report it: the edge count
/// and, for voxel inputs, the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Persisted {
    pub structure: TdpStructure,
    pub edges: u64,
    pub grid: Option<GridSpec>,
}

impl Persisted {
    /// Voxel index of every vertex, when the input was a grid.
    pub fn voxel_of_vertex(&self) -> Option<Vec<usize>> {
        self.grid.as_ref().map(|g| {
            g.mask
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect()
        })
    }
}

pub fn encode(p: &Persisted) -> Vec<u8> {
    let s = &p.structure;
    let f = s.forest();
    let b = s.bounds();
    let m = s.m();
    let mut out = Vec::with_capacity(16 * m + 64);
    out.extend_from_slice(TAG);
    out.push(VERSION);
    out.extend_from_slice(&s.alpha().to_le_bytes());
    for x in [
        m as u64,
        p.edges,
        s.h() as u64,
        s.zeta() as u64,
        b.sigma(),
        b.chain_elements(),
    ] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let words = |out: &mut Vec<u8>, xs: &mut dyn Iterator<Item = u32>| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    words(&mut out, &mut s.perm().iter().copied());
    words(&mut out, &mut f.parents().iter().copied());
    words(&mut out, &mut (0..m).map(|v| f.size(v) as u32));
    out.extend(f.representative_flags().iter().map(|&r| r as u8));
    let reps: Vec<u32> = (0..m)
        .filter(|&v| f.is_representative(v))
        .map(|v| b.tdn_values()[v])
        .collect();
    out.extend_from_slice(&(reps.len() as u64).to_le_bytes());
    words(&mut out, &mut reps.into_iter());
    let order = s.admissible().order();
    out.extend_from_slice(&(order.len() as u64).to_le_bytes());
    words(&mut out, &mut order.iter().copied());
    match &p.grid {
        None => out.push(0),
        Some(g) => {
            out.push(1);
            for d in g.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.push(u8::from(g.connectivity));
            out.extend(g.mask.iter().map(|&b| b as u8));
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(PersistError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(PersistError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length field, bounded by what is left in the file.
    fn len(&mut self, width: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) / width.max(1);
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= left)
            .ok_or(PersistError::Truncated)
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(PersistError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> Result<Persisted> {
    if buf.len() < 5 || &buf[..4] != TAG {
        return Err(PersistError::BadTag);
    }
    if buf[4] != VERSION {
        return Err(PersistError::Version {
            found: buf[4] as char,
        });
    }
    let mut r = Reader { buf, pos: 5 };
    let alpha = r.f64()?;
    let m = r.len(4)?;
    let edges = r.u64()?;
    let h = r.u64()? as usize;
    let zeta = r.u64()? as usize;
    let sigma = r.u64()?;
    let chain_elements = r.u64()?;
    if !(alpha > 0.0 && alpha < 1.0) || h > m || zeta > m {
        return Err(PersistError::Corrupt(format!(
            "header out of range: alpha={alpha} m={m} h={h} zeta={zeta}"
        )));
    }

    let perm = r.u32s(m)?;
    let parent = r.u32s(m)?;
    let sizes = r.u32s(m)?;
    let representative: Vec<bool> = r.take(m)?.iter().map(|&b| b != 0).collect();
    let forest = ClusterForest::from_parents(parent, representative)?;
    if let Some(v) = (0..m).find(|&v| forest.size(v) != sizes[v] as usize) {
        return Err(PersistError::Corrupt(format!(
            "stored size of rank {v} disagrees with the parent array"
        )));
    }

    let reps = r.len(4)?;
    let rep_tdn = r.u32s(reps)?;
    let rep_ranks: Vec<usize> = (0..m).filter(|&v| forest.is_representative(v)).collect();
    if rep_ranks.len() != reps {
        return Err(PersistError::Corrupt(format!(
            "{reps} bounds stored for {} representatives",
            rep_ranks.len()
        )));
    }
    let mut tdn = vec![0u32; m];
    for (&v, &d) in rep_ranks.iter().zip(&rep_tdn) {
        tdn[v] = d;
    }
    let bounds = ClusterBounds::from_tdn(&forest, tdn, sigma)?.with_chain_elements(chain_elements);

    let n = r.len(4)?;
    let index = AdmissibleIndex::from_order(r.u32s(n)?);

    let grid = match r.u8()? {
        0 => None,
        1 => {
            let dims = [r.u64()?, r.u64()?, r.u64()?].map(|d| d as usize);
            let connectivity = Connectivity::try_from(r.u8()?)?;
            let voxels = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or(PersistError::Truncated)?;
            let mask: Vec<bool> = r.take(voxels)?.iter().map(|&b| b != 0).collect();
            let in_mask = mask.iter().filter(|&&b| b).count();
            if in_mask != m {
                return Err(PersistError::Corrupt(format!(
                    "grid mask has {in_mask} voxels for {m} vertices"
                )));
            }
            Some(GridSpec {
                dims,
                connectivity,
                mask,
            })
        }
        other => return Err(PersistError::Corrupt(format!("bad grid flag {other}"))),
    };
    if r.pos != buf.len() {
        return Err(PersistError::Corrupt("trailing bytes".into()));
    }

    let structure = TdpStructure::from_parts(alpha, h, zeta, perm, forest, bounds, index)?;
    Ok(Persisted {
        structure,
        edges,
        grid,
    })
}

pub fn save(p: &Persisted, path: &Path) -> Result<()> {
    fs::write(path, encode(p)).map_err(|source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Persisted> {
    let buf = fs::read(path).map_err(|source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ari_core::Graph;

    fn sample() -> Persisted {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let (structure, _) =
            TdpStructure::build(&g, &[0.001, 0.3, 0.002, 0.01, 0.7], 0.05).unwrap();
        Persisted {
            structure,
            edges: 3,
            grid: None,
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let p = sample();
        assert_eq!(decode(&encode(&p)).unwrap(), p);
    }

    #[test]
    fn version_is_checked_first() {
        let mut bytes = encode(&sample());
        bytes[4] = b'2';
        bytes.truncate(6);
        assert!(matches!(
            decode(&bytes),
            Err(PersistError::Version { found: '2' })
        ));
        assert!(matches!(decode(b"NOPE1"), Err(PersistError::BadTag)));
    }

    #[test]
    fn truncation_is_detected_everywhere() {
        let bytes = encode(&sample());
        for cut in 5..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn grid_metadata_survives() {
        let mut spec = GridSpec::full([2, 2, 2], Connectivity::Six);
        spec.mask[3] = false;
        let gg = ari_core::grid_to_graph(&spec).unwrap();
        let p: Vec<f64> = (0..7).map(|i| 0.001 * (i + 1) as f64).collect();
        let (structure, r) = TdpStructure::build(&gg.graph, &p, 0.05).unwrap();
        let stored = Persisted {
            structure,
            edges: r.edges as u64,
            grid: Some(spec),
        };
        let back = decode(&encode(&stored)).unwrap();
        assert_eq!(back, stored);
        assert_eq!(back.voxel_of_vertex().unwrap(), gg.voxel_of_vertex);
    }
}
