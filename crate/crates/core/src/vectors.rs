//! Named collections of fixed-length vectors and the MEMB file format.
//!
//! MEMB layout (little-endian):
//!
//! ```text
//! "MEMB"  u32 version=1  u8 role (0=train, 1=val, 2=synth)  u64 N  u64 L
//! N*L f32 row-major   N x (u16 byte length, UTF-8 id)
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io_util::{read_exact_array, read_u16, read_u32, read_u64, read_u8};

const MAGIC: &[u8; 4] = b"MEMB";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Synth,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Train => 0,
            Role::Val => 1,
            Role::Synth => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Role::Train),
            1 => Ok(Role::Val),
            2 => Ok(Role::Synth),
            c => Err(Error::format(format!("unknown role code {c}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Synth => "synth",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "val" => Ok(Role::Val),
            "synth" => Ok(Role::Synth),
            other => Err(Error::invalid(format!("unknown role {other:?}"))),
        }
    }
}

/// `N` vectors of length `L`, each with a unique id.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSet {
    role: Role,
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(role: Role, ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("empty vector set"));
        }
        if dim < 2 {
            return Err(Error::invalid(format!("vector length must be >= 2, got {dim}")));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::format(format!(
                "row-count mismatch: {} ids x {dim} != {} values",
                ids.len(),
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if id.is_empty() {
                return Err(Error::invalid("empty id"));
            }
            if id.len() > u16::MAX as usize {
                return Err(Error::invalid("id longer than 65535 bytes"));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate id {id:?}")));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entry"));
        }
        Ok(VectorSet { role, ids, dim, data })
    }

    /// Build from rows; all rows must share one length.
    pub fn from_rows(role: Role, ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::dims("rows have differing lengths"));
        }
        if rows.len() != ids.len() {
            return Err(Error::format("id count mismatch"));
        }
        Self::new(role, ids, dim, rows.concat())
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Vector length `L`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Subset by row indices, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.role, ids, self.dim, data)
    }

    /// SHA-256 over role, shape, values and ids.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        encode_vector_set(self, &mut buf).expect("in-memory write");
        h.update(&buf);
        hex::encode(h.finalize())
    }
}

pub fn read_vector_set(path: impl AsRef<Path>) -> Result<VectorSet> {
    let mut r = BufReader::new(File::open(path)?);
    decode_vector_set(&mut r)
}

/// Read a MEMB file and check that its role tag equals `role`.
pub fn read_vector_set_as(path: impl AsRef<Path>, role: Role) -> Result<VectorSet> {
    let set = read_vector_set(path)?;
    if set.role != role {
        return Err(Error::format(format!(
            "expected role {role}, file declares {}",
            set.role
        )));
    }
    Ok(set)
}

pub fn decode_vector_set(r: &mut impl Read) -> Result<VectorSet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("truncated header"))?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let role = Role::from_code(read_u8(r)?)?;
    let n = read_u64(r)? as usize;
    let l = read_u64(r)? as usize;
    if n == 0 {
        return Err(Error::invalid("empty vector set"));
    }
    let count = n
        .checked_mul(l)
        .ok_or_else(|| Error::format("shape overflow"))?;
    let data = read_exact_array(r, count).map_err(|_| Error::format("row-count mismatch"))?;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = match read_u16(r) {
            Ok(len) => len as usize,
            Err(_) => return Err(Error::format("id count mismatch")),
        };
        let mut b = vec![0u8; len];
        r.read_exact(&mut b)
            .map_err(|_| Error::format("id count mismatch"))?;
        ids.push(String::from_utf8(b).map_err(|_| Error::format("id is not UTF-8"))?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after ids"));
    }
    VectorSet::new(role, ids, l, data)
}

pub fn encode_vector_set(set: &VectorSet, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[set.role.code()])?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.dim as u64).to_le_bytes())?;
    for v in &set.data {
        w.write_all(&v.to_le_bytes())?;
    }
    for id in &set.ids {
        w.write_all(&(id.len() as u16).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    Ok(())
}

pub fn write_vector_set(set: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_vector_set(set, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(n: u64, l: u64) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend(1u32.to_le_bytes());
        b.push(0);
        b.extend(n.to_le_bytes());
        b.extend(l.to_le_bytes());
        b
    }

    #[test]
    fn round_trip_3x4() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let data: Vec<f32> = (0..12).map(|v| v as f32 * 0.5 - 1.0).collect();
        let set = VectorSet::new(Role::Val, ids, 4, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.memb");
        write_vector_set(&set, &p).unwrap();
        assert_eq!(read_vector_set(&p).unwrap(), set);
        assert!(read_vector_set_as(&p, Role::Train).is_err());
    }

    #[test]
    fn id_count_mismatch() {
        let mut b = header(2, 2);
        for v in [1f32, 2., 3., 4.] {
            b.extend(v.to_le_bytes());
        }
        b.extend(1u16.to_le_bytes());
        b.push(b'x');
        let err = decode_vector_set(&mut &b[..]).unwrap_err();
        assert!(err.to_string().contains("id count mismatch"), "{err}");
    }

    #[test]
    fn empty_set_rejected() {
        let err = decode_vector_set(&mut &header(0, 4)[..]).unwrap_err();
        assert!(err.to_string().contains("empty vector set"));
    }

    #[test]
    fn invariants_enforced() {
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(VectorSet::new(Role::Train, ids(&["a", "a"]), 2, vec![0.; 4]).is_err());
        assert!(VectorSet::new(Role::Train, ids(&["a", "b"]), 2, vec![0.; 3]).is_err());
        assert!(VectorSet::new(Role::Train, ids(&["a"]), 1, vec![0.]).is_err());
        assert!(VectorSet::new(Role::Train, ids(&["a"]), 2, vec![0., f32::INFINITY]).is_err());
        assert!(VectorSet::new(Role::Train, ids(&[""]), 2, vec![0., 1.]).is_err());
    }

    proptest! {
        #[test]
        fn write_read_is_bit_exact(
            n in 1usize..6,
            l in 2usize..7,
            seed in any::<u64>(),
            role in 0u8..3,
        ) {
            let mut rng = crate::rng::SeedRng::new(seed);
            let data: Vec<f32> = (0..n * l).map(|_| (rng.normal() * 1e3) as f32).collect();
            let ids = (0..n).map(|i| format!("id-{i}-é")).collect();
            let set = VectorSet::new(Role::from_code(role).unwrap(), ids, l, data).unwrap();
            let mut buf = Vec::new();
            encode_vector_set(&set, &mut buf).unwrap();
            let back = decode_vector_set(&mut &buf[..]).unwrap();
            prop_assert_eq!(&back, &set);
            let bits: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u32> = set.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, orig);
        }
    }
}
