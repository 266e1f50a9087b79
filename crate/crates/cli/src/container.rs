//! The shared binary container behind checkpoints, feature caches, pools,
//! and embedding files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic: 8 bytes (per file kind)
//! version: u32
//! meta: u32 length + UTF-8 text (structured config, TOML)
//! n_lists: u32
//!   per list:  u32 name length + name, u32 item count,
//!              per item u32 length + UTF-8 bytes
//! n_tensors: u32
//!   per tensor: u32 name length + name, u8 dtype (0 = f32, 1 = f64),
//!               u32 rows, u32 cols, rows*cols little-endian values
//! ```
//!
//! Model parameter tensors are stored as f32; embedding and normalizer
//! tensors as f64 so persisted pools reload bit-for-bit. Writes are fully
//! deterministic, so save - load - save round-trips byte-identically.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Clone)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub dtype: Dtype,
    /// Values live as f64 in memory regardless of on-disk dtype.
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn f32(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            dtype: Dtype::F32,
            data,
        }
    }

    pub fn f64(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            dtype: Dtype::F64,
            data,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Container {
    pub magic: [u8; 8],
    pub version: u32,
    pub meta: String,
    pub lists: Vec<(String, Vec<String>)>,
    pub tensors: Vec<Tensor>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            bail!("container truncated at byte {}", self.pos);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        Ok(std::str::from_utf8(self.take(len)?)
            .context("container holds invalid UTF-8")?
            .to_string())
    }
}

impl Container {
    pub fn new(magic: [u8; 8]) -> Self {
        Self {
            magic,
            version: FORMAT_VERSION,
            meta: String::new(),
            lists: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn list(&self, name: &str) -> Option<&[String]> {
        self.lists
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        put_str(&mut out, &self.meta);
        out.extend_from_slice(&(self.lists.len() as u32).to_le_bytes());
        for (name, items) in &self.lists {
            put_str(&mut out, name);
            out.extend_from_slice(&(items.len() as u32).to_le_bytes());
            for item in items {
                put_str(&mut out, item);
            }
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            assert_eq!(t.data.len(), t.rows * t.cols, "tensor {} shape", t.name);
            put_str(&mut out, &t.name);
            out.push(match t.dtype {
                Dtype::F32 => 0,
                Dtype::F64 => 1,
            });
            out.extend_from_slice(&(t.rows as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols as u32).to_le_bytes());
            match t.dtype {
                Dtype::F32 => {
                    for v in &t.data {
                        out.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
                Dtype::F64 => {
                    for v in &t.data {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8], expected_magic: [u8; 8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        let magic: [u8; 8] = r.take(8)?.try_into().unwrap();
        if magic != expected_magic {
            bail!(
                "wrong file kind: found magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&expected_magic)
            );
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            bail!("unsupported container version {version}");
        }
        let meta = r.string()?;
        let n_lists = r.u32()? as usize;
        let mut lists = Vec::with_capacity(n_lists);
        for _ in 0..n_lists {
            let name = r.string()?;
            let n = r.u32()? as usize;
            let mut items = Vec::with_capacity(n);
            for _ in 0..n {
                items.push(r.string()?);
            }
            lists.push((name, items));
        }
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = r.string()?;
            let dtype = match r.u8()? {
                0 => Dtype::F32,
                1 => Dtype::F64,
                d => bail!("unknown dtype tag {d} in tensor {name}"),
            };
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .context("tensor shape overflows")?;
            let mut data = Vec::with_capacity(n);
            match dtype {
                Dtype::F32 => {
                    let raw = r.take(n * 4)?;
                    for chunk in raw.chunks_exact(4) {
                        data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
                    }
                }
                Dtype::F64 => {
                    let raw = r.take(n * 8)?;
                    for chunk in raw.chunks_exact(8) {
                        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
                    }
                }
            }
            tensors.push(Tensor {
                name,
                rows,
                cols,
                dtype,
                data,
            });
        }
        if r.pos != buf.len() {
            bail!("{} trailing bytes after container payload", buf.len() - r.pos);
        }
        Ok(Self {
            magic,
            version,
            meta,
            lists,
            tensors,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read_from(path: &Path, expected_magic: [u8; 8]) -> Result<Self> {
        let buf = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&buf, expected_magic)
    }
}
