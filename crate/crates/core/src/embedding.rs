//! User and item embedding matrices with text and binary persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{read_exact, read_string, read_u64, write_str, InteractionGraph};
use crate::rng::{self, Stream};

const EMBEDDING_MAGIC: &[u8; 4] = b"RNEE";
const EMBEDDING_VERSION: u8 = 1;

/// Inner product accumulated in `f64`, left to right.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

/// Dense row-major user (`n x d`) and item (`T x d`) matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    users: Vec<f32>,
    items: Vec<f32>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl EmbeddingStore {
    /// Draws every entry uniformly from `[-0.5/d, 0.5/d]`; users first, then items.
    pub fn init(user_count: usize, item_count: usize, dim: usize, seed: u64) -> Result<Self> {
        let user_ids = (0..user_count).map(|u| u.to_string()).collect();
        let item_ids = (0..item_count).map(|i| i.to_string()).collect();
        Self::init_with_ids(user_ids, item_ids, dim, seed)
    }

    pub fn init_for_graph(graph: &InteractionGraph, dim: usize, seed: u64) -> Result<Self> {
        Self::init_with_ids(graph.user_ids().to_vec(), graph.item_ids().to_vec(), dim, seed)
    }

    fn init_with_ids(user_ids: Vec<String>, item_ids: Vec<String>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be at least 1".into()));
        }
        if user_ids.is_empty() || item_ids.is_empty() {
            return Err(Error::InvalidConfig("need at least one user and one item".into()));
        }
        let bound = 0.5 / dim as f32;
        let mut rng = rng::stream(seed, Stream::Init);
        let mut draw = |len: usize| -> Vec<f32> { (0..len).map(|_| rng.gen_range(-bound..=bound)).collect() };
        let users = draw(user_ids.len() * dim);
        let items = draw(item_ids.len() * dim);
        Ok(EmbeddingStore {
            dim,
            users,
            items,
            user_ids,
            item_ids,
        })
    }

    /// Builds a store from explicit row-major matrices.
    pub fn from_matrices(dim: usize, users: Vec<f32>, items: Vec<f32>) -> Result<Self> {
        if dim == 0 || !users.len().is_multiple_of(dim) || !items.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "matrices of {} and {} entries are not multiples of dimension {dim}",
                users.len(),
                items.len()
            )));
        }
        let user_ids = (0..users.len() / dim).map(|u| u.to_string()).collect();
        let item_ids = (0..items.len() / dim).map(|i| i.to_string()).collect();
        Ok(EmbeddingStore {
            dim,
            users,
            items,
            user_ids,
            item_ids,
        })
    }

    pub fn with_ids(mut self, user_ids: Vec<String>, item_ids: Vec<String>) -> Result<Self> {
        if user_ids.len() != self.user_count() || item_ids.len() != self.item_count() {
            return Err(Error::DimensionMismatch("id table length differs from row count".into()));
        }
        self.user_ids = user_ids;
        self.item_ids = item_ids;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user_count(&self) -> usize {
        self.users.len() / self.dim
    }

    pub fn item_count(&self) -> usize {
        self.items.len() / self.dim
    }

    pub fn user(&self, u: usize) -> &[f32] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f32] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_mut(&mut self, u: usize) -> &mut [f32] {
        &mut self.users[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.items[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_matrix(&self) -> &[f32] {
        &self.users
    }

    pub fn item_matrix(&self) -> &[f32] {
        &self.items
    }

    pub(crate) fn matrices_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.users, &mut self.items)
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|x| x == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    /// `E_U^u · E_I^i`.
    pub fn score(&self, u: usize, i: usize) -> f64 {
        dot(self.user(u), self.item(i))
    }

    pub fn is_finite(&self) -> bool {
        self.users.iter().chain(&self.items).all(|x| x.is_finite())
    }

    pub fn save(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        match format {
            Format::Text => self.write_text(&mut w)?,
            Format::Binary => self.write_binary(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }

    /// Loads either format, detected from the leading bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let mut r = BufReader::new(file);
        let head = r.fill_buf()?;
        if head.starts_with(EMBEDDING_MAGIC) {
            Self::read_binary(r)
        } else {
            Self::read_text(r)
        }
    }

    /// Two word2vec-style sections, users then items, each headed by
    /// `<row_count> <dim>` and followed by `<id> <v1> ... <vd>` rows.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        for (ids, matrix) in [(&self.user_ids, &self.users), (&self.item_ids, &self.items)] {
            writeln!(w, "{} {}", ids.len(), self.dim)?;
            for (id, row) in ids.iter().zip(matrix.chunks_exact(self.dim)) {
                write!(w, "{id}")?;
                for v in row {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let mut sections = Vec::with_capacity(2);
        let mut dim = None;
        for section in ["user", "item"] {
            let header = lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::CorruptFile(format!("missing {section} header")))?;
            let mut parts = header.split_whitespace().map(str::parse::<usize>);
            let (rows, d) = match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(rows)), Some(Ok(d)), None) if d > 0 => (rows, d),
                _ => return Err(Error::CorruptFile(format!("bad {section} header {header:?}"))),
            };
            if let Some(prev) = dim {
                if prev != d {
                    return Err(Error::DimensionMismatch(format!(
                        "user dimension {prev} differs from item dimension {d}"
                    )));
                }
            }
            dim = Some(d);
            let mut ids = Vec::with_capacity(rows);
            let mut matrix = Vec::with_capacity(rows * d);
            for row in 0..rows {
                let line = lines.next().transpose()?.ok_or_else(|| {
                    Error::CorruptFile(format!("{section} section truncated at row {row}"))
                })?;
                let mut fields = line.split(' ');
                let id = fields
                    .next()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| Error::CorruptFile(format!("{section} row {row} has no id")))?;
                let before = matrix.len();
                for f in fields {
                    matrix.push(f.parse::<f32>().map_err(|_| {
                        Error::CorruptFile(format!("{section} row {row}: bad value {f:?}"))
                    })?);
                }
                if matrix.len() - before != d {
                    return Err(Error::DimensionMismatch(format!(
                        "{section} row {row} has {} values, expected {d}",
                        matrix.len() - before
                    )));
                }
                ids.push(id.to_string());
            }
            sections.push((ids, matrix));
        }
        if lines.next().transpose()?.is_some_and(|l| !l.trim().is_empty()) {
            return Err(Error::CorruptFile("trailing data after item section".into()));
        }
        let (item_ids, items) = sections.pop().unwrap();
        let (user_ids, users) = sections.pop().unwrap();
        Ok(EmbeddingStore {
            dim: dim.unwrap(),
            users,
            items,
            user_ids,
            item_ids,
        })
    }

    /// Magic `RNEE`, version byte, `u64` user count, item count and
    /// dimension, the `f32` rows (users then items) and the id sidecar as
    /// length-prefixed UTF-8. All little-endian.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&[EMBEDDING_VERSION])?;
        for n in [self.user_count(), self.item_count(), self.dim] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in self.users.iter().chain(&self.items) {
            w.write_all(&v.to_le_bytes())?;
        }
        for id in self.user_ids.iter().chain(&self.item_ids) {
            write_str(w, id)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::CorruptFile("bad embedding magic".into()));
        }
        let mut version = [0u8; 1];
        read_exact(&mut r, &mut version)?;
        if version[0] != EMBEDDING_VERSION {
            return Err(Error::Version {
                found: version[0],
                expected: EMBEDDING_VERSION,
            });
        }
        let users = read_u64(&mut r)? as usize;
        let items = read_u64(&mut r)? as usize;
        let dim = read_u64(&mut r)? as usize;
        if dim == 0 {
            return Err(Error::DimensionMismatch("zero embedding dimension".into()));
        }
        let entries = users
            .checked_add(items)
            .and_then(|rows| rows.checked_mul(dim))
            .filter(|&n| n <= 1 << 34)
            .ok_or_else(|| Error::CorruptFile("implausible matrix size".into()))?;
        let mut bytes = vec![0u8; entries * 4];
        read_exact(&mut r, &mut bytes)?;
        let mut values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let item_values = values.split_off(users * dim);
        let mut user_ids = Vec::with_capacity(users);
        for _ in 0..users {
            user_ids.push(read_string(&mut r)?);
        }
        let mut item_ids = Vec::with_capacity(items);
        for _ in 0..items {
            item_ids.push(read_string(&mut r)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::CorruptFile("trailing bytes after id sidecar".into()));
        }
        Ok(EmbeddingStore {
            dim,
            users: values,
            items: item_values,
            user_ids,
            item_ids,
        })
    }
}
