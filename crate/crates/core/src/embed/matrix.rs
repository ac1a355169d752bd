use std::collections::HashMap;
use std::io::{Read, Write};

use super::EmbedError;

const MAGIC: &[u8; 4] = b"WTEM";
const VERSION: u16 = 1;

/// Dense `ids.len() x dim` matrix of f32 vectors with id lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidConfig("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(EmbedError::DimensionMismatch { expected: ids.len() * dim, found: data.len() });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids, dim, data, index })
    }

    pub fn from_rows(rows: Vec<(String, Vec<f32>)>) -> Result<Self, EmbedError> {
        let dim = rows.first().map(|(_, v)| v.len()).unwrap_or(1);
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, v) in rows {
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch { expected: dim, found: v.len() });
            }
            ids.push(id);
            data.extend(v);
        }
        Self::new(ids, dim, data)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Writes `id,dim0,...,dimN`. Values use the shortest decimal form that
    /// parses back to the same f32.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EmbedError> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|k| format!("dim{k}")));
        writer.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut record = Vec::with_capacity(self.dim + 1);
            record.push(id.clone());
            record.extend(self.row(i).iter().map(|x| x.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, EmbedError> {
        let mut reader = csv::Reader::from_reader(source);
        let dim = reader.headers()?.len().saturating_sub(1);
        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .skip(1)
                .map(|s| s.parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::Format(format!("row {}: {e}", idx + 2)))?;
            rows.push((record[0].to_string(), values));
        }
        if rows.is_empty() {
            return Self::new(Vec::new(), dim.max(1), Vec::new());
        }
        Self::from_rows(rows)
    }

    /// Binary layout: `WTEM`, version u16, dim u32, count u64, then
    /// `count * dim` little-endian f32 values in row order, followed by the ids
    /// as (u32 byte length, UTF-8 bytes) pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), EmbedError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
        for id in &self.ids {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut source: R) -> Result<Self, EmbedError> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EmbedError::Format("bad magic bytes".into()));
        }
        let mut b2 = [0u8; 2];
        source.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != VERSION {
            return Err(EmbedError::Format(format!("unsupported version {version}")));
        }
        let mut b4 = [0u8; 4];
        source.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        source.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut raw = vec![0u8; count * dim * 4];
        source.read_exact(&mut raw)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            source.read_exact(&mut b4)?;
            let mut name = vec![0u8; u32::from_le_bytes(b4) as usize];
            source.read_exact(&mut name)?;
            ids.push(String::from_utf8(name).map_err(|e| EmbedError::Format(e.to_string()))?);
        }
        Self::new(ids, dim, data)
    }
}

/// `(v . w) / (|v| |w|)`, accumulated in f64.
pub fn cosine_similarity<T: Copy + Into<f64>>(v: &[T], w: &[T]) -> Result<f64, EmbedError> {
    if v.len() != w.len() {
        return Err(EmbedError::DimensionMismatch { expected: v.len(), found: w.len() });
    }
    let (mut dot, mut nv, mut nw) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in v.iter().zip(w) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        nv += a * a;
        nw += b * b;
    }
    if nv == 0.0 || nw == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (nv.sqrt() * nw.sqrt())).clamp(-1.0, 1.0))
}
