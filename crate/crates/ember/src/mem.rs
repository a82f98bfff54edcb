//! Memory buffers, shapes, and the JSON memory-image format.
//!
//! A memory image binds buffer names to row-major contents and scalar names
//! to index constants. On disk it is a JSON object:
//! `{"vals": {"shape": [3, 2], "data": [1, 2, 3, 4, 5, 6]}, "emb_len": 2}`.

use crate::types::{ElemType, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One dimension of a memref shape: a static size or `?` (bound at run time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Static(u64),
    Dynamic,
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Static(n) => write!(f, "{n}"),
            Dim::Dynamic => write!(f, "?"),
        }
    }
}

/// A named memory buffer reference with element type and row-major shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MemRef {
    pub name: String,
    pub elem: ElemType,
    pub shape: Vec<Dim>,
}

impl MemRef {
    pub fn rank(&self) -> usize {
        self.shape.len()
    }
}

/// Runtime contents of one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    pub elem: ElemType,
    pub shape: Vec<u64>,
    pub data: BufferData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BufferData {
    Index(Vec<u64>),
    I32(Vec<i32>),
    F32(Vec<f32>),
}

impl Buffer {
    pub fn zeros(elem: ElemType, shape: Vec<u64>) -> Buffer {
        let len = shape.iter().product::<u64>() as usize;
        let data = match elem {
            ElemType::Index => BufferData::Index(vec![0; len]),
            ElemType::I32 => BufferData::I32(vec![0; len]),
            ElemType::F32 => BufferData::F32(vec![0.0; len]),
        };
        Buffer { elem, shape, data }
    }

    pub fn from_f32(shape: Vec<u64>, data: Vec<f32>) -> Buffer {
        assert_eq!(shape.iter().product::<u64>() as usize, data.len());
        Buffer {
            elem: ElemType::F32,
            shape,
            data: BufferData::F32(data),
        }
    }

    pub fn from_index(shape: Vec<u64>, data: Vec<u64>) -> Buffer {
        assert_eq!(shape.iter().product::<u64>() as usize, data.len());
        Buffer {
            elem: ElemType::Index,
            shape,
            data: BufferData::Index(data),
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            BufferData::Index(v) => v.len(),
            BufferData::I32(v) => v.len(),
            BufferData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flattening with per-dimension bounds checks.
    pub fn flat_offset(&self, idx: &[u64]) -> Result<usize, OobError> {
        if idx.len() != self.shape.len() {
            return Err(OobError::Rank {
                expected: self.shape.len(),
                got: idx.len(),
            });
        }
        let mut off: u64 = 0;
        for (d, (&i, &n)) in idx.iter().zip(&self.shape).enumerate() {
            if i >= n {
                return Err(OobError::Bounds {
                    dim: d,
                    index: i,
                    size: n,
                    indices: idx.to_vec(),
                });
            }
            off = off * n + i;
        }
        Ok(off as usize)
    }

    pub fn get_flat(&self, off: usize) -> Result<Scalar, OobError> {
        if off >= self.len() {
            return Err(OobError::Flat {
                offset: off,
                len: self.len(),
            });
        }
        Ok(match &self.data {
            BufferData::Index(v) => Scalar::Index(v[off]),
            BufferData::I32(v) => Scalar::I32(v[off]),
            BufferData::F32(v) => Scalar::F32(v[off]),
        })
    }

    pub fn set_flat(&mut self, off: usize, value: Scalar) -> Result<(), OobError> {
        if off >= self.len() {
            return Err(OobError::Flat {
                offset: off,
                len: self.len(),
            });
        }
        match (&mut self.data, value) {
            (BufferData::Index(v), Scalar::Index(x)) => v[off] = x,
            (BufferData::I32(v), Scalar::I32(x)) => v[off] = x,
            (BufferData::F32(v), Scalar::F32(x)) => v[off] = x,
            (_, value) => {
                return Err(OobError::ElemType {
                    expected: self.elem,
                    got: value.ty(),
                })
            }
        }
        Ok(())
    }

    pub fn get(&self, idx: &[u64]) -> Result<Scalar, OobError> {
        let off = self.flat_offset(idx)?;
        self.get_flat(off)
    }

    pub fn set(&mut self, idx: &[u64], value: Scalar) -> Result<(), OobError> {
        let off = self.flat_offset(idx)?;
        self.set_flat(off, value)
    }

    pub fn bit_eq(&self, other: &Buffer) -> bool {
        if self.elem != other.elem || self.shape != other.shape {
            return false;
        }
        match (&self.data, &other.data) {
            (BufferData::F32(a), BufferData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (a, b) => a == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OobError {
    #[error("index {index} out of bounds for dimension {dim} of size {size} (indices {indices:?})")]
    Bounds {
        dim: usize,
        index: u64,
        size: u64,
        indices: Vec<u64>,
    },
    #[error("rank mismatch: buffer has rank {expected}, access has {got} indices")]
    Rank { expected: usize, got: usize },
    #[error("flat offset {offset} out of bounds for buffer of {len} elements")]
    Flat { offset: usize, len: usize },
    #[error("element type mismatch: buffer holds {expected}, value is {got}")]
    ElemType { expected: ElemType, got: ElemType },
}

/// A full memory image: named buffers plus named index constants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemImage {
    pub buffers: BTreeMap<String, Buffer>,
    pub scalars: BTreeMap<String, u64>,
}

impl MemImage {
    pub fn new() -> MemImage {
        MemImage::default()
    }

    pub fn with_buffer(mut self, name: &str, buf: Buffer) -> MemImage {
        self.buffers.insert(name.to_string(), buf);
        self
    }

    pub fn with_scalar(mut self, name: &str, value: u64) -> MemImage {
        self.scalars.insert(name.to_string(), value);
        self
    }

    pub fn buffer(&self, name: &str) -> Option<&Buffer> {
        self.buffers.get(name)
    }

    pub fn scalar(&self, name: &str) -> Option<u64> {
        self.scalars.get(name).copied()
    }

    pub fn bit_eq(&self, other: &MemImage) -> bool {
        self.scalars == other.scalars
            && self.buffers.len() == other.buffers.len()
            && self
                .buffers
                .iter()
                .all(|(k, v)| other.buffers.get(k).is_some_and(|o| v.bit_eq(o)))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonEntry {
    Buffer { shape: Vec<u64>, data: Vec<serde_json::Number> },
    Scalar(u64),
}

#[derive(Debug, thiserror::Error)]
pub enum MemJsonError {
    #[error("invalid memory image JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("buffer `{name}`: shape {shape:?} needs {expected} elements, data has {got}")]
    Length {
        name: String,
        shape: Vec<u64>,
        expected: usize,
        got: usize,
    },
    #[error("buffer `{name}`: element {index} is not a valid {ty} value")]
    Element {
        name: String,
        index: usize,
        ty: ElemType,
    },
}

/// Parse a memory image. Element types come from `elem_of`, which maps a
/// buffer name to its declared type (names not in the map default to f32).
pub fn parse_mem_image(
    src: &str,
    elem_of: &dyn Fn(&str) -> Option<ElemType>,
) -> Result<MemImage, MemJsonError> {
    let raw: BTreeMap<String, JsonEntry> = serde_json::from_str(src)?;
    let mut img = MemImage::new();
    for (name, entry) in raw {
        match entry {
            JsonEntry::Scalar(v) => {
                img.scalars.insert(name, v);
            }
            JsonEntry::Buffer { shape, data } => {
                let expected = shape.iter().product::<u64>() as usize;
                if expected != data.len() {
                    return Err(MemJsonError::Length {
                        name,
                        shape,
                        expected,
                        got: data.len(),
                    });
                }
                let elem = elem_of(&name).unwrap_or(ElemType::F32);
                let buf = match elem {
                    ElemType::Index => {
                        let mut v = Vec::with_capacity(data.len());
                        for (i, n) in data.iter().enumerate() {
                            v.push(n.as_u64().ok_or(MemJsonError::Element {
                                name: name.clone(),
                                index: i,
                                ty: elem,
                            })?);
                        }
                        Buffer::from_index(shape, v)
                    }
                    ElemType::I32 => {
                        let mut v = Vec::with_capacity(data.len());
                        for (i, n) in data.iter().enumerate() {
                            let x = n.as_i64().filter(|x| i32::try_from(*x).is_ok()).ok_or(
                                MemJsonError::Element {
                                    name: name.clone(),
                                    index: i,
                                    ty: elem,
                                },
                            )?;
                            v.push(x as i32);
                        }
                        Buffer {
                            elem,
                            shape,
                            data: BufferData::I32(v),
                        }
                    }
                    ElemType::F32 => {
                        let mut v = Vec::with_capacity(data.len());
                        for (i, n) in data.iter().enumerate() {
                            let x = n.as_f64().ok_or(MemJsonError::Element {
                                name: name.clone(),
                                index: i,
                                ty: elem,
                            })?;
                            v.push(x as f32);
                        }
                        Buffer::from_f32(shape, v)
                    }
                };
                img.buffers.insert(name, buf);
            }
        }
    }
    Ok(img)
}

/// Serialize a memory image (or a subset of its buffers) back to JSON.
pub fn mem_image_to_json(img: &MemImage, only: Option<&[String]>) -> String {
    let mut map = serde_json::Map::new();
    for (name, buf) in &img.buffers {
        if let Some(names) = only {
            if !names.contains(name) {
                continue;
            }
        }
        let data: Vec<serde_json::Value> = match &buf.data {
            BufferData::Index(v) => v.iter().map(|x| serde_json::json!(x)).collect(),
            BufferData::I32(v) => v.iter().map(|x| serde_json::json!(x)).collect(),
            BufferData::F32(v) => v.iter().map(|x| serde_json::json!(x)).collect(),
        };
        map.insert(
            name.clone(),
            serde_json::json!({"shape": buf.shape, "data": data}),
        );
    }
    if only.is_none() {
        for (name, v) in &img.scalars {
            map.insert(name.clone(), serde_json::json!(v));
        }
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_offset_row_major() {
        let b = Buffer::from_f32(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(b.get(&[1, 0]).unwrap(), Scalar::F32(3.0));
        assert_eq!(b.get(&[2, 1]).unwrap(), Scalar::F32(6.0));
        let err = b.get(&[3, 0]).unwrap_err();
        assert!(matches!(err, OobError::Bounds { dim: 0, index: 3, .. }));
    }

    #[test]
    fn json_round_trip() {
        let src = r#"{"vals": {"shape": [2, 2], "data": [1.5, 2.0, 3.0, 4.0]},
                      "idxs": {"shape": [3], "data": [1, 0, 2]},
                      "emb_len": 2}"#;
        let elem_of = |name: &str| {
            Some(match name {
                "idxs" => ElemType::Index,
                _ => ElemType::F32,
            })
        };
        let img = parse_mem_image(src, &elem_of).unwrap();
        assert_eq!(img.scalar("emb_len"), Some(2));
        assert_eq!(img.buffer("idxs").unwrap().get(&[2]).unwrap(), Scalar::Index(2));
        let json = mem_image_to_json(&img, None);
        let img2 = parse_mem_image(&json, &elem_of).unwrap();
        assert!(img.bit_eq(&img2));
    }

    #[test]
    fn length_mismatch_rejected() {
        let src = r#"{"a": {"shape": [2], "data": [1]}}"#;
        assert!(parse_mem_image(src, &|_| Some(ElemType::F32)).is_err());
    }
}
