use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Named dense parameter matrices. Vectors are stored as `n × 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        assert!(self.id(name).is_none(), "duplicate parameter {name}");
        self.tensors.push(Tensor { name: name.to_string(), rows, cols, data: vec![0.0; rows * cols] });
        ParamId(self.tensors.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    pub fn get(&self, p: ParamId) -> &Tensor {
        &self.tensors[p.0]
    }

    pub fn get_mut(&mut self, p: ParamId) -> &mut Tensor {
        &mut self.tensors[p.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn row(&self, p: ParamId, r: usize) -> &[f64] {
        let t = &self.tensors[p.0];
        &t.data[r * t.cols..(r + 1) * t.cols]
    }

    pub fn row_mut(&mut self, p: ParamId, r: usize) -> &mut [f64] {
        let t = &mut self.tensors[p.0];
        &mut t.data[r * t.cols..(r + 1) * t.cols]
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor { name: t.name.clone(), rows: t.rows, cols: t.cols, data: vec![0.0; t.data.len()] })
                .collect(),
        }
    }

    pub fn fill_normal<R: Rng>(&mut self, p: ParamId, std: f64, rng: &mut R) {
        let normal = Normal::new(0.0, std).expect("finite std");
        for v in self.get_mut(p).data.iter_mut() {
            *v = normal.sample(rng);
        }
    }

    /// `self ← self + k · other`.
    pub fn axpy(&mut self, k: f64, other: &Params) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += k * y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn bitwise_eq(&self, other: &Params) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.name == b.name && a.data.len() == b.data.len() && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            write_str(w, &t.name)?;
            w.write_all(&(t.rows as u32).to_le_bytes())?;
            w.write_all(&(t.cols as u32).to_le_bytes())?;
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> std::io::Result<Params> {
        let n = read_u32(r)? as usize;
        let mut p = Params::new();
        for _ in 0..n {
            let name = read_str(r)?;
            let rows = read_u32(r)? as usize;
            let cols = read_u32(r)? as usize;
            let id = p.add(&name, rows, cols);
            for v in p.get_mut(id).data.iter_mut() {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        Ok(p)
    }
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let n = read_u32(r)? as usize;
    if n > 1 << 20 {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "string too long"));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
