use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Token → vector lookup. Tokens are stored lowercased.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut table = Self {
            dim,
            tokens: Vec::with_capacity(rows.len()),
            index: HashMap::with_capacity(rows.len()),
            vectors: Vec::with_capacity(rows.len() * dim),
        };
        for (token, v) in rows {
            table.push(token, &v)?;
        }
        Ok(table)
    }

    fn push(&mut self, token: String, v: &[f64]) -> Result<()> {
        let token = token.trim().to_lowercase();
        if token.is_empty() {
            return Err(Error::Data("empty token in embedding table".into()));
        }
        if v.len() != self.dim {
            return Err(crate::error::dim_err("embedding row", self.dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {token:?}")));
        }
        if self.index.insert(token.clone(), self.tokens.len()).is_some() {
            return Err(Error::Data(format!("duplicate token {token:?} in embedding table")));
        }
        self.tokens.push(token);
        self.vectors.extend_from_slice(v);
        Ok(())
    }

    /// Seeded table of unit-norm Gaussian rows, one per token, in the given order.
    pub fn synthetic<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Self::new(dim, Vec::new())?;
        let mut row = vec![0.0; dim];
        for tok in tokens {
            loop {
                row.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                let n = crate::numerics::kernels::norm(&row);
                if n > 0.0 {
                    row.iter_mut().for_each(|x| *x /= n);
                    break;
                }
            }
            table.push(tok.as_ref().to_string(), &row)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Row for an already-lowercased token.
    pub fn row(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.tokens.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for (i, tok) in self.tokens.iter().enumerate() {
            w.write_all(&(tok.len() as u32).to_le_bytes())?;
            w.write_all(tok.as_bytes())?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        let mut table = Self::new(dim, Vec::new())?;
        let mut row = vec![0.0; dim];
        let mut raw = vec![0u8; dim * 8];
        for _ in 0..n {
            let mut b4 = [0u8; 4];
            r.read_exact(&mut b4)?;
            let mut tok = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut tok)?;
            let tok = String::from_utf8(tok).map_err(|_| Error::Data("token is not UTF-8".into()))?;
            r.read_exact(&mut raw)?;
            for (x, c) in row.iter_mut().zip(raw.chunks_exact(8)) {
                *x = f64::from_le_bytes(c.try_into().expect("8 bytes"));
            }
            table.push(tok, &row)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::read(BufReader::new(f)).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }
}
