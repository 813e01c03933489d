//! Word-embedding tables in the common text format: an optional
//! `count dim` header, then one `token v1 ... vdim` row per line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const OOV_TOKEN: &str = "_OOV_";
const OOV_SEED: u64 = 0x0000_5107_F111;

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    oov: Vec<f64>,
    fingerprint: String,
}

/// Hex SHA-256 of raw bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn generated_oov(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(OOV_SEED);
    (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

impl EmbeddingTable {
    /// Builds a table from rows. When `oov` is `None` a fixed-seed vector is
    /// generated. The fingerprint is the hash of the table's serialization.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f64>)>, oov: Option<Vec<f64>>) -> Result<Self> {
        let mut table = Self::assemble(dim, rows, oov, 0)?;
        table.fingerprint = content_hash(table.to_text().as_bytes());
        Ok(table)
    }

    fn assemble(
        dim: usize,
        rows: Vec<(String, Vec<f64>)>,
        oov: Option<Vec<f64>>,
        first_line: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format {
                line: first_line,
                message: "embedding dimension must be positive".into(),
            });
        }
        let mut tokens = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (tok, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Format {
                    line: first_line + i,
                    message: format!("row '{tok}' has {} values, expected {dim}", v.len()),
                });
            }
            if index.insert(tok.clone(), tokens.len()).is_some() {
                return Err(Error::Format {
                    line: first_line + i,
                    message: format!("duplicate token '{tok}'"),
                });
            }
            tokens.push(tok);
            vectors.push(v);
        }
        let oov = match oov {
            Some(v) if v.len() != dim => {
                return Err(Error::Format {
                    line: 0,
                    message: format!("OOV vector has {} values, expected {dim}", v.len()),
                })
            }
            Some(v) => v,
            None => generated_oov(dim),
        };
        Ok(EmbeddingTable {
            dim,
            tokens,
            vectors,
            index,
            oov,
            fingerprint: String::new(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(String, Vec<f64>, usize)> = Vec::new();
        let mut header: Option<(usize, usize)> = None;
        let mut dim: Option<usize> = None;
        let mut oov: Option<Vec<f64>> = None;

        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 1 && fields.len() == 2 {
                if let (Ok(count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    header = Some((count, d));
                    dim = Some(d);
                    continue;
                }
            }
            let (tok, values) = fields.split_first().expect("non-empty");
            let values = values
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Format {
                        line: lineno,
                        message: format!("'{v}' is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("row '{tok}' has {} values, expected {d}", values.len()),
                });
            }
            if *tok == OOV_TOKEN {
                if oov.is_some() {
                    return Err(Error::Format {
                        line: lineno,
                        message: format!("duplicate token '{OOV_TOKEN}'"),
                    });
                }
                oov = Some(values);
            } else {
                rows.push((tok.to_string(), values, lineno));
            }
        }

        let Some(dim) = dim else {
            return Err(Error::Format {
                line: 0,
                message: "empty embedding file".into(),
            });
        };
        if rows.is_empty() && oov.is_none() {
            return Err(Error::Format {
                line: 0,
                message: "embedding file has no rows".into(),
            });
        }
        if let Some((count, _)) = header {
            let n = rows.len() + usize::from(oov.is_some());
            if count != n {
                return Err(Error::Format {
                    line: 1,
                    message: format!("header announces {count} rows, found {n}"),
                });
            }
        }
        // report duplicates with their real line numbers
        let mut seen = HashMap::new();
        for (tok, _, line) in &rows {
            if seen.insert(tok.as_str(), *line).is_some() {
                return Err(Error::Format {
                    line: *line,
                    message: format!("duplicate token '{tok}'"),
                });
            }
        }
        let rows = rows.into_iter().map(|(t, v, _)| (t, v)).collect();
        let mut table = Self::assemble(dim, rows, oov, 1)?;
        table.fingerprint = content_hash(text.as_bytes());
        Ok(table)
    }

    /// Serializes with a header and a trailing `_OOV_` row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.tokens.len() + 1, self.dim);
        let mut row = |tok: &str, v: &[f64]| {
            s.push_str(tok);
            for x in v {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        };
        for (tok, v) in self.tokens.iter().zip(&self.vectors) {
            row(tok, v);
        }
        row(OOV_TOKEN, &self.oov);
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
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

    pub fn oov_vector(&self) -> &[f64] {
        &self.oov
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Stored vector, or the OOV vector for unknown tokens.
    pub fn vector(&self, token: &str) -> &[f64] {
        match self.index.get(token) {
            Some(&i) => &self.vectors[i],
            None => &self.oov,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(&self.vectors)
            .map(|(t, v)| (t.as_str(), v.as_slice()))
    }

    /// Equal rows and OOV vector; the fingerprint is not compared.
    pub fn same_content(&self, other: &EmbeddingTable) -> bool {
        self.dim == other.dim
            && self.tokens == other.tokens
            && self.vectors == other.vectors
            && self.oov == other.oov
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text)
}

/// Maps tokens to their vectors, falling back to the OOV vector.
pub fn lookup(tokens: &[impl AsRef<str>], table: &EmbeddingTable) -> Result<Vec<Tensor>> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("lookup of an empty token list".into()));
    }
    Ok(tokens
        .iter()
        .map(|t| Tensor::vector(table.vector(t.as_ref()).to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_rows_without_header() {
        let t = EmbeddingTable::parse("a 1 2 3\nb 4 5 6\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.vector("b"), &[4.0, 5.0, 6.0]);
        assert_eq!(t.oov_vector().len(), 3);
    }

    #[test]
    fn header_is_optional_and_checked() {
        let t = EmbeddingTable::parse("2 2\nx 0.5 1\ny -1 2\n").unwrap();
        assert_eq!(t.dim(), 2);
        assert!(EmbeddingTable::parse("3 2\nx 0.5 1\ny -1 2\n").is_err());
    }

    #[test]
    fn oov_row_becomes_oov_vector() {
        let t = EmbeddingTable::parse("a 1 2\n_OOV_ 9 8\n").unwrap();
        assert_eq!(t.oov_vector(), &[9.0, 8.0]);
        assert_eq!(t.vector("never-seen"), &[9.0, 8.0]);
        assert!(!t.contains(OOV_TOKEN));
    }

    #[test]
    fn generated_oov_is_deterministic() {
        let a = EmbeddingTable::parse("a 1 2 3\n").unwrap();
        let b = EmbeddingTable::parse("b 4 5 6\n").unwrap();
        assert_eq!(a.oov_vector(), b.oov_vector());
    }

    #[test]
    fn short_row_names_line() {
        match EmbeddingTable::parse("a 1 2 3\nb 4 5\n") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_empty_rejected() {
        match EmbeddingTable::parse("a 1\nb 2\na 3\n") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(EmbeddingTable::parse(""), Err(Error::Format { .. })));
        assert!(matches!(EmbeddingTable::parse("\n\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn lookup_maps_pointwise() {
        let t = EmbeddingTable::parse("a 1 0\n_OOV_ 0 0\n").unwrap();
        let out = lookup(&["a", "zzz_unknown", "a"], &t).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].data(), &[1.0, 0.0]);
        assert_eq!(out[1].data(), &[0.0, 0.0]);
        assert_eq!(out[2], out[0]);
        let empty: [&str; 0] = [];
        assert!(matches!(lookup(&empty, &t), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = EmbeddingTable::parse("a 1 2\n").unwrap();
        let b = EmbeddingTable::parse("a 1 3\n").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    proptest! {
        #[test]
        fn text_round_trip(
            rows in proptest::collection::btree_map("[a-z]{1,6}", proptest::collection::vec(-1e3f64..1e3, 3), 1..8)
        ) {
            let rows: Vec<(String, Vec<f64>)> = rows.into_iter().collect();
            let table = EmbeddingTable::from_rows(3, rows, None).unwrap();
            let again = EmbeddingTable::parse(&table.to_text()).unwrap();
            prop_assert!(table.same_content(&again));
            prop_assert_eq!(table.fingerprint(), again.fingerprint());
        }
    }
}
