//! Word-embedding table and the vector primitives built on it.
//!
//! The on-disk format is the common word2vec/GloVe text layout: a
//! `<count> <dimension>` header followed by one `<token> <d1> ... <dD>` line
//! per entry.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use thiserror::Error;

use crate::checksum::Fnv1a64;

/// Returned by [`cosine`] when either side has zero norm. Strictly below any
/// legal cosine so a zero vector never wins an argmax.
pub const ZERO_NORM_COSINE: f64 = -2.0;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    LineDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("header declares {declared} entries but {found} were read")]
    CountMismatch { declared: usize, found: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("all weights are zero")]
    DegenerateWeights,
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("vector and weight counts differ ({vectors} vs {weights})")]
    LengthMismatch { vectors: usize, weights: usize },
    #[error("no vectors to average")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense embedding vector. Components are always finite.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `components`, rejecting empty or non-finite input.
    pub fn new(components: Vec<f64>) -> Option<Self> {
        if components.is_empty() || components.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Self(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Raw little-endian IEEE-754 bytes, hex encoded.
    pub fn to_hex(&self) -> String {
        let mut bytes = Vec::with_capacity(self.0.len() * 8);
        for c in &self.0 {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        hex::encode(bytes)
    }

    /// Inverse of [`Vector::to_hex`].
    pub fn from_hex(text: &str) -> Option<Self> {
        let bytes = hex::decode(text).ok()?;
        if bytes.is_empty() || bytes.len() % 8 != 0 {
            return None;
        }
        let components = bytes
            .chunks_exact(8)
            .map(|chunk| f64::from_le_bytes(chunk.try_into().expect("chunk of 8")))
            .collect();
        Self::new(components)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Token → vector lookup table with a fixed dimension.
///
/// Immutable once loaded. Entries keep file order, which the canonical
/// checksum depends on.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    tokens: Vec<String>,
    vectors: Vec<Vector>,
    lookup: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension >= 1, "embedding dimension must be positive");
        Self {
            dimension,
            tokens: Vec::new(),
            vectors: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    /// Inserts `vector` under the normalized form of `token`. Returns false
    /// (and keeps the existing entry) for duplicates.
    pub fn insert(&mut self, token: &str, vector: Vector) -> Result<bool, EmbeddingError> {
        if vector.dimension() != self.dimension {
            return Err(EmbeddingError::Dimension {
                left: self.dimension,
                right: vector.dimension(),
            });
        }
        let key = normalize_token(token);
        if self.lookup.contains_key(&key) {
            return Ok(false);
        }
        self.lookup.insert(key.clone(), self.tokens.len());
        self.tokens.push(key);
        self.vectors.push(vector);
        Ok(true)
    }

    /// Parses the text embedding format. Fails on the first bad line.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(EmbeddingError::Header("empty input".into())),
        };
        let header = header.trim_end_matches('\r');
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (declared, dimension) = match fields.as_slice() {
            [count, dim] => {
                let count = count
                    .parse::<usize>()
                    .map_err(|_| EmbeddingError::Header(format!("bad count {count:?}")))?;
                let dim = dim
                    .parse::<usize>()
                    .map_err(|_| EmbeddingError::Header(format!("bad dimension {dim:?}")))?;
                if dim == 0 {
                    return Err(EmbeddingError::Header("dimension must be positive".into()));
                }
                (count, dim)
            }
            _ => {
                return Err(EmbeddingError::Header(format!(
                    "expected `<count> <dimension>`, got {header:?}"
                )))
            }
        };

        let mut store = Self::new(dimension);
        let mut read = 0usize;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-blank line has a field");
            let mut components = Vec::with_capacity(dimension);
            for part in parts {
                let value = part.parse::<f64>().map_err(|_| EmbeddingError::Line {
                    line: line_no,
                    reason: format!("cannot parse {part:?} as a number"),
                })?;
                if !value.is_finite() {
                    return Err(EmbeddingError::Line {
                        line: line_no,
                        reason: format!("non-finite component {part:?}"),
                    });
                }
                components.push(value);
            }
            if components.len() != dimension {
                return Err(EmbeddingError::LineDimension {
                    line: line_no,
                    expected: dimension,
                    found: components.len(),
                });
            }
            read += 1;
            let vector = Vector::new(components).expect("validated above");
            store.insert(token, vector)?;
        }
        if read != declared {
            return Err(EmbeddingError::CountMismatch {
                declared,
                found: read,
            });
        }
        Ok(store)
    }

    /// Writes the store in the same text format `load` reads. Floats use
    /// the shortest representation that parses back to the same bits.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.tokens.len(), self.dimension)?;
        for (token, vector) in self.entries() {
            write!(out, "{token}")?;
            for c in vector.iter() {
                write!(out, " {c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Looks up an already-normalized token.
    pub fn get(&self, token: &str) -> Option<&Vector> {
        self.lookup.get(token).map(|&i| &self.vectors[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.tokens.iter().map(String::as_str).zip(self.vectors.iter())
    }

    /// Unweighted mean of the in-vocabulary tokens of `text`; `None` when no
    /// token is known.
    pub fn embed_text(&self, text: &str) -> Option<Vector> {
        let mut sum = vec![0.0f64; self.dimension];
        let mut count = 0usize;
        for token in tokenize(text) {
            if let Some(v) = self.get(&token) {
                for (s, x) in sum.iter_mut().zip(v.iter()) {
                    *s += x;
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Vector::new(sum)
    }

    /// 64-bit FNV-1a over the canonical serialization: the header line, then
    /// per entry the token followed by each component's IEEE-754 bit pattern
    /// as 16 lowercase hex digits, space separated, newline terminated.
    pub fn checksum(&self) -> u64 {
        let mut hasher = Fnv1a64::new();
        hasher.update(format!("{} {}\n", self.tokens.len(), self.dimension).as_bytes());
        for (token, vector) in self.entries() {
            hasher.update(token.as_bytes());
            for c in vector.iter() {
                hasher.update(format!(" {:016x}", c.to_bits()).as_bytes());
            }
            hasher.update(b"\n");
        }
        hasher.finish()
    }
}

fn normalize_token(token: &str) -> String {
    token.to_lowercase()
}

/// Mean of `vectors` with equal weight. `None` for an empty input.
pub fn mean<'a, I>(vectors: I) -> Option<Vector>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next()?;
    let mut sum = first.as_slice().to_vec();
    let mut count = 1usize;
    for v in iter {
        debug_assert_eq!(v.dimension(), sum.len());
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += x;
        }
        count += 1;
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Vector::new(sum)
}

/// `Σ wᵢvᵢ / Σ wᵢ`, evaluated as `Σ (wᵢ / Σ w) vᵢ`.
pub fn weighted_average(vectors: &[&Vector], weights: &[f64]) -> Result<Vector, EmbeddingError> {
    if vectors.len() != weights.len() {
        return Err(EmbeddingError::LengthMismatch {
            vectors: vectors.len(),
            weights: weights.len(),
        });
    }
    let first = vectors.first().ok_or(EmbeddingError::Empty)?;
    let dimension = first.dimension();
    if let Some(bad) = vectors.iter().find(|v| v.dimension() != dimension) {
        return Err(EmbeddingError::Dimension {
            left: dimension,
            right: bad.dimension(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(EmbeddingError::InvalidWeight);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(EmbeddingError::DegenerateWeights);
    }
    // Normalized weights first, so a lone vector comes back bit-identical.
    let mut sum = vec![0.0f64; dimension];
    for (v, w) in vectors.iter().zip(weights) {
        let share = w / total;
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += share * x;
        }
    }
    Vector::new(sum).ok_or(EmbeddingError::DegenerateWeights)
}

/// Cosine similarity, clamped to `[-1, 1]`. Returns [`ZERO_NORM_COSINE`]
/// when either norm is zero.
///
/// Every operation used is commutative, so `cosine(a, b)` and `cosine(b, a)`
/// are bit-identical.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::Dimension {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(cosine_unchecked(a, b))
}

/// [`cosine`] for callers that already guarantee equal dimensions.
pub(crate) fn cosine_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return ZERO_NORM_COSINE;
    }
    (dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}
