use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite sample of points from the base domain, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("point set"))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("point dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::Empty("point set"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() % dim });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("point {} coordinate {}", pos / dim, pos % dim),
            });
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Appends the points of `other`, returning the index offset of the first appended point.
    pub fn extend(&mut self, other: &PointSet) -> Result<usize> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let offset = self.len();
        self.coords.extend_from_slice(&other.coords);
        Ok(offset)
    }
}

/// Ordered index pairs over a [`PointSet`], optionally labelled.
///
/// Pairs are unique. `swap_closed` is derived at construction and is true when
/// every `(i, j)` has its partner `(j, i)` in the sample, which makes the uniform
/// empirical measure over the pairs symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pairs: Vec<(usize, usize)>,
    labels: Option<Vec<f64>>,
    swap_closed: bool,
}

/// How labels of added swapped pairs are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapMode {
    Symmetric,
    Antisymmetric,
    Unlabeled,
}

impl std::str::FromStr for SwapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "antisymmetric" => Ok(Self::Antisymmetric),
            "unlabeled" => Ok(Self::Unlabeled),
            other => Err(Error::Parse(format!("unknown swap mode `{other}`"))),
        }
    }
}

impl PairSample {
    pub fn new(pairs: Vec<(usize, usize)>, labels: Option<Vec<f64>>) -> Result<Self> {
        if let Some(y) = &labels {
            if y.len() != pairs.len() {
                return Err(Error::InvalidSample(format!(
                    "{} labels for {} pairs",
                    y.len(),
                    pairs.len()
                )));
            }
            if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { location: format!("label {pos}") });
            }
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        for &p in &pairs {
            if !seen.insert(p) {
                return Err(Error::InvalidSample(format!("duplicate pair ({}, {})", p.0, p.1)));
            }
        }
        let swap_closed = pairs.iter().all(|&(i, j)| seen.contains(&(j, i)));
        Ok(Self { pairs, labels, swap_closed })
    }

    pub fn unlabeled(pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(pairs, None)
    }

    /// Every ordered pair `(i, j)` with `i, j < n_points`, diagonal included, row-major.
    pub fn all_ordered(n_points: usize) -> Self {
        let pairs = (0..n_points)
            .flat_map(|i| (0..n_points).map(move |j| (i, j)))
            .collect();
        Self { pairs, labels: None, swap_closed: true }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn swap_closed(&self) -> bool {
        self.swap_closed
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.pairs.clone(), Some(labels))
    }

    pub fn without_labels(&self) -> Self {
        Self { labels: None, ..self.clone() }
    }

    pub fn check_indices(&self, n_points: usize) -> Result<()> {
        match self.pairs.iter().find(|&&(i, j)| i >= n_points || j >= n_points) {
            Some(&(i, j)) => Err(Error::InvalidSample(format!(
                "pair ({i}, {j}) out of range for {n_points} points"
            ))),
            None => Ok(()),
        }
    }

    /// Swapped partners that are absent from the sample, in sample order.
    pub fn missing_swaps(&self) -> Vec<(usize, usize)> {
        let index = self.position_index();
        self.pairs
            .iter()
            .map(|&(i, j)| (j, i))
            .filter(|p| !index.contains_key(p))
            .collect()
    }

    pub(crate) fn position_index(&self) -> HashMap<(usize, usize), usize> {
        self.pairs.iter().enumerate().map(|(a, &p)| (p, a)).collect()
    }

    /// Stable 64-bit FNV-1a fingerprint of the pair list, used as a sample identifier.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &(i, j) in &self.pairs {
            for b in (i as u64).to_le_bytes().into_iter().chain((j as u64).to_le_bytes()) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("n{}-{h:016x}", self.pairs.len())
    }
}

/// Adds the missing swapped partner of every pair (virtual examples).
///
/// Originals keep their position; added pairs follow in the order of the pairs
/// they were derived from. A swap-closed input is returned unchanged.
pub fn close_under_swap(sample: &PairSample, mode: SwapMode) -> Result<PairSample> {
    let labels = match mode {
        SwapMode::Unlabeled => None,
        _ => Some(sample.labels().ok_or_else(|| {
            Error::InvalidSample("labels are required to close a labelled sample".into())
        })?),
    };
    if mode == SwapMode::Antisymmetric {
        let y = labels.unwrap_or_default();
        for (a, &(i, j)) in sample.pairs().iter().enumerate() {
            if i == j && y[a] != 0.0 {
                return Err(Error::InconsistentLabel { index: i, label: y[a] });
            }
        }
    }
    if sample.swap_closed() {
        return Ok(sample.clone());
    }

    let index = sample.position_index();
    let mut pairs = sample.pairs().to_vec();
    let mut new_labels = labels.map(<[f64]>::to_vec);
    for (a, &(i, j)) in sample.pairs().iter().enumerate() {
        if index.contains_key(&(j, i)) {
            continue;
        }
        pairs.push((j, i));
        if let (Some(out), Some(y)) = (new_labels.as_mut(), labels) {
            out.push(match mode {
                SwapMode::Antisymmetric => -y[a],
                _ => y[a],
            });
        }
    }
    // Unlabeled closure of a labelled sample drops the labels: the swapped outputs are unknown.
    PairSample::new(pairs, new_labels)
}
