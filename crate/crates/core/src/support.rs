use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted, duplicate-free set of dimension indices.
///
/// This is the only payload agents exchange.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn empty() -> Self {
        SupportSet(Vec::new())
    }

    /// `{0, 1, ..., dim - 1}`.
    pub fn full(dim: usize) -> Self {
        SupportSet((0..dim).collect())
    }

    pub fn singleton(index: usize) -> Self {
        SupportSet(vec![index])
    }

    /// Builds a set from arbitrary indices, sorting and dropping duplicates.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SupportSet(v)
    }

    /// Indices `j` with `|coef[j]| > threshold`.
    pub fn above_threshold(coef: &[f64], threshold: f64) -> Self {
        SupportSet(
            coef.iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > threshold)
                .map(|(j, _)| j)
                .collect(),
        )
    }

    /// Rejects sets with an index outside `[0, dim)`.
    pub fn check_bounds(&self, dim: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= dim => Err(Error::InvalidInput(format!(
                "support index {max} out of range for dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn is_superset_of(&self, other: &SupportSet) -> bool {
        other.iter().all(|j| self.contains(j))
    }

    /// Sorted merge of two sets.
    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        SupportSet(out)
    }

    /// Gathers the coordinates of `full` listed in this set.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&j| full[j]).collect()
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, j) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SupportSet::from_indices(iter)
    }
}
