use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of labeled tensor factors.
///
/// Flat indices are row-major over the factors: for dims `(d_0, ..., d_{k-1})`
/// the multi-index `(i_0, ..., i_{k-1})` maps to `Σ_m i_m · Π_{l>m} d_l`, so the
/// last factor varies fastest. Every routine in this crate uses this convention.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFactorization {
    factors: Vec<(String, usize)>,
}

impl SpaceFactorization {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if factors.is_empty() {
            return Err(Error::NoLabels);
        }
        for (i, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::ZeroDimension(label.clone()));
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// A single unlabeled-in-spirit factor.
    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, d)| *d).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|(l, _)| l.as_str())
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| *d).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].1)
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.factors.iter().chain(other.factors.iter()).cloned())
    }

    /// The factorization with `labels` removed, keeping order.
    pub fn without(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.position(l)?;
        }
        let rest: Vec<_> = self
            .factors
            .iter()
            .filter(|(l, _)| !labels.contains(&l.as_str()))
            .cloned()
            .collect();
        if rest.is_empty() {
            return Err(Error::TraceAllFactors);
        }
        Self::new(rest)
    }

    /// Row-major strides of each factor.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].1;
        }
        strides
    }

    /// Splits the factors into a kept group and a selected group and returns,
    /// for each, the full flat offset of every group multi-index (enumerated
    /// row-major within the group). Full index = `kept[i] + selected[j]`.
    pub(crate) fn split_offsets(&self, selected: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut is_selected = vec![false; self.factors.len()];
        for l in selected {
            let p = self.position(l)?;
            if is_selected[p] {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            is_selected[p] = true;
        }
        let strides = self.strides();
        let group = |want: bool| -> Vec<usize> {
            let mut offsets = vec![0usize];
            for (i, (_, dim)) in self.factors.iter().enumerate() {
                if is_selected[i] != want {
                    continue;
                }
                let stride = strides[i];
                offsets = offsets
                    .iter()
                    .flat_map(|&base| (0..*dim).map(move |k| base + k * stride))
                    .collect();
            }
            offsets
        };
        Ok((group(false), group(true)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dim_and_duplicates() {
        assert!(matches!(
            SpaceFactorization::new([("a", 2), ("b", 0)]),
            Err(Error::ZeroDimension(_))
        ));
        assert!(matches!(
            SpaceFactorization::new([("a", 2), ("a", 3)]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn total_dim_and_strides() {
        let f = SpaceFactorization::new([("x", 2), ("y", 3), ("z", 4)]).unwrap();
        assert_eq!(f.total_dim(), 24);
        assert_eq!(f.strides(), vec![12, 4, 1]);
    }

    #[test]
    fn split_offsets_cover_every_index_once() {
        let f = SpaceFactorization::new([("x", 2), ("y", 3), ("z", 2)]).unwrap();
        let (kept, sel) = f.split_offsets(&["y"]).unwrap();
        assert_eq!(kept, vec![0, 1, 6, 7]);
        assert_eq!(sel, vec![0, 2, 4]);
        let mut all: Vec<usize> = kept
            .iter()
            .flat_map(|k| sel.iter().map(move |s| k + s))
            .collect();
        all.sort();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn without_rejects_removing_everything() {
        let f = SpaceFactorization::new([("x", 2), ("y", 3)]).unwrap();
        assert!(matches!(f.without(&["x", "y"]), Err(Error::TraceAllFactors)));
        assert!(matches!(f.without(&["q"]), Err(Error::UnknownLabel(_))));
        assert_eq!(f.without(&["x"]).unwrap().dims(), vec![3]);
    }
}
