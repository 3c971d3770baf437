//! Canonical partitions of index sets and the aggregation/expansion
//! operators they induce.
//!
//! A [`Coloring`] stores a partition of `{0, .., n-1}` as a dense
//! index-to-color assignment in canonical form: color ids are numbered by
//! first occurrence, so two colorings describe the same partition exactly
//! when their assignment vectors are equal. Aggregation (`sum` / `mean`
//! over colors) and expansion (broadcast within colors) correspond to
//! multiplication by the partition-indicator matrix, its transpose, and
//! its row-normalized transpose; none of them are ever materialized.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How [`Coloring::aggregate`] combines the entries of each color.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMode {
    /// Sum over each color (multiplication by the indicator transpose).
    Sum,
    /// Mean over each color (multiplication by the stochastic scaled
    /// transpose). A color whose entries are all identical returns that
    /// value bit-exactly instead of `sum / size`.
    Mean,
}

/// A partition of `{0, .., n-1}` in canonical first-occurrence form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    assignment: Vec<usize>,
    num_colors: usize,
}

/// Materialized per-color cardinalities and member lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorStats {
    /// `sizes[k]` is the number of indices with color `k`.
    pub sizes: Vec<usize>,
    /// `members[k]` lists the indices with color `k`, ascending.
    pub members: Vec<Vec<usize>>,
}

impl Coloring {
    /// The single-color partition over `n` indices.
    pub fn unit(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyIndexSet("unit coloring of zero indices".into()));
        }
        Ok(Coloring {
            assignment: vec![0; n],
            num_colors: 1,
        })
    }

    /// The all-singletons partition over `n` indices.
    pub fn discrete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyIndexSet(
                "discrete coloring of zero indices".into(),
            ));
        }
        Ok(Coloring {
            assignment: (0..n).collect(),
            num_colors: n,
        })
    }

    /// Builds a coloring from an arbitrary label vector, relabeling to
    /// canonical first-occurrence ids. Labels may be any `Eq + Hash` values.
    pub fn from_labels<L: Eq + Hash>(labels: &[L]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyIndexSet("coloring of zero indices".into()));
        }
        let mut ids: HashMap<&L, usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for label in labels {
            let next = ids.len();
            let id = *ids.entry(label).or_insert(next);
            assignment.push(id);
        }
        Ok(Coloring {
            num_colors: ids.len(),
            assignment,
        })
    }

    /// Builds a coloring over `n` indices from explicit member groups.
    /// Groups must be disjoint and cover `0..n`; the canonical labeling is
    /// derived from first occurrence, not from group order.
    pub fn from_groups(n: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                if i >= n {
                    return Err(Error::dimension("group member out of range", n, i + 1));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::Structure(format!(
                        "index {i} appears in more than one group"
                    )));
                }
                labels[i] = g;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Structure(format!("index {i} not covered by any group")));
        }
        Self::from_labels(&labels)
    }

    /// Number of indices in the partitioned set.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_colors(&self) -> usize {
        self.num_colors
    }

    pub fn color_of(&self, index: usize) -> usize {
        self.assignment[index]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn is_unit(&self) -> bool {
        self.num_colors == 1
    }

    pub fn is_discrete(&self) -> bool {
        self.num_colors == self.assignment.len()
    }

    /// Per-color sizes and ascending member lists.
    pub fn stats(&self) -> ColorStats {
        let mut sizes = vec![0usize; self.num_colors];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        let mut members: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &c) in self.assignment.iter().enumerate() {
            members[c].push(i);
        }
        ColorStats { sizes, members }
    }

    /// Splits every color by the supplied per-index keys: two indices share
    /// an output color iff they share an input color and have equal keys.
    /// The result is re-canonicalized to first-occurrence labeling.
    pub fn split_by_keys<K: Eq + Hash>(&self, keys: &[K]) -> Result<Self> {
        if keys.len() != self.assignment.len() {
            return Err(Error::dimension(
                "split_by_keys keys",
                self.assignment.len(),
                keys.len(),
            ));
        }
        let mut ids: HashMap<(usize, &K), usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(keys.len());
        for (i, key) in keys.iter().enumerate() {
            let next = ids.len();
            let id = *ids.entry((self.assignment[i], key)).or_insert(next);
            assignment.push(id);
        }
        Ok(Coloring {
            num_colors: ids.len(),
            assignment,
        })
    }

    /// Aggregates `values` over colors. `Sum` yields per-color totals,
    /// `Mean` divides by the exact integer cardinality. Summation order is
    /// ascending index, so results are bit-reproducible.
    pub fn aggregate(&self, values: &[f64], mode: AggregateMode) -> Result<Vec<f64>> {
        if values.len() != self.assignment.len() {
            return Err(Error::dimension(
                "aggregate values",
                self.assignment.len(),
                values.len(),
            ));
        }
        let mut sums = vec![0.0; self.num_colors];
        let mut counts = vec![0usize; self.num_colors];
        // Track whether each color holds a single repeated value so that the
        // mean of identical entries is that entry, bit-exactly.
        let mut first = vec![f64::NAN; self.num_colors];
        let mut uniform = vec![true; self.num_colors];
        for (i, &x) in values.iter().enumerate() {
            let c = self.assignment[i];
            sums[c] += x;
            if counts[c] == 0 {
                first[c] = x;
            } else if x != first[c] {
                uniform[c] = false;
            }
            counts[c] += 1;
        }
        match mode {
            AggregateMode::Sum => Ok(sums),
            AggregateMode::Mean => Ok((0..self.num_colors)
                .map(|c| {
                    if uniform[c] {
                        first[c]
                    } else {
                        sums[c] / counts[c] as f64
                    }
                })
                .collect()),
        }
    }

    /// Broadcasts one value per color back to the full index set.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.num_colors {
            return Err(Error::dimension(
                "expand reduced vector",
                self.num_colors,
                reduced.len(),
            ));
        }
        Ok(self.assignment.iter().map(|&c| reduced[c]).collect())
    }

    /// True when every color of `self` is contained in a color of `other`.
    pub fn refines(&self, other: &Coloring) -> bool {
        if self.assignment.len() != other.assignment.len() {
            return false;
        }
        let mut image = vec![usize::MAX; self.num_colors];
        for (i, &c) in self.assignment.iter().enumerate() {
            let o = other.assignment[i];
            if image[c] == usize::MAX {
                image[c] = o;
            } else if image[c] != o {
                return false;
            }
        }
        true
    }
}

// Deserialization validates the canonical-form and no-empty-color
// invariants rather than trusting the wire format.
impl<'de> Deserialize<'de> for Coloring {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            assignment: Vec<usize>,
            num_colors: usize,
        }
        let raw = Raw::deserialize(deserializer)?;
        let canonical = Coloring::from_labels(&raw.assignment).map_err(serde::de::Error::custom)?;
        if canonical.assignment != raw.assignment || canonical.num_colors != raw.num_colors {
            return Err(serde::de::Error::custom(
                "coloring is not in canonical first-occurrence form",
            ));
        }
        Ok(canonical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_coloring_examples() {
        assert_eq!(Coloring::unit(3).unwrap().assignment(), &[0, 0, 0]);
        assert_eq!(Coloring::unit(1).unwrap().assignment(), &[0]);
        assert_eq!(Coloring::unit(5).unwrap().assignment(), &[0, 0, 0, 0, 0]);
        assert!(matches!(Coloring::unit(0), Err(Error::EmptyIndexSet(_))));
    }

    #[test]
    fn split_by_keys_examples() {
        let c = Coloring::unit(3).unwrap();
        assert_eq!(c.split_by_keys(&[5, 5, 9]).unwrap().assignment(), &[0, 0, 1]);

        let c = Coloring::from_labels(&[0, 0, 1]).unwrap();
        assert_eq!(c.split_by_keys(&[7, 7, 7]).unwrap().assignment(), &[0, 0, 1]);

        let c = Coloring::unit(4).unwrap();
        assert_eq!(
            c.split_by_keys(&[2, 3, 2, 3]).unwrap().assignment(),
            &[0, 1, 0, 1]
        );
    }

    #[test]
    fn split_length_mismatch_is_error() {
        let c = Coloring::unit(3).unwrap();
        assert!(matches!(
            c.split_by_keys(&[1, 2]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn aggregate_examples() {
        // Two merged pairs and one singleton; mean over colors.
        let c = Coloring::from_groups(5, &[vec![0, 1], vec![2, 3], vec![4]]).unwrap();
        let out = c
            .aggregate(&[0.0, 1.0, 1.0, 0.0, 7.0], AggregateMode::Mean)
            .unwrap();
        assert_eq!(out, vec![0.5, 0.5, 7.0]);

        let unit = Coloring::unit(3).unwrap();
        assert_eq!(
            unit.aggregate(&[1.0, 1.0, 1.0], AggregateMode::Sum).unwrap(),
            vec![3.0]
        );

        let discrete = Coloring::discrete(3).unwrap();
        assert_eq!(
            discrete
                .aggregate(&[2.0, 4.0, 6.0], AggregateMode::Mean)
                .unwrap(),
            vec![2.0, 4.0, 6.0]
        );
    }

    #[test]
    fn expand_examples() {
        let c = Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap();
        assert_eq!(c.expand(&[6.5, -6.5]).unwrap(), vec![6.5, 6.5, -6.5]);

        let unit = Coloring::unit(4).unwrap();
        assert_eq!(unit.expand(&[3.0]).unwrap(), vec![3.0, 3.0, 3.0, 3.0]);

        assert!(matches!(
            unit.expand(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn mean_of_identical_values_is_exact() {
        // 0.1 is not exactly representable; sum/3 would drift.
        let c = Coloring::unit(3).unwrap();
        let out = c.aggregate(&[0.1, 0.1, 0.1], AggregateMode::Mean).unwrap();
        assert_eq!(out[0].to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn stats_members_sorted_and_sizes_sum() {
        let c = Coloring::from_labels(&[2, 7, 2, 9, 7]).unwrap();
        let stats = c.stats();
        assert_eq!(stats.sizes.iter().sum::<usize>(), 5);
        assert_eq!(stats.members[0], vec![0, 2]);
        assert_eq!(stats.members[1], vec![1, 4]);
        assert_eq!(stats.members[2], vec![3]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = Coloring::from_labels(&[0, 0, 1, 2, 1]).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"assignment":[0,0,1,2,1],"num_colors":3}"#);
        let back: Coloring = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);

        // Non-canonical labels are rejected.
        let bad = r#"{"assignment":[1,0],"num_colors":2}"#;
        assert!(serde_json::from_str::<Coloring>(bad).is_err());
    }

    fn arb_coloring(max_len: usize) -> impl Strategy<Value = Coloring> {
        prop::collection::vec(0usize..4, 1..=max_len)
            .prop_map(|labels| Coloring::from_labels(&labels).unwrap())
    }

    proptest! {
        #[test]
        fn split_by_constant_keys_is_identity(c in arb_coloring(12)) {
            let keys = vec![42u64; c.len()];
            prop_assert_eq!(c.split_by_keys(&keys).unwrap(), c);
        }

        #[test]
        fn split_is_idempotent(pairs in prop::collection::vec((0usize..4, 0u8..5), 1..=12)) {
            let labels: Vec<usize> = pairs.iter().map(|&(l, _)| l).collect();
            let keys: Vec<u8> = pairs.iter().map(|&(_, k)| k).collect();
            let c = Coloring::from_labels(&labels).unwrap();
            let once = c.split_by_keys(&keys).unwrap();
            let twice = once.split_by_keys(&keys).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.refines(&c));
        }

        #[test]
        fn sum_equals_mean_times_sizes(pairs in prop::collection::vec((0usize..4, -100.0f64..100.0), 1..=12)) {
            let labels: Vec<usize> = pairs.iter().map(|&(l, _)| l).collect();
            let values: Vec<f64> = pairs.iter().map(|&(_, v)| v).collect();
            let c = Coloring::from_labels(&labels).unwrap();
            let sums = c.aggregate(&values, AggregateMode::Sum).unwrap();
            let means = c.aggregate(&values, AggregateMode::Mean).unwrap();
            let sizes = c.stats().sizes;
            for k in 0..c.num_colors() {
                prop_assert!((sums[k] - means[k] * sizes[k] as f64).abs() < 1e-9);
            }
        }

        #[test]
        fn aggregate_expand_round_trip_is_exact(c in arb_coloring(12), reduced in prop::collection::vec(-1e6f64..1e6, 1..=12)) {
            prop_assume!(reduced.len() >= c.num_colors());
            let reduced = &reduced[..c.num_colors()];
            let expanded = c.expand(reduced).unwrap();
            let back = c.aggregate(&expanded, AggregateMode::Mean).unwrap();
            for (a, b) in back.iter().zip(reduced) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
