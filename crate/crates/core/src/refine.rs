//! Stack-based color refinement: computes the coarsest equitable partition
//! pair of a sparse matrix refining given initial row/column colorings.
//!
//! A pair of colorings `(P, Q)` is equitable on `A` when every block
//! `S x T` has constant row sums and constant column sums. Refinement pops
//! a color off a work stack, aggregates the entries it touches on the
//! opposite side, and splits every opposite color by the aggregated sums.
//! When a color splits, the largest sub-color keeps the label (ties go to
//! the sub-color containing the smallest index) and the remaining
//! sub-colors are pushed. Only stored entries of the refining color are
//! touched, so the work is proportional to `nnz`, and indices receiving no
//! contribution share the implicit key of zero — explicit zeros therefore
//! behave exactly like absent entries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::Coloring;
use crate::sparse::SparseMatrix;

/// Grouping policy for accumulated floating-point sums during refinement.
///
/// The default groups by exact bit equality (after normalizing negative
/// zero), which preserves losslessness. `Quantize` rounds sums to a fixed
/// number of decimal digits before grouping — an explicit relaxation for
/// noisy data. Tolerance-based grouping is not offered because an
/// epsilon-closeness relation is not transitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FloatKeyPolicy {
    Exact,
    Quantize { digits: u32 },
}

impl Default for FloatKeyPolicy {
    fn default() -> Self {
        FloatKeyPolicy::Exact
    }
}

impl FloatKeyPolicy {
    /// Canonical 64-bit key for a sum. Adding `0.0` maps `-0.0` to `+0.0`
    /// so that sums of explicit zeros match absent entries.
    pub fn key(&self, sum: f64) -> u64 {
        match self {
            FloatKeyPolicy::Exact => (sum + 0.0).to_bits(),
            FloatKeyPolicy::Quantize { digits } => {
                let scale = 10f64.powi(*digits as i32);
                ((sum * scale).round() / scale + 0.0).to_bits()
            }
        }
    }

    pub fn keys(&self, sums: &[f64]) -> Vec<u64> {
        sums.iter().map(|&s| self.key(s)).collect()
    }
}

/// A row/column coloring pair that is equitable on the matrix it was
/// computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquitablePair {
    pub row_coloring: Coloring,
    pub col_coloring: Coloring,
}

impl EquitablePair {
    /// Summary with per-color sizes, as emitted alongside serialized pairs.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "rows": self.row_coloring.num_colors(),
            "cols": self.col_coloring.num_colors(),
            "row_sizes": self.row_coloring.stats().sizes,
            "col_sizes": self.col_coloring.stats().sizes,
        })
    }
}

/// Work counters for the complexity smoke test.
#[derive(Debug, Clone, Copy, Default)]
pub struct RefineStats {
    /// Stored matrix entries examined across all pops.
    pub entries_touched: u64,
    /// Colors popped off the work stack.
    pub pops: u64,
}

/// Mutable partition state with stable labels. Unlike `Coloring`, labels
/// here are *not* canonical: a split keeps the parent label on the largest
/// sub-color so that stack bookkeeping stays valid.
struct Working {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Working {
    fn from_coloring(c: &Coloring) -> Self {
        Working {
            assignment: c.assignment().to_vec(),
            members: c.stats().members,
        }
    }

    fn num_colors(&self) -> usize {
        self.members.len()
    }

    fn is_discrete(&self) -> bool {
        self.members.len() == self.assignment.len()
    }

    /// Splits every color by `keys`, keeping the parent label on the
    /// largest sub-color (ties: the sub-color containing the smallest
    /// index). Returns the freshly created labels in ascending order.
    fn split_all(&mut self, keys: &[u64]) -> Vec<usize> {
        let mut new_labels = Vec::new();
        for label in 0..self.members.len() {
            // Group the color's members by key, preserving ascending order
            // within each group. Members are always sorted ascending.
            let members = &self.members[label];
            if members.len() <= 1 {
                continue;
            }
            let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
            for &i in members {
                let k = keys[i];
                match groups.iter_mut().find(|(gk, _)| *gk == k) {
                    Some((_, g)) => g.push(i),
                    None => groups.push((k, vec![i])),
                }
            }
            if groups.len() == 1 {
                continue;
            }
            // Largest sub-color keeps the label; tie broken by the smallest
            // member, i.e. the earliest group of maximal size.
            let keeper = groups
                .iter()
                .enumerate()
                .max_by(|(ia, (_, a)), (ib, (_, b))| a.len().cmp(&b.len()).then(ib.cmp(ia)))
                .map(|(idx, _)| idx)
                .expect("at least two groups");
            for (idx, (_, group)) in groups.into_iter().enumerate() {
                if idx == keeper {
                    self.members[label] = group;
                } else {
                    let fresh = self.members.len();
                    for &i in &group {
                        self.assignment[i] = fresh;
                    }
                    self.members.push(group);
                    new_labels.push(fresh);
                }
            }
        }
        new_labels
    }

    fn canonical(&self) -> Coloring {
        Coloring::from_labels(&self.assignment).expect("non-empty working partition")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Row,
    Col,
}

fn check_dims(a: &SparseMatrix, p0: &Coloring, q0: &Coloring) -> Result<()> {
    if p0.len() != a.n_rows() {
        return Err(Error::dimension("row coloring", a.n_rows(), p0.len()));
    }
    if q0.len() != a.n_cols() {
        return Err(Error::dimension("column coloring", a.n_cols(), q0.len()));
    }
    Ok(())
}

/// Computes the coarsest equitable pair refining `(p0, q0)` on `a`.
pub fn coarsest_equitable(
    a: &SparseMatrix,
    p0: &Coloring,
    q0: &Coloring,
    policy: FloatKeyPolicy,
) -> Result<EquitablePair> {
    coarsest_equitable_with_stats(a, p0, q0, policy).map(|(pair, _)| pair)
}

/// As [`coarsest_equitable`], also returning work counters.
pub fn coarsest_equitable_with_stats(
    a: &SparseMatrix,
    p0: &Coloring,
    q0: &Coloring,
    policy: FloatKeyPolicy,
) -> Result<(EquitablePair, RefineStats)> {
    check_dims(a, p0, q0)?;
    let mut rows = Working::from_coloring(p0);
    let mut cols = Working::from_coloring(q0);
    let mut stats = RefineStats::default();

    let mut stack: Vec<(Side, usize)> = Vec::new();
    for label in 0..rows.num_colors() {
        stack.push((Side::Row, label));
    }
    for label in 0..cols.num_colors() {
        stack.push((Side::Col, label));
    }

    let mut row_sums = vec![0.0f64; a.n_rows()];
    let mut col_sums = vec![0.0f64; a.n_cols()];

    while let Some((side, label)) = stack.pop() {
        if rows.is_discrete() && cols.is_discrete() {
            break;
        }
        stats.pops += 1;
        match side {
            Side::Row => {
                // Aggregate the refining rows into per-column sums;
                // untouched columns keep the implicit key of 0.
                let mut touched: Vec<usize> = Vec::new();
                for &i in &rows.members[label] {
                    let (cidx, vals) = a.row(i);
                    stats.entries_touched += cidx.len() as u64;
                    for (&j, &v) in cidx.iter().zip(vals) {
                        if col_sums[j] == 0.0 {
                            touched.push(j);
                        }
                        col_sums[j] += v;
                    }
                }
                let keys: Vec<u64> = col_sums.iter().map(|&s| policy.key(s)).collect();
                for j in touched {
                    col_sums[j] = 0.0;
                }
                for fresh in cols.split_all(&keys) {
                    stack.push((Side::Col, fresh));
                }
            }
            Side::Col => {
                let mut touched: Vec<usize> = Vec::new();
                for &j in &cols.members[label] {
                    let (ridx, vals) = a.col(j);
                    stats.entries_touched += ridx.len() as u64;
                    for (&i, &v) in ridx.iter().zip(vals) {
                        if row_sums[i] == 0.0 {
                            touched.push(i);
                        }
                        row_sums[i] += v;
                    }
                }
                let keys: Vec<u64> = row_sums.iter().map(|&s| policy.key(s)).collect();
                for i in touched {
                    row_sums[i] = 0.0;
                }
                for fresh in rows.split_all(&keys) {
                    stack.push((Side::Row, fresh));
                }
            }
        }
    }

    let pair = EquitablePair {
        row_coloring: rows.canonical(),
        col_coloring: cols.canonical(),
    };
    Ok((pair, stats))
}

/// Which direction of the equitability condition a witness violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WitnessDirection {
    /// `sum_{j in T} A[i][j]` differs across two rows of `S`.
    RowSums,
    /// `sum_{i in S} A[i][j]` differs across two columns of `T`.
    ColSums,
}

/// Concrete evidence that a coloring pair is not equitable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquitabilityWitness {
    pub direction: WitnessDirection,
    pub row_color: usize,
    pub col_color: usize,
    /// The two offending indices (rows for `RowSums`, columns for `ColSums`).
    pub index_a: usize,
    pub index_b: usize,
    pub sum_a: f64,
    pub sum_b: f64,
}

/// Result of an equitability check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Equitability {
    Pass,
    Witness(EquitabilityWitness),
}

impl Equitability {
    pub fn is_pass(&self) -> bool {
        matches!(self, Equitability::Pass)
    }
}

/// Checks whether `(p, q)` is equitable on `a` under the key policy,
/// returning the first violation found.
pub fn is_equitable(
    a: &SparseMatrix,
    p: &Coloring,
    q: &Coloring,
    policy: FloatKeyPolicy,
) -> Result<Equitability> {
    check_dims(a, p, q)?;

    // Row direction: per-row sums over each column color.
    let mut representative: Vec<Option<(usize, Vec<f64>)>> = vec![None; p.num_colors()];
    for i in 0..a.n_rows() {
        let mut sums = vec![0.0f64; q.num_colors()];
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            sums[q.color_of(j)] += v;
        }
        let s = p.color_of(i);
        match &representative[s] {
            None => representative[s] = Some((i, sums)),
            Some((i0, ref_sums)) => {
                for t in 0..q.num_colors() {
                    if policy.key(sums[t]) != policy.key(ref_sums[t]) {
                        return Ok(Equitability::Witness(EquitabilityWitness {
                            direction: WitnessDirection::RowSums,
                            row_color: s,
                            col_color: t,
                            index_a: *i0,
                            index_b: i,
                            sum_a: ref_sums[t],
                            sum_b: sums[t],
                        }));
                    }
                }
            }
        }
    }

    // Column direction, via the column mirror.
    let mut representative: Vec<Option<(usize, Vec<f64>)>> = vec![None; q.num_colors()];
    for j in 0..a.n_cols() {
        let mut sums = vec![0.0f64; p.num_colors()];
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            sums[p.color_of(i)] += v;
        }
        let t = q.color_of(j);
        match &representative[t] {
            None => representative[t] = Some((j, sums)),
            Some((j0, ref_sums)) => {
                for s in 0..p.num_colors() {
                    if policy.key(sums[s]) != policy.key(ref_sums[s]) {
                        return Ok(Equitability::Witness(EquitabilityWitness {
                            direction: WitnessDirection::ColSums,
                            row_color: s,
                            col_color: t,
                            index_a: *j0,
                            index_b: j,
                            sum_a: ref_sums[s],
                            sum_b: sums[s],
                        }));
                    }
                }
            }
        }
    }

    Ok(Equitability::Pass)
}

/// Coarsest coloring `Q` refining `q0` such that `(Q, Q)` is equitable on
/// the square symmetric matrix `k`. Rows and columns share one coloring;
/// each split applies to it directly.
pub fn symmetric_coarsest_equitable(
    k: &SparseMatrix,
    q0: &Coloring,
    policy: FloatKeyPolicy,
) -> Result<Coloring> {
    if k.n_rows() != k.n_cols() {
        return Err(Error::Structure(format!(
            "symmetric refinement requires a square matrix, got {}x{}",
            k.n_rows(),
            k.n_cols()
        )));
    }
    if !k.is_symmetric() {
        return Err(Error::Structure(
            "symmetric refinement requires exact value symmetry".into(),
        ));
    }
    if q0.len() != k.n_rows() {
        return Err(Error::dimension("shared coloring", k.n_rows(), q0.len()));
    }

    let mut working = Working::from_coloring(q0);
    let mut stack: Vec<usize> = (0..working.num_colors()).collect();
    let mut sums = vec![0.0f64; k.n_rows()];

    while let Some(label) = stack.pop() {
        if working.is_discrete() {
            break;
        }
        let mut touched: Vec<usize> = Vec::new();
        for &i in &working.members[label] {
            let (cidx, vals) = k.row(i);
            for (&j, &v) in cidx.iter().zip(vals) {
                if sums[j] == 0.0 {
                    touched.push(j);
                }
                sums[j] += v;
            }
        }
        let keys: Vec<u64> = sums.iter().map(|&s| policy.key(s)).collect();
        for j in touched {
            sums[j] = 0.0;
        }
        stack.extend(working.split_all(&keys));
    }

    Ok(working.canonical())
}

const BRUTE_FORCE_LIMIT: usize = 7;

/// Exhaustive oracle: enumerates every partition pair refining `(p0, q0)`
/// and returns the coarsest equitable one. Limited to 7x7 matrices.
pub fn brute_force_coarsest(
    a: &SparseMatrix,
    p0: &Coloring,
    q0: &Coloring,
) -> Result<EquitablePair> {
    check_dims(a, p0, q0)?;
    if a.n_rows() > BRUTE_FORCE_LIMIT || a.n_cols() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "brute-force oracle refuses matrices beyond {BRUTE_FORCE_LIMIT}x{BRUTE_FORCE_LIMIT}, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let dense = a.to_dense();
    let row_candidates = refining_partitions(p0);
    let col_candidates = refining_partitions(q0);

    let mut best: Option<EquitablePair> = None;
    for p in &row_candidates {
        for q in &col_candidates {
            if !dense_equitable(&dense, p, q) {
                continue;
            }
            let total = p.num_colors() + q.num_colors();
            match &best {
                None => {
                    best = Some(EquitablePair {
                        row_coloring: p.clone(),
                        col_coloring: q.clone(),
                    })
                }
                Some(b) => {
                    let best_total = b.row_coloring.num_colors() + b.col_coloring.num_colors();
                    if total < best_total {
                        best = Some(EquitablePair {
                            row_coloring: p.clone(),
                            col_coloring: q.clone(),
                        });
                    } else if total == best_total
                        && (p != &b.row_coloring || q != &b.col_coloring)
                    {
                        // The coarsest equitable pair is unique; a genuine
                        // tie means comparing incomparable pairs, and the
                        // true coarsest must be coarser than both.
                        continue;
                    }
                }
            }
        }
    }
    // The discrete pair is always equitable, so a result exists.
    let best = best.expect("discrete pair is equitable");

    // Every equitable candidate must refine the winner, otherwise the
    // "coarsest" we found is not actually coarsest.
    for p in &row_candidates {
        for q in &col_candidates {
            if dense_equitable(&dense, p, q)
                && !(p.refines(&best.row_coloring) && q.refines(&best.col_coloring))
            {
                // Join with the incomparable pair would be coarser; the
                // enumeration must contain that join, so this cannot happen.
                return Err(Error::Invariant(
                    "brute-force oracle found incomparable equitable pairs".into(),
                ));
            }
        }
    }
    Ok(best)
}

fn dense_equitable(dense: &[Vec<f64>], p: &Coloring, q: &Coloring) -> bool {
    let p_stats = p.stats();
    let q_stats = q.stats();
    for s_members in &p_stats.members {
        for t_members in &q_stats.members {
            let first_row: f64 = t_members.iter().map(|&j| dense[s_members[0]][j]).sum();
            for &i in &s_members[1..] {
                let sum: f64 = t_members.iter().map(|&j| dense[i][j]).sum();
                if sum.to_bits() != first_row.to_bits() {
                    return false;
                }
            }
            let first_col: f64 = s_members.iter().map(|&i| dense[i][t_members[0]]).sum();
            for &j in &t_members[1..] {
                let sum: f64 = s_members.iter().map(|&i| dense[i][j]).sum();
                if sum.to_bits() != first_col.to_bits() {
                    return false;
                }
            }
        }
    }
    true
}

/// All partitions of `0..n` refining `base`, as canonical colorings.
fn refining_partitions(base: &Coloring) -> Vec<Coloring> {
    let stats = base.stats();
    let per_color: Vec<Vec<Vec<Vec<usize>>>> = stats
        .members
        .iter()
        .map(|members| set_partitions(members))
        .collect();

    let mut out = Vec::new();
    let mut chosen: Vec<usize> = vec![0; per_color.len()];
    loop {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (c, &pick) in chosen.iter().enumerate() {
            groups.extend(per_color[c][pick].iter().cloned());
        }
        out.push(Coloring::from_groups(base.len(), &groups).expect("valid partition"));

        // Odometer increment over the per-color partition choices.
        let mut pos = 0;
        loop {
            if pos == chosen.len() {
                return out;
            }
            chosen[pos] += 1;
            if chosen[pos] < per_color[pos].len() {
                break;
            }
            chosen[pos] = 0;
            pos += 1;
        }
    }
}

/// All set partitions of `items`, via restricted growth strings.
fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    fn recurse(items: &[usize], pos: usize, groups: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if pos == items.len() {
            out.push(groups.clone());
            return;
        }
        for g in 0..groups.len() {
            groups[g].push(items[pos]);
            recurse(items, pos + 1, groups, out);
            groups[g].pop();
        }
        groups.push(vec![items[pos]]);
        recurse(items, pos + 1, groups, out);
        groups.pop();
    }
    recurse(items, 0, &mut groups, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn appendix_fixture() -> (SparseMatrix, Vec<f64>) {
        let x = SparseMatrix::from_dense(&[
            vec![3.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0],
            vec![4.0, 2.0, 2.0],
            vec![2.0, 4.0, 2.0],
            vec![3.0, 3.0, 1.0],
        ])
        .unwrap();
        (x, vec![0.0, 1.0, 1.0, 0.0, 7.0])
    }

    #[test]
    fn five_by_three_fixture_refines_to_known_pair() {
        let (x, _) = appendix_fixture();
        let p0 = Coloring::unit(5).unwrap();
        let q0 = Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap();
        let pair = coarsest_equitable(&x, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(
            pair.row_coloring,
            Coloring::from_groups(5, &[vec![0, 1], vec![2, 3], vec![4]]).unwrap()
        );
        assert_eq!(
            pair.col_coloring,
            Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap()
        );
        assert!(is_equitable(&x, &pair.row_coloring, &pair.col_coloring, FloatKeyPolicy::Exact)
            .unwrap()
            .is_pass());
    }

    #[test]
    fn constant_matrix_stays_unit() {
        let a = SparseMatrix::from_dense(&vec![vec![1.0; 4]; 4]).unwrap();
        let unit4 = Coloring::unit(4).unwrap();
        let pair = coarsest_equitable(&a, &unit4, &unit4, FloatKeyPolicy::Exact).unwrap();
        assert!(pair.row_coloring.is_unit());
        assert!(pair.col_coloring.is_unit());
    }

    #[test]
    fn witness_reports_differing_row_sums() {
        let (x, _) = appendix_fixture();
        let p = Coloring::unit(5).unwrap();
        let q = Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap();
        match is_equitable(&x, &p, &q, FloatKeyPolicy::Exact).unwrap() {
            Equitability::Witness(w) => {
                assert_eq!(w.direction, WitnessDirection::RowSums);
                assert_eq!(w.col_color, 0);
                // Rows 0..4 have T0 sums 4,4,6,6,6: first differing pair is (0, 2).
                assert_eq!((w.index_a, w.index_b), (0, 2));
                assert_eq!((w.sum_a, w.sum_b), (4.0, 6.0));
            }
            Equitability::Pass => panic!("expected a witness"),
        }
    }

    #[test]
    fn discrete_pair_is_always_equitable() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let eq = is_equitable(
            &a,
            &Coloring::discrete(3).unwrap(),
            &Coloring::discrete(2).unwrap(),
            FloatKeyPolicy::Exact,
        )
        .unwrap();
        assert!(eq.is_pass());
    }

    #[test]
    fn idempotent_on_equitable_pair() {
        let (x, _) = appendix_fixture();
        let p = Coloring::from_groups(5, &[vec![0, 1], vec![2, 3], vec![4]]).unwrap();
        let q = Coloring::from_groups(3, &[vec![0, 1], vec![2]]).unwrap();
        let pair = coarsest_equitable(&x, &p, &q, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(pair.row_coloring, p);
        assert_eq!(pair.col_coloring, q);
    }

    #[test]
    fn explicit_zeros_refine_identically_to_absent() {
        let with_zero = SparseMatrix::from_rows(
            2,
            vec![vec![(0, 1.0), (1, 0.0)], vec![(0, 1.0)]],
        )
        .unwrap();
        let without = SparseMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        let p0 = Coloring::unit(2).unwrap();
        let q0 = Coloring::unit(2).unwrap();
        let a = coarsest_equitable(&with_zero, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
        let b = coarsest_equitable(&without, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_identity_stays_unit() {
        let k = SparseMatrix::identity(4);
        let q = symmetric_coarsest_equitable(&k, &Coloring::unit(4).unwrap(), FloatKeyPolicy::Exact)
            .unwrap();
        assert!(q.is_unit());
    }

    #[test]
    fn symmetric_distinct_diagonal_goes_discrete() {
        let k = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        let q = symmetric_coarsest_equitable(&k, &Coloring::unit(3).unwrap(), FloatKeyPolicy::Exact)
            .unwrap();
        assert!(q.is_discrete());
    }

    #[test]
    fn symmetric_duplicated_samples_share_a_color() {
        // Linear kernel of rows [1,2],[1,2],[3,0],[0,1].
        let x = SparseMatrix::from_dense(&[
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![3.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let dense = x.to_dense();
        let mut k = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] = dense[i].iter().zip(&dense[j]).map(|(a, b)| a * b).sum();
            }
        }
        let k = SparseMatrix::from_dense(&k).unwrap();
        let q = symmetric_coarsest_equitable(&k, &Coloring::unit(4).unwrap(), FloatKeyPolicy::Exact)
            .unwrap();
        assert_eq!(q.color_of(0), q.color_of(1));
        assert_ne!(q.color_of(0), q.color_of(2));
        assert_ne!(q.color_of(0), q.color_of(3));
        assert_ne!(q.color_of(2), q.color_of(3));

        // Cross-check against the exhaustive pair oracle with tied colorings.
        let pair = brute_force_coarsest(
            &k,
            &Coloring::unit(4).unwrap(),
            &Coloring::unit(4).unwrap(),
        )
        .unwrap();
        assert_eq!(pair.row_coloring, q);
        assert_eq!(pair.col_coloring, q);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let k = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(
            symmetric_coarsest_equitable(&k, &Coloring::unit(2).unwrap(), FloatKeyPolicy::Exact),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn brute_force_identity_two_by_two() {
        let a = SparseMatrix::identity(2);
        let pair = brute_force_coarsest(
            &a,
            &Coloring::unit(2).unwrap(),
            &Coloring::unit(2).unwrap(),
        )
        .unwrap();
        assert!(pair.row_coloring.is_unit());
        assert!(pair.col_coloring.is_unit());
    }

    #[test]
    fn brute_force_refuses_large_input() {
        let a = SparseMatrix::from_dense(&vec![vec![0.0; 8]; 8]).unwrap();
        assert!(matches!(
            brute_force_coarsest(&a, &Coloring::unit(8).unwrap(), &Coloring::unit(8).unwrap()),
            Err(Error::SizeLimit(_))
        ));
    }

    fn random_coloring(rng: &mut impl Rng, n: usize, max_colors: usize) -> Coloring {
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..max_colors)).collect();
        Coloring::from_labels(&labels).unwrap()
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let m = rng.gen_range(2..=6);
            let n = rng.gen_range(2..=5);
            let dense: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
                .collect();
            let a = SparseMatrix::from_dense(&dense).unwrap();
            let p0 = random_coloring(&mut rng, m, 2);
            let q0 = random_coloring(&mut rng, n, 2);
            let fast = coarsest_equitable(&a, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
            let slow = brute_force_coarsest(&a, &p0, &q0).unwrap();
            assert_eq!(fast, slow, "disagreement on {dense:?} p0={p0:?} q0={q0:?}");
        }
    }

    #[test]
    fn output_refines_input_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let m = rng.gen_range(2..=7);
            let n = rng.gen_range(2..=7);
            let dense: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
                .collect();
            let a = SparseMatrix::from_dense(&dense).unwrap();
            let p0 = random_coloring(&mut rng, m, 3);
            let q0 = random_coloring(&mut rng, n, 3);
            let pair = coarsest_equitable(&a, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
            assert!(pair.row_coloring.refines(&p0));
            assert!(pair.col_coloring.refines(&q0));

            // Coarser initial colorings never yield strictly finer outputs.
            let unit_pair = coarsest_equitable(
                &a,
                &Coloring::unit(m).unwrap(),
                &Coloring::unit(n).unwrap(),
                FloatKeyPolicy::Exact,
            )
            .unwrap();
            assert!(pair.row_coloring.refines(&unit_pair.row_coloring));
            assert!(pair.col_coloring.refines(&unit_pair.col_coloring));
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let m = 5;
            let n = 4;
            let dense: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
                .collect();
            let a = SparseMatrix::from_dense(&dense).unwrap();
            let p0 = random_coloring(&mut rng, m, 2);
            let q0 = random_coloring(&mut rng, n, 2);

            let mut row_perm: Vec<usize> = (0..m).collect();
            row_perm.shuffle(&mut rng);
            let mut col_perm: Vec<usize> = (0..n).collect();
            col_perm.shuffle(&mut rng);

            // B[i][j] = A[row_perm[i]][col_perm[j]]
            let permuted: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..n).map(|j| dense[row_perm[i]][col_perm[j]]).collect())
                .collect();
            let b = SparseMatrix::from_dense(&permuted).unwrap();
            let p0_perm = Coloring::from_labels(
                &(0..m).map(|i| p0.color_of(row_perm[i])).collect::<Vec<_>>(),
            )
            .unwrap();
            let q0_perm = Coloring::from_labels(
                &(0..n).map(|j| q0.color_of(col_perm[j])).collect::<Vec<_>>(),
            )
            .unwrap();

            let pair = coarsest_equitable(&a, &p0, &q0, FloatKeyPolicy::Exact).unwrap();
            let pair_perm = coarsest_equitable(&b, &p0_perm, &q0_perm, FloatKeyPolicy::Exact).unwrap();

            let expected_rows = Coloring::from_labels(
                &(0..m)
                    .map(|i| pair.row_coloring.color_of(row_perm[i]))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let expected_cols = Coloring::from_labels(
                &(0..n)
                    .map(|j| pair.col_coloring.color_of(col_perm[j]))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            assert_eq!(pair_perm.row_coloring, expected_rows);
            assert_eq!(pair_perm.col_coloring, expected_cols);
        }
    }

    #[test]
    fn quantize_policy_merges_nearby_sums() {
        // Columns whose sums differ only in the 9th decimal digit.
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0 + 1e-9], vec![2.0, 2.0]]).unwrap();
        let unit2 = Coloring::unit(2).unwrap();
        let exact = coarsest_equitable(&a, &unit2, &unit2, FloatKeyPolicy::Exact).unwrap();
        assert_eq!(exact.col_coloring.num_colors(), 2);
        let fuzzy = coarsest_equitable(
            &a,
            &unit2,
            &unit2,
            FloatKeyPolicy::Quantize { digits: 6 },
        )
        .unwrap();
        assert_eq!(fuzzy.col_coloring.num_colors(), 1);
    }
}
