//! Multi-indices over the `d x N` slots of a step-function chaos basis.
//!
//! Canonical order: ascending total degree, then, within one degree, the
//! lexicographic order of the nondecreasing slot list (a degree-2 entry on slot
//! `s` contributes `s` twice). On the dense slot vector this is descending
//! lexicographic order, e.g. for one slot pair `(1,0) < (0,1) < (2,0) < (1,1) < (0,2)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::ChaosBasisSpec;
use crate::error::{Error, Result};

/// Default cap on the number of enumerated multi-indices.
pub const DEFAULT_UNIVERSE_CAP: usize = 50_000_000;

/// Nonzero degrees of one multi-index, stored as `(slot, degree)` pairs sorted
/// by slot. Slots with degree zero are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
    degree: u32,
}

impl MultiIndex {
    /// Builds a multi-index from `(slot, degree)` pairs in any order. Zero
    /// degrees are dropped and repeated slots are merged.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut v: Vec<(usize, u32)> = entries.into_iter().filter(|&(_, n)| n > 0).collect();
        v.sort_unstable_by_key(|&(s, _)| s);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(v.len());
        for (s, n) in v {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += n,
                _ => merged.push((s, n)),
            }
        }
        let degree = merged.iter().map(|&(_, n)| n).sum();
        Self { entries: merged, degree }
    }

    /// From a dense slot vector (`dense[slot]` is the degree on that slot).
    pub fn from_dense(dense: &[u32]) -> Self {
        Self::from_entries(dense.iter().copied().enumerate())
    }

    /// Unit index `e_i^j`: degree one on a single slot.
    pub fn unit(slot: usize) -> Self {
        Self { entries: vec![(slot, 1)], degree: 1 }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Total degree `|n|`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn get(&self, slot: usize) -> u32 {
        self.entries
            .binary_search_by_key(&slot, |&(s, _)| s)
            .map(|k| self.entries[k].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self, slots: usize) -> Vec<u32> {
        let mut v = vec![0; slots];
        for &(s, n) in &self.entries {
            v[s] = n;
        }
        v
    }

    /// Slots repeated by multiplicity, in nondecreasing order.
    fn slot_multiset(&self) -> Vec<usize> {
        self.entries
            .iter()
            .flat_map(|&(s, n)| std::iter::repeat_n(s, n as usize))
            .collect()
    }

    /// Latest grid step (one-based, `1..=N`) carrying a nonzero degree.
    pub fn last_step(&self, basis: &ChaosBasisSpec) -> usize {
        self.entries
            .iter()
            .map(|&(s, _)| basis.slot_position(s).1 + 1)
            .max()
            .unwrap_or(0)
    }
}

/// `n! = prod_{j,i} (n_i^j)!`.
pub fn factorial_weight(index: &MultiIndex) -> u64 {
    index
        .entries
        .iter()
        .map(|&(_, n)| (1..=n as u64).product::<u64>())
        .product()
}

/// Slot notation: `component:step^degree` terms, both one-based, joined by spaces.
pub struct SlotNotation<'a> {
    index: &'a MultiIndex,
    basis: &'a ChaosBasisSpec,
}

impl fmt::Display for SlotNotation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &(s, n)) in self.index.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            let (j, i) = self.basis.slot_position(s);
            write!(f, "{}:{}^{}", j + 1, i + 1, n)?;
        }
        Ok(())
    }
}

impl MultiIndex {
    pub fn notation<'a>(&'a self, basis: &'a ChaosBasisSpec) -> SlotNotation<'a> {
        SlotNotation { index: self, basis }
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n.checked_sub(k)?);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Number of size-`k` multisets drawn from `n` values.
fn multichoose(n: u64, k: u64) -> Option<u64> {
    if k == 0 {
        return Some(1);
    }
    if n == 0 {
        return Some(0);
    }
    binomial(n + k - 1, k)
}

/// `sum_{k=1}^{p} C(dN + k - 1, k)`, or `None` on overflow.
pub fn universe_size(basis: &ChaosBasisSpec) -> Option<u64> {
    let slots = basis.slots() as u64;
    (1..=basis.order() as u64).try_fold(0u64, |acc, k| acc.checked_add(multichoose(slots, k)?))
}

/// All multi-indices with `1 <= |n| <= p` in canonical order, with rank
/// lookup and per-step sublists.
#[derive(Debug, Clone)]
pub struct IndexUniverse {
    basis: ChaosBasisSpec,
    indices: Vec<MultiIndex>,
    /// `degree_offsets[k - 1]` is the rank of the first degree-`k` index; one extra trailing entry.
    degree_offsets: Vec<usize>,
    weights: Vec<f64>,
    last_steps: Vec<u32>,
    /// `by_step[r]` lists the ranks whose last nonzero step is `r` (`by_step[0]` is empty).
    by_step: Vec<Vec<u32>>,
}

impl IndexUniverse {
    pub fn enumerate(basis: ChaosBasisSpec) -> Result<Self> {
        Self::enumerate_with_cap(basis, DEFAULT_UNIVERSE_CAP)
    }

    pub fn enumerate_with_cap(basis: ChaosBasisSpec, cap: usize) -> Result<Self> {
        // re-validate in case the spec was deserialized
        let basis = ChaosBasisSpec::new(basis.horizon(), basis.steps(), basis.dim(), basis.order())?;
        let size = universe_size(&basis)
            .filter(|&s| s <= cap as u64)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "chaos universe for d={}, N={}, p={} exceeds the cap of {cap} indices",
                    basis.dim(),
                    basis.steps(),
                    basis.order()
                ))
            })? as usize;
        if basis.order() > u32::MAX as usize || size > u32::MAX as usize {
            return Err(Error::Resource("chaos universe does not fit 32-bit ranks".into()));
        }

        let slots = basis.slots();
        let mut indices = Vec::with_capacity(size);
        let mut degree_offsets = Vec::with_capacity(basis.order() + 1);
        for k in 1..=basis.order() {
            degree_offsets.push(indices.len());
            // nondecreasing slot lists of length k in lexicographic order
            let mut combo = vec![0usize; k];
            loop {
                indices.push(MultiIndex::from_entries(combo.iter().map(|&s| (s, 1))));
                let Some(pos) = combo.iter().rposition(|&s| s + 1 < slots) else {
                    break;
                };
                let next = combo[pos] + 1;
                combo[pos..].fill(next);
            }
        }
        degree_offsets.push(indices.len());
        debug_assert_eq!(indices.len(), size);

        let weights = indices.iter().map(|n| factorial_weight(n) as f64).collect();
        let last_steps: Vec<u32> = indices.iter().map(|n| n.last_step(&basis) as u32).collect();
        let mut by_step = vec![Vec::new(); basis.steps() + 1];
        for (rank, &r) in last_steps.iter().enumerate() {
            by_step[r as usize].push(rank as u32);
        }
        Ok(Self { basis, indices, degree_offsets, weights, last_steps, by_step })
    }

    pub fn basis(&self) -> &ChaosBasisSpec {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn unrank(&self, rank: usize) -> Option<&MultiIndex> {
        self.indices.get(rank)
    }

    /// Position of `index` in canonical order, computed combinatorially.
    pub fn rank(&self, index: &MultiIndex) -> Option<usize> {
        let k = index.degree() as usize;
        if k == 0 || k > self.basis.order() {
            return None;
        }
        let slots = self.basis.slots() as u64;
        let ms = index.slot_multiset();
        if ms.last().is_some_and(|&s| s as u64 >= slots) {
            return None;
        }
        let mut rank = self.degree_offsets[k - 1] as u64;
        let mut lo = 0u64;
        for (pos, &a) in ms.iter().enumerate() {
            let remaining = (k - pos - 1) as u64;
            for v in lo..a as u64 {
                rank += multichoose(slots - v, remaining)?;
            }
            lo = a as u64;
        }
        Some(rank as usize)
    }

    /// `n!` for the index at `rank`.
    pub fn weight(&self, rank: usize) -> f64 {
        self.weights[rank]
    }

    /// Ranks of the indices of total degree `k`.
    pub fn degree_range(&self, k: usize) -> std::ops::Range<usize> {
        if k == 0 || k > self.basis.order() {
            return 0..0;
        }
        self.degree_offsets[k - 1]..self.degree_offsets[k]
    }

    /// Last nonzero step (one-based) of the index at `rank`.
    pub fn last_step(&self, rank: usize) -> usize {
        self.last_steps[rank] as usize
    }

    /// Ranks of indices whose last nonzero step is exactly `r`, in canonical order.
    /// The indices alive in `E_{t_r}` are the union of these lists over steps `1..=r`.
    pub fn ranks_ending_at(&self, r: usize) -> &[u32] {
        self.by_step.get(r).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Rank of the unit index on `(component, step)` (zero-based).
    pub fn unit_rank(&self, component: usize, step: usize) -> usize {
        // degree-1 block is ordered by slot
        self.basis.slot(component, step)
    }
}
