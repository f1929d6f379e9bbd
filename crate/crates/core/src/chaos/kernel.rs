//! Sample-block kernels shared by estimation and evaluation.
//!
//! For a block of `B` consecutive samples, `K_0..K_p` are tabulated once for
//! every slot, laid out so that each `(slot, degree)` row is contiguous over
//! the block. A basis term is then a product of at most `p` rows.
//!
//! Per-sample arithmetic never mixes samples, so results are bitwise
//! independent of the block size; that is what lets the single-sample API
//! reuse these kernels with `B = 1` and agree exactly with the batched solver.

use crate::brownian::SamplePanel;
use crate::hermite::fill_values;
use crate::multiindex::IndexUniverse;

/// Samples per inner evaluation block.
pub(crate) const BLOCK: usize = 128;
/// Samples per parallel reduction chunk. Fixed so that reductions do not
/// depend on the thread count.
pub(crate) const CHUNK: usize = 4096;

pub(crate) struct HermiteBlock {
    len: usize,
    stride: usize,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl HermiteBlock {
    pub(crate) fn new(steps: usize, dim: usize, order: usize) -> Self {
        Self {
            len: 0,
            stride: order + 1,
            steps,
            dim,
            values: Vec::new(),
            scratch: vec![0.0; order + 1],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Tabulates samples `start..start + len` of `panel`.
    pub(crate) fn fill(&mut self, panel: &SamplePanel, start: usize, len: usize) {
        let (n, d, stride) = (self.steps, self.dim, self.stride);
        self.len = len;
        self.values.resize(n * d * stride * len, 0.0);
        for b in 0..len {
            let row = panel.sample(start + b);
            for i in 0..n {
                for j in 0..d {
                    fill_values(row[i * d + j], &mut self.scratch);
                    let slot = j * n + i;
                    for (deg, &k) in self.scratch.iter().enumerate() {
                        self.values[(slot * stride + deg) * len + b] = k;
                    }
                }
            }
        }
    }

    #[inline]
    pub(crate) fn row(&self, slot: usize, degree: usize) -> &[f64] {
        let off = (slot * self.stride + degree) * self.len;
        &self.values[off..off + self.len]
    }

    /// `out[b] = prod_e K_{n_e}(G_{s_e})`, with the entry at `lowered`
    /// (if any) taken at degree `n_e - 1`.
    #[inline]
    pub(crate) fn product(&self, entries: &[(usize, u32)], lowered: Option<usize>, out: &mut [f64]) {
        let out = &mut out[..self.len];
        out.fill(1.0);
        for (k, &(s, n)) in entries.iter().enumerate() {
            let deg = if lowered == Some(k) { n as usize - 1 } else { n as usize };
            for (o, &v) in out.iter_mut().zip(self.row(s, deg)) {
                *o *= v;
            }
        }
    }
}

/// Adds `sum_b f[b] * prod_n(b)` for every rank into `acc[1 + rank]` and
/// `sum_b f[b]` into `acc[0]`.
pub(crate) fn accumulate_projections(
    universe: &IndexUniverse,
    hb: &HermiteBlock,
    f: &[f64],
    prod: &mut [f64],
    acc: &mut [f64],
) {
    acc[0] += f.iter().sum::<f64>();
    for (rank, index) in universe.indices().iter().enumerate() {
        hb.product(index.entries(), None, prod);
        let s: f64 = prod[..hb.len()].iter().zip(f).map(|(p, x)| p * x).sum();
        acc[1 + rank] += s;
    }
}

/// Scratch buffers for [`grid_block`].
pub(crate) struct GridScratch {
    prod: Vec<f64>,
    group: Vec<f64>,
    dgroup: Vec<f64>,
    running: Vec<f64>,
}

impl GridScratch {
    pub(crate) fn new() -> Self {
        Self { prod: Vec::new(), group: Vec::new(), dgroup: Vec::new(), running: Vec::new() }
    }

    fn ensure(&mut self, len: usize, dim: usize) {
        self.prod.resize(len.max(self.prod.len()), 0.0);
        self.group.resize(len.max(self.group.len()), 0.0);
        self.dgroup.resize((len * dim).max(self.dgroup.len()), 0.0);
        self.running.resize(len.max(self.running.len()), 0.0);
    }
}

/// Grid conditional expectations and Malliavin derivatives for one block.
///
/// Writes `cond[b * (N + 1) + r] = E_{t_r}(C F)` and
/// `deriv[(b * (N + 1) + r) * d + l] = D^l_{t_r} E_{t_r}(C F)` for all
/// `r = 0..=N`. `E_{t_r}` accumulates the per-step groups `1..=r` onto `d0` in
/// that order; the derivative at `r` only involves the group ending at `r`.
pub(crate) fn grid_block(
    universe: &IndexUniverse,
    d0: f64,
    coeffs: &[f64],
    hb: &HermiteBlock,
    scratch: &mut GridScratch,
    cond: &mut [f64],
    deriv: &mut [f64],
) {
    let basis = universe.basis();
    let (n, d, len) = (basis.steps(), basis.dim(), hb.len());
    let inv_sqrt_h = 1.0 / basis.step_size().sqrt();
    let width = n + 1;
    scratch.ensure(len, d);
    let GridScratch { prod, group, dgroup, running } = scratch;

    for b in 0..len {
        cond[b * width] = d0;
        for l in 0..d {
            deriv[b * width * d + l] = coeffs[universe.unit_rank(l, 0)] * inv_sqrt_h;
        }
    }
    running[..len].fill(d0);

    for r in 1..=n {
        group[..len].fill(0.0);
        dgroup[..len * d].fill(0.0);
        for &rank in universe.ranks_ending_at(r) {
            let rank = rank as usize;
            let c = coeffs[rank];
            let entries = universe.indices()[rank].entries();
            hb.product(entries, None, prod);
            for (g, &p) in group[..len].iter_mut().zip(prod.iter()) {
                *g += c * p;
            }
            for (k, &(s, _)) in entries.iter().enumerate() {
                let (l, step) = basis.slot_position(s);
                if step + 1 != r {
                    continue;
                }
                hb.product(entries, Some(k), prod);
                for (g, &p) in dgroup[l * len..(l + 1) * len].iter_mut().zip(prod.iter()) {
                    *g += c * p;
                }
            }
        }
        for b in 0..len {
            running[b] += group[b];
            cond[b * width + r] = running[b];
            for l in 0..d {
                deriv[(b * width + r) * d + l] = dgroup[l * len + b] * inv_sqrt_h;
            }
        }
    }
}
