//! Kernel matrix backends for the SMO solver.

use super::rbf_unchecked;
use alloc::vec;
use alloc::vec::Vec;

/// Row access to a symmetric kernel matrix `K`.
pub(crate) trait Gram {
    fn len(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    /// Rows `i` and `j` at once; `i` may equal `j`.
    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]);
    fn row(&mut self, i: usize) -> &[f64] {
        self.rows(i, i).0
    }
}

/// Pairwise squared Euclidean distances, stored densely.
#[derive(Debug, Clone)]
pub(crate) struct SquaredDistances {
    n: usize,
    data: Vec<f64>,
}

impl SquaredDistances {
    pub(crate) fn new(xs: &[&[f64]]) -> Self {
        let n = xs.len();
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let d = squared_distance(xs[a], xs[b]);
                data[a * n + b] = d;
                data[b * n + a] = d;
            }
        }
        Self { n, data }
    }

    #[inline]
    pub(crate) fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.n + b]
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fully materialized kernel matrix.
#[derive(Debug, Clone)]
pub(crate) struct DenseGram {
    n: usize,
    data: Vec<f64>,
}

impl DenseGram {
    pub(crate) fn from_samples(xs: &[&[f64]], gamma: f64) -> Self {
        let n = xs.len();
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            data[a * n + a] = 1.0;
            for b in a + 1..n {
                let k = rbf_unchecked(xs[a], xs[b], gamma);
                data[a * n + b] = k;
                data[b * n + a] = k;
            }
        }
        Self { n, data }
    }

    /// Sub-matrix over `idx` of the kernel induced by precomputed distances.
    pub(crate) fn from_distances(dist: &SquaredDistances, idx: &[usize], gamma: f64) -> Self {
        let n = idx.len();
        let mut data = vec![0.0; n * n];
        for (a, &ia) in idx.iter().enumerate() {
            data[a * n + a] = 1.0;
            for (b, &ib) in idx.iter().enumerate().skip(a + 1) {
                let k = libm::exp(-gamma * dist.get(ia, ib));
                data[a * n + b] = k;
                data[b * n + a] = k;
            }
        }
        Self { n, data }
    }
}

impl Gram for DenseGram {
    fn len(&self) -> usize {
        self.n
    }

    fn diag(&self, i: usize) -> f64 {
        self.data[i * self.n + i]
    }

    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        let n = self.n;
        (
            &self.data[i * n..(i + 1) * n],
            &self.data[j * n..(j + 1) * n],
        )
    }
}

/// Kernel rows computed on demand and kept in a least-recently-used cache.
pub(crate) struct CachedGram<'a> {
    xs: Vec<&'a [f64]>,
    gamma: f64,
    capacity: usize,
    slots: Vec<Vec<f64>>,
    slot_owner: Vec<usize>,
    slot_stamp: Vec<u64>,
    slot_of: Vec<Option<usize>>,
    clock: u64,
}

impl<'a> CachedGram<'a> {
    pub(crate) fn new(xs: Vec<&'a [f64]>, gamma: f64, cache_bytes: usize) -> Self {
        let n = xs.len();
        let capacity = (cache_bytes / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            xs,
            gamma,
            capacity,
            slots: Vec::new(),
            slot_owner: Vec::new(),
            slot_stamp: Vec::new(),
            slot_of: vec![None; n],
            clock: 0,
        }
    }

    fn load(&mut self, r: usize, protect: Option<usize>) -> usize {
        self.clock += 1;
        if let Some(s) = self.slot_of[r] {
            self.slot_stamp[s] = self.clock;
            return s;
        }
        let slot = if self.slots.len() < self.capacity {
            self.slots.push(vec![0.0; self.xs.len()]);
            self.slot_owner.push(r);
            self.slot_stamp.push(0);
            self.slots.len() - 1
        } else {
            let victim = (0..self.slots.len())
                .filter(|&s| Some(s) != protect)
                .min_by_key(|&s| self.slot_stamp[s])
                .expect("cache holds at least two rows");
            self.slot_of[self.slot_owner[victim]] = None;
            victim
        };
        let xr = self.xs[r];
        let gamma = self.gamma;
        for (out, xt) in self.slots[slot].iter_mut().zip(&self.xs) {
            *out = rbf_unchecked(xr, xt, gamma);
        }
        self.slot_owner[slot] = r;
        self.slot_stamp[slot] = self.clock;
        self.slot_of[r] = Some(slot);
        slot
    }
}

impl Gram for CachedGram<'_> {
    fn len(&self) -> usize {
        self.xs.len()
    }

    fn diag(&self, _i: usize) -> f64 {
        1.0
    }

    fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        let si = self.load(i, None);
        let sj = self.load(j, Some(si));
        (&self.slots[si], &self.slots[sj])
    }
}
