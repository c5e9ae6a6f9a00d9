use rayon::prelude::*;

use super::{Configuration, Torus};

/// Number of alpha nodes in each node's Chebyshev neighbourhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborCounts {
    alpha: Vec<u32>,
}

impl NeighborCounts {
    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.alpha[idx]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Sum of `values` over the Chebyshev window of radius `w` around every node.
///
/// Separable: one circular sliding-window pass per axis, each pass built from
/// a prefix sum over the line. Lines are processed in parallel blocks; the
/// arithmetic is integral so the result does not depend on scheduling.
pub fn window_sums(torus: Torus, values: &[u32], w: usize) -> Vec<u32> {
    assert_eq!(values.len(), torus.len());
    let n = torus.side();
    assert!(2 * w < n, "window wider than the torus");
    let rank = torus.rank();
    let mut cur = values.to_vec();
    for axis in 0..rank {
        let stride = n.pow((rank - 1 - axis) as u32);
        let block = stride * n;
        let mut next = vec![0u32; cur.len()];
        next.par_chunks_mut(block).zip(cur.par_chunks(block)).for_each(|(out, src)| {
            let mut prefix = vec![0u32; n + 1];
            for inner in 0..stride {
                for k in 0..n {
                    prefix[k + 1] = prefix[k] + src[k * stride + inner];
                }
                let total = prefix[n];
                for k in 0..n {
                    let lo = k as isize - w as isize;
                    let hi = k + w;
                    let s = if lo < 0 {
                        prefix[hi + 1] + total - prefix[(n as isize + lo) as usize]
                    } else if hi >= n {
                        total - prefix[lo as usize] + prefix[hi - n + 1]
                    } else {
                        prefix[hi + 1] - prefix[lo as usize]
                    };
                    out[k * stride + inner] = s;
                }
            }
        });
        cur = next;
    }
    cur
}

/// Exact alpha counts for every node.
pub fn build_counts(config: &Configuration) -> NeighborCounts {
    let ind: Vec<u32> = config.cells().iter().map(|c| c.is_alpha() as u32).collect();
    NeighborCounts { alpha: window_sums(config.torus(), &ind, config.params().w) }
}

/// Flips node `u` and patches the counts of the `(2w+1)^dim` nodes whose
/// window contains it.
pub fn apply_flip(config: &mut Configuration, counts: &mut NeighborCounts, u: usize) {
    let now = config.toggle(u);
    let torus = config.torus();
    let w = config.params().w;
    let alpha = &mut counts.alpha;
    if now.is_alpha() {
        torus.for_each_in_window(u, w, |v| alpha[v] += 1);
    } else {
        torus.for_each_in_window(u, w, |v| alpha[v] -= 1);
    }
}
