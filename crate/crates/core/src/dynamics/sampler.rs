use rand::Rng;

/// Samples a link with probability proportional to `weight + 1`.
///
/// Backed by a Fenwick tree over a subset of edge ids, so both sampling and
/// weight updates cost `O(log E)`.
#[derive(Debug, Clone)]
pub struct LinkSampler {
    edges: Vec<usize>,
    /// Edge id -> slot, `usize::MAX` for edges outside the subset.
    slot: Vec<usize>,
    tree: Vec<f64>,
    total: f64,
}

const SMOOTHING: f64 = 1.0;

impl LinkSampler {
    /// Builds a sampler over `edges`; `weights` is indexed by edge id.
    pub fn new(edges: Vec<usize>, weights: &[f64]) -> Self {
        let mut slot = vec![usize::MAX; weights.len()];
        let mut tree = vec![0.0; edges.len() + 1];
        let mut total = 0.0;
        for (k, &e) in edges.iter().enumerate() {
            slot[e] = k;
            let v = weights[e] + SMOOTHING;
            total += v;
            tree[k + 1] += v;
            let parent = (k + 1) + lowbit(k + 1);
            if parent <= edges.len() {
                let carry = tree[k + 1];
                tree[parent] += carry;
            }
        }
        Self {
            edges,
            slot,
            tree,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.slot.get(edge).is_some_and(|&s| s != usize::MAX)
    }

    /// Registers growth of `edge`'s weight; a no-op for edges outside the subset.
    pub fn add(&mut self, edge: usize, amount: f64) {
        let Some(&k) = self.slot.get(edge) else { return };
        if k == usize::MAX {
            return;
        }
        self.total += amount;
        let mut i = k + 1;
        while i < self.tree.len() {
            self.tree[i] += amount;
            i += lowbit(i);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.edges.is_empty() {
            return None;
        }
        let mut target = rng.random::<f64>() * self.total;
        let n = self.edges.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        // rounding can push past the last slot
        Some(self.edges[pos.min(n - 1)])
    }
}

fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}
