use rand::Rng;

/// Remaining socket counts `δ_s` with O(log n) sampling from
/// `ν_s(x) = δ_s(x) / Σ_y δ_s(y)` and O(log n) point updates.
#[derive(Clone, Debug)]
pub struct SocketSampler {
    values: Vec<u64>,
    tree: Vec<u64>,
    total: u64,
}

impl SocketSampler {
    pub fn new(values: &[u64]) -> Self {
        let n = values.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        SocketSampler {
            values: values.to_vec(),
            tree,
            total: values.iter().sum(),
        }
    }

    pub fn from_degrees(d: &[usize]) -> Self {
        Self::new(&d.iter().map(|&x| x as u64).collect::<Vec<_>>())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn get(&self, x: usize) -> u64 {
        self.values[x]
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.values[x] as f64 / self.total as f64
    }

    pub fn set(&mut self, x: usize, value: u64) {
        let old = self.values[x];
        if old == value {
            return;
        }
        self.values[x] = value;
        self.total = self.total - old + value;
        let mut i = x + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i] - old + value;
            i += i & i.wrapping_neg();
        }
    }

    pub fn decrement(&mut self, x: usize) {
        let v = self.values[x];
        debug_assert!(v > 0);
        self.set(x, v - 1);
    }

    /// Index `x` with `Σ_{y<x} δ(y) ≤ target < Σ_{y≤x} δ(y)`.
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let n = self.values.len();
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    /// Draw from `ν`. Panics if no sockets remain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        assert!(self.total > 0, "sampling from an empty socket state");
        self.find(rng.random_range(0..self.total))
    }
}

/// Socket bookkeeping of a layered generator: `δ_s` and the layer index.
#[derive(Clone, Debug)]
pub struct SocketState {
    pub remaining: SocketSampler,
    pub layer: usize,
}

impl SocketState {
    pub fn new(degrees: &[usize]) -> Self {
        SocketState {
            remaining: SocketSampler::from_degrees(degrees),
            layer: 1,
        }
    }

    /// `ν_s` as a dense probability vector; `None` when no sockets remain.
    pub fn distribution(&self) -> Option<Vec<f64>> {
        let total = self.remaining.total();
        (total > 0).then(|| {
            self.remaining
                .values()
                .iter()
                .map(|&v| v as f64 / total as f64)
                .collect()
        })
    }

    /// `δ_{s+1} = (δ_s − ∇_s)_+`. Returns how many sockets were clipped
    /// by the positive part.
    pub fn apply_round(&mut self, increment: &[(usize, u64)]) -> u64 {
        let mut clipped = 0;
        for &(x, c) in increment {
            let v = self.remaining.get(x);
            clipped += c.saturating_sub(v);
            self.remaining.set(x, v.saturating_sub(c));
        }
        self.layer += 1;
        clipped
    }
}
