use crate::prelude::*;

/// The regular lattice `{k/K : k ∈ ℕ^d, Σ k = K}` on the closed simplex,
/// triangulated by Kuhn simplices in cumulative coordinates.
///
/// Nodes are ranked lexicographically in `(k_1, …, k_d)`, so for `d = 2` the
/// first node is `(0, 1)` and the last is `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexLattice {
    dim: usize,
    resolution: usize,
}

/// The lattice simplex containing a point, with barycentric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SimplexLattice {
    pub fn new(dim: usize, resolution: usize) -> Self {
        assert!(dim >= 2 && resolution >= 1, "lattice needs d ≥ 2 and K ≥ 1");
        Self { dim, resolution }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of nodes, `C(K + d - 1, d - 1)`.
    pub fn len(&self) -> usize {
        compositions(self.resolution, self.dim)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rank of a composition of `K`.
    pub fn index_of(&self, k: &[usize]) -> usize {
        debug_assert_eq!(k.len(), self.dim);
        let mut rank = 0;
        let mut rest = self.resolution;
        for i in 0..self.dim - 1 {
            for j in 0..k[i] {
                rank += compositions(rest - j, self.dim - i - 1);
            }
            rest -= k[i];
        }
        rank
    }

    /// Composition of `K` with the given rank.
    pub fn node(&self, mut index: usize) -> Vec<usize> {
        let mut k = vec![0; self.dim];
        let mut rest = self.resolution;
        for i in 0..self.dim - 1 {
            let mut j = 0;
            loop {
                let block = compositions(rest - j, self.dim - i - 1);
                if index < block {
                    break;
                }
                index -= block;
                j += 1;
            }
            k[i] = j;
            rest -= j;
        }
        k[self.dim - 1] = rest;
        k
    }

    /// Coordinates `k / K` of a node.
    pub fn point(&self, index: usize) -> Vec<f64> {
        let k = self.resolution as f64;
        self.node(index).iter().map(|&v| v as f64 / k).collect()
    }

    /// Lattice neighbours `(u, w)` with `w = u + e_i - e_j`, each unordered pair once.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for u in 0..self.len() {
            let k = self.node(u);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if i == j || k[j] == 0 {
                        continue;
                    }
                    let mut w = k.clone();
                    w[i] += 1;
                    w[j] -= 1;
                    let v = self.index_of(&w);
                    if u < v {
                        pairs.push((u, v));
                    }
                }
            }
        }
        pairs
    }

    /// ℓ₁ distance between lattice neighbours, `2/K`.
    pub fn neighbor_distance(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    /// Cell containing `x`. Coordinates are clamped at zero and renormalized.
    pub fn locate(&self, x: &[f64]) -> Cell {
        let d = self.dim;
        let kk = self.resolution as f64;
        let total: f64 = x.iter().map(|v| v.max(0.0)).sum();
        // cumulative coordinates w_k = K (x_1 + … + x_k), k < d
        let mut w = vec![0.0; d - 1];
        let mut acc = 0.0;
        for i in 0..d - 1 {
            acc += x[i].max(0.0) / total;
            let prev = if i == 0 { 0.0 } else { w[i - 1] };
            w[i] = (acc * kk).clamp(prev, kk);
        }
        let mut base = vec![0usize; d - 1];
        let mut frac = vec![0.0; d - 1];
        for i in 0..d - 1 {
            let f = w[i].floor();
            let mut b = f as usize;
            let mut r = w[i] - f;
            if b >= self.resolution {
                b = self.resolution;
                r = 0.0;
            }
            base[i] = b;
            frac[i] = r;
        }
        // decreasing fractional part; ties go to the larger coordinate first
        let mut order: Vec<usize> = (0..d - 1).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(b.cmp(&a)));

        let mut nodes = Vec::with_capacity(d);
        let mut weights = Vec::with_capacity(d);
        let mut vertex = base.clone();
        nodes.push(self.index_of_cumulative(&vertex));
        weights.push(1.0 - order.first().map_or(0.0, |&o| frac[o]));
        for (m, &o) in order.iter().enumerate() {
            vertex[o] += 1;
            let next = order.get(m + 1).map_or(0.0, |&n| frac[n]);
            let wt = frac[o] - next;
            if vertex[o] > self.resolution || (o + 1 < d - 1 && vertex[o] > vertex[o + 1]) {
                // zero-weight vertex outside the region; collapse it onto the previous one
                vertex[o] -= 1;
                *weights.last_mut().unwrap() += wt;
                continue;
            }
            nodes.push(self.index_of_cumulative(&vertex));
            weights.push(wt);
        }
        Cell { nodes, weights }
    }

    /// Rank of a node given by cumulative coordinates.
    fn index_of_cumulative(&self, w: &[usize]) -> usize {
        let d = self.dim;
        let mut k = vec![0; d];
        let mut prev = 0;
        for i in 0..d - 1 {
            k[i] = w[i] - prev;
            prev = w[i];
        }
        k[d - 1] = self.resolution - prev;
        self.index_of(&k)
    }

    /// Every Kuhn cell as its chain of `d` node indices, `v_0, …, v_{d-1}`,
    /// together with the coordinate moved at each step (`v_m - v_{m-1}` moves
    /// mass from coordinate `σ_m + 1` to `σ_m`).
    pub fn cells(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let d = self.dim;
        let k = self.resolution;
        let mut out = Vec::new();
        let perms = permutations(d - 1);
        let mut base = vec![0usize; d - 1];
        loop {
            for sigma in &perms {
                let mut vertex = base.clone();
                let mut chain = vec![self.index_of_cumulative(&vertex)];
                let mut ok = true;
                for &o in sigma {
                    vertex[o] += 1;
                    if vertex[o] > k || (o + 1 < d - 1 && vertex[o] > vertex[o + 1]) {
                        ok = false;
                        break;
                    }
                    chain.push(self.index_of_cumulative(&vertex));
                }
                if ok {
                    out.push((chain, sigma.clone()));
                }
            }
            if !next_monotone(&mut base, k - 1) {
                break;
            }
        }
        out
    }
}

/// Number of compositions of `n` into `parts` nonnegative parts.
fn compositions(n: usize, parts: usize) -> usize {
    if parts == 0 {
        return usize::from(n == 0);
    }
    binomial(n + parts - 1, parts - 1)
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Advances a nondecreasing vector with entries in `0..=max`.
fn next_monotone(v: &mut [usize], max: usize) -> bool {
    let n = v.len();
    let mut i = n;
    while i > 0 {
        i -= 1;
        if v[i] < max {
            v[i] += 1;
            let val = v[i];
            for item in v.iter_mut().skip(i + 1) {
                *item = val;
            }
            return true;
        }
    }
    false
}
