//! Helpers shared by the integration suites: seeded random laws and an
//! independent minimum-cost transport solver used as an oracle for the
//! quantile-formula Wasserstein distance.

#![allow(dead_code)]

use rand::Rng;
use uirisk::DiscreteDistribution;

/// Random law with 1..=max_atoms support points in [-5, 5].
pub fn random_law(rng: &mut impl Rng, max_atoms: usize) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    DiscreteDistribution::new(atoms, weights).expect("random candidate law is valid")
}

/// Random law supported on [0, 5].
pub fn random_nonnegative_law(rng: &mut impl Rng, max_atoms: usize) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    DiscreteDistribution::new(atoms, weights).expect("random candidate law is valid")
}

struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    /// Node potentials keep reduced costs nonnegative across augmentations.
    pot: Vec<f64>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        FlowNet {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            pot: vec![0.0; nodes],
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: f64, cost: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
        self.cost.push(-cost);
    }

    /// Cheapest source-to-sink path by Dijkstra on reduced costs. Residual
    /// arcs used by an optimal path have reduced cost zero, so clamping the
    /// float noise below zero keeps Dijkstra sound; every node is settled
    /// once, so the predecessor graph is a tree no matter how costs round.
    fn shortest_path(&mut self, source: usize, sink: usize) -> Option<Vec<usize>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred_arc = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[source] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] <= 1e-15 || done[v] {
                    continue;
                }
                let reduced = (self.cost[e] + self.pot[u] - self.pot[v]).max(0.0);
                if dist[u] + reduced < dist[v] {
                    dist[v] = dist[u] + reduced;
                    pred_arc[v] = e;
                }
            }
        }
        if !dist[sink].is_finite() {
            return None;
        }
        for (v, &d) in dist.iter().enumerate() {
            if d.is_finite() {
                self.pot[v] += d;
            }
        }
        let mut path = Vec::new();
        let mut v = sink;
        while v != source {
            let e = pred_arc[v];
            path.push(e);
            v = self.to[e ^ 1];
        }
        Some(path)
    }
}

/// Minimum-cost transport between two laws, solved as a flow problem by
/// successive shortest paths: source feeds the atoms of `f`, the atoms of
/// `g` drain into the sink, and the middle arcs cost |x_i - y_j|. Shares no
/// code with the quantile-formula distance.
pub fn transport_lp(f: &DiscreteDistribution, g: &DiscreteDistribution) -> f64 {
    let n = f.len();
    let m = g.len();
    let source = n + m;
    let sink = n + m + 1;
    let mut net = FlowNet::new(n + m + 2);
    for (i, &w) in f.weights().iter().enumerate() {
        net.add(source, i, w, 0.0);
    }
    for (j, &w) in g.weights().iter().enumerate() {
        net.add(n + j, sink, w, 0.0);
    }
    for (i, &x) in f.atoms().iter().enumerate() {
        for (j, &y) in g.atoms().iter().enumerate() {
            net.add(i, n + j, 2.0, (x - y).abs());
        }
    }

    let mut total_cost = 0.0;
    let mut shipped = 0.0;
    // Every augmentation zeroes its bottleneck arc exactly, so far fewer
    // rounds than this suffice; the cap turns a degenerate instance into
    // the shipped assertion below instead of a hang.
    for _ in 0..10_000 {
        if shipped >= 1.0 - 1e-12 {
            break;
        }
        let Some(path) = net.shortest_path(source, sink) else {
            break;
        };
        let push = path
            .iter()
            .map(|&e| net.cap[e])
            .fold(f64::INFINITY, f64::min);
        for &e in &path {
            net.cap[e] -= push;
            net.cap[e ^ 1] += push;
            total_cost += push * net.cost[e];
        }
        shipped += push;
    }
    assert!(shipped > 1.0 - 1e-9, "transport shipped only {shipped}");
    total_cost
}

/// Numerical maximization of (x+y)/((x-ay) v (y-bx)): scale invariance pins
/// x+y = 1, the denominator is a V in x, so a coarse grid brackets the peak
/// and ternary search sharpens it.
pub fn lemma_maximize_on_grid(a: f64, b: f64) -> f64 {
    let denom = |x: f64| (x - a * (1.0 - x)).max((1.0 - x) - b * x);
    let mut best_x = 0.5;
    let mut best = f64::INFINITY;
    for i in 1..2000 {
        let x = i as f64 / 2000.0;
        let d = denom(x);
        if d < best {
            best = d;
            best_x = x;
        }
    }
    let (mut lo, mut hi) = (best_x - 1.0 / 2000.0, best_x + 1.0 / 2000.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if denom(m1) <= denom(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    1.0 / denom(0.5 * (lo + hi))
}
