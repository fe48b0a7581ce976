//! Primal network simplex for uncapacitated min-cost flow with integer supplies.
//!
//! The spanning tree is kept strongly feasible (zero-flow tree arcs point
//! towards the root) which rules out cycling on the heavily degenerate
//! transportation instances this crate produces. Entering arcs are chosen by
//! block search over the real arcs.

const UNBOUNDED: i64 = i64::MAX;

#[derive(Debug)]
pub(crate) enum FlowError {
    Infeasible,
    Unbounded,
}

pub(crate) struct FlowNetwork {
    supply: Vec<i64>,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
}

impl FlowNetwork {
    #[cfg(test)]
    /// `supply[v] > 0` for sources, `< 0` for sinks; supplies must sum to zero.
    pub fn new(supply: Vec<i64>) -> Self {
        FlowNetwork {
            supply,
            source: Vec::new(),
            target: Vec::new(),
            cost: Vec::new(),
        }
    }

    pub fn with_arc_capacity(supply: Vec<i64>, arcs: usize) -> Self {
        FlowNetwork {
            supply,
            source: Vec::with_capacity(arcs),
            target: Vec::with_capacity(arcs),
            cost: Vec::with_capacity(arcs),
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: f64) -> usize {
        self.source.push(from);
        self.target.push(to);
        self.cost.push(cost);
        self.source.len() - 1
    }

    /// Optimal flow on every arc, in insertion order.
    pub fn solve(&self) -> Result<Vec<i64>, FlowError> {
        debug_assert_eq!(self.supply.iter().sum::<i64>(), 0);
        Simplex::new(self).run()
    }
}

struct Simplex {
    node_count: usize,
    arc_count: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    block_size: usize,
    next_arc: usize,
    eps: f64,
}

impl Simplex {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.supply.len();
        let m = net.source.len();
        let root = n;
        let max_cost = net.cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let art_cost = (max_cost + 1.0) * (n as f64 + 1.0);

        let mut source = net.source.clone();
        let mut target = net.target.clone();
        let mut cost = net.cost.clone();
        let mut flow = vec![0i64; m + n];
        let mut in_tree = vec![false; m + n];
        let mut parent = vec![root; n + 1];
        let mut pred = vec![usize::MAX; n + 1];
        let mut pred_up = vec![true; n + 1];
        let mut depth = vec![1usize; n + 1];
        let mut pi = vec![0.0; n + 1];
        depth[root] = 0;
        parent[root] = usize::MAX;
        source.reserve(n);
        target.reserve(n);
        cost.reserve(n);
        for u in 0..n {
            let e = m + u;
            pred[u] = e;
            in_tree[e] = true;
            if net.supply[u] >= 0 {
                source.push(u);
                target.push(root);
                cost.push(0.0);
                flow[e] = net.supply[u];
                pred_up[u] = true;
                pi[u] = 0.0;
            } else {
                source.push(root);
                target.push(u);
                cost.push(art_cost);
                flow[e] = -net.supply[u];
                pred_up[u] = false;
                pi[u] = art_cost;
            }
        }
        let mut children = vec![Vec::new(); n + 1];
        children[root] = (0..n).collect();
        let block_size = ((m as f64).sqrt().ceil() as usize).max(10).min(m.max(1));
        Simplex {
            node_count: n,
            arc_count: m,
            root,
            source,
            target,
            cost,
            flow,
            in_tree,
            parent,
            pred,
            pred_up,
            depth,
            pi,
            children,
            block_size,
            next_arc: 0,
            eps: 1e-11 * (max_cost + 1.0),
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    fn find_entering(&mut self) -> Option<usize> {
        let m = self.arc_count;
        if m == 0 {
            return None;
        }
        let mut best: Option<usize> = None;
        let mut min = -self.eps;
        let mut left = self.block_size;
        for k in 0..m {
            let e = (self.next_arc + k) % m;
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < min {
                    min = rc;
                    best = Some(e);
                }
            }
            left -= 1;
            if left == 0 {
                if best.is_some() {
                    self.next_arc = (e + 1) % m;
                    return best;
                }
                left = self.block_size;
            }
        }
        if let Some(e) = best {
            self.next_arc = (e + 1) % m;
        }
        best
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn run(mut self) -> Result<Vec<i64>, FlowError> {
        while let Some(in_arc) = self.find_entering() {
            let first = self.source[in_arc];
            let second = self.target[in_arc];
            let join = self.find_join(first, second);

            let mut delta = UNBOUNDED;
            let mut u_out = usize::MAX;
            let mut side = 0;
            let mut u = first;
            while u != join {
                let d = if self.pred_up[u] { self.flow[self.pred[u]] } else { UNBOUNDED };
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let d = if self.pred_up[u] { UNBOUNDED } else { self.flow[self.pred[u]] };
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
                u = self.parent[u];
            }
            if side == 0 || delta == UNBOUNDED {
                return Err(FlowError::Unbounded);
            }

            if delta > 0 {
                self.flow[in_arc] += delta;
                let mut u = first;
                while u != join {
                    let e = self.pred[u];
                    self.flow[e] += if self.pred_up[u] { -delta } else { delta };
                    u = self.parent[u];
                }
                let mut u = second;
                while u != join {
                    let e = self.pred[u];
                    self.flow[e] += if self.pred_up[u] { delta } else { -delta };
                    u = self.parent[u];
                }
            }

            let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
            self.in_tree[self.pred[u_out]] = false;
            self.in_tree[in_arc] = true;
            self.rehang(u_in, v_in, u_out, in_arc);
        }

        let m = self.arc_count;
        if self.flow[m..m + self.node_count].iter().any(|&f| f > 0) {
            return Err(FlowError::Infeasible);
        }
        self.flow.truncate(m);
        Ok(self.flow)
    }

    /// Reverses the tree path from `u_in` up to `u_out`, attaches `u_in`
    /// under `v_in` through `in_arc`, and refreshes depths and potentials of
    /// the moved subtree.
    fn rehang(&mut self, u_in: usize, v_in: usize, u_out: usize, in_arc: usize) {
        let mut u = u_in;
        let mut new_parent = v_in;
        let mut new_pred = in_arc;
        loop {
            let old_parent = self.parent[u];
            let old_pred = self.pred[u];
            self.detach(old_parent, u);
            self.children[new_parent].push(u);
            self.parent[u] = new_parent;
            self.pred[u] = new_pred;
            self.pred_up[u] = self.source[new_pred] == u;
            if u == u_out {
                break;
            }
            new_parent = u;
            new_pred = old_pred;
            u = old_parent;
        }
        let mut stack = vec![u_in];
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            let c = self.cost[self.pred[v]];
            self.depth[v] = self.depth[p] + 1;
            self.pi[v] = if self.pred_up[v] { self.pi[p] - c } else { self.pi[p] + c };
            stack.extend(self.children[v].iter().copied());
        }
        debug_assert!(self.parent[self.root] == usize::MAX);
    }

    fn detach(&mut self, parent: usize, child: usize) {
        let list = &mut self.children[parent];
        if let Some(pos) = list.iter().position(|&c| c == child) {
            list.swap_remove(pos);
        }
    }
}
