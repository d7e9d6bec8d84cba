//! Augmenting-path max-flow with two search trees grown from the terminals
//! (Boykov & Kolmogorov). Trees are reused between augmentations; nodes cut
//! off by a saturated arc become orphans and try to re-attach before being
//! freed.

use std::collections::VecDeque;

use crate::network::FlowNetwork;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_D: u32 = u32::MAX;

/// Result of a max-flow computation.
#[derive(Clone, Debug)]
pub struct CutResult {
    /// Maximum flow value, equal to the minimum cut capacity.
    pub flow: f64,
    /// Per node, `true` for the source side of the minimum cut. The source
    /// side is the set reachable from the source in the final residual graph,
    /// i.e. the smallest source set among all minimum cuts.
    pub source_side: Vec<bool>,
    /// Number of augmenting paths pushed.
    pub augmentations: usize,
    /// Flow carried by each directed arc, indexed like [`crate::ArcId`].
    /// Infinite arcs are bounded by the solver sentinel.
    pub arc_flow: Vec<f64>,
}

impl CutResult {
    pub fn is_source_side(&self, node: crate::NodeId) -> bool {
        self.source_side[node.0]
    }
}

struct Solver {
    // node data
    first: Vec<usize>,
    parent: Vec<usize>,
    ts: Vec<u32>,
    dist: Vec<u32>,
    is_sink: Vec<bool>,
    active: Vec<bool>,
    tr_cap: Vec<f64>,
    // arc data, grouped by tail node
    head: Vec<usize>,
    sister: Vec<usize>,
    r_cap: Vec<f64>,

    // bookkeeping for arc flow recovery
    src_cap: Vec<f64>,
    snk_cap: Vec<f64>,
    pair_pos: Vec<usize>,

    queue: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u32,
    flow: f64,
    augmentations: usize,
}

/// Computes a maximum flow and the residual-reachability minimum cut.
pub fn max_flow(net: &FlowNetwork) -> CutResult {
    let mut solver = Solver::build(net);
    solver.run();
    let source_side = solver.source_reachable(net);
    let arc_flow = solver.arc_flows(net);
    CutResult {
        flow: solver.flow,
        source_side,
        augmentations: solver.augmentations,
        arc_flow,
    }
}

impl Solver {
    fn build(net: &FlowNetwork) -> Solver {
        let n = net.num_nodes();
        let s = net.source().0;
        let t = net.sink().0;
        let sentinel = net.inf_sentinel();
        let cap_of = |c: f64| if c.is_finite() { c } else { sentinel };

        let mut src_cap = vec![0.0; n];
        let mut snk_cap = vec![0.0; n];
        let mut flow = 0.0;
        let mut inner_pairs = Vec::new();
        let mut pair_of = Vec::with_capacity(net.arcs.len() / 2);
        for pair in net.arcs.chunks_exact(2) {
            let (fwd, bwd) = (&pair[0], &pair[1]);
            let (a, b) = (fwd.from, fwd.to);
            if a == b {
                pair_of.push(NONE);
                continue;
            }
            let a_term = a == s || a == t;
            let b_term = b == s || b == t;
            if a_term || b_term {
                pair_of.push(NONE);
                for arc in [fwd, bwd] {
                    let c = cap_of(arc.cap);
                    if arc.from == s && arc.to == t {
                        flow += c;
                    } else if arc.from == s {
                        src_cap[arc.to] += c;
                    } else if arc.to == t {
                        snk_cap[arc.from] += c;
                    }
                }
            } else {
                pair_of.push(inner_pairs.len());
                inner_pairs.push((a, b, cap_of(fwd.cap), cap_of(bwd.cap)));
            }
        }

        let mut tr_cap = vec![0.0; n];
        for i in 0..n {
            let (a, b) = (src_cap[i], snk_cap[i]);
            if a > 0.0 || b > 0.0 {
                if a >= b {
                    flow += b;
                    tr_cap[i] = a - b;
                } else {
                    flow += a;
                    tr_cap[i] = -(b - a);
                }
            }
        }

        // CSR layout, arcs of a node kept in insertion order.
        let mut degree = vec![0usize; n + 1];
        for &(a, b, _, _) in &inner_pairs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut first = vec![0usize; n + 1];
        for i in 0..n {
            first[i + 1] = first[i] + degree[i];
        }
        let m = first[n];
        let mut fill = first.clone();
        let mut head = vec![0usize; m];
        let mut sister = vec![0usize; m];
        let mut r_cap = vec![0.0; m];
        let mut inner_pos = Vec::with_capacity(inner_pairs.len());
        for &(a, b, cab, cba) in &inner_pairs {
            let ka = fill[a];
            fill[a] += 1;
            let kb = fill[b];
            fill[b] += 1;
            head[ka] = b;
            r_cap[ka] = cab;
            sister[ka] = kb;
            head[kb] = a;
            r_cap[kb] = cba;
            sister[kb] = ka;
            inner_pos.push(ka);
        }
        let pair_pos = pair_of
            .iter()
            .map(|&p| if p == NONE { NONE } else { inner_pos[p] })
            .collect();

        Solver {
            first,
            parent: vec![NONE; n],
            ts: vec![0; n],
            dist: vec![0; n],
            is_sink: vec![false; n],
            active: vec![false; n],
            tr_cap,
            head,
            sister,
            r_cap,
            src_cap,
            snk_cap,
            pair_pos,
            queue: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
            flow,
            augmentations: 0,
        }
    }

    #[inline]
    fn arcs(&self, i: usize) -> std::ops::Range<usize> {
        self.first[i]..self.first[i + 1]
    }

    #[inline]
    fn set_active(&mut self, i: usize) {
        if !self.active[i] {
            self.active[i] = true;
            self.queue.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.queue.pop_front() {
            self.active[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }

    fn run(&mut self) {
        let n = self.tr_cap.len();
        for i in 0..n {
            if self.tr_cap[i] > 0.0 {
                self.is_sink[i] = false;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.ts[i] = 0;
                self.dist[i] = 1;
            } else if self.tr_cap[i] < 0.0 {
                self.is_sink[i] = true;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.ts[i] = 0;
                self.dist[i] = 1;
            }
        }

        let mut current: Option<usize> = None;
        loop {
            let mut node = current.take();
            if let Some(i) = node {
                self.active[i] = false;
                if self.parent[i] == NONE {
                    node = None;
                }
            }
            let i = match node {
                Some(i) => i,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };

            let path_arc = self.grow(i);
            self.time += 1;

            if let Some(a) = path_arc {
                // keep growing from i after the augmentation
                self.active[i] = true;
                current = Some(i);
                self.augment(a);
                self.adopt_orphans();
            }
        }
    }

    /// Grows the tree containing `i` by one layer. Returns the arc (oriented
    /// source tree -> sink tree) joining the two trees, if one is found.
    fn grow(&mut self, i: usize) -> Option<usize> {
        if !self.is_sink[i] {
            for a in self.arcs(i) {
                if self.r_cap[a] > 0.0 {
                    let j = self.head[a];
                    if self.parent[j] == NONE {
                        self.is_sink[j] = false;
                        self.parent[j] = self.sister[a];
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if self.is_sink[j] {
                        return Some(a);
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = self.sister[a];
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
            }
        } else {
            for a in self.arcs(i) {
                if self.r_cap[self.sister[a]] > 0.0 {
                    let j = self.head[a];
                    if self.parent[j] == NONE {
                        self.is_sink[j] = true;
                        self.parent[j] = self.sister[a];
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if !self.is_sink[j] {
                        return Some(self.sister[a]);
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = self.sister[a];
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
            }
        }
        None
    }

    fn set_orphan_front(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i);
    }

    fn set_orphan_rear(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_back(i);
    }

    fn augment(&mut self, middle: usize) {
        let tail = self.head[self.sister[middle]];
        let front = self.head[middle];

        let mut bottleneck = self.r_cap[middle];
        let mut i = tail;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[self.sister[a]]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);
        let mut i = front;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(-self.tr_cap[i]);

        self.r_cap[self.sister[middle]] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = tail;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            self.r_cap[a] += bottleneck;
            let sa = self.sister[a];
            self.r_cap[sa] -= bottleneck;
            if self.r_cap[sa] <= 0.0 {
                self.r_cap[sa] = 0.0;
                self.set_orphan_front(i);
            }
            i = self.head[a];
        }
        self.tr_cap[i] -= bottleneck;
        if self.tr_cap[i] <= 0.0 {
            self.tr_cap[i] = 0.0;
            self.set_orphan_front(i);
        }

        let mut i = front;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let sa = self.sister[a];
            self.r_cap[sa] += bottleneck;
            self.r_cap[a] -= bottleneck;
            if self.r_cap[a] <= 0.0 {
                self.r_cap[a] = 0.0;
                self.set_orphan_front(i);
            }
            i = self.head[a];
        }
        self.tr_cap[i] += bottleneck;
        if self.tr_cap[i] >= 0.0 {
            self.tr_cap[i] = 0.0;
            self.set_orphan_front(i);
        }

        self.flow += bottleneck;
        self.augmentations += 1;
    }

    fn adopt_orphans(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            if self.is_sink[i] {
                self.process_orphan(i, true);
            } else {
                self.process_orphan(i, false);
            }
        }
    }

    /// Distance from `j` to its terminal along parent arcs, or `None` when the
    /// chain ends in an orphan. Caches results using the current timestamp.
    fn origin_distance(&mut self, start: usize) -> Option<u32> {
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            if self.ts[j] == self.time {
                d += self.dist[j];
                break;
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.ts[j] = self.time;
                self.dist[j] = 1;
                break;
            }
            if a == ORPHAN {
                return None;
            }
            j = self.head[a];
        }
        // mark the path
        let mut j = start;
        let mut dd = d;
        while self.ts[j] != self.time {
            self.ts[j] = self.time;
            self.dist[j] = dd;
            dd -= 1;
            j = self.head[self.parent[j]];
        }
        Some(d)
    }

    fn process_orphan(&mut self, i: usize, sink_tree: bool) {
        let mut best_arc = NONE;
        let mut best_d = INFINITE_D;

        for a0 in self.arcs(i) {
            // residual capacity toward i along the tree direction
            let residual = if sink_tree {
                self.r_cap[a0]
            } else {
                self.r_cap[self.sister[a0]]
            };
            if residual <= 0.0 {
                continue;
            }
            let j = self.head[a0];
            if self.is_sink[j] != sink_tree || self.parent[j] == NONE {
                continue;
            }
            if let Some(d) = self.origin_distance(j) {
                if d < best_d {
                    best_arc = a0;
                    best_d = d;
                }
            }
        }

        if best_arc != NONE {
            self.parent[i] = best_arc;
            self.ts[i] = self.time;
            self.dist[i] = best_d + 1;
            return;
        }

        self.parent[i] = NONE;
        for a0 in self.arcs(i) {
            let j = self.head[a0];
            let pj = self.parent[j];
            if self.is_sink[j] == sink_tree && pj != NONE {
                let residual = if sink_tree {
                    self.r_cap[a0]
                } else {
                    self.r_cap[self.sister[a0]]
                };
                if residual > 0.0 {
                    self.set_active(j);
                }
                if pj != TERMINAL && pj != ORPHAN && self.head[pj] == i {
                    self.set_orphan_rear(j);
                }
            }
        }
    }

    fn arc_flows(&self, net: &FlowNetwork) -> Vec<f64> {
        let sentinel = net.inf_sentinel();
        let cap_of = |c: f64| if c.is_finite() { c } else { sentinel };
        let (s, t) = (net.source().0, net.sink().0);
        let n = self.tr_cap.len();
        // remaining terminal flow to hand out per node
        let mut from_source: Vec<f64> = (0..n).map(|i| self.src_cap[i] - self.tr_cap[i].max(0.0)).collect();
        let mut to_sink: Vec<f64> = (0..n).map(|i| self.snk_cap[i] - (-self.tr_cap[i]).max(0.0)).collect();
        let mut flows = vec![0.0; net.arcs.len()];
        for (p, pair) in net.arcs.chunks_exact(2).enumerate() {
            let pos = self.pair_pos[p];
            if pos != NONE {
                let f = cap_of(pair[0].cap) - self.r_cap[pos];
                if f > 0.0 {
                    flows[2 * p] = f;
                } else {
                    flows[2 * p + 1] = -f;
                }
                continue;
            }
            for k in 0..2 {
                let arc = &pair[k];
                if arc.from == arc.to {
                    continue;
                }
                let c = cap_of(arc.cap);
                let f = if arc.from == s && arc.to == t {
                    c
                } else if arc.from == s {
                    let f = c.min(from_source[arc.to]);
                    from_source[arc.to] -= f;
                    f
                } else if arc.to == t {
                    let f = c.min(to_sink[arc.from]);
                    to_sink[arc.from] -= f;
                    f
                } else {
                    0.0
                };
                flows[2 * p + k] = f;
            }
        }
        flows
    }

    fn source_reachable(&self, net: &FlowNetwork) -> Vec<bool> {
        let n = self.tr_cap.len();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let s = net.source().0;
        seen[s] = true;
        for i in 0..n {
            if self.tr_cap[i] > 0.0 {
                seen[i] = true;
                stack.push(i);
            }
        }
        while let Some(i) = stack.pop() {
            for a in self.arcs(i) {
                let j = self.head[a];
                if self.r_cap[a] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen[net.sink().0] = false;
        seen
    }
}
