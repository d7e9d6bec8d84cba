use std::fmt::Write as _;

use crate::{Error, Result};

/// Capacity value standing for an uncuttable arc.
///
/// At solve time every infinite capacity is replaced by a finite sentinel
/// strictly larger than the sum of all finite capacities plus one, so flow
/// arithmetic stays finite.
pub const INF: f64 = f64::INFINITY;

/// Handle to a node of a [`FlowNetwork`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Handle to one directed arc of a [`FlowNetwork`]. Arcs come in pairs; the
/// reverse of arc `k` is arc `k ^ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArcId(pub usize);

impl ArcId {
    pub fn reverse(self) -> ArcId {
        ArcId(self.0 ^ 1)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ArcSpec {
    pub(crate) from: usize,
    pub(crate) to: usize,
    pub(crate) cap: f64,
}

/// Directed capacitated graph with a distinguished source and sink.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    num_nodes: usize,
    source: NodeId,
    sink: NodeId,
    pub(crate) arcs: Vec<ArcSpec>,
}

impl FlowNetwork {
    /// Creates a network holding only the source and sink nodes.
    pub fn new() -> Self {
        Self::with_nodes(0)
    }

    /// Creates a network with `inner` non-terminal nodes `0..inner`, followed
    /// by the source (`inner`) and the sink (`inner + 1`). Grid builders use
    /// this to index voxels implicitly.
    pub fn with_nodes(inner: usize) -> Self {
        FlowNetwork {
            num_nodes: inner + 2,
            source: NodeId(inner),
            sink: NodeId(inner + 1),
            arcs: Vec::new(),
        }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of directed arcs, reverse arcs included.
    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn reserve_arcs(&mut self, pairs: usize) {
        self.arcs.reserve(2 * pairs);
    }

    pub fn add_node(&mut self) -> NodeId {
        let id = NodeId(self.num_nodes);
        self.num_nodes += 1;
        id
    }

    /// Adds the arc pair `a -> b` (capacity `cap_ab`) and `b -> a`
    /// (capacity `cap_ba`). Either capacity may be [`INF`]. Parallel arcs are
    /// allowed and act additively.
    pub fn add_arc(&mut self, a: NodeId, b: NodeId, cap_ab: f64, cap_ba: f64) -> Result<(ArcId, ArcId)> {
        for node in [a, b] {
            if node.0 >= self.num_nodes {
                return Err(Error::InvalidNode(node.0));
            }
        }
        for cap in [cap_ab, cap_ba] {
            if cap.is_nan() || cap < 0.0 || cap == f64::NEG_INFINITY {
                return Err(Error::InvalidCapacity(cap));
            }
        }
        let k = self.arcs.len();
        self.arcs.push(ArcSpec {
            from: a.0,
            to: b.0,
            cap: cap_ab,
        });
        self.arcs.push(ArcSpec {
            from: b.0,
            to: a.0,
            cap: cap_ba,
        });
        Ok((ArcId(k), ArcId(k + 1)))
    }

    /// Endpoints and capacity of one directed arc.
    pub fn arc(&self, id: ArcId) -> (NodeId, NodeId, f64) {
        let spec = &self.arcs[id.0];
        (NodeId(spec.from), NodeId(spec.to), spec.cap)
    }

    /// Sum of all finite capacities.
    pub fn finite_capacity_sum(&self) -> f64 {
        self.arcs.iter().filter(|a| a.cap.is_finite()).map(|a| a.cap).sum()
    }

    /// The value substituted for [`INF`] capacities when solving.
    pub fn inf_sentinel(&self) -> f64 {
        self.finite_capacity_sum() + 1.0
    }

    /// Capacity of the cut defined by `on_source_side` (one flag per node):
    /// the sum over arcs leaving the source side into the sink side. Infinite
    /// arcs count with the solver sentinel.
    pub fn cut_capacity(&self, on_source_side: &[bool]) -> f64 {
        let sentinel = self.inf_sentinel();
        self.arcs
            .iter()
            .filter(|a| on_source_side[a.from] && !on_source_side[a.to])
            .map(|a| if a.cap.is_finite() { a.cap } else { sentinel })
            .sum()
    }

    /// True when the labeling severs an infinite arc.
    pub fn severs_infinite_arc(&self, on_source_side: &[bool]) -> bool {
        self.arcs
            .iter()
            .any(|a| !a.cap.is_finite() && on_source_side[a.from] && !on_source_side[a.to])
    }

    /// Renders the network in DIMACS max-flow format. Nodes are numbered from
    /// one; zero-capacity arcs are omitted and infinite arcs are written with
    /// the solver sentinel.
    pub fn to_dimacs(&self) -> String {
        let sentinel = self.inf_sentinel();
        let live: Vec<&ArcSpec> = self.arcs.iter().filter(|a| a.cap > 0.0).collect();
        let mut out = String::new();
        let _ = writeln!(out, "c generated by gridcut-maxflow");
        let _ = writeln!(out, "p max {} {}", self.num_nodes, live.len());
        let _ = writeln!(out, "n {} s", self.source.0 + 1);
        let _ = writeln!(out, "n {} t", self.sink.0 + 1);
        for a in live {
            let cap = if a.cap.is_finite() { a.cap } else { sentinel };
            let _ = writeln!(out, "a {} {} {}", a.from + 1, a.to + 1, cap);
        }
        out
    }
}

impl Default for FlowNetwork {
    fn default() -> Self {
        Self::new()
    }
}
