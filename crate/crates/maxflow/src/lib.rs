//! Maximum-flow / minimum-cut on directed capacitated networks.
//!
//! [`FlowNetwork`] collects arcs (always in forward/reverse pairs) between
//! plain nodes and the two terminals. [`max_flow`] solves it with the
//! Boykov-Kolmogorov dual search-tree algorithm, which is the method of
//! choice for the sparse grid-like graphs met in vision and surface
//! segmentation.
//!
//! ```
//! use gridcut_maxflow::{max_flow, FlowNetwork};
//!
//! let mut net = FlowNetwork::new();
//! let (s, t) = (net.source(), net.sink());
//! let x = net.add_node();
//! net.add_arc(s, x, 2.0, 0.0).unwrap();
//! net.add_arc(x, t, 5.0, 0.0).unwrap();
//! let cut = max_flow(&net);
//! assert_eq!(cut.flow, 2.0);
//! assert!(!cut.is_source_side(x));
//! ```

mod bk;
mod network;

pub use bk::{max_flow, CutResult};
pub use network::{ArcId, FlowNetwork, NodeId, INF};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("invalid capacity {0}: capacities must be >= 0 or INF")]
    InvalidCapacity(f64),
    #[error("node {0} does not exist")]
    InvalidNode(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        net.add_arc(s, t, 3.0, 0.0).unwrap();
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 3.0);
        assert!(cut.is_source_side(s));
        assert!(!cut.is_source_side(t));
    }

    #[test]
    fn two_disjoint_paths() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        let a = net.add_node();
        let b = net.add_node();
        net.add_arc(s, a, 2.0, 0.0).unwrap();
        net.add_arc(a, t, 5.0, 0.0).unwrap();
        net.add_arc(s, b, 3.0, 0.0).unwrap();
        net.add_arc(b, t, 1.0, 0.0).unwrap();
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 3.0);
        assert!(!cut.is_source_side(a));
        assert!(cut.is_source_side(b));
    }

    #[test]
    fn negative_capacity_rejected() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        assert_eq!(net.add_arc(s, t, -1.0, 0.0), Err(Error::InvalidCapacity(-1.0)));
        assert!(matches!(
            net.add_arc(s, t, f64::NAN, 0.0),
            Err(Error::InvalidCapacity(_))
        ));
        assert_eq!(net.add_arc(s, NodeId(7), 1.0, 0.0), Err(Error::InvalidNode(7)));
    }

    #[test]
    fn disconnected_terminals() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        let a = net.add_node();
        let b = net.add_node();
        net.add_arc(s, a, 4.0, 0.0).unwrap();
        net.add_arc(b, t, 4.0, 0.0).unwrap();
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 0.0);
        assert!(cut.is_source_side(a));
        assert!(!cut.is_source_side(b));
    }

    #[test]
    fn infinite_arc_is_not_severed() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        let a = net.add_node();
        let b = net.add_node();
        net.add_arc(s, a, 5.0, 0.0).unwrap();
        net.add_arc(a, b, INF, 0.0).unwrap();
        net.add_arc(b, t, 2.0, 0.0).unwrap();
        net.add_arc(a, t, 1.0, 0.0).unwrap();
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 3.0);
        assert!(!net.severs_infinite_arc(&cut.source_side));
        assert_eq!(net.cut_capacity(&cut.source_side), 3.0);
    }

    #[test]
    fn dimacs_dump() {
        let mut net = FlowNetwork::new();
        let (s, t) = (net.source(), net.sink());
        let a = net.add_node();
        net.add_arc(s, a, 2.0, 0.0).unwrap();
        net.add_arc(a, t, INF, 0.0).unwrap();
        let text = net.to_dimacs();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "p max 3 2");
        assert_eq!(lines[2], "n 1 s");
        assert_eq!(lines[3], "n 2 t");
        assert_eq!(lines[4], "a 1 3 2");
        assert_eq!(lines[5], "a 3 2 3");
    }
}
