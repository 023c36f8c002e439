//! k-nearest-neighbour graphs over ridge points and modes.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DVector;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::dist_sq;

#[derive(Clone, Debug)]
pub struct NeighborGraph {
    nodes: PointCloud,
    /// Neighbour lists sorted by neighbour index.
    adjacency: Vec<Vec<(usize, f64)>>,
    pub k: usize,
    pub symmetrized: bool,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Reversed so the std max-heap pops the smallest distance first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NeighborGraph {
    /// Connects every node to its `k` nearest nodes (ties by index) and
    /// symmetrises by union.
    pub fn build_knn(nodes: PointCloud, k: usize) -> Result<Self> {
        let n = nodes.len();
        if k == 0 || k >= n {
            return Err(Error::input(format!("neighbour count k must satisfy 0 < k < {n}, got {k}")));
        }
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            cand.clear();
            let p = nodes.point(i);
            cand.extend((0..n).filter(|&j| j != i).map(|j| (dist_sq(p, nodes.point(j)), j)));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, cmp);
            for &(d2, j) in &cand[..k] {
                let w = d2.sqrt();
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        let mut g = Self {
            nodes,
            adjacency,
            k,
            symmetrized: true,
        };
        g.normalize()?;
        Ok(g)
    }

    /// Graph with explicit undirected weighted edges.
    pub fn from_edges(nodes: PointCloud, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = nodes.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::input(format!("invalid edge ({a}, {b}) for {n} nodes")));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        let mut g = Self {
            nodes,
            adjacency,
            k: 0,
            symmetrized: true,
        };
        g.normalize()?;
        Ok(g)
    }

    fn normalize(&mut self) -> Result<()> {
        for list in &mut self.adjacency {
            // Zero weights only arise from duplicated points.
            if list.iter().any(|&(_, w)| !(w.is_finite() && w >= 0.0)) {
                return Err(Error::input("edge weights must be non-negative and finite"));
            }
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            // Keep the lightest copy of duplicated edges.
            list.dedup_by(|next, kept| next.0 == kept.0);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn nodes(&self) -> &PointCloud {
        &self.nodes
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Flood fill from nodes in index order. Labels are `0..c`.
    pub fn connected_components(&self) -> Vec<usize> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.connected_components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Dijkstra from `source`: distances (`inf` when unreachable) and
    /// predecessors. Equal-length alternatives keep the smallest predecessor.
    pub fn distances_from(&self, source: usize) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
        self.check_node(source)?;
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: source });
        while let Some(HeapEntry { dist: du, node: u }) = heap.pop() {
            if done[u] || du > dist[u] {
                continue;
            }
            done[u] = true;
            for &(v, w) in &self.adjacency[u] {
                if done[v] {
                    continue;
                }
                let alt = du + w;
                if alt < dist[v] {
                    dist[v] = alt;
                    pred[v] = Some(u);
                    heap.push(HeapEntry { dist: alt, node: v });
                } else if alt == dist[v] && pred[v].is_some_and(|p| u < p) {
                    pred[v] = Some(u);
                }
            }
        }
        Ok((dist, pred))
    }

    /// Shortest path `source -> target` as node indices, and its length.
    pub fn shortest_path(&self, source: usize, target: usize) -> Result<(Vec<usize>, f64)> {
        self.check_node(target)?;
        let (dist, pred) = self.distances_from(source)?;
        if !dist[target].is_finite() {
            let labels = self.connected_components();
            return Err(Error::Connectivity(format!(
                "node {target} (component {}) is unreachable from node {source} (component {}); \
                 increase k or treat the ridge as disconnected",
                labels[target], labels[source]
            )));
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok((path, dist[target]))
    }

    pub fn path_positions(&self, path: &[usize]) -> Vec<DVector<f64>> {
        path.iter().map(|&i| self.nodes.vector(i)).collect()
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::input(format!("node {i} out of range for {} nodes", self.len())));
        }
        Ok(())
    }
}

/// Finite-difference tangents `p[l] - p[l-1]` along a path.
pub fn path_tangents(positions: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if positions.len() < 2 {
        return Err(Error::input("path tangents need at least two positions"));
    }
    Ok(positions.windows(2).map(|w| &w[1] - &w[0]).collect())
}
