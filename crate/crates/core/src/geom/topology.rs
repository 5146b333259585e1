use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{TriangleMesh, Vec3};

/// Vertex adjacency and the undirected edge list of a mesh.
#[derive(Debug, Clone)]
pub struct MeshTopology {
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl MeshTopology {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let mut neighbors = vec![Vec::new(); mesh.vertices.len()];
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let edges = neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        MeshTopology { neighbors, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Vertices within two edge hops of `v`, including `v`, sorted.
    pub fn two_ring(&self, v: usize) -> Vec<usize> {
        let mut ring = vec![v];
        for &a in &self.neighbors[v] {
            ring.push(a);
            ring.extend_from_slice(&self.neighbors[a]);
        }
        ring.sort_unstable();
        ring.dedup();
        ring
    }

    /// Dijkstra over the edge graph with Euclidean edge lengths. Returns
    /// `(vertex, distance)` for every vertex with distance `<= cutoff`, in
    /// settling order.
    pub fn geodesic_from(&self, positions: &[Vec3], source: usize, cutoff: f64) -> Vec<(usize, f64)> {
        let n = self.neighbors.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut out = Vec::new();
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry { dist: 0.0, vertex: source });
        while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            out.push((v, d));
            for &u in &self.neighbors[v] {
                if done[u] {
                    continue;
                }
                let nd = d + (positions[v] - positions[u]).norm();
                if nd <= cutoff && nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Entry { dist: nd, vertex: u });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // min-heap on (dist, vertex)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.vertex.cmp(&self.vertex))
    }
}

/// Approximate geodesic distance from `source_vertex`: shortest paths on the
/// vertex-edge graph, restricted to vertices within `cutoff`.
pub fn geodesic_distances(mesh: &TriangleMesh, source_vertex: usize, cutoff: f64) -> BTreeMap<usize, f64> {
    MeshTopology::new(mesh)
        .geodesic_from(&mesh.vertices, source_vertex, cutoff)
        .into_iter()
        .collect()
}
