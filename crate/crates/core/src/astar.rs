//! Shared A* search: 6-connected voxel grids with an admissible Euclidean
//! heuristic, plus a small weighted-graph variant for the region graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(PartialEq)]
struct HeapEntry {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, ties broken on node index for determinism
        other
            .f
            .partial_cmp(&self.f)
            .unwrap()
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over a 6-connected lattice restricted to `dims`, with unit step cost
/// scaled by `step`. Returns the voxel-index path including both endpoints.
pub fn astar_grid<F>(
    dims: [usize; 3],
    step: f64,
    start: [usize; 3],
    goal: [usize; 3],
    traversable: F,
) -> Option<(Vec<[usize; 3]>, f64)>
where
    F: Fn([usize; 3]) -> bool,
{
    if !traversable(start) || !traversable(goal) {
        return None;
    }
    let linear = |i: [usize; 3]| i[0] + dims[0] * (i[1] + dims[1] * i[2]);
    let unlinear = |l: usize| {
        let x = l % dims[0];
        let r = l / dims[0];
        [x, r % dims[1], r / dims[1]]
    };
    let h = |i: [usize; 3]| {
        let d = [
            i[0] as f64 - goal[0] as f64,
            i[1] as f64 - goal[1] as f64,
            i[2] as f64 - goal[2] as f64,
        ];
        step * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    };
    let n = dims[0] * dims[1] * dims[2];
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let (s, t) = (linear(start), linear(goal));
    g[s] = 0.0;
    heap.push(HeapEntry { f: h(start), g: 0.0, node: s });
    while let Some(e) = heap.pop() {
        if e.g > g[e.node] {
            continue;
        }
        if e.node == t {
            let mut path = Vec::new();
            let mut cur = t;
            while cur != usize::MAX {
                path.push(unlinear(cur));
                cur = parent[cur];
            }
            path.reverse();
            return Some((path, e.g));
        }
        let i = unlinear(e.node);
        for axis in 0..3 {
            for dir in [-1isize, 1] {
                let c = i[axis] as isize + dir;
                if c < 0 || c as usize >= dims[axis] {
                    continue;
                }
                let mut j = i;
                j[axis] = c as usize;
                if !traversable(j) {
                    continue;
                }
                let nj = linear(j);
                let ng = e.g + step;
                if ng < g[nj] {
                    g[nj] = ng;
                    parent[nj] = e.node;
                    heap.push(HeapEntry { f: ng + h(j), g: ng, node: nj });
                }
            }
        }
    }
    None
}

/// Dijkstra over an adjacency list; returns per-node distance and parents.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], start: usize) -> (Vec<f64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(HeapEntry { f: 0.0, g: 0.0, node: start });
    while let Some(e) = heap.pop() {
        if e.g > dist[e.node] {
            continue;
        }
        for &(next, w) in &adj[e.node] {
            let nd = e.g + w;
            if nd < dist[next] {
                dist[next] = nd;
                parent[next] = e.node;
                heap.push(HeapEntry { f: nd, g: nd, node: next });
            }
        }
    }
    (dist, parent)
}

/// Reconstruct a path from `dijkstra` parents; None if unreachable.
pub fn extract_path(parent: &[usize], dist: &[f64], goal: usize) -> Option<Vec<usize>> {
    if dist[goal].is_infinite() {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn straight_corridor_manhattan_cost() {
        let dims = [10, 3, 3];
        let (path, cost) =
            astar_grid(dims, 0.1, [0, 1, 1], [9, 1, 1], |_| true).unwrap();
        assert_eq!(path.len(), 10);
        assert!((cost - 0.9).abs() < 1e-12);
    }

    #[test]
    fn start_equals_goal() {
        let (path, cost) =
            astar_grid([4, 4, 4], 0.1, [2, 2, 2], [2, 2, 2], |_| true).unwrap();
        assert_eq!(path, vec![[2, 2, 2]]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn blocked_wall_no_path() {
        let blocked = |i: [usize; 3]| i[0] != 3;
        assert!(astar_grid([8, 4, 4], 0.1, [0, 0, 0], [7, 3, 3], blocked).is_none());
    }

    #[test]
    fn matches_dijkstra_on_random_grids() {
        let mut rng = StdRng::seed_from_u64(1234);
        for case in 0..50 {
            let dims = [6, 5, 4];
            let n = dims[0] * dims[1] * dims[2];
            let open: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.8)).collect();
            let linear = |i: [usize; 3]| i[0] + dims[0] * (i[1] + dims[1] * i[2]);
            let start = [0, 0, 0];
            let goal = [5, 4, 3];
            let trav = |i: [usize; 3]| open[linear(i)] || i == start || i == goal;
            // independent oracle: uniform-cost adjacency + dijkstra
            let mut adj = vec![Vec::new(); n];
            for x in 0..dims[0] {
                for y in 0..dims[1] {
                    for z in 0..dims[2] {
                        let i = [x, y, z];
                        if !trav(i) {
                            continue;
                        }
                        for axis in 0..3 {
                            for dir in [-1isize, 1] {
                                let c = i[axis] as isize + dir;
                                if c < 0 || c as usize >= dims[axis] {
                                    continue;
                                }
                                let mut j = i;
                                j[axis] = c as usize;
                                if trav(j) {
                                    adj[linear(i)].push((linear(j), 1.0));
                                }
                            }
                        }
                    }
                }
            }
            let (dist, _) = dijkstra(&adj, linear(start));
            match astar_grid(dims, 1.0, start, goal, trav) {
                Some((_, cost)) => {
                    assert!((cost - dist[linear(goal)]).abs() < 1e-9, "case {case}")
                }
                None => assert!(dist[linear(goal)].is_infinite(), "case {case}"),
            }
        }
    }
}
