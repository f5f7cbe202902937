//! Vertex-graph utilities shared by the sparse solvers.

use std::collections::VecDeque;

/// Reverse Cuthill–McKee order of the vertex graph; `order[k]` is the
/// vertex placed at position `k`.
pub(crate) fn rcm_order(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| adjacency[v].len());
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&u| !seen[u]).collect();
            next.sort_by_key(|&u| adjacency[u].len());
            for u in next {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

pub(crate) fn components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; adjacency.len()];
    let mut out = Vec::new();
    for s in 0..adjacency.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        label[s] = id;
        let mut k = 0;
        while k < members.len() {
            for &u in &adjacency[members[k]] {
                if label[u] == usize::MAX {
                    label[u] = id;
                    members.push(u);
                }
            }
            k += 1;
        }
        out.push(members);
    }
    out
}
