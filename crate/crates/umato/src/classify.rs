//! Partition of points into hubs, expanded nearest neighbors (eNN), and
//! outliers based on kNN index frequency, plus connected components of the
//! undirected kNN graph.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::knn::NeighborTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Hub,
    Enn,
    Outlier,
}

#[derive(Debug, Clone)]
pub struct PointClassification {
    /// Hub indices in selection order.
    pub hubs: Vec<usize>,
    pub roles: Vec<Role>,
    /// Connected component of each point in the undirected kNN graph.
    pub component_id: Vec<usize>,
}

impl PointClassification {
    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn is_hub(&self, i: usize) -> bool {
        self.roles[i] == Role::Hub
    }

    pub fn enn_points(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == Role::Enn).collect()
    }

    pub fn outlier_points(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == Role::Outlier).collect()
    }

    /// Hubs and eNN, i.e. every point optimized by the two layout phases.
    pub fn embedded_points(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] != Role::Outlier).collect()
    }
}

/// Points sorted by descending frequency of appearance in the neighbor table,
/// ties (including zero frequency) broken by ascending index.
pub fn frequency_rank(indices: &Array2<usize>) -> Vec<usize> {
    let n = indices.nrows();
    let mut freq = vec![0usize; n];
    for &j in indices.iter() {
        freq[j] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
    order
}

/// Greedy hub selection: walk the ranked list; every point that has not been
/// covered by an earlier hub's neighbor row becomes a hub and covers its own
/// row. Afterwards every point is a hub or appears in some hub's row.
pub fn select_hubs(ranked: &[usize], indices: &Array2<usize>) -> Vec<usize> {
    let n = indices.nrows();
    let mut covered = vec![false; n];
    let mut is_hub = vec![false; n];
    let mut hubs = Vec::new();
    for &p in ranked {
        if covered[p] || is_hub[p] {
            continue;
        }
        is_hub[p] = true;
        hubs.push(p);
        for c in 0..indices.ncols() {
            covered[indices[[p, c]]] = true;
        }
    }
    hubs
}

/// Breadth-first closure of directed kNN edges starting from the hubs;
/// returns membership flags for the reachable non-hub points.
pub fn expand_enn(hubs: &[usize], indices: &Array2<usize>) -> Vec<bool> {
    let n = indices.nrows();
    let mut is_hub = vec![false; n];
    for &h in hubs {
        is_hub[h] = true;
    }
    let mut visited = vec![false; n];
    let mut queue: VecDeque<usize> = hubs.iter().copied().collect();
    for &h in hubs {
        visited[h] = true;
    }
    while let Some(p) = queue.pop_front() {
        for c in 0..indices.ncols() {
            let j = indices[[p, c]];
            if !visited[j] {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).map(|i| visited[i] && !is_hub[i]).collect()
}

fn connected_components(indices: &Array2<usize>) -> Vec<usize> {
    let n = indices.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for c in 0..indices.ncols() {
            let j = indices[[i, c]];
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        comp[start] = next;
        while let Some(p) = queue.pop_front() {
            for &j in &adj[p] {
                if comp[j] == usize::MAX {
                    comp[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Full classification: frequency ranking, hub selection, eNN expansion,
/// outliers as the complement, components on the undirected graph.
pub fn classify_points(table: &NeighborTable) -> PointClassification {
    let ranked = frequency_rank(&table.indices);
    let hubs = select_hubs(&ranked, &table.indices);
    let enn = expand_enn(&hubs, &table.indices);
    let n = table.n();
    let mut roles = vec![Role::Outlier; n];
    for &h in &hubs {
        roles[h] = Role::Hub;
    }
    for i in 0..n {
        if enn[i] {
            roles[i] = Role::Enn;
        }
    }
    PointClassification {
        hubs,
        roles,
        component_id: connected_components(&table.indices),
    }
}
