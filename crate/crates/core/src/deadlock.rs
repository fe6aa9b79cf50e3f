//! Wait-for graphs and elementary cycle enumeration.
//!
//! Nodes are dense indices `0..n`; the simulation keeps the mapping to
//! platoon ids. Cycles are found by splitting the graph into strongly
//! connected components and running Johnson's circuit search inside each
//! nontrivial component.

use alloc::vec;
use alloc::vec::Vec;

/// Directed graph without self-edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WaitForGraph {
    adj: Vec<Vec<usize>>,
}

impl WaitForGraph {
    pub fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Adds `u -> v` (u waits for v). Self-edges and duplicates are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u != v && !self.adj[u].contains(&v) {
            self.adj[u].push(v);
            self.adj[u].sort_unstable();
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Strongly connected components (Tarjan), each sorted ascending, in
    /// ascending order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.components_within(&vec![true; self.len()])
    }

    fn components_within(&self, alive: &[bool]) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if !alive[root] || index[root] != usize::MAX {
                continue;
            }
            // Explicit DFS frames: (node, next successor position).
            let mut frames = vec![(root, 0usize)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (u, ref mut pos)) = frames.last_mut() {
                if let Some(&v) = self.adj[u].get(*pos) {
                    *pos += 1;
                    if !alive[v] {
                        continue;
                    }
                    if index[v] == usize::MAX {
                        index[v] = counter;
                        low[v] = counter;
                        counter += 1;
                        stack.push(v);
                        on_stack[v] = true;
                        frames.push((v, 0));
                    } else if on_stack[v] {
                        low[u] = low[u].min(index[v]);
                    }
                } else {
                    frames.pop();
                    if let Some(&(parent, _)) = frames.last() {
                        low[parent] = low[parent].min(low[u]);
                    }
                    if low[u] == index[u] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == u {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        out.push(comp);
                    }
                }
            }
        }
        out.sort_by_key(|c| c[0]);
        out
    }

    /// Every elementary cycle, each rotated to start at its smallest node;
    /// the list is sorted lexicographically. Empty iff the graph is acyclic.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = Vec::new();
        let mut search = Johnson { blocked: vec![false; n], block_map: vec![Vec::new(); n], path: Vec::new() };
        for s in 0..n {
            // Subgraph induced by nodes >= s; take the component holding s.
            let alive: Vec<bool> = (0..n).map(|v| v >= s).collect();
            let comps = self.components_within(&alive);
            let Some(comp) = comps.into_iter().find(|c| c.contains(&s)) else { continue };
            if comp.len() == 1 {
                continue;
            }
            let mut in_comp = vec![false; n];
            for &v in &comp {
                in_comp[v] = true;
                search.blocked[v] = false;
                search.block_map[v].clear();
            }
            search.circuit(self, &in_comp, s, s, &mut out);
        }
        out.sort();
        out
    }

    /// Whether any cycle exists.
    pub fn has_cycle(&self) -> bool {
        self.components().iter().any(|c| c.len() > 1)
    }
}

struct Johnson {
    blocked: Vec<bool>,
    block_map: Vec<Vec<usize>>,
    path: Vec<usize>,
}

impl Johnson {
    fn unblock(&mut self, u: usize) {
        let mut work = vec![u];
        while let Some(w) = work.pop() {
            if self.blocked[w] {
                self.blocked[w] = false;
                work.append(&mut self.block_map[w]);
            }
        }
    }

    fn circuit(&mut self, g: &WaitForGraph, in_comp: &[bool], s: usize, v: usize, out: &mut Vec<Vec<usize>>) -> bool {
        let mut found = false;
        self.path.push(v);
        self.blocked[v] = true;
        for &w in g.successors(v) {
            if !in_comp[w] {
                continue;
            }
            if w == s {
                out.push(self.path.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(g, in_comp, s, w, out) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in g.successors(v) {
                if in_comp[w] && !self.block_map[w].contains(&v) {
                    self.block_map[w].push(v);
                }
            }
        }
        self.path.pop();
        found
    }
}

/// One declared deadlock: the platoons of one cycle, in cycle order.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DeadlockEvent {
    pub step: u64,
    pub platoons: Vec<u32>,
}
