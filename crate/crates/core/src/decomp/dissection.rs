use std::collections::VecDeque;

use super::{BbdStructure, DecompError};
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// Symmetrized adjacency without self loops, neighbors ascending.
fn adjacency<T: Scalar>(a: &CsrMatrix<T>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

struct Graph {
    adj: Vec<Vec<usize>>,
    // membership stamp of the current subgraph
    member: Vec<usize>,
    stamp: usize,
    level: Vec<usize>,
    seen: Vec<usize>,
    seen_stamp: usize,
}

impl Graph {
    fn select(&mut self, vertices: &[usize]) {
        self.stamp += 1;
        for &v in vertices {
            self.member[v] = self.stamp;
        }
    }

    fn inside(&self, v: usize) -> bool {
        self.member[v] == self.stamp
    }

    /// BFS inside the selected subgraph. Returns vertices in visit order;
    /// `level` holds their depth.
    fn bfs(&mut self, root: usize) -> Vec<usize> {
        self.seen_stamp += 1;
        let mut order = vec![root];
        self.seen[root] = self.seen_stamp;
        self.level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for k in 0..self.adj[v].len() {
                let w = self.adj[v][k];
                if self.inside(w) && self.seen[w] != self.seen_stamp {
                    self.seen[w] = self.seen_stamp;
                    self.level[w] = self.level[v] + 1;
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        order
    }

    fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&w| self.inside(w)).count()
    }

    /// Start of a long BFS: repeatedly jump to a minimum-degree vertex of
    /// the deepest level while the depth grows.
    fn pseudo_peripheral(&mut self, start: usize) -> usize {
        let mut root = start;
        let mut order = self.bfs(root);
        let mut depth = self.level[*order.last().expect("root visited")];
        for _ in 0..8 {
            let cand = order
                .iter()
                .copied()
                .filter(|&v| self.level[v] == depth)
                .min_by_key(|&v| (self.degree(v), v))
                .expect("deepest level is nonempty");
            let next = self.bfs(cand);
            let d = self.level[*next.last().expect("root visited")];
            if d <= depth {
                break;
            }
            root = cand;
            order = next;
            depth = d;
        }
        root
    }

    /// Components of the selected subgraph, largest first, ties by lowest
    /// vertex.
    fn components(&mut self, vertices: &[usize]) -> Vec<Vec<usize>> {
        self.seen_stamp += 1;
        let mark = self.seen_stamp;
        let mut comps = Vec::new();
        for &s in vertices {
            if self.seen[s] == mark {
                continue;
            }
            let mut comp = vec![s];
            self.seen[s] = mark;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &w in &self.adj[v] {
                    if self.member[w] == self.stamp && self.seen[w] != mark {
                        self.seen[w] = mark;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Level-set bisection: side A is the prefix of the level structure
    /// holding about `fraction` of the vertices, the separator is the part of
    /// A adjacent to the rest.
    fn bisect(&mut self, vertices: &[usize], fraction: f64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        self.select(vertices);
        let comps = self.components(vertices);
        let mut ordered: Vec<usize> = Vec::with_capacity(vertices.len());
        let mut global_level: Vec<(usize, usize)> = Vec::with_capacity(vertices.len());
        let mut offset = 0;
        for comp in &comps {
            let root = self.pseudo_peripheral(comp[0]);
            let order = self.bfs(root);
            let depth = order.iter().map(|&v| self.level[v]).max().unwrap_or(0);
            for &v in &order {
                ordered.push(v);
                global_level.push((v, offset + self.level[v]));
            }
            offset += depth + 1;
        }
        let last_level = offset.saturating_sub(1);
        let target = fraction * vertices.len() as f64;
        let mut counts = vec![0usize; offset.max(1)];
        for &(_, l) in &global_level {
            counts[l] += 1;
        }
        let mut cut = 0;
        let mut acc = 0usize;
        for (l, &c) in counts.iter().enumerate() {
            acc += c;
            cut = l;
            if acc as f64 >= target {
                break;
            }
        }
        if cut >= last_level && last_level > 0 {
            cut = last_level - 1;
        }
        let lev_of: std::collections::HashMap<usize, usize> = global_level.iter().copied().collect();
        let in_a = |v: usize| lev_of[&v] <= cut;
        let mut side_a = Vec::new();
        let mut side_b = Vec::new();
        let mut sep = Vec::new();
        for &v in &ordered {
            if in_a(v) {
                let touches_b = self.adj[v].iter().any(|&w| self.member[w] == self.stamp && !in_a(w));
                if touches_b {
                    sep.push(v);
                } else {
                    side_a.push(v);
                }
            } else {
                side_b.push(v);
            }
        }
        side_a.sort_unstable();
        side_b.sort_unstable();
        sep.sort_unstable();
        (side_a, side_b, sep)
    }

    fn dissect(&mut self, vertices: Vec<usize>, k: usize, blocks: &mut Vec<Vec<usize>>, interface: &mut Vec<usize>) {
        if k == 1 {
            blocks.push(vertices);
            return;
        }
        let k1 = k / 2;
        let k2 = k - k1;
        if vertices.is_empty() {
            for _ in 0..k {
                blocks.push(Vec::new());
            }
            return;
        }
        let (a, b, sep) = self.bisect(&vertices, k1 as f64 / k as f64);
        interface.extend(sep);
        self.dissect(a, k1, blocks, interface);
        self.dissect(b, k2, blocks, interface);
    }
}

/// Recursive level-set bisection into exactly `nblocks` blocks (possibly
/// empty) plus a trailing interface made of every separator.
///
/// Vertices inside a block are ascending; separators appear in the order the
/// recursion finds them. Ties are always broken by lowest vertex index, so
/// the result is deterministic.
pub fn nested_dissection_bbd<T: Scalar>(a: &CsrMatrix<T>, nblocks: usize) -> Result<BbdStructure<T>, DecompError> {
    if !a.is_square() {
        return Err(DecompError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    let n = a.nrows();
    if nblocks == 0 {
        return Err(DecompError::NoParts);
    }
    if nblocks > n {
        return Err(DecompError::TooManyParts { parts: nblocks, n });
    }
    let mut g = Graph {
        adj: adjacency(a),
        member: vec![0; n],
        stamp: 0,
        level: vec![0; n],
        seen: vec![0; n],
        seen_stamp: 0,
    };
    let mut blocks = Vec::with_capacity(nblocks);
    let mut interface = Vec::new();
    g.dissect((0..n).collect(), nblocks, &mut blocks, &mut interface);
    let mut perm = Vec::with_capacity(n);
    let mut ranges = Vec::with_capacity(nblocks);
    for b in &blocks {
        let start = perm.len();
        perm.extend_from_slice(b);
        ranges.push(start..perm.len());
    }
    perm.extend_from_slice(&interface);
    BbdStructure::from_parts(a, perm, ranges)
}
