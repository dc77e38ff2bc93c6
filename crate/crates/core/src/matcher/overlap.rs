//! Overlap relation between two raters' segments and its same-kind
//! connected components.

use crate::model::Segment;

/// All `(i, j)` with `a[i]` and `b[j]` sharing more than 0 ms, in sweep order.
///
/// Both inputs must be sorted and internally non-overlapping, which every
/// valid timeline is. Runs in `O(|a| + |b| + pairs)`.
pub fn overlap_pairs(a: &[Segment], b: &[Segment]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].overlaps(&b[j]) {
            out.push((i, j));
        }
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Indices into the two inputs that form one connected component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.a.len() + self.b.len()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx != ry {
            // keep the smaller index as root so component order is stable
            let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of `pairs` restricted to equal kinds.
///
/// Every segment of both inputs is in exactly one component; unmatched
/// segments come back as singletons. Components are ordered by the earliest
/// start among their members, members by index.
pub fn same_kind_components(a: &[Segment], b: &[Segment], pairs: &[(usize, usize)]) -> Vec<Component> {
    let n = a.len();
    let mut sets = DisjointSet::new(n + b.len());
    for &(i, j) in pairs {
        if a[i].kind == b[j].kind {
            sets.union(i, n + j);
        }
    }
    let mut by_root: Vec<Option<usize>> = vec![None; n + b.len()];
    let mut comps: Vec<Component> = Vec::new();
    for node in 0..n + b.len() {
        let root = sets.find(node);
        let slot = *by_root[root].get_or_insert_with(|| {
            comps.push(Component {
                a: Vec::new(),
                b: Vec::new(),
            });
            comps.len() - 1
        });
        if node < n {
            comps[slot].a.push(node);
        } else {
            comps[slot].b.push(node - n);
        }
    }
    let start = |c: &Component| {
        let sa = c.a.first().map(|&i| a[i].start);
        let sb = c.b.first().map(|&j| b[j].start);
        sa.into_iter().chain(sb).min()
    };
    comps.sort_by(|x, y| start(x).cmp(&start(y)).then_with(|| x.cmp(y)));
    comps
}
