//! Mixed graphs (path diagrams) and the combinatorial machinery built on them:
//! acyclicity and bow-freeness, districts, colliders, m-separation, treks and
//! the one-edge neighborhood used by the structure search.
//!
//! Vertices are dense indices `0..d`. Every unordered pair of vertices owns a
//! small bit mask recording which of `lo -> hi`, `hi -> lo` and `lo <-> hi`
//! are present, so equality and ordering of graphs are purely structural.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FWD: u8 = 0b001;
const BWD: u8 = 0b010;
const BI: u8 = 0b100;

/// Admissible graph families, ordered by inclusion: DAG ⊂ BAP ⊂ APD.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphClass {
    /// Directed acyclic graphs.
    Dag,
    /// Bow-free acyclic path diagrams.
    Bap,
    /// Acyclic path diagrams, bows allowed.
    Apd,
}

impl GraphClass {
    /// Pair masks a graph of this class may carry.
    fn pair_masks(self) -> &'static [u8] {
        match self {
            GraphClass::Dag => &[0, FWD, BWD],
            GraphClass::Bap => &[0, FWD, BWD, BI],
            GraphClass::Apd => &[0, FWD, BWD, BI, FWD | BI, BWD | BI],
        }
    }
}

impl std::str::FromStr for GraphClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dag" => Ok(GraphClass::Dag),
            "bap" => Ok(GraphClass::Bap),
            "apd" | "admg" => Ok(GraphClass::Apd),
            other => Err(Error::Config(format!("unknown graph class `{other}`"))),
        }
    }
}

/// Which single-edge moves [`MixedGraph::neighbors_with`] may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Moves {
    pub add: bool,
    pub delete: bool,
    pub change: bool,
}

impl Moves {
    pub const ALL: Moves = Moves {
        add: true,
        delete: true,
        change: true,
    };
    pub const FORWARD: Moves = Moves {
        add: true,
        delete: false,
        change: false,
    };
    pub const CHANGE: Moves = Moves {
        add: false,
        delete: false,
        change: true,
    };
}

/// A collider-free path between two vertices.
///
/// `left` runs from the top of the left side down to the left endpoint and
/// `right` from the top of the right side down to the right endpoint, so every
/// edge inside either side points away from index 0. When the trek has no
/// bidirected edge both sides start at the shared head vertex; otherwise the
/// two tops are joined by `left[0] <-> right[0]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trek {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub has_bidirected: bool,
}

impl Trek {
    /// The source vertex of a trek without a bidirected edge.
    pub fn head(&self) -> Option<usize> {
        if self.has_bidirected {
            None
        } else {
            Some(self.left[0])
        }
    }

    /// Number of directed edges on the left side.
    pub fn left_len(&self) -> usize {
        self.left.len() - 1
    }

    pub fn right_len(&self) -> usize {
        self.right.len() - 1
    }

    /// Whether the two sides meet only at the head (or not at all).
    pub fn is_simple(&self) -> bool {
        let skip = usize::from(!self.has_bidirected);
        self.left[skip..]
            .iter()
            .all(|v| !self.right[skip..].contains(v))
    }
}

/// A path diagram on vertices `0..d` with directed and bidirected edges.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct MixedGraph {
    d: usize,
    pairs: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    d: usize,
    directed: Vec<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
}

impl From<MixedGraph> for GraphRepr {
    fn from(g: MixedGraph) -> Self {
        GraphRepr {
            d: g.d,
            directed: g.directed_edges(),
            bidirected: g.bidirected_edges(),
        }
    }
}

impl TryFrom<GraphRepr> for MixedGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        MixedGraph::from_edges(r.d, &r.directed, &r.bidirected)
    }
}

#[inline]
fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl MixedGraph {
    pub fn empty(d: usize) -> Self {
        MixedGraph {
            d,
            pairs: vec![0; d * d.saturating_sub(1) / 2],
        }
    }

    /// Builds a graph from explicit edge lists. Bidirected pairs may be given
    /// in either orientation; duplicates collapse.
    pub fn from_edges(
        d: usize,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self> {
        let mut g = MixedGraph::empty(d);
        for &(i, j) in directed {
            g.check_pair(i, j)?;
            g.add_directed(i, j);
        }
        for &(i, j) in bidirected {
            g.check_pair(i, j)?;
            g.add_bidirected(i, j);
        }
        Ok(g)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.d {
            Err(Error::VertexOutOfRange { vertex: v, d: self.d })
        } else {
            Ok(())
        }
    }

    #[inline]
    fn index(&self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo < hi && hi < self.d);
        lo * self.d - lo * (lo + 1) / 2 + (hi - lo - 1)
    }

    #[inline]
    fn mask(&self, i: usize, j: usize) -> u8 {
        let (lo, hi) = ordered(i, j);
        self.pairs[self.index(lo, hi)]
    }

    #[inline]
    fn set_mask(&mut self, i: usize, j: usize, m: u8) {
        let (lo, hi) = ordered(i, j);
        let k = self.index(lo, hi);
        self.pairs[k] = m;
    }

    #[inline]
    fn dir_bit(i: usize, j: usize) -> u8 {
        if i < j {
            FWD
        } else {
            BWD
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.d
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        from != to && self.mask(from, to) & Self::dir_bit(from, to) != 0
    }

    pub fn has_bidirected(&self, i: usize, j: usize) -> bool {
        i != j && self.mask(i, j) & BI != 0
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i != j && self.mask(i, j) != 0
    }

    /// Number of edges between `i` and `j`.
    pub fn edges_between(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.mask(i, j).count_ones()
        }
    }

    pub fn add_directed(&mut self, from: usize, to: usize) {
        let m = self.mask(from, to) | Self::dir_bit(from, to);
        self.set_mask(from, to, m);
    }

    pub fn add_bidirected(&mut self, i: usize, j: usize) {
        let m = self.mask(i, j) | BI;
        self.set_mask(i, j, m);
    }

    pub fn remove_directed(&mut self, from: usize, to: usize) {
        let m = self.mask(from, to) & !Self::dir_bit(from, to);
        self.set_mask(from, to, m);
    }

    pub fn remove_bidirected(&mut self, i: usize, j: usize) {
        let m = self.mask(i, j) & !BI;
        self.set_mask(i, j, m);
    }

    /// Removes every edge between `i` and `j`.
    pub fn clear_pair(&mut self, i: usize, j: usize) {
        self.set_mask(i, j, 0);
    }

    /// Directed edges as `(from, to)`, sorted.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if self.has_directed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Bidirected edges as `(lo, hi)`, sorted.
    pub fn bidirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                if self.has_bidirected(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Edge count where each bidirected edge counts once.
    pub fn num_edges(&self) -> usize {
        self.pairs.iter().map(|m| m.count_ones() as usize).sum()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter(|&u| self.has_directed(u, v)).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter(|&u| self.has_directed(v, u)).collect()
    }

    pub fn spouses(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter(|&u| self.has_bidirected(u, v)).collect()
    }

    /// Number of arrowheads at `v` (directed edges into `v` plus bidirected
    /// edges at `v`).
    pub fn in_degree(&self, v: usize) -> usize {
        (0..self.d)
            .map(|u| usize::from(self.has_directed(u, v)) + usize::from(self.has_bidirected(u, v)))
            .sum()
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.d).map(|v| self.in_degree(v)).max().unwrap_or(0)
    }

    /// A topological order of the directed part, or `None` if it has a cycle.
    /// Ties are broken by smallest index so the order is deterministic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.d).map(|v| self.parents(v).len()).collect();
        let mut ready: BTreeSet<usize> = (0..self.d).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.d);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == self.d).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Acyclic with at most one edge per vertex pair.
    pub fn is_bap(&self) -> bool {
        self.pairs.iter().all(|m| m.count_ones() <= 1) && self.is_acyclic()
    }

    pub fn is_dag(&self) -> bool {
        self.pairs.iter().all(|m| m & BI == 0 && *m != FWD | BWD) && self.is_acyclic()
    }

    pub fn is_admissible(&self, class: GraphClass) -> bool {
        match class {
            GraphClass::Dag => self.is_dag(),
            GraphClass::Bap => self.is_bap(),
            GraphClass::Apd => self.is_acyclic(),
        }
    }

    /// Whether a directed path (possibly of length zero) leads from `from` to `to`.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.d];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for c in self.children(v) {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Indicator vector of `an(set)`, which includes `set` itself.
    pub fn ancestors(&self, set: &[usize]) -> Vec<bool> {
        let mut anc = vec![false; self.d];
        let mut stack: Vec<usize> = set.to_vec();
        for &v in set {
            anc[v] = true;
        }
        while let Some(v) = stack.pop() {
            for p in self.parents(v) {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }
        anc
    }

    /// Connected components of the bidirected part, each sorted, ordered by
    /// smallest member.
    pub fn districts(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.d];
        let mut out = Vec::new();
        for start in 0..self.d {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for (u, l) in label.iter_mut().enumerate() {
                    if *l == usize::MAX && self.has_bidirected(u, v) {
                        *l = id;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Undirected adjacencies as `(lo, hi)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                if self.adjacent(i, j) {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    /// Whether some edge between `other` and `v` has an arrowhead at `v`.
    #[inline]
    fn arrowhead_at(&self, v: usize, other: usize) -> bool {
        self.has_directed(other, v) || self.has_bidirected(other, v)
    }

    /// Triples `(i, j, k)` with `i < k`, `i - j - k` adjacent and two
    /// arrowheads meeting at `j`.
    pub fn collider_triples(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for j in 0..self.d {
            let into: Vec<usize> = (0..self.d)
                .filter(|&u| u != j && self.arrowhead_at(j, u))
                .collect();
            for (a, &i) in into.iter().enumerate() {
                for &k in &into[a + 1..] {
                    out.insert((i, j, k));
                }
            }
        }
        out
    }

    /// Collider triples whose endpoints are not adjacent.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        self.collider_triples()
            .into_iter()
            .filter(|&(i, _, k)| !self.adjacent(i, k))
            .collect()
    }

    /// Edge endpoints at `v`: `(w, arrowhead at v, arrowhead at w)` for every
    /// edge between `v` and a neighbor `w`.
    fn edge_marks(&self, v: usize) -> Vec<(usize, bool, bool)> {
        let mut out = Vec::new();
        for w in 0..self.d {
            if w == v {
                continue;
            }
            if self.has_directed(v, w) {
                out.push((w, false, true));
            }
            if self.has_directed(w, v) {
                out.push((w, true, false));
            }
            if self.has_bidirected(v, w) {
                out.push((w, true, true));
            }
        }
        out
    }

    /// Tests `a ⊥ b | cond` by m-separation.
    ///
    /// Runs a reachability search over (vertex, entered-through-arrowhead)
    /// states: a collider may be passed only if it lies in `an(cond)`, a
    /// non-collider only if it is outside `cond`.
    pub fn m_separated(&self, a: usize, b: usize, cond: &[usize]) -> Result<bool> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        for &c in cond {
            self.check_vertex(c)?;
        }
        if a == b {
            return Err(Error::InvalidQuery("endpoints must differ".into()));
        }
        if cond.contains(&a) || cond.contains(&b) {
            return Err(Error::InvalidQuery(
                "endpoints must not be in the conditioning set".into(),
            ));
        }
        let mut in_cond = vec![false; self.d];
        for &c in cond {
            in_cond[c] = true;
        }
        let anc = self.ancestors(cond);
        let marks: Vec<_> = (0..self.d).map(|v| self.edge_marks(v)).collect();

        // visited[v][h]: reached v through an edge with (h = 1) or without an arrowhead at v
        let mut visited = vec![[false; 2]; self.d];
        let mut stack = Vec::new();
        for &(w, _, head_w) in &marks[a] {
            let h = usize::from(head_w);
            if !visited[w][h] {
                visited[w][h] = true;
                stack.push((w, head_w));
            }
        }
        while let Some((v, head_in)) = stack.pop() {
            if v == b {
                return Ok(false);
            }
            for &(w, head_v, head_w) in &marks[v] {
                let collider = head_in && head_v;
                let pass = if collider { anc[v] } else { !in_cond[v] };
                if !pass {
                    continue;
                }
                let h = usize::from(head_w);
                if !visited[w][h] {
                    visited[w][h] = true;
                    stack.push((w, head_w));
                }
            }
        }
        Ok(true)
    }

    /// All directed paths ending at `target`, each listed from its first vertex
    /// down to `target` (the trivial path `[target]` included).
    fn directed_paths_into(&self, target: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![target]];
        while let Some(rev) = stack.pop() {
            let top = *rev.last().unwrap();
            for p in self.parents(top) {
                let mut next = rev.clone();
                next.push(p);
                stack.push(next);
            }
            let mut path = rev;
            path.reverse();
            out.push(path);
        }
        out.sort();
        out
    }

    fn collect_treks(&self, i: usize, j: usize, simple_only: bool) -> Result<Vec<Trek>> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        if !self.is_acyclic() {
            return Err(Error::Cyclic);
        }
        let into_i = self.directed_paths_into(i);
        let into_j = self.directed_paths_into(j);
        let mut out = Vec::new();
        for l in &into_i {
            for r in &into_j {
                if l[0] == r[0] {
                    if i == j && l.len() == 1 && r.len() == 1 {
                        continue;
                    }
                    let t = Trek {
                        left: l.clone(),
                        right: r.clone(),
                        has_bidirected: false,
                    };
                    if !simple_only || t.is_simple() {
                        out.push(t);
                    }
                } else if self.has_bidirected(l[0], r[0]) {
                    let t = Trek {
                        left: l.clone(),
                        right: r.clone(),
                        has_bidirected: true,
                    };
                    if !simple_only || t.is_simple() {
                        out.push(t);
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Simple treks between `i` and `j` in deterministic order.
    pub fn simple_treks(&self, i: usize, j: usize) -> Result<Vec<Trek>> {
        self.collect_treks(i, j, true)
    }

    /// Every trek between `i` and `j`, simple or not. For `i == j` the
    /// zero-length trek is excluded.
    pub fn treks(&self, i: usize, j: usize) -> Result<Vec<Trek>> {
        self.collect_treks(i, j, false)
    }

    /// Restriction to the vertices `w`; vertex `k` of the result is `w[k]`.
    pub fn induced_subgraph(&self, w: &[usize]) -> Result<(MixedGraph, Vec<usize>)> {
        let mut seen = vec![false; self.d];
        for &v in w {
            self.check_vertex(v)?;
            if seen[v] {
                return Err(Error::InvalidQuery(format!("vertex {v} listed twice")));
            }
            seen[v] = true;
        }
        let mut sub = MixedGraph::empty(w.len());
        for a in 0..w.len() {
            for b in a + 1..w.len() {
                if self.has_directed(w[a], w[b]) {
                    sub.add_directed(a, b);
                }
                if self.has_directed(w[b], w[a]) {
                    sub.add_directed(b, a);
                }
                if self.has_bidirected(w[a], w[b]) {
                    sub.add_bidirected(a, b);
                }
            }
        }
        Ok((sub, w.to_vec()))
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<MixedGraph> {
        if perm.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: perm.len(),
            });
        }
        let mut inverse = vec![usize::MAX; self.d];
        for (v, &p) in perm.iter().enumerate() {
            self.check_vertex(p)?;
            inverse[p] = v;
        }
        if inverse.contains(&usize::MAX) {
            return Err(Error::InvalidQuery("not a permutation".into()));
        }
        Ok(self.induced_subgraph(&inverse)?.0)
    }

    /// All admissible graphs one edge away (addition, deletion or change of
    /// edge type on the same skeleton).
    pub fn neighbors(&self, class: GraphClass) -> Vec<MixedGraph> {
        self.neighbors_with(class, Moves::ALL, None)
    }

    /// Neighborhood restricted to the given move types and, optionally, to
    /// graphs whose in-degree (arrowheads) never exceeds `max_in_degree`.
    /// Sorted, without duplicates.
    pub fn neighbors_with(
        &self,
        class: GraphClass,
        moves: Moves,
        max_in_degree: Option<usize>,
    ) -> Vec<MixedGraph> {
        let mut out = Vec::new();
        for lo in 0..self.d {
            for hi in lo + 1..self.d {
                let cur = self.mask(lo, hi);
                for &cand in class.pair_masks() {
                    if cand == cur {
                        continue;
                    }
                    let (nc, nn) = (cur.count_ones(), cand.count_ones());
                    let is_add = nn == nc + 1 && cand & cur == cur;
                    let is_del = nc == nn + 1 && cand & cur == cand;
                    let is_change = nn == nc && (cand ^ cur).count_ones() == 2;
                    if !((moves.add && is_add) || (moves.delete && is_del) || (moves.change && is_change)) {
                        continue;
                    }
                    let mut g = self.clone();
                    g.set_mask(lo, hi, cand);
                    if let Some(cap) = max_in_degree {
                        if g.in_degree(lo) > cap || g.in_degree(hi) > cap {
                            continue;
                        }
                    }
                    if g.is_admissible(class) {
                        out.push(g);
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Compact one-line rendering, e.g. `0->1, 1<->3`.
    pub fn edge_list_string(&self) -> String {
        let mut parts: Vec<String> = self
            .directed_edges()
            .into_iter()
            .map(|(i, j)| format!("{i}->{j}"))
            .collect();
        parts.extend(
            self.bidirected_edges()
                .into_iter()
                .map(|(i, j)| format!("{i}<->{j}")),
        );
        parts.join(", ")
    }
}

impl fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MixedGraph(d={}; {})", self.d, self.edge_list_string())
    }
}

impl fmt::Display for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={}; {}", self.d, self.edge_list_string())
    }
}

/// Largest vertex count accepted by [`enumerate`].
pub const ENUMERATION_LIMIT: usize = 5;

/// Every admissible graph of `class` on `d` vertices, sorted.
pub fn enumerate(d: usize, class: GraphClass) -> Result<Vec<MixedGraph>> {
    if d > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "vertex count for exhaustive enumeration",
            limit: ENUMERATION_LIMIT,
        });
    }
    let masks = class.pair_masks();
    let base = MixedGraph::empty(d);
    let npairs = base.pairs.len();
    let mut digits = vec![0usize; npairs];
    let mut out = Vec::new();
    loop {
        let g = MixedGraph {
            d,
            pairs: digits.iter().map(|&k| masks[k]).collect(),
        };
        if g.is_admissible(class) {
            out.push(g);
        }
        let mut pos = 0;
        loop {
            if pos == npairs {
                out.sort();
                return Ok(out);
            }
            digits[pos] += 1;
            if digits[pos] < masks.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// X1 -> X2 -> X3 -> X4 with X2 <-> X4, zero-indexed.
    fn motivating() -> MixedGraph {
        MixedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(1, 3)]).unwrap()
    }

    #[test]
    fn acyclicity() {
        assert!(motivating().is_acyclic());
        assert!(MixedGraph::empty(4).is_acyclic());
        let cyc = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(!cyc.is_acyclic());
    }

    #[test]
    fn bap_membership() {
        assert!(motivating().is_bap());
        // X1 -> X2 -> X4 plus X2 <-> X4 is a bow
        let bow = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[(1, 2)]).unwrap();
        assert!(!bow.is_bap());
        assert!(bow.is_acyclic());
        let single = MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap();
        assert!(single.is_bap());
    }

    #[test]
    fn self_loops_and_ranges_rejected() {
        assert!(matches!(
            MixedGraph::from_edges(2, &[(1, 1)], &[]),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            MixedGraph::from_edges(2, &[(0, 2)], &[]),
            Err(Error::VertexOutOfRange { vertex: 2, d: 2 })
        ));
    }

    #[test]
    fn bidirected_canonical() {
        let a = MixedGraph::from_edges(3, &[], &[(2, 0)]).unwrap();
        let b = MixedGraph::from_edges(3, &[], &[(0, 2), (2, 0)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bidirected_edges(), vec![(0, 2)]);
        assert_eq!(a.num_edges(), 1);
    }

    #[test]
    fn district_examples() {
        assert_eq!(motivating().districts(), vec![vec![0], vec![1, 3], vec![2]]);
        let dag = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert_eq!(dag.districts(), vec![vec![0], vec![1], vec![2]]);
        let g = MixedGraph::from_edges(4, &[], &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.districts(), vec![vec![0, 1, 2], vec![3]]);
        assert!(MixedGraph::empty(0).districts().is_empty());
    }

    #[test]
    fn colliders_and_v_structures() {
        let chain = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
        assert!(chain.collider_triples().is_empty());
        let coll = MixedGraph::from_edges(3, &[(0, 1), (2, 1)], &[]).unwrap();
        let expected: BTreeSet<_> = [(0, 1, 2)].into_iter().collect();
        assert_eq!(coll.collider_triples(), expected);
        assert_eq!(coll.v_structures(), expected);
        // shielded collider is a collider triple but not a v-structure
        let shielded = MixedGraph::from_edges(3, &[(0, 1), (2, 1), (0, 2)], &[]).unwrap();
        assert_eq!(shielded.collider_triples(), expected);
        assert!(shielded.v_structures().is_empty());
    }

    #[test]
    fn motivating_separations() {
        let g = motivating();
        assert!(g.m_separated(0, 2, &[1]).unwrap());
        assert!(g.m_separated(2, 0, &[1]).unwrap());
        assert!(!g.m_separated(0, 3, &[1]).unwrap());
        assert!(!g.m_separated(0, 2, &[]).unwrap());
    }

    #[test]
    fn m_separation_rejects_bad_queries() {
        let g = motivating();
        assert!(matches!(g.m_separated(0, 0, &[]), Err(Error::InvalidQuery(_))));
        assert!(matches!(g.m_separated(0, 2, &[0]), Err(Error::InvalidQuery(_))));
        assert!(matches!(
            g.m_separated(0, 7, &[]),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn motivating_treks() {
        let g = motivating();
        let t24 = g.simple_treks(1, 3).unwrap();
        assert_eq!(t24.len(), 2);
        assert!(t24.iter().any(|t| t.has_bidirected && t.left == vec![1] && t.right == vec![3]));
        assert!(t24
            .iter()
            .any(|t| t.head() == Some(1) && t.left == vec![1] && t.right == vec![1, 2, 3]));
        let t14 = g.simple_treks(0, 3).unwrap();
        assert_eq!(t14.len(), 1);
        assert_eq!(t14[0].right, vec![0, 1, 2, 3]);
        assert_eq!(t14[0].left_len(), 0);
        assert_eq!(t14[0].right_len(), 3);
        let disc = MixedGraph::from_edges(3, &[(0, 1)], &[]).unwrap();
        assert!(disc.simple_treks(0, 2).unwrap().is_empty());
    }

    #[test]
    fn induced_subgraphs() {
        let g = motivating();
        let (sub, map) = g.induced_subgraph(&[1, 3]).unwrap();
        assert_eq!(map, vec![1, 3]);
        assert_eq!(sub, MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap());
        assert_eq!(g.induced_subgraph(&[0, 1, 2, 3]).unwrap().0, g);
        assert_eq!(g.induced_subgraph(&[]).unwrap().0.num_vertices(), 0);
        assert!(g.induced_subgraph(&[0, 9]).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let empty = MixedGraph::empty(2);
        let n = empty.neighbors(GraphClass::Bap);
        let expected = vec![
            MixedGraph::from_edges(2, &[(0, 1)], &[]).unwrap(),
            MixedGraph::from_edges(2, &[(1, 0)], &[]).unwrap(),
            MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap(),
        ];
        let mut e = expected.clone();
        e.sort();
        assert_eq!(n, e);

        let single = MixedGraph::from_edges(2, &[(0, 1)], &[]).unwrap();
        let mut want = vec![
            MixedGraph::empty(2),
            MixedGraph::from_edges(2, &[(1, 0)], &[]).unwrap(),
            MixedGraph::from_edges(2, &[], &[(0, 1)]).unwrap(),
        ];
        want.sort();
        assert_eq!(single.neighbors(GraphClass::Bap), want);
        assert!(motivating().neighbors(GraphClass::Bap).iter().all(|g| g.is_bap()));
        assert!(single
            .neighbors(GraphClass::Dag)
            .iter()
            .all(|g| g.bidirected_edges().is_empty()));
    }

    #[test]
    fn neighbors_respect_cycles() {
        let chain = MixedGraph::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
        let closing = MixedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(!chain.neighbors(GraphClass::Bap).contains(&closing));
    }

    #[test]
    fn degenerate_sizes() {
        for d in 0..2 {
            let g = MixedGraph::empty(d);
            assert!(g.is_bap());
            assert!(g.neighbors(GraphClass::Bap).is_empty());
            assert_eq!(enumerate(d, GraphClass::Bap).unwrap().len(), 1);
            assert!(g.collider_triples().is_empty());
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate(2, GraphClass::Bap).unwrap().len(), 4);
        assert_eq!(enumerate(3, GraphClass::Bap).unwrap().len(), 62);
        // labelled DAG counts: 1, 3, 25, 543
        assert_eq!(enumerate(3, GraphClass::Dag).unwrap().len(), 25);
        assert_eq!(enumerate(4, GraphClass::Dag).unwrap().len(), 543);
        assert!(enumerate(6, GraphClass::Bap).is_err());
    }

    #[test]
    fn serde_shape() {
        let g = motivating();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(
            json,
            r#"{"d":4,"directed":[[0,1],[1,2],[2,3]],"bidirected":[[1,3]]}"#
        );
        let back: MixedGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
