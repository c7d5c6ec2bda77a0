//! Immutable undirected graphs in CSR form, file loaders, and the
//! generator zoo used by the experiments and tests.

use crate::dense::Mat;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Simple undirected graph (no self loops, no multi-edges) stored in
/// compressed sparse row form. Construction symmetrizes and deduplicates,
/// so every loader accepts sloppy input.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Graph {
    /// Build from an edge list over nodes `0..n`. Self loops are dropped,
    /// duplicate and reversed duplicates collapse to a single edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfBounds { index: u.max(v), size: n });
            }
            if u == v {
                continue;
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in &set {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(2 * set.len());
        row_ptr.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            col_idx.extend_from_slice(&nbrs);
            row_ptr.push(col_idx.len());
        }
        Ok(Graph { n, row_ptr, col_idx })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|u| self.degree(u) as f64).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// y = A x, the workhorse of every matrix-free operator.
    pub fn adj_matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for u in 0..self.n {
            let mut s = 0.0;
            for &v in self.neighbors(u) {
                s += x[v];
            }
            y[u] = s;
        }
    }

    pub fn adj_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.adj_matvec_into(x, &mut y);
        y
    }

    /// Dense adjacency matrix; callers gate on the dense limit.
    pub fn adjacency_dense(&self) -> Mat {
        let mut a = Mat::zeros(self.n, self.n);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                a[(u, v)] = 1.0;
            }
        }
        a
    }

    /// Dense combinatorial Laplacian D - A.
    pub fn laplacian_dense(&self) -> Mat {
        let mut l = Mat::zeros(self.n, self.n);
        for u in 0..self.n {
            l[(u, u)] = self.degree(u) as f64;
            for &v in self.neighbors(u) {
                l[(u, v)] = -1.0;
            }
        }
        l
    }

    /// BFS hop distances from `source`; unreachable nodes get `usize::MAX`.
    pub fn bfs_distances(&self, source: usize) -> Result<Vec<usize>> {
        if source >= self.n {
            return Err(Error::IndexOutOfBounds { index: source, size: self.n });
        }
        let mut dist = vec![usize::MAX; self.n];
        dist[source] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    pub fn is_connected(&self) -> bool {
        match self.bfs_distances(0) {
            Ok(d) => d.iter().all(|&x| x != usize::MAX),
            Err(_) => false,
        }
    }

    /// Restrict to the largest connected component. Ties break toward the
    /// component containing the smallest original node index. Returns the
    /// subgraph and the original index of each kept node (ascending, so
    /// relabeling preserves order).
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let mut comp = vec![usize::MAX; self.n];
        let mut sizes: Vec<usize> = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            let mut size = 0;
            let mut stack = vec![s];
            comp[s] = c;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = c;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        // components are discovered in order of their smallest node, so the
        // first maximum realizes the tie-break
        let best = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let keep: Vec<usize> = (0..self.n).filter(|&u| comp[u] == best).collect();
        let mut new_id = vec![usize::MAX; self.n];
        for (i, &u) in keep.iter().enumerate() {
            new_id[u] = i;
        }
        let mut edges = Vec::new();
        for &u in &keep {
            for &v in self.neighbors(u) {
                if u < v {
                    edges.push((new_id[u], new_id[v]));
                }
            }
        }
        let g = Graph::from_edges(keep.len(), &edges).expect("component is nonempty");
        (g, keep)
    }
}

/// Load a Matrix Market coordinate file as an undirected graph. Accepts
/// pattern, real, or integer fields; values and any `symmetric`/`general`
/// qualifier are ignored beyond symmetrization. Indices are 1-based.
pub fn load_matrix_market(path: &Path) -> Result<Graph> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut lines = reader.lines();
    let header = loop {
        match lines.next() {
            Some(l) => {
                let l = l?;
                if l.starts_with("%%MatrixMarket") {
                    let low = l.to_lowercase();
                    if !low.contains("coordinate") {
                        return Err(Error::Parse(
                            "only coordinate-format Matrix Market files are supported".into(),
                        ));
                    }
                    continue;
                }
                if l.starts_with('%') || l.trim().is_empty() {
                    continue;
                }
                break l;
            }
            None => return Err(Error::Parse("missing size line".into())),
        }
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("size line: {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() < 2 {
        return Err(Error::Parse(format!("bad size line: {header}")));
    }
    let n = dims[0].max(dims[1]);
    let mut edges = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let i: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad entry: {t}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad row index: {e}")))?;
        let j: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad entry: {t}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad col index: {e}")))?;
        if i == 0 || j == 0 {
            return Err(Error::Parse("matrix market indices are 1-based".into()));
        }
        edges.push((i - 1, j - 1));
    }
    Graph::from_edges(n, &edges)
}

/// Load a whitespace-separated 0-based edge list (`u v` per line, `#`
/// comments allowed). Node count is 1 + the largest index seen.
pub fn load_edge_list(path: &Path) -> Result<Graph> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut edges = Vec::new();
    let mut maxid = 0usize;
    let mut seen = false;
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let u: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad line: {t}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad node id: {e}")))?;
        let v: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad line: {t}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad node id: {e}")))?;
        maxid = maxid.max(u).max(v);
        seen = true;
        edges.push((u, v));
    }
    if !seen {
        return Err(Error::EmptyGraph);
    }
    Graph::from_edges(maxid + 1, &edges)
}

/// Load a graph file, dispatching on extension: `.mtx` is Matrix Market,
/// anything else is treated as an edge list.
pub fn load_graph(path: &Path) -> Result<Graph> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => load_matrix_market(path),
        _ => load_edge_list(path),
    }
}

pub fn path_graph(n: usize) -> Result<Graph> {
    let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    Graph::from_edges(n, &edges)
}

pub fn cycle_graph(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter("cycle needs at least 3 nodes".into()));
    }
    let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    edges.push((n - 1, 0));
    Graph::from_edges(n, &edges)
}

pub fn complete_graph(n: usize) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Star with `n` nodes total: node 0 is the hub.
pub fn star_graph(n: usize) -> Result<Graph> {
    let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
    Graph::from_edges(n, &edges)
}

/// rows x cols 4-neighbor grid; node (r, c) has index r*cols + c.
pub fn grid2d_graph(rows: usize, cols: usize) -> Result<Graph> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                edges.push((u, u + 1));
            }
            if r + 1 < rows {
                edges.push((u, u + cols));
            }
        }
    }
    Graph::from_edges(rows * cols, &edges)
}

/// Trap graph: a path on `l` nodes (0..l-1) with `m` extra leaves attached
/// to its middle node. Requires odd `l` so the middle is well defined.
pub fn trap_graph(l: usize, m: usize) -> Result<Graph> {
    if l < 3 || l % 2 == 0 {
        return Err(Error::InvalidParameter(
            "trap graph needs an odd path length of at least 3".into(),
        ));
    }
    let mid = l / 2;
    let mut edges: Vec<_> = (0..l - 1).map(|i| (i, i + 1)).collect();
    for k in 0..m {
        edges.push((mid, l + k));
    }
    Graph::from_edges(l + m, &edges)
}

/// Uniform random labeled tree on `n` nodes via a random Prufer sequence.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n == 1 {
        return Graph::from_edges(1, &[]);
    }
    if n == 2 {
        return Graph::from_edges(2, &[(0, 1)]);
    }
    let prufer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &prufer {
        degree[x] += 1;
    }
    let mut leaves: BTreeSet<usize> =
        (0..n).filter(|&u| degree[u] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &x in &prufer {
        let leaf = *leaves.iter().next().expect("prufer invariant");
        leaves.remove(&leaf);
        edges.push((leaf, x));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.insert(x);
        }
    }
    let mut it = leaves.iter();
    let u = *it.next().expect("two leaves remain");
    let v = *it.next().expect("two leaves remain");
    edges.push((u, v));
    Graph::from_edges(n, &edges)
}

/// Random connected graph: a random spanning tree plus `extra` additional
/// distinct edges sampled uniformly from the non-tree pairs.
pub fn random_connected_graph<R: Rng>(n: usize, extra: usize, rng: &mut R) -> Result<Graph> {
    let tree = random_tree(n, rng)?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        for &v in tree.neighbors(u) {
            if u < v {
                edges.push((u, v));
            }
        }
    }
    let max_extra = n * (n - 1) / 2 - edges.len();
    let extra = extra.min(max_extra);
    if extra > 0 {
        let present: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !present.contains(&(i, j)) {
                    candidates.push((i, j));
                }
            }
        }
        candidates.shuffle(rng);
        edges.extend_from_slice(&candidates[..extra]);
    }
    Graph::from_edges(n, &edges)
}

/// Built-in graphs addressable by name from the CLI and tests.
/// Formats: `path:N`, `cycle:N`, `complete:N`, `star:N`, `grid:RxC`,
/// `trap:LxM`, `tree:N:SEED`, `random:N:EXTRA:SEED`.
pub fn generate(spec: &str) -> Result<Graph> {
    use rand::SeedableRng;
    let parts: Vec<&str> = spec.split(':').collect();
    let usize_arg = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|e| Error::Parse(format!("bad size in generator spec {spec:?}: {e}")))
    };
    let pair_arg = |s: &str| -> Result<(usize, usize)> {
        let (a, b) = s
            .split_once('x')
            .ok_or_else(|| Error::Parse(format!("expected RxC in {spec:?}")))?;
        Ok((usize_arg(a)?, usize_arg(b)?))
    };
    match (parts.as_slice(), parts.first().copied()) {
        ([_, n], Some("path")) => path_graph(usize_arg(n)?),
        ([_, n], Some("cycle")) => cycle_graph(usize_arg(n)?),
        ([_, n], Some("complete")) => complete_graph(usize_arg(n)?),
        ([_, n], Some("star")) => star_graph(usize_arg(n)?),
        ([_, rc], Some("grid")) => {
            let (r, c) = pair_arg(rc)?;
            grid2d_graph(r, c)
        }
        ([_, lm], Some("trap")) => {
            let (l, m) = pair_arg(lm)?;
            trap_graph(l, m)
        }
        ([_, n, seed], Some("tree")) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(usize_arg(seed)? as u64);
            random_tree(usize_arg(n)?, &mut rng)
        }
        ([_, n, extra, seed], Some("random")) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(usize_arg(seed)? as u64);
            random_connected_graph(usize_arg(n)?, usize_arg(extra)?, &mut rng)
        }
        _ => Err(Error::UnknownGraph(spec.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn from_edges_dedups_and_symmetrizes() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 0), (1, 1), (2, 3), (2, 3)]).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(1, 1));
        assert_eq!(g.degree(1), 1);
    }

    #[test]
    fn bfs_on_path() {
        let g = path_graph(5).unwrap();
        let d = g.bfs_distances(0).unwrap();
        assert_eq!(d, vec![0, 1, 2, 3, 4]);
        assert!(g.is_connected());
    }

    #[test]
    fn largest_component_picks_biggest() {
        // two components: {0,1,2} and {3,4}
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let (c, keep) = g.largest_component();
        assert_eq!(c.num_nodes(), 3);
        assert_eq!(keep, vec![0, 1, 2]);
    }

    #[test]
    fn largest_component_tie_breaks_on_smallest_index() {
        // two 2-node components; keep the one containing node 0
        let g = Graph::from_edges(4, &[(2, 3), (0, 1)]).unwrap();
        let (_, keep) = g.largest_component();
        assert_eq!(keep, vec![0, 1]);
    }

    #[test]
    fn trap_graph_shape() {
        let g = trap_graph(5, 8).unwrap();
        assert_eq!(g.num_nodes(), 13);
        assert_eq!(g.num_edges(), 12);
        assert_eq!(g.degree(2), 10);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(5), 1);
    }

    #[test]
    fn random_tree_is_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 10, 57] {
            let t = random_tree(n, &mut rng).unwrap();
            assert_eq!(t.num_edges(), n.saturating_sub(1));
            assert!(t.is_connected());
        }
    }

    #[test]
    fn random_tree_deterministic_per_seed() {
        let a = random_tree(20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_tree(20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for u in 0..20 {
            assert_eq!(a.neighbors(u), b.neighbors(u));
        }
    }

    #[test]
    fn random_connected_has_extra_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_connected_graph(12, 5, &mut rng).unwrap();
        assert_eq!(g.num_edges(), 11 + 5);
        assert!(g.is_connected());
    }

    #[test]
    fn generate_specs() {
        assert_eq!(generate("grid:3x4").unwrap().num_nodes(), 12);
        assert_eq!(generate("trap:5x8").unwrap().num_nodes(), 13);
        assert_eq!(generate("cycle:6").unwrap().num_edges(), 6);
        assert!(generate("bogus:1").is_err());
    }

    #[test]
    fn matrix_market_roundtrip() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.mtx");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate pattern symmetric").unwrap();
        writeln!(f, "% a triangle").unwrap();
        writeln!(f, "3 3 3").unwrap();
        writeln!(f, "2 1").unwrap();
        writeln!(f, "3 1").unwrap();
        writeln!(f, "3 2").unwrap();
        drop(f);
        let g = load_matrix_market(&p).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn edge_list_load() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f, "0 1").unwrap();
        writeln!(f, "1 2").unwrap();
        drop(f);
        let g = load_edge_list(&p).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn adj_matvec_matches_dense() {
        let g = generate("random:15:10:5").unwrap();
        let a = g.adjacency_dense();
        let x: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let y1 = g.adj_matvec(&x);
        let y2 = a.matvec(&x);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(a.symmetry_error(), 0.0);
    }
}
