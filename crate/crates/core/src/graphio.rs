//! Graph representation, graph6 / edge-list I/O, the named-graph catalog and
//! vertex relabeling.

use std::fmt;

use thiserror::Error;

/// Largest vertex count representable in graph6 short form.
pub const GRAPH6_MAX_N: usize = 62;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph6: byte {value} at offset {offset} is outside 63..=126")]
    BadByte { offset: usize, value: u8 },
    #[error("graph6: empty input")]
    Empty,
    #[error("graph6: long form (n > {GRAPH6_MAX_N}) is not supported (offset 0)")]
    LongForm,
    #[error("graph6: bit field truncated at offset {offset}: expected {expected} data bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("graph6: {extra} trailing bytes starting at offset {offset}")]
    Trailing { offset: usize, extra: usize },
    #[error("graph6: nonzero padding bits in final byte at offset {offset}")]
    Padding { offset: usize },
    #[error("graph has {0} vertices; graph6 short form supports at most {GRAPH6_MAX_N}")]
    UnsupportedSize(usize),
    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijection(usize),
    #[error("unknown graph name '{name}'; catalog: {catalog}")]
    UnknownName { name: String, catalog: String },
    #[error("invalid parameter for '{name}': {msg}")]
    BadParameter { name: String, msg: String },
}

/// Undirected simple graph stored as a dense boolean adjacency matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { n, adj: vec![false; n * n] }
    }

    /// Builds a graph from an edge iterator. Panics on loops or out-of-range
    /// endpoints; use [`parse_edge_list`] for untrusted input.
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u},{v}) out of range for n={n}");
            assert_ne!(u, v, "self-loop at {u}");
            g.set_edge(u, v, true);
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    fn set_edge(&mut self, u: usize, v: usize, on: bool) {
        self.adj[u * self.n + v] = on;
        self.adj[v * self.n + u] = on;
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.n).filter(|&w| self.has_edge(v, w)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&w| self.has_edge(v, w))
    }

    /// Edges as (u, v) with u < v, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count() / 2
    }

    /// Row-major 0-1 adjacency.
    pub fn adjacency(&self) -> &[bool] {
        &self.adj
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={:?})", self.n, self.edges())
    }
}

/// Parameters (n, k, λ, μ) of a strongly regular graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SrgParams {
    pub n: usize,
    pub k: usize,
    pub lambda: usize,
    pub mu: usize,
}

impl SrgParams {
    /// k(k − λ − 1) = (n − k − 1)μ
    pub fn is_consistent(&self) -> bool {
        let lhs = self.k as i64 * (self.k as i64 - self.lambda as i64 - 1);
        let rhs = (self.n as i64 - self.k as i64 - 1) * self.mu as i64;
        lhs == rhs
    }
}

fn graph6_byte(offset: usize, b: u8) -> Result<u8, GraphError> {
    if (63..=126).contains(&b) {
        Ok(b - 63)
    } else {
        Err(GraphError::BadByte { offset, value: b })
    }
}

/// Parses one graph6 short-form record. Surrounding whitespace is ignored.
pub fn parse_graph6(text: &str) -> Result<Graph, GraphError> {
    let bytes = text.trim().as_bytes();
    let first = *bytes.first().ok_or(GraphError::Empty)?;
    if first == b'~' {
        return Err(GraphError::LongForm);
    }
    let n = graph6_byte(0, first)? as usize;
    let nbits = n * n.saturating_sub(1) / 2;
    let expected = nbits.div_ceil(6);
    let data = &bytes[1..];
    if data.len() < expected {
        // report the first missing offset, or the first bad byte if there is one
        for (i, &b) in data.iter().enumerate() {
            graph6_byte(i + 1, b)?;
        }
        return Err(GraphError::Truncated { offset: 1 + data.len(), expected, found: data.len() });
    }
    if data.len() > expected {
        return Err(GraphError::Trailing { offset: 1 + expected, extra: data.len() - expected });
    }
    let mut g = Graph::empty(n);
    let mut bit = 0usize;
    let mut vals = Vec::with_capacity(expected);
    for (i, &b) in data.iter().enumerate() {
        vals.push(graph6_byte(i + 1, b)?);
    }
    for j in 1..n {
        for i in 0..j {
            let byte = vals[bit / 6];
            if byte >> (5 - bit % 6) & 1 == 1 {
                g.set_edge(i, j, true);
            }
            bit += 1;
        }
    }
    if let Some(&last) = vals.last() {
        let used = nbits - (expected - 1) * 6;
        let pad_mask = (1u8 << (6 - used)) - 1;
        if last & pad_mask != 0 {
            return Err(GraphError::Padding { offset: expected });
        }
    }
    Ok(g)
}

/// Encodes a graph in graph6 short form (no trailing newline).
pub fn write_graph6(g: &Graph) -> Result<String, GraphError> {
    let n = g.n();
    if n > GRAPH6_MAX_N {
        return Err(GraphError::UnsupportedSize(n));
    }
    let mut out = vec![63 + n as u8];
    let mut acc = 0u8;
    let mut filled = 0;
    for j in 1..n {
        for i in 0..j {
            acc = (acc << 1) | g.has_edge(i, j) as u8;
            filled += 1;
            if filled == 6 {
                out.push(63 + acc);
                acc = 0;
                filled = 0;
            }
        }
    }
    if filled > 0 {
        out.push(63 + (acc << (6 - filled)));
    }
    Ok(String::from_utf8(out).expect("graph6 bytes are ASCII"))
}

/// Parses "u v" lines. An optional header `n <count>` (optionally followed by
/// an edge count) fixes the vertex count; without it every index in
/// 0..=max must occur in some edge. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let err = |line: usize, msg: String| GraphError::EdgeList { line, msg };
    let mut declared: Option<usize> = None;
    let mut declared_m: Option<usize> = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !seen_content && toks[0] == "n" {
            seen_content = true;
            let count = toks
                .get(1)
                .ok_or_else(|| err(line_no, "header 'n' without a vertex count".into()))?;
            declared = Some(count.parse().map_err(|_| err(line_no, format!("bad vertex count '{count}'")))?);
            if let Some(m) = toks.get(2) {
                declared_m = Some(m.parse().map_err(|_| err(line_no, format!("bad edge count '{m}'")))?);
            }
            if toks.len() > 3 {
                return Err(err(line_no, "header has extra tokens".into()));
            }
            continue;
        }
        seen_content = true;
        if toks.len() != 2 {
            return Err(err(line_no, format!("expected 'u v', got '{line}'")));
        }
        let parse = |t: &str| t.parse::<usize>().map_err(|_| err(line_no, format!("bad vertex index '{t}'")));
        let (u, v) = (parse(toks[0])?, parse(toks[1])?);
        if u == v {
            return Err(err(line_no, format!("self-loop at vertex {u}")));
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(err(line_no, format!("vertex index {} >= n = {n}", u.max(v))));
            }
        }
        edges.push((u, v));
    }
    let n = match declared {
        Some(n) => n,
        None => {
            let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
            let mut present = vec![false; n];
            for &(u, v) in &edges {
                present[u] = true;
                present[v] = true;
            }
            if let Some(gap) = present.iter().position(|&p| !p) {
                return Err(err(0, format!("vertex {gap} never appears; add an 'n <count>' header for isolated vertices")));
            }
            n
        }
    };
    let g = Graph::from_edges(n, edges);
    if let Some(m) = declared_m {
        if m != g.edge_count() {
            return Err(err(1, format!("header declares {m} edges, found {}", g.edge_count())));
        }
    }
    Ok(g)
}

/// Edge-list text with an `n <count>` header; parses back to the same graph.
pub fn write_edge_list(g: &Graph) -> String {
    let mut s = format!("n {} {}\n", g.n(), g.edge_count());
    for (u, v) in g.edges() {
        s.push_str(&format!("{u} {v}\n"));
    }
    s
}

/// Checks that `pi` is a permutation of 0..n.
pub fn check_permutation(pi: &[usize], n: usize) -> Result<(), GraphError> {
    if pi.len() != n {
        return Err(GraphError::NotBijection(n));
    }
    let mut seen = vec![false; n];
    for &p in pi {
        if p >= n || seen[p] {
            return Err(GraphError::NotBijection(n));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Relabels vertex u as pi[u]: adj'[pi(u)][pi(v)] = adj[u][v].
pub fn permute_graph(g: &Graph, pi: &[usize]) -> Result<Graph, GraphError> {
    check_permutation(pi, g.n())?;
    let mut h = Graph::empty(g.n());
    for (u, v) in g.edges() {
        h.set_edge(pi[u], pi[v], true);
    }
    Ok(h)
}

/// Returns (n, k, λ, μ) if `g` is strongly regular; complete, empty and
/// irregular graphs give `None`.
pub fn srg_check(g: &Graph) -> Option<SrgParams> {
    let n = g.n();
    let degs = g.degrees();
    let k = *degs.first()?;
    if degs.iter().any(|&d| d != k) || k == 0 || k == n - 1 {
        return None;
    }
    let mut lambda = None;
    let mut mu = None;
    for u in 0..n {
        for v in u + 1..n {
            let common = (0..n).filter(|&w| g.has_edge(u, w) && g.has_edge(v, w)).count();
            let slot = if g.has_edge(u, v) { &mut lambda } else { &mut mu };
            match *slot {
                None => *slot = Some(common),
                Some(c) if c != common => return None,
                _ => {}
            }
        }
    }
    Some(SrgParams { n, k, lambda: lambda?, mu: mu? })
}

pub fn complete(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

pub fn cycle(n: usize) -> Graph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
}

/// Star with `n` vertices: centre 0 joined to leaves 1..n.
pub fn star(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (0, i)))
}

pub fn petersen() -> Graph {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, i + 5));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    Graph::from_edges(10, outer.chain(spokes).chain(inner))
}

fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// Paley graph on Z_q: u ~ v iff u − v is a nonzero square.
pub fn paley(q: usize) -> Result<Graph, GraphError> {
    if !is_prime(q) || q % 4 != 1 {
        return Err(GraphError::BadParameter {
            name: "paley".into(),
            msg: format!("{q} is not a prime congruent to 1 mod 4"),
        });
    }
    let mut square = vec![false; q];
    for x in 1..q {
        square[x * x % q] = true;
    }
    let mut edges = Vec::new();
    for u in 0..q {
        for v in u + 1..q {
            if square[(v - u) % q] {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_edges(q, edges))
}

/// Rook's graph on an s×s board: cells (r, c) ↦ s·r + c, adjacent iff they
/// share a row or a column.
pub fn rook(s: usize) -> Graph {
    let mut edges = Vec::new();
    for a in 0..s * s {
        for b in a + 1..s * s {
            if a / s == b / s || a % s == b % s {
                edges.push((a, b));
            }
        }
    }
    Graph::from_edges(s * s, edges)
}

/// Cayley graph of Z4×Z4 with connection set {±(1,0), ±(0,1), ±(1,1)}.
pub fn shrikhande() -> Graph {
    let idx = |a: usize, b: usize| 4 * (a % 4) + b % 4;
    let mut edges = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for (da, db) in [(1, 0), (0, 1), (1, 1)] {
                edges.push((idx(a, b), idx(a + da, b + db)));
            }
        }
    }
    Graph::from_edges(16, edges)
}

const CATALOG: &str = "complete(n), cycle(n), path(n), star(n), petersen, paley(q), rook(s), shrikhande";

/// Looks up a catalog graph by name, e.g. `cycle(5)` or `petersen`.
pub fn named_graph(name: &str) -> Result<Graph, GraphError> {
    let name = name.trim();
    let unknown = || GraphError::UnknownName { name: name.to_string(), catalog: CATALOG.to_string() };
    let (base, arg) = match name.find('(') {
        Some(open) => {
            let close = name.strip_suffix(')').ok_or_else(unknown)?;
            let arg = close[open + 1..].trim();
            let val: usize = arg.parse().map_err(|_| GraphError::BadParameter {
                name: name[..open].to_string(),
                msg: format!("'{arg}' is not a non-negative integer"),
            })?;
            (name[..open].trim(), Some(val))
        }
        None => (name, None),
    };
    let bad = |msg: &str| GraphError::BadParameter { name: base.to_string(), msg: msg.to_string() };
    match (base, arg) {
        ("complete", Some(n)) if n >= 1 => Ok(complete(n)),
        ("cycle", Some(n)) if n >= 3 => Ok(cycle(n)),
        ("cycle", Some(_)) => Err(bad("cycle needs n >= 3")),
        ("path", Some(n)) if n >= 1 => Ok(path(n)),
        ("star", Some(n)) if n >= 2 => Ok(star(n)),
        ("star", Some(_)) => Err(bad("star needs n >= 2")),
        ("petersen", None) => Ok(petersen()),
        ("paley", Some(q)) => paley(q),
        ("rook", Some(s)) if s >= 1 => Ok(rook(s)),
        ("shrikhande", None) => Ok(shrikhande()),
        ("complete" | "path" | "rook", Some(_)) => Err(bad("size must be at least 1")),
        _ => Err(unknown()),
    }
}

/// Small fixed corpus used by the checks and the acceptance suite (n ≤ 16).
pub fn corpus() -> Vec<(String, Graph)> {
    let names = [
        "complete(2)", "complete(3)", "complete(4)", "cycle(4)", "cycle(5)", "cycle(6)",
        "path(3)", "path(4)", "path(5)", "star(4)", "star(5)", "petersen", "paley(5)",
        "paley(13)", "rook(3)", "rook(4)", "shrikhande",
    ];
    let mut out: Vec<(String, Graph)> =
        names.iter().map(|&s| (s.to_string(), named_graph(s).expect("catalog name"))).collect();
    // a few irregular graphs with mixed degrees
    out.push(("paw".into(), Graph::from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])));
    out.push(("bull".into(), Graph::from_edges(5, [(0, 1), (1, 2), (2, 0), (1, 3), (2, 4)])));
    out.push(("house".into(), Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)])));
    out.push((
        "kite-tail".into(),
        Graph::from_edges(7, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)]),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph6_examples() {
        assert_eq!(parse_graph6("A_").unwrap(), complete(2));
        assert_eq!(parse_graph6("C~").unwrap(), complete(4));
        assert_eq!(parse_graph6("D??").unwrap(), Graph::empty(5));
        assert_eq!(write_graph6(&complete(2)).unwrap(), "A_");
        assert_eq!(write_graph6(&Graph::empty(5)).unwrap(), "D??");
        assert_eq!(write_graph6(&petersen()).unwrap(), write_graph6(&parse_graph6(&write_graph6(&petersen()).unwrap()).unwrap()).unwrap());
    }

    #[test]
    fn graph6_errors_name_offsets() {
        assert_eq!(parse_graph6("D?").unwrap_err(), GraphError::Truncated { offset: 2, expected: 2, found: 1 });
        assert_eq!(parse_graph6("C\x7f").unwrap_err(), GraphError::BadByte { offset: 1, value: 0x7f });
        assert_eq!(parse_graph6("~?@?").unwrap_err(), GraphError::LongForm);
        assert!(matches!(parse_graph6("A_?"), Err(GraphError::Trailing { offset: 2, .. })));
        assert!(matches!(parse_graph6("A`"), Err(GraphError::Padding { .. })));
        assert_eq!(write_graph6(&Graph::empty(63)).unwrap_err(), GraphError::UnsupportedSize(63));
    }

    #[test]
    fn edge_list_examples() {
        assert_eq!(parse_edge_list("n 2\n0 1").unwrap(), complete(2));
        assert_eq!(parse_edge_list("0 1\n1 2\n2 3\n3 0").unwrap(), cycle(4));
        let e = parse_edge_list("0 0").unwrap_err();
        assert!(e.to_string().contains("self-loop"), "{e}");
        assert!(parse_edge_list("n 2\n0 2").is_err());
        assert!(parse_edge_list("0 2").is_err(), "gap at vertex 1");
        assert_eq!(parse_edge_list("n 3\n0 1\n1 0\n").unwrap().edge_count(), 1);
        assert_eq!(parse_edge_list(&write_edge_list(&petersen())).unwrap(), petersen());
    }

    #[test]
    fn permutations() {
        let c4 = cycle(4);
        assert_eq!(permute_graph(&c4, &[0, 1, 2, 3]).unwrap(), c4);
        assert_eq!(permute_graph(&c4, &[1, 2, 3, 0]).unwrap(), c4);
        assert_eq!(permute_graph(&path(3), &[2, 1, 0]).unwrap(), path(3));
        assert_eq!(permute_graph(&c4, &[0, 0, 1, 2]).unwrap_err(), GraphError::NotBijection(4));
    }

    #[test]
    fn srg_params() {
        assert_eq!(srg_check(&cycle(5)), Some(SrgParams { n: 5, k: 2, lambda: 0, mu: 1 }));
        assert_eq!(srg_check(&petersen()), Some(SrgParams { n: 10, k: 3, lambda: 0, mu: 1 }));
        assert_eq!(srg_check(&path(3)), None);
        assert_eq!(srg_check(&complete(5)), None);
        assert_eq!(srg_check(&Graph::empty(4)), None);
        let p16 = SrgParams { n: 16, k: 6, lambda: 2, mu: 2 };
        assert_eq!(srg_check(&rook(4)), Some(p16));
        assert_eq!(srg_check(&shrikhande()), Some(p16));
        for q in [5, 13, 17] {
            let p = srg_check(&paley(q).unwrap()).unwrap();
            assert!(p.is_consistent());
        }
    }

    #[test]
    fn catalog() {
        assert_eq!(named_graph("cycle(4)").unwrap(), cycle(4));
        assert_eq!(named_graph("star(4)").unwrap().degrees(), vec![3, 1, 1, 1]);
        assert!(matches!(named_graph("dodecahedron"), Err(GraphError::UnknownName { .. })));
        assert!(named_graph("paley(7)").is_err());
    }
}
