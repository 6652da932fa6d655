//! k-extensions of a graph's cellular closure over V^k, cylindric relations,
//! type identities and the k-equivalence search.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::Serialize;
use thiserror::Error;

use crate::cellular::{
    self, adjacency_anchor, graph_closure, CellularError, Configuration, Relation, SearchLimits, WeakIso,
    WeakIsoSearch,
};
use crate::graphio::Graph;
use crate::linalg::RationalMatrix;

/// Default cap on the number of points n^k.
pub const DEFAULT_MAX_POINTS: usize = 4096;

/// Point cap, overridable through `CELLWALK_MAX_POINTS`.
pub fn max_points() -> usize {
    std::env::var("CELLWALK_MAX_POINTS").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_MAX_POINTS)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtensionError {
    #[error("{n}^{k} points exceed the cap of {cap} (set CELLWALK_MAX_POINTS to raise it)")]
    TooLarge { n: usize, k: usize, cap: usize },
    #[error("expected a {expected}×{expected} array of relations, got {got}")]
    Arity { expected: usize, got: String },
    #[error(transparent)]
    Cellular(#[from] CellularError),
}

/// Row-major indexing of V^k: the leftmost coordinate is most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TupleSpace {
    n: usize,
    k: usize,
}

impl TupleSpace {
    pub fn new(n: usize, k: usize) -> Result<Self, ExtensionError> {
        let cap = max_points();
        match n.checked_pow(k as u32) {
            Some(size) if size <= cap && k >= 1 => Ok(TupleSpace { n, k }),
            _ => Err(ExtensionError::TooLarge { n, k, cap }),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.k as u32)
    }

    pub fn encode(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.k);
        x.iter().fold(0, |acc, &xi| acc * self.n + xi)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// All tuples in index order.
    pub fn tuples(&self) -> Vec<Vec<usize>> {
        (0..self.size()).map(|i| self.decode(i)).collect()
    }
}

/// Equality pattern of a tuple as a restricted growth string: position i
/// gets the index of the first-occurrence class of its value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EqualityPattern(Vec<u8>);

impl EqualityPattern {
    pub fn of(values: &[usize]) -> Self {
        let mut firsts: Vec<usize> = Vec::new();
        let labels = values
            .iter()
            .map(|v| match firsts.iter().position(|f| f == v) {
                Some(p) => p as u8,
                None => {
                    firsts.push(*v);
                    (firsts.len() - 1) as u8
                }
            })
            .collect();
        EqualityPattern(labels)
    }

    pub fn blocks(&self) -> usize {
        self.0.iter().map(|&b| b as usize + 1).max().unwrap_or(0)
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    /// All set partitions of `len` positions with at most `max_blocks`
    /// blocks, in lexicographic order.
    pub fn all(len: usize, max_blocks: usize) -> Vec<EqualityPattern> {
        fn go(prefix: &mut Vec<u8>, len: usize, max_blocks: usize, out: &mut Vec<EqualityPattern>) {
            if prefix.len() == len {
                out.push(EqualityPattern(prefix.clone()));
                return;
            }
            let used = prefix.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
            for b in 0..=used.min(max_blocks.saturating_sub(1)) {
                prefix.push(b as u8);
                go(prefix, len, max_blocks, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        go(&mut Vec::with_capacity(len), len, max_blocks, &mut out);
        out
    }
}

fn pattern_of_pair(xs: &[usize], ys: &[usize]) -> EqualityPattern {
    let joint: Vec<usize> = xs.iter().chain(ys).copied().collect();
    EqualityPattern::of(&joint)
}

/// Coloring of V^k × V^k by the equality pattern of (x̄, ȳ); color ids are
/// the lexicographic ranks of the realizable patterns.
pub fn centralizer_colors(n: usize, k: usize) -> Result<Configuration, ExtensionError> {
    let space = TupleSpace::new(n, k)?;
    let patterns = EqualityPattern::all(2 * k, n);
    let tuples = space.tuples();
    let m = space.size();
    let mut color = Vec::with_capacity(m * m);
    for x in &tuples {
        for y in &tuples {
            let p = pattern_of_pair(x, y);
            color.push(patterns.binary_search(&p).expect("realizable pattern") as u32);
        }
    }
    Ok(Configuration::from_coloring(m, color)?)
}

/// Seed class of a k-extension color: (equality pattern id, base colors
/// c(x_i, y_i) for each coordinate).
pub type SeedKey = (u32, Vec<u32>);

/// The k-extension of a graph's cellular closure.
#[derive(Clone, Debug)]
pub struct Extension {
    pub space: TupleSpace,
    pub base: Configuration,
    pub config: Configuration,
    seeds: Vec<SeedKey>,
}

impl Extension {
    /// Seed class containing extension color `c`.
    pub fn seed_of(&self, c: u32) -> &SeedKey {
        &self.seeds[c as usize]
    }

    /// Extension colors grouped by seed class.
    pub fn seed_classes(&self) -> BTreeMap<SeedKey, Vec<u32>> {
        let mut out: BTreeMap<SeedKey, Vec<u32>> = BTreeMap::new();
        for (c, s) in self.seeds.iter().enumerate() {
            out.entry(s.clone()).or_default().push(c as u32);
        }
        out
    }
}

/// Smallest cellular algebra on V^k containing both the k-fold tensor power
/// of the base closure and the centralizer of Sym(V).
///
/// The WL refinement starts from the joint coloring (equality pattern of
/// (x̄, ȳ), base colors (c(x_1,y_1), …, c(x_k,y_k))).
pub fn extension_of(base: &Configuration, k: usize) -> Result<Extension, ExtensionError> {
    let n = base.m();
    let space = TupleSpace::new(n, k)?;
    let patterns = EqualityPattern::all(2 * k, n);
    let tuples = space.tuples();
    let m = space.size();
    let mut keys: Vec<SeedKey> = Vec::with_capacity(m * m);
    for x in &tuples {
        for y in &tuples {
            let p = patterns.binary_search(&pattern_of_pair(x, y)).expect("realizable pattern") as u32;
            let t = x.iter().zip(y).map(|(&a, &b)| base.color(a, b)).collect();
            keys.push((p, t));
        }
    }
    let (initial, _) = cellular::canonical_ids(&keys);
    let config = cellular::refine_to_fixpoint(m, initial);
    let seeds = (0..config.r() as u32)
        .map(|c| {
            let (u, v) = config.representative(c);
            keys[u * m + v].clone()
        })
        .collect();
    Ok(Extension { space, base: base.clone(), config, seeds })
}

pub fn k_extension(g: &Graph, k: usize) -> Result<Extension, ExtensionError> {
    TupleSpace::new(g.n(), k)?;
    extension_of(&graph_closure(g), k)
}

/// Cyl_S(x̄, ȳ) = Π_{i,j} R_{i,j}(x_i, y_j) as a 0-1 matrix on V^k.
pub fn cylindric_matrix(
    s: &[Vec<Relation>],
    base: &Configuration,
    space: &TupleSpace,
) -> Result<RationalMatrix, ExtensionError> {
    let k = space.k();
    if s.len() != k || s.iter().any(|row| row.len() != k) {
        let shape: Vec<usize> = s.iter().map(Vec::len).collect();
        return Err(ExtensionError::Arity { expected: k, got: format!("rows {shape:?}") });
    }
    let tuples = space.tuples();
    Ok(RationalMatrix::from_i64(space.size(), |a, b| {
        let (x, y) = (&tuples[a], &tuples[b]);
        let hit = (0..k).all(|i| (0..k).all(|j| s[i][j].holds(base, x[i], y[j])));
        hit as i64
    }))
}

/// Diagonal indicator I_T of tuples with (x_i, x_j) ∈ L_{i,j} for each
/// listed (i, j, L_{i,j}), i < j. Unlisted pairs are unconstrained.
pub fn type_identity(
    tt: &[(usize, usize, Relation)],
    base: &Configuration,
    space: &TupleSpace,
) -> Result<RationalMatrix, ExtensionError> {
    let k = space.k();
    if let Some(bad) = tt.iter().find(|(i, j, _)| !(i < j && *j < k)) {
        return Err(ExtensionError::Arity { expected: k, got: format!("pair ({}, {})", bad.0, bad.1) });
    }
    let tuples = space.tuples();
    Ok(RationalMatrix::from_i64(space.size(), |a, b| {
        let x = &tuples[a];
        (a == b && tt.iter().all(|(i, j, l)| l.holds(base, x[*i], x[*j]))) as i64
    }))
}

/// The cylindric array whose Cyl_S equals I_T: L_{i,j} above the diagonal,
/// L_{j,i}ᵀ below it and I on it.
pub fn type_as_cylindric(tt: &[(usize, usize, Relation)], base: &Configuration, k: usize) -> Vec<Vec<Relation>> {
    let mut s = vec![vec![Relation::all(base); k]; k];
    for (i, row) in s.iter_mut().enumerate() {
        row[i] = Relation::identity(base);
    }
    for (i, j, l) in tt {
        s[*i][*j] = l.clone();
        s[*j][*i] = l.transpose(base);
    }
    s
}

/// Outcome of a k-equivalence search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum KEquivalence {
    /// An equivalence φ of the closures with an extension φ̂.
    Equivalent { phi: WeakIso, phi_hat: WeakIso },
    NotEquivalent,
    /// The node budget ran out.
    Unknown { explored: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct KSearchLimits {
    pub max_nodes: u64,
}

impl Default for KSearchLimits {
    fn default() -> Self {
        KSearchLimits { max_nodes: 10_000_000 }
    }
}

/// Extension anchors for a base equivalence φ: each seed class (p, t) of
/// the first extension must map onto the seed class (p, φ(t)) of the
/// second. Returns `None` when some image seed class is empty.
pub fn extension_anchors(e1: &Extension, e2: &Extension, phi: &WeakIso) -> Option<Vec<(Relation, Relation)>> {
    let c1 = e1.seed_classes();
    let c2 = e2.seed_classes();
    if c1.len() != c2.len() {
        return None;
    }
    let mut anchors = Vec::with_capacity(c1.len());
    for ((p, t), colors) in &c1 {
        let image: SeedKey = (*p, t.iter().map(|&c| phi.image(c)).collect());
        let target = c2.get(&image)?;
        anchors.push((Relation::new(colors.clone()), Relation::new(target.clone())));
    }
    Some(anchors)
}

/// Decides k-equivalence of two graphs by enumerating equivalences φ of the
/// closures and searching, for each, an anchored weak isomorphism of the
/// k-extensions.
pub fn k_equivalence_search(
    g: &Graph,
    g2: &Graph,
    k: usize,
    limits: KSearchLimits,
) -> Result<KEquivalence, ExtensionError> {
    if g.n() != g2.n() || g.edge_count() != g2.edge_count() {
        return Ok(KEquivalence::NotEquivalent);
    }
    TupleSpace::new(g.n(), k)?;
    let (c1, c2) = (graph_closure(g), graph_closure(g2));
    let anchor = adjacency_anchor(g, &c1, g2, &c2)?;
    let unbounded = |max_nodes| SearchLimits { max_colors: usize::MAX, max_nodes };

    let mut base_search = WeakIsoSearch::new(&c1, &c2, &[anchor], unbounded(limits.max_nodes))?;
    let mut phis = Vec::new();
    match base_search.run(|w| {
        phis.push(w.clone());
        ControlFlow::Continue(())
    }) {
        Ok(_) => {}
        Err(CellularError::NodeBudget { explored, .. }) => return Ok(KEquivalence::Unknown { explored }),
        Err(e) => return Err(e.into()),
    }
    if phis.is_empty() {
        return Ok(KEquivalence::NotEquivalent);
    }

    let (e1, e2) = (extension_of(&c1, k)?, extension_of(&c2, k)?);
    let mut explored = base_search.explored();
    for phi in phis {
        let Some(anchors) = extension_anchors(&e1, &e2, &phi) else { continue };
        let budget = limits.max_nodes.saturating_sub(explored);
        let mut search = WeakIsoSearch::new(&e1.config, &e2.config, &anchors, unbounded(budget))?;
        let mut found = None;
        let outcome = search.run(|w| {
            found = Some(w.clone());
            ControlFlow::Break(())
        });
        explored += search.explored();
        match outcome {
            Ok(_) => {}
            Err(CellularError::NodeBudget { .. }) => return Ok(KEquivalence::Unknown { explored }),
            Err(e) => return Err(e.into()),
        }
        if let Some(phi_hat) = found {
            return Ok(KEquivalence::Equivalent { phi, phi_hat });
        }
    }
    Ok(KEquivalence::NotEquivalent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::membership;
    use crate::graphio::{complete, cycle, path, permute_graph};

    #[test]
    fn tuple_space_round_trip() {
        let t = TupleSpace::new(5, 3).unwrap();
        for i in 0..t.size() {
            assert_eq!(t.encode(&t.decode(i)), i);
        }
        assert_eq!(t.decode(1), vec![0, 0, 1]);
        assert!(matches!(TupleSpace::new(100, 3), Err(ExtensionError::TooLarge { .. })));
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|len| EqualityPattern::all(len, len).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn centralizer_examples() {
        assert_eq!(centralizer_colors(2, 1).unwrap().r(), 2);
        assert_eq!(centralizer_colors(4, 2).unwrap().r(), 15);
        assert_eq!(centralizer_colors(5, 2).unwrap().r(), 15);
        // partitions of 4 points into at most 2 blocks: 1 + 7
        assert_eq!(centralizer_colors(2, 2).unwrap().r(), 8);
    }

    #[test]
    fn one_extension_is_the_closure() {
        for g in [path(4), cycle(5), complete(3)] {
            let e = k_extension(&g, 1).unwrap();
            assert!(e.config.same_partition(&graph_closure(&g)));
        }
    }

    #[test]
    fn k2_two_extension() {
        let e = k_extension(&complete(2), 2).unwrap();
        let c = &e.config;
        assert_eq!(c.m(), 4);
        let t = e.space;
        let loops = [t.encode(&[0, 0]), t.encode(&[1, 1])];
        let arcs = [t.encode(&[0, 1]), t.encode(&[1, 0])];
        let dc = |p: usize| c.color(p, p);
        assert_eq!(dc(loops[0]), dc(loops[1]));
        assert_eq!(dc(arcs[0]), dc(arcs[1]));
        assert_ne!(dc(loops[0]), dc(arcs[0]));
        cellular::intersection_tensor(c).unwrap();
    }

    #[test]
    fn worked_cylindric_arrays() {
        let g = cycle(5);
        let base = graph_closure(&g);
        let space = TupleSpace::new(5, 2).unwrap();
        let (j, i, ji) = (Relation::all(&base), Relation::identity(&base), Relation::off_diagonal(&base));
        let s = vec![vec![j.clone(), i.clone()], vec![ji, j.clone()]];
        let s2 = vec![vec![j.clone(), i.clone()], vec![i, j.clone()]];
        let cyl = cylindric_matrix(&s, &base, &space).unwrap();
        let cyl2 = cylindric_matrix(&s2, &base, &space).unwrap();
        for (a, x) in space.tuples().iter().enumerate() {
            for (b, y) in space.tuples().iter().enumerate() {
                assert_eq!(cyl[(a, b)] == num_rational::BigRational::from_integer(1.into()), x[0] == y[1] && x[1] != y[0]);
                assert_eq!(cyl2[(a, b)] == num_rational::BigRational::from_integer(1.into()), x[0] == y[1] && x[1] == y[0]);
            }
        }
        let all = vec![vec![j.clone(); 2]; 2];
        assert_eq!(cylindric_matrix(&all, &base, &space).unwrap(), RationalMatrix::ones(25));
        assert!(cylindric_matrix(&[vec![j]], &base, &space).is_err());
    }

    #[test]
    fn type_identity_examples() {
        let g = cycle(4);
        let base = graph_closure(&g);
        let space = TupleSpace::new(4, 2).unwrap();
        let adj = Relation::from_matrix(&base, &RationalMatrix::adjacency(&g)).unwrap();
        let it = type_identity(&[(0, 1, adj.clone())], &base, &space).unwrap();
        assert_eq!(it.trace(), num_rational::BigRational::from_integer(8.into()));
        let rep = type_identity(&[(0, 1, Relation::identity(&base))], &base, &space).unwrap();
        for (a, x) in space.tuples().iter().enumerate() {
            assert_eq!(rep[(a, a)].numer() == &1.into(), x[0] == x[1]);
        }
        let cyl = cylindric_matrix(&type_as_cylindric(&[(0, 1, adj.clone())], &base, 2), &base, &space).unwrap();
        assert_eq!(cyl, it);
        let ext = extension_of(&base, 2).unwrap();
        assert!(membership(&it, &ext.config).is_some());
    }

    #[test]
    fn relabeled_extension_matches() {
        let g = cycle(4);
        let pi = [2, 0, 3, 1];
        let h = permute_graph(&g, &pi).unwrap();
        let (e1, e2) = (k_extension(&g, 2).unwrap(), k_extension(&h, 2).unwrap());
        let t = e1.space;
        for a in 0..t.size() {
            for b in 0..t.size() {
                let pa: Vec<usize> = t.decode(a).iter().map(|&x| pi[x]).collect();
                let pb: Vec<usize> = t.decode(b).iter().map(|&x| pi[x]).collect();
                assert_eq!(e1.config.color(a, b), e2.config.color(t.encode(&pa), t.encode(&pb)));
            }
        }
    }

    #[test]
    fn equivalence_of_relabeled_graph() {
        let g = path(4);
        let h = permute_graph(&g, &[3, 1, 0, 2]).unwrap();
        for k in 1..=2 {
            let v = k_equivalence_search(&g, &h, k, KSearchLimits::default()).unwrap();
            assert!(matches!(v, KEquivalence::Equivalent { .. }), "k={k}: {v:?}");
        }
        let v = k_equivalence_search(&path(4), &cycle(4), 1, KSearchLimits::default()).unwrap();
        assert_eq!(v, KEquivalence::NotEquivalent);
    }
}
