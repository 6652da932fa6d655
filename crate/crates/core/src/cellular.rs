//! Cellular algebras represented as colorings of V×V.
//!
//! A [`Configuration`] is the coloring whose color classes are the basis
//! relations of a cellular algebra. [`wl_closure`] computes the cellular
//! closure of a set of matrices by two-dimensional Weisfeiler-Lehman
//! refinement; weak isomorphisms are searched over color bijections that
//! preserve the intersection numbers.

use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphio::Graph;
use crate::linalg::RationalMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CellularError {
    #[error("generator {index} is {got}×{got}, expected {expected}×{expected}")]
    GeneratorSize { index: usize, expected: usize, got: usize },
    #[error("coherence violated at color {color}: {detail}")]
    CoherenceViolation { color: u32, detail: String },
    #[error("no vertex has degree {0}")]
    EmptyRelation(usize),
    #[error("matrix is not a relation of the configuration: {0}")]
    NotARelation(String),
    #[error("configuration has {r} colors, above the search bound of {bound}")]
    TooManyColors { r: usize, bound: usize },
    #[error("search budget exhausted after {explored} nodes (deepest assignment {depth}/{r} colors)")]
    NodeBudget { explored: u64, depth: usize, r: usize },
    #[error("malformed configuration: {0}")]
    Malformed(String),
}

/// Coloring of the m×m grid whose classes are basis relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    m: usize,
    r: usize,
    color: Vec<u32>,
    diag_colors: Vec<u32>,
    transpose: Vec<u32>,
    sizes: Vec<usize>,
    reps: Vec<(u32, u32)>,
}

impl Configuration {
    /// Wraps a coloring with dense ids 0..r. Checks the partition-level
    /// axioms (diagonal separation and transpose closure); coherence is
    /// checked separately.
    pub fn from_coloring(m: usize, color: Vec<u32>) -> Result<Self, CellularError> {
        if color.len() != m * m {
            return Err(CellularError::Malformed(format!("{} entries for m={m}", color.len())));
        }
        let r = color.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut sizes = vec![0usize; r];
        let mut reps = vec![(u32::MAX, u32::MAX); r];
        for u in 0..m {
            for v in 0..m {
                let c = color[u * m + v] as usize;
                if sizes[c] == 0 {
                    reps[c] = (u as u32, v as u32);
                }
                sizes[c] += 1;
            }
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(CellularError::Malformed(format!("color {c} is unused")));
        }
        let mut is_diag = vec![None::<bool>; r];
        let mut transpose = vec![u32::MAX; r];
        for u in 0..m {
            for v in 0..m {
                let c = color[u * m + v] as usize;
                let d = u == v;
                match is_diag[c] {
                    None => is_diag[c] = Some(d),
                    Some(x) if x != d => {
                        return Err(CellularError::Malformed(format!("color {c} mixes diagonal and off-diagonal")))
                    }
                    _ => {}
                }
                let t = color[v * m + u];
                if transpose[c] == u32::MAX {
                    transpose[c] = t;
                } else if transpose[c] != t {
                    return Err(CellularError::Malformed(format!("transpose of color {c} is not a single color")));
                }
            }
        }
        let diag_colors = (0..r as u32).filter(|&c| is_diag[c as usize] == Some(true)).collect();
        Ok(Configuration { m, r, color, diag_colors, transpose, sizes, reps })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of basis relations.
    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn color(&self, u: usize, v: usize) -> u32 {
        self.color[u * self.m + v]
    }

    pub fn colors(&self) -> &[u32] {
        &self.color
    }

    pub fn diag_colors(&self) -> &[u32] {
        &self.diag_colors
    }

    pub fn is_diag(&self, c: u32) -> bool {
        self.diag_colors.binary_search(&c).is_ok()
    }

    pub fn transpose_of(&self, c: u32) -> u32 {
        self.transpose[c as usize]
    }

    pub fn transpose_pairing(&self) -> &[u32] {
        &self.transpose
    }

    /// Number of pairs in the class of `c`, i.e. sum(R) = tr(R·Rᵀ).
    pub fn class_size(&self, c: u32) -> usize {
        self.sizes[c as usize]
    }

    pub fn representative(&self, c: u32) -> (usize, usize) {
        let (u, v) = self.reps[c as usize];
        (u as usize, v as usize)
    }

    /// Trace of the basis matrix of color `c`.
    pub fn trace(&self, c: u32) -> usize {
        if self.is_diag(c) {
            self.class_size(c)
        } else {
            0
        }
    }

    /// 0-1 matrix of one basis relation.
    pub fn indicator(&self, c: u32) -> RationalMatrix {
        RationalMatrix::from_i64(self.m, |u, v| (self.color(u, v) == c) as i64)
    }

    /// Pairs (u, v) of a color class, row-major.
    pub fn members(&self, c: u32) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m;
        self.color.iter().enumerate().filter(move |(_, &x)| x == c).map(move |(i, _)| (i / m, i % m))
    }

    /// Whether both colorings induce the same partition of the grid.
    pub fn same_partition(&self, other: &Configuration) -> bool {
        if self.m != other.m || self.r != other.r {
            return false;
        }
        let mut fwd = vec![u32::MAX; self.r];
        for (&a, &b) in self.color.iter().zip(&other.color) {
            let slot = &mut fwd[a as usize];
            if *slot == u32::MAX {
                *slot = b;
            } else if *slot != b {
                return false;
            }
        }
        let mut seen = vec![false; self.r];
        fwd.iter().all(|&b| !std::mem::replace(&mut seen[b as usize], true))
    }

    pub fn to_json(&self) -> ConfigurationJson {
        ConfigurationJson {
            m: self.m,
            r: self.r,
            color: self.color.chunks(self.m.max(1)).map(<[u32]>::to_vec).collect(),
            diag_colors: self.diag_colors.clone(),
            transpose_pairing: self.transpose.clone(),
        }
    }

    pub fn from_json(j: &ConfigurationJson) -> Result<Self, CellularError> {
        if j.color.len() != j.m || j.color.iter().any(|row| row.len() != j.m) {
            return Err(CellularError::Malformed("color table is not m×m".into()));
        }
        let c = Self::from_coloring(j.m, j.color.concat())?;
        if c.r != j.r || c.diag_colors != j.diag_colors || c.transpose != j.transpose_pairing {
            return Err(CellularError::Malformed("r / diag_colors / transpose_pairing disagree with the table".into()));
        }
        Ok(c)
    }
}

/// JSON shape of a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationJson {
    pub m: usize,
    pub r: usize,
    pub color: Vec<Vec<u32>>,
    pub diag_colors: Vec<u32>,
    pub transpose_pairing: Vec<u32>,
}

/// A relation of a configuration: the sum of the listed basis relations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    colors: Vec<u32>,
}

impl Relation {
    pub fn new(mut colors: Vec<u32>) -> Self {
        colors.sort_unstable();
        colors.dedup();
        Relation { colors }
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn contains(&self, c: u32) -> bool {
        self.colors.binary_search(&c).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// All basis relations (J).
    pub fn all(c: &Configuration) -> Self {
        Relation { colors: (0..c.r() as u32).collect() }
    }

    /// The diagonal (I).
    pub fn identity(c: &Configuration) -> Self {
        Relation { colors: c.diag_colors.clone() }
    }

    /// J − I
    pub fn off_diagonal(c: &Configuration) -> Self {
        Relation { colors: (0..c.r() as u32).filter(|&x| !c.is_diag(x)).collect() }
    }

    pub fn transpose(&self, c: &Configuration) -> Self {
        Relation::new(self.colors.iter().map(|&x| c.transpose_of(x)).collect())
    }

    /// Reads a 0-1 matrix as a relation; fails unless it is a 0-1 sum of
    /// basis relations.
    pub fn from_matrix(c: &Configuration, mtx: &RationalMatrix) -> Result<Self, CellularError> {
        let coeffs = membership(mtx, c).ok_or_else(|| CellularError::NotARelation("not constant on color classes".into()))?;
        let mut colors = Vec::new();
        for (i, a) in coeffs.iter().enumerate() {
            if a.is_one() {
                colors.push(i as u32);
            } else if !a.is_zero() {
                return Err(CellularError::NotARelation(format!("coefficient {a} on color {i}")));
            }
        }
        Ok(Relation { colors })
    }

    /// Whether (u, v) lies in the relation.
    pub fn holds(&self, c: &Configuration, u: usize, v: usize) -> bool {
        self.contains(c.color(u, v))
    }

    pub fn matrix(&self, c: &Configuration) -> RationalMatrix {
        RationalMatrix::from_i64(c.m(), |u, v| self.holds(c, u, v) as i64)
    }

    /// Image under a color map.
    pub fn map(&self, w: &WeakIso) -> Self {
        Relation::new(self.colors.iter().map(|&x| w.map[x as usize]).collect())
    }
}

/// Assigns dense ids to `keys` by rank in sorted order.
pub(crate) fn canonical_ids<K: Ord + Clone>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut distinct: Vec<K> = keys.to_vec();
    distinct.sort();
    distinct.dedup();
    let ids = keys.iter().map(|k| distinct.binary_search(k).expect("key present") as u32).collect();
    (ids, distinct.len())
}

type Signature = (u32, u32, Vec<(u64, u32)>);

/// One refinement round. Returns the new coloring and its color count.
fn refine_round(m: usize, color: &[u32], r: usize) -> (Vec<u32>, usize) {
    let threads = rayon::current_num_threads().max(1);
    let rows_per_chunk = m.div_ceil(threads * 4).max(1);
    let r64 = r as u64;

    let chunks: Vec<(Vec<Signature>, Vec<u32>)> = (0..m)
        .collect::<Vec<_>>()
        .par_chunks(rows_per_chunk)
        .map(|rows| {
            let mut local: HashMap<Signature, u32> = HashMap::new();
            let mut order: Vec<Signature> = Vec::new();
            let mut ids = Vec::with_capacity(rows.len() * m);
            let mut buf = vec![0u64; m];
            for &u in rows {
                let row = &color[u * m..(u + 1) * m];
                for v in 0..m {
                    for (w, slot) in buf.iter_mut().enumerate() {
                        *slot = row[w] as u64 * r64 + color[w * m + v] as u64;
                    }
                    buf.sort_unstable();
                    let mut rle: Vec<(u64, u32)> = Vec::new();
                    for &code in &buf {
                        match rle.last_mut() {
                            Some((c, n)) if *c == code => *n += 1,
                            _ => rle.push((code, 1)),
                        }
                    }
                    let sig = (row[v], color[v * m + u], rle);
                    let id = match local.get(&sig) {
                        Some(&id) => id,
                        None => {
                            let id = order.len() as u32;
                            local.insert(sig.clone(), id);
                            order.push(sig);
                            id
                        }
                    };
                    ids.push(id);
                }
            }
            (order, ids)
        })
        .collect();

    let mut global: BTreeMap<&Signature, u32> = BTreeMap::new();
    for (order, _) in &chunks {
        for sig in order {
            global.insert(sig, 0);
        }
    }
    for (rank, slot) in global.values_mut().enumerate() {
        *slot = rank as u32;
    }
    let r_new = global.len();
    let mut out = Vec::with_capacity(m * m);
    for (order, ids) in &chunks {
        let remap: Vec<u32> = order.iter().map(|s| global[s]).collect();
        out.extend(ids.iter().map(|&i| remap[i as usize]));
    }
    (out, r_new)
}

/// Runs WL refinement from an initial coloring (with canonical ids) to the
/// coarsest coherent refinement.
pub(crate) fn refine_to_fixpoint(m: usize, initial: Vec<u32>) -> Configuration {
    let mut color = initial;
    let mut r = color.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    loop {
        let (next, r_next) = refine_round(m, &color, r);
        color = next;
        if r_next == r {
            break;
        }
        r = r_next;
    }
    Configuration::from_coloring(m, color).expect("refinement yields a valid coloring")
}

/// Cellular closure of a set of m×m matrices.
///
/// The initial color of (u, v) is the diagonal flag together with the
/// generator entries at (u, v) and at (v, u); rounds recolor by the sorted
/// multiset of (color(u,w), color(w,v)) until the partition is stable.
pub fn wl_closure(generators: &[RationalMatrix], m: usize) -> Result<Configuration, CellularError> {
    for (index, g) in generators.iter().enumerate() {
        if g.dim() != m {
            return Err(CellularError::GeneratorSize { index, expected: m, got: g.dim() });
        }
    }
    let mut keys = Vec::with_capacity(m * m);
    for u in 0..m {
        for v in 0..m {
            let here: Vec<&BigRational> = generators.iter().map(|g| &g[(u, v)]).collect();
            let there: Vec<&BigRational> = generators.iter().map(|g| &g[(v, u)]).collect();
            keys.push((u == v, here, there));
        }
    }
    let (initial, _) = canonical_ids(&keys);
    Ok(refine_to_fixpoint(m, initial))
}

/// Cellular closure [G] of a graph.
pub fn graph_closure(g: &Graph) -> Configuration {
    wl_closure(&[RationalMatrix::adjacency(g)], g.n()).expect("adjacency is n×n")
}

/// Coefficients a_R with mtx = Σ a_R·R, if mtx is constant on every class.
pub fn membership(mtx: &RationalMatrix, c: &Configuration) -> Option<Vec<BigRational>> {
    if mtx.dim() != c.m() {
        return None;
    }
    let mut coeffs: Vec<Option<&BigRational>> = vec![None; c.r()];
    for u in 0..c.m() {
        for v in 0..c.m() {
            let slot = &mut coeffs[c.color(u, v) as usize];
            let x = &mtx[(u, v)];
            match slot {
                None => *slot = Some(x),
                Some(prev) if *prev != x => return None,
                _ => {}
            }
        }
    }
    Some(coeffs.into_iter().map(|x| x.expect("every color is used").clone()).collect())
}

/// Cells of the configuration, one block per diagonal color (in color order).
pub fn cells(c: &Configuration) -> Vec<Vec<usize>> {
    c.diag_colors()
        .iter()
        .map(|&d| (0..c.m()).filter(|&u| c.color(u, u) == d).collect())
        .collect()
}

/// The diagonal relation I_d on vertices of degree `d`.
pub fn degree_identity(g: &Graph, c: &Configuration, d: usize) -> Result<Relation, CellularError> {
    let degs = g.degrees();
    let mut colors = Vec::new();
    for (cell, &dc) in cells(c).iter().zip(c.diag_colors()) {
        let hits = cell.iter().filter(|&&u| degs[u] == d).count();
        if hits == cell.len() {
            colors.push(dc);
        } else if hits > 0 {
            return Err(CellularError::CoherenceViolation {
                color: dc,
                detail: format!("cell mixes degree {d} with other degrees"),
            });
        }
    }
    if colors.is_empty() {
        return Err(CellularError::EmptyRelation(d));
    }
    Ok(Relation::new(colors))
}

/// Structure constants p[i][j][k] = #{w : color(u,w)=i, color(w,v)=j} for
/// any (u, v) of color k, stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionTensor {
    r: usize,
    by_k: Vec<Vec<(u32, u32, u32)>>,
}

impl IntersectionTensor {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: u32, j: u32, k: u32) -> u32 {
        let row = &self.by_k[k as usize];
        match row.binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j))) {
            Ok(pos) => row[pos].2,
            Err(_) => 0,
        }
    }

    /// Nonzero entries (i, j, p[i][j][k]) for a fixed k, sorted by (i, j).
    pub fn column(&self, k: u32) -> &[(u32, u32, u32)] {
        &self.by_k[k as usize]
    }
}

fn pair_counts(c: &Configuration, u: usize, v: usize) -> Vec<(u32, u32, u32)> {
    let mut codes: Vec<(u32, u32)> = (0..c.m()).map(|w| (c.color(u, w), c.color(w, v))).collect();
    codes.sort_unstable();
    let mut out: Vec<(u32, u32, u32)> = Vec::new();
    for (i, j) in codes {
        match out.last_mut() {
            Some((a, b, n)) if *a == i && *b == j => *n += 1,
            _ => out.push((i, j, 1)),
        }
    }
    out
}

const EXHAUSTIVE_COHERENCE_MAX_M: usize = 100;

/// Computes the intersection numbers from one representative per color and
/// cross-checks them: on every pair when m ≤ 100, otherwise on three random
/// pairs per color.
pub fn intersection_tensor(c: &Configuration) -> Result<IntersectionTensor, CellularError> {
    let by_k: Vec<Vec<(u32, u32, u32)>> = (0..c.r() as u32)
        .into_par_iter()
        .map(|k| {
            let (u, v) = c.representative(k);
            pair_counts(c, u, v)
        })
        .collect();
    let tensor = IntersectionTensor { r: c.r(), by_k };
    if c.m() <= EXHAUSTIVE_COHERENCE_MAX_M {
        verify_coherence_exhaustive(c, &tensor)?;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for k in 0..c.r() as u32 {
            let members: Vec<(usize, usize)> = c.members(k).collect();
            for _ in 0..3 {
                let (u, v) = members[rng.gen_range(0..members.len())];
                if pair_counts(c, u, v) != tensor.by_k[k as usize] {
                    return Err(CellularError::CoherenceViolation {
                        color: k,
                        detail: format!("pair ({u},{v}) disagrees with the representative"),
                    });
                }
            }
        }
    }
    Ok(tensor)
}

/// Checks every pair of every class against the tensor.
pub fn verify_coherence_exhaustive(c: &Configuration, t: &IntersectionTensor) -> Result<(), CellularError> {
    let m = c.m();
    (0..m).into_par_iter().try_for_each(|u| {
        for v in 0..m {
            let k = c.color(u, v);
            if pair_counts(c, u, v) != t.by_k[k as usize] {
                return Err(CellularError::CoherenceViolation {
                    color: k,
                    detail: format!("pair ({u},{v}) disagrees with the representative"),
                });
            }
        }
        Ok(())
    })
}

/// Bijection between the colors of two configurations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeakIso {
    pub map: Vec<u32>,
}

impl WeakIso {
    pub fn identity(r: usize) -> Self {
        WeakIso { map: (0..r as u32).collect() }
    }

    pub fn image(&self, c: u32) -> u32 {
        self.map[c as usize]
    }
}

/// Bounds for weak-isomorphism search.
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    pub max_colors: usize,
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_colors: 64, max_nodes: 10_000_000 }
    }
}

/// A condition a candidate weak isomorphism fails.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IsoViolation {
    #[error("bijection: {0}")]
    Bijection(String),
    #[error("diagonal: color {0} and its image disagree on being diagonal")]
    Diagonal(u32),
    #[error("class size: color {color} has {left} pairs, its image {right}")]
    ClassSize { color: u32, left: usize, right: usize },
    #[error("conjugation: image of the transpose of color {0} is not the transpose of its image")]
    Conjugation(u32),
    #[error("anchor {0} is not mapped onto its required image")]
    Anchor(usize),
    #[error("intersection numbers differ at ({i},{j},{k})")]
    IntersectionNumbers { i: u32, j: u32, k: u32 },
    #[error("trace: color {0}")]
    Trace(u32),
    #[error("cell size: diagonal color {0}")]
    CellSize(u32),
}

impl IsoViolation {
    /// Short name of the violated condition.
    pub fn name(&self) -> &'static str {
        match self {
            IsoViolation::Bijection(_) => "bijection",
            IsoViolation::Diagonal(_) => "diagonal",
            IsoViolation::ClassSize { .. } => "class-size",
            IsoViolation::Conjugation(_) => "conjugation",
            IsoViolation::Anchor(_) => "anchor",
            IsoViolation::IntersectionNumbers { .. } => "intersection-numbers",
            IsoViolation::Trace(_) => "trace",
            IsoViolation::CellSize(_) => "cell-size",
        }
    }
}

/// Checks that `w` is a weak isomorphism from `c` to `c2` respecting the
/// anchors, including trace and cell-size preservation.
pub fn verify_weak_iso(
    c: &Configuration,
    c2: &Configuration,
    w: &WeakIso,
    anchors: &[(Relation, Relation)],
) -> Result<(), IsoViolation> {
    let r = c.r();
    if w.map.len() != r || c2.r() != r {
        return Err(IsoViolation::Bijection(format!("{} colors mapped onto {}", r, c2.r())));
    }
    let mut hit = vec![false; r];
    for &x in &w.map {
        if x as usize >= r || std::mem::replace(&mut hit[x as usize], true) {
            return Err(IsoViolation::Bijection(format!("color {x} hit twice or out of range")));
        }
    }
    for i in 0..r as u32 {
        if c.is_diag(i) != c2.is_diag(w.image(i)) {
            return Err(IsoViolation::Diagonal(i));
        }
    }
    for i in 0..r as u32 {
        let (left, right) = (c.class_size(i), c2.class_size(w.image(i)));
        if left != right {
            return Err(IsoViolation::ClassSize { color: i, left, right });
        }
    }
    for i in 0..r as u32 {
        if w.image(c.transpose_of(i)) != c2.transpose_of(w.image(i)) {
            return Err(IsoViolation::Conjugation(i));
        }
    }
    for (idx, (a, b)) in anchors.iter().enumerate() {
        if &a.map(w) != b {
            return Err(IsoViolation::Anchor(idx));
        }
    }
    let (t1, t2) = match (intersection_tensor(c), intersection_tensor(c2)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(IsoViolation::IntersectionNumbers { i: 0, j: 0, k: 0 }),
    };
    for k in 0..r as u32 {
        let mut mapped: Vec<(u32, u32, u32)> =
            t1.column(k).iter().map(|&(i, j, n)| (w.image(i), w.image(j), n)).collect();
        mapped.sort_unstable();
        if mapped.as_slice() != t2.column(w.image(k)) {
            let (i, j) = first_tensor_difference(&mapped, t2.column(w.image(k)), w);
            return Err(IsoViolation::IntersectionNumbers { i, j, k });
        }
    }
    for i in 0..r as u32 {
        if c.trace(i) != c2.trace(w.image(i)) {
            return Err(IsoViolation::Trace(i));
        }
    }
    let cell_sizes = |cfg: &Configuration| -> HashMap<u32, usize> {
        cfg.diag_colors().iter().map(|&d| (d, (0..cfg.m()).filter(|&u| cfg.color(u, u) == d).count())).collect()
    };
    let (s1, s2) = (cell_sizes(c), cell_sizes(c2));
    for &d in c.diag_colors() {
        if s1[&d] != s2[&w.image(d)] {
            return Err(IsoViolation::CellSize(d));
        }
    }
    Ok(())
}

fn first_tensor_difference(mapped: &[(u32, u32, u32)], target: &[(u32, u32, u32)], w: &WeakIso) -> (u32, u32) {
    let inverse = |x: u32| w.map.iter().position(|&y| y == x).unwrap_or(0) as u32;
    for (a, b) in mapped.iter().zip(target) {
        if a != b {
            let (i, j) = if (a.0, a.1) <= (b.0, b.1) { (a.0, a.1) } else { (b.0, b.1) };
            return (inverse(i), inverse(j));
        }
    }
    let extra = if mapped.len() > target.len() { mapped[target.len()] } else { target[mapped.len()] };
    (inverse(extra.0), inverse(extra.1))
}

/// Per-color data a weak isomorphism must preserve; colors are only ever
/// matched to colors with an equal profile.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ColorProfile {
    size: usize,
    diag: bool,
    symmetric: bool,
    anchors: Vec<usize>,
    column: Vec<u32>,
    row: Vec<u32>,
}

struct SearchSide<'a> {
    cfg: &'a Configuration,
    tensor: IntersectionTensor,
    // entries (j, k, n) with i fixed, and (i, k, n) with j fixed
    by_i: Vec<Vec<(u32, u32, u32)>>,
    by_j: Vec<Vec<(u32, u32, u32)>>,
    profiles: Vec<ColorProfile>,
}

impl<'a> SearchSide<'a> {
    fn new(cfg: &'a Configuration, anchors: &[&Relation]) -> Result<Self, CellularError> {
        let tensor = intersection_tensor(cfg)?;
        let r = cfg.r();
        let mut by_i = vec![Vec::new(); r];
        let mut by_j = vec![Vec::new(); r];
        for k in 0..r as u32 {
            for &(i, j, n) in tensor.column(k) {
                by_i[i as usize].push((j, k, n));
                by_j[j as usize].push((i, k, n));
            }
        }
        let profiles = (0..r as u32)
            .map(|x| {
                let mut column: Vec<u32> = tensor.column(x).iter().map(|e| e.2).collect();
                column.sort_unstable();
                let mut row: Vec<u32> = by_i[x as usize].iter().map(|e| e.2).collect();
                row.sort_unstable();
                ColorProfile {
                    size: cfg.class_size(x),
                    diag: cfg.is_diag(x),
                    symmetric: cfg.transpose_of(x) == x,
                    anchors: anchors.iter().enumerate().filter(|(_, a)| a.contains(x)).map(|(i, _)| i).collect(),
                    column,
                    row,
                }
            })
            .collect();
        Ok(SearchSide { cfg, tensor, by_i, by_j, profiles })
    }
}

/// Backtracking search for color bijections preserving diagonal colors,
/// class sizes, transposition, anchors and all intersection numbers.
pub struct WeakIsoSearch<'a> {
    left: SearchSide<'a>,
    right: SearchSide<'a>,
    anchors: Vec<(Relation, Relation)>,
    order: Vec<u32>,
    candidates: Vec<Vec<u32>>,
    forward: Vec<u32>,
    backward: Vec<u32>,
    limits: SearchLimits,
    explored: u64,
    depth_reached: usize,
    feasible: bool,
}

const UNSET: u32 = u32::MAX;

impl<'a> WeakIsoSearch<'a> {
    pub fn new(
        c: &'a Configuration,
        c2: &'a Configuration,
        anchors: &[(Relation, Relation)],
        limits: SearchLimits,
    ) -> Result<Self, CellularError> {
        let r = c.r();
        if r > limits.max_colors || c2.r() > limits.max_colors {
            return Err(CellularError::TooManyColors { r: r.max(c2.r()), bound: limits.max_colors });
        }
        let left_anchors: Vec<&Relation> = anchors.iter().map(|(a, _)| a).collect();
        let right_anchors: Vec<&Relation> = anchors.iter().map(|(_, b)| b).collect();
        let left = SearchSide::new(c, &left_anchors)?;
        let right = SearchSide::new(c2, &right_anchors)?;

        let mut feasible = c.m() == c2.m() && r == c2.r();
        let mut candidates = vec![Vec::new(); r];
        if feasible {
            let mut groups: BTreeMap<&ColorProfile, Vec<u32>> = BTreeMap::new();
            for (y, p) in right.profiles.iter().enumerate() {
                groups.entry(p).or_default().push(y as u32);
            }
            for x in 0..r {
                let mut cand = groups.get(&left.profiles[x]).cloned().unwrap_or_default();
                // same canonical id first, then ascending ids
                cand.sort_by_key(|&y| (y != x as u32, y));
                if cand.is_empty() {
                    feasible = false;
                }
                candidates[x] = cand;
            }
            let mut lp: Vec<&ColorProfile> = left.profiles.iter().collect();
            let mut rp: Vec<&ColorProfile> = right.profiles.iter().collect();
            lp.sort();
            rp.sort();
            feasible &= lp == rp;
        }
        let mut order: Vec<u32> = (0..r as u32).collect();
        order.sort_by_key(|&x| (candidates[x as usize].len(), x));
        Ok(WeakIsoSearch {
            left,
            right,
            anchors: anchors.to_vec(),
            order,
            candidates,
            forward: vec![UNSET; r],
            backward: vec![UNSET; c2.r()],
            limits,
            explored: 0,
            depth_reached: 0,
            feasible,
        })
    }

    pub fn explored(&self) -> u64 {
        self.explored
    }

    /// Visits every solution until `visit` breaks. Returns the number of
    /// solutions visited.
    pub fn run(&mut self, mut visit: impl FnMut(&WeakIso) -> ControlFlow<()>) -> Result<usize, CellularError> {
        if !self.feasible {
            return Ok(0);
        }
        let mut found = 0;
        let _ = self.descend(0, &mut visit, &mut found)?;
        Ok(found)
    }

    fn descend(
        &mut self,
        pos: usize,
        visit: &mut impl FnMut(&WeakIso) -> ControlFlow<()>,
        found: &mut usize,
    ) -> Result<ControlFlow<()>, CellularError> {
        let r = self.order.len();
        self.depth_reached = self.depth_reached.max(pos);
        let Some(next) = (pos..r).find(|&p| self.forward[self.order[p] as usize] == UNSET) else {
            let iso = WeakIso { map: self.forward.clone() };
            debug_assert!(verify_weak_iso(self.left.cfg, self.right.cfg, &iso, &self.anchors).is_ok());
            *found += 1;
            return Ok(visit(&iso));
        };
        let x = self.order[next];
        let cands = self.candidates[x as usize].clone();
        for y in cands {
            if self.backward[y as usize] != UNSET {
                continue;
            }
            self.explored += 1;
            if self.explored > self.limits.max_nodes {
                return Err(CellularError::NodeBudget { explored: self.explored - 1, depth: self.depth_reached, r });
            }
            let assigned = self.assign(x, y);
            if let Some(new) = assigned {
                if self.consistent(&new) {
                    if let ControlFlow::Break(()) = self.descend(next + 1, visit, found)? {
                        self.unassign(&new);
                        return Ok(ControlFlow::Break(()));
                    }
                }
                self.unassign(&new);
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    /// Assigns x ↦ y and xᵀ ↦ yᵀ. Returns the newly assigned colors.
    fn assign(&mut self, x: u32, y: u32) -> Option<Vec<u32>> {
        let xt = self.left.cfg.transpose_of(x);
        let yt = self.right.cfg.transpose_of(y);
        if xt == x {
            self.forward[x as usize] = y;
            self.backward[y as usize] = x;
            return Some(vec![x]);
        }
        if self.forward[xt as usize] != UNSET || self.backward[yt as usize] != UNSET {
            return None;
        }
        if !self.candidates[xt as usize].contains(&yt) {
            return None;
        }
        self.forward[x as usize] = y;
        self.backward[y as usize] = x;
        self.forward[xt as usize] = yt;
        self.backward[yt as usize] = xt;
        Some(vec![x, xt])
    }

    fn unassign(&mut self, new: &[u32]) {
        for &x in new {
            let y = self.forward[x as usize];
            self.forward[x as usize] = UNSET;
            self.backward[y as usize] = UNSET;
        }
    }

    /// Compares every intersection number whose three colors are assigned
    /// and that involves a newly assigned color, from both sides.
    fn consistent(&self, new: &[u32]) -> bool {
        let f = &self.forward;
        let b = &self.backward;
        for &x in new {
            let y = f[x as usize];
            // left → right
            for &(i, j, n) in self.left.tensor.column(x) {
                let (fi, fj) = (f[i as usize], f[j as usize]);
                if fi != UNSET && fj != UNSET && self.right.tensor.get(fi, fj, y) != n {
                    return false;
                }
            }
            for &(j, k, n) in &self.left.by_i[x as usize] {
                let (fj, fk) = (f[j as usize], f[k as usize]);
                if fj != UNSET && fk != UNSET && self.right.tensor.get(y, fj, fk) != n {
                    return false;
                }
            }
            for &(i, k, n) in &self.left.by_j[x as usize] {
                let (fi, fk) = (f[i as usize], f[k as usize]);
                if fi != UNSET && fk != UNSET && self.right.tensor.get(fi, y, fk) != n {
                    return false;
                }
            }
            // right → left
            for &(i, j, n) in self.right.tensor.column(y) {
                let (bi, bj) = (b[i as usize], b[j as usize]);
                if bi != UNSET && bj != UNSET && self.left.tensor.get(bi, bj, x) != n {
                    return false;
                }
            }
            for &(j, k, n) in &self.right.by_i[y as usize] {
                let (bj, bk) = (b[j as usize], b[k as usize]);
                if bj != UNSET && bk != UNSET && self.left.tensor.get(x, bj, bk) != n {
                    return false;
                }
            }
            for &(i, k, n) in &self.right.by_j[y as usize] {
                let (bi, bk) = (b[i as usize], b[k as usize]);
                if bi != UNSET && bk != UNSET && self.left.tensor.get(bi, x, bk) != n {
                    return false;
                }
            }
        }
        true
    }
}

/// First weak isomorphism from `c` to `c2` mapping each anchor relation
/// onto its partner, or `None` after exhaustive search.
pub fn weak_iso_search(
    c: &Configuration,
    c2: &Configuration,
    anchors: &[(Relation, Relation)],
    limits: SearchLimits,
) -> Result<Option<WeakIso>, CellularError> {
    let mut search = WeakIsoSearch::new(c, c2, anchors, limits)?;
    let mut result = None;
    search.run(|w| {
        result = Some(w.clone());
        ControlFlow::Break(())
    })?;
    Ok(result)
}

/// All anchored weak isomorphisms; only offered for r ≤ 8.
pub fn all_weak_isos(
    c: &Configuration,
    c2: &Configuration,
    anchors: &[(Relation, Relation)],
) -> Result<Vec<WeakIso>, CellularError> {
    const UNIQUENESS_MAX_COLORS: usize = 8;
    if c.r() > UNIQUENESS_MAX_COLORS {
        return Err(CellularError::TooManyColors { r: c.r(), bound: UNIQUENESS_MAX_COLORS });
    }
    let mut search = WeakIsoSearch::new(c, c2, anchors, SearchLimits::default())?;
    let mut out = Vec::new();
    search.run(|w| {
        out.push(w.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Equivalence anchors (A, A′) for two graphs and their closures.
pub fn adjacency_anchor(
    g: &Graph,
    c: &Configuration,
    g2: &Graph,
    c2: &Configuration,
) -> Result<(Relation, Relation), CellularError> {
    Ok((
        Relation::from_matrix(c, &RationalMatrix::adjacency(g))?,
        Relation::from_matrix(c2, &RationalMatrix::adjacency(g2))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::{complete, cycle, path, petersen, rook, shrikhande, star};

    fn closure(g: &Graph) -> Configuration {
        graph_closure(g)
    }

    #[test]
    fn closure_sizes() {
        for n in 2..6 {
            assert_eq!(closure(&complete(n)).r(), 2);
        }
        let c5 = closure(&cycle(5));
        assert_eq!(c5.r(), 3);
        assert_eq!(c5.diag_colors().len(), 1);
        assert_eq!(closure(&path(3)).r(), 5);
        assert_eq!(closure(&path(3)).diag_colors().len(), 2);
    }

    #[test]
    fn membership_examples() {
        let g = cycle(5);
        let c = closure(&g);
        let ones = membership(&RationalMatrix::ones(5), &c).unwrap();
        assert!(ones.iter().all(One::is_one));
        let a = RationalMatrix::adjacency(&g);
        let coeffs = membership(&a, &c).unwrap();
        for (col, x) in coeffs.iter().enumerate() {
            let (u, v) = c.representative(col as u32);
            assert_eq!(x.is_one(), g.has_edge(u, v));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let random = RationalMatrix::from_i64(5, |_, _| rng.gen_range(0..2));
        assert!(membership(&random, &c).is_none());
    }

    #[test]
    fn cells_examples() {
        assert_eq!(cells(&closure(&complete(4))), vec![vec![0, 1, 2, 3]]);
        let mut p3 = cells(&closure(&path(3)));
        p3.sort();
        assert_eq!(p3, vec![vec![0, 2], vec![1]]);
        let mut st = cells(&closure(&star(4)));
        st.sort();
        assert_eq!(st, vec![vec![0], vec![1, 2, 3]]);
    }

    #[test]
    fn degree_identity_examples() {
        let g = cycle(6);
        let c = closure(&g);
        assert_eq!(degree_identity(&g, &c, 2).unwrap(), Relation::identity(&c));
        let s = star(4);
        let cs = closure(&s);
        let centre = degree_identity(&s, &cs, 3).unwrap();
        assert_eq!(centre.colors(), &[cs.color(0, 0)]);
        assert_eq!(degree_identity(&s, &cs, 2).unwrap_err(), CellularError::EmptyRelation(2));
    }

    #[test]
    fn tensor_examples() {
        let g = cycle(5);
        let c = closure(&g);
        let t = intersection_tensor(&c).unwrap();
        let a = c.color(0, 1);
        let non = c.color(0, 2);
        let id = c.color(0, 0);
        assert_eq!(t.get(a, a, non), 1);
        assert_eq!(t.get(a, a, id), 2);
        let k3 = closure(&complete(3));
        let t3 = intersection_tensor(&k3).unwrap();
        let off = k3.color(0, 1);
        assert_eq!(t3.get(off, off, k3.color(0, 0)), 2);
    }

    #[test]
    fn tensor_transpose_symmetry() {
        for g in [path(4), star(5), petersen()] {
            let c = closure(&g);
            let t = intersection_tensor(&c).unwrap();
            for k in 0..c.r() as u32 {
                for &(i, j, n) in t.column(k) {
                    assert_eq!(t.get(c.transpose_of(j), c.transpose_of(i), c.transpose_of(k)), n);
                }
            }
        }
    }

    #[test]
    fn weak_iso_examples() {
        let g = cycle(5);
        let c = closure(&g);
        let anchor = adjacency_anchor(&g, &c, &g, &c).unwrap();
        let w = weak_iso_search(&c, &c, std::slice::from_ref(&anchor), SearchLimits::default()).unwrap().unwrap();
        assert_eq!(w, WeakIso::identity(3));
        assert!(verify_weak_iso(&c, &c, &w, &[anchor]).is_ok());

        let (r4, sh) = (rook(4), shrikhande());
        let (cr, cs) = (closure(&r4), closure(&sh));
        let anchor = adjacency_anchor(&r4, &cr, &sh, &cs).unwrap();
        let w = weak_iso_search(&cr, &cs, std::slice::from_ref(&anchor), SearchLimits::default()).unwrap().unwrap();
        assert!(verify_weak_iso(&cr, &cs, &w, &[anchor]).is_ok());
        for col in 0..3 {
            assert_eq!(cr.trace(col), cs.trace(w.image(col)));
        }

        let (g4, c4) = (cycle(4), closure(&cycle(4)));
        let anchor = adjacency_anchor(&g4, &c4, &g, &c).unwrap();
        assert_eq!(weak_iso_search(&c4, &c, &[anchor], SearchLimits::default()).unwrap(), None);
    }

    #[test]
    fn conjugation_violation_is_named() {
        let c = closure(&path(3));
        let em = c.color(0, 1);
        let ee = c.color(0, 2);
        let mut map: Vec<u32> = (0..c.r() as u32).collect();
        map.swap(em as usize, ee as usize);
        let err = verify_weak_iso(&c, &c, &WeakIso { map }, &[]).unwrap_err();
        assert_eq!(err.name(), "conjugation");
    }

    #[test]
    fn equivalence_is_unique_for_small_closures() {
        for g in [cycle(5), path(4), petersen()] {
            let c = closure(&g);
            let anchor = adjacency_anchor(&g, &c, &g, &c).unwrap();
            assert_eq!(all_weak_isos(&c, &c, &[anchor]).unwrap().len(), 1);
        }
    }

    #[test]
    fn color_bound() {
        let c = closure(&path(9));
        let limits = SearchLimits { max_colors: 4, ..SearchLimits::default() };
        assert!(matches!(weak_iso_search(&c, &c, &[], limits), Err(CellularError::TooManyColors { .. })));
    }

    #[test]
    fn json_round_trip() {
        let c = closure(&path(4));
        let j = serde_json::to_string(&c.to_json()).unwrap();
        let back: ConfigurationJson = serde_json::from_str(&j).unwrap();
        assert_eq!(Configuration::from_json(&back).unwrap(), c);
    }
}
