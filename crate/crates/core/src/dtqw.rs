//! Discrete-time walk on the arcs of a graph: the transition matrix U, its
//! positive support and the exact spectrum of S⁺(U^k).

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::graphio::Graph;
use crate::linalg::{char_poly_exact, is_positive, mat_mul, mat_pow, CharPoly, RationalMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DtqwError {
    #[error("graph has no edges")]
    Edgeless,
    #[error("power must be at least 1")]
    ZeroPower,
    #[error("transition matrix check failed: {0}")]
    Invariant(String),
}

/// Arcs (tail, head) of the symmetric digraph D(G), sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcSpace {
    n: usize,
    arcs: Vec<(usize, usize)>,
    // index of arc (u, v) at u * n + v, usize::MAX if not an arc
    lookup: Vec<usize>,
}

impl ArcSpace {
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn index(&self, tail: usize, head: usize) -> Option<usize> {
        match self.lookup[tail * self.n + head] {
            usize::MAX => None,
            i => Some(i),
        }
    }

    /// Index of the reversed arc.
    pub fn reverse(&self, i: usize) -> usize {
        let (u, v) = self.arcs[i];
        self.index(v, u).expect("reverse of an arc is an arc")
    }
}

pub fn arc_space(g: &Graph) -> Result<ArcSpace, DtqwError> {
    let n = g.n();
    let mut arcs = Vec::with_capacity(2 * g.edge_count());
    for u in 0..n {
        for v in g.neighbors(u) {
            arcs.push((u, v));
        }
    }
    if arcs.is_empty() {
        return Err(DtqwError::Edgeless);
    }
    let mut lookup = vec![usize::MAX; n * n];
    for (i, &(u, v)) in arcs.iter().enumerate() {
        lookup[u * n + v] = i;
    }
    Ok(ArcSpace { n, arcs, lookup })
}

/// The arc-indexed transition matrix with its arc space.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub arcs: ArcSpace,
    pub u: RationalMatrix,
}

/// U_{wx,uv} = 2/deg(v) if v = w and u ≠ x; 2/deg(v) − 1 if v = w and
/// u = x; 0 otherwise. Orthogonality and unit column sums are checked.
pub fn transition_matrix(g: &Graph) -> Result<TransitionMatrix, DtqwError> {
    let arcs = arc_space(g)?;
    let size = arcs.len();
    let degs = g.degrees();
    let mut u = RationalMatrix::zeros(size);
    for (col, &(tail, head)) in arcs.arcs().iter().enumerate() {
        let d = degs[head] as i64;
        let coin = BigRational::new(2.into(), d.into());
        for x in g.neighbors(head) {
            let row = arcs.index(head, x).expect("arc");
            u[(row, col)] = if x == tail { &coin - BigRational::one() } else { coin.clone() };
        }
    }
    let t = TransitionMatrix { arcs, u };
    t.check_invariants()?;
    Ok(t)
}

impl TransitionMatrix {
    pub fn check_invariants(&self) -> Result<(), DtqwError> {
        let n = self.u.dim();
        for col in 0..n {
            let s: BigRational = (0..n).map(|row| self.u[(row, col)].clone()).sum();
            if !s.is_one() {
                return Err(DtqwError::Invariant(format!("column {col} sums to {s}")));
            }
        }
        let uut = mat_mul(&self.u, &self.u.transpose()).expect("square");
        if uut != RationalMatrix::identity(n) {
            return Err(DtqwError::Invariant("U·Uᵀ ≠ I".into()));
        }
        Ok(())
    }
}

/// S⁺(M): 1 where M > 0, else 0. Exact.
pub fn positive_support(m: &RationalMatrix) -> RationalMatrix {
    RationalMatrix::from_i64(m.dim(), |i, j| is_positive(&m[(i, j)]) as i64)
}

/// Exact characteristic polynomial of S⁺(U^power) on the arc space.
pub fn support_spectrum_invariant(g: &Graph, power: u32) -> Result<CharPoly, DtqwError> {
    if power == 0 {
        return Err(DtqwError::ZeroPower);
    }
    let t = transition_matrix(g)?;
    Ok(char_poly_exact(&positive_support(&mat_pow(&t.u, power))))
}

/// Embeds an arc-indexed matrix into V² (pair (u, v) at index u·n + v),
/// zero elsewhere.
pub fn arc_matrix_to_pairs(m: &RationalMatrix, g: &Graph) -> Result<RationalMatrix, DtqwError> {
    let arcs = arc_space(g)?;
    assert_eq!(m.dim(), arcs.len(), "matrix is not indexed by the arcs of g");
    let n = g.n();
    let mut out = RationalMatrix::zeros(n * n);
    for (a, &(x1, x2)) in arcs.arcs().iter().enumerate() {
        for (b, &(y1, y2)) in arcs.arcs().iter().enumerate() {
            let v = &m[(a, b)];
            if !v.is_zero() {
                out[(x1 * n + x2, y1 * n + y2)] = v.clone();
            }
        }
    }
    Ok(out)
}
