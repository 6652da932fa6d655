//! Continuous-time k-Boson walk: Hamiltonian assembly on V^k, the unitary
//! e^{-itH} through an eigendecomposition, and the multiset of its entries
//! used as a graph invariant.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use num_complex::Complex64;
use serde::ser::{Serialize, Serializer};
use thiserror::Error;

use crate::extension::{max_points, TupleSpace};
use crate::graphio::Graph;
use crate::linalg::{jacobi_eigh, EigenDecomposition, LinalgError, RealMatrix, JACOBI_DEFAULT_TOL};

pub const DEFAULT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_U: f64 = 1.0;
pub const DEFAULT_GRID: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;
const COMMUTATION_TOL: f64 = 1e-10;
const UNITARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CtqwError {
    #[error("{n}^{k} basis states exceed the cap of {cap} (set CELLWALK_MAX_POINTS to raise it)")]
    TooLarge { n: usize, k: usize, cap: usize },
    #[error("unknown penalty '{0}' (expected none, pair or hubbard)")]
    UnknownPenalty(String),
    #[error("{0} is not a permutation of 0..{1}")]
    BadPermutation(String, usize),
    #[error("Hamiltonian check failed: {0}")]
    Invariant(String),
    #[error("evolution not unitary: ‖GG† − I‖ = {0:e}")]
    NotUnitary(f64),
    #[error("Taylor series not converging: ‖H‖·|t|/terms = {ratio}")]
    Divergent { ratio: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Basis states of k particles on n vertices; same indexing as the tuple
/// space of the k-extension.
pub type ProductBasis = TupleSpace;

fn product_basis(n: usize, k: usize) -> Result<ProductBasis, CtqwError> {
    TupleSpace::new(n, k).map_err(|_| CtqwError::TooLarge { n, k, cap: max_points() })
}

/// Dense complex square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_parts(re: &RealMatrix, im: &RealMatrix) -> Self {
        assert_eq!(re.dim(), im.dim());
        let data = re.data().iter().zip(im.data()).map(|(&a, &b)| Complex64::new(a, b)).collect();
        ComplexMatrix { dim: re.dim(), data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        assert_eq!(n, other.dim);
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out.data[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// max |a_ij − b_ij|
    pub fn max_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// ‖G·G† − I‖_max
    pub fn unitarity_defect(&self) -> f64 {
        self.matmul(&self.adjoint()).max_diff(&Self::identity(self.dim))
    }

    /// P·G·Pᵀ for the permutation sending index i to pi[i].
    pub fn permuted(&self, pi: &[usize]) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(pi[i], pi[j])] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| format!("{:.6}", self[(i, j)])).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// A^{⊕k}: the sum of the k Kronecker terms I⊗…⊗A⊗…⊗I.
pub fn a_oplus_k(a: &RealMatrix, k: usize) -> Result<RealMatrix, CtqwError> {
    let n = a.dim();
    let basis = product_basis(n, k)?;
    let size = basis.size();
    let mut out = RealMatrix::zeros(size);
    let stride: Vec<usize> = (0..k).map(|i| n.pow((k - 1 - i) as u32)).collect();
    for x in 0..size {
        let xs = basis.decode(x);
        for (slot, &xi) in xs.iter().enumerate() {
            let base = x - xi * stride[slot];
            for y in 0..n {
                let w = a[(xi, y)];
                if w != 0.0 {
                    out[(x, base + y * stride[slot])] += w;
                }
            }
        }
    }
    Ok(out)
}

fn check_sigma(sigma: &[usize], k: usize) -> Result<(), CtqwError> {
    let mut seen = vec![false; k];
    let ok = sigma.len() == k && sigma.iter().all(|&s| s < k && !std::mem::replace(&mut seen[s], true));
    if ok {
        Ok(())
    } else {
        Err(CtqwError::BadPermutation(format!("{sigma:?}"), k))
    }
}

/// Index map of the coordinate permutation x̄ ↦ x̄∘σ⁻¹, i.e. the value in
/// slot i moves to slot σ(i).
pub fn swap_permutation(sigma: &[usize], basis: &ProductBasis) -> Result<Vec<usize>, CtqwError> {
    check_sigma(sigma, basis.k())?;
    let mut y = vec![0; basis.k()];
    Ok((0..basis.size())
        .map(|idx| {
            let x = basis.decode(idx);
            for (i, &s) in sigma.iter().enumerate() {
                y[s] = x[i];
            }
            basis.encode(&y)
        })
        .collect())
}

/// Permutation matrix S_σ with S_σ e_x̄ = e_{x̄∘σ⁻¹}.
pub fn swap_operator(sigma: &[usize], basis: &ProductBasis) -> Result<RealMatrix, CtqwError> {
    let p = swap_permutation(sigma, basis)?;
    let mut s = RealMatrix::zeros(basis.size());
    for (x, &y) in p.iter().enumerate() {
        s[(y, x)] = 1.0;
    }
    Ok(s)
}

/// All permutations of 0..k in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    Pair,
    Hubbard,
}

impl FromStr for PenaltyKind {
    type Err = CtqwError;
    fn from_str(s: &str) -> Result<Self, CtqwError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(PenaltyKind::None),
            "pair" => Ok(PenaltyKind::Pair),
            "hubbard" => Ok(PenaltyKind::Hubbard),
            other => Err(CtqwError::UnknownPenalty(other.to_string())),
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::None => "none",
            PenaltyKind::Pair => "pair",
            PenaltyKind::Hubbard => "hubbard",
        })
    }
}

/// Interaction energy as a function of the occupation profile.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum PenaltySpec {
    /// One of the built-ins with strength U.
    Builtin { kind: PenaltyKind, u: f64 },
    /// Explicit energies keyed by occupation profile (nonzero counts,
    /// descending); missing profiles cost nothing.
    Table(BTreeMap<Vec<usize>, f64>),
}

impl PenaltySpec {
    pub fn none() -> Self {
        PenaltySpec::Builtin { kind: PenaltyKind::None, u: 0.0 }
    }

    pub fn pair(u: f64) -> Self {
        PenaltySpec::Builtin { kind: PenaltyKind::Pair, u }
    }

    pub fn hubbard(u: f64) -> Self {
        PenaltySpec::Builtin { kind: PenaltyKind::Hubbard, u }
    }

    pub fn energy(&self, profile: &[usize]) -> f64 {
        match self {
            PenaltySpec::Builtin { kind: PenaltyKind::None, .. } => 0.0,
            PenaltySpec::Builtin { kind: PenaltyKind::Pair, u } => {
                u * profile.iter().map(|&c| (c * c.saturating_sub(1) / 2) as f64).sum::<f64>()
            }
            PenaltySpec::Builtin { kind: PenaltyKind::Hubbard, u } => {
                u * profile.iter().map(|&c| (c * c) as f64).sum::<f64>()
            }
            PenaltySpec::Table(t) => t.get(profile).copied().unwrap_or(0.0),
        }
    }
}

/// Occupation profile of a state: particle counts per vertex, nonzero
/// ones only, in descending order.
pub fn occupation_profile(x: &[usize]) -> Vec<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in x {
        *counts.entry(v).or_default() += 1;
    }
    let mut p: Vec<usize> = counts.into_values().collect();
    p.sort_unstable_by(|a, b| b.cmp(a));
    p
}

#[derive(Clone, Debug)]
pub struct OccupationClasses {
    pub basis: ProductBasis,
    /// class index of every basis state
    pub class_of: Vec<usize>,
    /// occupation profile per class, in descending lexicographic order
    pub profiles: Vec<Vec<usize>>,
    pub penalties: Vec<f64>,
}

impl OccupationClasses {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        (0..self.class_of.len()).filter(|&x| self.class_of[x] == class).collect()
    }

    /// Penalty of each basis state.
    pub fn diagonal(&self) -> Vec<f64> {
        self.class_of.iter().map(|&c| self.penalties[c]).collect()
    }
}

pub fn occupation_classes(n: usize, k: usize, penalty: &PenaltySpec) -> Result<OccupationClasses, CtqwError> {
    let basis = product_basis(n, k)?;
    let state_profiles: Vec<Vec<usize>> = (0..basis.size()).map(|x| occupation_profile(&basis.decode(x))).collect();
    let mut distinct: Vec<Vec<usize>> = state_profiles.clone();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    let index: BTreeMap<&Vec<usize>, usize> = distinct.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let class_of = state_profiles.iter().map(|p| index[p]).collect();
    let penalties = distinct.iter().map(|p| penalty.energy(p)).collect();
    Ok(OccupationClasses { basis, class_of, profiles: distinct, penalties })
}

/// Real symmetric Hamiltonian on the product basis.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub h: RealMatrix,
    pub n: usize,
    pub k: usize,
    pub penalty: PenaltySpec,
}

/// H = −(1/k!)·(Σ_σ S_σ)·A^{⊕k} + Σ_i U_i R_i. Symmetry and commutation
/// with every particle swap are checked before returning.
pub fn hamiltonian_kboson(g: &Graph, k: usize, penalty: &PenaltySpec) -> Result<Hamiltonian, CtqwError> {
    let n = g.n();
    let adj = RealMatrix::from_fn(n, |i, j| g.has_edge(i, j) as u8 as f64);
    let hop = a_oplus_k(&adj, k)?;
    let classes = occupation_classes(n, k, penalty)?;
    let basis = classes.basis;
    let size = basis.size();
    let perms: Vec<Vec<usize>> =
        permutations(k).iter().map(|s| swap_permutation(s, &basis)).collect::<Result<_, _>>()?;
    let scale = -1.0 / perms.len() as f64;

    let mut h = RealMatrix::zeros(size);
    for p in &perms {
        // (S_σ M)[p(x)][y] = M[x][y]
        for x in 0..size {
            for y in 0..size {
                let w = hop[(x, y)];
                if w != 0.0 {
                    h[(p[x], y)] += scale * w;
                }
            }
        }
    }
    for (x, e) in classes.diagonal().into_iter().enumerate() {
        h[(x, x)] += e;
    }

    let asym = h.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(CtqwError::Invariant(format!("asymmetry {asym:e}")));
    }
    for p in &perms {
        let mut worst = 0.0f64;
        for x in 0..size {
            for y in 0..size {
                worst = worst.max((h[(p[x], p[y])] - h[(x, y)]).abs());
            }
        }
        if worst > COMMUTATION_TOL {
            return Err(CtqwError::Invariant(format!("swap commutator {worst:e}")));
        }
    }
    Ok(Hamiltonian { h, n, k, penalty: penalty.clone() })
}

/// Orthonormal basis of the bosonic sector: one column per multiset of
/// vertices, the normalised sum of its distinct orderings.
pub fn symmetric_basis(basis: &ProductBasis) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let mut orbits: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for x in 0..basis.size() {
        let mut key = basis.decode(x);
        key.sort_unstable();
        orbits.entry(key).or_default().push(x);
    }
    let size = basis.size();
    let mut keys = Vec::with_capacity(orbits.len());
    let mut cols = Vec::with_capacity(orbits.len());
    for (key, members) in orbits {
        let w = 1.0 / (members.len() as f64).sqrt();
        let mut col = vec![0.0; size];
        for x in members {
            col[x] = w;
        }
        keys.push(key);
        cols.push(col);
    }
    (keys, cols)
}

/// Bᵀ·H·B on the bosonic sector.
pub fn restrict_symmetric(h: &Hamiltonian) -> Result<RealMatrix, CtqwError> {
    let basis = product_basis(h.n, h.k)?;
    let (_, cols) = symmetric_basis(&basis);
    let m = cols.len();
    let size = basis.size();
    let support: Vec<Vec<(usize, f64)>> =
        cols.iter().map(|c| c.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, &w)| (i, w)).collect()).collect();
    let mut out = RealMatrix::zeros(m);
    for a in 0..m {
        for b in 0..m {
            let mut s = 0.0;
            for &(x, wx) in &support[a] {
                for &(y, wy) in &support[b] {
                    s += wx * h.h[(x, y)] * wy;
                }
            }
            out[(a, b)] = s;
        }
    }
    debug_assert!(size >= m);
    Ok(out)
}

/// V·diag(e^{−itλ})·Vᵀ from a precomputed eigendecomposition.
pub fn green_from_eigen(eig: &EigenDecomposition, t: f64) -> Result<ComplexMatrix, CtqwError> {
    if !t.is_finite() {
        return Err(CtqwError::Argument(format!("time {t} is not finite")));
    }
    let re = eig.reconstruct_with(|l| (t * l).cos());
    let im = eig.reconstruct_with(|l| -(t * l).sin());
    let g = ComplexMatrix::from_parts(&re, &im);
    let defect = g.unitarity_defect();
    if defect > UNITARITY_TOL {
        return Err(CtqwError::NotUnitary(defect));
    }
    Ok(g)
}

/// e^{−itH} for a real symmetric H.
pub fn green_functions(h: &RealMatrix, t: f64, tol: f64) -> Result<ComplexMatrix, CtqwError> {
    green_from_eigen(&jacobi_eigh(h, tol)?, t)
}

fn row_sum_norm(h: &RealMatrix) -> f64 {
    (0..h.dim()).map(|i| h.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Partial sum of Σ_j (−itH)^j / j! over the first `terms` terms. Test
/// oracle only.
pub fn taylor_green_oracle(h: &RealMatrix, t: f64, terms: usize) -> Result<ComplexMatrix, CtqwError> {
    if terms == 0 {
        return Err(CtqwError::Argument("terms must be at least 1".into()));
    }
    let ratio = row_sum_norm(h) * t.abs() / terms as f64;
    if ratio >= 1.0 {
        return Err(CtqwError::Divergent { ratio });
    }
    let n = h.dim();
    let th = RealMatrix::from_vec(n, h.data().iter().map(|x| x * t).collect());
    let mut re = RealMatrix::identity(n);
    let mut im = RealMatrix::zeros(n);
    let mut term = RealMatrix::identity(n);
    for j in 1..terms {
        term = term.matmul(&th);
        let inv = 1.0 / j as f64;
        let (target, sign) = match j % 4 {
            0 => (&mut re, 1.0),
            1 => (&mut im, -1.0),
            2 => (&mut re, -1.0),
            _ => (&mut im, 1.0),
        };
        for i in 0..n {
            for c in 0..n {
                let v = term[(i, c)] * inv;
                term[(i, c)] = v;
                target[(i, c)] += sign * v;
            }
        }
    }
    Ok(ComplexMatrix::from_parts(&re, &im))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GreenEntry {
    pub re: f64,
    pub im: f64,
    pub mult: usize,
}

/// Entries of a Green matrix rounded to a square grid of spacing `tol`,
/// with multiplicities. Serialises as a list of {re, im, mult}.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenMultiset {
    tol: f64,
    cells: Vec<((i64, i64), usize)>,
}

impl GreenMultiset {
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn cells(&self) -> &[((i64, i64), usize)] {
        &self.cells
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.1).sum()
    }

    /// Grid value of a cell coordinate; divides by 1/tol when that is an
    /// integer so that 1e-8 grids print without float noise.
    fn value(&self, c: i64) -> f64 {
        let inv = (1.0 / self.tol).round();
        let v = if (inv * self.tol - 1.0).abs() < 1e-12 { c as f64 / inv } else { c as f64 * self.tol };
        v + 0.0
    }

    pub fn entries(&self) -> Vec<GreenEntry> {
        self.cells.iter().map(|&((a, b), mult)| GreenEntry { re: self.value(a), im: self.value(b), mult }).collect()
    }
}

impl Serialize for GreenMultiset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.entries())
    }
}

pub fn green_multiset(gm: &ComplexMatrix, tol: f64) -> GreenMultiset {
    assert!(tol > 0.0, "grid spacing must be positive");
    let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for z in gm.entries() {
        *counts.entry(((z.re / tol).round() as i64, (z.im / tol).round() as i64)).or_default() += 1;
    }
    GreenMultiset { tol, cells: counts.into_iter().collect() }
}

/// First point where two multisets disagree.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MultisetDiff {
    pub re: f64,
    pub im: f64,
    pub mult_a: usize,
    pub mult_b: usize,
}

/// Compares two multisets on the same grid. Cells that fail to cancel
/// exactly may still be matched against a neighbouring cell (rounding
/// jitter at a cell boundary); anything left over is a genuine difference.
pub fn compare_multisets(a: &GreenMultiset, b: &GreenMultiset) -> Option<MultisetDiff> {
    assert_eq!(a.tol, b.tol, "multisets on different grids");
    if a.cells == b.cells {
        return None;
    }
    let mut excess: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    for &(c, m) in &a.cells {
        *excess.entry(c).or_default() += m as i64;
    }
    for &(c, m) in &b.cells {
        *excess.entry(c).or_default() -= m as i64;
    }
    excess.retain(|_, v| *v != 0);
    let keys: Vec<(i64, i64)> = excess.keys().copied().collect();
    for key in keys {
        for dr in -1..=1 {
            for di in -1..=1 {
                let other = (key.0 + dr, key.1 + di);
                if other == key {
                    continue;
                }
                let (Some(&x), Some(&y)) = (excess.get(&key), excess.get(&other)) else { continue };
                if x.signum() * y.signum() < 0 {
                    let moved = x.abs().min(y.abs());
                    *excess.get_mut(&key).unwrap() -= x.signum() * moved;
                    *excess.get_mut(&other).unwrap() -= y.signum() * moved;
                }
            }
        }
    }
    let (&(re, im), _) = excess.iter().find(|(_, v)| **v != 0)?;
    let mult = |m: &GreenMultiset| m.cells.iter().find(|(c, _)| *c == (re, im)).map_or(0, |c| c.1);
    Some(MultisetDiff { re: a.value(re), im: a.value(im), mult_a: mult(a), mult_b: mult(b) })
}

/// Domain on which Green matrices are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    #[default]
    Product,
    Symmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkOptions {
    pub k: usize,
    pub penalty: PenaltySpec,
    pub times: Vec<f64>,
    pub tol: f64,
    pub basis: BasisMode,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions {
            k: 2,
            penalty: PenaltySpec::pair(DEFAULT_U),
            times: DEFAULT_TIMES.to_vec(),
            tol: DEFAULT_GRID,
            basis: BasisMode::Product,
        }
    }
}

/// Green multisets of one graph at each requested time.
pub fn green_invariant(g: &Graph, opts: &WalkOptions) -> Result<Vec<GreenMultiset>, CtqwError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(CtqwError::Argument(format!("grid spacing {} must be positive", opts.tol)));
    }
    let ham = hamiltonian_kboson(g, opts.k, &opts.penalty)?;
    let h = match opts.basis {
        BasisMode::Product => ham.h,
        BasisMode::Symmetric => restrict_symmetric(&ham)?,
    };
    let eig = jacobi_eigh(&h, JACOBI_DEFAULT_TOL)?;
    opts.times.iter().map(|&t| Ok(green_multiset(&green_from_eigen(&eig, t)?, opts.tol))).collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum WalkVerdict {
    Distinguished { time: Option<f64>, diff: Option<MultisetDiff> },
    Indistinguishable,
}

/// Compares the Green multisets of two graphs time by time.
pub fn distinguish(g: &Graph, g2: &Graph, opts: &WalkOptions) -> Result<WalkVerdict, CtqwError> {
    if g.n() != g2.n() {
        return Ok(WalkVerdict::Distinguished { time: None, diff: None });
    }
    let (a, b) = rayon::join(|| green_invariant(g, opts), || green_invariant(g2, opts));
    Ok(first_difference(&a?, &b?, &opts.times))
}

pub fn first_difference(a: &[GreenMultiset], b: &[GreenMultiset], times: &[f64]) -> WalkVerdict {
    for ((ma, mb), &t) in a.iter().zip(b).zip(times) {
        if let Some(diff) = compare_multisets(ma, mb) {
            return WalkVerdict::Distinguished { time: Some(t), diff: Some(diff) };
        }
    }
    WalkVerdict::Indistinguishable
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::{complete, cycle, permute_graph, star};

    fn adj(g: &Graph) -> RealMatrix {
        RealMatrix::from_fn(g.n(), |i, j| g.has_edge(i, j) as u8 as f64)
    }

    #[test]
    fn oplus_examples() {
        let a = adj(&complete(2));
        assert_eq!(a_oplus_k(&a, 1).unwrap(), a);
        let b = a_oplus_k(&a, 2).unwrap();
        for x in 0..4usize {
            for y in 0..4usize {
                let hamming = (x ^ y).count_ones();
                assert_eq!(b[(x, y)], (hamming == 1) as u8 as f64);
            }
        }
        let c = a_oplus_k(&adj(&cycle(4)), 2).unwrap();
        for i in 0..16 {
            assert_eq!(c.row(i).iter().sum::<f64>(), 4.0);
        }
    }

    #[test]
    fn swaps() {
        let basis = TupleSpace::new(2, 2).unwrap();
        assert_eq!(swap_operator(&[0, 1], &basis).unwrap(), RealMatrix::identity(4));
        let s = swap_operator(&[1, 0], &basis).unwrap();
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(3, 3)], 1.0);
        assert_eq!(s[(1, 2)], 1.0);
        assert_eq!(s[(2, 1)], 1.0);
        assert_eq!(s.matmul(&s), RealMatrix::identity(4));
        assert!(swap_operator(&[0, 0], &basis).is_err());

        let b3 = TupleSpace::new(3, 3).unwrap();
        let p = swap_permutation(&[1, 2, 0], &b3).unwrap();
        // (a, b, c) -> slot σ(i) receives x_i: (c, a, b)
        assert_eq!(b3.decode(p[b3.encode(&[0, 1, 2])]), vec![2, 0, 1]);
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn occupation_examples() {
        let c = occupation_classes(2, 2, &PenaltySpec::none()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.profiles, vec![vec![2], vec![1, 1]]);
        assert_eq!(c.members(0), vec![0, 3]);
        assert_eq!(c.members(1), vec![1, 2]);
        let c3 = occupation_classes(3, 2, &PenaltySpec::pair(1.0)).unwrap();
        assert_eq!((c3.members(0).len(), c3.members(1).len()), (3, 6));
        assert_eq!(c3.penalties, vec![1.0, 0.0]);
        assert_eq!(occupation_classes(5, 1, &PenaltySpec::none()).unwrap().len(), 1);
        let h = occupation_classes(3, 3, &PenaltySpec::hubbard(0.5)).unwrap();
        assert_eq!(h.profiles, vec![vec![3], vec![2, 1], vec![1, 1, 1]]);
        assert_eq!(h.penalties, vec![4.5, 2.5, 1.5]);
        assert_eq!(PenaltySpec::pair(2.0).energy(&[3]), 6.0);
        assert_eq!("Hubbard".parse::<PenaltyKind>().unwrap(), PenaltyKind::Hubbard);
        assert!("bose".parse::<PenaltyKind>().is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let g = cycle(5);
        let h = hamiltonian_kboson(&g, 1, &PenaltySpec::none()).unwrap();
        let minus_a = RealMatrix::from_fn(5, |i, j| -(g.has_edge(i, j) as u8 as f64));
        assert_eq!(h.h, minus_a);

        let h2 = hamiltonian_kboson(&complete(2), 2, &PenaltySpec::pair(1.0)).unwrap();
        // −½(I+S)A^{⊕2} + diag(1,0,0,1), worked by hand
        let hand = RealMatrix::from_fn(4, |i, j| {
            let hop = [[0.0, -1.0, -1.0, 0.0], [-1.0, 0.0, 0.0, -1.0], [-1.0, 0.0, 0.0, -1.0], [0.0, -1.0, -1.0, 0.0]];
            hop[i][j] + if i == j && (i == 0 || i == 3) { 1.0 } else { 0.0 }
        });
        assert_eq!(h2.h, hand);
    }

    #[test]
    fn green_examples() {
        let h = hamiltonian_kboson(&complete(2), 1, &PenaltySpec::none()).unwrap().h;
        let g0 = green_functions(&h, 0.0, 1e-12).unwrap();
        assert!(g0.max_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let z = green_functions(&RealMatrix::zeros(3), 1.7, 1e-12).unwrap();
        assert!(z.max_diff(&ComplexMatrix::identity(3)) < 1e-15);
        // H = −A, e^{itA} = cos t·I + i sin t·A
        let t = 0.8f64;
        let g = green_functions(&h, t, 1e-12).unwrap();
        assert!((g[(0, 0)] - Complex64::new(t.cos(), 0.0)).norm() < 1e-12);
        assert!((g[(0, 1)] - Complex64::new(0.0, t.sin())).norm() < 1e-12);
        // +A convention from the closed form
        let plus_a = RealMatrix::from_vec(2, vec![0.0, 1.0, 1.0, 0.0]);
        let g = green_functions(&plus_a, t, 1e-12).unwrap();
        assert!((g[(0, 1)] - Complex64::new(0.0, -t.sin())).norm() < 1e-12);
        assert!(green_functions(&h, f64::NAN, 1e-12).is_err());
    }

    #[test]
    fn taylor_examples() {
        let a = RealMatrix::from_vec(2, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(taylor_green_oracle(&a, 0.3, 1).unwrap(), ComplexMatrix::identity(2));
        let exact = green_functions(&a, 0.5, 1e-12).unwrap();
        assert!(taylor_green_oracle(&a, 0.5, 50).unwrap().max_diff(&exact) < 1e-10);
        assert!(matches!(taylor_green_oracle(&a, 100.0, 50), Err(CtqwError::Divergent { .. })));
        assert!(taylor_green_oracle(&a, 0.5, 0).is_err());
    }

    #[test]
    fn multiset_examples() {
        let m = green_multiset(&ComplexMatrix::identity(4), 1e-8);
        let e = m.entries();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].re, e[0].im, e[0].mult), (0.0, 0.0, 12));
        assert_eq!((e[1].re, e[1].im, e[1].mult), (1.0, 0.0, 4));
        assert_eq!(m.total(), 16);

        let a = RealMatrix::from_vec(2, vec![0.0, 1.0, 1.0, 0.0]);
        let g = green_functions(&a, std::f64::consts::FRAC_PI_2, 1e-12).unwrap();
        let e = green_multiset(&g, 1e-8).entries();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].re, e[0].im, e[0].mult), (0.0, -1.0, 2));
        assert_eq!((e[1].re, e[1].im, e[1].mult), (0.0, 0.0, 2));

        let h = hamiltonian_kboson(&star(4), 1, &PenaltySpec::none()).unwrap().h;
        let g = green_functions(&h, 1.3, 1e-12).unwrap();
        let pg = g.permuted(&[2, 0, 3, 1]);
        assert_eq!(compare_multisets(&green_multiset(&g, 1e-8), &green_multiset(&pg, 1e-8)), None);
        let json = serde_json::to_string(&green_multiset(&ComplexMatrix::identity(1), 1e-8)).unwrap();
        assert_eq!(json, r#"[{"re":1.0,"im":0.0,"mult":1}]"#);
    }

    #[test]
    fn jitter_across_a_cell_boundary() {
        let mut a = ComplexMatrix::identity(2);
        let mut b = ComplexMatrix::identity(2);
        a[(0, 1)] = Complex64::new(0.25 + 0.5e-8 - 1e-15, 0.0);
        b[(0, 1)] = Complex64::new(0.25 + 0.5e-8 + 1e-15, 0.0);
        let (ma, mb) = (green_multiset(&a, 1e-8), green_multiset(&b, 1e-8));
        assert_ne!(ma, mb);
        assert_eq!(compare_multisets(&ma, &mb), None);
        b[(0, 1)] = Complex64::new(0.3, 0.0);
        let d = compare_multisets(&ma, &green_multiset(&b, 1e-8)).unwrap();
        assert!(d.mult_a != d.mult_b);
    }

    #[test]
    fn relabelled_graph_is_indistinguishable() {
        let g = star(4);
        let g2 = permute_graph(&g, &[3, 1, 0, 2]).unwrap();
        let opts = WalkOptions::default();
        assert_eq!(distinguish(&g, &g2, &opts).unwrap(), WalkVerdict::Indistinguishable);
        let sym = WalkOptions { basis: BasisMode::Symmetric, ..opts.clone() };
        assert_eq!(distinguish(&g, &g2, &sym).unwrap(), WalkVerdict::Indistinguishable);
        assert!(matches!(
            distinguish(&g, &cycle(5), &opts).unwrap(),
            WalkVerdict::Distinguished { time: None, .. }
        ));
        assert!(matches!(
            distinguish(&g, &crate::graphio::path(4), &opts).unwrap(),
            WalkVerdict::Distinguished { time: Some(_), .. }
        ));
    }

    #[test]
    fn symmetric_sector_dimension() {
        let basis = TupleSpace::new(4, 2).unwrap();
        let (keys, cols) = symmetric_basis(&basis);
        assert_eq!(keys.len(), 10);
        for c in &cols {
            assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let h = hamiltonian_kboson(&cycle(4), 2, &PenaltySpec::pair(1.0)).unwrap();
        let r = restrict_symmetric(&h).unwrap();
        assert_eq!(r.dim(), 10);
        assert!(r.max_asymmetry() < 1e-14);
    }
}
