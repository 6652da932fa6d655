//! Dense linear algebra: exact rational matrices with exact characteristic
//! polynomials, plus a cyclic Jacobi eigensolver for real symmetric matrices.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// Square matrix of arbitrary-precision rationals, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    dim: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(dim: usize) -> Self {
        RationalMatrix { dim, data: vec![BigRational::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = BigRational::one();
        }
        m
    }

    pub fn ones(dim: usize) -> Self {
        RationalMatrix { dim, data: vec![BigRational::one(); dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> BigRational) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        RationalMatrix { dim, data }
    }

    pub fn from_i64(dim: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        Self::from_fn(dim, |i, j| BigRational::from_integer(f(i, j).into()))
    }

    /// 0-1 adjacency matrix of a graph.
    pub fn adjacency(g: &crate::graphio::Graph) -> Self {
        Self::from_i64(g.n(), |i, j| g.has_edge(i, j) as i64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].clone())
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        RationalMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(RationalMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dim(other)?;
        Ok(RationalMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    fn check_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimMismatch { left: self.dim, right: other.dim });
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn trace(&self) -> BigRational {
        (0..self.dim).map(|i| self[(i, i)].clone()).sum()
    }

    /// Entries as f64 (lossy).
    pub fn to_real(&self) -> RealMatrix {
        RealMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect(),
        }
    }
}

impl Index<(usize, usize)> for RationalMatrix {
    type Output = BigRational;
    fn index(&self, (i, j): (usize, usize)) -> &BigRational {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigRational {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix({})[", self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Exact product. Zero entries of `a` are skipped, which matters for the
/// sparse walk operators.
pub fn mat_mul(a: &RationalMatrix, b: &RationalMatrix) -> Result<RationalMatrix, LinalgError> {
    a.check_dim(b)?;
    let n = a.dim;
    let mut out = RationalMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = &a[(i, k)];
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                let bkj = &b[(k, j)];
                if !bkj.is_zero() {
                    out.data[i * n + j] += aik * bkj;
                }
            }
        }
    }
    Ok(out)
}

/// `m^e` by repeated squaring; `m^0 = I`.
pub fn mat_pow(m: &RationalMatrix, e: u32) -> RationalMatrix {
    let mut result = RationalMatrix::identity(m.dim);
    let mut base = m.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base).expect("square");
        }
        e >>= 1;
        if e > 0 {
            base = mat_mul(&base, &base).expect("square");
        }
    }
    result
}

/// Monic characteristic polynomial, coefficients in descending degree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CharPoly {
    coeffs: Vec<BigRational>,
}

impl CharPoly {
    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        assert!(coeffs.first().is_some_and(One::is_one), "characteristic polynomial must be monic");
        CharPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// Coefficients as decimal strings ("p/q" for non-integers).
    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }

    /// Product of two polynomials (used to build expected values).
    pub fn mul(&self, other: &CharPoly) -> CharPoly {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CharPoly { coeffs: out }
    }

    /// Evaluates at a rational point.
    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.coeffs.iter().fold(BigRational::zero(), |acc, c| acc * x + c)
    }
}

impl fmt::Debug for CharPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CharPoly{:?}", self.to_strings())
    }
}

impl fmt::Display for CharPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.degree();
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let p = d - i;
            let sign = if c.is_negative() { "-" } else { "+" };
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let show_mag = !mag.is_one() || p == 0;
            if show_mag {
                write!(f, "{mag}")?;
            }
            match p {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{p}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller-Rabin for 64-bit integers.
fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes just below 2^62, descending.
fn large_primes() -> impl Iterator<Item = u64> {
    let mut cand = (1u64 << 62) - 1;
    std::iter::from_fn(move || {
        while !is_prime_u64(cand) {
            cand -= 2;
        }
        let p = cand;
        cand -= 2;
        Some(p)
    })
}

/// Characteristic polynomial over F_p via reduction to upper Hessenberg form.
/// `m` is row-major with entries already reduced mod p.
fn char_poly_mod_p(mut m: Vec<u64>, n: usize, p: u64) -> Vec<u64> {
    let sub = |a: u64, b: u64| if a >= b { a - b } else { a + p - b };
    let add = |a: u64, b: u64| {
        let s = a + b;
        if s >= p {
            s - p
        } else {
            s
        }
    };
    for j in 0..n.saturating_sub(2) {
        let Some(piv) = (j + 1..n).find(|&i| m[i * n + j] != 0) else { continue };
        if piv != j + 1 {
            for c in 0..n {
                m.swap(piv * n + c, (j + 1) * n + c);
            }
            for r in 0..n {
                m.swap(r * n + piv, r * n + j + 1);
            }
        }
        let inv = inv_mod(m[(j + 1) * n + j], p);
        for i in j + 2..n {
            let f = mul_mod(m[i * n + j], inv, p);
            if f == 0 {
                continue;
            }
            // row_i -= f·row_{j+1}
            for c in 0..n {
                let v = mul_mod(f, m[(j + 1) * n + c], p);
                m[i * n + c] = sub(m[i * n + c], v);
            }
            // col_{j+1} += f·col_i
            for r in 0..n {
                let v = mul_mod(f, m[r * n + i], p);
                m[r * n + j + 1] = add(m[r * n + j + 1], v);
            }
        }
    }
    // p_k(x) for the leading k×k block, coefficients ascending.
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for k in 1..=n {
        let hkk = m[(k - 1) * n + (k - 1)];
        let prev = &polys[k - 1];
        let mut pk = vec![0u64; k + 1];
        for (d, &c) in prev.iter().enumerate() {
            pk[d + 1] = add(pk[d + 1], c);
            pk[d] = sub(pk[d], mul_mod(hkk, c, p));
        }
        let mut t = 1u64;
        for i in 1..k {
            t = mul_mod(t, m[(k - i) * n + (k - i - 1)], p);
            let coef = mul_mod(t, m[(k - i - 1) * n + (k - 1)], p);
            if coef == 0 {
                continue;
            }
            for (d, &c) in polys[k - i - 1].iter().enumerate() {
                pk[d] = sub(pk[d], mul_mod(coef, c, p));
            }
        }
        polys.push(pk);
    }
    polys.pop().expect("n+1 polynomials")
}

fn big_mod(x: &BigInt, p: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue fits in u64")
}

/// Exact characteristic polynomial det(xI − m).
///
/// The matrix is scaled to an integer matrix N = D·m; the characteristic
/// polynomial of N is computed modulo enough 62-bit primes to exceed twice
/// the Cauchy bound on its coefficients, lifted by CRT, and rescaled by D^k.
pub fn char_poly_exact(m: &RationalMatrix) -> CharPoly {
    let n = m.dim;
    if n == 0 {
        return CharPoly::from_i64(&[1]);
    }
    let denom = m.data.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = m.data.iter().map(|x| x.numer() * (&denom / x.denom())).collect();

    // |c_k| ≤ C(n,k)·s^k ≤ (1+s)^n where s bounds every eigenvalue modulus.
    let s = (0..n)
        .map(|i| ints[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<BigInt>())
        .max()
        .expect("n > 0");
    let bound_bits = (s + 1u32).bits() * n as u64 + 2;

    let mut modulus = BigInt::one();
    let mut acc = vec![BigInt::zero(); n + 1];
    for p in large_primes() {
        let reduced: Vec<u64> = ints.iter().map(|x| big_mod(x, p)).collect();
        let cp = char_poly_mod_p(reduced, n, p);
        // Garner step: acc ≡ cp (mod p), acc unchanged mod previous modulus.
        let minv = inv_mod(big_mod(&modulus, p), p);
        for (a, &r) in acc.iter_mut().zip(&cp) {
            let cur = big_mod(a, p);
            let diff = if r >= cur { r - cur } else { r + p - cur };
            let h = mul_mod(diff, minv, p);
            *a += &modulus * BigInt::from(h);
        }
        modulus *= BigInt::from(p);
        if modulus.bits() > bound_bits {
            break;
        }
    }
    let half = &modulus >> 1;
    // acc is ascending; symmetric residues, then rescale c_k by D^k.
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut dpow = BigInt::one();
    for k in 0..=n {
        let mut c = acc[n - k].clone();
        if c > half {
            c -= &modulus;
        }
        coeffs.push(BigRational::new(c, dpow.clone()));
        dpow *= &denom;
    }
    CharPoly::from_coeffs(coeffs)
}

/// Dense real square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(dim: usize) -> Self {
        RealMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        RealMatrix { dim, data }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        RealMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &RealMatrix) -> RealMatrix {
        let n = self.dim;
        assert_eq!(n, other.dim);
        let mut out = RealMatrix::zeros(n);
        for i in 0..n {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(&other.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// max |a_ij − b_ij|
    pub fn max_diff(&self, other: &RealMatrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigenvalues in ascending order; column j of `vectors` belongs to
/// `values[j]`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

impl EigenDecomposition {
    /// V·diag(f(λ))·Vᵀ
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let scaled = RealMatrix::from_fn(n, |i, j| v[(i, j)] * f(self.values[j]));
        scaled.matmul(&v.transpose())
    }
}

pub const JACOBI_DEFAULT_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver. Sweeps until every off-diagonal entry is at
/// most `tol·‖h‖_F`.
pub fn jacobi_eigh(h: &RealMatrix, tol: f64) -> Result<EigenDecomposition, LinalgError> {
    let n = h.dim;
    let scale = h.max_abs();
    let asym = h.max_asymmetry();
    if asym > 1e-12 * scale {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let mut a = RealMatrix::from_fn(n, |i, j| if i <= j { h[(i, j)] } else { h[(j, i)] });
    let mut v = RealMatrix::identity(n);
    let threshold = tol * h.frobenius();

    let off_max = |a: &RealMatrix| {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(a[(i, j)].abs());
            }
        }
        worst
    };

    let mut sweeps = 0;
    loop {
        let residual = off_max(&a);
        if residual <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, residual });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold * 1e-3 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = RealMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Sign of a rational (used by positive-support thresholding).
pub fn is_positive(x: &BigRational) -> bool {
    x.numer().sign() == Sign::Plus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::{complete, cycle, petersen};

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn products() {
        let a = RationalMatrix::adjacency(&complete(2));
        assert_eq!(mat_mul(&a, &a).unwrap(), RationalMatrix::identity(2));
        let j = RationalMatrix::ones(3);
        assert_eq!(mat_mul(&j, &j).unwrap(), j.scale(&q(3)));
        let m = RationalMatrix::from_i64(3, |i, j| (i * 3 + j) as i64 - 4);
        assert_eq!(mat_mul(&RationalMatrix::identity(3), &m).unwrap(), m);
        assert!(mat_mul(&m, &RationalMatrix::identity(2)).is_err());
    }

    #[test]
    fn powers() {
        let m = RationalMatrix::from_i64(3, |i, j| (i + 2 * j) as i64);
        assert_eq!(mat_pow(&m, 0), RationalMatrix::identity(3));
        let c4 = RationalMatrix::adjacency(&cycle(4));
        let expected = RationalMatrix::from_i64(4, |i, j| if i == j || (i + 2) % 4 == j { 2 } else { 0 });
        assert_eq!(mat_pow(&c4, 2), expected);
        let swap = RationalMatrix::adjacency(&complete(2));
        assert_eq!(mat_pow(&swap, 2), RationalMatrix::identity(2));
        assert_eq!(mat_pow(&m, 5), mat_mul(&mat_pow(&m, 2), &mat_pow(&m, 3)).unwrap());
    }

    #[test]
    fn char_poly_examples() {
        assert_eq!(char_poly_exact(&RationalMatrix::adjacency(&complete(2))), CharPoly::from_i64(&[1, 0, -1]));
        assert_eq!(char_poly_exact(&RationalMatrix::adjacency(&cycle(4))), CharPoly::from_i64(&[1, 0, -4, 0, 0]));
        let lin = |r: i64| CharPoly::from_i64(&[1, -r]);
        let mut expected = lin(3);
        for _ in 0..5 {
            expected = expected.mul(&lin(1));
        }
        for _ in 0..4 {
            expected = expected.mul(&lin(-2));
        }
        let got = char_poly_exact(&RationalMatrix::adjacency(&petersen()));
        assert_eq!(got, expected);
        assert!(got.is_integral());
    }

    #[test]
    fn char_poly_rational_entries() {
        // [[1/2, 1/3], [1, 0]] → x² − x/2 − 1/3
        let m = RationalMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => BigRational::new(1.into(), 2.into()),
            (0, 1) => BigRational::new(1.into(), 3.into()),
            (1, 0) => q(1),
            _ => q(0),
        });
        let cp = char_poly_exact(&m);
        assert_eq!(cp.coeffs()[1], BigRational::new((-1).into(), 2.into()));
        assert_eq!(cp.coeffs()[2], BigRational::new((-1).into(), 3.into()));
    }

    #[test]
    fn char_poly_large_coefficients() {
        // diag(10^30, 1): coefficients exceed 64 bits and need several primes
        let big = BigInt::from(10u32).pow(30);
        let m = RationalMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => BigRational::from_integer(big.clone()),
            (1, 1) => q(1),
            _ => q(0),
        });
        let cp = char_poly_exact(&m);
        assert_eq!(cp.coeffs()[1], BigRational::from_integer(-(big.clone() + 1u32)));
        assert_eq!(cp.coeffs()[2], BigRational::from_integer(big));
    }

    #[test]
    fn jacobi_examples() {
        let d = RealMatrix::from_fn(3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        let e = jacobi_eigh(&d, JACOBI_DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        let sorted_identity = RealMatrix::from_fn(3, |i, j| if [1, 2, 0][j] == i { 1.0 } else { 0.0 });
        assert_eq!(e.vectors, sorted_identity);

        let k2 = RationalMatrix::adjacency(&complete(2)).to_real();
        let e = jacobi_eigh(&k2, JACOBI_DEFAULT_TOL).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);

        let c4 = RationalMatrix::adjacency(&cycle(4)).to_real();
        let e = jacobi_eigh(&c4, JACOBI_DEFAULT_TOL).unwrap();
        for (got, want) in e.values.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{:?}", e.values);
        }
    }

    #[test]
    fn jacobi_rejects_asymmetric() {
        let m = RealMatrix::from_vec(2, vec![0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(jacobi_eigh(&m, JACOBI_DEFAULT_TOL), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn display() {
        assert_eq!(CharPoly::from_i64(&[1, 0, -4, 0, 0]).to_string(), "x^4 - 4x^2");
        assert_eq!(CharPoly::from_i64(&[1, 0, -1]).to_string(), "x^2 - 1");
    }
}
