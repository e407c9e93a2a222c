//! Elementary symmetric functions of symmetric matrices.
//!
//! For `A ∈ Sym(N)` with eigenvalues `λ_1..λ_N`, `S_i(A)` is the i-th
//! elementary symmetric polynomial of the eigenvalues. The cofactor matrix
//! `S_i^{jk}(A)` and the tensor `S_i^{jk,rs}(A)` are its first and second
//! derivatives with respect to the entries.
//!
//! Derivative convention: entries `a_jk` and `a_kj` are treated as
//! independent variables and the results are symmetrized, so that for every
//! symmetric direction `E`
//!
//! ```text
//! d/dt S_i(A + tE)          = Σ_{j,k} S_i^{jk}(A) e_jk
//! d/dt S_i^{jk}(A + tE)     = Σ_{r,s} S_i^{jk,rs}(A) e_rs
//! ```
//!
//! with sums over all ordered index pairs. Perturbing an off-diagonal
//! entry therefore means setting both `e_rs` and `e_sr`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense real symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, symmetrizing it. Fails if the input is not
    /// square or is asymmetric beyond rounding.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::domain(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if !(asym <= 1e-9 * scale) {
            return Err(Error::domain(format!("matrix is not symmetric (max |a_jk - a_kj| = {asym:e})")));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetric part `(M + Mᵀ)/2`, no checks.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SymMatrix(DMatrix::from_fn(n, n, |j, k| if j == k { d[j] } else { 0.0 }))
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::symmetrized(DMatrix::from_fn(n, n, f))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[(j, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &SymMatrix, b: f64) -> Self {
        SymMatrix(&self.0 * a + &other.0 * b)
    }

    /// `Tᵀ·A·T` for a (not necessarily square) `T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Self {
        Self::symmetrized(t.transpose() * &self.0 * t)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Eigenvalues (ascending) with the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    fn check_order(&self, i: usize, lo: usize) -> Result<()> {
        if i < lo || i > self.dim() {
            return Err(Error::domain(format!(
                "order {i} outside [{lo}, {}] for a {}x{} matrix",
                self.dim(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Elementary symmetric polynomials `e_0..e_N` of a list of numbers.
pub fn elem_sym_values(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (m, &x) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// All `S_0(A)..S_N(A)` via Newton's identities on power traces.
pub fn elem_sym_all(a: &SymMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut power = a.0.clone();
    let mut traces = Vec::with_capacity(n);
    for m in 0..n {
        if m > 0 {
            power = &power * &a.0;
        }
        traces.push(power.trace());
    }
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for m in 1..=k {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - m] * traces[m - 1];
        }
        e[k] = acc / k as f64;
    }
    e
}

/// `S_i(A)`, production path (Newton identities).
pub fn elem_sym(a: &SymMatrix, i: usize) -> Result<f64> {
    a.check_order(i, 0)?;
    Ok(elem_sym_all(a)[i])
}

/// `S_i(A)` from the eigenvalues.
pub fn elem_sym_eigen(a: &SymMatrix, i: usize) -> Result<f64> {
    a.check_order(i, 0)?;
    Ok(elem_sym_values(&a.eigenvalues())[i])
}

/// `S_i(A)` from the generalized Kronecker-delta expansion over the entries.
///
/// The `1/i!` sum over ordered distinct row tuples collapses to a sum over
/// increasing tuples, each contributing a signed sum over column
/// permutations. Exponential cost; reference use only.
pub fn elem_sym_kronecker(a: &SymMatrix, i: usize) -> Result<f64> {
    a.check_order(i, 0)?;
    if i == 0 {
        return Ok(1.0);
    }
    let perms = signed_permutations(i);
    let mut total = 0.0;
    for rows in combinations(a.dim(), i) {
        for (sign, perm) in &perms {
            let mut prod = *sign;
            for (s, &p) in perm.iter().enumerate() {
                prod *= a.0[(rows[s], rows[p])];
            }
            total += prod;
        }
    }
    Ok(total)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub(crate) fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    combinations(n, k)
}

fn signed_permutations(k: usize) -> Vec<(f64, Vec<usize>)> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for x in 0..k {
                for y in x + 1..k {
                    if p[x] > p[y] {
                        inversions += 1;
                    }
                }
            }
            (if inversions % 2 == 0 { 1.0 } else { -1.0 }, p)
        })
        .collect()
}

/// Powers `A^0..A^{m}`.
fn powers(a: &SymMatrix, m: usize) -> Vec<DMatrix<f64>> {
    let n = a.dim();
    let mut out = Vec::with_capacity(m + 1);
    out.push(DMatrix::identity(n, n));
    for p in 1..=m {
        let next = &out[p - 1] * &a.0;
        out.push(next);
    }
    out
}

/// `Σ_{m<i} (-1)^m S_{i-1-m}(A) A^m`, the polynomial form of the cofactor.
fn cofactor_raw(e: &[f64], pw: &[DMatrix<f64>], i: usize) -> DMatrix<f64> {
    let n = pw[0].nrows();
    let mut t = DMatrix::zeros(n, n);
    for m in 0..i {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        t += &pw[m] * (sign * e[i - 1 - m]);
    }
    t
}

/// The i-th cofactor matrix `(S_i^{jk}(A))`.
pub fn cofactor(a: &SymMatrix, i: usize) -> Result<SymMatrix> {
    a.check_order(i, 1)?;
    let e = elem_sym_all(a);
    let pw = powers(a, i - 1);
    Ok(SymMatrix::symmetrized(cofactor_raw(&e, &pw, i)))
}

/// `Σ_{j,k} S_i^{jk}(A) m_jk`.
pub fn trace_pair(a: &SymMatrix, m: &SymMatrix, i: usize) -> Result<f64> {
    if a.dim() != m.dim() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", a.dim(), m.dim())));
    }
    let c = cofactor(a, i)?;
    Ok(c.0.dot(&m.0))
}

/// Second derivative tensor `S_i^{jk,rs}(A)`, symmetric under `j↔k`,
/// `r↔s` and `(jk)↔(rs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CofactorTensor2 {
    dim: usize,
    values: Vec<f64>,
}

impl CofactorTensor2 {
    pub fn zeros(dim: usize) -> Self {
        CofactorTensor2 { dim, values: vec![0.0; dim.pow(4)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, j: usize, k: usize, r: usize, s: usize) -> usize {
        ((j * self.dim + k) * self.dim + r) * self.dim + s
    }

    pub fn get(&self, j: usize, k: usize, r: usize, s: usize) -> f64 {
        self.values[self.index(j, k, r, s)]
    }

    /// The matrix `(Σ_{r,s} S^{jk,rs} m_rs)_{jk}`.
    pub fn contract(&self, m: &SymMatrix) -> SymMatrix {
        let n = self.dim;
        SymMatrix::from_fn(n, |j, k| {
            let mut acc = 0.0;
            for r in 0..n {
                for s in 0..n {
                    acc += self.get(j, k, r, s) * m.get(r, s);
                }
            }
            acc
        })
    }

    /// `Σ S^{jk,rs} a_jk b_rs`.
    pub fn contract_both(&self, a: &SymMatrix, b: &SymMatrix) -> f64 {
        self.contract(b).0.dot(&a.0)
    }
}

/// The second cofactor tensor. For `i = 1` the tensor is identically zero
/// and a zero tensor is returned so callers can iterate over all orders.
pub fn cofactor2(a: &SymMatrix, i: usize) -> Result<CofactorTensor2> {
    a.check_order(i, 1)?;
    let n = a.dim();
    if i == 1 {
        return Ok(CofactorTensor2::zeros(n));
    }
    let e = elem_sym_all(a);
    let pw = powers(a, i - 1);
    // Cofactors of orders 1..i-1, each a polynomial in the entries.
    let lower: Vec<DMatrix<f64>> = (0..i)
        .map(|p| if p == 0 { DMatrix::zeros(n, n) } else { cofactor_raw(&e, &pw, p) })
        .collect();
    // Derivative of the polynomial cofactor w.r.t. independent entries a_rs.
    let raw = |j: usize, k: usize, r: usize, s: usize| -> f64 {
        let mut acc = 0.0;
        for m in 0..i {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut term = lower[i - 1 - m][(r, s)] * pw[m][(j, k)];
            let mut inner = 0.0;
            for l in 0..m {
                inner += pw[l][(j, r)] * pw[m - 1 - l][(s, k)];
            }
            term += e[i - 1 - m] * inner;
            acc += sign * term;
        }
        acc
    };
    let mut t = CofactorTensor2::zeros(n);
    for j in 0..n {
        for k in 0..n {
            for r in 0..n {
                for s in 0..n {
                    // Canonical representative of the symmetry orbit, then a
                    // fixed-order average over the orbit: equal keys give
                    // bitwise-equal values.
                    let p1 = (j.min(k), j.max(k));
                    let p2 = (r.min(s), r.max(s));
                    let ((a0, a1), (b0, b1)) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
                    let v = (raw(a0, a1, b0, b1)
                        + raw(a1, a0, b0, b1)
                        + raw(a0, a1, b1, b0)
                        + raw(a1, a0, b1, b0)
                        + raw(b0, b1, a0, a1)
                        + raw(b1, b0, a0, a1)
                        + raw(b0, b1, a1, a0)
                        + raw(b1, b0, a1, a0))
                        / 8.0;
                    let idx = t.index(j, k, r, s);
                    t.values[idx] = v;
                }
            }
        }
    }
    Ok(t)
}

/// Mixed discriminant `D(A_1,…,A_N)`: symmetric, multilinear, with
/// `D(A,…,A) = det A`. Computed by inclusion–exclusion over subsets.
pub fn mixed_discriminant(mats: &[SymMatrix]) -> Result<f64> {
    let n = mats.len();
    if n == 0 {
        return Err(Error::domain("mixed discriminant of an empty list"));
    }
    if let Some(bad) = mats.iter().find(|m| m.dim() != n) {
        return Err(Error::domain(format!(
            "mixed discriminant needs {n} matrices of size {n}, got size {}",
            bad.dim()
        )));
    }
    if n == 2 {
        let (a, b) = (&mats[0].0, &mats[1].0);
        return Ok(0.5 * (a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)]) - a[(0, 1)] * b[(0, 1)]);
    }
    let mut total = 0.0;
    for mask in 1u32..(1u32 << n) {
        let mut sum = DMatrix::zeros(n, n);
        for (k, m) in mats.iter().enumerate() {
            if mask & (1 << k) != 0 {
                sum += &m.0;
            }
        }
        let size = mask.count_ones() as usize;
        let sign = if (n - size) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * sum.determinant();
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    Ok(total / factorial)
}
