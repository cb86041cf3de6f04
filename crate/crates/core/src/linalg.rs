//! Dense complex linear algebra on qudit registers.
//!
//! Matrices are row-major. Composite indices are big-endian in the site
//! label: for `n` sites of dimension `d`, site `s` carries stride `d^(n-1-s)`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{arg, numeric, resource, MspeError, Result};

pub use num_complex::Complex64 as C64;

/// Absolute tolerance on `max |m - m^dagger|` accepted by [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = MspeError;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        ComplexMatrix::from_vec(raw.rows, raw.cols, raw.data)
    }
}

impl From<ComplexMatrix> for RawMatrix {
    fn from(m: ComplexMatrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return arg(format!("matrix shape {rows}x{cols} has an empty dimension"));
        }
        if data.len() != rows * cols {
            return arg(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = C64::new(v, 0.0);
        }
        m
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn map_conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self += s * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return arg(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for r in 0..self.rows {
            let row = &mut out.data[r * n..(r + 1) * n];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return arg(format!(
                "cannot apply {}x{} to a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Max entry-wise deviation of `U^dagger U` from the identity is at most `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        match self.adjoint().matmul(self) {
            Ok(p) => p.max_abs_diff(&Self::identity(self.rows)) <= tol,
            Err(_) => false,
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, C64::new(1.0, 0.0));
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, C64::new(-1.0, 0.0));
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in matrix product")
    }
}

/// Number of sites and local dimension of a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuditLayout {
    pub n_sites: usize,
    pub d: usize,
}

impl QuditLayout {
    pub fn new(n_sites: usize, d: usize) -> Result<Self> {
        if n_sites == 0 {
            return arg("layout needs at least one site");
        }
        if d < 2 {
            return arg(format!("local dimension must be at least 2, got {d}"));
        }
        checked_pow(d, n_sites)?;
        Ok(Self { n_sites, d })
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n_sites as u32)
    }

    /// Stride of `site` inside a composite index.
    pub fn stride(&self, site: usize) -> usize {
        self.d.pow((self.n_sites - 1 - site) as u32)
    }

    /// Digit of `site` in composite index `index`.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.stride(site)) % self.d
    }
}

/// `base^exp` with overflow reported as a resource error.
pub fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return resource(format!("dimension {base}^{exp} overflows the index type")),
        };
    }
    Ok(acc)
}

/// Offsets of every configuration of `sites` inside the full composite index,
/// enumerated big-endian in the order the sites are listed.
pub fn site_offsets(layout: &QuditLayout, sites: &[usize]) -> Vec<usize> {
    let mut offs = vec![0usize];
    for &s in sites {
        let stride = layout.stride(s);
        let mut next = Vec::with_capacity(offs.len() * layout.d);
        for &o in &offs {
            for v in 0..layout.d {
                next.push(o + v * stride);
            }
        }
        offs = next;
    }
    offs
}

fn complement(layout: &QuditLayout, keep: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; layout.n_sites];
    for &s in keep {
        if s >= layout.n_sites {
            return arg(format!("site {s} out of range for {} sites", layout.n_sites));
        }
        if seen[s] {
            return arg(format!("site {s} listed twice"));
        }
        seen[s] = true;
    }
    Ok((0..layout.n_sites).filter(|&s| !seen[s]).collect())
}

/// Amplitude vector over a qudit register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    pub layout: QuditLayout,
    pub amps: Vec<C64>,
}

impl PureState {
    pub fn new(layout: QuditLayout, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return arg(format!(
                "state has {} amplitudes, layout needs {}",
                amps.len(),
                layout.dim()
            ));
        }
        Ok(Self { layout, amps })
    }

    /// `|0...0>`.
    pub fn zero(layout: QuditLayout) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
        amps[0] = C64::new(1.0, 0.0);
        Self { layout, amps }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        for a in &mut self.amps {
            *a /= n;
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn density_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amps, &self.amps)
    }

    /// Reduced density matrix on `keep` (in the listed order), computed as
    /// `M M^dagger` from the reshaped amplitudes.
    pub fn reduced_density_matrix(&self, keep: &[usize]) -> Result<ComplexMatrix> {
        let traced = complement(&self.layout, keep)?;
        let ko = site_offsets(&self.layout, keep);
        let to = site_offsets(&self.layout, &traced);
        let mut out = ComplexMatrix::zeros(ko.len(), ko.len());
        for (r, &a) in ko.iter().enumerate() {
            for (c, &b) in ko.iter().enumerate().skip(r) {
                let v: C64 = to.iter().map(|&e| self.amps[a + e] * self.amps[b + e].conj()).sum();
                out[(r, c)] = v;
                out[(c, r)] = v.conj();
            }
        }
        Ok(out)
    }
}

/// Standard tensor product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => (r, c),
        _ => return resource("kron product dimension overflows"),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for ra in 0..a.rows {
        for rb in 0..b.rows {
            for ca in 0..a.cols {
                let x = a[(ra, ca)];
                data.extend(b.data[rb * b.cols..(rb + 1) * b.cols].iter().map(|y| x * y));
            }
        }
    }
    Ok(ComplexMatrix { rows, cols, data })
}

/// Partial trace of `rho` over every site not in `keep`. The output is
/// ordered by `keep` as listed; an empty `keep` gives the 1x1 trace.
pub fn partial_trace(rho: &ComplexMatrix, layout: &QuditLayout, keep: &[usize]) -> Result<ComplexMatrix> {
    if !rho.is_square() || rho.rows != layout.dim() {
        return arg(format!(
            "matrix {}x{} does not match {} sites of dimension {}",
            rho.rows, rho.cols, layout.n_sites, layout.d
        ));
    }
    let traced = complement(layout, keep)?;
    let ko = site_offsets(layout, keep);
    let to = site_offsets(layout, &traced);
    let out = ComplexMatrix::from_fn(ko.len(), ko.len(), |r, c| {
        to.iter().map(|&e| rho[(ko[r] + e, ko[c] + e)]).sum()
    });
    Ok(out)
}

/// Schatten-1 (trace norm, from singular values) or Schatten-2 (Frobenius).
pub fn schatten_norm(m: &ComplexMatrix, xi: u32) -> Result<f64> {
    if !m.is_square() {
        return arg(format!(
            "Schatten norm needs a square matrix, got {}x{}",
            m.rows, m.cols
        ));
    }
    match xi {
        1 => {
            let sv = m.to_nalgebra().singular_values();
            Ok(sv.iter().sum())
        }
        2 => Ok(m.frobenius_norm()),
        _ => arg(format!("Schatten index must be 1 or 2, got {xi}")),
    }
}

/// Eigenvalues in descending order with the matching eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    if !m.is_square() {
        return arg(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        ));
    }
    if !m.is_finite() {
        return numeric("matrix has non-finite entries");
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return numeric(format!("matrix is not Hermitian: max |m - m^dagger| = {defect:.3e}"));
    }
    let n = m.rows;
    let sym = DMatrix::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermEig { values, vectors })
}

/// Eigenvalues only, descending.
pub fn herm_eigvals(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(herm_eig(m)?.values)
}

/// `exp(i * scale * h)` for Hermitian `h`.
pub fn herm_expm(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let HermEig { values, vectors } = herm_eig(h)?;
    let n = values.len();
    let phases: Vec<C64> = values.iter().map(|&l| C64::from_polar(1.0, scale * l)).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(r, c)] = (0..n)
                .map(|j| vectors[(r, j)] * phases[j] * vectors[(c, j)].conj())
                .sum();
        }
    }
    Ok(out)
}

/// `Tr(rho^k)` for integer `k >= 1` by repeated multiplication.
pub fn trace_power(rho: &ComplexMatrix, k: usize) -> Result<f64> {
    if k == 0 {
        return arg("trace power needs k >= 1");
    }
    let mut p = rho.clone();
    for _ in 1..k {
        p = p.matmul(rho)?;
    }
    Ok(p.trace().re)
}

pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        let i = C64::new(0.0, 1.0);
        ComplexMatrix::from_vec(2, 2, vec![0.0.into(), -i, i, 0.0.into()]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, -1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let a = random_matrix(n, rng);
        (&a + &a.adjoint()).scale_real(0.5)
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let a = random_matrix(n, rng);
        let p = &a * &a.adjoint();
        let tr = p.trace().re;
        p.scale_real(1.0 / tr)
    }

    #[test]
    fn kron_identities_and_pauli_flip() {
        let i4 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(i4, ComplexMatrix::identity(4));
        let xx = kron(&pauli::x(), &pauli::x()).unwrap();
        let ket00 = [C64::new(1.0, 0.0), 0.0.into(), 0.0.into(), 0.0.into()];
        let out = xx.matvec(&ket00).unwrap();
        assert_eq!(out[3], C64::new(1.0, 0.0));
        assert!(out[..3].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kron_trace_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(2, &mut rng);
        let k = kron(&a, &b).unwrap();
        // direct oracle: Tr(A (x) B) = sum_ij A_ii B_jj
        let mut oracle = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                oracle += a[(i, i)] * b[(j, j)];
            }
        }
        assert!((k.trace() - oracle).norm() < 1e-14);
        assert_eq!(k[(1, 2)], a[(0, 1)] * b[(1, 0)]);
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(3, &mut rng);
        let c = random_matrix(2, &mut rng);
        let l = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let r = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        assert!(l.max_abs_diff(&r) < 1e-14);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let layout = QuditLayout::new(2, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let psi = PureState::new(layout, vec![s.into(), 0.0.into(), 0.0.into(), s.into()]).unwrap();
        let rho = psi.density_matrix();
        let r = partial_trace(&rho, &layout, &[0]).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::diag(&[0.5, 0.5])) < 1e-15);
        let full = partial_trace(&rho, &layout, &[]).unwrap();
        assert_eq!((full.rows(), full.cols()), (1, 1));
        assert!((full[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(psi.reduced_density_matrix(&[1]).unwrap().max_abs_diff(&r) < 1e-15);
    }

    #[test]
    fn product_state_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ra = random_density(2, &mut rng);
        let rb = random_density(4, &mut rng);
        let layout = QuditLayout::new(3, 2).unwrap();
        let rho = kron(&ra, &rb).unwrap();
        assert!(partial_trace(&rho, &layout, &[0]).unwrap().max_abs_diff(&ra) < 1e-14);
        assert!(partial_trace(&rho, &layout, &[1, 2]).unwrap().max_abs_diff(&rb) < 1e-14);
        // reversed keep order transposes the kept factor's site order
        let swapped = partial_trace(&rho, &layout, &[2, 1]).unwrap();
        assert!((swapped[(1, 2)] - rb[(2, 1)]).norm() < 1e-14);
        assert!(partial_trace(&rho, &layout, &[3]).is_err());
        assert!(partial_trace(&rho, &layout, &[1, 1]).is_err());
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten_norm(&ComplexMatrix::identity(3), 1).unwrap() - 3.0).abs() < 1e-12);
        let p = ComplexMatrix::diag(&[1.0, 0.0]);
        assert!((schatten_norm(&p, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((schatten_norm(&ComplexMatrix::diag(&[3.0, -4.0]), 1).unwrap() - 7.0).abs() < 1e-12);
        assert!(schatten_norm(&ComplexMatrix::zeros(2, 3), 1).is_err());
        assert!(schatten_norm(&p, 3).is_err());
    }

    #[test]
    fn eig_examples() {
        assert_eq!(herm_eigvals(&pauli::z()).unwrap(), vec![1.0, -1.0]);
        let half = ComplexMatrix::diag(&[0.5, 0.5]);
        let v = herm_eigvals(&half).unwrap();
        assert!(v.iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let bad = ComplexMatrix::from_vec(2, 2, vec![0.0.into(), 1.0.into(), 0.0.into(), 0.0.into()]).unwrap();
        assert!(matches!(herm_eig(&bad), Err(MspeError::Numeric(_))));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hermitian(8, &mut rng);
        let HermEig { values, vectors } = herm_eig(&h).unwrap();
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
        let recon = &(&vectors * &ComplexMatrix::diag(&values)) * &vectors.adjoint();
        let resid = schatten_norm(&(&recon - &h), 2).unwrap();
        assert!(resid < 1e-9, "residual {resid}");
        assert!(vectors.is_unitary(1e-10));
    }

    #[test]
    fn expm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(6, &mut rng);
        assert!(herm_expm(&h, 0.0).unwrap().max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
        let u = herm_expm(&pauli::z(), -std::f64::consts::FRAC_PI_2).unwrap();
        let mut want = ComplexMatrix::zeros(2, 2);
        want[(0, 0)] = C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2);
        want[(1, 1)] = C64::from_polar(1.0, std::f64::consts::FRAC_PI_2);
        assert!(u.max_abs_diff(&want) < 1e-12);
        let m = herm_expm(&pauli::x(), -std::f64::consts::PI).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-12);
        let big = herm_expm(&h, 1.7).unwrap();
        let defect = schatten_norm(&(&(&big.adjoint() * &big) - &ComplexMatrix::identity(6)), 2).unwrap();
        assert!(defect < 1e-10);
    }

    #[test]
    fn json_round_trip_uses_pairs() {
        let m = ComplexMatrix::from_vec(1, 2, vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"data":[[1.0,-2.0],[0.5,0.0]]}"#);
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"data":[[1.0,0.0]]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn partial_trace_preserves_trace(seed in any::<u64>(), mask in 0usize..16) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let layout = QuditLayout::new(4, 2).unwrap();
                let rho = random_density(16, &mut rng);
                let keep: Vec<usize> = (0..4).filter(|s| mask >> s & 1 == 1).collect();
                let r = partial_trace(&rho, &layout, &keep).unwrap();
                prop_assert!((r.trace() - rho.trace()).norm() < 1e-12);
            }

            #[test]
            fn frobenius_matches_entry_sum(seed in any::<u64>(), n in 1usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_matrix(n, &mut rng);
                let s2 = schatten_norm(&m, 2).unwrap().powi(2);
                let direct: f64 = m.data().iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((s2 - direct).abs() <= 1e-12 * direct);
            }

            #[test]
            fn expm_is_unitary(seed in any::<u64>(), scale in -5.0f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = random_hermitian(5, &mut rng);
                let u = herm_expm(&h, scale).unwrap();
                let defect = schatten_norm(&(&(&u.adjoint() * &u) - &ComplexMatrix::identity(5)), 2).unwrap();
                prop_assert!(defect < 1e-10);
            }
        }
    }
}
