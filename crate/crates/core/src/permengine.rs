//! Replica calculus over the symmetric group S_k.
//!
//! Convention: [`Permutation::product`] is defined so that
//! `perm_operator(g) * perm_operator(h) == perm_operator(g.product(h))`,
//! i.e. `(g.product(h))(i) = h(g(i))`. Cycle counts only depend on conjugacy
//! classes, so every `l(g^-1 h)` below is insensitive to this choice.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{arg, numeric, resource, Result};
use crate::linalg::{checked_pow, ComplexMatrix, C64};
use crate::metrics::Entropy;
use crate::mspe::MomentTensor;

/// Largest k for which S_k is enumerated (`8! = 40320`).
pub const MAX_ENUM_K: usize = 8;
/// Largest k accepted by the dense finite-t solver.
pub const MAX_SOLVE_K: usize = 6;
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<u8>,
    cycles: usize,
}

fn count_cycles(image: &[u8]) -> usize {
    let mut seen = vec![false; image.len()];
    let mut cycles = 0;
    for start in 0..image.len() {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = image[i] as usize;
        }
    }
    cycles
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let k = image.len();
        if k > u8::MAX as usize {
            return arg(format!("permutation of {k} elements is too large"));
        }
        let mut seen = vec![false; k];
        for &i in &image {
            if i >= k || seen[i] {
                return arg(format!("{image:?} is not a bijection on 0..{k}"));
            }
            seen[i] = true;
        }
        Ok(Self::from_image(image.into_iter().map(|i| i as u8).collect()))
    }

    fn from_image(image: Vec<u8>) -> Self {
        let cycles = count_cycles(&image);
        Self { image, cycles }
    }

    pub fn identity(k: usize) -> Self {
        Self::from_image((0..k as u8).collect())
    }

    pub fn transposition(k: usize, i: usize, j: usize) -> Result<Self> {
        if i >= k || j >= k || i == j {
            return arg(format!("invalid transposition ({i} {j}) in S_{k}"));
        }
        let mut im: Vec<u8> = (0..k as u8).collect();
        im.swap(i, j);
        Ok(Self::from_image(im))
    }

    /// `i -> i + 1 (mod k)`.
    pub fn forward_cycle(k: usize) -> Self {
        Self::from_image((0..k).map(|i| ((i + 1) % k) as u8).collect())
    }

    /// Same permutation acting on `total >= k` elements, fixing the extra ones.
    pub fn extend(&self, total: usize) -> Self {
        let mut im = self.image.clone();
        im.extend(self.k() as u8..total as u8);
        Self::from_image(im)
    }

    pub fn k(&self) -> usize {
        self.image.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.image[i] as usize
    }

    pub fn image(&self) -> Vec<usize> {
        self.image.iter().map(|&i| i as usize).collect()
    }

    /// Number of cycles, fixed points included.
    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn is_identity(&self) -> bool {
        self.cycles == self.k()
    }

    pub fn inverse(&self) -> Self {
        let mut im = vec![0u8; self.k()];
        for (i, &g) in self.image.iter().enumerate() {
            im[g as usize] = i as u8;
        }
        Self {
            image: im,
            cycles: self.cycles,
        }
    }

    /// Group product matching operator multiplication, `i -> other(self(i))`.
    pub fn product(&self, other: &Self) -> Self {
        assert_eq!(self.k(), other.k(), "permutations of different sizes");
        Self::from_image(self.image.iter().map(|&i| other.image[i as usize]).collect())
    }

    /// Cycle lengths in ascending order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.k()];
        let mut lens = Vec::new();
        for start in 0..self.k() {
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.image[i] as usize;
                len += 1;
            }
            if len > 0 {
                lens.push(len);
            }
        }
        lens.sort_unstable();
        lens
    }

    /// e.g. `"1+1+2"`.
    pub fn cycle_type_key(&self) -> String {
        self.cycle_type()
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

fn next_permutation(v: &mut [u8]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

static SYM: [OnceLock<Vec<Permutation>>; MAX_ENUM_K + 1] = [const { OnceLock::new() }; MAX_ENUM_K + 1];

/// All of S_k in lexicographic order of the image (identity first), cached.
pub fn enumerate_sym(k: usize) -> Result<&'static [Permutation]> {
    if k == 0 {
        return arg("S_k needs k >= 1");
    }
    if k > MAX_ENUM_K {
        return resource(format!("enumerating S_{k} exceeds the {MAX_ENUM_K}! cap"));
    }
    Ok(SYM[k].get_or_init(|| {
        let mut im: Vec<u8> = (0..k as u8).collect();
        let mut out = Vec::new();
        loop {
            out.push(Permutation::from_image(im.clone()));
            if !next_permutation(&mut im) {
                break;
            }
        }
        out
    }))
}

fn index_of(perms: &[Permutation], g: &Permutation) -> Option<usize> {
    perms.binary_search_by(|p| p.image.cmp(&g.image)).ok()
}

/// `Dis(g, h) = k - l(g^-1 h)`.
pub fn cayley_distance(g: &Permutation, h: &Permutation) -> Result<usize> {
    if g.k() != h.k() {
        return arg(format!(
            "cannot compare permutations of {} and {} elements",
            g.k(),
            h.k()
        ));
    }
    Ok(g.k() - g.inverse().product(h).cycles())
}

pub fn big_pow(base: usize, exp: usize) -> BigUint {
    BigUint::from(base).pow(exp as u32)
}

/// `D (D+1) ... (D+k-1) = (D+k-1)! / (D-1)!`.
pub fn rising_factorial(base: &BigUint, k: usize) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (base + BigUint::from(i)))
}

/// `sum_{g in S_k} D^{l(g)}` by enumeration.
pub fn cycle_power_sum(base: usize, k: usize) -> Result<BigUint> {
    let perms = enumerate_sym(k)?;
    let mut counts = vec![0u64; k + 1];
    for g in perms {
        counts[g.cycles()] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(l, &c)| BigUint::from(c) * big_pow(base, l))
        .sum())
}

/// `num / den` as the nearest-ish f64 without overflowing on huge operands.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "division by zero");
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mantissa = q.to_f64().expect("quotient fits in f64");
    mantissa * 2f64.powi(-shift as i32)
}

/// Column index -> row index of the replica permutation operator on `k`
/// replicas of dimension `site_dim` each (replica 0 most significant).
pub fn replica_index_map(g: &Permutation, site_dim: usize) -> Result<Vec<usize>> {
    let k = g.k();
    let dim = checked_pow(site_dim, k)?;
    let strides: Vec<usize> = (0..k).map(|r| site_dim.pow((k - 1 - r) as u32)).collect();
    let mut digits = vec![0usize; k];
    Ok((0..dim)
        .map(|col| {
            let mut rest = col;
            for r in (0..k).rev() {
                digits[r] = rest % site_dim;
                rest /= site_dim;
            }
            (0..k).map(|r| digits[g.apply(r)] * strides[r]).sum()
        })
        .collect())
}

/// `rho(g) = sum |i_{g(1)} ... i_{g(k)}><i_1 ... i_k|` on `k` replicas of
/// `n_sites` qudits, dense.
pub fn perm_operator(g: &Permutation, n_sites: usize, d: usize) -> Result<ComplexMatrix> {
    perm_operator_with_budget(g, n_sites, d, crate::DEFAULT_DENSE_BUDGET)
}

pub fn perm_operator_with_budget(g: &Permutation, n_sites: usize, d: usize, budget: usize) -> Result<ComplexMatrix> {
    let dim = checked_pow(d, n_sites * g.k())?;
    if dim > budget {
        return resource(format!(
            "permutation operator of dimension {dim} exceeds the dense budget {budget}"
        ));
    }
    let map = replica_index_map(g, d.pow(n_sites as u32))?;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (c, &r) in map.iter().enumerate() {
        m[(r, c)] = 1.0.into();
    }
    Ok(m)
}

/// `rho(g) M rho(g)^dagger` by index relabelling.
pub fn conjugate_by_replica_perm(m: &ComplexMatrix, g: &Permutation, site_dim: usize) -> Result<ComplexMatrix> {
    let map = replica_index_map(g, site_dim)?;
    if !m.is_square() || m.rows() != map.len() {
        return arg("matrix does not act on the replica space");
    }
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for (a, &ra) in map.iter().enumerate() {
        for (b, &rb) in map.iter().enumerate() {
            out[(ra, rb)] = m[(a, b)];
        }
    }
    Ok(out)
}

/// Analytic k-th moment of the generalized Hilbert-Schmidt ensemble:
/// `sum_g rho_{N_A,k}(g) d^{m l(g)} / [(D+k-1)!/(D-1)!]` with `D = d^{N_A+m}`.
pub fn ghs_moment(n_a: usize, m: usize, d: usize, k: usize) -> Result<MomentTensor> {
    ghs_moment_with_budget(n_a, m, d, k, crate::DEFAULT_DENSE_BUDGET)
}

pub fn ghs_moment_with_budget(n_a: usize, m: usize, d: usize, k: usize, budget: usize) -> Result<MomentTensor> {
    if d < 2 {
        return arg("local dimension must be at least 2");
    }
    let site_dim = checked_pow(d, n_a)?;
    let dim = checked_pow(site_dim, k)?;
    if dim > budget {
        return resource(format!("moment dimension {dim} exceeds the dense budget {budget}"));
    }
    let perms = enumerate_sym(k)?;
    let norm = rising_factorial(&big_pow(d, n_a + m), k);
    let mut weights: HashMap<usize, f64> = HashMap::new();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for g in perms {
        let w = *weights
            .entry(g.cycles())
            .or_insert_with(|| ratio_to_f64(&big_pow(d, m * g.cycles()), &norm));
        for (c, r) in replica_index_map(g, site_dim)?.into_iter().enumerate() {
            out[(r, c)] += C64::new(w, 0.0);
        }
    }
    Ok(MomentTensor {
        k,
        site_dim,
        matrix: out,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "limit")]
pub enum AlphaContext {
    FiniteT { d: usize, m: usize, t: usize },
    LargeT { d: usize, m: usize },
    LargeD { d: usize, m: usize },
    Sparse { d: usize, n_pairs: usize },
}

/// Coefficients `alpha(g)`, stored in [`enumerate_sym`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaCoefficients {
    pub k: usize,
    pub context: AlphaContext,
    values: Vec<f64>,
}

impl AlphaCoefficients {
    fn from_fn(k: usize, context: AlphaContext, f: impl Fn(&Permutation) -> f64) -> Result<Self> {
        let values = enumerate_sym(k)?.iter().map(f).collect();
        Ok(Self { k, context, values })
    }

    pub fn get(&self, g: &Permutation) -> f64 {
        let perms = enumerate_sym(self.k).expect("validated at construction");
        self.values[index_of(perms, g).expect("permutation of the wrong size")]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static Permutation, f64)> + '_ {
        enumerate_sym(self.k)
            .expect("validated at construction")
            .iter()
            .zip(self.values.iter().copied())
    }

    /// One value per cycle type. Every coefficient family here is a class function.
    pub fn by_cycle_type(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (g, v) in self.iter() {
            out.entry(g.cycle_type_key()).or_insert(v);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "k": self.k,
            "context": self.context,
            "coefficients": self.by_cycle_type(),
        })
    }
}

/// Exact solution of `sum_g' G_{g,g'} alpha(g') = c(g)` for the steady state
/// after `t` layers, with
/// `G_{g,g'} = d^{(t+1)(l(g^-1 g') - k)}` and
/// `c(g) = sum_g' d^{n(l(g') - k) + n(l(g) - k) + (t+1-n)(l(g^-1 g') - k)}`, `n = m/2`.
pub fn solve_alpha_finite_t(t: usize, m: usize, d: usize, k: usize) -> Result<AlphaCoefficients> {
    if k == 0 {
        return arg("k must be at least 1");
    }
    if k > MAX_SOLVE_K {
        return resource(format!("finite-t solver is limited to k <= {MAX_SOLVE_K}, got {k}"));
    }
    if d < 2 {
        return arg("local dimension must be at least 2");
    }
    let perms = enumerate_sym(k)?;
    let n = perms.len();
    let df = d as f64;
    let half = m as f64 / 2.0;
    let kf = k as f64;
    let tp = (t + 1) as f64;
    let overlap: Vec<Vec<f64>> = perms
        .iter()
        .map(|g| {
            perms
                .iter()
                .map(|h| (g.inverse().product(h).cycles() as f64) - kf)
                .collect()
        })
        .collect();
    let gram = DMatrix::from_fn(n, n, |a, b| df.powf(tp * overlap[a][b]));
    let rhs = DVector::from_fn(n, |a, _| {
        let la = perms[a].cycles() as f64 - kf;
        (0..n)
            .map(|b| df.powf(half * (perms[b].cycles() as f64 - kf) + half * la + (tp - half) * overlap[a][b]))
            .sum()
    });
    let sv = gram.singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let cond = smax / smin;
    if !cond.is_finite() || cond > MAX_CONDITION {
        return numeric(format!(
            "Gram matrix at t={t}, d={d}, k={k} has condition number {cond:.3e} > {MAX_CONDITION:e}"
        ));
    }
    let sol = match gram.lu().solve(&rhs) {
        Some(s) => s,
        None => return numeric(format!("Gram matrix at t={t}, d={d}, k={k} is singular")),
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return numeric("finite-t solution is not finite");
    }
    Ok(AlphaCoefficients {
        k,
        context: AlphaContext::FiniteT { d, m, t },
        values: sol.iter().copied().collect(),
    })
}

/// `alpha(g) = d^{m (l(g) - k)}`.
pub fn alpha_large_t(m: usize, d: usize, k: usize) -> Result<AlphaCoefficients> {
    AlphaCoefficients::from_fn(k, AlphaContext::LargeT { d, m }, |g| {
        (d as f64).powi((m as i32) * (g.cycles() as i32 - k as i32))
    })
}

/// First two orders in `1/d`: identity 1, transpositions `d^-m`, the rest 0.
pub fn alpha_large_d(m: usize, d: usize, k: usize) -> Result<AlphaCoefficients> {
    AlphaCoefficients::from_fn(k, AlphaContext::LargeD { d, m }, |g| match k - g.cycles() {
        0 => 1.0,
        1 => (d as f64).powi(-(m as i32)),
        _ => 0.0,
    })
}

/// Erasure of `n_pairs` separated measurement pairs, iterating
/// `alpha_{i+1}(g) = alpha_i(g) d^{2(l(g) - k)}` from `alpha_0 = 1`. The
/// exponent is accumulated as an integer so the result lands exactly on
/// [`alpha_large_t`] with `m = 2 n_pairs`.
pub fn sparse_alpha(n_pairs: usize, d: usize, k: usize) -> Result<AlphaCoefficients> {
    AlphaCoefficients::from_fn(k, AlphaContext::Sparse { d, n_pairs }, |g| {
        let step = 2 * (g.cycles() as i32 - k as i32);
        let exponent = (0..n_pairs).fold(0i32, |e, _| e + step);
        (d as f64).powi(exponent)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPrediction {
    pub value: f64,
    /// `k < d^m`, where the leading-order expansion applies.
    pub small_k_regime: bool,
}

/// Leading finite-t distance `(1/d^{t+1})(1/d^m)(1 - 1/d^m) P_k` with the
/// transposition count `P_k = k(k-1)/2` for xi = 1 and its square root for xi = 2.
pub fn deviation_prediction(t: usize, m: usize, d: usize, k: usize, xi: u32) -> Result<DeviationPrediction> {
    let pairs = (k * k.saturating_sub(1) / 2) as f64;
    let count = match xi {
        1 => pairs,
        2 => pairs.sqrt(),
        _ => return arg(format!("Schatten index must be 1 or 2, got {xi}")),
    };
    let df = d as f64;
    let dm = df.powi(m as i32);
    let value = df.powi(-(t as i32 + 1)) / dm * (1.0 - 1.0 / dm) * count;
    Ok(DeviationPrediction {
        value,
        small_k_regime: (k as f64) < dm,
    })
}

type ExponentTable = Vec<((usize, usize, usize), u64)>;

/// Multiplicities of `(l(g^-1 sigma), l(g), l(sigma^-1 g))` over `S_{k+q}`.
fn entropy_table(k: usize, q: usize) -> Result<ExponentTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), ExponentTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache poisoned").get(&(k, q)) {
        return Ok(t.clone());
    }
    let perms = enumerate_sym(k + q)?;
    let sigma = Permutation::forward_cycle(k).extend(k + q);
    let sigma_inv = sigma.inverse();
    let mut counts: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
    for g in perms {
        let key = (
            g.inverse().product(&sigma).cycles(),
            g.cycles(),
            sigma_inv.product(g).cycles(),
        );
        *counts.entry(key).or_insert(0) += 1;
    }
    let table: ExponentTable = counts.into_iter().collect();
    cache.lock().expect("cache poisoned").insert((k, q), table.clone());
    Ok(table)
}

/// Annealed Renyi-k conditional entropy in the deep-circuit limit,
/// `-1/(k-1) log[sum_g d^{l(g^-1 s) + m l(g) + N_A l(s^-1 g)} / sum_g d^{l(g) + m l(g) + N_A l(s^-1 g)}]`
/// over `S_{k+q}` with `s` the forward k-cycle. Sums are exact integers.
pub fn conditional_entropy_analytic(n_a: usize, m: usize, d: usize, k: usize, q: usize) -> Result<Entropy> {
    if k < 2 {
        return arg(format!("conditional entropy needs k >= 2, got {k}"));
    }
    if k + q > MAX_ENUM_K {
        return resource(format!("k + q = {} exceeds the enumeration cap {MAX_ENUM_K}", k + q));
    }
    if d < 2 {
        return arg("local dimension must be at least 2");
    }
    let table = entropy_table(k, q)?;
    let mut num = BigUint::zero();
    let mut den = BigUint::zero();
    for &((a, b, c), count) in &table {
        let cnt = BigUint::from(count);
        num += &cnt * big_pow(d, a + m * b + n_a * c);
        den += cnt * big_pow(d, b + m * b + n_a * c);
    }
    let nats = -ratio_to_f64(&num, &den).ln() / (k as f64 - 1.0);
    Ok(Entropy::new(nats, d))
}
