//! Mixed-state projected ensembles.
//!
//! The chain is split as `A | B` with `A = 0..N_A` on the left. Inside `B`
//! some sites are lost (traced out), an optional reference qudit `R` (the
//! rightmost site) stays unmeasured, and everything else is measured either
//! site by site in the computational basis or pairwise in the
//! Heisenberg-Weyl (generalized Bell) basis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::apply_two_site;
use crate::error::{arg, resource, MspeError, Result};
use crate::linalg::{
    checked_pow, kron, partial_trace, site_offsets, trace_power, ComplexMatrix, PureState, QuditLayout, C64,
};

/// Default cap on the number of enumerated outcomes.
pub const DEFAULT_OUTCOME_BUDGET: usize = 1 << 24;
/// Outcomes with a smaller Born weight have no defined conditional state.
pub const MIN_PROBABILITY: f64 = 1e-14;
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementBasis {
    HeisenbergWeylPairs,
    Computational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossLayout {
    /// One block of `m` sites centred in `B`.
    Consecutive,
    /// `m / 2` lost pairs with `gap` retained sites between neighbours.
    Sparse { gap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub layout: QuditLayout,
    pub n_a: usize,
    pub lost_sites: Vec<usize>,
    pub reference: bool,
    pub basis: MeasurementBasis,
    /// Left sites of Heisenberg-Weyl measured pairs.
    pub pairs: Vec<usize>,
    /// Sites measured one at a time in the computational basis.
    pub singles: Vec<usize>,
}

impl Partition {
    /// Partition with `A = 0..n_a`, explicit lost sites, and (for the
    /// Heisenberg-Weyl basis) measurement pairs `(i, i+1)` with
    /// `i = pair_parity (mod 2)`. Measured sites left without a partner are
    /// measured in the computational basis.
    pub fn from_sites(
        layout: QuditLayout,
        n_a: usize,
        mut lost_sites: Vec<usize>,
        reference: bool,
        basis: MeasurementBasis,
        pair_parity: usize,
    ) -> Result<Self> {
        let n = layout.n_sites;
        let r_sites = usize::from(reference);
        if n_a == 0 {
            return arg("subsystem A needs at least one site");
        }
        if n_a + r_sites > n {
            return arg(format!("N_A = {n_a} plus the reference does not fit in {n} sites"));
        }
        lost_sites.sort_unstable();
        if lost_sites.windows(2).any(|w| w[0] == w[1]) {
            return arg("lost sites listed twice");
        }
        let b_end = n - r_sites;
        if let Some(&s) = lost_sites.iter().find(|&&s| s < n_a || s >= b_end) {
            return arg(format!("lost site {s} is outside the bath {n_a}..{b_end}"));
        }
        let is_lost = |s: usize| lost_sites.binary_search(&s).is_ok();
        let measured: Vec<usize> = (n_a..b_end).filter(|&s| !is_lost(s)).collect();
        let (mut pairs, mut singles) = (Vec::new(), Vec::new());
        match basis {
            MeasurementBasis::Computational => singles = measured,
            MeasurementBasis::HeisenbergWeylPairs => {
                let mut i = 0;
                while i < measured.len() {
                    let s = measured[i];
                    if s % 2 == pair_parity % 2 && measured.get(i + 1) == Some(&(s + 1)) {
                        pairs.push(s);
                        i += 2;
                    } else {
                        singles.push(s);
                        i += 1;
                    }
                }
            }
        }
        Ok(Self {
            layout,
            n_a,
            lost_sites,
            reference,
            basis,
            pairs,
            singles,
        })
    }

    /// Standard geometry after `depth` brick-wall layers: lost sites centred
    /// in `B`, measurement pairs offset from the last gate layer
    /// (`i = depth (mod 2)`), so that pairs of lost/measured sites line up.
    pub fn standard(
        layout: QuditLayout,
        n_a: usize,
        m: usize,
        loss: LossLayout,
        reference: bool,
        basis: MeasurementBasis,
        depth: usize,
    ) -> Result<Self> {
        let n = layout.n_sites;
        let r_sites = usize::from(reference);
        if n_a == 0 || n_a + r_sites > n {
            return arg(format!("N_A = {n_a} does not fit in {n} sites"));
        }
        let n_b = n - n_a - r_sites;
        if m > n_b {
            return arg(format!("lost sites exceed bath: m = {m} > N_B = {n_b}"));
        }
        let parity = depth % 2;
        let paired = basis == MeasurementBasis::HeisenbergWeylPairs;
        let (unit, gap, units) = match loss {
            LossLayout::Consecutive => (m, 0, usize::from(m > 0)),
            LossLayout::Sparse { gap } => {
                if !m.is_multiple_of(2) {
                    return arg(format!("sparse loss needs an even m, got {m}"));
                }
                (2, gap, m / 2)
            }
        };
        if paired && (unit % 2 != 0 || gap % 2 != 0) {
            return arg(format!(
                "Heisenberg-Weyl pairs need lost blocks of whole pairs (m = {m}, gap = {gap})"
            ));
        }
        let span = if units == 0 {
            0
        } else {
            units * unit + (units - 1) * gap
        };
        if span > n_b {
            return arg(format!("lost sites exceed bath: layout spans {span} > N_B = {n_b}"));
        }
        let centre = n_a + (n_b - span) / 2;
        let fits = |s: usize| s >= n_a && s + span <= n_a + n_b;
        let start = if !paired || span == 0 || centre % 2 == parity {
            centre
        } else if fits(centre + 1) {
            centre + 1
        } else if centre > 0 && fits(centre - 1) {
            centre - 1
        } else {
            return arg(format!("no pair-aligned position for {span} lost sites in N_B = {n_b}"));
        };
        let lost: Vec<usize> = (0..units)
            .flat_map(|u| (0..unit).map(move |j| start + u * (unit + gap) + j))
            .collect();
        Self::from_sites(layout, n_a, lost, reference, basis, parity)
    }

    pub fn m(&self) -> usize {
        self.lost_sites.len()
    }

    /// Sites the conditional states live on: `A`, then `R`.
    pub fn subsystem_sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = (0..self.n_a).collect();
        if self.reference {
            s.push(self.layout.n_sites - 1);
        }
        s
    }

    /// Measured sites in ascending order; a pair's outcome occupies its two digits.
    pub fn measured_sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.singles.clone();
        s.extend(self.pairs.iter().flat_map(|&p| [p, p + 1]));
        s.sort_unstable();
        s
    }

    pub fn outcome_count(&self) -> Result<usize> {
        checked_pow(self.layout.d, self.measured_sites().len())
    }
}

/// `|phi_a> = (I (x) X^x Z^z)|phi_0>` for `a = x d + z`, as amplitude vectors
/// over two qudits.
pub fn heisenberg_weyl_basis(d: usize) -> Vec<Vec<C64>> {
    let norm = 1.0 / (d as f64).sqrt();
    let mut out = Vec::with_capacity(d * d);
    for x in 0..d {
        for z in 0..d {
            let mut v = vec![C64::new(0.0, 0.0); d * d];
            for i in 0..d {
                let phase = C64::from_polar(norm, 2.0 * std::f64::consts::PI * (z * i) as f64 / d as f64);
                v[i * d + (i + x) % d] = phase;
            }
            out.push(v);
        }
    }
    out
}

/// Unitary with rows `<phi_a|`; applying it maps a pair onto outcome digits.
pub fn heisenberg_weyl_rotation(d: usize) -> ComplexMatrix {
    let basis = heisenberg_weyl_basis(d);
    ComplexMatrix::from_fn(d * d, d * d, |a, c| basis[a][c].conj())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MspeEntry {
    /// Big-endian index over the measured sites.
    pub outcome: u64,
    pub probability: f64,
    pub state: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MspeEnsemble {
    pub partition: Partition,
    pub entries: Vec<MspeEntry>,
}

impl MspeEnsemble {
    pub fn site_dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.state.rows())
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| MspeError::Numeric(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub outcome_budget: usize,
    /// Outcomes with `P <= floor` are dropped (the default keeps all).
    pub probability_floor: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            outcome_budget: DEFAULT_OUTCOME_BUDGET,
            probability_floor: 0.0,
        }
    }
}

pub fn build_mspe(state: &PureState, partition: &Partition) -> Result<MspeEnsemble> {
    build_mspe_with(state, partition, BuildOptions::default())
}

pub fn build_mspe_with(state: &PureState, partition: &Partition, opts: BuildOptions) -> Result<MspeEnsemble> {
    let layout = state.layout;
    if layout != partition.layout {
        return arg(format!(
            "state layout {layout:?} does not match the partition layout {:?}",
            partition.layout
        ));
    }
    let outcomes = partition.outcome_count()?;
    if outcomes > opts.outcome_budget {
        return resource(format!(
            "{outcomes} measurement outcomes exceed the enumeration budget {}",
            opts.outcome_budget
        ));
    }
    let mut rotated = state.clone();
    if !partition.pairs.is_empty() {
        let w = heisenberg_weyl_rotation(layout.d);
        for &p in &partition.pairs {
            apply_two_site(&mut rotated, p, &w)?;
        }
    }
    let sub = partition.subsystem_sites();
    let mut kept = sub.clone();
    kept.extend(&partition.lost_sites);
    let ko = site_offsets(&layout, &kept);
    let oo = site_offsets(&layout, &partition.measured_sites());
    let sub_dim = checked_pow(layout.d, sub.len())?;
    let lost_dim = ko.len() / sub_dim;
    let floor = opts.probability_floor.max(0.0);
    let amps = &rotated.amps;

    let chunks: Vec<Vec<MspeEntry>> = (0..oo.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut out = Vec::new();
            let mut v = vec![C64::new(0.0, 0.0); ko.len()];
            for &o in idx {
                for (x, &k) in v.iter_mut().zip(&ko) {
                    *x = amps[k + oo[o]];
                }
                let p: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                if p < MIN_PROBABILITY || p <= floor {
                    continue;
                }
                let mut rho = ComplexMatrix::zeros(sub_dim, sub_dim);
                for r in 0..sub_dim {
                    for c in r..sub_dim {
                        let z: C64 = (0..lost_dim)
                            .map(|e| v[r * lost_dim + e] * v[c * lost_dim + e].conj())
                            .sum::<C64>()
                            / p;
                        rho[(r, c)] = z;
                        rho[(c, r)] = z.conj();
                    }
                }
                out.push(MspeEntry {
                    outcome: o as u64,
                    probability: p,
                    state: rho,
                });
            }
            out
        })
        .collect();
    let entries: Vec<MspeEntry> = chunks.into_iter().flatten().collect();
    if entries.is_empty() {
        return Err(MspeError::EmptyEnsemble(format!(
            "probability floor {floor} excludes every outcome"
        )));
    }
    Ok(MspeEnsemble {
        partition: partition.clone(),
        entries,
    })
}

/// `Tr_B |psi><psi|` on the ensemble's subsystem (A, then R).
pub fn reduced_state(state: &PureState, partition: &Partition) -> Result<ComplexMatrix> {
    state.reduced_density_matrix(&partition.subsystem_sites())
}

/// Density matrix on `k` replicas of a `site_dim`-dimensional subsystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTensor {
    pub k: usize,
    pub site_dim: usize,
    pub matrix: ComplexMatrix,
}

impl MomentTensor {
    /// Largest entry-wise change under conjugation by any replica permutation.
    pub fn replica_symmetry_defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for g in crate::permengine::enumerate_sym(self.k)? {
            let c = crate::permengine::conjugate_by_replica_perm(&self.matrix, g, self.site_dim)?;
            worst = worst.max(c.max_abs_diff(&self.matrix));
        }
        Ok(worst)
    }
}

pub fn kron_power(rho: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    let mut out = rho.clone();
    for _ in 1..k {
        out = kron(&out, rho)?;
    }
    Ok(out)
}

/// `sum_a P_a rho_a^{(x)k}`, summed in fixed chunks so the result does not
/// depend on the thread count.
pub fn moment(ensemble: &MspeEnsemble, k: usize) -> Result<MomentTensor> {
    moment_with_budget(ensemble, k, crate::DEFAULT_DENSE_BUDGET)
}

pub fn moment_with_budget(ensemble: &MspeEnsemble, k: usize, budget: usize) -> Result<MomentTensor> {
    if k == 0 {
        return arg("moment order must be at least 1");
    }
    let site_dim = ensemble.site_dim();
    let dim = checked_pow(site_dim, k)?;
    if dim > budget {
        return resource(format!("moment dimension {dim} exceeds the dense budget {budget}"));
    }
    let partials: Vec<Result<ComplexMatrix>> = ensemble
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for e in chunk {
                acc.add_scaled(&kron_power(&e.state, k)?, e.probability.into());
            }
            Ok(acc)
        })
        .collect();
    let mut total = ComplexMatrix::zeros(dim, dim);
    for p in partials {
        total.add_scaled(&p?, 1.0.into());
    }
    Ok(MomentTensor {
        k,
        site_dim,
        matrix: total,
    })
}

/// Born-weighted `(avg Tr rho_AR^k, avg Tr rho_A^k)`.
pub fn purity_averages(ensemble: &MspeEnsemble, k: usize) -> Result<(f64, f64)> {
    let part = &ensemble.partition;
    if !part.reference {
        return arg("purity averages need an ensemble with a reference qudit");
    }
    if k < 2 {
        return arg(format!("purity averages need k >= 2, got {k}"));
    }
    let sub = QuditLayout::new(part.n_a + 1, part.layout.d)?;
    let keep_a: Vec<usize> = (0..part.n_a).collect();
    let rows: Vec<Result<(f64, f64)>> = ensemble
        .entries
        .par_iter()
        .map(|e| {
            let ar = trace_power(&e.state, k)?;
            let a = trace_power(&partial_trace(&e.state, &sub, &keep_a)?, k)?;
            Ok((e.probability * ar, e.probability * a))
        })
        .collect();
    let (mut ar, mut a) = (0.0, 0.0);
    for r in rows {
        let (x, y) = r?;
        ar += x;
        a += y;
    }
    Ok((ar, a))
}
