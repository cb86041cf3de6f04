//! Sweep execution: state preparation per model, ensembles, and aggregation
//! over realizations.

use std::collections::BTreeMap;

use mspe_core::circuits::{
    apply_layer, bell_pair_initial_state, mixed_field_hamiltonian, CircuitSpec, GateSource, HamiltonianPropagator,
};
use mspe_core::ensembles::{eigenvalue_histogram_with, haar_state, Histogram, HistogramOptions};
use mspe_core::linalg::checked_pow;
use mspe_core::metrics::{annealed_conditional_entropy, ensemble_distance};
use mspe_core::mspe::{
    build_mspe_with, moment_with_budget, BuildOptions, MeasurementBasis, MomentTensor, MspeEnsemble,
};
use mspe_core::permengine::ghs_moment_with_budget;
use mspe_core::{rng, ComplexMatrix, MspeError, PureState, QuditLayout};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Model, ReferenceEnsemble};

type Result<T> = std::result::Result<T, MspeError>;

pub fn basis_label(b: MeasurementBasis) -> &'static str {
    match b {
        MeasurementBasis::HeisenbergWeylPairs => "heisenberg-weyl-pairs",
        MeasurementBasis::Computational => "computational",
    }
}

pub const DISTANCE_HEADER: &str = "model,N,d,N_A,m,loss_layout,basis,t,k,xi,realizations,delta_mean,delta_stderr";
pub const ENTROPY_HEADER: &str = "model,N,d,N_A,m,t,k,I_mean,I_stderr";
pub const SPECTRUM_HEADER: &str = "model,N,d,N_A,m,t,bin_left,bin_right,count";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRow {
    pub model: Model,
    pub n: usize,
    pub d: usize,
    pub n_a: usize,
    pub m: usize,
    pub loss_layout: String,
    pub basis: MeasurementBasis,
    pub t: f64,
    pub k: usize,
    pub xi: u32,
    pub realizations: usize,
    pub delta_mean: f64,
    pub delta_stderr: f64,
}

impl DistanceRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model.name(),
            self.n,
            self.d,
            self.n_a,
            self.m,
            self.loss_layout,
            basis_label(self.basis),
            self.t,
            self.k,
            self.xi,
            self.realizations,
            self.delta_mean,
            self.delta_stderr
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyRow {
    pub model: Model,
    pub n: usize,
    pub d: usize,
    pub n_a: usize,
    pub m: usize,
    pub t: f64,
    pub k: usize,
    pub i_mean: f64,
    pub i_stderr: f64,
}

impl EntropyRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.model.name(),
            self.n,
            self.d,
            self.n_a,
            self.m,
            self.t,
            self.k,
            self.i_mean,
            self.i_stderr
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub n: usize,
    pub t: f64,
    pub rank_cap: usize,
    pub histogram: Histogram,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn realization_seed(cfg: &ExperimentConfig, n: usize, r: usize) -> u64 {
    rng::derive_seed(cfg.seed, &[n as u64, r as u64])
}

/// Per-size data shared by all realizations.
pub struct SizeContext {
    pub layout: QuditLayout,
    propagator: Option<HamiltonianPropagator>,
}

impl SizeContext {
    pub fn new(cfg: &ExperimentConfig, n: usize) -> Result<Self> {
        let layout = QuditLayout::new(n, cfg.d)?;
        let propagator = if cfg.model == Model::MixedFieldIsing {
            let p = cfg.params.mixed_field;
            let h = mixed_field_hamiltonian(layout, p.h_x, p.h_y, p.j)?;
            Some(HamiltonianPropagator::new(layout, &h, cfg.budgets.hamiltonian_sites)?)
        } else {
            None
        };
        Ok(Self { layout, propagator })
    }
}

fn gate_source(cfg: &ExperimentConfig) -> GateSource {
    match cfg.model {
        Model::DualUnitary => GateSource::DualUnitaryRandom,
        Model::KickedIsing => {
            let p = cfg.params.kicked_ising;
            GateSource::KickedIsing { h: p.h, j: p.j, g: p.g }
        }
        _ => GateSource::HaarRandom,
    }
}

/// Global states of realization `r` at every configured time, in sweep order.
pub fn snapshots(cfg: &ExperimentConfig, ctx: &SizeContext, r: usize) -> Result<Vec<PureState>> {
    let layout = ctx.layout;
    let seed = realization_seed(cfg, layout.n_sites, r);
    let times = cfg.times();
    match cfg.model {
        Model::GlobalHaarState => {
            let psi = haar_state(layout, seed);
            Ok(times.iter().map(|_| psi.clone()).collect())
        }
        Model::MixedFieldIsing => {
            let prop = ctx
                .propagator
                .as_ref()
                .expect("propagator built for Hamiltonian models");
            let zero = PureState::zero(layout);
            times.iter().map(|&t| prop.evolve(&zero, t)).collect()
        }
        _ => {
            let mut order: Vec<usize> = times.iter().map(|&t| t as usize).collect();
            order.sort_unstable();
            order.dedup();
            let depth = order.last().copied().unwrap_or(0);
            let spec = CircuitSpec {
                layout,
                depth,
                gate_source: gate_source(cfg),
                seed,
            };
            spec.validate()?;
            let mut state = bell_pair_initial_state(layout)?;
            let mut at = BTreeMap::new();
            let mut layer = 0;
            for &t in &order {
                while layer < t {
                    apply_layer(&mut state, &spec, layer)?;
                    layer += 1;
                }
                at.insert(t, state.clone());
            }
            Ok(times.iter().map(|&t| at[&(t as usize)].clone()).collect())
        }
    }
}

/// MSPE of every snapshot of one realization.
pub fn realization_ensembles(cfg: &ExperimentConfig, ctx: &SizeContext, r: usize) -> Result<Vec<MspeEnsemble>> {
    let opts = BuildOptions {
        outcome_budget: cfg.budgets.outcomes,
        ..BuildOptions::default()
    };
    let n = ctx.layout.n_sites;
    snapshots(cfg, ctx, r)?
        .iter()
        .zip(cfg.times())
        .map(|(psi, t)| build_mspe_with(psi, &cfg.partition_at(n, t)?, opts))
        .collect()
}

fn load_custom(path: &std::path::Path) -> Result<Vec<MomentTensor>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MspeError::Argument(format!("cannot read reference file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| MspeError::Argument(format!("reference file {}: {e}", path.display())))
}

/// Reference moments for each configured `k`.
pub fn reference_moments(cfg: &ExperimentConfig) -> Result<Vec<MomentTensor>> {
    let sub = cfg.subsystem_sites();
    let budget = cfg.budgets.dense;
    let custom = match &cfg.reference_ensemble {
        ReferenceEnsemble::CustomFile(p) => Some(load_custom(p)?),
        _ => None,
    };
    cfg.k
        .iter()
        .map(|&k| match (&cfg.reference_ensemble, &custom) {
            (ReferenceEnsemble::GhsAnalytic, _) => ghs_moment_with_budget(sub, cfg.partition.m, cfg.d, k, budget),
            (ReferenceEnsemble::HaarAnalytic, _) => ghs_moment_with_budget(sub, 0, cfg.d, k, budget),
            (_, Some(list)) => {
                let dim = checked_pow(cfg.d, sub)?;
                list.iter()
                    .find(|t| t.k == k && t.site_dim == dim)
                    .cloned()
                    .ok_or_else(|| {
                        MspeError::Argument(format!("reference file has no moment with k = {k} on dimension {dim}"))
                    })
            }
            _ => unreachable!(),
        })
        .collect()
}

/// Realizations in parallel, each a single deterministic computation,
/// returned in realization order.
fn per_realization<T: Send>(
    cfg: &ExperimentConfig,
    ctx: &SizeContext,
    f: impl Fn(Vec<MspeEnsemble>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..cfg.n_realizations)
        .into_par_iter()
        .map(|r| f(realization_ensembles(cfg, ctx, r)?))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn run_distance(cfg: &ExperimentConfig) -> Result<Vec<DistanceRow>> {
    let refs = reference_moments(cfg)?;
    let times = cfg.times();
    let mut rows = Vec::new();
    for n in cfg.sizes() {
        let ctx = SizeContext::new(cfg, n)?;
        // values[r][t][k][xi]
        let values = per_realization(cfg, &ctx, |ens| {
            ens.iter()
                .map(|e| {
                    cfg.k
                        .iter()
                        .zip(&refs)
                        .map(|(&k, reference)| {
                            let mom = moment_with_budget(e, k, cfg.budgets.dense)?;
                            cfg.xi
                                .iter()
                                .map(|&xi| Ok(ensemble_distance(&mom, reference, xi)?.normalized))
                                .collect()
                        })
                        .collect::<Result<Vec<Vec<f64>>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (ti, &t) in times.iter().enumerate() {
            for (ki, &k) in cfg.k.iter().enumerate() {
                for (xii, &xi) in cfg.xi.iter().enumerate() {
                    let xs: Vec<f64> = values.iter().map(|v| v[ti][ki][xii]).collect();
                    let (delta_mean, delta_stderr) = mean_stderr(&xs);
                    rows.push(DistanceRow {
                        model: cfg.model,
                        n,
                        d: cfg.d,
                        n_a: cfg.partition.n_a,
                        m: cfg.partition.m,
                        loss_layout: cfg.partition.loss_label(),
                        basis: cfg.basis(),
                        t,
                        k,
                        xi,
                        realizations: cfg.n_realizations,
                        delta_mean,
                        delta_stderr,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn run_entropy(cfg: &ExperimentConfig) -> Result<Vec<EntropyRow>> {
    let times = cfg.times();
    let mut rows = Vec::new();
    for n in cfg.sizes() {
        let ctx = SizeContext::new(cfg, n)?;
        let values = per_realization(cfg, &ctx, |ens| {
            ens.iter()
                .map(|e| {
                    cfg.k
                        .iter()
                        .map(|&k| Ok(annealed_conditional_entropy(e, k)?.nats))
                        .collect()
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })?;
        for (ti, &t) in times.iter().enumerate() {
            for (ki, &k) in cfg.k.iter().enumerate() {
                let xs: Vec<f64> = values.iter().map(|v| v[ti][ki]).collect();
                let (i_mean, i_stderr) = mean_stderr(&xs);
                rows.push(EntropyRow {
                    model: cfg.model,
                    n,
                    d: cfg.d,
                    n_a: cfg.partition.n_a,
                    m: cfg.partition.m,
                    t,
                    k,
                    i_mean,
                    i_stderr,
                });
            }
        }
    }
    Ok(rows)
}

/// Born-weighted eigenvalue histograms pooled over outcomes and realizations,
/// keeping the top `min(d^{N_A}, d^m)` eigenvalues of each conditional state
/// (the largest rank any of them can have).
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumPoint>> {
    let times = cfg.times();
    let cap = checked_pow(cfg.d, cfg.subsystem_sites())?.min(checked_pow(cfg.d, cfg.partition.m)?);
    let mut points = Vec::new();
    for n in cfg.sizes() {
        let ctx = SizeContext::new(cfg, n)?;
        let pooled: Vec<Vec<(Vec<ComplexMatrix>, Vec<f64>)>> = per_realization(cfg, &ctx, |ens| {
            Ok(ens
                .into_iter()
                .map(|e| e.entries.into_iter().map(|x| (x.state, x.probability)).unzip())
                .collect())
        })?;
        for (ti, &t) in times.iter().enumerate() {
            let mut states = Vec::new();
            let mut weights = Vec::new();
            for real in &pooled {
                states.extend(real[ti].0.iter().cloned());
                weights.extend(real[ti].1.iter().copied());
            }
            let opts = HistogramOptions {
                rank_cap: Some(cap),
                weights: Some(weights),
            };
            let histogram = eigenvalue_histogram_with(&states, cfg.histogram_bins, &opts)?;
            points.push(SpectrumPoint {
                n,
                t,
                rank_cap: cap,
                histogram,
            });
        }
    }
    Ok(points)
}

pub fn distance_csv(rows: &[DistanceRow]) -> String {
    csv(DISTANCE_HEADER, rows.iter().map(DistanceRow::csv))
}

pub fn entropy_csv(rows: &[EntropyRow]) -> String {
    csv(ENTROPY_HEADER, rows.iter().map(EntropyRow::csv))
}

pub fn spectrum_csv(cfg: &ExperimentConfig, points: &[SpectrumPoint]) -> String {
    let lines = points.iter().flat_map(|p| {
        let h = &p.histogram;
        (0..h.counts.len()).map(move |i| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                cfg.model.name(),
                p.n,
                cfg.d,
                cfg.partition.n_a,
                cfg.partition.m,
                p.t,
                h.edges[i],
                h.edges[i + 1],
                h.counts[i]
            )
        })
    });
    csv(SPECTRUM_HEADER, lines)
}

fn csv(header: &str, lines: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}
