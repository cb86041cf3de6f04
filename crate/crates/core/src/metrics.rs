//! Moment distances and entropies.

use serde::{Deserialize, Serialize};

use crate::error::{arg, numeric, Result};
use crate::linalg::{herm_eigvals, schatten_norm, ComplexMatrix};
use crate::mspe::{purity_averages, MomentTensor, MspeEnsemble};

/// Entropy in nats together with its value in units of `log d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    pub nats: f64,
    pub log_d_units: f64,
}

impl Entropy {
    pub fn new(nats: f64, d: usize) -> Self {
        Self {
            nats,
            log_d_units: nats / (d as f64).ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub k: usize,
    pub xi: u32,
    pub raw: f64,
    pub normalizer: f64,
    pub normalized: f64,
}

impl DistanceReport {
    /// `model,N,N_A,m,t,k,xi,delta`.
    pub fn csv_row(&self, model: &str, n: usize, n_a: usize, m: usize, t: f64) -> String {
        format!("{model},{n},{n_a},{m},{t},{},{},{:e}", self.k, self.xi, self.normalized)
    }
}

/// `||measured - reference||_xi / ||reference||_xi`.
pub fn ensemble_distance(measured: &MomentTensor, reference: &MomentTensor, xi: u32) -> Result<DistanceReport> {
    if measured.k != reference.k || measured.site_dim != reference.site_dim {
        return arg(format!(
            "cannot compare moments (k={}, dim={}) and (k={}, dim={})",
            measured.k, measured.site_dim, reference.k, reference.site_dim
        ));
    }
    if measured.matrix.rows() != reference.matrix.rows() {
        return arg("moment matrices have different shapes");
    }
    let normalizer = schatten_norm(&reference.matrix, xi)?;
    if normalizer <= 0.0 {
        return numeric("reference moment has zero norm");
    }
    let raw = if measured.matrix == reference.matrix {
        0.0
    } else {
        schatten_norm(&(&measured.matrix - &reference.matrix), xi)?
    };
    Ok(DistanceReport {
        k: measured.k,
        xi,
        raw,
        normalizer,
        normalized: raw / normalizer,
    })
}

const NEG_TOL: f64 = 1e-10;

fn spectrum(rho: &ComplexMatrix) -> Result<Vec<f64>> {
    let vals = herm_eigvals(rho)?;
    if let Some(&v) = vals.iter().find(|&&v| v < -NEG_TOL) {
        return numeric(format!("density matrix has eigenvalue {v:.3e}"));
    }
    Ok(vals.into_iter().map(|v| v.max(0.0)).collect())
}

/// `log(Tr rho^k) / (1 - k)` in nats, for real `k >= 0`, `k != 1`.
pub fn renyi_entropy(rho: &ComplexMatrix, k: f64) -> Result<f64> {
    if k.is_nan() || k < 0.0 || (k - 1.0).abs() < 1e-12 {
        return arg(format!("Renyi index must be >= 0 and != 1, got {k}"));
    }
    let vals = spectrum(rho)?;
    let tr: f64 = if k == 0.0 {
        vals.iter().filter(|&&v| v > 1e-12).count() as f64
    } else {
        vals.iter().filter(|&&v| v > 0.0).map(|v| v.powf(k)).sum()
    };
    Ok(tr.ln() / (1.0 - k))
}

/// `-(1/(k-1)) log(avg Tr rho_AR^k / avg Tr rho_A^k)`.
pub fn conditional_entropy_from_purities(ar: f64, a: f64, k: usize, d: usize) -> Result<Entropy> {
    if k < 2 {
        return arg(format!("conditional entropy needs k >= 2, got {k}"));
    }
    if !(ar > 0.0 && a > 0.0) {
        return numeric(format!("non-positive purity averages ({ar}, {a})"));
    }
    Ok(Entropy::new(-(ar / a).ln() / (k as f64 - 1.0), d))
}

pub fn annealed_conditional_entropy(ensemble: &MspeEnsemble, k: usize) -> Result<Entropy> {
    let (ar, a) = purity_averages(ensemble, k)?;
    conditional_entropy_from_purities(ar, a, k, ensemble.partition.layout.d)
}
