//! Monte-Carlo reference ensembles and spectral statistics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, numeric, Result};
use crate::linalg::{checked_pow, herm_eigvals, ComplexMatrix, PureState, QuditLayout, C64};
use crate::mspe::{kron_power, MomentTensor};
use crate::rng;

const CHUNK: usize = 64;
const NEG_TOL: f64 = 1e-10;

/// Normalized complex Gaussian vector.
pub fn haar_vector(dim: usize, r: &mut impl Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    v
}

pub fn haar_state(layout: QuditLayout, seed: u64) -> PureState {
    let mut r = rng::stream(seed, &[]);
    PureState {
        layout,
        amps: haar_vector(layout.dim(), &mut r),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SamplerKind {
    HaarPure,
    /// Trace `m` qudits out of a Haar state on `n_a + m`.
    Ghs {
        n_a: usize,
        m: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Register the pure state is drawn on (`n_a + m` sites for `Ghs`).
    pub layout: QuditLayout,
    pub seed: u64,
    pub n_samples: usize,
}

impl SamplerSpec {
    pub fn ghs(n_a: usize, m: usize, d: usize, seed: u64, n_samples: usize) -> Result<Self> {
        Ok(Self {
            kind: SamplerKind::Ghs { n_a, m },
            layout: QuditLayout::new(n_a + m, d)?,
            seed,
            n_samples,
        })
    }

    fn validate(&self) -> Result<()> {
        if let SamplerKind::Ghs { n_a, m } = self.kind {
            if n_a == 0 || n_a + m != self.layout.n_sites {
                return arg(format!(
                    "GHS sampler with N_A = {n_a}, m = {m} needs a register of {} sites, got {}",
                    n_a + m,
                    self.layout.n_sites
                ));
            }
        }
        Ok(())
    }

    fn kept_sites(&self) -> Vec<usize> {
        match self.kind {
            SamplerKind::HaarPure => (0..self.layout.n_sites).collect(),
            SamplerKind::Ghs { n_a, .. } => (0..n_a).collect(),
        }
    }

    /// Sample number `index`, reproducible on its own.
    pub fn sample(&self, index: usize) -> Result<ComplexMatrix> {
        self.validate()?;
        let mut r = rng::stream(self.seed, &[index as u64]);
        let psi = PureState {
            layout: self.layout,
            amps: haar_vector(self.layout.dim(), &mut r),
        };
        match self.kind {
            SamplerKind::HaarPure => Ok(psi.density_matrix()),
            SamplerKind::Ghs { .. } => psi.reduced_density_matrix(&self.kept_sites()),
        }
    }
}

/// First sample of a GHS sampler.
pub fn sample_ghs(spec: &SamplerSpec) -> Result<ComplexMatrix> {
    if !matches!(spec.kind, SamplerKind::Ghs { .. }) {
        return arg("sample_ghs needs a GHS sampler");
    }
    spec.sample(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McMoment {
    pub moment: MomentTensor,
    /// Standard error of the mean, real and imaginary parts separately.
    pub stderr: ComplexMatrix,
    pub n_samples: usize,
}

impl McMoment {
    pub fn stderr_frobenius(&self) -> f64 {
        self.stderr.frobenius_norm()
    }
}

/// `(1/n) sum rho^{(x)k}` over the sampler with plug-in standard errors.
pub fn mc_moment(spec: &SamplerSpec, k: usize) -> Result<McMoment> {
    spec.validate()?;
    if spec.n_samples == 0 {
        return arg("Monte-Carlo moment needs at least one sample");
    }
    if k == 0 {
        return arg("moment order must be at least 1");
    }
    let site_dim = checked_pow(spec.layout.d, spec.kept_sites().len())?;
    let dim = checked_pow(site_dim, k)?;
    if dim > crate::DEFAULT_DENSE_BUDGET {
        return crate::error::resource(format!("moment dimension {dim} exceeds the dense budget"));
    }
    let idx: Vec<usize> = (0..spec.n_samples).collect();
    let partials: Vec<Result<(Vec<C64>, Vec<C64>)>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![C64::new(0.0, 0.0); dim * dim];
            // (re^2, im^2) packed into a complex number
            let mut sq = vec![C64::new(0.0, 0.0); dim * dim];
            for &i in chunk {
                let t = kron_power(&spec.sample(i)?, k)?;
                for ((s, q), z) in sum.iter_mut().zip(sq.iter_mut()).zip(t.data()) {
                    *s += z;
                    *q += C64::new(z.re * z.re, z.im * z.im);
                }
            }
            Ok((sum, sq))
        })
        .collect();
    let mut sum = vec![C64::new(0.0, 0.0); dim * dim];
    let mut sq = vec![C64::new(0.0, 0.0); dim * dim];
    for p in partials {
        let (s, q) = p?;
        for (a, b) in sum.iter_mut().zip(&s) {
            *a += b;
        }
        for (a, b) in sq.iter_mut().zip(&q) {
            *a += b;
        }
    }
    let n = spec.n_samples as f64;
    let mean: Vec<C64> = sum.iter().map(|s| s / n).collect();
    let se = |m2: f64, mu: f64| -> f64 {
        if spec.n_samples < 2 {
            return 0.0;
        }
        let var = ((m2 / n - mu * mu) * n / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    };
    let stderr: Vec<C64> = mean
        .iter()
        .zip(&sq)
        .map(|(mu, q)| C64::new(se(q.re, mu.re), se(q.im, mu.im)))
        .collect();
    Ok(McMoment {
        moment: MomentTensor {
            k,
            site_dim,
            matrix: ComplexMatrix::from_vec(dim, dim, mean)?,
        },
        stderr: ComplexMatrix::from_vec(dim, dim, stderr)?,
        n_samples: spec.n_samples,
    })
}

#[derive(Clone, Debug, Default)]
pub struct HistogramOptions {
    /// Keep only the largest `cap` eigenvalues of every state, e.g. the
    /// maximal possible rank of the ensemble.
    pub rank_cap: Option<usize>,
    /// Per-state weights for the reported mean and variance (counts stay raw).
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub n_values: u64,
}

impl Histogram {
    /// `bin_left,bin_right,count` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }
}

/// Pooled eigenvalue histogram on `bins` uniform bins over `[0, 1]`.
pub fn eigenvalue_histogram(states: &[ComplexMatrix], bins: usize) -> Result<Histogram> {
    eigenvalue_histogram_with(states, bins, &HistogramOptions::default())
}

pub fn eigenvalue_histogram_with(states: &[ComplexMatrix], bins: usize, opts: &HistogramOptions) -> Result<Histogram> {
    if states.is_empty() {
        return arg("eigenvalue histogram needs at least one state");
    }
    if bins == 0 {
        return arg("eigenvalue histogram needs at least one bin");
    }
    let dim = states[0].rows();
    if states.iter().any(|s| s.rows() != dim || !s.is_square()) {
        return arg("all states must have the same dimension");
    }
    if let Some(w) = &opts.weights {
        if w.len() != states.len() {
            return arg(format!("{} weights for {} states", w.len(), states.len()));
        }
    }
    let keep = opts.rank_cap.unwrap_or(dim).min(dim);
    let spectra: Vec<Result<Vec<f64>>> = states.par_iter().map(herm_eigvals).collect();
    let mut counts = vec![0u64; bins];
    let (mut wsum, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (i, sp) in spectra.into_iter().enumerate() {
        let sp = sp?;
        let w = opts.weights.as_ref().map_or(1.0, |w| w[i]);
        for &v in sp.iter().take(keep) {
            if v < -NEG_TOL {
                return numeric(format!("state {i} has eigenvalue {v:.3e}"));
            }
            let v = v.max(0.0);
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
            wsum += w;
            s1 += w * v;
            s2 += w * v * v;
        }
    }
    let mean = s1 / wsum;
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(Histogram {
        edges,
        counts,
        mean,
        variance: (s2 / wsum - mean * mean).max(0.0),
        n_values: (states.len() * keep) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_power;
    use crate::permengine::ghs_moment;

    #[test]
    fn haar_state_examples() {
        let l = QuditLayout::new(3, 2).unwrap();
        let s = haar_state(l, 5);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert_eq!(s, haar_state(l, 5));
        assert_ne!(s, haar_state(l, 6));
        let spec = SamplerSpec {
            kind: SamplerKind::HaarPure,
            layout: QuditLayout::new(2, 2).unwrap(),
            seed: 1,
            n_samples: 10_000,
        };
        let mc = mc_moment(&spec, 1).unwrap();
        let bound = 5.0 / 100.0;
        assert!(
            mc.moment
                .matrix
                .max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25))
                < bound
        );
    }

    #[test]
    fn ghs_samples() {
        let pure = SamplerSpec::ghs(2, 0, 2, 3, 1).unwrap();
        let rho = sample_ghs(&pure).unwrap();
        assert!((trace_power(&rho, 2).unwrap() - 1.0).abs() < 1e-10);
        let spec = SamplerSpec::ghs(1, 1, 2, 4, 1).unwrap();
        let rho = sample_ghs(&spec).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(herm_eigvals(&rho).unwrap().iter().all(|&v| v > -1e-10));
        let bad = SamplerSpec {
            kind: SamplerKind::Ghs { n_a: 1, m: 1 },
            layout: QuditLayout::new(3, 2).unwrap(),
            seed: 0,
            n_samples: 1,
        };
        assert!(sample_ghs(&bad).is_err());
    }

    #[test]
    fn ghs_first_moment_and_purity() {
        let spec = SamplerSpec::ghs(1, 1, 2, 21, 10_000).unwrap();
        let mc = mc_moment(&spec, 1).unwrap();
        let target = ComplexMatrix::identity(2).scale_real(0.5);
        for (i, (x, y)) in mc.moment.matrix.data().iter().zip(target.data()).enumerate() {
            let se = mc.stderr.data()[i];
            assert!((x.re - y.re).abs() <= 5.0 * se.re + 1e-12);
            assert!((x.im - y.im).abs() <= 5.0 * se.im + 1e-12);
        }
        let purities: Vec<f64> = (0..10_000)
            .map(|i| trace_power(&spec.sample(i).unwrap(), 2).unwrap())
            .collect();
        let n = purities.len() as f64;
        let mean = purities.iter().sum::<f64>() / n;
        let sd = (purities.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let want = {
            let g = ghs_moment(1, 1, 2, 2).unwrap();
            (&crate::circuits::Gate::swap(2).matrix * &g.matrix).trace().re
        };
        assert!((mean - want).abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn stderr_scales_as_inverse_sqrt_n() {
        let small = mc_moment(&SamplerSpec::ghs(1, 1, 2, 31, 1000).unwrap(), 2).unwrap();
        let large = mc_moment(&SamplerSpec::ghs(1, 1, 2, 32, 4000).unwrap(), 2).unwrap();
        let ratio = small.stderr_frobenius() / large.stderr_frobenius();
        assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
        assert!(mc_moment(&SamplerSpec::ghs(1, 1, 2, 0, 0).unwrap(), 2).is_err());
    }

    #[test]
    fn disjoint_seeds_are_uncorrelated() {
        let n = 10_000;
        let a = SamplerSpec::ghs(1, 1, 2, 100, n).unwrap();
        let b = SamplerSpec::ghs(1, 1, 2, 101, n).unwrap();
        let pa: Vec<f64> = (0..n).map(|i| trace_power(&a.sample(i).unwrap(), 2).unwrap()).collect();
        let pb: Vec<f64> = (0..n).map(|i| trace_power(&b.sample(i).unwrap(), 2).unwrap()).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&pa), mean(&pb));
        let cov: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = pa.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = pb.iter().map(|y| (y - mb).powi(2)).sum();
        let r = cov / (va * vb).sqrt();
        assert!(r.abs() * (n as f64).sqrt() < 3.0, "correlation {r}");
        assert_eq!(a.sample(17).unwrap(), a.sample(17).unwrap());
    }

    #[test]
    fn histogram_examples() {
        let pure = vec![ComplexMatrix::diag(&[1.0, 0.0, 0.0, 0.0]); 3];
        let h = eigenvalue_histogram(&pure, 64).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 12);
        assert_eq!(h.counts[63], 3);
        assert_eq!(h.counts[0], 9);
        let mixed = vec![ComplexMatrix::identity(4).scale_real(0.25); 5];
        let h = eigenvalue_histogram(&mixed, 64).unwrap();
        assert_eq!(h.counts[16], 20);
        assert!((h.mean - 0.25).abs() < 1e-15 && h.variance < 1e-15);
        assert!(eigenvalue_histogram(&[], 64).is_err());
        assert!(eigenvalue_histogram(&[ComplexMatrix::diag(&[1.5, -0.5])], 4).is_err());
        let capped = eigenvalue_histogram_with(
            &pure,
            8,
            &HistogramOptions {
                rank_cap: Some(1),
                weights: None,
            },
        )
        .unwrap();
        assert_eq!(capped.counts.iter().sum::<u64>(), 3);
        assert_eq!(capped.mean, 1.0);
        let csv = capped.to_csv();
        assert!(csv.starts_with("bin_left,bin_right,count\n0,0.125,0\n"));
        assert_eq!(csv.lines().count(), 9);
    }
}
