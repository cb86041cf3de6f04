//! Initial states, two-qudit gate families and layered evolution.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg, resource, Result};
use crate::linalg::{herm_eig, herm_expm, kron, pauli, ComplexMatrix, PureState, QuditLayout, C64};
use crate::rng;

pub const UNITARY_TOL: f64 = 1e-10;

/// Largest chain diagonalized densely for Hamiltonian evolution (`2^12 = 4096`).
pub const DEFAULT_HAMILTONIAN_SITES: usize = 12;

/// Two-qudit gate, `d^2 x d^2`, acting on `(left, right)` with the left qudit
/// as the more significant digit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub matrix: ComplexMatrix,
    pub label: String,
}

impl Gate {
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if local_dim_of(&matrix).is_none() {
            return arg(format!(
                "gate '{label}' is {}x{}, not d^2 x d^2",
                matrix.rows(),
                matrix.cols()
            ));
        }
        if !matrix.is_unitary(UNITARY_TOL) {
            return arg(format!("gate '{label}' is not unitary within {UNITARY_TOL:e}"));
        }
        Ok(Self { matrix, label })
    }

    pub fn d(&self) -> usize {
        local_dim_of(&self.matrix).expect("validated at construction")
    }

    pub fn swap(d: usize) -> Self {
        let n = d * d;
        let m = ComplexMatrix::from_fn(n, n, |r, c| {
            let (i, j) = (c / d, c % d);
            if r == j * d + i {
                1.0.into()
            } else {
                0.0.into()
            }
        });
        Self {
            matrix: m,
            label: "swap".into(),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(d * d),
            label: "identity".into(),
        }
    }

    pub fn cnot() -> Self {
        let mut m = ComplexMatrix::zeros(4, 4);
        for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, c)] = 1.0.into();
        }
        Self {
            matrix: m,
            label: "cnot".into(),
        }
    }
}

fn local_dim_of(m: &ComplexMatrix) -> Option<usize> {
    if !m.is_square() {
        return None;
    }
    let d = (m.rows() as f64).sqrt().round() as usize;
    (d >= 2 && d * d == m.rows()).then_some(d)
}

/// Haar unitary of dimension `n`: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_nalgebra(&q)
}

pub fn haar_gate(d: usize, seed: u64) -> Gate {
    let mut r = rng::stream(seed, &[]);
    haar_gate_from(d, &mut r)
}

fn haar_gate_from(d: usize, r: &mut impl Rng) -> Gate {
    Gate {
        matrix: haar_unitary(d * d, r),
        label: "haar".into(),
    }
}

/// `|phi_0>^{n/2}` with `|phi_0> = sum_i |ii>/sqrt(d)` on pairs `(0,1), (2,3), ...`.
pub fn bell_pair_initial_state(layout: QuditLayout) -> Result<PureState> {
    if !layout.n_sites.is_multiple_of(2) {
        return arg(format!(
            "Bell-pair initial state needs an even number of sites, got {}",
            layout.n_sites
        ));
    }
    let d = layout.d;
    let pairs = layout.n_sites / 2;
    let amp = (d as f64).powf(-(pairs as f64) / 2.0);
    let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
    // enumerate the d^pairs diagonal configurations
    for cfg in 0..d.pow(pairs as u32) {
        let mut idx = 0usize;
        let mut rest = cfg;
        for p in (0..pairs).rev() {
            let v = rest % d;
            rest /= d;
            idx += v * (layout.stride(2 * p) + layout.stride(2 * p + 1));
        }
        amps[idx] = amp.into();
    }
    PureState::new(layout, amps)
}

/// `(u1 (x) u2) exp(-i[(pi/4)(XX + YY) + J ZZ]) (v1 (x) v2)`, locals ordered
/// `[u1, u2, v1, v2]`. Qubits only.
pub fn dual_unitary_gate(j: f64, locals: [&ComplexMatrix; 4]) -> Result<Gate> {
    for (i, u) in locals.iter().enumerate() {
        if (u.rows(), u.cols()) != (2, 2) {
            return arg(format!(
                "dual-unitary parametrization is only defined for qubits; local {i} is {}x{}",
                u.rows(),
                u.cols()
            ));
        }
        if !u.is_unitary(UNITARY_TOL) {
            return arg(format!("local {i} is not unitary"));
        }
    }
    let xx = kron(&pauli::x(), &pauli::x())?;
    let yy = kron(&pauli::y(), &pauli::y())?;
    let zz = kron(&pauli::z(), &pauli::z())?;
    let mut h = (&xx + &yy).scale_real(FRAC_PI_4);
    h.add_scaled(&zz, j.into());
    let core = herm_expm(&h, -1.0)?;
    let left = kron(locals[0], locals[1])?;
    let right = kron(locals[2], locals[3])?;
    Gate::new(&(&left * &core) * &right, format!("dual-unitary(J={j})"))
}

/// Draws `J ~ U[0, pi/4]` and Haar locals.
pub fn random_dual_unitary_gate(r: &mut impl Rng) -> Gate {
    let j = r.random_range(0.0..FRAC_PI_4);
    let us: Vec<ComplexMatrix> = (0..4).map(|_| haar_unitary(2, r)).collect();
    dual_unitary_gate(j, [&us[0], &us[1], &us[2], &us[3]]).expect("Haar locals are unitary qubit gates")
}

/// Reshuffle `U_{(i,j),(k,l)} -> U~_{(i,k),(j,l)}`, exchanging the right input
/// leg with the left output leg.
pub fn reshuffle(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let d = local_dim_of(m)?;
    let n = d * d;
    Some(ComplexMatrix::from_fn(n, n, |r, c| {
        let (i, k) = (r / d, r % d);
        let (j, l) = (c / d, c % d);
        m[(i * d + j, k * d + l)]
    }))
}

pub fn is_dual_unitary(g: &Gate) -> bool {
    match reshuffle(&g.matrix) {
        Some(r) => r.is_unitary(UNITARY_TOL),
        None => false,
    }
}

/// `exp(-ih sum Y) exp(-iJ sum ZZ) exp(-ig sum Z)` on the whole chain (open ends),
/// built densely. Qubits only.
pub fn kicked_ising_layer(h: f64, j: f64, g: f64, layout: QuditLayout) -> Result<ComplexMatrix> {
    if layout.d != 2 {
        return arg(format!("kicked Ising needs qubits, got d = {}", layout.d));
    }
    if layout.dim() > crate::DEFAULT_DENSE_BUDGET {
        return resource(format!(
            "dense kicked Ising layer on {} sites exceeds the dense budget",
            layout.n_sites
        ));
    }
    let n = layout.dim();
    let mut u = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        let mut e = ComplexMatrix::zeros(n, 1);
        e[(c, 0)] = 1.0.into();
        let mut psi = PureState::new(layout, e.into_data())?;
        apply_kicked_ising(&mut psi, h, j, g)?;
        for r in 0..n {
            u[(r, c)] = psi.amps[r];
        }
    }
    Ok(u)
}

/// Applies one kicked Ising period in factorized form.
pub fn apply_kicked_ising(state: &mut PureState, h: f64, j: f64, g: f64) -> Result<()> {
    let layout = state.layout;
    if layout.d != 2 {
        return arg(format!("kicked Ising needs qubits, got d = {}", layout.d));
    }
    let n = layout.n_sites;
    for (idx, a) in state.amps.iter_mut().enumerate() {
        let z = |s: usize| if layout.digit(idx, s) == 0 { 1.0 } else { -1.0 };
        let field: f64 = (0..n).map(z).sum();
        let bond: f64 = (0..n.saturating_sub(1)).map(|s| z(s) * z(s + 1)).sum();
        *a *= C64::from_polar(1.0, -(g * field + j * bond));
    }
    let (c, s) = (h.cos(), h.sin());
    // exp(-ihY) = [[cos h, -sin h], [sin h, cos h]]
    let ry = ComplexMatrix::from_vec(2, 2, vec![c.into(), (-s).into(), s.into(), c.into()])?;
    for site in 0..n {
        apply_one_site(state, site, &ry)?;
    }
    Ok(())
}

pub fn apply_one_site(state: &mut PureState, site: usize, u: &ComplexMatrix) -> Result<()> {
    let layout = state.layout;
    let d = layout.d;
    if site >= layout.n_sites || (u.rows(), u.cols()) != (d, d) {
        return arg(format!(
            "cannot apply a {}x{} matrix to site {site}",
            u.rows(),
            u.cols()
        ));
    }
    let stride = layout.stride(site);
    let block = stride * d;
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for base in (0..layout.dim()).step_by(block) {
        for inner in 0..stride {
            for (v, b) in buf.iter_mut().enumerate() {
                *b = state.amps[base + inner + v * stride];
            }
            for r in 0..d {
                state.amps[base + inner + r * stride] = (0..d).map(|c| u[(r, c)] * buf[c]).sum();
            }
        }
    }
    Ok(())
}

/// Applies a two-qudit matrix to `(site, site + 1)`.
pub fn apply_two_site(state: &mut PureState, site: usize, u: &ComplexMatrix) -> Result<()> {
    let layout = state.layout;
    let d = layout.d;
    let dd = d * d;
    if site + 1 >= layout.n_sites || (u.rows(), u.cols()) != (dd, dd) {
        return arg(format!(
            "cannot apply a {}x{} matrix to sites ({site}, {})",
            u.rows(),
            u.cols(),
            site + 1
        ));
    }
    let lo = layout.stride(site + 1);
    let block = lo * dd;
    let mut buf = vec![C64::new(0.0, 0.0); dd];
    let m = u.data();
    for base in (0..layout.dim()).step_by(block) {
        for inner in 0..lo {
            let off = base + inner;
            for (v, b) in buf.iter_mut().enumerate() {
                *b = state.amps[off + v * lo];
            }
            for r in 0..dd {
                let row = &m[r * dd..(r + 1) * dd];
                state.amps[off + r * lo] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GateSource {
    DualUnitaryRandom,
    HaarRandom,
    /// One global kicked Ising period per layer instead of a brick of gates.
    KickedIsing {
        h: f64,
        j: f64,
        g: f64,
    },
    /// Gates placed in layer-major, left-to-right order, cycling through the list.
    FixedGateList(Vec<Gate>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub layout: QuditLayout,
    pub depth: usize,
    pub gate_source: GateSource,
    pub seed: u64,
}

impl CircuitSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.gate_source {
            GateSource::DualUnitaryRandom | GateSource::KickedIsing { .. } if self.layout.d != 2 => arg(format!(
                "gate source {:?} is only parametrized for d = 2, got d = {}",
                self.gate_source, self.layout.d
            )),
            GateSource::FixedGateList(gates) if gates.is_empty() => arg("fixed gate list is empty"),
            GateSource::FixedGateList(gates) => match gates.iter().find(|g| g.d() != self.layout.d) {
                Some(g) => arg(format!(
                    "gate '{}' has local dimension {}, layout has {}",
                    g.label,
                    g.d(),
                    self.layout.d
                )),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Left sites of the gates in brick-wall layer `layer`.
pub fn layer_sites(n_sites: usize, layer: usize) -> impl Iterator<Item = usize> {
    ((layer % 2)..n_sites.saturating_sub(1)).step_by(2)
}

fn gates_before(n_sites: usize, layer: usize) -> usize {
    let even = n_sites / 2;
    let odd = n_sites.saturating_sub(1) / 2;
    (layer / 2) * (even + odd) + if layer % 2 == 1 { even } else { 0 }
}

/// The gate a brick-wall source places at `(layer, site)`.
pub fn gate_at(spec: &CircuitSpec, layer: usize, site: usize) -> Gate {
    let mut r = rng::stream(spec.seed, &[layer as u64, site as u64]);
    match &spec.gate_source {
        GateSource::DualUnitaryRandom => random_dual_unitary_gate(&mut r),
        GateSource::HaarRandom => haar_gate_from(spec.layout.d, &mut r),
        GateSource::FixedGateList(gates) => {
            let pos = gates_before(spec.layout.n_sites, layer) + site / 2;
            gates[pos % gates.len()].clone()
        }
        GateSource::KickedIsing { .. } => unreachable!("kicked Ising layers are global"),
    }
}

/// Applies layer `layer` (0-based) of `spec` in place.
pub fn apply_layer(state: &mut PureState, spec: &CircuitSpec, layer: usize) -> Result<()> {
    if state.layout != spec.layout {
        return arg(format!(
            "state layout {:?} does not match circuit layout {:?}",
            state.layout, spec.layout
        ));
    }
    if let GateSource::KickedIsing { h, j, g } = spec.gate_source {
        return apply_kicked_ising(state, h, j, g);
    }
    for site in layer_sites(spec.layout.n_sites, layer) {
        let gate = gate_at(spec, layer, site);
        apply_two_site(state, site, &gate.matrix)?;
    }
    Ok(())
}

/// Evolves `state` through all `spec.depth` layers.
pub fn brickwall_apply(state: &PureState, spec: &CircuitSpec) -> Result<PureState> {
    spec.validate()?;
    let mut out = state.clone();
    for layer in 0..spec.depth {
        apply_layer(&mut out, spec, layer)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub layout: QuditLayout,
    pub h_x: f64,
    pub h_y: f64,
    pub j: f64,
    pub time: f64,
}

/// `H = sum_j (h_x X_j + h_y Y_j) + J sum_j X_j X_{j+1}`, open chain.
pub fn mixed_field_hamiltonian(layout: QuditLayout, h_x: f64, h_y: f64, j: f64) -> Result<ComplexMatrix> {
    if layout.d != 2 {
        return arg(format!("mixed-field Ising needs qubits, got d = {}", layout.d));
    }
    let n = layout.dim();
    let mut h = ComplexMatrix::zeros(n, n);
    for x in 0..n {
        for s in 0..layout.n_sites {
            let st = layout.stride(s);
            let flipped = x ^ st;
            // Y|0> = i|1>, Y|1> = -i|0>
            let y = if x & st == 0 {
                C64::new(0.0, 1.0)
            } else {
                C64::new(0.0, -1.0)
            };
            h[(flipped, x)] += C64::new(h_x, 0.0) + y * h_y;
            if s + 1 < layout.n_sites {
                h[(flipped ^ layout.stride(s + 1), x)] += C64::new(j, 0.0);
            }
        }
    }
    Ok(h)
}

/// Dense spectral propagator, diagonalized once and reused for many times.
#[derive(Clone, Debug)]
pub struct HamiltonianPropagator {
    layout: QuditLayout,
    values: Vec<f64>,
    vectors: ComplexMatrix,
}

impl HamiltonianPropagator {
    pub fn new(layout: QuditLayout, h: &ComplexMatrix, max_sites: usize) -> Result<Self> {
        if layout.n_sites > max_sites {
            return resource(format!(
                "dense diagonalization of {} sites exceeds the budget of {max_sites}",
                layout.n_sites
            ));
        }
        let e = herm_eig(h)?;
        Ok(Self {
            layout,
            values: e.values,
            vectors: e.vectors,
        })
    }

    pub fn evolve(&self, state: &PureState, time: f64) -> Result<PureState> {
        if state.layout != self.layout {
            return arg("state layout does not match the Hamiltonian");
        }
        let coeffs = self.vectors.adjoint().matvec(&state.amps)?;
        let rotated: Vec<C64> = coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, &l)| c * C64::from_polar(1.0, -l * time))
            .collect();
        PureState::new(self.layout, self.vectors.matvec(&rotated)?)
    }
}

/// `exp(-iHt)|psi>` with the full mixed-field Hamiltonian.
pub fn hamiltonian_evolve(state: &PureState, spec: &HamiltonianSpec) -> Result<PureState> {
    if state.layout != spec.layout {
        return arg("state layout does not match the Hamiltonian");
    }
    if spec.layout.n_sites > DEFAULT_HAMILTONIAN_SITES {
        return resource(format!(
            "dense diagonalization of {} sites exceeds the budget of {DEFAULT_HAMILTONIAN_SITES}",
            spec.layout.n_sites
        ));
    }
    let h = mixed_field_hamiltonian(spec.layout, spec.h_x, spec.h_y, spec.j)?;
    let u = herm_expm(&h, -spec.time)?;
    PureState::new(spec.layout, u.matvec(&state.amps)?)
}
