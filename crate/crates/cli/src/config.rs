//! Experiment configuration: parsing, overrides and validation.

use std::fmt;
use std::path::PathBuf;

use mspe_core::linalg::checked_pow;
use mspe_core::mspe::{LossLayout, MeasurementBasis, Partition, DEFAULT_OUTCOME_BUDGET};
use mspe_core::QuditLayout;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    DualUnitary,
    LocalHaar,
    KickedIsing,
    MixedFieldIsing,
    GlobalHaarState,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::DualUnitary => "dual-unitary",
            Model::LocalHaar => "local-haar",
            Model::KickedIsing => "kicked-ising",
            Model::MixedFieldIsing => "mixed-field-ising",
            Model::GlobalHaarState => "global-haar-state",
        }
    }

    /// Brick-wall or Floquet models whose `t` counts layers.
    pub fn is_circuit(self) -> bool {
        matches!(self, Model::DualUnitary | Model::LocalHaar | Model::KickedIsing)
    }

    pub fn default_basis(self) -> MeasurementBasis {
        if self.is_circuit() {
            MeasurementBasis::HeisenbergWeylPairs
        } else {
            MeasurementBasis::Computational
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Consecutive,
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(rename = "N_A")]
    pub n_a: usize,
    pub m: usize,
    #[serde(default)]
    pub loss_layout: LossKind,
    /// Retained sites between lost pairs for the sparse layout.
    #[serde(default = "default_gap")]
    pub sparse_gap: usize,
    #[serde(default)]
    pub reference: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MeasurementBasis>,
}

fn default_gap() -> usize {
    2
}

impl PartitionConfig {
    pub fn loss(&self) -> LossLayout {
        match self.loss_layout {
            LossKind::Consecutive => LossLayout::Consecutive,
            LossKind::Sparse => LossLayout::Sparse { gap: self.sparse_gap },
        }
    }

    pub fn loss_label(&self) -> String {
        match self.loss_layout {
            LossKind::Consecutive => "consecutive".into(),
            LossKind::Sparse => format!("sparse:{}", self.sparse_gap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(rename = "N", default)]
    pub n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceEnsemble {
    /// Trace `m` qudits out of a Haar state on `N_A + m`.
    #[default]
    GhsAnalytic,
    /// Haar-random pure states on the subsystem.
    HaarAnalytic,
    /// JSON list of moment tensors.
    CustomFile(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickedIsingParams {
    pub h: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub g: f64,
}

impl Default for KickedIsingParams {
    fn default() -> Self {
        Self { h: 0.9, j: 0.7, g: 0.6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedFieldParams {
    pub h_x: f64,
    pub h_y: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

impl Default for MixedFieldParams {
    fn default() -> Self {
        Self {
            h_x: 0.8090,
            h_y: 0.9045,
            j: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default)]
    pub kicked_ising: KickedIsingParams,
    #[serde(default)]
    pub mixed_field: MixedFieldParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Largest dense moment dimension `d^{n k}`.
    #[serde(default = "default_dense")]
    pub dense: usize,
    #[serde(default = "default_outcomes")]
    pub outcomes: usize,
    /// Largest statevector register.
    #[serde(default = "default_state_sites")]
    pub state_sites: usize,
    /// Largest register diagonalized densely for Hamiltonian models.
    #[serde(default = "default_ham_sites")]
    pub hamiltonian_sites: usize,
}

fn default_dense() -> usize {
    mspe_core::DEFAULT_DENSE_BUDGET
}
fn default_outcomes() -> usize {
    DEFAULT_OUTCOME_BUDGET
}
fn default_state_sites() -> usize {
    22
}
fn default_ham_sites() -> usize {
    mspe_core::circuits::DEFAULT_HAMILTONIAN_SITES
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            dense: default_dense(),
            outcomes: default_outcomes(),
            state_sites: default_state_sites(),
            hamiltonian_sites: default_ham_sites(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_xi")]
    pub xi: Vec<u32>,
    #[serde(default)]
    pub reference_ensemble: ReferenceEnsemble,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_d() -> usize {
    2
}
fn default_k() -> Vec<usize> {
    vec![2]
}
fn default_xi() -> Vec<u32> {
    vec![1]
}
fn default_realizations() -> usize {
    1
}
fn default_bins() -> usize {
    64
}

impl ExperimentConfig {
    /// Minimal config for `model` at a single system size.
    pub fn new(model: Model, n: usize, n_a: usize, m: usize) -> Self {
        Self {
            model,
            n: Some(n),
            d: 2,
            partition: PartitionConfig {
                n_a,
                m,
                loss_layout: LossKind::Consecutive,
                sparse_gap: default_gap(),
                reference: false,
                basis: None,
            },
            sweep: Sweep::default(),
            k: default_k(),
            xi: default_xi(),
            reference_ensemble: ReferenceEnsemble::default(),
            n_realizations: 1,
            seed: 0,
            output: None,
            params: ModelParams::default(),
            budgets: Budgets::default(),
            histogram_bins: default_bins(),
        }
    }

    pub fn basis(&self) -> MeasurementBasis {
        self.partition.basis.unwrap_or(self.model.default_basis())
    }

    /// System sizes in sweep order.
    pub fn sizes(&self) -> Vec<usize> {
        if self.sweep.n.is_empty() {
            self.n.into_iter().collect()
        } else {
            self.sweep.n.clone()
        }
    }

    /// Times in sweep order; a Haar state has no dynamics and sits at `t = 0`.
    pub fn times(&self) -> Vec<f64> {
        if self.sweep.t.is_empty() {
            vec![0.0]
        } else {
            self.sweep.t.clone()
        }
    }

    pub fn subsystem_sites(&self) -> usize {
        self.partition.n_a + usize::from(self.partition.reference)
    }

    pub fn partition_at(&self, n: usize, t: f64) -> mspe_core::Result<Partition> {
        let layout = QuditLayout::new(n, self.d)?;
        let p = &self.partition;
        let depth = if self.model.is_circuit() { t as usize } else { 0 };
        Partition::standard(layout, p.n_a, p.m, p.loss(), p.reference, self.basis(), depth)
    }
}

/// What a config is about to be used for; entropy runs need a reference qudit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Distance,
    Entropy,
    Spectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueKind {
    Config,
    Resource,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub kind: IssueKind,
    /// Dotted key path, e.g. `partition.m`.
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// 1-based line of the key at `path` in a JSON document, found by walking
/// the keys in order. Falls back to the deepest key that was found.
pub fn find_key_line(raw: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    let mut found = None;
    for key in path.split('.') {
        let needle = format!("\"{key}\"");
        let mut from = pos;
        let hit = loop {
            let Some(i) = raw[from..].find(&needle) else { break None };
            let at = from + i;
            let after = raw[at + needle.len()..].trim_start();
            if after.starts_with(':') {
                break Some(at);
            }
            from = at + needle.len();
        };
        match hit {
            Some(at) => {
                pos = at + needle.len();
                found = Some(at);
            }
            None => break,
        }
    }
    found.map(|at| raw[..at].matches('\n').count() + 1)
}

/// Parses `raw` and applies top-level overrides before deserializing.
pub fn parse_config(raw: &str, overrides: &[(String, Value)]) -> Result<ExperimentConfig, ConfigIssue> {
    let mut value: Value = serde_json::from_str(raw).map_err(|e| ConfigIssue {
        kind: IssueKind::Config,
        field: "<document>".into(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let Some(obj) = value.as_object_mut() else {
        return Err(ConfigIssue {
            kind: IssueKind::Config,
            field: "<document>".into(),
            line: Some(1),
            message: "config must be a JSON object".into(),
        });
    };
    for (k, v) in overrides {
        if obj.get(k).is_some_and(|old| old.is_object() || old.is_array()) {
            return Err(ConfigIssue {
                kind: IssueKind::Config,
                field: k.clone(),
                line: find_key_line(raw, k),
                message: "only scalar fields can be overridden from the command line".into(),
            });
        }
        obj.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("field"))
            .unwrap_or("<document>")
            .to_string();
        ConfigIssue {
            kind: IssueKind::Config,
            line: find_key_line(raw, &field),
            field,
            message: msg,
        }
    })
}

/// Structural and budget checks. Returns every problem found; never panics
/// and never touches the filesystem beyond checking a custom reference exists.
pub fn validate_config(cfg: &ExperimentConfig, raw: Option<&str>, mode: Mode) -> Vec<ConfigIssue> {
    let mut issues = Vec::new();
    let mut push = |kind: IssueKind, field: &str, message: String| {
        issues.push(ConfigIssue {
            kind,
            field: field.to_string(),
            line: raw.and_then(|r| find_key_line(r, field)),
            message,
        });
    };
    let cfgerr = IssueKind::Config;
    let d = cfg.d;
    let p = &cfg.partition;

    if d < 2 {
        push(cfgerr, "d", format!("local dimension must be at least 2, got {d}"));
    }
    if matches!(
        cfg.model,
        Model::DualUnitary | Model::KickedIsing | Model::MixedFieldIsing
    ) && d != 2
    {
        push(
            cfgerr,
            "d",
            format!("model {} is only parametrized for d = 2, got d = {d}", cfg.model.name()),
        );
    }
    if p.n_a == 0 {
        push(cfgerr, "partition.N_A", "subsystem A needs at least one site".into());
    }
    let sizes = cfg.sizes();
    if cfg.n.is_some() && !cfg.sweep.n.is_empty() {
        push(cfgerr, "sweep.N", "give either N or sweep.N, not both".into());
    }
    if sizes.is_empty() {
        push(cfgerr, "N", "no system size: set N or sweep.N".into());
    }
    let times = cfg.times();
    for &t in &times {
        if !t.is_finite() || t < 0.0 {
            push(
                cfgerr,
                "sweep.t",
                format!("times must be finite and non-negative, got {t}"),
            );
        } else if cfg.model.is_circuit() && t.fract() != 0.0 {
            push(
                cfgerr,
                "sweep.t",
                format!("{} counts whole layers, got t = {t}", cfg.model.name()),
            );
        } else if cfg.model == Model::GlobalHaarState && t != 0.0 {
            push(
                cfgerr,
                "sweep.t",
                format!("global-haar-state has no dynamics, got t = {t}"),
            );
        }
    }
    if cfg.k.is_empty() || cfg.k.contains(&0) {
        push(
            cfgerr,
            "k",
            "moment orders must be a non-empty list of positive integers".into(),
        );
    }
    if mode == Mode::Entropy {
        if !p.reference {
            push(
                cfgerr,
                "partition.reference",
                "entropy runs need the reference qudit".into(),
            );
        }
        if cfg.k.iter().any(|&k| k < 2) {
            push(cfgerr, "k", "conditional entropy needs k >= 2".into());
        }
    }
    if mode == Mode::Distance {
        if cfg.xi.is_empty() {
            push(cfgerr, "xi", "no Schatten index given".into());
        }
        if let Some(&x) = cfg.xi.iter().find(|&&x| x != 1 && x != 2) {
            push(cfgerr, "xi", format!("Schatten index must be 1 or 2, got {x}"));
        }
        if let ReferenceEnsemble::CustomFile(path) = &cfg.reference_ensemble {
            if !path.is_file() {
                push(
                    cfgerr,
                    "reference_ensemble",
                    format!("custom reference file {} not found", path.display()),
                );
            }
        }
    }
    if cfg.n_realizations == 0 {
        push(cfgerr, "n_realizations", "need at least one realization".into());
    }
    if mode == Mode::Spectrum && cfg.histogram_bins == 0 {
        push(cfgerr, "histogram_bins", "need at least one bin".into());
    }
    if d < 2 || p.n_a == 0 {
        return issues;
    }

    for &n in &sizes {
        if cfg.model.is_circuit() && n % 2 != 0 {
            push(
                cfgerr,
                "N",
                format!("N = {n}: the Bell-pair initial state needs an even N"),
            );
            continue;
        }
        let mut partition_ok = true;
        for &t in &times {
            if let Err(e) = cfg.partition_at(n, t) {
                let field = if e.to_string().contains("exceed") {
                    "partition.m"
                } else {
                    "partition"
                };
                push(cfgerr, field, format!("N = {n}, t = {t}: {e}"));
                partition_ok = false;
                break;
            }
        }
        let res = IssueKind::Resource;
        if n > cfg.budgets.state_sites {
            push(
                res,
                "N",
                format!(
                    "sweep point N = {n} exceeds the statevector budget of {} sites",
                    cfg.budgets.state_sites
                ),
            );
        }
        if cfg.model == Model::MixedFieldIsing && n > cfg.budgets.hamiltonian_sites {
            push(
                res,
                "N",
                format!(
                    "sweep point N = {n} exceeds the dense Hamiltonian budget of {} sites",
                    cfg.budgets.hamiltonian_sites
                ),
            );
        }
        if partition_ok {
            if let Ok(part) = cfg.partition_at(n, times[0]) {
                match part.outcome_count() {
                    Ok(c) if c <= cfg.budgets.outcomes => {}
                    _ => push(
                        res,
                        "N",
                        format!(
                            "sweep point N = {n}: d^{} outcomes exceed the outcome budget of {}",
                            part.measured_sites().len(),
                            cfg.budgets.outcomes
                        ),
                    ),
                }
            }
        }
    }
    let sub = cfg.subsystem_sites();
    let orders: &[usize] = if mode == Mode::Spectrum { &[1] } else { &cfg.k };
    for &k in orders {
        let fits = checked_pow(d, sub * k)
            .map(|dim| dim <= cfg.budgets.dense)
            .unwrap_or(false);
        if !fits {
            push(
                IssueKind::Resource,
                "k",
                format!(
                    "sweep point k = {k}: moment dimension {d}^({sub}*{k}) exceeds the dense budget of {}",
                    cfg.budgets.dense
                ),
            );
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"{
  "model": "local-haar",
  "d": 2,
  "partition": {"N_A": 2, "m": 2},
  "sweep": {"N": [6, 8, 10], "t": [1, 2, 4, 8]},
  "k": [2],
  "xi": [1],
  "n_realizations": 25,
  "seed": 11
}"#;

    fn parse(raw: &str) -> ExperimentConfig {
        parse_config(raw, &[]).unwrap()
    }

    #[test]
    fn size_sweep_config_is_valid() {
        let cfg = parse(SWEEP);
        assert_eq!(cfg.sizes(), vec![6, 8, 10]);
        assert_eq!(cfg.basis(), MeasurementBasis::HeisenbergWeylPairs);
        assert_eq!(cfg.reference_ensemble, ReferenceEnsemble::GhsAnalytic);
        assert!(validate_config(&cfg, Some(SWEEP), Mode::Distance).is_empty());
    }

    #[test]
    fn lost_sites_exceeding_bath_are_reported_with_line() {
        let raw = SWEEP.replace("\"m\": 2", "\"m\": 5");
        let issues = validate_config(&parse(&raw), Some(&raw), Mode::Distance);
        let i = issues
            .iter()
            .find(|i| i.message.contains("lost sites exceed bath"))
            .unwrap();
        assert_eq!(i.kind, IssueKind::Config);
        assert_eq!(i.line, Some(4));
        assert!(i.to_string().starts_with("line 4: partition.m:"));
    }

    #[test]
    fn qutrit_dual_unitary_is_rejected() {
        let raw = SWEEP
            .replace("local-haar", "dual-unitary")
            .replace("\"d\": 2", "\"d\": 3");
        let issues = validate_config(&parse(&raw), Some(&raw), Mode::Distance);
        assert!(issues.iter().any(|i| i.field == "d" && i.line == Some(3)));
    }

    #[test]
    fn budget_violation_names_the_sweep_point() {
        let raw = SWEEP.replace("\"k\": [2]", "\"k\": [2, 7]");
        let issues = validate_config(&parse(&raw), Some(&raw), Mode::Distance);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::Resource);
        assert!(issues[0].message.contains("k = 7"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_config(
            "{\n  \"model\": \"local-haar\",\n  \"bogus\": 1,\n  \"partition\": {\"N_A\": 1, \"m\": 0}\n}",
            &[],
        )
        .unwrap_err();
        assert_eq!(e.field, "bogus");
        assert_eq!(e.line, Some(3));
        let e = parse_config("{\n  \"model\": \n}", &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn overrides_replace_scalars_only() {
        let cfg = parse_config(
            SWEEP,
            &[
                ("seed".into(), Value::from(99)),
                ("n_realizations".into(), Value::from(3)),
            ],
        )
        .unwrap();
        assert_eq!((cfg.seed, cfg.n_realizations), (99, 3));
        assert!(parse_config(SWEEP, &[("partition".into(), Value::from(1))]).is_err());
    }

    #[test]
    fn entropy_mode_requires_reference() {
        let cfg = parse(SWEEP);
        let issues = validate_config(&cfg, None, Mode::Entropy);
        assert!(issues.iter().any(|i| i.field == "partition.reference"));
    }

    #[test]
    fn key_lines() {
        let raw = "{\n \"a\": {\n  \"m\": 1\n },\n \"m\": 2\n}";
        assert_eq!(find_key_line(raw, "a.m"), Some(3));
        assert_eq!(find_key_line(raw, "m"), Some(3));
        assert_eq!(find_key_line(raw, "zzz"), None);
    }
}
