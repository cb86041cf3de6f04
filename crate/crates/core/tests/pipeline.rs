//! Circuit -> ensemble -> moment -> distance, with nothing but the public API.

use mspe_core::circuits::{apply_layer, bell_pair_initial_state, CircuitSpec, GateSource};
use mspe_core::metrics::{annealed_conditional_entropy, ensemble_distance};
use mspe_core::mspe::{build_mspe, moment, LossLayout, MeasurementBasis, Partition};
use mspe_core::permengine::ghs_moment;
use mspe_core::QuditLayout;

fn dual_unitary_distances(n: usize, seed: u64, times: &[usize]) -> Vec<f64> {
    let layout = QuditLayout::new(n, 2).unwrap();
    let spec = CircuitSpec {
        layout,
        depth: *times.last().unwrap(),
        gate_source: GateSource::DualUnitaryRandom,
        seed,
    };
    let reference = ghs_moment(2, 2, 2, 2).unwrap();
    let mut state = bell_pair_initial_state(layout).unwrap();
    let mut out = Vec::new();
    let mut layer = 0;
    for &t in times {
        while layer < t {
            apply_layer(&mut state, &spec, layer).unwrap();
            layer += 1;
        }
        let p = Partition::standard(
            layout,
            2,
            2,
            LossLayout::Consecutive,
            false,
            MeasurementBasis::HeisenbergWeylPairs,
            t,
        )
        .unwrap();
        let ens = build_mspe(&state, &p).unwrap();
        out.push(
            ensemble_distance(&moment(&ens, 2).unwrap(), &reference, 1)
                .unwrap()
                .normalized,
        );
    }
    out
}

#[test]
fn dual_unitary_distance_decays_then_saturates() {
    let times = [2, 4, 6, 16, 20, 24];
    let mut mean = vec![0.0; times.len()];
    for seed in 0..3 {
        for (m, v) in mean.iter_mut().zip(dual_unitary_distances(12, seed, &times)) {
            *m += v / 3.0;
        }
    }
    assert!(mean[0] > mean[1] && mean[1] > mean[2], "{mean:?}");
    // late values sit on a plateau well below the early decay
    assert!(mean[3] < 0.5 * mean[2], "{mean:?}");
    let (lo, hi) = mean[3..]
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo < 0.3 * hi, "{mean:?}");
}

#[test]
fn dual_unitary_balanced_entropy_vanishes_when_deep() {
    let n = 12;
    let layout = QuditLayout::new(n, 2).unwrap();
    let t = 12;
    let spec = CircuitSpec {
        layout,
        depth: t,
        gate_source: GateSource::DualUnitaryRandom,
        seed: 41,
    };
    let state = mspe_core::circuits::brickwall_apply(&bell_pair_initial_state(layout).unwrap(), &spec).unwrap();
    let p = Partition::standard(
        layout,
        2,
        2,
        LossLayout::Consecutive,
        true,
        MeasurementBasis::HeisenbergWeylPairs,
        t,
    )
    .unwrap();
    let i = annealed_conditional_entropy(&build_mspe(&state, &p).unwrap(), 2).unwrap();
    assert!(i.nats.abs() < 0.1, "{i:?}");
}

#[test]
fn runs_are_reproducible() {
    assert_eq!(
        dual_unitary_distances(8, 9, &[3, 5]),
        dual_unitary_distances(8, 9, &[3, 5])
    );
    assert_ne!(dual_unitary_distances(8, 9, &[3]), dual_unitary_distances(8, 10, &[3]));
}
