use anyonsim::encoding::{self, ChargeConfiguration};
use anyonsim::hilbert::{QuditRegister, StateVector};
use anyonsim::optics::{self, FockVector, ModeSet, OpticalCircuit, OpticalElement};
use anyonsim::plaquette::{self, PlaquetteTopology, Vertex};
use anyonsim::{Complex, GroupElement};
use proptest::prelude::*;

fn amplitudes(n: usize) -> impl Strategy<Value = Vec<Complex>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| v.into_iter().map(|(r, i)| Complex::new(r, i)).collect())
}

fn random_state(dims: Vec<usize>) -> impl Strategy<Value = StateVector<f64>> {
    let total = dims.iter().product();
    let labels: Vec<String> = (0..dims.len()).map(|k| format!("q{k}")).collect();
    amplitudes(total).prop_filter_map("zero vector", move |amps| {
        let reg = QuditRegister::new(dims.clone(), labels.clone()).unwrap();
        StateVector::new(reg, amps).ok()?.normalize().ok()
    })
}

fn plaquette_state() -> impl Strategy<Value = StateVector<f64>> {
    amplitudes(216).prop_filter_map("zero vector", |amps| StateVector::new(PlaquetteTopology::register(), amps).ok()?.normalize().ok())
}

fn element() -> impl Strategy<Value = GroupElement> {
    prop::sample::select(GroupElement::ALL.to_vec())
}

#[derive(Clone, Debug)]
enum Step {
    Bs(usize, usize, f64),
    Phase(usize, f64),
}

type CircuitCase = (usize, Vec<(Vec<u8>, Complex)>, Vec<Step>);

fn circuit_case() -> impl Strategy<Value = CircuitCase> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(modes, photons)| {
        let occupation = prop::collection::vec(0..modes, photons).prop_map(move |slots| {
            let mut occ = vec![0u8; modes];
            for s in slots {
                occ[s] += 1;
            }
            occ
        });
        let term = (occupation, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(o, r, i)| (o, Complex::new(r, i)));
        let step = prop_oneof![
            (0..modes, 1..modes, 0.0f64..=1.0).prop_map(move |(i, d, r)| Step::Bs(i, (i + d) % modes, r)),
            (0..modes, -7.0f64..7.0).prop_map(|(i, p)| Step::Phase(i, p)),
        ];
        (Just(photons), prop::collection::vec(term, 1..4), prop::collection::vec(step, 1..10))
    })
}

fn build(steps: &[Step], labels: &[String]) -> OpticalCircuit<f64> {
    let mut c = OpticalCircuit::new(labels.to_vec());
    for s in steps {
        c.push(match *s {
            Step::Bs(i, j, r) => OpticalElement::beam_splitter(&labels[i], &labels[j], r),
            Step::Phase(i, p) => OpticalElement::phase_shift(&labels[i], p),
        });
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_optics_conserves_photons_and_norm((photons, terms, steps) in circuit_case()) {
        let n = terms[0].0.len();
        let labels: Vec<String> = (0..n).map(|k| format!("m{k}")).collect();
        let modes = ModeSet::new(labels.clone(), photons, photons).unwrap();
        let state = FockVector::from_terms(modes, terms).unwrap();
        prop_assume!(state.norm_sqr() > 1e-6);
        let state = state.normalize().unwrap();
        let circuit = build(&steps, &labels);
        let out = circuit.run(&state).unwrap();
        prop_assert!(out.photon_numbers().iter().all(|&k| k == photons));
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let back = circuit.inverse().run(&out).unwrap();
        prop_assert!(back.max_abs_diff(&state) < 1e-12);
    }

    #[test]
    fn circuit_json_roundtrip((_p, terms, steps) in circuit_case()) {
        let n = terms[0].0.len();
        let labels: Vec<String> = (0..n).map(|k| format!("m{k}")).collect();
        let circuit = build(&steps, &labels);
        let back = OpticalCircuit::<f64>::from_json(&circuit.to_json()).unwrap();
        prop_assert_eq!(back, circuit);
    }

    #[test]
    fn rail_codec_roundtrip(state in prop::collection::vec(prop::sample::select(vec![2usize, 3]), 1..=3).prop_flat_map(random_state)) {
        let rails = optics::encode_rails(&state, &[]).unwrap();
        prop_assert!((rails.norm_sqr() - 1.0).abs() < 1e-12);
        let out = optics::decode_rails(&rails, state.register()).unwrap();
        prop_assert!((out.probability - 1.0).abs() < 1e-12);
        prop_assert!(out.state.unwrap().max_abs_diff(&state) < 1e-12);
    }

    #[test]
    fn qudit_encoding_roundtrip(state in plaquette_state(), config in prop::sample::select(ChargeConfiguration::ALL.to_vec())) {
        let assignment = config.assignment();
        let enc = encoding::encode(&state, &assignment).unwrap();
        prop_assert_eq!(enc.register().dims(), &[2, 3, 2, 3, 2, 3][..]);
        prop_assert!(encoding::decode(&enc, &assignment).unwrap().max_abs_diff(&state) < 1e-15);
    }

    #[test]
    fn encoded_gates_commute_with_encoding(state in plaquette_state(), g in element()) {
        let config = ChargeConfiguration::V1V3;
        let assignment = config.assignment();
        let seq = encoding::encoded_t_in(config, g, config.operation_vertex(), false).unwrap();
        let direct = state.apply_local(&plaquette::gauge_transform(g, config.operation_vertex())).unwrap();
        let via = encoding::decode(&seq.apply(&encoding::encode(&state, &assignment).unwrap()).unwrap(), &assignment).unwrap();
        prop_assert!(via.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn gauge_transforms_are_unitary(state in plaquette_state(), g in element(), v in prop::sample::select(Vertex::ALL.to_vec())) {
        let out = state.apply_local(&plaquette::gauge_transform(g, v)).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let back = out.apply_local(&plaquette::gauge_transform(g.inverse(), v)).unwrap();
        prop_assert!(back.max_abs_diff(&state) < 1e-12);
    }
}
