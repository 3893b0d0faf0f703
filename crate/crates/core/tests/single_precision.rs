use anyonsim::encoding::{self, ChargeConfiguration};
use anyonsim::optics::{self, CnotModel};
use anyonsim::plaquette::{self, MeasurementBasis, Vertex};
use anyonsim::{GroupElement, Irrep};

#[test]
fn f32_pipeline_agrees_with_f64() {
    for h in GroupElement::ALL {
        let a = plaquette::fusion_amplitude_paths::<f32>(Irrep::TwoDim, h).trace_formula;
        let b = plaquette::fusion_amplitude_paths::<f64>(Irrep::TwoDim, h).trace_formula;
        assert!((a.re as f64 - b.re).abs() < 1e-5);
        let (p, m) = plaquette::controlled_gauge_experiment::<f32>(h, Vertex::V1, MeasurementBasis::X);
        assert!(((p - m) as f64 - b.re).abs() < 1e-5);
        let w = encoding::run_ancilla_free_probe::<f32>(h).unwrap().w;
        let w64 = encoding::abstract_probe::<f64>(ChargeConfiguration::V1V3, h).w;
        assert!((w as f64 - w64).abs() < 1e-5);
    }
    let r = optics::run_controlled_tt_photonic::<f32>(1, &CnotModel::Logical { success: 1.0 / 9.0 }, false).unwrap();
    assert!((r.p_plus - 0.5).abs() < 1e-5);
    let h = optics::three_crystal_postselect(0.1f32, 3).unwrap();
    assert!((h.fidelity - 1.0).abs() < 1e-5);
}
