use std::io::Cursor;
use std::path::PathBuf;

use ris_ising::channel::{ChannelSet, PhaseLevel};
use ris_ising::harness::{optimize, OptimizeOptions};
use ris_ising::ising::{build_binary_ising, read_model_dump, write_model_dump, IsingModel};
use ris_ising::scenario::load_scenario;
use ris_ising::scene::{build_geometry, ApertureModel, PropagationVariant};

fn preset(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect()
}

#[test]
fn presets_load() {
    for (name, n, los) in [
        ("paper_5476.scn", 5476, false),
        ("paper_5476_los.scn", 5476, true),
        ("paper_12544.scn", 12544, false),
        ("paper_12544_los.scn", 12544, true),
        ("paper_22201.scn", 22201, false),
        ("paper_22201_los.scn", 22201, true),
        ("toy_8.scn", 8, false),
    ] {
        let cfg = load_scenario(preset(name)).unwrap();
        assert_eq!(cfg.n_ris(), n, "{name}");
        assert_eq!(cfg.n_bs(), 64);
        assert_eq!(cfg.carrier_frequency, 28e9);
        assert_eq!(cfg.los_enabled, los);
        assert_eq!(cfg.propagation_variant, PropagationVariant::FriisSquared);
        assert_eq!(cfg.aperture_model, ApertureModel::Flat);
    }
}

#[test]
fn model_dump_golden() {
    let m = IsingModel::from_dense(2, vec![0.0, 0.5, 0.5, 0.0], vec![1.0, -2.0], -3.0).unwrap();
    let mut buf = Vec::new();
    write_model_dump(&m, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("ris-ising-model v1\n"));
    let back = read_model_dump(Cursor::new(text.as_bytes())).unwrap();
    assert_eq!(back, m);
}

#[test]
fn channel_model_dump_round_trips_energies() {
    let cfg = load_scenario(preset("toy_8.scn")).unwrap();
    let ch = ChannelSet::synthesize(&cfg, &build_geometry(&cfg).unwrap()).unwrap();
    let model = build_binary_ising(&ch.direct, &ch.cascade).unwrap();
    let mut buf = Vec::new();
    write_model_dump(&model, &mut buf).unwrap();
    let back = read_model_dump(Cursor::new(buf)).unwrap();
    let s = [1, -1, -1, 1, 1, 1, -1, 1];
    let (a, b) = (model.energy(&s).unwrap(), back.energy(&s).unwrap());
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn quantization_bracket_on_toy_scene() {
    let cfg = load_scenario(preset("toy_8.scn")).unwrap();
    let gain = |level, method| {
        optimize(&cfg, &OptimizeOptions { level, method, ..Default::default() }).unwrap().gain_db
    };
    use ris_ising::harness::Method;
    let cont = gain(PhaseLevel::Binary, Method::Continuous);
    let quat = gain(PhaseLevel::Quaternary, Method::Exhaustive);
    let bin = gain(PhaseLevel::Binary, Method::Exhaustive);
    assert!(cont + 1e-9 >= quat && quat + 1e-9 >= bin, "{cont} {quat} {bin}");
}
