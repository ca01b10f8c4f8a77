use std::io::BufReader;

use nmfcov_core::coverage::{max_dist, pairwise_distances, persistence_curve};
use nmfcov_core::datasets::{by_name, laurberg, DATASET_NAMES};
use nmfcov_core::harness::{run_experiment, ExperimentConfig, Profile};
use nmfcov_core::samplers::{all_modes_baseline, gibbs_chain, hmc_chain, one_mode_baseline, HmcConfig};
use nmfcov_core::{Dataset, Measure, Method, ModelParams, SampleChain};

const SIGMA: f64 = 0.01;

fn two_modes() -> Dataset {
    laurberg(0.5).unwrap().with_noise(SIGMA, 21).unwrap()
}

fn angle_spread(chain: &SampleChain) -> f64 {
    max_dist(&pairwise_distances(&chain.samples, Measure::MaxAngle).unwrap())
}

#[test]
fn pinned_samplers_stay_in_one_mode() {
    let d = two_modes();
    let params = ModelParams::with_sigma(SIGMA).unwrap();
    let init = one_mode_baseline(&d, d.structure.default_mode(), SIGMA, 1, 1).unwrap().samples[0].clone();
    let gibbs = gibbs_chain(d.observed(), &params, &init, 300, 2).unwrap();
    let hmc = hmc_chain(d.observed(), &params, &init, 150, &HmcConfig::default(), 3).unwrap();
    let all = all_modes_baseline(&d, SIGMA, 300, 4).unwrap();
    assert!(angle_spread(&gibbs) < 5.0);
    assert!(angle_spread(&hmc) < 5.0);
    assert!(angle_spread(&all) > 30.0);

    let all_curve = persistence_curve(&pairwise_distances(&all.samples, Measure::MaxAngle).unwrap(), 50, 300);
    let gibbs_curve = persistence_curve(&pairwise_distances(&gibbs.samples, Measure::MaxAngle).unwrap(), 50, 300);
    // Two separated clusters keep the count at 2 over a wide range.
    assert!(all_curve.plateau_width(2.0) > 0.5 * all_curve.epsilons.last().unwrap());
    assert_eq!(*gibbs_curve.covering.last().unwrap(), 1.0);
}

#[test]
fn chains_round_trip_through_files() {
    let d = two_modes();
    let chain = all_modes_baseline(&d, SIGMA, 25, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.jsonl");
    let mut file = std::fs::File::create(&path).unwrap();
    chain.write_jsonl(&mut file, d.observed()).unwrap();
    drop(file);
    let back = SampleChain::read_jsonl(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back, chain);
    assert_eq!(back.meta.method, Method::AllModes);
}

#[test]
fn dataset_bundles_round_trip() {
    for name in DATASET_NAMES {
        let d = by_name(name, 9).unwrap().with_noise(SIGMA, 10).unwrap();
        let back = Dataset::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d, "{name}");
    }
}

#[test]
fn report_does_not_depend_on_output_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::profile(Profile::Desk, 4);
    cfg.datasets = vec!["two_modes".into()];
    cfg.methods = vec![Method::OneMode, Method::AllModes];
    cfg.n_samples = 30;
    cfg.repetitions = 2;
    cfg.n_eps = 8;
    let mut texts = Vec::new();
    for sub in ["a", "b"] {
        cfg.output_dir = Some(dir.path().join(sub).to_string_lossy().into_owned());
        run_experiment(&cfg).unwrap();
        texts.push(std::fs::read(dir.path().join(sub).join("report.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}
