use qelm::config::{GenerateSpec, PcaSection, RunConfig};
use qelm::preprocess::*;
use qelm::readout::{self, TargetMatrix};
use qelm::reservoir::*;

fn main() {
    let cfg = RunConfig {
        generate: GenerateSpec { n: 4080, seed: 7 },
        shots: Shots::INFINITE,
        ..RunConfig::default()
    };
    let ds = qelm::pipeline::prepare_dataset(&cfg).unwrap();
    let split = qelm::pipeline::split_dataset(&cfg, ds.len()).unwrap();
    let train: Vec<_> = split.train.iter().map(|&i| ds.spectra[i].clone()).collect();
    let test: Vec<_> = split.test.iter().map(|&i| ds.spectra[i].clone()).collect();
    let y_train = TargetMatrix::from_labels(&train.iter().map(|s| s.params.unwrap()).collect::<Vec<_>>());
    let y_test = TargetMatrix::from_labels(&test.iter().map(|s| s.params.unwrap()).collect::<Vec<_>>());

    for m in [5usize, 8] {
        let pre = PreprocessConfig::for_mode(Mode::Jwst, m);
        let pipeline = FeaturePipeline::fit(&train, &pre).unwrap();
        let x_train = pipeline.features_all(&train).unwrap();
        let x_test = pipeline.features_all(&test).unwrap();
        let bank = ReservoirBank::build(&x_train, m, 42).unwrap();
        let p_train = build_probability_matrix(&x_train, &bank, Shots::INFINITE, 0).unwrap();
        let p_test = build_probability_matrix(&x_test, &bank, Shots::INFINITE, 0).unwrap();
        for rcond in [1e-10f64, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2] {
            let (pinv, rank) = readout::pseudoinverse(&p_train.values, rcond).unwrap();
            let w = &y_train.values * pinv;
            let y_pred = &w * &p_test.values;
            let metrics = readout::MetricsReport::from_predictions(&y_test.values, &y_pred, 5.0).unwrap();
            println!("M={m} rcond={rcond:.0e} rank={rank:4}: {:?}", metrics.accuracy.map(|a| (a * 100.0).round()));
        }
    }
    let _ = PcaSection { components: 5 };
}
