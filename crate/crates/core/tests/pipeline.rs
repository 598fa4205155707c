//! End-to-end tests on synthetic corpora: empirical moments approach their
//! population values, parameter error shrinks with corpus size, recovery is
//! bit-for-bit deterministic, and the two recovery methods agree in the
//! large-sample regime.

use nalgebra::DMatrix;
use slda_spectral::{
    estimate_moments, evaluate, generate_corpus, match_topics, population_moments,
    recover_joint, recover_two_stage, sample_model, Corpus, GibbsConfig, Method,
    RecoveredModel, RecoveryConfig, SldaModel,
};

fn frob(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// L1 error between matched topic-word columns, summed over topics.
fn matched_mu_l1(truth: &SldaModel, recovered: &SldaModel) -> f64 {
    let matching = match_topics(truth, recovered).unwrap();
    let mut total = 0.0;
    for (i, &j) in matching.permutation.iter().enumerate() {
        total += (truth.topics().column(i) - recovered.topics().column(j))
            .iter()
            .map(|x| x.abs())
            .sum::<f64>();
    }
    total
}

fn matched_eta_l1(truth: &SldaModel, recovered: &SldaModel) -> f64 {
    let matching = match_topics(truth, recovered).unwrap();
    matching
        .permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (truth.eta()[i] - recovered.eta()[j]).abs())
        .sum()
}

#[test]
fn empirical_second_moment_converges_to_population() {
    let model = sample_model(3, 20, 1.0, 0.4, 42).unwrap();
    let exact = population_moments(&model);

    let mut errors = Vec::new();
    for &n in &[500usize, 5_000, 50_000] {
        let corpus = generate_corpus(&model, n, 40, 7).unwrap();
        let est = estimate_moments(&corpus, 1.0).unwrap();
        errors.push(frob(&(est.m2 - &exact.m2)));
    }
    // each 10x increase in corpus size should shrink the error noticeably
    assert!(
        errors[1] < errors[0] * 0.8,
        "m2 error did not shrink: {errors:?}"
    );
    assert!(
        errors[2] < errors[1] * 0.8,
        "m2 error did not shrink: {errors:?}"
    );
    assert!(errors[2] < 2e-3, "m2 error too large at n=50000: {errors:?}");
}

#[test]
fn two_stage_parameter_error_shrinks_with_corpus_size() {
    let model = sample_model(3, 25, 1.0, 0.3, 11).unwrap();
    let cfg = RecoveryConfig::new(Method::TwoStage, 1.0, 3);

    let mut errors = Vec::new();
    for &n in &[1_000usize, 16_000] {
        let corpus = generate_corpus(&model, n, 60, 23).unwrap();
        let recovered = recover_two_stage(&corpus, &cfg).unwrap();
        errors.push(matched_mu_l1(&model, &recovered.model));
    }
    assert!(
        errors[1] < errors[0],
        "topic error did not improve with more data: {errors:?}"
    );
    assert!(errors[1] < 0.5, "topic error too large at n=16000: {errors:?}");
}

#[test]
fn recovery_is_bit_for_bit_deterministic() {
    let model = sample_model(2, 15, 1.0, 0.5, 3).unwrap();
    let corpus = generate_corpus(&model, 2_000, 30, 9).unwrap();

    let run = |method: Method| -> RecoveredModel {
        let cfg = RecoveryConfig::new(method, 1.0, 2);
        match method {
            Method::TwoStage => recover_two_stage(&corpus, &cfg).unwrap(),
            Method::Joint => recover_joint(&corpus, &cfg).unwrap(),
        }
    };

    for method in [Method::TwoStage, Method::Joint] {
        let a = run(method);
        let b = run(method);
        assert_eq!(a.model.alpha(), b.model.alpha(), "{method:?} alpha differs");
        assert_eq!(a.model.eta(), b.model.eta(), "{method:?} eta differs");
        assert_eq!(a.model.topics(), b.model.topics(), "{method:?} topics differ");
        assert_eq!(a.model.sigma(), b.model.sigma(), "{method:?} sigma differs");
        assert_eq!(
            serde_json::to_string(&a.diagnostics).unwrap(),
            serde_json::to_string(&b.diagnostics).unwrap()
        );
    }
}

#[test]
fn joint_and_two_stage_agree_on_a_large_corpus() {
    let model = sample_model(3, 25, 1.0, 0.3, 17).unwrap();
    let corpus = generate_corpus(&model, 16_000, 60, 31).unwrap();

    let two_stage = recover_two_stage(&corpus, &RecoveryConfig::new(Method::TwoStage, 1.0, 3))
        .unwrap()
        .model;
    let joint = recover_joint(&corpus, &RecoveryConfig::new(Method::Joint, 1.0, 3))
        .unwrap()
        .model;

    // both should be close to the truth, hence to each other
    assert!(matched_mu_l1(&model, &two_stage) < 0.5);
    assert!(matched_mu_l1(&model, &joint) < 0.5);
    assert!(matched_mu_l1(&two_stage, &joint) < 0.6);
    assert!(matched_eta_l1(&two_stage, &joint) < 1.0);
}

#[test]
fn recovered_model_predicts_held_out_responses() {
    let model = sample_model(3, 25, 1.0, 0.3, 29).unwrap();
    let train = generate_corpus(&model, 8_000, 60, 41).unwrap();
    let test = generate_corpus(&model, 300, 60, 43).unwrap();

    let recovered = recover_two_stage(&train, &RecoveryConfig::new(Method::TwoStage, 1.0, 3))
        .unwrap()
        .model;

    let gibbs = GibbsConfig { burnin: 100, samples: 100, seed: 0 };
    let report = evaluate(Some(&model), &recovered, &test, &gibbs).unwrap();
    let params = report.params.as_ref().expect("truth model supplied");

    assert!(params.l1_mu < 0.6, "topic L1 error too large: {}", params.l1_mu);
    assert!(params.l1_eta < 1.0, "eta L1 error too large: {}", params.l1_eta);
    assert!(params.sigma_abs_err < 0.3, "sigma error: {}", params.sigma_abs_err);
    let pr2 = report.pr2.expect("responses vary");
    assert!(pr2 > 0.2, "predictive R^2 too low: {pr2}");
    assert!(report.neg_perword_ll.is_finite());

    // an oracle using the true model should predict at least as well
    let oracle = evaluate(Some(&model), &model, &test, &gibbs).unwrap();
    assert!(oracle.pr2.unwrap() >= pr2 - 0.05);
    assert!(oracle.mse <= report.mse * 1.5 + 1e-9);
}

#[test]
fn training_prefixes_form_a_consistent_ladder() {
    // prefix corpora reuse identical documents, so error curves are comparable
    let model = sample_model(2, 15, 1.0, 0.2, 5).unwrap();
    let full = generate_corpus(&model, 4_000, 40, 13).unwrap();
    let docs = full.documents();

    let mut errors = Vec::new();
    for &n in &[500usize, 4_000] {
        let train = Corpus::new(docs[..n].to_vec(), full.vocab_size()).unwrap();
        let recovered =
            recover_two_stage(&train, &RecoveryConfig::new(Method::TwoStage, 1.0, 2)).unwrap();
        errors.push(matched_mu_l1(&model, &recovered.model));
    }
    assert!(errors[1] < errors[0] * 1.2, "no improvement on prefix ladder: {errors:?}");
}
