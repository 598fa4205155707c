//! The README quick-start: sample a ground truth, recover it from a
//! synthetic corpus, and score the fit on held-out documents.

use slda_spectral::{
    evaluate, generate_corpus, recover_two_stage, sample_model, GibbsConfig, Method,
    RecoveryConfig,
};

fn main() -> slda_spectral::Result<()> {
    let truth = sample_model(3, 50, 1.0, 0.5, 7)?;
    let train = generate_corpus(&truth, 8_000, 40, 7)?;
    let test = generate_corpus(&truth, 500, 40, 8)?;

    let cfg = RecoveryConfig::new(Method::TwoStage, 1.0, 3);
    let recovered = recover_two_stage(&train, &cfg)?;
    println!("tensor eigenvalues: {:?}", recovered.diagnostics.lambdas);

    let report = evaluate(Some(&truth), &recovered.model, &test, &GibbsConfig::default())?;
    println!("{}", report.to_text());
    Ok(())
}
