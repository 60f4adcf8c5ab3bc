//! The full comparison: every model fitted on the same split, scored overall
//! and per ramp class, printed as the report table.
//!
//!     cargo run --release --example evaluate_models

use windramp::eval::{evaluate_frame, EvalSettings, ModelSpec};
use windramp::lstm::{LstmConfig, Selection};
use windramp::ramp::WaveletConfig;
use windramp::synth::{default_composite, gen_composite};

fn main() -> windramp::Result<()> {
    let (frame, _) = gen_composite(&default_composite(42)?)?;
    let settings = EvalSettings {
        wavelet: WaveletConfig::new(2, 36),
        models: vec![
            ModelSpec::Persistence,
            ModelSpec::Arma { p: 3, q: 1 },
            ModelSpec::Arima { p: 3, d: 1, q: 1 },
            ModelSpec::Lstm(LstmConfig::default()),
            ModelSpec::Lstm(LstmConfig { selection: Selection::Multivariate, ..Default::default() }),
        ],
        ..Default::default()
    };
    let run = evaluate_frame(&frame, &settings)?;
    println!("train {} points, test {}, θ = {:.1}", run.n_train, run.span.len() - run.n_train, run.threshold);
    print!("{}", run.report.to_csv_string()?);
    Ok(())
}
