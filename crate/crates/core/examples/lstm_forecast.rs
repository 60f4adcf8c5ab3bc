//! A small LSTM trained on scaled farm power, then used for one-step
//! forecasts on the held-out tail. Also saves and reloads the model.
//!
//!     cargo run --release --example lstm_forecast

use windramp::eval::point_metrics;
use windramp::lstm::{LstmConfig, LstmModel, Selection};
use windramp::synth::{default_composite, gen_composite};

fn main() -> windramp::Result<()> {
    let (frame, _) = gen_composite(&default_composite(2)?)?;
    let n = frame.len();
    let n_train = n * 4 / 5;
    let train = frame.slice(0..n_train);

    for selection in [Selection::Univariate, Selection::Multivariate] {
        let config = LstmConfig { hidden_size: 16, epochs: 30, selection, ..Default::default() };
        let model = LstmModel::fit(&config, &selection.columns(&train))?;
        let losses = &model.history.losses;
        println!(
            "{:<12} loss {:.2e} -> {:.2e} in {:.1}s",
            selection.display(),
            losses[0],
            losses[losses.len() - 1],
            model.history.wall_secs
        );

        let (rows, pred) = model.predict_rows(&selection.columns(&frame), n_train..n)?;
        let actual: Vec<Option<f64>> = rows.iter().map(|&r| frame.p_tot.get(r)).collect();
        let m = point_metrics(&pred, &actual)?;
        println!("{:<12} test MAE {:.2} kW, RMSE {:.2} kW", "", m.mae, m.rmse);

        let path = std::env::temp_dir().join(format!("windramp-{}.json", selection.as_str()));
        model.save(&path)?;
        assert_eq!(LstmModel::load(&path)?, model);
    }
    Ok(())
}
