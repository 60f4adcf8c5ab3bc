//! ARMA and ARIMA fitted by conditional sum of squares, scored against
//! persistence on rolling one-step forecasts.
//!
//!     cargo run --example arma_forecast

use windramp::eval::point_metrics;
use windramp::linear::{fit_arima, fit_arma, persistence_rolling, timed};
use windramp::series::{chronological_split, SplitSpec};
use windramp::synth::{default_composite, gen_composite};

fn main() -> windramp::Result<()> {
    let (frame, _) = gen_composite(&default_composite(1)?)?;
    let power = frame.p_tot;
    let (train, test) = chronological_split(&power, &SplitSpec::default())?;
    let actual = test.values();
    let history = train.dense()?;

    let (arma, t_arma) = timed(|| fit_arma(&history, 3, 1));
    let (arima, t_arima) = timed(|| fit_arima(&history, 3, 1, 1));
    let (arma, arima) = (arma?, arima?);
    println!("ARMA(3,1)    phi {:?} theta {:?} ({:.2?})", arma.phi, arma.theta, t_arma);
    println!("ARIMA(3,1,1) phi {:?} theta {:?} ({:.2?})", arima.phi, arima.theta, t_arima);

    let runs = [
        ("persistence", persistence_rolling(&train, &test)?),
        ("ARMA", arma.rolling_one_step(&train, &test)?),
        ("ARIMA", arima.rolling_one_step(&train, &test)?),
    ];
    for (name, pred) in runs {
        let m = point_metrics(&pred, actual)?;
        println!("{name:<12} test MAE {:>7.2}  RMSE {:>7.2} kW", m.mae, m.rmse);
    }

    let ahead = arma.forecast(&history, 6)?;
    println!("next hour from ARMA: {:.0?}", ahead);
    Ok(())
}
