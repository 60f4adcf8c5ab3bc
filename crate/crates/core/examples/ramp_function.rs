//! Continuous ramp index on a synthetic profile, thresholded into labelled
//! ramp events.
//!
//!     cargo run --example ramp_function

use windramp::ramp::{classify, extract_events, ramp_function, Direction, ThresholdSpec, WaveletConfig};
use windramp::synth::{default_start, gen_ramp_profile, RampProfileSpec, RampSpec, SynthConfig, SynthKind};

fn main() -> windramp::Result<()> {
    let config = SynthConfig {
        length: 288,
        interval_secs: 600,
        seed: 7,
        start: default_start(),
        kind: SynthKind::RampProfile(RampProfileSpec {
            base_level: 2000.0,
            events: vec![
                RampSpec { midpoint: 80, magnitude: 3500.0, duration: 12, direction: Direction::Up },
                RampSpec { midpoint: 200, magnitude: 2500.0, duration: 6, direction: Direction::Down },
            ],
            noise_sigma: 40.0,
            clip: None,
        }),
    };
    let truth = gen_ramp_profile(&config)?;

    // two days of 10-minute data, scales up to six hours
    let wavelet = WaveletConfig::new(2, 36);
    let r = ramp_function(&truth.series, &wavelet)?;
    let theta = ThresholdSpec::Quantile(0.9).resolve(&r)?;
    let labels = classify(&r, theta);
    let found = extract_events(&labels.labels, &truth.series)?;

    println!("threshold θ = {theta:.1}");
    for inj in &truth.events {
        println!("injected  {:?} at sample {:>3}  ΔP {:>8.1} kW", inj.event.direction, inj.midpoint(), inj.event.delta_p);
    }
    for (ev, (s, e)) in found.events.iter().zip(&found.spans) {
        println!(
            "detected  {:?} over {s:>3}..={e:<3} ΔP {:>8.1} kW, {:>6.1} kW/min",
            ev.direction, ev.delta_p, ev.rate
        );
    }
    Ok(())
}
