//! Seeded generators: an ARMA process, a clipped ramp profile and the
//! composite farm dataset, with their ground-truth events.
//!
//!     cargo run --example synth_profiles

use windramp::synth::{
    default_composite, default_start, gen_arma, gen_composite, gen_ramp_profile, ArmaSpec, ClipSpec, RampProfileSpec,
    RampSpec, SynthConfig, SynthKind, GENERATOR,
};
use windramp::ramp::Direction;

fn main() -> windramp::Result<()> {
    println!("generator {GENERATOR}");

    let ar = SynthConfig {
        length: 1000,
        interval_secs: 600,
        seed: 5,
        start: default_start(),
        kind: SynthKind::Arma(ArmaSpec { phi: vec![0.5, -0.3], theta: vec![], sigma: 1.0, mean: 0.0 }),
    };
    let x = gen_arma(&ar)?.dense()?;
    println!("AR(2): first values {:.3?}", &x[..5]);

    let profile = SynthConfig {
        length: 200,
        interval_secs: 600,
        seed: 5,
        start: default_start(),
        kind: SynthKind::RampProfile(RampProfileSpec {
            base_level: 5000.0,
            events: vec![RampSpec { midpoint: 50, magnitude: 3000.0, duration: 8, direction: Direction::Up }],
            noise_sigma: 0.0,
            clip: Some(ClipSpec { rated_power: 8200.0, plateau: 30, shut_in_level: 500.0, drop_duration: 3 }),
        }),
    };
    for ev in gen_ramp_profile(&profile)?.events {
        println!("profile event {:?} ΔP {:.0} kW over {} min", ev.event.direction, ev.event.delta_p, ev.event.delta_t_secs / 60);
    }

    let (frame, events) = gen_composite(&default_composite(5)?)?;
    println!("composite: {} rows, {} events, over-rated slots {}", frame.len(), events.len(), frame.over_rated_slots());
    Ok(())
}
