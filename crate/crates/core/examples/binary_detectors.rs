//! The four classical binary ramp definitions side by side on a month of
//! synthetic farm output.
//!
//!     cargo run --example binary_detectors

use windramp::detectors::{BinaryRampConfig, Definition};
use windramp::synth::{default_composite, gen_composite};

fn main() -> windramp::Result<()> {
    let (frame, events) = gen_composite(&default_composite(3)?)?;
    let power = &frame.p_tot;
    let rated = frame.rated_power;

    let cfg = BinaryRampConfig {
        delta_t: 6,
        p_val: 0.25 * rated,
        p_rr: 0.25 * rated / 6.0,
        n_nam: 6,
    };
    println!("{} injected events", events.len());
    for def in Definition::ALL {
        let d = def.detect(power, &cfg)?;
        println!(
            "{:<9} {:>3} ramp steps of {:>3} evaluable ({:.1} %)",
            def.name(),
            d.ramp_count(),
            d.evaluable_count(),
            100.0 * d.ramp_frequency()
        );
    }
    Ok(())
}
