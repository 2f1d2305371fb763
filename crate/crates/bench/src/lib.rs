//! Fixtures shared by the benchmarks in `benches/`.

use analog_grover::hamiltonians::grover_harmonics;
use analog_grover::units::hz;
use analog_grover::{fenner_time, transition_table, Direction, GroverPulse, StaticField};

/// Field of the sodium sample: 105.79 MHz Larmor, 10840 Hz splitting.
pub fn sodium_field() -> StaticField {
    StaticField::from_hz(105.79e6, 10840.0).expect("valid field")
}

/// Untrimmed direct Grover pulse for `|10>` with a 454.6 Hz double-quantum
/// amplitude.
pub fn sodium_grover_pulse() -> GroverPulse {
    let field = sodium_field();
    grover_harmonics(
        2,
        hz(62.5),
        &transition_table(&field),
        hz(454.6),
        Direction::Direct,
    )
    .expect("realizable target")
    .with_duration(fenner_time(hz(62.5), 0.5).expect("valid overlap"))
}
