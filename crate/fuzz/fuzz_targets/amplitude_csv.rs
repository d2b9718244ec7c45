#![no_main]

use libfuzzer_sys::fuzz_target;
use quantum_action::propagator::AmplitudeTable;

fuzz_target!(|data: &[u8]| {
    let _ = AmplitudeTable::read_csv(data);
});
