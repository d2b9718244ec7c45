#![no_main]

use libfuzzer_sys::fuzz_target;
use quantum_action::fitter::FitReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = FitReport::parse(text) {
        let again = FitReport::parse(&report.to_toml().expect("accepted report renders")).expect("rendered report reparses");
        assert_eq!(again, report);
    }
});
