#![no_main]

use libfuzzer_sys::fuzz_target;
use qaction_cli::{header, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::parse(text) {
        // Anything accepted must survive its own echo.
        let echoed = header::render("fuzz", &config);
        let back = header::parse(&echoed).expect("echoed header reparses");
        assert_eq!(back.config, config);
    }
});
