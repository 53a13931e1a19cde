//! Fuzzes the run-configuration parser: arbitrary bytes must either be
//! rejected with an error or produce a config whose derived views never
//! panic and whose printed form is a one-step fixed point.

#![no_main]

use hybrid_dwell::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = RunConfig::from_toml_str(text) else { return };

    let _ = config.to_overrides();
    if let Ok(spec) = config.to_spec() {
        let _ = spec.validate();
        let _ = RunConfig::from_spec(&spec);
    }

    let Ok(printed) = config.to_toml_string() else { return };
    let reparsed = RunConfig::from_toml_str(&printed).expect("printed config must reparse");
    let reprinted = reparsed.to_toml_string().expect("reparsed config must print");
    assert_eq!(printed, reprinted, "printing must reach a fixed point in one step");
});
