//! Fuzzes the explicit-schedule parser: arbitrary bytes must either be
//! rejected or parse into a file whose structural validation, in-memory
//! round trip, and printed form are all panic-free and stable.

#![no_main]

use hybrid_dwell::config::ScheduleFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ScheduleFile::from_toml_str(text) else { return };

    if let Ok(schedule) = file.to_schedule() {
        let back = ScheduleFile::from_schedule(&schedule);
        let again = back.to_schedule().expect("a regenerated schedule stays structurally valid");
        assert_eq!(schedule.horizon, again.horizon);
        assert_eq!(schedule.events.len(), again.events.len());
    }

    let Ok(printed) = file.to_toml_string() else { return };
    let reparsed = ScheduleFile::from_toml_str(&printed).expect("printed schedule must reparse");
    let reprinted = reparsed.to_toml_string().expect("reparsed schedule must print");
    assert_eq!(printed, reprinted, "printing must reach a fixed point in one step");
});
