#![no_main]

use interact_core::sim::SimLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(log) = SimLog::from_csv(text) {
        let _ = interact_core::bench::episode_metrics(&log);
        let _ = SimLog::from_csv(&log.to_csv()).expect("re-encoded log must parse");
    }
});
