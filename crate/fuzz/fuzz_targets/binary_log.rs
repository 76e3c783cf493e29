#![no_main]

use interact_core::sim::SimLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = SimLog::from_binary(data) {
        let again = SimLog::from_binary(&log.to_binary()).expect("re-encoded log must decode");
        assert_eq!(again.columns, log.columns);
        assert_eq!(again.len(), log.len());
    }
});
