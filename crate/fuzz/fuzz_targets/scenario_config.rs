#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenario) = interact_core::config::parse_scenario(text, None) {
        let _ = scenario.true_geometry();
        let _ = interact_core::config::scenario_to_toml(&scenario);
    }
});
