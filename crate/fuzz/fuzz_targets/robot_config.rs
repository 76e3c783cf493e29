#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(robot) = interact_core::config::parse_robot(text) {
        let q = nalgebra::DVector::zeros(robot.dof());
        let _ = robot.mass_matrix(&q);
    }
});
