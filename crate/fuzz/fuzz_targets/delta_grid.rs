#![no_main]

use libfuzzer_sys::fuzz_target;
use poi_core::io::{parse_delta_grid, parse_float_list, MAX_GRID_COUNT};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(values) = parse_float_list(text) {
        assert!(values.iter().all(|v| v.is_finite()));
    }
    if let Ok(values) = parse_delta_grid(text) {
        assert!(values.iter().all(|v| v.is_finite()));
        if text.contains(':') {
            assert!(!values.is_empty() && values.len() <= MAX_GRID_COUNT);
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
});
