#![no_main]

use libfuzzer_sys::fuzz_target;
use poi_core::io::{curves_to_string, parse_curves, MissingPolicy};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let policy = MissingPolicy { max_missing: 2 };
    let Ok(first) = parse_curves(text, policy) else {
        return;
    };
    assert!(first.data.curves.rows().all(|r| r.iter().all(|v| v.is_finite())));
    // Anything accepted must survive a write and reload unchanged.
    let written = curves_to_string(&first.data).expect("accepted data serializes");
    let second = parse_curves(&written, policy).expect("written data reloads");
    assert_eq!(first.data, second.data);
    assert!(second.report.repaired.is_empty());
    assert!(second.report.dropped.is_empty());
});
