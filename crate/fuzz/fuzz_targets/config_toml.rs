#![no_main]

use libfuzzer_sys::fuzz_target;
use poi_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml_str(text) else {
        return;
    };
    if cfg.study.is_some() {
        let _ = cfg.study_config();
    }
    if let Some(grid) = cfg.simulate.as_ref().and_then(|s| poi_core::Grid::new(s.a, s.b, s.p).ok()) {
        let _ = cfg.pipeline(&grid);
    }
});
