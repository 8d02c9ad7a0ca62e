#![no_main]

use libfuzzer_sys::fuzz_target;

use racorn::config::{parse_config_str, RunConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(overrides) = parse_config_str(text) {
            // Applying parsed overrides may reject values but must not panic.
            let mut config = RunConfig::default();
            let _ = config.apply(&overrides);
        }
    }
});
