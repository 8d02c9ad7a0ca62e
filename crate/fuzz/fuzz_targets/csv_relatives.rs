#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(series) = racorn::csv::parse_relatives_csv(text) {
            let emitted = racorn::csv::write_relatives_csv(&series);
            let reparsed = racorn::csv::parse_relatives_csv(&emitted)
                .expect("writer output must parse");
            assert_eq!(reparsed.num_periods(), series.num_periods());
            assert_eq!(reparsed.num_assets(), series.num_assets());
            // windows and matching over parsed data must never panic
            let n = series.num_periods();
            let _ = series.window(n.min(3), 2);
            let _ = racorn::find_matches(&series, n, 1, 0.5);
        }
    }
});
