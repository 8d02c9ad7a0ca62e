#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(prices) = racorn::csv::parse_prices_csv(text) {
            // Derivation may reject extreme ratios (overflow), but must
            // never panic; whatever derives must re-emit and re-parse.
            if let Ok(relatives) = racorn::derive_relatives(&prices) {
                let emitted = racorn::csv::write_relatives_csv(&relatives);
                let reparsed = racorn::csv::parse_relatives_csv(&emitted)
                    .expect("writer output must parse");
                assert_eq!(reparsed.num_periods(), relatives.num_periods());
                assert_eq!(reparsed.num_assets(), relatives.num_assets());
            }
        }
    }
});
