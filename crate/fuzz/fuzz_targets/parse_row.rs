#![no_main]

use fogfl_core::harness::{parse_csv, parse_row, to_csv_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(row) = parse_row(text) {
        // A parsed row renders back to text that parses to the same fields.
        let again = parse_csv(&to_csv_string(std::slice::from_ref(&row))).expect("rendered row parses");
        assert_eq!(again.len(), 1);
        assert_eq!(again[0].fields(), row.fields());
    }
    let _ = parse_csv(text);
});
