#![no_main]

use fmcw_mend::config::parse_gap_arg;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(gap) = parse_gap_arg(text) {
        assert!(gap.n1 <= gap.n2);
    }
});
