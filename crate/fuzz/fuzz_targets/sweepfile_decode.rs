#![no_main]

use fmcw_mend::sweepfile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let header = sweepfile::decode_header(data);
    if let Ok(file) = sweepfile::decode(data) {
        assert!(header.is_ok());
        // Anything that decodes must re-encode to the same bytes.
        assert_eq!(sweepfile::encode(&file), data);
    }
});
