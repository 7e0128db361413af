#![no_main]

use libfuzzer_sys::fuzz_target;
use scalc_core::io::FieldFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = FieldFile::decode(data) {
        // Anything accepted must re-encode to the same bytes.
        assert_eq!(file.encode(), data);
    }
});
