#![no_main]

use libfuzzer_sys::fuzz_target;
use scalc_core::io::decode_coefficients;

fuzz_target!(|data: &[u8]| {
    // The first byte picks the dimension of the supplied periods.
    let Some((&dim, rest)) = data.split_first() else { return };
    let lengths = vec![1.0; 1 + (dim % 2) as usize];
    let _ = decode_coefficients(rest, &lengths);
});
