#![no_main]

use libfuzzer_sys::fuzz_target;
use saaci::io::parse_saa_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_saa_file(text) {
        let _ = file.set.build(file.b_bar.len());
    }
});
