#![no_main]

use libfuzzer_sys::fuzz_target;
use saaci::io::parse_model_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_model_file(text) {
        // Small inline models are cheap to validate; file references are not followed.
        if file.anchor.len() <= 8 {
            if let Ok(loaded) = file.load(Some(std::path::Path::new("/nonexistent"))) {
                let _ = saaci::pwnormal::exact_ci(&loaded.model, &loaded.observation, loaded.alpha);
            }
        }
    }
});
