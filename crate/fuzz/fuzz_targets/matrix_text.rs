#![no_main]

use libfuzzer_sys::fuzz_target;
use saaci::io::{parse_matrix_text, write_banded_text, write_dense_text, MatrixData};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Anything that parses must survive a write/parse round trip unchanged.
    match parse_matrix_text(text) {
        Ok(MatrixData::Dense(m)) => assert_eq!(parse_matrix_text(&write_dense_text(&m)).unwrap(), MatrixData::Dense(m)),
        Ok(MatrixData::Banded(b)) => assert_eq!(parse_matrix_text(&write_banded_text(&b)).unwrap(), MatrixData::Banded(b)),
        Err(_) => {}
    }
});
