#![no_main]

use gauss_renyi::dynamics::{reconstruct, DigitRecord, MapChoice};
use libfuzzer_sys::fuzz_target;

// Records of 9 bytes: little-endian digit and a map byte; the last 8 bytes
// give the tail.
fuzz_target!(|data: &[u8]| {
    if data.len() < 8 {
        return;
    }
    let (body, tail_bytes) = data.split_at(data.len() - 8);
    let tail = f64::from_le_bytes(tail_bytes.try_into().unwrap());
    let digits: Vec<DigitRecord> = body
        .chunks_exact(9)
        .map(|c| DigitRecord {
            digit: u64::from_le_bytes(c[..8].try_into().unwrap()),
            map: if c[8] & 1 == 0 { MapChoice::Gauss } else { MapChoice::Renyi },
        })
        .collect();
    if let Ok(v) = reconstruct(&digits, tail) {
        assert!(!v.is_nan());
    }
});
