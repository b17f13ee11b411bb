#![no_main]

use gauss_renyi::dynamics::{expand, reconstruct, MapChoice};
use libfuzzer_sys::fuzz_target;

// 8 bytes of x (reduced into [0, 1]) followed by one map bit per byte.
fuzz_target!(|data: &[u8]| {
    if data.len() < 8 {
        return;
    }
    let bits = u64::from_le_bytes(data[..8].try_into().unwrap());
    let x = (bits >> 11) as f64 / (1u64 << 53) as f64;
    let maps: Vec<MapChoice> =
        data[8..].iter().take(20).map(|b| if b & 1 == 0 { MapChoice::Gauss } else { MapChoice::Renyi }).collect();
    let Ok(exp) = expand(x, &maps) else { return };
    assert!((0.0..=1.0).contains(&exp.tail));
    if exp.digits.is_empty() {
        return;
    }
    if let Ok(y) = reconstruct(&exp.digits, exp.tail) {
        assert!((0.0..=1.0).contains(&y));
        if exp.digits.len() <= 3 && exp.digits.iter().all(|d| d.digit < 1_000) {
            assert!((y - x).abs() <= 1e-9, "x = {x}, y = {y}");
        }
    }
});
