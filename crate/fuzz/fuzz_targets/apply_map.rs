#![no_main]

use gauss_renyi::dynamics::{apply_map, first_digit, inverse_branch, MapChoice};
use gauss_renyi::Error;
use libfuzzer_sys::fuzz_target;

// Raw f64 bits followed by a map byte.
fuzz_target!(|data: &[u8]| {
    if data.len() < 9 {
        return;
    }
    let x = f64::from_le_bytes(data[..8].try_into().unwrap());
    let Ok(map) = MapChoice::from_bit(data[8] & 1) else { return };
    match first_digit(map, x) {
        Ok(n) => {
            let y = apply_map(map, x);
            assert!((0.0..1.0).contains(&y), "x = {x:e}, y = {y:e}");
            if n < 1 << 20 {
                let back = inverse_branch(n, map, y);
                assert!((back - x).abs() <= 1e-9 * (1.0 + n as f64), "x = {x:e}, back = {back:e}");
            }
        }
        Err(Error::DigitUndefined { .. }) => assert_eq!(apply_map(map, x), 0.0),
        Err(Error::Range(_)) => assert!((0.0..1.0).contains(&apply_map(map, x))),
        Err(_) => {}
    }
});
