#![no_main]

use gauss_renyi::branch_algebra::{compose, sup_abs_derivative, BranchIndex, BranchWord};
use gauss_renyi::dynamics::MapChoice;
use libfuzzer_sys::fuzz_target;

// Each 3-byte chunk is a branch: a 16-bit index and a map byte. The first
// byte chooses where the word is split for the associativity check.
fuzz_target!(|data: &[u8]| {
    let Some((&cut, rest)) = data.split_first() else { return };
    let indices: Vec<BranchIndex> = rest
        .chunks_exact(3)
        .take(64)
        .filter_map(|c| {
            let n = u64::from(u16::from_le_bytes([c[0], c[1]]));
            let map = if c[2] & 1 == 0 { MapChoice::Gauss } else { MapChoice::Renyi };
            BranchIndex::new(n, map).ok()
        })
        .collect();
    if indices.is_empty() {
        return;
    }
    let split = usize::from(cut) % indices.len();
    let Ok(whole) = BranchWord::new(indices.clone()) else { return };
    let m = compose(&whole).unwrap();
    assert!(m.is_unimodular());
    if split > 0 {
        let u = BranchWord::new(indices[..split].to_vec()).unwrap();
        let v = BranchWord::new(indices[split..].to_vec()).unwrap();
        assert_eq!(compose(&u.concat(&v)).unwrap(), m);
        assert_eq!(&compose(&u).unwrap() * &compose(&v).unwrap(), m);
    }
    let d = sup_abs_derivative(&m).unwrap();
    assert!((0.0..=1.0).contains(&d));
});
