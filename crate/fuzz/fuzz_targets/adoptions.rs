#![no_main]

use appnet::netdata::{load_adoptions, parse_adoption_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_adoption_records(data) else {
        return;
    };
    if let Ok(m) = load_adoptions(data, 32, 32) {
        for r in &records {
            assert!(m.adopter_vector(r.app)[r.user]);
        }
    }
});
