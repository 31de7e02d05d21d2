#![no_main]

use gbc_fbl::channel::Codebook;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Must never panic or overallocate on untrusted bytes; on success the
    // parsed table must survive a write/read round trip.
    if let Ok(cb) = Codebook::read_from(data) {
        let mut buf = Vec::new();
        cb.write_to(&mut buf).expect("serializing a valid codebook");
        let back = Codebook::read_from(buf.as_slice()).expect("round trip");
        assert_eq!(back.n(), cb.n());
        assert_eq!(back.num_pairs(), cb.num_pairs());
    }
});
