#![no_main]

use gbc_fbl_cli::expand_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Must never panic; any accepted document expands to an argv that starts
    // with the program name and the command.
    if let Ok(argv) = expand_config(data) {
        assert!(argv.len() >= 2);
        assert_eq!(argv[0], "gbc-fbl");
    }
});
