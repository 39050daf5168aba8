#![no_main]

use appnet::cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::parse(text, "/") {
        let _ = cfg.canonical();
        let _ = cfg.networks();
        let _ = cfg.orphan_network_options();
    }
});
