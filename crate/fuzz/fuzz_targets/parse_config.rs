#![no_main]

use libfuzzer_sys::fuzz_target;
use lmg::config::ConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = ConfigFile::parse(text) {
        // anything that resolves must survive a write/read cycle
        if let Ok(cfg) = file.resolve() {
            let again = ConfigFile::parse(&cfg.to_toml().unwrap())
                .unwrap()
                .resolve()
                .unwrap();
            assert_eq!(again, cfg);
        }
    }
});
