#![no_main]

use drpolicy_cli::{parse_config_file, resolve, Command, Flags};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_config_file(text) else {
        return;
    };
    let command = match file.experiment.as_ref().and_then(|e| e.command.as_deref()) {
        Some(c) => match c.parse::<Command>() {
            Ok(c) => c,
            Err(_) => return,
        },
        None => Command::Evaluate,
    };
    if let Ok(cfg) = resolve(command, Flags::default(), file) {
        let again = parse_config_file(&cfg.to_toml()).expect("rendered config parses");
        let back = resolve(command, Flags::default(), again).expect("rendered config resolves");
        assert_eq!(back, cfg);
    }
});
