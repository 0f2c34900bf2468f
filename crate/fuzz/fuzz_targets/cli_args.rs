#![no_main]

use drpolicy_cli::{parse_cli, resolve, FileConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let argv = std::iter::once("drpolicy").chain(text.split('\0'));
    if let Ok(args) = parse_cli(argv) {
        let (command, mut flags) = args.command.split();
        flags.config = None;
        let _ = resolve(command, flags, FileConfig::default());
    }
});
