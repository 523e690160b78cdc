//! Drive the command-line front end from a config file, as the `flexq`
//! binary would. Pass a path, or the bundled `examples/instance.conf` is used.

use flexq::cli::{run, Command, RunManifest};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/instance.conf").to_string());
    let out = std::env::temp_dir().join("flexq-example");
    let manifest = RunManifest::new(Command::Solve, &out)
        .with_config(path)
        .with_override("reward=10");
    let code = run(&manifest, &mut std::io::stdout(), &mut std::io::stderr());
    println!("exit code {code}; values written under {}", out.display());
}
