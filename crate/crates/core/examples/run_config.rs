//! Drive a run from a TOML configuration, as the `susyq` binary does.
//!
//! ```text
//! cargo run --release --example run_config
//! ```

use susy_quench::config::parse_config;
use susy_quench::runner::run;
use susy_quench::Result;

const CONFIG: &str = r#"
experiment = "survival"
temperatures = [0.0, 0.1]

[quench]
length = 4.0
to_level = 3
particles = 30

[time]
t_max = 1.0
points = 401

[output]
dir = "target/run_config_example"
"#;

fn main() -> Result<()> {
    let config = parse_config(CONFIG)?;
    let summary = run(&config)?;
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    println!("manifest {} ({:.2} s)", summary.manifest.display(), summary.wall_time);
    Ok(())
}
