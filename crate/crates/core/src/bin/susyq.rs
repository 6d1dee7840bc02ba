use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use susy_quench::config::{load_config, Experiment};
use susy_quench::runner::run;
use susy_quench::{Error, Result};

/// Quench dynamics of an ideal Fermi gas in the infinite box and its
/// supersymmetric partners.
#[derive(Parser)]
#[command(name = "susyq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival probability F(t) on a time grid.
    Survival(Flags),
    /// Work probability distribution.
    Wpd(Flags),
    /// Closed-form average and irreversible work against N.
    WorkScan(Flags),
    /// Diagonal overlaps at chosen instants.
    Phases(Flags),
    /// Hierarchy wavefunctions, potentials and energies on a grid.
    BasisDump(Flags),
}

/// Every flag overrides the config key named in its help text.
#[derive(Args)]
struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw override, `key.path=value` (TOML value syntax), repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// quench.kind (hierarchy or expansion)
    #[arg(long)]
    kind: Option<String>,
    /// quench.length
    #[arg(long)]
    length: Option<f64>,
    /// quench.from_level
    #[arg(long)]
    from_level: Option<u32>,
    /// quench.to_level
    #[arg(long)]
    to_level: Option<u32>,
    /// quench.particles
    #[arg(long)]
    particles: Option<usize>,
    /// quench.rows
    #[arg(long)]
    rows: Option<usize>,
    /// quench.length_initial
    #[arg(long)]
    length_initial: Option<f64>,
    /// quench.length_final
    #[arg(long)]
    length_final: Option<f64>,
    /// temperatures, as T/T_F
    #[arg(long, value_delimiter = ',')]
    temperatures: Option<Vec<f64>>,
    /// time.t_max, in units of t_r
    #[arg(long)]
    t_max: Option<f64>,
    /// time.points
    #[arg(long)]
    points: Option<usize>,
    /// time.times, in units of t_r
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// truncation.columns (switches to a fixed truncation)
    #[arg(long)]
    columns: Option<usize>,
    /// truncation.tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// wpd.max_order
    #[arg(long)]
    max_order: Option<usize>,
    /// wpd.max_order_initial
    #[arg(long)]
    max_order_initial: Option<usize>,
    /// wpd.threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// wpd.allow_large
    #[arg(long)]
    allow_large: bool,
    /// scan.alphas
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<u32>>,
    /// scan.particles_min
    #[arg(long)]
    particles_min: Option<usize>,
    /// scan.particles_max
    #[arg(long)]
    particles_max: Option<usize>,
    /// basis.alpha_max
    #[arg(long)]
    alpha_max: Option<u32>,
    /// basis.states
    #[arg(long)]
    states: Option<usize>,
    /// output.cache = false
    #[arg(long)]
    no_cache: bool,
}

fn list<T: ToString>(v: &[T]) -> String {
    format!("[{}]", v.iter().map(T::to_string).collect::<Vec<_>>().join(", "))
}

impl Flags {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        let quoted = |s: &str| format!("{s:?}");
        put("quench.kind", self.kind.as_deref().map(quoted));
        put("quench.length", self.length.map(|v| format!("{v:?}")));
        put("quench.from_level", self.from_level.map(|v| v.to_string()));
        put("quench.to_level", self.to_level.map(|v| v.to_string()));
        put("quench.particles", self.particles.map(|v| v.to_string()));
        put("quench.rows", self.rows.map(|v| v.to_string()));
        put("quench.length_initial", self.length_initial.map(|v| format!("{v:?}")));
        put("quench.length_final", self.length_final.map(|v| format!("{v:?}")));
        put("temperatures", self.temperatures.as_deref().map(|v| list(&v.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>())));
        put("time.t_max", self.t_max.map(|v| format!("{v:?}")));
        put("time.points", self.points.map(|v| v.to_string()));
        put("time.times", self.times.as_deref().map(|v| list(&v.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>())));
        put("truncation.columns", self.columns.map(|v| v.to_string()));
        put("truncation.mode", self.columns.map(|_| quoted("fixed")));
        put("truncation.tolerance", self.tolerance.map(|v| format!("{v:?}")));
        put("wpd.max_order", self.max_order.map(|v| v.to_string()));
        put("wpd.max_order_initial", self.max_order_initial.map(|v| v.to_string()));
        put("wpd.threshold", self.threshold.map(|v| format!("{v:?}")));
        put("wpd.allow_large", self.allow_large.then(|| "true".into()));
        put("scan.alphas", self.alphas.as_deref().map(list));
        put("scan.particles_min", self.particles_min.map(|v| v.to_string()));
        put("scan.particles_max", self.particles_max.map(|v| v.to_string()));
        put("basis.alpha_max", self.alpha_max.map(|v| v.to_string()));
        put("basis.states", self.states.map(|v| v.to_string()));
        put("output.dir", self.out.as_ref().map(|p| quoted(&p.display().to_string())));
        put("output.cache", self.no_cache.then(|| "false".into()));
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (experiment, flags) = match cli.command {
        Command::Survival(f) => (Experiment::Survival, f),
        Command::Wpd(f) => (Experiment::Wpd, f),
        Command::WorkScan(f) => (Experiment::WorkScan, f),
        Command::Phases(f) => (Experiment::Phases, f),
        Command::BasisDump(f) => (Experiment::BasisDump, f),
    };
    let text = match &flags.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let config = load_config(&text, Some(experiment), &flags.overrides()?)?;
    let summary = run(&config)?;
    for f in &summary.files {
        println!("{}", f.display());
    }
    println!("{}", summary.manifest.display());
    eprintln!("done in {:.2} s", summary.wall_time);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("susyq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
