mod config;
mod output;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{Command, Config, DilationCheck, DilationInterior, ScenarioSection};
use dissipa_core::scenario;

#[derive(Parser)]
#[command(name = "dissipa", version, about = "Numerical workbench for dissipative semiclassical Schrödinger operators")]
struct Cli {
    /// worker threads (default: all cores)
    #[arg(long, global = true, env = "DISSIPA_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// scenario preset (see `dissipa list`)
    #[arg(long)]
    scenario: Option<String>,
    /// artifact directory
    #[arg(long, default_value = "dissipa-out")]
    out: PathBuf,
    /// also write SVG figures derived from the CSVs
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one orbit with its damping factors.
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, value_parser = number)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = number)]
        xi: Option<f64>,
        #[arg(long, value_parser = number)]
        t_max: Option<f64>,
        #[arg(long, value_parser = number)]
        dt: Option<f64>,
    },
    /// Sample an energy shell and check that bounded orbits meet the damping.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = number)]
        energy: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_parser = number)]
        r_escape: Option<f64>,
    },
    /// One weighted resolvent norm, with a refined-grid check.
    Resolvent {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = number)]
        h: Option<f64>,
        /// RE,IM
        #[arg(long, allow_hyphen_values = true, value_parser = pair)]
        z: Option<(f64, f64)>,
        #[arg(long, value_parser = number)]
        s: Option<f64>,
    },
    /// Sup-norm scaling sweep over h.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// e.g. 1/8,1/16,1/32
        #[arg(long, value_parser = number, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
        /// A,B
        #[arg(long, value_parser = pair)]
        interval: Option<(f64, f64)>,
        #[arg(long, value_parser = number)]
        s: Option<f64>,
        #[arg(long, value_parser = number)]
        mu_min: Option<f64>,
        /// skip the refined-grid convergence check
        #[arg(long)]
        no_refine: bool,
    },
    /// Egorov comparison with damping.
    Egorov {
        #[command(flatten)]
        common: Common,
        /// gaussian, gaussian(x0,xi0,sigma), x or one
        #[arg(long)]
        symbol: Option<String>,
        #[arg(long, value_parser = number)]
        t: Option<f64>,
        #[arg(long, value_parser = number, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
        /// repeat on the refined grid
        #[arg(long)]
        refine: bool,
    },
    /// Selfadjoint dilation identities.
    Dilation {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L", value_parser = number)]
        channel_length: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = pair)]
        z: Option<(f64, f64)>,
        #[arg(long, value_enum)]
        check: Option<CheckArg>,
        #[arg(long, value_parser = number)]
        h: Option<f64>,
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long, value_parser = number)]
        spacing: Option<f64>,
        #[arg(long, value_parser = number, value_delimiter = ',')]
        t_list: Option<Vec<f64>>,
        /// interior grid points on [x_min, x_max]; the semigroup check
        /// uses a one-site interior unless this is given
        #[arg(long)]
        points: Option<usize>,
    },
    /// Besov operator norm of the resolvent by dyadic blocks.
    Besov {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = number)]
        h: Option<f64>,
        #[arg(long, value_parser = number)]
        s: Option<f64>,
        /// ah or x
        #[arg(long = "ref")]
        reference: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_parser = pair)]
        z: Option<(f64, f64)>,
        #[arg(long)]
        refine: bool,
    },
    /// Run the acceptance criteria.
    Accept {
        #[arg(long, default_value = "dissipa-out")]
        out: PathBuf,
        /// comma-separated criterion ids
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// List the scenario presets.
    List,
    /// Run a configuration file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "dissipa-out")]
        out: PathBuf,
        /// overrides `plots` in the file
        #[arg(long)]
        plots: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CheckArg {
    Resolvent,
    Semigroup,
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(number).collect()
}

fn pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match list(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

fn scenario_section(common: &Common, default: &str) -> ScenarioSection {
    let mut s = ScenarioSection::preset(common.scenario.as_deref().unwrap_or(default));
    s.seed = common.seed;
    s
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Builds the configuration for a direct subcommand; `None` for list.
fn to_config(cmd: Cmd) -> Option<(Config, PathBuf)> {
    let with = |command: Command, common: &Common, default: &str| {
        let mut c = Config::new(command, scenario_section(common, default));
        c.plots = common.plots;
        c
    };
    Some(match cmd {
        Cmd::Flow { common, x, xi, t_max, dt } => {
            let mut c = with(Command::Flow, &common, "trap");
            set(&mut c.flow.x, x);
            set(&mut c.flow.xi, xi);
            set(&mut c.flow.t_max, t_max);
            set(&mut c.flow.dt, dt);
            (c, common.out)
        }
        Cmd::Classify { common, energy, samples, r_escape } => {
            let mut c = with(Command::Classify, &common, "trap");
            set(&mut c.classify.energy, energy);
            set(&mut c.classify.samples, samples);
            c.classify.r_escape = r_escape.or(c.classify.r_escape);
            (c, common.out)
        }
        Cmd::Resolvent { common, h, z, s } => {
            let mut c = with(Command::Resolvent, &common, "free");
            set(&mut c.resolvent.h, h);
            set(&mut c.resolvent.z, z);
            c.scenario.s = s;
            (c, common.out)
        }
        Cmd::Sweep { common, h_list, interval, s, mu_min, no_refine } => {
            let mut c = with(Command::Sweep, &common, "free");
            set(&mut c.sweep.h_list, h_list);
            set(&mut c.sweep.mu_min, mu_min);
            c.sweep.refine = !no_refine;
            c.scenario.interval = interval;
            c.scenario.s = s;
            (c, common.out)
        }
        Cmd::Egorov { common, symbol, t, h_list, refine } => {
            let mut c = with(Command::Egorov, &common, "gaussian_well");
            set(&mut c.egorov.symbol, symbol);
            set(&mut c.egorov.t, t);
            set(&mut c.egorov.h_list, h_list);
            c.egorov.refine = refine;
            (c, common.out)
        }
        Cmd::Dilation { common, channel_length, z, check, h, probes, spacing, t_list, points } => {
            let mut c = with(Command::Dilation, &common, "trap");
            set(&mut c.dilation.channel_length, channel_length);
            set(&mut c.dilation.z, z);
            set(
                &mut c.dilation.check,
                check.map(|k| match k {
                    CheckArg::Resolvent => DilationCheck::Resolvent,
                    CheckArg::Semigroup => DilationCheck::Semigroup,
                }),
            );
            set(&mut c.dilation.h, h);
            set(&mut c.dilation.probes, probes);
            set(&mut c.dilation.spacing, spacing);
            set(&mut c.dilation.t_list, t_list);
            if matches!(check, Some(CheckArg::Semigroup)) && points.is_none() {
                c.dilation.interior = DilationInterior::Scalar;
            }
            set(&mut c.dilation.n_points, points);
            (c, common.out)
        }
        Cmd::Besov { common, h, s, reference, z, refine } => {
            let mut c = with(Command::Besov, &common, "free");
            set(&mut c.besov.h, h);
            set(&mut c.besov.reference, reference);
            set(&mut c.besov.z, z);
            c.besov.refine = refine;
            c.scenario.s = s;
            (c, common.out)
        }
        Cmd::Accept { out, only } => {
            let mut c = Config::new(Command::Accept, ScenarioSection::default());
            c.accept.only = only;
            (c, out)
        }
        Cmd::List | Cmd::Run { .. } => return None,
    })
}

fn print_list() {
    println!("{:<15} {:<28} {:<24} {:<6} description", "name", "potential", "damping", "nu");
    for s in scenario::registry() {
        println!("{:<15} {:<28} {:<24} {:<6} {}", s.name, s.potential, s.damping, s.nu_law, s.description);
    }
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Gates,
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(c.downcast_ref::<dissipa_core::Error>(), Some(dissipa_core::Error::Config { .. })) || c.to_string().starts_with("config error")
    })
}

fn execute(cfg: Config, out: PathBuf) -> std::result::Result<(), Failure> {
    cfg.validate().map_err(|e| if is_config_error(&e) { Failure::Config(e) } else { Failure::Runtime(e) })?;
    let res = run::execute(&cfg).map_err(|e| if is_config_error(&e) { Failure::Config(e) } else { Failure::Runtime(e) })?;
    let manifest = output::write_artifacts(&out, &cfg, &res).map_err(Failure::Runtime)?;
    for g in &manifest.gates {
        println!("{}  {:<40} {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.measured);
    }
    for o in &manifest.outputs {
        println!("wrote {}", out.join(&o.file).display());
    }
    println!("wrote {}", out.join("manifest.json").display());
    if manifest.passed {
        Ok(())
    } else {
        Err(Failure::Gates)
    }
}

fn load(path: &PathBuf, plots: bool) -> std::result::Result<Config, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Runtime)?;
    let mut cfg = Config::parse(&text).map_err(|e| if is_config_error(&e) { Failure::Config(e) } else { Failure::Runtime(e) })?;
    cfg.plots |= plots;
    Ok(cfg)
}

fn setup_workers(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(anyhow!("DISSIPA_WORKERS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = setup_workers(cli.workers) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.cmd {
        Cmd::List => {
            print_list();
            Ok(())
        }
        Cmd::Run { config, out, plots } => load(&config, plots).and_then(|cfg| execute(cfg, out)),
        other => {
            let (cfg, out) = to_config(other).expect("direct subcommand");
            execute(cfg, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Gates) => {
            eprintln!("gate failure");
            ExitCode::from(3)
        }
    }
}
