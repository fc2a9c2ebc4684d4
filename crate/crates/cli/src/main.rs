//! `ptsm` command-line driver.
//!
//! Exit status: 0 when every run completed and every hard check passed,
//! 1 when something ran but a check failed, 2 on usage or runtime errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ptsm::experiments::{
    experiment_preset, run_compare, run_experiment, write_toml, ExperimentConfig, ExperimentReport, SgnKind,
    SimSection, EXPERIMENT_NAMES,
};
use ptsm::validate::validate_all;

#[derive(Parser)]
#[command(name = "ptsm", version, about = "Predefined-time sliding mode control simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in experiment
    Example {
        /// example1, example2a, example2b, example3 or fixed_time
        name: String,
        /// Print the experiment's config file and exit
        #[arg(long)]
        print_config: bool,
        /// Replace sigma_hat_m0 and K_d by values meeting the gain condition
        #[arg(long)]
        premise_gains: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run every seed of a config file
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Control energy of the PTSM, TBG and fixed-time laws on matched seeds
    Compare {
        /// Number of seeds
        #[arg(long, default_value_t = 5)]
        runs: u64,
        #[arg(long)]
        premise_gains: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the property suites and write validate.toml
    Validate {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a config (file or built-in name) once per value of one parameter
    Sweep {
        /// Config file path or built-in experiment name
        config: String,
        /// Dotted key into the config, e.g. `controller.manip.t_s` or `sim.dt`
        #[arg(long)]
        param: String,
        /// Comma-separated values, each a TOML literal
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum SgnArg {
    Exact,
    Layer,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// First seed; the seed list becomes seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_enum)]
    sgn: Option<SgnArg>,
    #[arg(long)]
    layer_width: Option<f64>,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Common {
    fn apply_sim(&self, sim: &mut SimSection) {
        if let Some(dt) = self.dt {
            sim.dt = dt;
        }
        if let Some(h) = self.horizon {
            sim.horizon = h;
        }
        if let Some(s) = self.sgn {
            sim.sgn = match s {
                SgnArg::Exact => SgnKind::Exact,
                SgnArg::Layer => SgnKind::Layer,
            };
        }
        if let Some(w) = self.layer_width {
            sim.layer_width = w;
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        self.apply_sim(&mut cfg.sim);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Example {
            name,
            print_config,
            premise_gains,
            common,
        } => {
            let mut cfg = experiment_preset(&name)
                .with_context(|| format!("available experiments: {}", EXPERIMENT_NAMES.join(", ")))?;
            if premise_gains {
                cfg.use_premise_gains()?;
            }
            common.apply(&mut cfg);
            if print_config {
                cfg.validate()?;
                print!("{}", cfg.to_toml_string()?);
                return Ok(true);
            }
            run_configs(&[cfg], &common.out, common.jobs)
        }
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            common.apply(&mut cfg);
            run_configs(&[cfg], &common.out, common.jobs)
        }
        Command::Compare {
            runs,
            premise_gains,
            common,
        } => {
            let base = common.seed.unwrap_or(0);
            let seeds: Vec<u64> = (0..runs).map(|k| base.wrapping_add(k)).collect();
            let mut sim = ptsm::experiments::compare_configs()[0].sim;
            common.apply_sim(&mut sim);
            prepare_out(&common.out)?;
            let report = run_compare(&seeds, Some(sim), premise_gains, Some(&common.out), common.jobs)?;
            println!("{:>6} {:>12} {:>12} {:>12}  tbg<ptsm", "seed", "ptsm", "tbg", "fixed");
            for r in &report.rows {
                println!(
                    "{:>6} {:>12.1} {:>12.1} {:>12.1}  {}",
                    r.seed, r.ptsm, r.tbg, r.fixed, r.tbg_below_ptsm
                );
            }
            println!(
                "energy ordering: {}  ({})",
                verdict(report.pass),
                common.out.join("compare").join("report.toml").display()
            );
            Ok(report.pass)
        }
        Command::Validate { out } => {
            let report = validate_all()?;
            prepare_out(&out)?;
            let path = out.join("validate.toml");
            write_toml(&path, &report)?;
            for p in &report.properties {
                let tag = match (p.pass, p.informational) {
                    (true, _) => "PASS",
                    (false, true) => "INFO",
                    (false, false) => "FAIL",
                };
                println!("{tag} {:<34} margin {:>12.4e}  {}", p.name, p.margin, p.detail);
            }
            println!("validate: {}  ({})", verdict(report.pass), path.display());
            Ok(report.pass)
        }
        Command::Sweep {
            config,
            param,
            values,
            common,
        } => {
            let base = load_config(&config)?;
            let mut cfgs = Vec::with_capacity(values.len());
            for v in &values {
                let mut cfg = with_param(&base, &param, v)?;
                cfg.name = format!("{}_{}_{}", base.name, param.replace('.', "-"), v);
                common.apply(&mut cfg);
                cfgs.push(cfg);
            }
            let pass = run_configs(&cfgs, &common.out, common.jobs)?;
            Ok(pass)
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn load_config(arg: &str) -> Result<ExperimentConfig> {
    if EXPERIMENT_NAMES.contains(&arg) && !Path::new(arg).exists() {
        return Ok(experiment_preset(arg)?);
    }
    Ok(ExperimentConfig::from_path(Path::new(arg))?)
}

/// Copy of `base` with the value at dotted `key` replaced by the TOML
/// literal `value`.
fn with_param(base: &ExperimentConfig, key: &str, value: &str) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = toml::from_str(&base.to_toml_string()?)?;
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .with_context(|| format!("`{value}` is not a TOML literal"))?
        .remove("v")
        .ok_or_else(|| anyhow!("empty value"))?;
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow!("empty parameter key"))?;
    let mut table = &mut doc;
    for p in parts {
        table = table
            .get_mut(p)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| anyhow!("no table `{p}` in `{key}`"))?;
    }
    let slot = table.get_mut(leaf).ok_or_else(|| anyhow!("no key `{key}` in the config"))?;
    *slot = match (&*slot, parsed) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (toml::Value::Array(items), toml::Value::Float(x)) => {
            toml::Value::Array(vec![toml::Value::Float(x); items.len()])
        }
        (toml::Value::Array(items), toml::Value::Integer(i)) => {
            toml::Value::Array(vec![toml::Value::Float(i as f64); items.len()])
        }
        (_, v) => v,
    };
    Ok(ExperimentConfig::from_toml_str(&toml::to_string(&doc)?)?)
}

/// Create `out` and make sure it accepts files.
fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let probe = out.join(".ptsm-write-probe");
    fs::write(&probe, b"").with_context(|| format!("{} is not writable", out.display()))?;
    fs::remove_file(&probe)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepIndex<'a> {
    experiments: Vec<&'a ExperimentReport>,
}

/// Validate every config, then run them in order.
fn run_configs(cfgs: &[ExperimentConfig], out: &Path, jobs: usize) -> Result<bool> {
    for cfg in cfgs {
        cfg.validate().with_context(|| format!("experiment `{}`", cfg.name))?;
    }
    prepare_out(out)?;
    let mut reports = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let (report, _) = run_experiment(cfg, Some(out), jobs)?;
        print_report(&report, out);
        reports.push(report);
    }
    if cfgs.len() > 1 {
        write_toml(
            &out.join("sweep.toml"),
            &SweepIndex {
                experiments: reports.iter().collect(),
            },
        )?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn print_report(report: &ExperimentReport, out: &Path) {
    println!("{}", report.experiment);
    if let Some(g) = &report.gain_check {
        println!(
            "  gain check {:?}: {} (margin {}, informational)",
            g.condition,
            verdict(g.pass),
            g.margin
        );
    }
    let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    println!(
        "  {:>6} {:>9} {:>10} {:>10} {:>12}  checks",
        "seed", "completed", "t*(state)", "t*(error)", "energy"
    );
    for r in &report.results {
        let checks: Vec<String> = r
            .checks
            .iter()
            .map(|c| format!("{} {} ({:.3e} vs {:.3e})", c.name, verdict(c.pass), c.value, c.limit))
            .collect();
        println!(
            "  {:>6} {:>9} {:>10} {:>10} {:>12}  {}",
            r.seed,
            r.completed,
            opt(r.settling_state),
            opt(r.settling_error),
            r.energy.map_or_else(|| "-".to_string(), |e| format!("{e:.1}")),
            checks.join(", ")
        );
    }
    println!(
        "  {}  ({})",
        verdict(report.pass),
        out.join(&report.experiment).join("report.toml").display()
    );
}
