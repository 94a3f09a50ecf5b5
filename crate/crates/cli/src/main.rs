use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rdob_core::analysis::{cpsd_with, hysteresis_loop, peak, DEFAULT_SEGMENT};
use rdob_core::arch::{preset, sensitivities, Architecture, PRESET_NAMES};
use rdob_core::config::ScenarioConfig;
use rdob_core::export::{write_cpsd, write_csv, write_loop, write_resets, write_trace};
use rdob_core::numlin::log_grid;
use rdob_core::reset::{CgLpParams, ResetElement};
use rdob_core::sim::run_scenario_spec;
use rdob_core::stab::{augment_preset, stability_sweep};
use rdob_core::{Error, Result};

/// Reset disturbance observer analysis and simulation.
#[derive(Parser, Debug)]
#[command(name = "rdob", version)]
struct Cli {
    /// Frequency grid density in points per decade.
    #[arg(long, global = true)]
    grid_per_decade: Option<usize>,
    /// Lower end of the frequency grid in rad/s.
    #[arg(long, global = true)]
    omega_min: Option<f64>,
    /// Upper end of the frequency grid in rad/s.
    #[arg(long, global = true)]
    omega_max: Option<f64>,
    /// Directory for the CSV output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed, overriding the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Describing function of a reset element.
    Df {
        element: Element,
        /// Reset corner frequency in rad/s.
        #[arg(long, default_value_t = 1.0)]
        omega_r: f64,
        /// Damping of the second-order elements.
        #[arg(long, default_value_t = 1.0)]
        zeta_r: f64,
        /// CgLp corner offset.
        #[arg(long, default_value_t = CgLpParams::DEFAULT_ALPHA)]
        alpha: f64,
        /// CgLp lead-filter taming pole in rad/s.
        #[arg(long, default_value_t = 100.0)]
        omega_f: f64,
    },
    /// Inner and outer sensitivity of a preset.
    Sens { preset: String, arch: String },
    /// Eigenvalue sweep of a reset configuration.
    Stab { preset: String, config: Option<String> },
    /// Runs a scenario file.
    Sim { scenario: PathBuf },
    /// Lists the named presets.
    Presets,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Element {
    Clegg,
    Fore,
    Sore,
    Cglp,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.clone();
    match &cli.command {
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}\t{}", preset(name)?.description);
            }
            Ok(())
        }
        Command::Df {
            element,
            omega_r,
            zeta_r,
            alpha,
            omega_f,
        } => {
            let (el, tag) = match element {
                Element::Clegg => (ResetElement::clegg(), "clegg"),
                Element::Fore => (ResetElement::fore(*omega_r)?, "fore"),
                Element::Sore => (ResetElement::sore(*omega_r, *zeta_r)?, "sore"),
                Element::Cglp => (
                    ResetElement::cglp(CgLpParams::new(*omega_r, *zeta_r, *alpha, *omega_f)?)?,
                    "cglp",
                ),
            };
            let hi = if matches!(element, Element::Cglp) {
                omega_f.max(*omega_r) * 100.0
            } else {
                omega_r * 1e3
            };
            let grid = grid(&cli, (omega_r * 1e-2, hi), 100)?;
            let df = el.df_response(&grid)?;
            let re: Vec<f64> = df.values.iter().map(|z| z.re).collect();
            let im: Vec<f64> = df.values.iter().map(|z| z.im).collect();
            let path = target(out.as_deref(), &format!("df_{tag}.csv"))?;
            write_csv(
                &path,
                &["omega", "magnitude", "phase_deg", "re", "im"],
                &[&df.omega, &df.magnitude(), &df.phase_deg(), &re, &im],
            )?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Sens { preset: name, arch } => {
            let p = preset(name)?;
            let arch: Architecture = arch.parse()?;
            let grid = grid(&cli, p.omega_range, 100)?;
            let (s, sc) = sensitivities(&p, arch, &grid)?;
            let prod = s.zip_with(&sc, |a, b| a * b)?;
            let path = target(out.as_deref(), &format!("sens_{name}_{arch}.csv"))?;
            write_csv(
                &path,
                &["omega", "abs_s", "abs_sc", "abs_s_sc"],
                &[&grid, &s.magnitude(), &sc.magnitude(), &prod.magnitude()],
            )?;
            let (w, m) = peak(&prod)?;
            println!("{}", path.display());
            println!("peak |S*Sc| = {m:.6} at {w:.6e} rad/s");
            Ok(())
        }
        Command::Stab { preset: name, config } => {
            let p = preset(name)?;
            let arch = match config {
                Some(c) => c.parse()?,
                None => p.default_arch,
            };
            if !matches!(arch, Architecture::Rdob1 | Architecture::Rdob2) {
                return Err(Error::InvalidParameter(format!(
                    "`{arch}` has no reset element; choose rdob1 or rdob2"
                )));
            }
            let grid = grid(&cli, (0.1, p.omega_range.1.max(1e5)), 60)?;
            let sweep = stability_sweep(&augment_preset(&p, arch)?, &grid)?;
            let path = target(out.as_deref(), &format!("stab_{name}_{arch}.csv"))?;
            write_csv(&path, &["omega", "max_abs_eig"], &[&sweep.omega, &sweep.max_abs_eig])?;
            let (w, m) = sweep.max();
            println!("{}", path.display());
            println!(
                "max |lambda| = {m:.6} at {w:.6e} rad/s, stable on grid: {}",
                sweep.is_stable()
            );
            Ok(())
        }
        Command::Sim { scenario } => {
            let mut cfg = ScenarioConfig::load(scenario)?;
            if let Some(seed) = cli.seed {
                cfg.noise.seed = seed;
            }
            let dir = out.clone().or_else(|| cfg.output_dir.clone());
            let spec = cfg.to_spec()?;
            for run in run_scenario_spec(&spec)? {
                let tr = &run.trace;
                let fs = tr.sample_rate();
                let skip = (cfg.discard * fs).round() as usize;
                let tag = run.architecture.as_str();
                // short runs fall back to the largest segment that still fits twice
                let e = &tr.e[skip..];
                let mut seg = DEFAULT_SEGMENT;
                while seg > 256 && e.len() < 2 * seg {
                    seg /= 2;
                }
                let c = cpsd_with(e, fs, seg)?;
                let l = hysteresis_loop(&tr.u[skip..], &tr.y[skip..])?;
                write_trace(&target(dir.as_deref(), &format!("{tag}_trace.csv"))?, tr)?;
                write_resets(&target(dir.as_deref(), &format!("{tag}_resets.csv"))?, tr)?;
                write_cpsd(&target(dir.as_deref(), &format!("{tag}_cpsd.csv"))?, &c)?;
                write_loop(&target(dir.as_deref(), &format!("{tag}_loop.csv"))?, &l)?;
                println!(
                    "{tag}: error power {:.6e}, loop area {:.6e}, resets {}",
                    c.total(),
                    l.area,
                    tr.resets.len()
                );
            }
            Ok(())
        }
    }
}

fn grid(cli: &Cli, range: (f64, f64), default_density: usize) -> Result<Vec<f64>> {
    let lo = cli.omega_min.unwrap_or(range.0);
    let hi = cli.omega_max.unwrap_or(range.1);
    log_grid(lo, hi, cli.grid_per_decade.unwrap_or(default_density))
}

/// Path of an output file, creating the directory if needed.
fn target(dir: Option<&Path>, file: &str) -> Result<PathBuf> {
    let dir = dir.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(file))
}
