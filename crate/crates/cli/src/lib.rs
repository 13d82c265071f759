//! Command implementations behind the `spatial-anc` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use spatial_anc::archive::{frequency_tag, write_archive, write_fieldmap, CONFIG_FILE};
use spatial_anc::config::{ConfigFile, FrequencySpec};
use spatial_anc::control::{fixed_filter, Algorithm};
use spatial_anc::experiment::run;
use spatial_anc::quadrature::{grid_basis, grid_for_scene, matrices_from_basis};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<spatial_anc::Error> for CliError {
    fn from(e: spatial_anc::Error) -> Self {
        use spatial_anc::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            e @ (E::InvalidScene(_) | E::InvalidParameter(_) | E::EmptyGrid { .. }) => CliError::Config(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spatial-anc", version, about = "Frequency-domain spatial active noise control simulator")]
pub struct Cli {
    /// Worker threads for the frequency sweep (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured experiment and write a result archive.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory for the archive.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write a normalized power map for one frequency and one controller.
    Fieldmap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Check the scene and the conditioning of A_yy without running the loop.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces the configured frequencies; repeat for several.
    #[arg(long)]
    pub frequency: Vec<f64>,
    /// Replaces the configured controllers; repeat for several.
    #[arg(long)]
    pub algorithm: Vec<Algorithm>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Remove the rigid scatterer from the scene.
    #[arg(long)]
    pub no_scatterer: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ConfigFile) {
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if !self.frequency.is_empty() {
            cfg.run.frequencies = FrequencySpec::List(self.frequency.clone());
        }
        if !self.algorithm.is_empty() {
            cfg.control.algorithms = self.algorithm.clone();
        }
        if let Some(n) = self.iterations {
            cfg.run.iterations = n;
            // Checkpoints past a shortened run would be rejected.
            cfg.run.checkpoints.retain(|&c| c < n);
        }
        if self.no_scatterer {
            cfg.scene.scatterer = None;
        }
    }
}

pub fn load_config(common: &Common) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::load(&common.config)?;
    common.overrides.apply(&mut cfg);
    Ok(cfg)
}

/// Run every configured frequency and write the archive into `out`.
pub fn cmd_run(cfg: &ConfigFile, out: &Path, w: &mut impl Write) -> Result<(), CliError> {
    let exp = cfg.resolve()?;
    let result = run(&exp)?;
    write_archive(out, cfg, &result)?;
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    write!(w, "{:>10}", "f [Hz]").map_err(io)?;
    for a in &exp.algorithms {
        write!(w, " {:>16}", format!("{a} [dB]")).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for o in &result.outcomes {
        write!(w, "{:>10.1}", o.frequency).map_err(io)?;
        match &o.result {
            Ok(r) => {
                for run in &r.runs {
                    write!(w, " {:>16.3}", run.final_reduction_db()).map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
            Err(e) => writeln!(w, " failed: {e}").map_err(io)?,
        }
    }
    writeln!(w, "archive written to {}", out.display()).map_err(io)?;
    let failures = result.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failures.iter().map(|(f, e)| format!("{f} Hz: {e}")).collect();
        Err(CliError::Runtime(format!(
            "{} of {} frequencies failed\n  {}",
            failures.len(),
            result.outcomes.len(),
            list.join("\n  ")
        )))
    }
}

fn single<T: Copy + std::fmt::Display>(what: &str, values: &[T]) -> Result<T, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!(
            "fieldmap needs exactly one {what}, got {}; use --{what}",
            values.len()
        ))),
    }
}

/// Map after the configured iterations. Returns the written table.
pub fn cmd_fieldmap(cfg: &ConfigFile, out: &Path, w: &mut impl Write) -> Result<PathBuf, CliError> {
    let mut exp = cfg.resolve()?;
    let frequency = single("frequency", &exp.frequencies)?;
    let algorithm = single("algorithm", &exp.algorithms)?;
    exp.checkpoints = vec![exp.iterations - 1];
    let result = run(&exp)?;
    if let Some((f, e)) = result.failures().first() {
        return Err(CliError::Runtime(format!("{f} Hz: {e}")));
    }
    let fr = result.succeeded().next().expect("one frequency requested");
    let snap = &fr.runs[0].snapshots[0];
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out.join(CONFIG_FILE), cfg.to_toml()?).map_err(|e| CliError::Runtime(e.to_string()))?;
    let name = format!("fieldmap_{}_{algorithm}.csv", frequency_tag(frequency));
    let path = write_fieldmap(out, &name, &exp.scene, snap)?;
    let mut norm = snap.normalized_power_db();
    norm.sort_by(f64::total_cmp);
    let median = norm[norm.len() / 2];
    writeln!(
        w,
        "{frequency} Hz {algorithm}: {} points, region median {median:.2} dB, P_red {:.2} dB\nwritten {}",
        norm.len(),
        fr.runs[0].final_reduction_db(),
        path.display()
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(path)
}

/// Scene invariants plus the Gram and A_yy conditioning at each frequency.
pub fn cmd_validate(cfg: &ConfigFile, w: &mut impl Write) -> Result<(), CliError> {
    let exp = cfg.resolve()?;
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    let scene = &exp.scene;
    writeln!(
        w,
        "scene ok: {} loudspeakers, {} reference mics, {} error mics, scatterer {}",
        scene.num_secondary(),
        scene.num_reference(),
        scene.error_mics.len(),
        if scene.scatterer.is_some() { "present" } else { "absent" }
    )
    .map_err(io)?;
    let grid = grid_for_scene(scene, &exp.grid)?;
    writeln!(w, "quadrature grid: {} points", grid.len()).map_err(io)?;
    writeln!(w, "{:>10} {:>14} {:>14} {:>12} {:>14}", "f [Hz]", "cond(K+lI)", "cond(A_yy)", "lambda", "fixed solver").map_err(io)?;
    let mut failures = Vec::new();
    for &f in &exp.frequencies {
        let checked = scene.wavenumber(f).and_then(|k| {
            let basis = grid_basis(scene, &k, &exp.kernel, &grid)?;
            let mats = matrices_from_basis(&basis, &grid, &k)?;
            let fixed = fixed_filter(&mats)?;
            Ok((basis.gram_condition, mats, fixed))
        });
        match checked {
            Ok((gram, mats, fixed)) => writeln!(
                w,
                "{f:>10.1} {gram:>14.4e} {:>14.4e} {:>12.4e} {:>14}",
                mats.cond_a_yy,
                mats.lambda,
                format!("{:?}", fixed.solve_path).to_lowercase()
            )
            .map_err(io)?,
            Err(e) => {
                writeln!(w, "{f:>10.1} {e}").map_err(io)?;
                failures.push(format!("{f} Hz: {e}"));
            }
        }
    }
    if failures.is_empty() {
        writeln!(w, "A_yy invertible at all {} frequencies", exp.frequencies.len()).map_err(io)?;
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "conditioning check failed at {} of {} frequencies\n  {}",
            failures.len(),
            exp.frequencies.len(),
            failures.join("\n  ")
        )))
    }
}

/// Parse-independent entry point used by `main`. Returns the exit code.
pub fn execute(cli: Cli, out: &mut impl Write, err: &mut impl Write) -> u8 {
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            let _ = writeln!(err, "error: cannot start {n} worker threads: {e}");
            return EXIT_RUNTIME;
        }
    }
    let result = match &cli.command {
        Command::Run { common, out: dir } => load_config(common).and_then(|c| cmd_run(&c, dir, out)),
        Command::Fieldmap { common, out: dir } => load_config(common).and_then(|c| cmd_fieldmap(&c, dir, out).map(|_| ())),
        Command::Validate { common } => load_config(common).and_then(|c| cmd_validate(&c, out)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
