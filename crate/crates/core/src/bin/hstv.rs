use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hstv::experiment::{run_all, ExperimentConfig, EXIT_CONFIG};

/// Evolve the H^{-s} total variation flow on a periodic 1D grid.
///
/// Flags override values from `--config`. `--s` and `--lambda` accept
/// comma-separated lists to run a sweep; each entry writes into its own
/// `s=<value>` subdirectory of `--out`.
#[derive(Debug, Parser)]
#[command(name = "hstv", version)]
struct Cli {
    /// Configuration file (`key = value` lines, or a JSON config / diagnostics.json).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Fractional index (or comma-separated list) in [0, 1].
    #[arg(long)]
    s: Option<String>,

    /// Implicit time step.
    #[arg(long)]
    tau: Option<String>,

    /// Splitting step: a number or "auto" (comma-separated list for sweeps).
    #[arg(long)]
    lambda: Option<String>,

    /// Grid spacing.
    #[arg(long)]
    h: Option<String>,

    /// Periodic domain as x_min:x_max.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,

    /// Number of implicit steps.
    #[arg(long)]
    steps: Option<String>,

    /// Store every k-th step.
    #[arg(long = "snapshot-every")]
    snapshot_every: Option<String>,

    /// Initial data: f, g, or a file path.
    #[arg(long)]
    initial: Option<String>,

    /// Output directory.
    #[arg(long)]
    out: Option<String>,

    /// Node placement: cell or node.
    #[arg(long)]
    sampling: Option<String>,

    /// Inner stop when max |z^{k+1} - z^k| falls below this
    #[arg(long = "tol-z")]
    tol_z: Option<String>,

    /// Inner stop when gap / (1 + |primal|) falls below this
    #[arg(long = "tol-gap")]
    tol_gap: Option<String>,

    /// Inner iteration cap per implicit step
    #[arg(long = "max-iter")]
    max_iter: Option<String>,

    /// Fraction of the stability bound used by lambda = auto.
    #[arg(long)]
    safety: Option<String>,

    /// Seed for optional initial noise.
    #[arg(long)]
    seed: Option<String>,

    /// Uniform noise amplitude added to the initial data.
    #[arg(long)]
    noise: Option<String>,

    /// Disable warm starts of the inner solver.
    #[arg(long = "no-warm-start")]
    no_warm_start: bool,

    /// Fail (exit 3) if any inner solve hits max-iter.
    #[arg(long)]
    strict: bool,

    /// Accumulate ergodic averages in the inner solver.
    #[arg(long)]
    ergodic: bool,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let opts = [
            ("tau", &self.tau),
            ("h", &self.h),
            ("domain", &self.domain),
            ("steps", &self.steps),
            ("snapshot_every", &self.snapshot_every),
            ("initial", &self.initial),
            ("out", &self.out),
            ("sampling", &self.sampling),
            ("tol_z", &self.tol_z),
            ("tol_gap", &self.tol_gap),
            ("max_iter", &self.max_iter),
            ("safety", &self.safety),
            ("seed", &self.seed),
            ("noise", &self.noise),
        ];
        let mut out: Vec<(&'static str, &str)> = opts
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect();
        if self.no_warm_start {
            out.push(("warm_start", "false"));
        }
        if self.strict {
            out.push(("strict", "true"));
        }
        if self.ergodic {
            out.push(("ergodic", "true"));
        }
        out
    }
}

fn split_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect())
        .unwrap_or_default()
}

fn build_configs(cli: &Cli) -> hstv::Result<Vec<ExperimentConfig>> {
    let mut base = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in cli.overrides() {
        base.set(k, v)?;
    }
    let s_list = split_list(&cli.s);
    let lambda_list = split_list(&cli.lambda);
    if s_list.len() <= 1 {
        if let Some(s) = s_list.first() {
            base.set("s", s)?;
        }
        if lambda_list.len() > 1 {
            return Err(hstv::Error::Config(
                "a lambda list needs a matching s list".into(),
            ));
        }
        if let Some(l) = lambda_list.first() {
            base.set("lambda", l)?;
        }
        return Ok(vec![base]);
    }
    if lambda_list.len() > 1 && lambda_list.len() != s_list.len() {
        return Err(hstv::Error::Config(format!(
            "got {} values of s but {} values of lambda",
            s_list.len(),
            lambda_list.len()
        )));
    }
    s_list
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut c = base.clone();
            c.set("s", s)?;
            match lambda_list.len() {
                0 => {}
                1 => c.set("lambda", &lambda_list[0])?,
                _ => c.set("lambda", &lambda_list[i])?,
            }
            c.output_dir = base.output_dir.join(format!("s={s}"));
            Ok(c)
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let configs = match build_configs(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    ExitCode::from(run_all(&configs) as u8)
}
