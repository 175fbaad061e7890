//! Experiment configuration, initial data, run orchestration and output files.
//!
//! Configuration is a flat `key = value` text file (or a JSON object, e.g. the
//! `config` entry of a previous run's `diagnostics.json`); every key can be
//! overridden by the command-line flag of the same name.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{evolve, FlowParams, Trajectory};
use crate::grid::Grid;
use crate::solver::{stability_max_lambda, SolverParams, StepSize};
use crate::spectral::SpectralCache;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Plateau-with-hyperbolic-tails profile: `20` on `|x| <= 2`, else `50/|x| - 5`.
pub fn initial_f(x: f64) -> f64 {
    if x.abs() <= 2.0 {
        20.0
    } else {
        50.0 / x.abs() - 5.0
    }
}

/// Step profile: `20` on `|x| <= 2`, else `0`.
pub fn initial_g(x: f64) -> f64 {
    if x.abs() <= 2.0 {
        20.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InitialData {
    F,
    G,
    File(PathBuf),
}

impl From<InitialData> for String {
    fn from(d: InitialData) -> String {
        match d {
            InitialData::F => "f".into(),
            InitialData::G => "g".into(),
            InitialData::File(p) => p.display().to_string(),
        }
    }
}

impl TryFrom<String> for InitialData {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.trim() {
            "" => Err("empty initial data".into()),
            "f" => Ok(Self::F),
            "g" => Ok(Self::G),
            path => Ok(Self::File(PathBuf::from(path))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Value", try_from = "Value")]
pub enum LambdaSetting {
    Auto,
    Fixed(f64),
}

impl From<LambdaSetting> for Value {
    fn from(l: LambdaSetting) -> Value {
        match l {
            LambdaSetting::Auto => Value::from("auto"),
            LambdaSetting::Fixed(x) => Value::from(x),
        }
    }
}

impl TryFrom<Value> for LambdaSetting {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .map(Self::Fixed)
                .ok_or_else(|| "bad lambda".into()),
            Value::String(s) => parse_lambda(&s),
            other => Err(format!("lambda must be a number or \"auto\", got {other}")),
        }
    }
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaSetting, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("auto") {
        Ok(LambdaSetting::Auto)
    } else {
        s.parse()
            .map(LambdaSetting::Fixed)
            .map_err(|_| format!("lambda must be a number or \"auto\", got {s:?}"))
    }
}

/// Where initial data are sampled inside each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// `x_j = x_min + (j + 1/2) h`
    Cell,
    /// `x_j = x_min + j h`
    Node,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub sampling: Sampling,
    pub s: f64,
    pub tau: f64,
    pub lambda: LambdaSetting,
    pub safety: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub initial: InitialData,
    /// Uniform noise amplitude added to the initial data (needs `seed`).
    pub noise: f64,
    pub seed: Option<u64>,
    pub tol_z: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    pub warm_start: bool,
    pub ergodic: bool,
    pub strict: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            x_min: -10.0,
            x_max: 10.0,
            h: 0.1,
            sampling: Sampling::Cell,
            s: 0.0,
            tau: 0.1,
            lambda: LambdaSetting::Auto,
            safety: 0.9,
            steps: 20,
            snapshot_every: 1,
            initial: InitialData::G,
            noise: 0.0,
            seed: None,
            tol_z: 1e-8,
            tol_gap: 1e-7,
            max_iter: 200_000,
            warm_start: true,
            ergodic: false,
            strict: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

impl ExperimentConfig {
    /// Sets one parameter from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "domain" => {
                let (a, b) = v.split_once(':').ok_or_else(|| {
                    Error::Config(format!("domain must be x_min:x_max, got {v:?}"))
                })?;
                self.x_min = parse_num("domain", a)?;
                self.x_max = parse_num("domain", b)?;
            }
            "x_min" => self.x_min = parse_num(&key, v)?,
            "x_max" => self.x_max = parse_num(&key, v)?,
            "h" => self.h = parse_num(&key, v)?,
            "sampling" => {
                self.sampling = match v {
                    "cell" => Sampling::Cell,
                    "node" => Sampling::Node,
                    _ => {
                        return Err(Error::Config(format!(
                            "sampling must be cell or node, got {v:?}"
                        )))
                    }
                }
            }
            "s" => self.s = parse_num(&key, v)?,
            "tau" => self.tau = parse_num(&key, v)?,
            "lambda" => self.lambda = parse_lambda(v).map_err(Error::Config)?,
            "safety" => self.safety = parse_num(&key, v)?,
            "steps" => self.steps = parse_num(&key, v)?,
            "snapshot_every" => self.snapshot_every = parse_num(&key, v)?,
            "initial" => {
                self.initial = InitialData::try_from(v.to_string()).map_err(Error::Config)?
            }
            "noise" => self.noise = parse_num(&key, v)?,
            "seed" => self.seed = Some(parse_num(&key, v)?),
            "tol_z" => self.tol_z = parse_num(&key, v)?,
            "tol_gap" => self.tol_gap = parse_num(&key, v)?,
            "max_iter" => self.max_iter = parse_num(&key, v)?,
            "warm_start" => self.warm_start = parse_bool(&key, v)?,
            "ergodic" => self.ergodic = parse_bool(&key, v)?,
            "strict" => self.strict = parse_bool(&key, v)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file body. `#` starts a comment.
    pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(entries)
    }

    /// Loads a configuration file on top of the defaults.
    ///
    /// JSON files are read as a full config object, or as a `diagnostics.json`
    /// whose `config` entry holds one.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        if text.trim_start().starts_with('{') {
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let value = value.get("config").cloned().unwrap_or(value);
            return serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())));
        }
        let mut config = Self::default();
        for (k, v) in Self::parse_flat(&text)? {
            config.set(&k, &v)?;
        }
        Ok(config)
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        match self.sampling {
            Sampling::Cell => Grid::cell_centered(self.x_min, self.x_max, self.h),
            Sampling::Node => Grid::node_centered(self.x_min, self.x_max, self.h),
        }
    }

    pub fn solver_params(&self) -> SolverParams<f64> {
        let mut p = SolverParams::new(self.s, self.tau);
        p.lambda = match self.lambda {
            LambdaSetting::Auto => StepSize::Auto,
            LambdaSetting::Fixed(l) => StepSize::Fixed(l),
        };
        p.safety = self.safety;
        p.tol_z = self.tol_z;
        p.tol_gap = self.tol_gap;
        p.max_iter = self.max_iter;
        p.ergodic = self.ergodic;
        p
    }

    pub fn flow_params(&self) -> FlowParams<f64> {
        let mut p = FlowParams::new(self.solver_params(), self.steps);
        p.snapshot_every = self.snapshot_every;
        p.warm_start = self.warm_start;
        p.abort_on_nonconverged = self.strict;
        p
    }

    /// Samples (or reads) the initial data on `grid`.
    pub fn initial_data(&self, grid: &Grid<f64>) -> Result<Vec<f64>> {
        let mut u = match &self.initial {
            InitialData::F => grid.sample(initial_f),
            InitialData::G => grid.sample(initial_g),
            InitialData::File(path) => read_initial_file(path, grid.len())?,
        };
        if self.noise != 0.0 {
            let seed = self
                .seed
                .ok_or_else(|| Error::Config("noise requires a seed".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in &mut u {
                *x += rng.gen_range(-self.noise..=self.noise);
            }
        }
        Ok(u)
    }
}

/// Reads one value per line, or `x,u` CSV rows (an optional header is skipped).
pub fn read_initial_file(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut values = Vec::with_capacity(n);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let field = match line.split_once(',') {
            Some((_, u)) => u.trim(),
            None => line,
        };
        match field.parse::<f64>() {
            Ok(x) => values.push(x),
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}:{}: cannot parse {field:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if values.len() != n {
        return Err(Error::Config(format!(
            "{}: expected {n} values for the grid, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub grid: Grid<f64>,
    pub stability_bound: f64,
    pub trajectory: Trajectory<f64>,
}

/// Builds the grid, spectral cache and initial data, then evolves.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    let grid = config.grid()?;
    let cache = SpectralCache::new(grid, config.s)?;
    let flow = config.flow_params();
    flow.solver.resolve_lambda(&cache)?;
    let u0 = config.initial_data(&grid)?;
    let trajectory = evolve(&u0, &flow, &cache)?;
    Ok(RunOutput {
        grid,
        stability_bound: stability_max_lambda(config.s, config.tau, &cache),
        trajectory,
    })
}

/// Runs one experiment end to end and returns the process exit code.
pub fn run(config: &ExperimentConfig) -> i32 {
    let grid = match config.grid() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cache = match SpectralCache::new(grid, config.s) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let bound = stability_max_lambda(config.s, config.tau, &cache);
    println!(
        "stability bound: lambda < {bound:e} (mu_max = {}, N = {})",
        cache.mu_max(),
        grid.len()
    );
    let flow = config.flow_params();
    match flow.solver.resolve_lambda(&cache) {
        Ok(lambda) => println!("using lambda = {lambda:e}"),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }
    let u0 = match config.initial_data(&grid) {
        Ok(u) => u,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let trajectory = match evolve(&u0, &flow, &cache) {
        Ok(t) => t,
        Err(e @ Error::NotConverged { .. }) => {
            eprintln!("error: {e}");
            return EXIT_NOT_CONVERGED;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = RunOutput {
        grid,
        stability_bound: bound,
        trajectory,
    };
    if let Err(e) = emit_outputs(&out, config) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    println!("{}", summary_line(&out, config));
    if config.strict && !out.trajectory.all_converged() {
        return EXIT_NOT_CONVERGED;
    }
    EXIT_OK
}

/// Runs independent configurations concurrently; returns the worst exit code.
pub fn run_all(configs: &[ExperimentConfig]) -> i32 {
    if configs.len() == 1 {
        return run(&configs[0]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(move || run(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(EXIT_CONFIG))
            .max()
            .unwrap_or(EXIT_OK)
    })
}

pub fn summary_line(out: &RunOutput, config: &ExperimentConfig) -> String {
    let traj = &out.trajectory;
    let converged = traj.records.iter().filter(|r| r.converged).count();
    let iterations: usize = traj.records.iter().map(|r| r.iterations).sum();
    let mut line = format!(
        "s={} tau={} lambda={:e} N={} steps={} t_final={} tv={} converged={}/{} inner_iterations={}",
        config.s,
        config.tau,
        traj.lambda,
        out.grid.len(),
        traj.records.len(),
        traj.times.last().copied().unwrap_or(0.0),
        traj.tv.last().copied().unwrap_or(0.0),
        converged,
        traj.records.len(),
        iterations,
    );
    match traj.extinction {
        Some(t) => {
            let _ = write!(line, " extinction={t}");
        }
        None => line.push_str(" extinction=none"),
    }
    line
}

/// Long-form `t,x,u` rows for every stored snapshot.
pub fn snapshots_csv(traj: &Trajectory<f64>, grid: &Grid<f64>) -> String {
    let mut s = String::from("t,x,u\n");
    for (t, snap) in traj.snapshot_times.iter().zip(&traj.snapshots) {
        for (j, u) in snap.iter().enumerate() {
            let _ = writeln!(s, "{t},{},{u}", grid.x(j));
        }
    }
    s
}

pub fn diagnostics_json(out: &RunOutput, config: &ExperimentConfig) -> Value {
    let traj = &out.trajectory;
    let per_step = |f: &dyn Fn(&crate::flow::StepRecord<f64>) -> Value| -> Vec<Value> {
        traj.records.iter().map(f).collect()
    };
    json!({
        "config": config,
        "n": out.grid.len(),
        "x0": out.grid.x0(),
        "stability_max_lambda": out.stability_bound,
        "lambda": traj.lambda,
        "extinction_time": traj.extinction,
        "extinction_eps": traj.extinction_eps,
        "times": traj.times,
        "tv": traj.tv,
        "oscillation": traj.oscillation,
        "mean": traj.mean,
        "speed": per_step(&|r| json!(r.speed)),
        "inner_iterations": per_step(&|r| json!(r.iterations)),
        "converged": per_step(&|r| json!(r.converged)),
        "gap": per_step(&|r| json!(r.gap)),
        "relative_gap": per_step(&|r| json!(r.relative_gap)),
        "max_jump": per_step(&|r| json!(r.max_jump)),
    })
}

/// Writes `snapshots.csv` and `diagnostics.json` into `config.output_dir`.
pub fn emit_outputs(out: &RunOutput, config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output_dir;
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let csv_path = dir.join("snapshots.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut w = BufWriter::new(file);
    w.write_all(snapshots_csv(&out.trajectory, &out.grid).as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(&csv_path))?;

    let json_path = dir.join("diagnostics.json");
    let mut text = serde_json::to_string_pretty(&diagnostics_json(out, config))
        .map_err(|e| Error::Consistency(format!("serializing diagnostics: {e}")))?;
    text.push('\n');
    fs::write(&json_path, text).map_err(io_err(&json_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_profiles() {
        assert_eq!(initial_f(0.0), 20.0);
        assert_eq!(initial_f(5.0), 5.0);
        assert_eq!(initial_f(-5.0), 5.0);
        assert_eq!(initial_f(2.0), 20.0);
        assert!((initial_f(2.0 + 1e-12) - 20.0).abs() < 1e-9);
        assert_eq!(initial_f(10.0), 0.0);
        assert_eq!(initial_g(0.0), 20.0);
        assert_eq!(initial_g(2.0), 20.0);
        assert_eq!(initial_g(3.0), 0.0);
    }

    #[test]
    fn step_data_mean_on_default_grid() {
        let c = ExperimentConfig::default();
        let grid = c.grid().unwrap();
        let u = c.initial_data(&grid).unwrap();
        assert_eq!(grid.len(), 200);
        assert_eq!(u.iter().filter(|&&x| x == 20.0).count(), 40);
        assert!((u.iter().sum::<f64>() / 200.0 - 4.0).abs() < 1e-12);

        let mut node = c.clone();
        node.sampling = Sampling::Node;
        let grid = node.grid().unwrap();
        let u = node.initial_data(&grid).unwrap();
        let m = u.iter().sum::<f64>() / 200.0;
        assert!((m - 4.0).abs() <= 20.0 * 0.1 / 20.0 + 1e-12, "mean {m}");
    }

    #[test]
    fn flat_config_and_overrides() {
        let text = "# run\ns = 0.5\nlambda = 2e-3\ndomain = -5:5\nsnapshot-every = 4\ninitial = f\nstrict = true\n";
        let mut c = ExperimentConfig::default();
        for (k, v) in ExperimentConfig::parse_flat(text).unwrap() {
            c.set(&k, &v).unwrap();
        }
        assert_eq!(c.s, 0.5);
        assert_eq!(c.lambda, LambdaSetting::Fixed(2e-3));
        assert_eq!((c.x_min, c.x_max), (-5.0, 5.0));
        assert_eq!(c.snapshot_every, 4);
        assert_eq!(c.initial, InitialData::F);
        assert!(c.strict);
        c.set("lambda", "AUTO").unwrap();
        assert_eq!(c.lambda, LambdaSetting::Auto);
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("steps", "many").is_err());
        assert!(ExperimentConfig::parse_flat("no equals sign").is_err());
    }

    #[test]
    fn json_config_round_trip() {
        let c = ExperimentConfig {
            lambda: LambdaSetting::Fixed(1e-4),
            initial: InitialData::File(PathBuf::from("data/u0.txt")),
            seed: Some(42),
            ..Default::default()
        };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["lambda"], json!(1e-4));
        let back: ExperimentConfig =
            serde_json::from_value(json!({ "config": v })["config"].clone()).unwrap();
        assert_eq!(back, c);
        let auto = serde_json::to_value(ExperimentConfig::default()).unwrap();
        assert_eq!(auto["lambda"], json!("auto"));
    }

    #[test]
    fn initial_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("plain.txt");
        fs::write(&plain, "1\n2\n3\n4\n").unwrap();
        assert_eq!(
            read_initial_file(&plain, 4).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        let csv = dir.path().join("u.csv");
        fs::write(&csv, "x,u\n0,1.5\n1,2.5\n").unwrap();
        assert_eq!(read_initial_file(&csv, 2).unwrap(), vec![1.5, 2.5]);
        assert!(matches!(
            read_initial_file(&plain, 5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            read_initial_file(&dir.path().join("missing"), 5),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn noise_needs_seed_and_is_reproducible() {
        let mut c = ExperimentConfig {
            noise: 0.5,
            ..Default::default()
        };
        let grid = c.grid().unwrap();
        assert!(c.initial_data(&grid).is_err());
        c.seed = Some(3);
        assert_eq!(
            c.initial_data(&grid).unwrap(),
            c.initial_data(&grid).unwrap()
        );
    }

    #[test]
    fn csv_of_constant_snapshot() {
        let grid = Grid::new(5, 1.0, 0.0).unwrap();
        let cache = SpectralCache::new(grid, 0.0).unwrap();
        let flow = FlowParams::new(SolverParams::new(0.0, 0.1), 3);
        let traj = evolve(&[2.0; 5], &flow, &cache).unwrap();
        let csv = snapshots_csv(&traj, &grid);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,u");
        assert_eq!(lines.len(), 6);
        assert!(lines[1..].iter().all(|l| l.ends_with(",2")));
    }
}
