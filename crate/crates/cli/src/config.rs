//! Argument and config-file handling. Flags override config-file values,
//! which override the documented defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rickerpp::{Coefficients, ModelParams, State};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rickerpp", version, about = "Analysis of the Ricker predator-prey map")]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,

    /// Model parameters, e.g. r=1,b0=4,gamma=1.5,c=0.9,s=0.1 (`r0` is an
    /// alias of `r`; a value of `skip` leaves the key unset)
    #[arg(long, global = true, value_name = "K=V,...")]
    params: Option<String>,

    /// Flat `key = value` file; `#` starts a comment
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write to FILE instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Iterate the map from a start state
    Simulate(SimulateArgs),
    /// Trivial, predator-free and positive fixed points with stability
    FixedPoints,
    /// Jury test and closed-form criteria at the positive fixed point
    Stability,
    /// Global-stability window and the criterion at r (if given)
    GlobalCheck,
    /// Nested-rectangle certificate and the R(U, y) > y check
    NullclineVerify(NullclineArgs),
    /// Locate the flip of the positive fixed point and its normal form
    Flip(FlipArgs),
    /// Attractor samples over a grid of r (bifurcation diagram)
    Sweep(SweepArgs),
    /// Largest Lyapunov exponent
    Lyapunov(LyapunovArgs),
    /// Minimal period of the attractor
    DetectPeriod(DetectPeriodArgs),
    /// Period-doubling thresholds and chaos onset
    Thresholds(ThresholdsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    FixedPoints,
    Stability,
    GlobalCheck,
    NullclineVerify,
    Flip,
    Sweep,
    Lyapunov,
    DetectPeriod,
    Thresholds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::FixedPoints => "fixed-points",
            Self::Stability => "stability",
            Self::GlobalCheck => "global-check",
            Self::NullclineVerify => "nullcline-verify",
            Self::Flip => "flip",
            Self::Sweep => "sweep",
            Self::Lyapunov => "lyapunov",
            Self::DetectPeriod => "detect-period",
            Self::Thresholds => "thresholds",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Self::FixedPoints | Self::Stability | Self::GlobalCheck | Self::NullclineVerify | Self::Flip => Format::Json,
            _ => Format::Csv,
        }
    }

    /// Whether the command works at a single value of `r`.
    pub fn needs_r(self) -> bool {
        matches!(
            self,
            Self::Simulate
                | Self::FixedPoints
                | Self::Stability
                | Self::NullclineVerify
                | Self::Lyapunov
                | Self::DetectPeriod
        )
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Initial state x,y [default: 1,1]
    #[arg(long, value_name = "X,Y")]
    start: Option<String>,
    /// Iterates to record [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Iterates to discard first [default: 0]
    #[arg(long)]
    transient: Option<usize>,
}

#[derive(Debug, Args)]
struct NullclineArgs {
    /// [default: 10000]
    #[arg(long)]
    max_levels: Option<usize>,
    /// Rectangle size at which to stop [default: 1e-10]
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct FlipArgs {
    /// Bracket for r* [default: r_min + 1e-6]
    #[arg(long)]
    r_lo: Option<f64>,
    /// [default: r_min + 50]
    #[arg(long)]
    r_hi: Option<f64>,
    /// Also list every flip in the bracket
    #[arg(long)]
    scan: bool,
    /// Check the prediction by simulating at r* ± delta
    #[arg(long, value_name = "DELTA")]
    verify_delta: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// [default: 2.5]
    #[arg(long)]
    r_from: Option<f64>,
    /// [default: 3.5]
    #[arg(long)]
    r_to: Option<f64>,
    /// Grid points including both ends [default: 200]
    #[arg(long)]
    steps: Option<usize>,
    /// Samples kept per r [default: 100]
    #[arg(long)]
    m: Option<usize>,
    /// [default: 10000]
    #[arg(long)]
    transient: Option<usize>,
    /// Add a lambda1 column
    #[arg(long)]
    lyapunov: bool,
    /// Iterates per lambda1 estimate [default: 100000]
    #[arg(long)]
    lyapunov_n: Option<usize>,
    /// [default: 1,1]
    #[arg(long, value_name = "X,Y")]
    start: Option<String>,
}

#[derive(Debug, Args)]
struct LyapunovArgs {
    /// [default: 1,1]
    #[arg(long, value_name = "X,Y")]
    start: Option<String>,
    /// [default: 1000000]
    #[arg(long)]
    n: Option<usize>,
    /// [default: 10000]
    #[arg(long)]
    transient: Option<usize>,
}

#[derive(Debug, Args)]
struct DetectPeriodArgs {
    /// [default: 1,1]
    #[arg(long, value_name = "X,Y")]
    start: Option<String>,
    /// Largest period tried [default: 64]
    #[arg(long)]
    cap: Option<usize>,
    /// Recurrence tolerance [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ThresholdsArgs {
    /// Locate a single doubling from this period (needs --r-lo and --r-hi)
    #[arg(long)]
    from_period: Option<usize>,
    /// [default: r_min + 1e-3]
    #[arg(long)]
    r_lo: Option<f64>,
    /// [default: r_lo + 10]
    #[arg(long)]
    r_hi: Option<f64>,
    /// [default: 5]
    #[arg(long)]
    max_doublings: Option<usize>,
    /// [default: 1e-3]
    #[arg(long)]
    scan_step: Option<f64>,
    /// Also locate the onset of chaos after the last doubling
    #[arg(long)]
    chaos: bool,
    /// Iterates per lambda1 estimate in the chaos search [default: 1000000]
    #[arg(long)]
    lyapunov_n: Option<usize>,
}

/// Every command option; unset fields fall back to defaults at use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Opts {
    pub start: Option<State>,
    pub n: Option<usize>,
    pub transient: Option<usize>,
    pub cap: Option<usize>,
    pub tol: Option<f64>,
    pub r_from: Option<f64>,
    pub r_to: Option<f64>,
    pub steps: Option<usize>,
    pub m: Option<usize>,
    pub lyapunov: Option<bool>,
    pub lyapunov_n: Option<usize>,
    pub max_levels: Option<usize>,
    pub r_lo: Option<f64>,
    pub r_hi: Option<f64>,
    pub from_period: Option<usize>,
    pub max_doublings: Option<usize>,
    pub scan_step: Option<f64>,
    pub chaos: Option<bool>,
    pub scan: Option<bool>,
    pub verify_delta: Option<f64>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl Opts {
    fn overlay(&mut self, top: Opts) {
        overlay_fields!(self, top; start, n, transient, cap, tol, r_from, r_to, steps, m, lyapunov,
            lyapunov_n, max_levels, r_lo, r_hi, from_period, max_doublings, scan_step, chaos, scan, verify_delta);
    }
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl CommandArgs {
    fn split(self) -> Result<(Command, Opts), CliError> {
        let start = |s: Option<String>| s.map(|v| parse_state("--start", &v)).transpose();
        Ok(match self {
            Self::Simulate(a) => (
                Command::Simulate,
                Opts {
                    start: start(a.start)?,
                    n: a.n,
                    transient: a.transient,
                    ..Opts::default()
                },
            ),
            Self::FixedPoints => (Command::FixedPoints, Opts::default()),
            Self::Stability => (Command::Stability, Opts::default()),
            Self::GlobalCheck => (Command::GlobalCheck, Opts::default()),
            Self::NullclineVerify(a) => (
                Command::NullclineVerify,
                Opts {
                    max_levels: a.max_levels,
                    tol: a.tol,
                    ..Opts::default()
                },
            ),
            Self::Flip(a) => (
                Command::Flip,
                Opts {
                    r_lo: a.r_lo,
                    r_hi: a.r_hi,
                    scan: flag(a.scan),
                    verify_delta: a.verify_delta,
                    ..Opts::default()
                },
            ),
            Self::Sweep(a) => (
                Command::Sweep,
                Opts {
                    r_from: a.r_from,
                    r_to: a.r_to,
                    steps: a.steps,
                    m: a.m,
                    transient: a.transient,
                    lyapunov: flag(a.lyapunov),
                    lyapunov_n: a.lyapunov_n,
                    start: start(a.start)?,
                    ..Opts::default()
                },
            ),
            Self::Lyapunov(a) => (
                Command::Lyapunov,
                Opts {
                    start: start(a.start)?,
                    n: a.n,
                    transient: a.transient,
                    ..Opts::default()
                },
            ),
            Self::DetectPeriod(a) => (
                Command::DetectPeriod,
                Opts {
                    start: start(a.start)?,
                    cap: a.cap,
                    tol: a.tol,
                    ..Opts::default()
                },
            ),
            Self::Thresholds(a) => (
                Command::Thresholds,
                Opts {
                    from_period: a.from_period,
                    r_lo: a.r_lo,
                    r_hi: a.r_hi,
                    max_doublings: a.max_doublings,
                    scan_step: a.scan_step,
                    chaos: flag(a.chaos),
                    lyapunov_n: a.lyapunov_n,
                    ..Opts::default()
                },
            ),
        })
    }
}

/// Model parameters as given; `None` is unset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamSet {
    pub r: Option<f64>,
    pub b0: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub s: Option<f64>,
}

impl ParamSet {
    /// Set (`Some`) or clear (`None`) a key by name.
    fn assign(&mut self, key: &str, value: Option<f64>) -> bool {
        let slot = match key {
            "r" | "r0" => &mut self.r,
            "b0" => &mut self.b0,
            "gamma" => &mut self.gamma,
            "c" => &mut self.c,
            "s" => &mut self.s,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn coefficients(&self) -> Result<Coefficients, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                CliError::usage(format!(
                    "missing required parameter `{name}` (set it with --params {name}=... or in the config file)"
                ))
            })
        };
        let (b0, gamma, c, s) = (
            need(self.b0, "b0")?,
            need(self.gamma, "gamma")?,
            need(self.c, "c")?,
            need(self.s, "s")?,
        );
        Coefficients::new(b0, gamma, c, s).map_err(|e| CliError::usage(format!("--params: {e}")))
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        let k = self.coefficients()?;
        let r = self.r.ok_or_else(|| {
            CliError::usage("missing required parameter `r` (set it with --params r=... or in the config file)")
        })?;
        k.at(r).map_err(|e| CliError::usage(format!("--params: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: ParamSet,
    pub opts: Opts,
    pub format: Format,
    pub output: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(what: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{what}: cannot parse `{}` as a number", v.trim())))
}

fn parse_bool(what: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::usage(format!("{what}: expected true or false, got `{other}`"))),
    }
}

fn parse_state(what: &str, v: &str) -> Result<State, CliError> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::usage(format!("{what}: expected X,Y, got `{v}`")));
    }
    State::new(parse_num(what, parts[0])?, parse_num(what, parts[1])?).map_err(|e| CliError::usage(format!("{what}: {e}")))
}

/// Apply `--params k=v,...` on top of `base`.
fn parse_params(text: &str, base: &mut ParamSet) -> Result<(), CliError> {
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--params: expected key=value, got `{item}`")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = if value == "skip" {
            None
        } else {
            Some(parse_num(&format!("--params {key}"), value)?)
        };
        if !base.assign(key, parsed) {
            return Err(CliError::usage(format!(
                "--params: unknown parameter `{key}` (expected r, r0, b0, gamma, c, s)"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
const OPTION_KEYS: &[&str] = &[
    "start",
    "n",
    "transient",
    "cap",
    "tol",
    "r_from",
    "r_to",
    "steps",
    "m",
    "lyapunov",
    "lyapunov_n",
    "max_levels",
    "r_lo",
    "r_hi",
    "from_period",
    "max_doublings",
    "scan_step",
    "chaos",
    "scan",
    "verify_delta",
    "format",
    "output",
];

/// Settings read from a config file.
#[derive(Debug, Default)]
struct FileConfig {
    params: ParamSet,
    opts: Opts,
    format: Option<Format>,
    output: Option<PathBuf>,
}

fn parse_config_text(text: &str, origin: &Path) -> Result<FileConfig, CliError> {
    let mut entries = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let where_ = format!("{}:{}", origin.display(), no + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{where_}: expected `key = value`")))?;
        let key = key.trim().replace('-', "_");
        entries.insert(key, (value.trim().to_string(), where_));
    }

    let mut cfg = FileConfig::default();
    for (key, (value, where_)) in entries {
        let what = format!("{where_}: {key}");
        let o = &mut cfg.opts;
        match key.as_str() {
            "r" | "r0" | "b0" | "gamma" | "c" | "s" => {
                let v = if value == "skip" { None } else { Some(parse_num(&what, &value)?) };
                cfg.params.assign(&key, v);
            }
            "start" => o.start = Some(parse_state(&what, &value)?),
            "n" => o.n = Some(parse_num(&what, &value)?),
            "transient" => o.transient = Some(parse_num(&what, &value)?),
            "cap" => o.cap = Some(parse_num(&what, &value)?),
            "tol" => o.tol = Some(parse_num(&what, &value)?),
            "r_from" => o.r_from = Some(parse_num(&what, &value)?),
            "r_to" => o.r_to = Some(parse_num(&what, &value)?),
            "steps" => o.steps = Some(parse_num(&what, &value)?),
            "m" => o.m = Some(parse_num(&what, &value)?),
            "lyapunov" => o.lyapunov = Some(parse_bool(&what, &value)?),
            "lyapunov_n" => o.lyapunov_n = Some(parse_num(&what, &value)?),
            "max_levels" => o.max_levels = Some(parse_num(&what, &value)?),
            "r_lo" => o.r_lo = Some(parse_num(&what, &value)?),
            "r_hi" => o.r_hi = Some(parse_num(&what, &value)?),
            "from_period" => o.from_period = Some(parse_num(&what, &value)?),
            "max_doublings" => o.max_doublings = Some(parse_num(&what, &value)?),
            "scan_step" => o.scan_step = Some(parse_num(&what, &value)?),
            "chaos" => o.chaos = Some(parse_bool(&what, &value)?),
            "scan" => o.scan = Some(parse_bool(&what, &value)?),
            "verify_delta" => o.verify_delta = Some(parse_num(&what, &value)?),
            "format" => {
                cfg.format = Some(
                    Format::from_str(&value, true)
                        .map_err(|_| CliError::usage(format!("{what}: expected csv or json, got `{value}`")))?,
                )
            }
            "output" => cfg.output = Some(PathBuf::from(value)),
            _ => return Err(CliError::usage(format!("{where_}: unknown key `{key}`"))),
        }
    }
    Ok(cfg)
}

pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let (command, flag_opts) = cli.command.split()?;

    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
            parse_config_text(&text, path)?
        }
        None => FileConfig::default(),
    };

    let mut params = file.params;
    if let Some(text) = &cli.params {
        parse_params(text, &mut params)?;
    }
    let mut opts = file.opts;
    opts.overlay(flag_opts);

    Ok(RunConfig {
        command,
        params,
        opts,
        format: cli.format.or(file.format).unwrap_or(command.default_format()),
        output: cli.output.or(file.output),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        parse_args(std::iter::once("rickerpp").chain(args.iter().copied()))
    }

    #[test]
    fn params_and_aliases() {
        let cfg = parse(&["flip", "--params", "r0=skip,b0=4,gamma=1.5,c=0.9,s=0.1"]).unwrap();
        assert_eq!(cfg.command, Command::Flip);
        assert_eq!(cfg.params.r, None);
        assert_eq!(cfg.params.b0, Some(4.0));
        assert_eq!(cfg.format, Format::Json);
        let cfg = parse(&["simulate", "--params", "r0=2"]).unwrap();
        assert_eq!(cfg.params.r, Some(2.0));
        assert_eq!(cfg.format, Format::Csv);
    }

    #[test]
    fn unknown_param_is_usage_error() {
        let err = parse(&["simulate", "--params", "q=1"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("`q`"));
    }

    #[test]
    fn missing_parameter_is_named() {
        let cfg = parse(&["simulate", "--params", "b0=4,gamma=1.5,c=0.9,s=0.1"]).unwrap();
        let err = cfg.params.model().unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("`r`"));
        let cfg = parse(&["simulate", "--params", "r=1,b0=4,c=0.9,s=0.1"]).unwrap();
        assert!(cfg.params.model().unwrap_err().to_string().contains("`gamma`"));
    }

    #[test]
    fn invalid_value_names_the_flag() {
        let err = parse(&["simulate", "--params", "r=abc"]).unwrap_err();
        assert!(err.to_string().contains("--params r"));
        let err = parse(&["simulate", "--start", "1"]).unwrap_err();
        assert!(err.to_string().contains("--start"));
        let cfg = parse(&["simulate", "--params", "r=1,b0=4,gamma=1.5,c=1.5,s=0.1"]).unwrap();
        assert!(cfg.params.model().unwrap_err().to_string().contains("c = 1.5"));
    }

    #[test]
    fn config_text_and_precedence() {
        let text = "# example\nr = 1\nb0=4\ngamma = 1.5 # saturation\nc = 0.9\ns = 0.1\nn = 50\nr-from = 2.0\nformat = json\n";
        let file = parse_config_text(text, Path::new("cfg")).unwrap();
        assert_eq!(file.params.r, Some(1.0));
        assert_eq!(file.opts.n, Some(50));
        assert_eq!(file.opts.r_from, Some(2.0));
        assert_eq!(file.format, Some(Format::Json));

        let mut opts = file.opts.clone();
        opts.overlay(Opts {
            n: Some(7),
            ..Opts::default()
        });
        assert_eq!(opts.n, Some(7));
        assert_eq!(opts.r_from, Some(2.0));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_lines() {
        let err = parse_config_text("r = 1\nbogus = 3\n", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().contains("cfg:2") && err.to_string().contains("bogus"));
        assert!(parse_config_text("just words\n", Path::new("cfg")).is_err());
        assert!(parse_config_text("lyapunov = maybe\n", Path::new("cfg")).is_err());
    }

    #[test]
    fn every_documented_key_is_accepted() {
        for key in OPTION_KEYS {
            let value = match *key {
                "start" => "1,1",
                "lyapunov" | "chaos" | "scan" => "true",
                "format" => "csv",
                "output" => "out.csv",
                _ => "3",
            };
            parse_config_text(&format!("{key} = {value}\n"), Path::new("cfg")).unwrap();
        }
    }
}
