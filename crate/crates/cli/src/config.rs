//! Run configuration: defaults, `key = value` config files and flag overrides.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use planar_spectra::geometry::{parse_list, DomainSpec};
use planar_spectra::shapeopt::{Objective, ShapeParams};
use planar_spectra::spectra::Problem;
use planar_spectra::verify::{CheckKind, Expectation, Thresholds};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Verify,
    Optimize,
    Convergence,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Verify => "verify",
            Command::Optimize => "optimize",
            Command::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectrum" => Some(Command::Spectrum),
            "verify" => Some(Command::Verify),
            "optimize" => Some(Command::Optimize),
            "convergence" => Some(Command::Convergence),
            _ => None,
        }
    }
}

/// Keys that describe the domain; they are resolved together into a [`DomainSpec`].
const DOMAIN_KEYS: &[&str] = &[
    "domain",
    "radius",
    "semi_a",
    "semi_b",
    "width",
    "height",
    "inner_r",
    "outer_r",
    "base_radius",
    "cos_coeffs",
    "sin_coeffs",
    "target_area",
];

/// Short spellings accepted in files and on the command line.
fn canonical_key(key: &str) -> String {
    let key = key.trim().replace('-', "_");
    match key.as_str() {
        "w" => "width".into(),
        "h" => "height".into(),
        "a" => "semi_a".into(),
        "b" => "semi_b".into(),
        "inner" => "inner_r".into(),
        "outer" => "outer_r".into(),
        "cos" => "cos_coeffs".into(),
        "sin" => "sin_coeffs".into(),
        "area" => "target_area".into(),
        "k" => "k".into(),
        _ => key,
    }
}

/// Fully resolved settings of one run. Every field is echoed into the report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainSpec,
    /// Run over the standard gallery instead of `domain` (verify only).
    pub all_gallery: bool,
    pub level: usize,
    pub level_min: usize,
    pub level_max: usize,
    pub k: usize,
    pub problem: Problem,
    /// `None` runs every check.
    pub check: Option<CheckKind>,
    pub expect: Option<Expectation>,
    pub objective: Objective,
    pub modes: usize,
    pub start: ShapeParams,
    pub max_evaluations: usize,
    pub certificate_level: usize,
    pub thresholds: Thresholds,
    pub viscosity: f64,
    pub seed: u64,
    /// Add lower-level solves to the spectrum report.
    pub history: bool,
    pub timing: bool,
    pub output: PathBuf,
    pub plots: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            domain: DomainSpec::unit_disc(),
            all_gallery: false,
            level: 4,
            level_min: 2,
            level_max: 5,
            k: match command {
                Command::Spectrum => 3,
                _ => 2,
            },
            problem: Problem::Dirichlet,
            check: None,
            expect: None,
            objective: Objective::Stokes1,
            modes: 4,
            start: ShapeParams::zeros(4),
            max_evaluations: 400,
            certificate_level: 4,
            thresholds: Thresholds::default(),
            viscosity: 1.0,
            seed: planar_spectra::eigensolve::SolveOptions::default().seed,
            history: false,
            timing: false,
            output: PathBuf::from(format!("{}.json", command.name())),
            plots: None,
            table: None,
            mesh: None,
        }
    }

    /// Builds a config from defaults, then `file` entries, then `overrides` in order.
    ///
    /// Diagnostics name the offending flag (`--level`) or config key.
    pub fn resolve(
        command: Command,
        file: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut pending = Pending::default();
        for (k, v) in file {
            pending.set(k, v, &format!("config key `{k}`"))?;
        }
        for (k, v) in overrides {
            pending.set(k, v, &format!("--{}", k.replace('_', "-")))?;
        }
        pending.finish(command)
    }

    /// Rebuilds a config from its echo (see [`RunConfig::to_key_values`]).
    pub fn from_echo(echo: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let command = echo
            .get("command")
            .and_then(|c| Command::parse(c))
            .ok_or_else(|| CliError::Config("echo lacks a valid `command`".into()))?;
        let pairs: Vec<(String, String)> =
            echo.iter().filter(|(k, _)| *k != "command").map(|(k, v)| (k.clone(), v.clone())).collect();
        RunConfig::resolve(command, &pairs, &[])
    }

    /// Canonical `key = value` form; resolving it reproduces `self` exactly.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("command", self.command.name().into());
        for (k, v) in self.domain.to_key_values() {
            put(&k, v);
        }
        put("all_gallery", self.all_gallery.to_string());
        put("level", self.level.to_string());
        put("level_min", self.level_min.to_string());
        put("level_max", self.level_max.to_string());
        put("k", self.k.to_string());
        put("problem", self.problem.name().into());
        put("check", self.check.map_or("all", |c| c.name()).into());
        put(
            "expect",
            match self.expect {
                None => "auto".into(),
                Some(e) => expectation_name(e).into(),
            },
        );
        put("objective", self.objective.name().into());
        put("modes", self.modes.to_string());
        put("start", start_text(&self.start));
        put("max_evaluations", self.max_evaluations.to_string());
        put("certificate_level", self.certificate_level.to_string());
        let th = serde_json::to_value(&self.thresholds).expect("thresholds serialize");
        for (name, v) in th.as_object().expect("thresholds are a struct") {
            put(&format!("threshold.{name}"), v.as_f64().expect("numeric threshold").to_string());
        }
        put("viscosity", self.viscosity.to_string());
        put("seed", self.seed.to_string());
        put("history", self.history.to_string());
        put("timing", self.timing.to_string());
        put("output", self.output.display().to_string());
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        put("plots", opt(&self.plots));
        put("table", opt(&self.table));
        put("mesh", opt(&self.mesh));
        kv
    }
}

fn expectation_name(e: Expectation) -> &'static str {
    match e {
        Expectation::Disc => "disc",
        Expectation::NonDisc => "nondisc",
        Expectation::None => "none",
    }
}

/// `a2=0.1,b3=-0.05` style text; `none` for the disc.
pub fn start_text(p: &ShapeParams) -> String {
    let mut parts = Vec::new();
    for (prefix, coeffs) in [("a", &p.cos_coeffs), ("b", &p.sin_coeffs)] {
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                parts.push(format!("{prefix}{}={c}", i + 1));
            }
        }
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(",")
    }
}

/// Parses `start` text into coefficients of `modes` Fourier modes.
pub fn parse_start(text: &str, modes: usize) -> Result<ShapeParams, String> {
    let mut p = ShapeParams::zeros(modes);
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(p);
    }
    for item in text.split(',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected `a<k>=<value>` or `b<k>=<value>`, got `{item}`"))?;
        let name = name.trim();
        let value: f64 = value.trim().parse().map_err(|_| format!("cannot parse `{value}` in `{item}`"))?;
        let (kind, idx) = name.split_at(1.min(name.len()));
        let idx: usize = idx.parse().map_err(|_| format!("bad mode index in `{item}`"))?;
        if idx == 0 || idx > modes {
            return Err(format!("mode {idx} in `{item}` outside 1..={modes}"));
        }
        match kind {
            "a" => p.cos_coeffs[idx - 1] = value,
            "b" => p.sin_coeffs[idx - 1] = value,
            _ => return Err(format!("unknown coefficient `{name}`")),
        }
    }
    Ok(p)
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Raw values collected before resolution; the last write of a key wins.
#[derive(Default)]
struct Pending {
    values: HashMap<String, (String, String)>,
    domain: HashMap<String, String>,
    domain_sources: Vec<String>,
    thresholds: Vec<(String, String, String)>,
}

impl Pending {
    fn set(&mut self, key: &str, value: &str, source: &str) -> Result<(), CliError> {
        let key = canonical_key(key);
        if let Some(name) = key.strip_prefix("threshold.") {
            self.thresholds.push((name.to_string(), value.to_string(), source.to_string()));
        } else if key == "threshold" {
            let (name, v) = value
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{source}: expected `name=value`, got `{value}`")))?;
            self.thresholds.push((name.trim().to_string(), v.trim().to_string(), source.to_string()));
        } else if DOMAIN_KEYS.contains(&key.as_str()) {
            if key == "domain" && self.domain.get("domain").is_some_and(|d| d != value) {
                // A new kind invalidates the shape parameters of the old one.
                self.domain.retain(|k, _| k == "target_area");
            }
            self.domain.insert(key.clone(), value.trim().to_string());
            self.domain_sources.push(source.to_string());
        } else if KNOWN_KEYS.contains(&key.as_str()) {
            self.values.insert(key, (value.trim().to_string(), source.to_string()));
        } else {
            return Err(CliError::Config(format!("{source}: unknown setting `{key}`")));
        }
        Ok(())
    }

    fn finish(self, command: Command) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::defaults(command);
        let v = &self.values;
        fn parse<T: std::str::FromStr>(v: &HashMap<String, (String, String)>, key: &str) -> Result<Option<T>, CliError> {
            match v.get(key) {
                None => Ok(None),
                Some((s, src)) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| CliError::Config(format!("{src}: cannot parse `{s}`"))),
            }
        }
        let bool_of = |key: &str| -> Result<Option<bool>, CliError> {
            match v.get(key) {
                None => Ok(None),
                Some((s, src)) => match s.as_str() {
                    "true" | "yes" | "1" | "" => Ok(Some(true)),
                    "false" | "no" | "0" => Ok(Some(false)),
                    _ => Err(CliError::Config(format!("{src}: expected true or false, got `{s}`"))),
                },
            }
        };
        let path_of = |key: &str| -> Option<Option<PathBuf>> {
            v.get(key).map(|(s, _)| if s == "none" { None } else { Some(PathBuf::from(s)) })
        };
        if let Some(c) = v.get("command") {
            if Command::parse(&c.0) != Some(command) {
                return Err(CliError::Config(format!(
                    "{}: command `{}` does not match the invoked `{}`",
                    c.1,
                    c.0,
                    command.name()
                )));
            }
        }
        if !self.domain.is_empty() {
            let mut kv = self.domain.clone();
            kv.entry("domain".into()).or_insert_with(|| "disc".into());
            for (k, v) in shape_defaults(&kv["domain"]) {
                kv.entry(k.to_string()).or_insert_with(|| v.to_string());
            }
            for key in ["cos_coeffs", "sin_coeffs"] {
                if let Some(list) = kv.get(key) {
                    parse_list(list).map_err(|_| CliError::Config(format!("--{}: cannot parse `{list}`", key.replace('_', "-"))))?;
                }
            }
            cfg.domain = DomainSpec::from_key_values(&kv).map_err(|e| {
                CliError::Config(format!("domain ({}): {e}", self.domain_sources.join(", ")))
            })?;
        }
        if let Some(b) = bool_of("all_gallery")? {
            cfg.all_gallery = b;
        }
        for (key, slot) in [
            ("level", &mut cfg.level),
            ("level_min", &mut cfg.level_min),
            ("level_max", &mut cfg.level_max),
            ("k", &mut cfg.k),
            ("modes", &mut cfg.modes),
            ("max_evaluations", &mut cfg.max_evaluations),
            ("certificate_level", &mut cfg.certificate_level),
        ] {
            if let Some(x) = parse::<usize>(v, key)? {
                *slot = x;
            }
        }
        if let Some((s, src)) = v.get("problem") {
            cfg.problem = s.parse().map_err(|e| CliError::Config(format!("{src}: {e}")))?;
        }
        if let Some((s, src)) = v.get("check") {
            cfg.check = if s == "all" {
                None
            } else {
                Some(s.parse().map_err(|e| CliError::Config(format!("{src}: {e}")))?)
            };
        }
        if let Some((s, src)) = v.get("expect") {
            cfg.expect = if s == "auto" {
                None
            } else {
                Some(s.parse().map_err(|e| CliError::Config(format!("{src}: {e}")))?)
            };
        }
        if let Some((s, src)) = v.get("objective") {
            cfg.objective = s.parse().map_err(|e| CliError::Config(format!("{src}: {e}")))?;
        }
        cfg.start = ShapeParams::zeros(cfg.modes);
        if let Some((s, src)) = v.get("start") {
            cfg.start = parse_start(s, cfg.modes).map_err(|e| CliError::Config(format!("{src}: {e}")))?;
        }
        if let Some(x) = parse::<f64>(v, "viscosity")? {
            cfg.viscosity = x;
        }
        if let Some(x) = parse::<u64>(v, "seed")? {
            cfg.seed = x;
        }
        if let Some(b) = bool_of("history")? {
            cfg.history = b;
        }
        if let Some(b) = bool_of("timing")? {
            cfg.timing = b;
        }
        if let Some(p) = path_of("output") {
            cfg.output = p.ok_or_else(|| CliError::Config("output path cannot be `none`".into()))?;
        }
        if let Some(p) = path_of("plots") {
            cfg.plots = p;
        }
        if let Some(p) = path_of("table") {
            cfg.table = p;
        }
        if let Some(p) = path_of("mesh") {
            cfg.mesh = p;
        }
        if !self.thresholds.is_empty() {
            let mut th = serde_json::to_value(&cfg.thresholds).expect("thresholds serialize");
            let obj = th.as_object_mut().expect("thresholds are a struct");
            for (name, value, src) in &self.thresholds {
                let x: f64 = value
                    .parse()
                    .map_err(|_| CliError::Config(format!("{src}: cannot parse threshold `{value}`")))?;
                match obj.get_mut(name.as_str()) {
                    Some(slot) => *slot = serde_json::json!(x),
                    None => return Err(CliError::Config(format!("{src}: unknown threshold `{name}`"))),
                }
            }
            cfg.thresholds = serde_json::from_value(th).expect("thresholds deserialize");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shape parameters used when a kind is named without them (the gallery shapes).
fn shape_defaults(kind: &str) -> &'static [(&'static str, &'static str)] {
    match kind {
        "disc" => &[("radius", "1")],
        "ellipse" => &[("semi_a", "2"), ("semi_b", "1")],
        "rectangle" => &[("width", "1"), ("height", "1")],
        "annulus" => &[("inner_r", "0.5"), ("outer_r", "1")],
        _ => &[],
    }
}

const KNOWN_KEYS: &[&str] = &[
    "command",
    "all_gallery",
    "level",
    "level_min",
    "level_max",
    "k",
    "problem",
    "check",
    "expect",
    "objective",
    "modes",
    "start",
    "max_evaluations",
    "certificate_level",
    "viscosity",
    "seed",
    "history",
    "timing",
    "output",
    "plots",
    "table",
    "mesh",
];

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let max = planar_spectra::geometry::MAX_LEVEL;
        for (name, l) in [
            ("level", self.level),
            ("level-min", self.level_min),
            ("level-max", self.level_max),
            ("certificate-level", self.certificate_level),
        ] {
            if l > max {
                return Err(CliError::Config(format!("--{name}: {l} exceeds the maximum level {max}")));
            }
        }
        if self.level_min >= self.level_max {
            return Err(CliError::Config("--level-min must be below --level-max".into()));
        }
        if self.k == 0 {
            return Err(CliError::Config("--k: at least one eigenvalue".into()));
        }
        if self.modes < 2 || self.modes > planar_spectra::geometry::MAX_STAR_MODES {
            return Err(CliError::Config(format!(
                "--modes: {} outside 2..={}",
                self.modes,
                planar_spectra::geometry::MAX_STAR_MODES
            )));
        }
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return Err(CliError::Config("--viscosity: must be positive".into()));
        }
        if self.max_evaluations == 0 {
            return Err(CliError::Config("--max-evaluations: must be positive".into()));
        }
        Ok(())
    }
}
