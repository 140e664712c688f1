//! Run configuration files.
//!
//! A configuration is a TOML file:
//!
//! ```toml
//! command = "frontier"
//! source = "dsbs-0.1"        # builtin name or path to a pmf file
//! master_seed = 7
//! out_dir = "runs/frontier"  # optional, default runs/<command>
//! threads = 0                # optional, 0 = one per core
//!
//! [parameters]
//! fixed = { rb1 = inf, rb2 = inf }
//! grid = [
//!     { axis = "rf1", lo = 0.0, hi = 1.0, points = 5 },
//!     { axis = "rf2", lo = 0.0, hi = 1.0, points = 5 },
//! ]
//! ```
//!
//! Relative source paths are resolved against the directory of the
//! configuration file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coordinet::pmf::read_pmf;
use coordinet::{sources, JointPmf};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{io_err, CliError, Result, Violations};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Info,
    Wyner,
    RegionInner,
    RegionOuter,
    Frontier,
    FmeVerify,
    Osrb,
    Protocol,
    Sweep,
}

const COMMANDS: [(&str, Command); 9] = [
    ("info", Command::Info),
    ("wyner", Command::Wyner),
    ("region-inner", Command::RegionInner),
    ("region-outer", Command::RegionOuter),
    ("frontier", Command::Frontier),
    ("fme-verify", Command::FmeVerify),
    ("osrb", Command::Osrb),
    ("protocol", Command::Protocol),
    ("sweep", Command::Sweep),
];

impl Command {
    pub fn name(self) -> &'static str {
        COMMANDS
            .iter()
            .find(|(_, c)| *c == self)
            .map(|(n, _)| *n)
            .expect("listed")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        COMMANDS.iter().find(|(n, _)| *n == s).map(|(_, c)| *c).ok_or_else(|| {
            let names: Vec<&str> = COMMANDS.iter().map(|(n, _)| *n).collect();
            format!("unknown command `{s}`, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Int,
    Float,
    /// Nonnegative float, `inf` allowed.
    Rate,
    Str,
    Ints,
    Floats,
    Strs,
    StrLists,
    Table(&'static [Field]),
    Tables(&'static [Field]),
    /// A table checked elsewhere.
    AnyTable,
}

#[derive(Clone, Copy, Debug)]
struct Field {
    key: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(key: &'static str, kind: Kind) -> Field {
    Field {
        key,
        kind,
        required: true,
    }
}

const fn opt(key: &'static str, kind: Kind) -> Field {
    Field {
        key,
        kind,
        required: false,
    }
}

const RATE_FIELDS: [Field; 4] = [
    req("rf1", Kind::Rate),
    req("rb1", Kind::Rate),
    req("rf2", Kind::Rate),
    req("rb2", Kind::Rate),
];
const FIXED_FIELDS: [Field; 4] = [
    opt("rf1", Kind::Rate),
    opt("rb1", Kind::Rate),
    opt("rf2", Kind::Rate),
    opt("rb2", Kind::Rate),
];
const TILDE_FIELDS: [Field; 3] = [opt("rt0", Kind::Rate), opt("rt1", Kind::Rate), opt("rt2", Kind::Rate)];
const CAP_FIELDS: [Field; 3] = [
    opt("sequences", Kind::Int),
    opt("outputs", Kind::Int),
    opt("joint", Kind::Int),
];
const GRID_FIELDS: [Field; 4] = [
    req("axis", Kind::Str),
    req("lo", Kind::Float),
    req("hi", Kind::Float),
    req("points", Kind::Int),
];

const TOP_FIELDS: [Field; 6] = [
    req("command", Kind::Str),
    req("source", Kind::Str),
    opt("master_seed", Kind::Int),
    opt("out_dir", Kind::Str),
    opt("threads", Kind::Int),
    opt("parameters", Kind::AnyTable),
];

fn parameter_fields(c: Command) -> &'static [Field] {
    const WYNER: &[Field] = &[
        opt("w_cap", Kind::Int),
        opt("restarts", Kind::Int),
        opt("max_iters", Kind::Int),
        opt("markov_tol", Kind::Float),
    ];
    const INNER: &[Field] = &[
        RATE_FIELDS[0],
        RATE_FIELDS[1],
        RATE_FIELDS[2],
        RATE_FIELDS[3],
        opt("caps", Kind::Ints),
        opt("restarts", Kind::Int),
        opt("max_iters", Kind::Int),
    ];
    const OUTER: &[Field] = &[
        RATE_FIELDS[0],
        RATE_FIELDS[1],
        RATE_FIELDS[2],
        RATE_FIELDS[3],
        opt("aux_cap", Kind::Int),
        opt("restarts_per_alpha", Kind::Int),
        opt("refine_starts", Kind::Int),
    ];
    const FRONTIER: &[Field] = &[
        req("fixed", Kind::Table(&FIXED_FIELDS)),
        req("grid", Kind::Tables(&GRID_FIELDS)),
        opt("inner_caps", Kind::Ints),
        opt("inner_restarts", Kind::Int),
        opt("outer_refine_starts", Kind::Int),
    ];
    const FME: &[Field] = &[opt("couplings", Kind::Int), opt("samples", Kind::Int)];
    const OSRB: &[Field] = &[
        opt("mode", Kind::Str),
        req("components", Kind::StrLists),
        opt("side", Kind::Strs),
        req("rates", Kind::Floats),
        req("n", Kind::Ints),
        opt("seeds", Kind::Int),
    ];
    const PROTOCOL: &[Field] = &[
        opt("coupling", Kind::Str),
        req("n", Kind::Int),
        req("rates", Kind::Table(&RATE_FIELDS)),
        opt("tilde", Kind::Table(&TILDE_FIELDS)),
        opt("caps", Kind::Table(&CAP_FIELDS)),
    ];
    const SWEEP: &[Field] = &[
        opt("coupling", Kind::Str),
        req("n", Kind::Ints),
        opt("seeds", Kind::Int),
        req("rates", Kind::Table(&RATE_FIELDS)),
        opt("tilde", Kind::Table(&TILDE_FIELDS)),
        opt("caps", Kind::Table(&CAP_FIELDS)),
    ];
    match c {
        Command::Info => &[],
        Command::Wyner => WYNER,
        Command::RegionInner => INNER,
        Command::RegionOuter => OUTER,
        Command::Frontier => FRONTIER,
        Command::FmeVerify => FME,
        Command::Osrb => OSRB,
        Command::Protocol => PROTOCOL,
        Command::Sweep => SWEEP,
    }
}

fn check_value(path: &str, v: &Value, kind: Kind, out: &mut Violations) {
    let expect = |out: &mut Violations, what: &str| out.push(path, format!("expected {what}, found {}", v.type_str()));
    match kind {
        Kind::Int => match v {
            Value::Integer(i) if *i >= 0 => {}
            Value::Integer(_) => out.push(path, "must be nonnegative"),
            _ => expect(out, "a nonnegative integer"),
        },
        Kind::Float => match v {
            Value::Integer(_) => {}
            Value::Float(f) if f.is_finite() => {}
            Value::Float(_) => out.push(path, "must be finite"),
            _ => expect(out, "a number"),
        },
        Kind::Rate => match v {
            Value::Integer(i) if *i >= 0 => {}
            Value::Float(f) if *f >= 0.0 => {}
            Value::Integer(_) | Value::Float(_) => out.push(path, "rates must be nonnegative (inf allowed)"),
            _ => expect(out, "a rate"),
        },
        Kind::Str => {
            if !v.is_str() {
                expect(out, "a string")
            }
        }
        Kind::Ints | Kind::Floats | Kind::Strs | Kind::StrLists => {
            let Some(items) = v.as_array() else {
                return expect(out, "an array");
            };
            let inner = match kind {
                Kind::Ints => Kind::Int,
                Kind::Floats => Kind::Float,
                Kind::Strs => Kind::Str,
                _ => Kind::Strs,
            };
            for (i, item) in items.iter().enumerate() {
                check_value(&format!("{path}[{i}]"), item, inner, out);
            }
        }
        Kind::Table(fields) => match v.as_table() {
            Some(t) => check_table(path, t, fields, out),
            None => expect(out, "a table"),
        },
        Kind::AnyTable => {
            if !v.is_table() {
                expect(out, "a table")
            }
        }
        Kind::Tables(fields) => {
            let Some(items) = v.as_array() else {
                return expect(out, "an array of tables");
            };
            for (i, item) in items.iter().enumerate() {
                check_value(&format!("{path}[{i}]"), item, Kind::Table(fields), out);
            }
        }
    }
}

fn check_table(prefix: &str, t: &Table, fields: &[Field], out: &mut Violations) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    for key in t.keys() {
        if !fields.iter().any(|f| f.key == key) {
            out.push(&join(key), "unknown key");
        }
    }
    for f in fields {
        match t.get(f.key) {
            Some(v) => check_value(&join(f.key), v, f.kind, out),
            None if f.required => out.push(&join(f.key), "missing required field"),
            None => {}
        }
    }
}

/// Command-specific settings with defaults applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Info(InfoParams),
    Wyner(WynerParams),
    RegionInner(InnerParams),
    RegionOuter(OuterParams),
    Frontier(FrontierParams),
    FmeVerify(FmeParams),
    Osrb(OsrbParams),
    Protocol(ProtocolParams),
    Sweep(SweepParams),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoParams {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WynerParams {
    pub w_cap: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub markov_tol: f64,
}

impl Default for WynerParams {
    fn default() -> Self {
        let d = coordinet::wyner::WynerConfig::default();
        Self {
            w_cap: d.w_cap,
            restarts: d.restarts,
            max_iters: d.max_iters,
            markov_tol: d.markov_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub rf1: f64,
    pub rb1: f64,
    pub rf2: f64,
    pub rb2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerParams {
    pub rf1: f64,
    pub rb1: f64,
    pub rf2: f64,
    pub rb2: f64,
    #[serde(default = "default_caps")]
    pub caps: Vec<usize>,
    #[serde(default = "default_inner_restarts")]
    pub restarts: usize,
    #[serde(default = "default_inner_iters")]
    pub max_iters: usize,
}

fn default_caps() -> Vec<usize> {
    let (u, v, w) = coordinet::region::InnerConfig::default().caps;
    vec![u, v, w]
}

fn default_inner_restarts() -> usize {
    coordinet::region::InnerConfig::default().restarts
}

fn default_inner_iters() -> usize {
    coordinet::region::InnerConfig::default().max_iters
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterParams {
    pub rf1: f64,
    pub rb1: f64,
    pub rf2: f64,
    pub rb2: f64,
    #[serde(default)]
    pub aux_cap: Option<usize>,
    #[serde(default = "default_outer_restarts")]
    pub restarts_per_alpha: usize,
    #[serde(default = "default_outer_refine")]
    pub refine_starts: usize,
}

fn default_outer_restarts() -> usize {
    coordinet::region::OuterConfig::default().restarts_per_alpha
}

fn default_outer_refine() -> usize {
    coordinet::region::OuterConfig::default().refine_starts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub axis: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierParams {
    pub fixed: std::collections::BTreeMap<String, f64>,
    pub grid: Vec<GridParams>,
    #[serde(default = "default_caps")]
    pub inner_caps: Vec<usize>,
    #[serde(default = "default_inner_restarts")]
    pub inner_restarts: usize,
    #[serde(default = "default_outer_refine")]
    pub outer_refine_starts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FmeParams {
    pub couplings: usize,
    pub samples: usize,
}

impl Default for FmeParams {
    fn default() -> Self {
        Self {
            couplings: 20,
            samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsrbParams {
    #[serde(default = "default_mode")]
    pub mode: String,
    pub components: Vec<Vec<String>>,
    #[serde(default)]
    pub side: Vec<String>,
    pub rates: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

fn default_mode() -> String {
    "uniformity".into()
}

fn default_seeds() -> usize {
    20
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tilde {
    pub rt0: f64,
    pub rt1: f64,
    pub rt2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub sequences: usize,
    pub outputs: usize,
    pub joint: usize,
}

impl Default for Caps {
    fn default() -> Self {
        let d = coordinet::osrb::ProtocolCaps::default();
        Self {
            sequences: d.sequences,
            outputs: d.outputs,
            joint: d.joint,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    #[serde(default = "default_coupling")]
    pub coupling: String,
    pub n: usize,
    pub rates: Rates,
    #[serde(default)]
    pub tilde: Tilde,
    #[serde(default)]
    pub caps: Caps,
}

fn default_coupling() -> String {
    "wyner".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    #[serde(default = "default_coupling")]
    pub coupling: String,
    pub n: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    pub rates: Rates,
    #[serde(default)]
    pub tilde: Tilde,
    #[serde(default)]
    pub caps: Caps,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub master_seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    /// As written in the file.
    pub source: String,
    pub target: JointPmf,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub parameters: Params,
    /// Directory relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// The effective configuration, with defaults applied, as TOML.
    pub fn echo(&self) -> String {
        let mut t = Table::new();
        t.insert("command".into(), Value::String(self.command.name().into()));
        let source = match self.base_dir.join(&self.source) {
            p if p.is_file() => std::path::absolute(&p).unwrap_or(p).display().to_string(),
            _ => self.source.clone(),
        };
        t.insert("source".into(), Value::String(source));
        t.insert("master_seed".into(), Value::Integer(self.master_seed as i64));
        t.insert("out_dir".into(), Value::String(self.out_dir.display().to_string()));
        t.insert("threads".into(), Value::Integer(self.threads as i64));
        let params = Value::try_from(&self.parameters).expect("parameters serialize");
        t.insert("parameters".into(), params);
        toml::to_string(&t).expect("table serializes")
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Load a builtin source or a pmf file.
pub fn load_source(spec: &str, base_dir: &Path) -> std::result::Result<JointPmf, String> {
    let path = base_dir.join(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        return read_pmf(&text).map_err(|e| format!("{}: {e}", path.display()));
    }
    sources::builtin(spec).map_err(|e| format!("not a file and not a builtin source ({e})"))
}

fn typed<T: DeserializeOwned>(t: Table, out: &mut Violations) -> Option<T> {
    match Value::Table(t).try_into() {
        Ok(p) => Some(p),
        Err(e) => {
            out.push("parameters", e.to_string().trim());
            None
        }
    }
}

fn check_semantics(p: &Params, out: &mut Violations) {
    const AXES: [&str; 4] = ["rf1", "rb1", "rf2", "rb2"];
    match p {
        Params::RegionInner(ip) => {
            if ip.caps.len() != 3 || ip.caps.contains(&0) {
                out.push("parameters.caps", "expected three positive sizes [|U|, |V|, |W|]");
            }
        }
        Params::Frontier(f) => {
            if f.fixed.len() != 2 {
                out.push("parameters.fixed", "exactly two rate components must be fixed");
            }
            if f.grid.len() != 2 {
                out.push("parameters.grid", "exactly two grid axes are required");
            }
            for (i, g) in f.grid.iter().enumerate() {
                let at = format!("parameters.grid[{i}]");
                if !AXES.contains(&g.axis.as_str()) {
                    out.push(&format!("{at}.axis"), format!("expected one of {}", AXES.join(", ")));
                }
                if f.fixed.contains_key(&g.axis) {
                    out.push(&format!("{at}.axis"), "also listed under `fixed`");
                }
                if g.lo < 0.0 || g.hi < g.lo || g.points == 0 {
                    out.push(&at, "needs 0 <= lo <= hi and points >= 1");
                }
            }
            if f.grid.len() == 2 && f.grid[0].axis == f.grid[1].axis {
                out.push("parameters.grid", "the two axes must differ");
            }
            if f.inner_caps.len() != 3 || f.inner_caps.contains(&0) {
                out.push("parameters.inner_caps", "expected three positive sizes [|U|, |V|, |W|]");
            }
        }
        Params::Osrb(o) => {
            if o.mode != "uniformity" && o.mode != "slepian-wolf" {
                out.push("parameters.mode", "expected `uniformity` or `slepian-wolf`");
            }
            if o.components.len() != o.rates.len() {
                out.push("parameters.rates", "need one rate per component");
            }
            if o.mode == "slepian-wolf" && o.components.len() != 1 {
                out.push(
                    "parameters.components",
                    "slepian-wolf mode decodes exactly one component",
                );
            }
            if o.rates.iter().any(|r| *r < 0.0) {
                out.push("parameters.rates", "rates must be nonnegative");
            }
            if o.n.is_empty() || o.n.contains(&0) {
                out.push("parameters.n", "block lengths must be positive");
            }
            if o.seeds == 0 {
                out.push("parameters.seeds", "at least one seed is required");
            }
        }
        Params::Protocol(pp) => {
            if pp.n == 0 {
                out.push("parameters.n", "block length must be positive");
            }
        }
        Params::Sweep(s) => {
            if s.n.is_empty() || s.n.contains(&0) {
                out.push("parameters.n", "block lengths must be positive");
            }
            if s.seeds == 0 {
                out.push("parameters.seeds", "at least one seed is required");
            }
        }
        _ => {}
    }
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, path, &base_dir, overrides)
}

pub fn parse_config_str(text: &str, path: &Path, base_dir: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
        path: path.to_path_buf(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        msg: e.message().to_string(),
    })?;

    let mut out = Violations::default();
    check_table("", &table, &TOP_FIELDS, &mut out);
    let command = match table.get("command").and_then(Value::as_str).map(Command::from_str) {
        Some(Ok(c)) => Some(c),
        Some(Err(e)) => {
            out.push("command", e);
            None
        }
        None => None,
    };
    let params_table = match table.get("parameters") {
        Some(Value::Table(t)) => t.clone(),
        _ => Table::new(),
    };
    if let Some(c) = command {
        check_table("parameters", &params_table, parameter_fields(c), &mut out);
    }
    let source = table
        .get("source")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let target = match table.get("source").and_then(Value::as_str) {
        Some(s) => match load_source(s, base_dir) {
            Ok(p) => Some(p),
            Err(e) => {
                out.push("source", e);
                None
            }
        },
        None => None,
    };
    // Typed parsing only runs on structurally valid input, so its messages
    // never duplicate the ones above.
    let parameters = match command {
        Some(c) if out.is_empty() => {
            let t = params_table;
            let p = match c {
                Command::Info => typed(t, &mut out).map(Params::Info),
                Command::Wyner => typed(t, &mut out).map(Params::Wyner),
                Command::RegionInner => typed(t, &mut out).map(Params::RegionInner),
                Command::RegionOuter => typed(t, &mut out).map(Params::RegionOuter),
                Command::Frontier => typed(t, &mut out).map(Params::Frontier),
                Command::FmeVerify => typed(t, &mut out).map(Params::FmeVerify),
                Command::Osrb => typed(t, &mut out).map(Params::Osrb),
                Command::Protocol => typed(t, &mut out).map(Params::Protocol),
                Command::Sweep => typed(t, &mut out).map(Params::Sweep),
            };
            if let Some(p) = &p {
                check_semantics(p, &mut out);
            }
            p
        }
        _ => None,
    };
    out.into_result()?;
    let command = command.expect("validated");

    let int = |k: &str| table.get(k).and_then(Value::as_integer).map(|i| i as u64);
    let out_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| match table.get("out_dir").and_then(Value::as_str) {
            Some(d) => base_dir.join(d),
            None => base_dir.join("runs").join(command.name()),
        });
    let out_dir = std::path::absolute(&out_dir).unwrap_or(out_dir);
    Ok(RunConfig {
        command,
        source,
        target: target.expect("validated"),
        master_seed: overrides.master_seed.or(int("master_seed")).unwrap_or(0),
        out_dir,
        threads: overrides.threads.or(int("threads").map(|t| t as usize)).unwrap_or(0),
        parameters: parameters.expect("validated"),
        base_dir: base_dir.to_path_buf(),
    })
}
