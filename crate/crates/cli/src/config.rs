//! Experiment configuration: flat typed keys in named blocks.
//!
//! The text is parsed as TOML, then every key is checked against the schema
//! below; all violations are reported together.

use std::fmt;
use std::path::PathBuf;

use burgulence::{BracketWindow, Dealias, DtPolicy, ForcingSpec, NoiseMode, SolverConfig};
use toml::{Table, Value};

use crate::registry;

/// Documented defaults; `show-defaults` prints this text verbatim.
pub const DEFAULTS: &str = r#"# burgulence experiment configuration (all keys optional except `experiment`)
experiment = "spectrum"      # see `burgulence list`
ensemble_size = 16           # independent noise paths
master_seed = 1              # path i uses seed hash(master_seed, i)
output_dir = "out"

[forcing]
uniform_modes = 4            # b_s = amplitude for 1 <= |s| <= uniform_modes (B0 = 8)
amplitude = 1.0
homogeneous = true
# [forcing.amplitudes]       # explicit b_s per mode; replaces uniform_modes
# 1 = 1.0
# -1 = 1.0

[solver]
nu = 0.05
n_modes = 256
dt = "adaptive"              # or a fixed step, e.g. 0.001
c_adv = 0.5                  # adaptive: h <= c_adv / (N |u|_inf)
min_step = 1e-7
max_step = 0.015625
noise_mode = "shared-increment"   # or "exact-ou"
dealias = "two-thirds"       # "exact" or "off"

[bracket]
t_start = 10.0
width = 10.0
sample_dt = 0.125
blocks = 4                   # time blocks per path for error bars

[sweep]
nus = [0.05, 0.025, 0.0125]

[structure]
l_count = 24                 # geometric increments on [1/N, 1/4]
ps = [0.5, 1.0, 2.0, 3.0, 4.0]

[fit]
layer = 2.0                  # spectrum layer parameter M
# spectrum = [10.0, 100.0]   # k range; default [10, 0.1/nu]
# structure = [0.005, 0.1]   # l range; default [5 nu, 0.1]
# four_fifths = [0.03, 0.05] # l range; default [sqrt(nu), 0.05]
breakpoint_threshold = 1.0

[kruzkov]
time = 1.0
ps = [1.0, 4.0]
nu_floor = 0.002             # smallest viscosity; others add dyadic gaps
levels = 4

[entropy]
tol = 0.01
nu_start = 0.008
nu_floor = 0.00025

[mixing]
horizon = 100.0
sample_dt = 0.0625
functional_dt = 1.0

[oleinik]
theta = 0.5
horizon = 4.0

[scaling]
mu = 2.0
horizon = 1.0
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Smoke,
    Full,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "smoke" => Some(Self::Smoke),
            "full" => Some(Self::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRanges {
    pub layer: f64,
    pub spectrum: Option<(f64, f64)>,
    pub structure: Option<(f64, f64)>,
    pub four_fifths: Option<(f64, f64)>,
    pub breakpoint_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub forcing: ForcingSpec,
    pub solver: SolverConfig<f64>,
    pub bracket: BracketWindow,
    pub sample_dt: f64,
    pub blocks: u32,
    pub sweep: Vec<f64>,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub l_count: usize,
    pub ps: Vec<f64>,
    pub fit: FitRanges,
    pub kruzkov_time: f64,
    pub kruzkov_ps: Vec<f64>,
    pub kruzkov_nu_floor: f64,
    pub kruzkov_levels: usize,
    pub entropy_tol: f64,
    pub entropy_nu_start: f64,
    pub entropy_nu_floor: f64,
    pub mixing_horizon: f64,
    pub mixing_sample_dt: f64,
    pub mixing_functional_dt: f64,
    pub oleinik_theta: f64,
    pub oleinik_horizon: f64,
    pub scaling_mu: f64,
    pub scaling_horizon: f64,
    /// Normalized echo of the effective configuration.
    pub echo: String,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Overrides applied after the file, in order: preset, then explicit flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["experiment", "ensemble_size", "master_seed", "output_dir"]),
    ("forcing", &["uniform_modes", "amplitude", "homogeneous", "amplitudes"]),
    ("solver", &["nu", "n_modes", "dt", "c_adv", "min_step", "max_step", "noise_mode", "dealias"]),
    ("bracket", &["t_start", "width", "sample_dt", "blocks"]),
    ("sweep", &["nus"]),
    ("structure", &["l_count", "ps"]),
    ("fit", &["layer", "spectrum", "structure", "four_fifths", "breakpoint_threshold"]),
    ("kruzkov", &["time", "ps", "nu_floor", "levels"]),
    ("entropy", &["tol", "nu_start", "nu_floor"]),
    ("mixing", &["horizon", "sample_dt", "functional_dt"]),
    ("oleinik", &["theta", "horizon"]),
    ("scaling", &["mu", "horizon"]),
];

/// Merged view of defaults and user text with typed getters that log errors.
struct Reader {
    defaults: Table,
    user: Table,
    errors: Vec<String>,
}

fn lookup<'a>(t: &'a Table, block: &str, key: &str) -> Option<&'a Value> {
    if block.is_empty() {
        t.get(key)
    } else {
        t.get(block).and_then(|b| b.as_table()).and_then(|b| b.get(key))
    }
}

fn kind(v: &Value) -> &'static str {
    v.type_str()
}

impl Reader {
    fn raw(&self, block: &str, key: &str) -> Option<&Value> {
        lookup(&self.user, block, key).or_else(|| lookup(&self.defaults, block, key))
    }

    fn name(block: &str, key: &str) -> String {
        if block.is_empty() {
            key.to_string()
        } else {
            format!("{block}.{key}")
        }
    }

    fn float(&mut self, block: &str, key: &str) -> f64 {
        match self.raw(block, key) {
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                let msg = format!("{} must be a number, got {}", Self::name(block, key), kind(v));
                self.errors.push(msg);
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    fn int(&mut self, block: &str, key: &str) -> i64 {
        match self.raw(block, key) {
            Some(Value::Integer(i)) => *i,
            Some(v) => {
                let msg = format!("{} must be an integer, got {}", Self::name(block, key), kind(v));
                self.errors.push(msg);
                0
            }
            None => 0,
        }
    }

    fn boolean(&mut self, block: &str, key: &str) -> bool {
        match self.raw(block, key) {
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                let msg = format!("{} must be true or false, got {}", Self::name(block, key), kind(v));
                self.errors.push(msg);
                false
            }
            None => false,
        }
    }

    fn string(&mut self, block: &str, key: &str) -> String {
        match self.raw(block, key) {
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                let msg = format!("{} must be a string, got {}", Self::name(block, key), kind(v));
                self.errors.push(msg);
                String::new()
            }
            None => String::new(),
        }
    }

    fn floats(&mut self, block: &str, key: &str) -> Vec<f64> {
        match self.raw(block, key) {
            Some(Value::Array(a)) => {
                let xs: Vec<Option<f64>> = a
                    .iter()
                    .map(|v| match v {
                        Value::Float(x) => Some(*x),
                        Value::Integer(i) => Some(*i as f64),
                        _ => None,
                    })
                    .collect();
                if xs.iter().any(Option::is_none) {
                    self.errors.push(format!("{} must be a list of numbers", Self::name(block, key)));
                }
                xs.into_iter().flatten().collect()
            }
            Some(v) => {
                let msg = format!("{} must be a list, got {}", Self::name(block, key), kind(v));
                self.errors.push(msg);
                Vec::new()
            }
            None => Vec::new(),
        }
    }

    fn range(&mut self, block: &str, key: &str) -> Option<(f64, f64)> {
        if lookup(&self.user, block, key).is_none() {
            return None;
        }
        let xs = self.floats(block, key);
        if xs.len() != 2 || !(xs[0] < xs[1]) || !(xs[0] >= 0.0) {
            self.errors.push(format!("{} must be [lo, hi] with 0 <= lo < hi", Self::name(block, key)));
            return None;
        }
        Some((xs[0], xs[1]))
    }

    fn require(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errors.push(msg.into());
        }
    }
}

fn check_keys(user: &Table, errors: &mut Vec<String>) {
    for (key, value) in user {
        match SCHEMA.iter().find(|(b, _)| *b == key.as_str()) {
            Some((block, keys)) if !block.is_empty() => match value.as_table() {
                Some(t) => {
                    for k in t.keys() {
                        if !keys.contains(&k.as_str()) {
                            errors.push(format!("unknown key {block}.{k}"));
                        }
                    }
                }
                None => errors.push(format!("{block} must be a block")),
            },
            _ => {
                if !SCHEMA[0].1.contains(&key.as_str()) {
                    errors.push(format!("unknown key {key}"));
                }
            }
        }
    }
}

fn forcing(r: &mut Reader) -> Option<ForcingSpec> {
    let homogeneous = r.boolean("forcing", "homogeneous");
    let explicit = lookup(&r.user, "forcing", "amplitudes").cloned();
    let result = match explicit {
        Some(Value::Table(t)) => {
            let mut pairs = Vec::new();
            for (k, v) in &t {
                let b = match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                };
                match (k.parse::<i64>(), b) {
                    (Ok(s), Some(b)) => pairs.push((s, b)),
                    _ => r.errors.push(format!("forcing.amplitudes.{k} must map an integer mode to a number")),
                }
            }
            ForcingSpec::new(pairs, homogeneous)
        }
        Some(_) => {
            r.errors.push("forcing.amplitudes must be a block of mode = amplitude".into());
            return None;
        }
        None => {
            let k = r.int("forcing", "uniform_modes");
            let b = r.float("forcing", "amplitude");
            if k < 1 {
                r.errors.push("forcing.uniform_modes must be >= 1".into());
                return None;
            }
            ForcingSpec::new((1..=k).flat_map(|s| [(s, b), (-s, b)]), homogeneous)
        }
    };
    match result {
        Ok(f) => Some(f),
        Err(e) => {
            r.errors.push(format!("forcing: {e}"));
            None
        }
    }
}

fn solver(r: &mut Reader) -> SolverConfig<f64> {
    let nu = r.float("solver", "nu");
    let n = r.int("solver", "n_modes");
    r.require(n >= 1, "solver.n_modes must be >= 1");
    let mut cfg = SolverConfig::new(nu, n.max(1) as usize);
    let dt = match r.raw("solver", "dt").cloned() {
        Some(Value::String(s)) if s == "adaptive" => {
            let c_adv = r.float("solver", "c_adv");
            let min_step = r.float("solver", "min_step");
            let max_step = r.float("solver", "max_step");
            DtPolicy::Adaptive { c_adv, min_step, max_step }
        }
        Some(Value::Float(h)) => DtPolicy::Fixed(h),
        Some(Value::Integer(h)) => DtPolicy::Fixed(h as f64),
        _ => {
            r.errors.push("solver.dt must be \"adaptive\" or a step size".into());
            cfg.dt
        }
    };
    cfg = cfg.with_dt(dt);
    let mode = r.string("solver", "noise_mode");
    match NoiseMode::parse(&mode) {
        Some(m) => cfg = cfg.with_noise_mode(m),
        None => r.errors.push(format!("solver.noise_mode {mode:?} is not shared-increment or exact-ou")),
    }
    let dealias = r.string("solver", "dealias");
    match Dealias::parse(&dealias) {
        Some(d) => cfg = cfg.with_dealias(d),
        None => r.errors.push(format!("solver.dealias {dealias:?} is not two-thirds, exact or off")),
    }
    if let Err(e) = cfg.validate() {
        r.errors.push(format!("solver: {e}"));
    }
    cfg
}

fn apply_preset(user: &mut Table, preset: Preset) {
    let (n, ensemble, t_start, width) = match preset {
        Preset::Smoke => (256, 16, 10.0, 10.0),
        Preset::Full => (2048, 128, 80.0, 10.0),
    };
    let block = |user: &mut Table, name: &str| -> Table { user.remove(name).and_then(|v| v.as_table().cloned()).unwrap_or_default() };
    let mut solver = block(user, "solver");
    solver.insert("n_modes".into(), Value::Integer(n));
    user.insert("solver".into(), Value::Table(solver));
    let mut bracket = block(user, "bracket");
    bracket.insert("t_start".into(), Value::Float(t_start));
    bracket.insert("width".into(), Value::Float(width));
    user.insert("bracket".into(), Value::Table(bracket));
    user.insert("ensemble_size".into(), Value::Integer(ensemble));
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let defaults: Table = DEFAULTS.parse().expect("default configuration parses");
    let mut user: Table = text.parse().map_err(|e: toml::de::Error| ConfigError(vec![format!("syntax: {}", e.message())]))?;
    let mut errors = Vec::new();
    check_keys(&user, &mut errors);
    if !user.contains_key("experiment") {
        errors.push("missing key experiment".into());
    }
    if let Some(p) = overrides.preset {
        apply_preset(&mut user, p);
    }
    if let Some(seed) = overrides.seed {
        user.insert("master_seed".into(), Value::Integer(seed as i64));
    }
    if let Some(dir) = &overrides.output_dir {
        user.insert("output_dir".into(), Value::String(dir.display().to_string()));
    }
    let mut r = Reader { defaults, user, errors };

    let experiment = r.string("", "experiment");
    if r.user.contains_key("experiment") && registry::find(&experiment).is_none() {
        let names: Vec<&str> = registry::REGISTRY.iter().map(|e| e.name).collect();
        r.errors.push(format!("unknown experiment {experiment:?}; the registry has: {}", names.join(", ")));
    }
    let ensemble_size = r.int("", "ensemble_size");
    r.require(ensemble_size >= 1, "ensemble_size must be >= 1");
    let master_seed = r.int("", "master_seed");
    let output_dir = PathBuf::from(r.string("", "output_dir"));

    let forcing = forcing(&mut r);
    let solver = solver(&mut r);

    let t_start = r.float("bracket", "t_start");
    let width = r.float("bracket", "width");
    let bracket = BracketWindow::new(t_start, width).map_err(|e| r.errors.push(format!("bracket: {e}"))).ok();
    let sample_dt = r.float("bracket", "sample_dt");
    r.require(sample_dt > 0.0, "bracket.sample_dt must be positive");
    let blocks = r.int("bracket", "blocks");
    r.require(blocks >= 1, "bracket.blocks must be >= 1");

    let sweep = r.floats("sweep", "nus");
    r.require(!sweep.is_empty() && sweep.iter().all(|n| *n > 0.0 && *n <= 1.0), "sweep.nus must be a nonempty list in (0, 1]");

    let l_count = r.int("structure", "l_count");
    r.require(l_count >= 4, "structure.l_count must be >= 4");
    let ps = r.floats("structure", "ps");
    r.require(!ps.is_empty() && ps.iter().all(|p| *p > 0.0), "structure.ps must be positive");

    let fit = FitRanges {
        layer: r.float("fit", "layer"),
        spectrum: r.range("fit", "spectrum"),
        structure: r.range("fit", "structure"),
        four_fifths: r.range("fit", "four_fifths"),
        breakpoint_threshold: r.float("fit", "breakpoint_threshold"),
    };
    r.require(fit.layer > 1.0, "fit.layer must exceed 1");
    r.require(fit.breakpoint_threshold > 0.0, "fit.breakpoint_threshold must be positive");

    let kruzkov_time = r.float("kruzkov", "time");
    let kruzkov_ps = r.floats("kruzkov", "ps");
    let kruzkov_nu_floor = r.float("kruzkov", "nu_floor");
    let kruzkov_levels = r.int("kruzkov", "levels");
    r.require(kruzkov_time > 0.0, "kruzkov.time must be positive");
    r.require(!kruzkov_ps.is_empty() && kruzkov_ps.iter().all(|p| *p >= 1.0), "kruzkov.ps must be >= 1");
    r.require(kruzkov_nu_floor > 0.0, "kruzkov.nu_floor must be positive");
    r.require(kruzkov_levels >= 3, "kruzkov.levels must be >= 3");

    let entropy_tol = r.float("entropy", "tol");
    let entropy_nu_start = r.float("entropy", "nu_start");
    let entropy_nu_floor = r.float("entropy", "nu_floor");
    r.require(entropy_tol > 0.0, "entropy.tol must be positive");
    r.require(entropy_nu_start > entropy_nu_floor && entropy_nu_floor > 0.0 && entropy_nu_start <= 1.0, "entropy needs 0 < nu_floor < nu_start <= 1");

    let mixing_horizon = r.float("mixing", "horizon");
    let mixing_sample_dt = r.float("mixing", "sample_dt");
    let mixing_functional_dt = r.float("mixing", "functional_dt");
    r.require(mixing_horizon > 0.0 && mixing_sample_dt > 0.0 && mixing_functional_dt >= mixing_sample_dt, "mixing needs positive horizon and sample_dt <= functional_dt");

    let oleinik_theta = r.float("oleinik", "theta");
    let oleinik_horizon = r.float("oleinik", "horizon");
    r.require(oleinik_theta > 0.0 && oleinik_horizon > oleinik_theta, "oleinik needs 0 < theta < horizon");
    let scaling_mu = r.float("scaling", "mu");
    let scaling_horizon = r.float("scaling", "horizon");
    r.require(scaling_mu > 0.0 && scaling_horizon > 0.0, "scaling needs positive mu and horizon");

    if !r.errors.is_empty() {
        return Err(ConfigError(r.errors));
    }
    let mut merged = r.defaults.clone();
    for (k, v) in &r.user {
        match (merged.get_mut(k), v) {
            (Some(Value::Table(d)), Value::Table(u)) => {
                for (kk, vv) in u {
                    d.insert(kk.clone(), vv.clone());
                }
            }
            _ => {
                merged.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(ExperimentConfig {
        experiment,
        forcing: forcing.expect("checked"),
        solver,
        bracket: bracket.expect("checked"),
        sample_dt,
        blocks: blocks as u32,
        sweep,
        ensemble_size: ensemble_size as usize,
        master_seed: master_seed as u64,
        output_dir,
        l_count: l_count as usize,
        ps,
        fit,
        kruzkov_time,
        kruzkov_ps,
        kruzkov_nu_floor,
        kruzkov_levels: kruzkov_levels as usize,
        entropy_tol,
        entropy_nu_start,
        entropy_nu_floor,
        mixing_horizon,
        mixing_sample_dt,
        mixing_functional_dt,
        oleinik_theta,
        oleinik_horizon,
        scaling_mu,
        scaling_horizon,
        echo: toml::to_string(&merged).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text, &Overrides::default())
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("experiment = \"spectrum\"").unwrap();
        assert_eq!(c.forcing.moment(0), 8.0);
        assert_eq!(c.ensemble_size, 16);
        assert_eq!(c.solver.n_modes, 256);
        assert_eq!(c.bracket, BracketWindow::new(10.0, 10.0).unwrap());
    }

    #[test]
    fn zero_forcing_is_rejected() {
        let e = parse("experiment = \"spectrum\"\n[forcing]\namplitude = 0.0\n").unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("B₀")), "{e}");
        let e = parse("experiment = \"spectrum\"\n[forcing.amplitudes]\n1 = 0.0\n-1 = 0\n").unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("B₀")), "{e}");
    }

    #[test]
    fn unknown_experiment_names_registry() {
        let e = parse("experiment = \"vorticity\"").unwrap_err();
        assert!(e.0[0].contains("four-fifths") && e.0[0].contains("spectrum"), "{e}");
    }

    #[test]
    fn all_violations_are_listed() {
        let e = parse("experiment = \"spectrum\"\nensemble_size = 0\ncolour = 1\n[solver]\nnu = -1.0\nwarp = 2\n[bracket]\nt_start = 0.5\n").unwrap_err();
        let text = e.to_string();
        for needle in ["ensemble_size", "unknown key colour", "unknown key solver.warp", "viscosity", "bracket start"] {
            assert!(text.contains(needle), "missing {needle}: {text}");
        }
        assert!(parse("ensemble_size = 3").unwrap_err().0.iter().any(|m| m.contains("missing key experiment")));
        assert!(parse("experiment = ").is_err());
    }

    #[test]
    fn explicit_amplitudes_and_fixed_step() {
        let c = parse("experiment = \"structure\"\n[forcing]\nhomogeneous = false\n[forcing.amplitudes]\n1 = 2.0\n-3 = 1.0\n[solver]\ndt = 0.001\n").unwrap();
        assert_eq!(c.forcing.moment(0), 5.0);
        assert_eq!(c.solver.dt, DtPolicy::Fixed(0.001));
    }

    #[test]
    fn preset_and_flags_override_file() {
        let o = Overrides { preset: Some(Preset::Full), seed: Some(99), output_dir: Some("elsewhere".into()) };
        let c = parse_config("experiment = \"spectrum\"\nmaster_seed = 3\n[solver]\nn_modes = 64\n", &o).unwrap();
        assert_eq!(c.solver.n_modes, 2048);
        assert_eq!(c.ensemble_size, 128);
        assert_eq!(c.bracket.t_start, 80.0);
        assert_eq!(c.master_seed, 99);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert!(c.echo.contains("n_modes = 2048"));
    }

    #[test]
    fn defaults_text_is_a_valid_config() {
        assert!(parse(DEFAULTS).is_ok());
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../../../configs/spectrum.toml"),
            include_str!("../../../configs/four-fifths.toml"),
            include_str!("../../../configs/kruzkov.toml"),
            include_str!("../../../configs/mixing.toml"),
        ] {
            if let Err(e) = parse(text) {
                panic!("{e}\n{text}");
            }
        }
    }
}
