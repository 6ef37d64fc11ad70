//! Run settings: a parameter table per subcommand, a flat `key = value`
//! config file with optional `[subcommand]` sections, and the resolution
//! order flag > section > top-level > environment > built-in default.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::experiments::{DEFAULT_N, DEFAULT_P, DEFAULT_THRESHOLD_QUANTILE, SPATIAL_N};

pub const OUT_ENV: &str = "MORPHO_LEAKAGE_OUT";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COMMANDS: [&str; 9] = ["simulate", "gpa", "align", "loo", "contamination", "grid", "sensitivity", "spatial", "pca-null"];

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub key: &'static str,
    pub default: String,
    pub help: &'static str,
    /// Where the default comes from, shown in `--help`.
    pub source: &'static str,
}

const PUBLISHED: &str = "published setup";
const CHOSEN: &str = "implementation default";

fn param(key: &'static str, default: impl ToString, help: &'static str, source: &'static str) -> Param {
    Param { key, default: default.to_string(), help, source }
}

fn common() -> Vec<Param> {
    vec![
        param("seed", 42, "master seed; every random stream derives from it", CHOSEN),
        param("out", "results", "output directory (environment override: MORPHO_LEAKAGE_OUT)", CHOSEN),
        param("threads", 0, "worker threads, 0 = all cores", CHOSEN),
    ]
}

fn sim(n: usize, p: usize) -> Vec<Param> {
    vec![
        param("n", n, "specimens per sample", CHOSEN),
        param("p", p, "landmarks per specimen", CHOSEN),
        param("k", 2, "dimension, 2 or 3", PUBLISHED),
        param("sigma", 0.5f64.sqrt(), "landmark noise SD (sigma^2 = 0.5)", PUBLISHED),
        param("shear_range", "-0.75,0.75", "symmetric shear interval", PUBLISHED),
        param("shear_noise_sd", 0.05, "SD of the noise added to the shear sequence", CHOSEN),
        param("rho", 4, "size exponent in s = z^rho + delta", PUBLISHED),
        param("size_noise_sd", 0.1, "SD of delta in s = z^rho + delta", CHOSEN),
        param("z_range", "1,2", "interval spanned by the ordering variable z", CHOSEN),
    ]
}

fn gpa_opts() -> Vec<Param> {
    vec![
        param("robust", false, "median centering and median reference", CHOSEN),
        param("scale", true, "scale to unit centroid size (shape analysis)", PUBLISHED),
        param("tol", 1e-10, "stop when the objective changes by less than this", CHOSEN),
        param("max_iter", 200, "iteration cap", CHOSEN),
    ]
}

fn grid_axes() -> Vec<Param> {
    vec![
        param("n_values", "20:200:20", "sample sizes (list or start:stop:step)", CHOSEN),
        param("p_values", "4:64:4", "landmark counts (list or start:stop:step)", CHOSEN),
        param("replicates", 20, "replicates per cell", CHOSEN),
        param("threshold_quantile", DEFAULT_THRESHOLD_QUANTILE, "within-grid RMSE quantile separating stable cells", CHOSEN),
    ]
}

fn training() -> Vec<Param> {
    vec![
        param("epochs", 100, "training epochs", PUBLISHED),
        param("batch_size", 63, "mini-batch size", PUBLISHED),
        param("learning_rate", 1e-3, "Adam step size", CHOSEN),
        param("adam_beta1", 0.9, "Adam first-moment decay", CHOSEN),
        param("adam_beta2", 0.999, "Adam second-moment decay", CHOSEN),
        param("adam_eps", 1e-8, "Adam denominator offset", CHOSEN),
        param("channels", 4, "convolution output channels", CHOSEN),
        param("kernel_span", 0, "landmarks covered by the kernel, 0 = all", PUBLISHED),
    ]
}

/// Parameters accepted by `command`, in display order.
pub fn params_for(command: &str) -> Result<Vec<Param>> {
    let mut v = common();
    match command {
        "simulate" => v.extend(sim(DEFAULT_N, DEFAULT_P)),
        "gpa" => {
            v.push(param("input", "", "landmark file to align", CHOSEN));
            v.extend(gpa_opts());
        }
        "align" => {
            v.push(param("input", "", "landmark file to split and align", CHOSEN));
            v.push(param("train_frac", 0.7, "training share of the split", PUBLISHED));
            v.extend(gpa_opts());
        }
        "loo" => {
            v.extend(sim(DEFAULT_N, DEFAULT_P).into_iter().filter(|p| p.key != "n"));
            v.push(param("sizes", "10,200", "sample sizes to compare", CHOSEN));
            v.push(param("replicates", 100, "replicates per size", CHOSEN));
            v.push(param("boot_reps", 1000, "bootstrap resamples", PUBLISHED));
        }
        "contamination" => {
            v.extend(sim(DEFAULT_N, DEFAULT_P));
            v.push(param("replicates", 200, "replicates", CHOSEN));
            v.push(param("boot_reps", 1000, "bootstrap resamples", PUBLISHED));
        }
        "grid" => {
            v.extend(sim(DEFAULT_N, DEFAULT_P).into_iter().filter(|p| p.key != "n" && p.key != "p"));
            v.extend(grid_axes());
        }
        "sensitivity" => {
            v.push(param("k", 2, "dimension, 2 or 3", PUBLISHED));
            v.extend(grid_axes());
        }
        "spatial" => {
            v.extend(sim(SPATIAL_N, DEFAULT_P));
            v.push(param("replicates", 300, "paired replicates", PUBLISHED));
            v.push(param("boot_reps", 1000, "bootstrap resamples", PUBLISHED));
            v.extend(training());
        }
        "pca-null" => {
            v.push(param("p_values", "5,8,60", "landmark counts", CHOSEN));
            v.push(param("k_values", "2,3", "dimensions", PUBLISHED));
            v.push(param("n_multiplier", 100, "sample size as a multiple of the tangent dimension", PUBLISHED));
            v.push(param("alpha_values", "1", "retained components as a multiple of p", PUBLISHED));
        }
        other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
    Ok(v)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub top: Vec<(String, String, usize)>,
    pub sections: BTreeMap<String, Vec<(String, String, usize)>>,
}

/// Parses `key = value` lines, `[section]` headers and `#` comments.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut file = ConfigFile::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !COMMANDS.contains(&name) {
                return Err(Error::Config(format!("unknown section `[{name}]` at line {lineno}")));
            }
            current = Some(name.to_string());
            file.sections.entry(name.to_string()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
        let entry = (key.trim().to_string(), value.trim().to_string(), lineno);
        match &current {
            Some(s) => file.sections.get_mut(s).expect("section registered").push(entry),
            None => file.top.push(entry),
        }
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
    keys: Vec<&'static str>,
}

impl Settings {
    /// `flags` holds only values given explicitly on the command line.
    pub fn resolve(command: &str, file: Option<&ConfigFile>, flags: &BTreeMap<String, String>) -> Result<Self> {
        let params = params_for(command)?;
        let known = |k: &str| params.iter().any(|p| p.key == k);
        let mut values: BTreeMap<String, String> = params.iter().map(|p| (p.key.to_string(), p.default.clone())).collect();
        if let Ok(dir) = std::env::var(OUT_ENV) {
            if !dir.is_empty() {
                values.insert("out".into(), dir);
            }
        }
        if let Some(file) = file {
            for (key, value, line) in &file.top {
                let anywhere = COMMANDS.iter().any(|c| params_for(c).map(|ps| ps.iter().any(|p| p.key == key)).unwrap_or(false));
                if !anywhere {
                    return Err(Error::Config(format!("unknown key `{key}` in config file (line {line})")));
                }
                if known(key) {
                    values.insert(key.clone(), value.clone());
                }
            }
            for (section, entries) in &file.sections {
                let section_params = params_for(section)?;
                for (key, value, line) in entries {
                    if !section_params.iter().any(|p| p.key == key) {
                        return Err(Error::Config(format!("unknown key `{key}` in section [{section}] (line {line})")));
                    }
                    if section == command {
                        values.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        for (key, value) in flags {
            if !known(key) {
                return Err(Error::Config(format!("unknown option `{key}` for `{command}`")));
            }
            values.insert(key.clone(), value.clone());
        }
        Ok(Self { command: command.to_string(), values, keys: params.iter().map(|p| p.key).collect() })
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(String::as_str).ok_or_else(|| Error::Config(format!("`{key}` is not a parameter of `{}`", self.command)))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key)?;
        raw.parse().map_err(|e| Error::Config(format!("`{key} = {raw}`: {e}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse(key)
    }

    /// Comma list, or `start:stop:step` inclusive.
    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.get(key)?;
        let bad = |msg: String| Error::Config(format!("`{key} = {raw}`: {msg}"));
        let list: Vec<usize> = if raw.contains(':') {
            let parts: Vec<usize> = raw
                .split(':')
                .map(|t| t.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                .collect::<Result<_>>()?;
            match parts[..] {
                [start, stop, step] if step > 0 && start <= stop => (start..=stop).step_by(step).collect(),
                _ => return Err(bad("expected start:stop:step with step > 0".into())),
            }
        } else {
            raw.split(',').map(|t| t.trim().parse::<usize>().map_err(|e| bad(e.to_string()))).collect::<Result<_>>()?
        };
        if list.is_empty() {
            return Err(bad("empty list".into()));
        }
        Ok(list)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.get(key)?;
        raw.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("`{key} = {raw}`: {e}"))))
            .collect()
    }

    pub fn pair(&self, key: &str) -> Result<(f64, f64)> {
        match self.f64_list(key)?[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Config(format!("`{key}` needs two comma-separated values"))),
        }
    }

    /// A config file that re-runs this exact invocation.
    pub fn manifest(&self) -> String {
        let mut out = format!(
            "# morpho-leakage {VERSION} run manifest\n# re-run: morpho-leakage {} --config <this file>\n[{}]\n",
            self.command, self.command
        );
        for key in &self.keys {
            out.push_str(&format!("{key} = {}\n", self.values[*key]));
        }
        out
    }
}
