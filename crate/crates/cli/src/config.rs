use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use ofapi_core::model::SettlementPath;

/// Flat `key = value` configuration; CLI flags override file values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trades: Option<PathBuf>,
    pub quotes: Option<PathBuf>,
    pub pools: Option<PathBuf>,
    pub provider_id: Option<String>,
    pub calibration: Option<PathBuf>,
    pub out: PathBuf,
    pub offsets: (i64, i64),
    pub f_prime_wei: u128,
    pub window: usize,
    pub stride: usize,
    pub strict: bool,
    pub no_correction: bool,
    pub sys_multiplier: f64,
    pub calibration_source: SettlementPath,
    pub fixed_overhead_gas: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trades: None,
            quotes: None,
            pools: None,
            provider_id: None,
            calibration: None,
            out: PathBuf::from("out"),
            offsets: (-4, 3),
            f_prime_wei: 100_000_000,
            window: 200,
            stride: 1,
            strict: false,
            no_correction: false,
            sys_multiplier: 1.0,
            calibration_source: SettlementPath::Classic,
            fixed_overhead_gas: ofapi_core::baseline::DEFAULT_FIXED_OVERHEAD_GAS,
        }
    }
}

pub fn parse_offsets(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("offsets must look like a..b, got {s:?}"))?;
    let a: i64 = a.trim().parse().with_context(|| format!("bad offset range start in {s:?}"))?;
    let b: i64 = b.trim().parse().with_context(|| format!("bad offset range end in {s:?}"))?;
    if a > b {
        bail!("empty offset range {s:?}");
    }
    Ok((a, b))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: expected a boolean, got {v:?}"),
    }
}

/// Reads `key = value` lines; `#` starts a comment line.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), n + 1))?;
        let v = v.trim().trim_matches('"');
        map.insert(k.trim().to_string(), v.to_string());
    }
    Ok(map)
}

impl RunConfig {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "trades" => self.trades = Some(v.into()),
            "quotes" => self.quotes = Some(v.into()),
            "pools" => self.pools = Some(v.into()),
            "provider_id" => self.provider_id = Some(v.into()),
            "calibration" => self.calibration = Some(v.into()),
            "out" => self.out = v.into(),
            "offsets" => self.offsets = parse_offsets(v)?,
            "f_prime_wei" => self.f_prime_wei = v.parse().with_context(|| format!("f_prime_wei: {v:?}"))?,
            "window" => self.window = v.parse().with_context(|| format!("window: {v:?}"))?,
            "stride" => self.stride = v.parse().with_context(|| format!("stride: {v:?}"))?,
            "strict" => self.strict = parse_bool(key, v)?,
            "no_correction" => self.no_correction = parse_bool(key, v)?,
            "sys_multiplier" => self.sys_multiplier = v.parse().with_context(|| format!("sys_multiplier: {v:?}"))?,
            "calibration_source" => self.calibration_source = SettlementPath::parse(v),
            "fixed_overhead_gas" => {
                self.fixed_overhead_gas = v.parse().with_context(|| format!("fixed_overhead_gas: {v:?}"))?
            }
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sys_multiplier >= 0.0 && self.sys_multiplier.is_finite()) {
            bail!("sys_multiplier must be a nonnegative number");
        }
        if self.stride == 0 {
            bail!("stride must be positive");
        }
        Ok(())
    }

    pub fn offsets(&self) -> Vec<i64> {
        (self.offsets.0..=self.offsets.1).collect()
    }

    pub fn calibration_path(&self) -> PathBuf {
        self.calibration.clone().unwrap_or_else(|| self.out.join("calibration.json"))
    }

    /// Parameters that influence results, in a fixed order. Paths are left
    /// out so that relocating inputs or outputs does not change the hash.
    fn canonical_params(&self) -> String {
        format!(
            "provider_id={}\noffsets={}..{}\nf_prime_wei={}\nwindow={}\nstride={}\nstrict={}\nno_correction={}\nsys_multiplier={}\ncalibration_source={}\nfixed_overhead_gas={}\n",
            self.provider_id.as_deref().unwrap_or(""),
            self.offsets.0,
            self.offsets.1,
            self.f_prime_wei,
            self.window,
            self.stride,
            self.strict,
            self.no_correction,
            self.sys_multiplier,
            self.calibration_source,
            self.fixed_overhead_gas,
        )
    }

    /// SHA-256 over the canonical parameters and the bytes of every input
    /// file the command reads.
    pub fn hash(&self, command: &str, inputs: &[&Path]) -> Result<String> {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical_params().as_bytes());
        for p in inputs {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(format!("{:x}", h.finalize()))
    }
}
