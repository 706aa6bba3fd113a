use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ofapi_core::attribution::to_bps;
use ofapi_core::baseline::{BaselineProvider, ReplayProvider, SyntheticProvider};
use ofapi_core::calibration::{fit_gas_bias, GasCalibration};
use ofapi_core::decimal::Dec;
use ofapi_core::ingest::{ingest_pool_snapshots, ingest_quotes, ingest_trades, Format};
use ofapi_core::model::TradeRecord;
use ofapi_core::pipeline::{calibration_pairs, evaluate_calibrated, Analysis, Component, Evaluation};
use ofapi_core::scenario::{generate, ScenarioSpec};
use ofapi_core::stats::{RollingPoint, WeightedEstimate};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Successful outcome; `Partial` maps to exit code 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Partial,
}

impl Status {
    fn from_partial(partial: bool) -> Self {
        if partial {
            Status::Partial
        } else {
            Status::Clean
        }
    }
}

fn header(hash: &str) -> String {
    format!("# ofapi {VERSION} config_hash={hash}\n")
}

fn provenance(hash: &str) -> Value {
    json!({ "tool": format!("ofapi {VERSION}"), "config_hash": hash })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

struct Inputs {
    trades: Vec<TradeRecord>,
    rejected_rows: usize,
    provider: Box<dyn BaselineProvider>,
    files: Vec<PathBuf>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let trades_path = cfg.trades.as_ref().context("--trades is required")?;
    let ingested = ingest_trades(open(trades_path)?, Format::from_path(trades_path), cfg.strict)
        .with_context(|| format!("reading trades {}", trades_path.display()))?;
    for r in &ingested.rejects {
        log::warn!("{}: {r}", trades_path.display());
    }
    let mut rejected_rows = ingested.rejects.len();
    if ingested.records.is_empty() {
        bail!("no valid trades in {}", trades_path.display());
    }
    let mut files = vec![trades_path.clone()];

    let provider: Box<dyn BaselineProvider> = match (&cfg.quotes, &cfg.pools) {
        (Some(q), None) => {
            let (set, rejects) = ingest_quotes(open(q)?, Format::from_path(q), cfg.strict)
                .with_context(|| format!("reading quotes {}", q.display()))?;
            for r in &rejects {
                log::warn!("{}: {r}", q.display());
            }
            rejected_rows += rejects.len();
            for key in set.orphans(&ingested.records) {
                log::warn!("quote for unknown trade {} at offset {}", key.trade_id, key.offset);
            }
            files.push(q.clone());
            Box::new(ReplayProvider::new(set, cfg.provider_id.as_deref())?)
        }
        (None, Some(p)) => {
            let (snaps, rejects) = ingest_pool_snapshots(open(p)?, Format::from_path(p), cfg.strict)
                .with_context(|| format!("reading pools {}", p.display()))?;
            for r in &rejects {
                log::warn!("{}: {r}", p.display());
            }
            rejected_rows += rejects.len();
            files.push(p.clone());
            let mut provider =
                SyntheticProvider::new(snaps, Dec::from_u128(cfg.f_prime_wei)).with_overhead(cfg.fixed_overhead_gas);
            if let Some(id) = &cfg.provider_id {
                provider = provider.with_id(id.clone());
            }
            Box::new(provider)
        }
        (Some(_), Some(_)) => bail!("configure exactly one provider source: --quotes or --pools, not both"),
        (None, None) => bail!("configure a provider source: --quotes or --pools"),
    };
    Ok(Inputs {
        trades: ingested.records,
        rejected_rows,
        provider,
        files,
    })
}

/// On-disk calibration report.
#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    beta1: f64,
    beta1_se: f64,
    n_points: usize,
    residual_mean: f64,
    residual_stddev: f64,
    #[serde(default)]
    provenance: Option<Value>,
}

impl CalibrationFile {
    fn calibration(&self) -> GasCalibration {
        GasCalibration {
            beta1: self.beta1,
            beta1_se: self.beta1_se,
            n_points: self.n_points,
            residual_mean: self.residual_mean,
            residual_stddev: self.residual_stddev,
        }
    }
}

fn load_calibration(cfg: &RunConfig, files: &mut Vec<PathBuf>) -> Result<Option<GasCalibration>> {
    if cfg.no_correction {
        return Ok(None);
    }
    let path = cfg.calibration_path();
    if !path.exists() {
        bail!(
            "calibration report {} not found; run `ofapi calibrate` first or pass --no-correction",
            path.display()
        );
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file: CalibrationFile =
        serde_json::from_str(&text).with_context(|| format!("parsing calibration {}", path.display()))?;
    let cal = file.calibration();
    if !(cal.beta1 > 0.0 && cal.beta1_se >= 0.0) {
        bail!("calibration {} has beta1 <= 0 or negative beta1_se", path.display());
    }
    files.push(path);
    Ok(Some(cal))
}

fn file_refs(files: &[PathBuf]) -> Vec<&Path> {
    files.iter().map(|p| p.as_path()).collect()
}

pub fn calibrate(cfg: &RunConfig) -> Result<Status> {
    let inputs = load_inputs(cfg)?;
    let hash = cfg.hash("calibrate", &file_refs(&inputs.files))?;
    let pairs = calibration_pairs(&inputs.trades, inputs.provider.as_ref(), &cfg.calibration_source);
    let cal = fit_gas_bias(&pairs).with_context(|| {
        format!(
            "fitting gas bias on {} trades with path {}",
            pairs.len(),
            cfg.calibration_source
        )
    })?;
    let mut report = serde_json::to_value(&cal)?;
    report["provenance"] = json!({
        "tool": format!("ofapi {VERSION}"),
        "config_hash": hash,
        "calibration_source": cfg.calibration_source.to_string(),
        "provider_id": inputs.provider.provider_id(),
    });
    let path = cfg.calibration_path();
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!(
        "beta1 = {} +/- {} from {} trades -> {}",
        cal.beta1,
        cal.beta1_se,
        cal.n_points,
        path.display()
    );
    Ok(Status::from_partial(inputs.rejected_rows > 0))
}

fn write_attribution(path: &Path, hash: &str, evals: &[Evaluation]) -> Result<usize> {
    let mut w = create(path)?;
    w.write_all(header(hash).as_bytes())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "trade_id",
        "offset",
        "pi_bps",
        "pi_routing_bps",
        "pi_gas_bps",
        "pi_fee_bps",
        "pi_remainder_bps",
        "excluded_flag",
        "exclusion_reason",
    ])?;
    let mut excluded = 0;
    for e in evals {
        let offset = e.offset.to_string();
        match &e.outcome {
            Ok(r) => {
                let [pi, routing, gas, fee, rem] = r.components().map(to_bps);
                csv.write_record([e.trade_id.as_str(), &offset, &pi, &routing, &gas, &fee, &rem, "0", ""])?;
            }
            Err(x) => {
                excluded += 1;
                csv.write_record([e.trade_id.as_str(), &offset, "", "", "", "", "", "1", x.as_str()])?;
            }
        }
    }
    csv.flush()?;
    Ok(excluded)
}

pub fn analyze(cfg: &RunConfig) -> Result<Status> {
    let mut inputs = load_inputs(cfg)?;
    let cal = load_calibration(cfg, &mut inputs.files)?;
    let hash = cfg.hash("analyze", &file_refs(&inputs.files))?;
    let f_prime = Dec::from_u128(cfg.f_prime_wei);
    let evals = evaluate_calibrated(&inputs.trades, inputs.provider.as_ref(), cal.as_ref(), &cfg.offsets(), &f_prime);
    let path = cfg.out.join("attribution.csv");
    let excluded = write_attribution(&path, &hash, &evals)?;
    println!(
        "{} rows ({} excluded) for {} trades -> {}",
        evals.len(),
        excluded,
        inputs.trades.len(),
        path.display()
    );
    Ok(Status::from_partial(excluded > 0 || inputs.rejected_rows > 0))
}

fn fmt_f(v: f64, dp: usize) -> String {
    let s = format!("{v:.dp$}");
    // avoid "-0.000000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn estimate_json(e: &WeightedEstimate) -> Value {
    json!({
        "mean_bps": e.mean,
        "stat_sigma_bps": e.stat_sigma,
        "sys_upper_bps": e.sys_upper,
        "sys_lower_bps": e.sys_lower,
        "band_upper_bps": e.band_upper(),
        "band_lower_bps": e.band_lower(),
        "n": e.n,
        "total_weight_usd": e.total_weight,
    })
}

pub struct Aggregated {
    pub status: Status,
    pub hash: String,
    pub curves: Vec<(String, i64, WeightedEstimate)>,
    pub decomposition: BTreeMap<String, BTreeMap<&'static str, WeightedEstimate>>,
    pub exclusions: BTreeMap<String, usize>,
    pub n_trades: usize,
    pub calibration: Option<GasCalibration>,
}

fn write_rolling(path: &Path, hash: &str, points: &[RollingPoint], window: usize) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(header(hash).as_bytes())?;
    writeln!(w, "median_usd,mean_bps,stat_sigma_bps,sys_upper_bps,sys_lower_bps,window_n")?;
    for p in points {
        let e = &p.estimate;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f(p.median_usd, 2),
            fmt_f(e.mean, 6),
            fmt_f(e.stat_sigma, 6),
            fmt_f(e.sys_upper, 6),
            fmt_f(e.sys_lower, 6),
            window
        )?;
    }
    w.flush()?;
    Ok(())
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

pub fn aggregate(cfg: &RunConfig) -> Result<Aggregated> {
    let mut inputs = load_inputs(cfg)?;
    let cal = load_calibration(cfg, &mut inputs.files)?;
    let hash = cfg.hash("aggregate", &file_refs(&inputs.files))?;

    let total = inputs.trades.len();
    let trades: Vec<TradeRecord> = inputs
        .trades
        .into_iter()
        .filter(|t| {
            let ok = t.usd_value.as_ref().is_some_and(|u| u.is_positive());
            if !ok {
                log::warn!("trade {} has no positive usd_value; left out of aggregates", t.trade_id);
            }
            ok
        })
        .collect();
    let without_usd = total - trades.len();
    if without_usd > 0 && cfg.strict {
        bail!("strict mode: {without_usd} trades lack a positive usd_value");
    }

    let f_prime = Dec::from_u128(cfg.f_prime_wei);
    let analysis = Analysis::run(
        &trades,
        inputs.provider.as_ref(),
        cal.as_ref(),
        cfg.sys_multiplier,
        &cfg.offsets(),
        &f_prime,
    );

    let mut curves = Vec::new();
    for offset in cfg.offsets() {
        if let Ok(all) = analysis.overall(&trades, offset, Component::Pi) {
            curves.push(("all".to_string(), offset, all));
        }
        for (label, est) in analysis.group_curves(&trades, offset, Component::Pi) {
            curves.push((label, offset, est));
        }
    }
    if curves.is_empty() {
        bail!("no group has at least 2 included trades with a USD size at any offset");
    }
    curves.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut w = create(&cfg.out.join("curves.csv"))?;
    w.write_all(header(&hash).as_bytes())?;
    writeln!(w, "group,offset,mean_bps,stat_sigma_bps,sys_upper_bps,sys_lower_bps,n,total_weight_usd")?;
    for (label, offset, e) in &curves {
        writeln!(
            w,
            "{label},{offset},{},{},{},{},{},{}",
            fmt_f(e.mean, 6),
            fmt_f(e.stat_sigma, 6),
            fmt_f(e.sys_upper, 6),
            fmt_f(e.sys_lower, 6),
            e.n,
            fmt_f(e.total_weight, 2)
        )?;
    }
    w.flush()?;

    // rolling series at the settlement offset (or the first configured one)
    let offsets = cfg.offsets();
    let roll_offset = if offsets.contains(&0) { 0 } else { offsets[0] };
    let mut series: Vec<(String, Box<dyn Fn(&TradeRecord) -> bool>)> = vec![("all".into(), Box::new(|_| true))];
    let mut labels: Vec<(String, String)> = Vec::new();
    for t in &trades {
        labels.push((format!("interface:{}", t.interface), t.interface.to_string()));
        labels.push((format!("path:{}", t.path), t.path.to_string()));
    }
    labels.sort();
    labels.dedup();
    for (label, _) in labels {
        let l = label.clone();
        series.push((
            label,
            Box::new(move |t: &TradeRecord| {
                l == format!("interface:{}", t.interface) || l == format!("path:{}", t.path)
            }),
        ));
    }
    for (label, filter) in &series {
        let n = analysis
            .observations(&trades, roll_offset, Component::Pi)
            .iter()
            .filter(|(t, _)| filter(t))
            .count();
        if n < 2 {
            log::warn!("rolling series {label}: {n} observations, skipped");
            continue;
        }
        let window = if cfg.window > n {
            log::warn!("rolling series {label}: window {} clamped to {n}", cfg.window);
            n
        } else {
            cfg.window
        };
        let points = analysis.rolling(&trades, roll_offset, window, cfg.stride, |t| filter(t))?;
        let name = if label == "all" {
            "rolling.csv".to_string()
        } else {
            format!("rolling_{}.csv", file_safe(label))
        };
        write_rolling(&cfg.out.join(name), &hash, &points, window)?;
    }

    // decomposition per group at the settlement offset
    let mut decomposition: BTreeMap<String, BTreeMap<&'static str, WeightedEstimate>> = BTreeMap::new();
    for c in Component::ALL {
        if let Ok(e) = analysis.overall(&trades, roll_offset, c) {
            decomposition.entry("all".into()).or_default().insert(c.name(), e);
        }
        for (label, e) in analysis.group_curves(&trades, roll_offset, c) {
            decomposition.entry(label).or_default().insert(c.name(), e);
        }
    }

    let exclusions = analysis.exclusion_counts();
    let summary = json!({
        "provenance": provenance(&hash),
        "n_trades": total,
        "n_rejected_rows": inputs.rejected_rows,
        "n_without_usd": without_usd,
        "exclusions": exclusions,
        "calibration": match &cal {
            Some(c) => json!({
                "beta1": c.beta1,
                "beta1_se": c.beta1_se,
                "sys_multiplier": cfg.sys_multiplier,
            }),
            None => Value::Null,
        },
        "decomposition_offset": roll_offset,
        "decomposition": decomposition
            .iter()
            .map(|(g, comps)| {
                let v: serde_json::Map<String, Value> =
                    comps.iter().map(|(k, e)| (k.to_string(), estimate_json(e))).collect();
                (g.clone(), Value::Object(v))
            })
            .collect::<serde_json::Map<String, Value>>(),
    });
    let mut w = create(&cfg.out.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let partial = !exclusions.is_empty() || inputs.rejected_rows > 0 || without_usd > 0;
    println!(
        "{} curve rows, {} groups decomposed -> {}",
        curves.len(),
        decomposition.len(),
        cfg.out.display()
    );
    Ok(Aggregated {
        status: Status::from_partial(partial),
        hash,
        curves,
        decomposition,
        exclusions,
        n_trades: total,
        calibration: cal,
    })
}

fn band(e: &WeightedEstimate) -> String {
    format!(
        "{} +{} / -{}",
        fmt_f(e.mean, 2),
        fmt_f(e.band_upper(), 2),
        fmt_f(e.band_lower(), 2)
    )
}

pub fn report(cfg: &RunConfig) -> Result<Status> {
    let agg = aggregate(cfg)?;
    let mut md = String::new();
    md.push_str(&format!("<!-- ofapi {VERSION} config_hash={} -->\n", agg.hash));
    md.push_str("# Price improvement report\n\n");
    md.push_str(&format!("Trades: {}\n\n", agg.n_trades));
    match &agg.calibration {
        Some(c) => md.push_str(&format!(
            "Gas calibration: beta1 = {:.6}, standard error {:.6}, systematic multiplier {}\n\n",
            c.beta1, c.beta1_se, cfg.sys_multiplier
        )),
        None => md.push_str("Gas calibration: not applied\n\n"),
    }
    md.push_str("All values in basis points, USD-weighted. Bands combine statistical and systematic uncertainty.\n\n");

    md.push_str("## Decomposition at settlement\n\n");
    md.push_str("| group | pi | routing | gas | fee | remainder | n |\n|---|---|---|---|---|---|---|\n");
    for (group, comps) in &agg.decomposition {
        let cell = |k: &str| comps.get(k).map(band).unwrap_or_else(|| "n/a".into());
        let n = comps.get("pi").map(|e| e.n).unwrap_or(0);
        md.push_str(&format!(
            "| {group} | {} | {} | {} | {} | {} | {n} |\n",
            cell("pi"),
            cell("pi_routing"),
            cell("pi_gas"),
            cell("pi_fee"),
            cell("pi_remainder")
        ));
    }

    md.push_str("\n## Offset curves\n\n| group | offset | mean | stat | sys+ | sys- | n |\n|---|---|---|---|---|---|---|\n");
    for (group, offset, e) in &agg.curves {
        md.push_str(&format!(
            "| {group} | {offset} | {} | {} | {} | {} | {} |\n",
            fmt_f(e.mean, 2),
            fmt_f(e.stat_sigma, 2),
            fmt_f(e.sys_upper, 2),
            fmt_f(e.sys_lower, 2),
            e.n
        ));
    }

    md.push_str("\n## Exclusions\n\n");
    if agg.exclusions.is_empty() {
        md.push_str("None.\n");
    } else {
        for (reason, n) in &agg.exclusions {
            md.push_str(&format!("- {reason}: {n}\n"));
        }
    }
    let path = cfg.out.join("report.md");
    let mut w = create(&path)?;
    w.write_all(md.as_bytes())?;
    w.flush()?;
    println!("report -> {}", path.display());
    Ok(agg.status)
}

pub fn synth(spec_path: &Path, out: &Path) -> Result<Status> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = ScenarioSpec::from_toml(&text)?;
    let scenario = generate(&spec)?;
    scenario.write(out)?;
    println!(
        "{} trades, {} snapshot offsets, {} quotes -> {}",
        scenario.trades.len(),
        scenario.snapshots.len(),
        scenario.quotes.len(),
        out.display()
    );
    Ok(Status::Clean)
}
