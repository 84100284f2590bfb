use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use camsim::config::RunConfig;
use camsim::encode::CategoricalDataset;
use camsim::experiments::{
    calibrate_energy, calibrate_skew, dataset_search_experiment, fixed_radius_experiment,
    recsys_experiment, sweep_columns, synthesize_embeddings, synthesize_housing_csv,
    variation_experiment, DatasetSource, ExperimentSpec, MetricsReport, RecsysSpec, SkewMechanism,
    SweepColumn,
};
use camsim::io::{read_bit_vectors, read_embeddings, read_instances};
use camsim::metrics::{fit_separation_curve, MddTable};
use camsim::report::{
    metrics_table, points_csv, recsys_table, variation_table, CalibrationProvenance, Report,
};
use camsim::techmodel::{builtin_profile_text, BUILTIN_PROFILES};
use camsim::{
    separation_curve, ArrayConfig, ClockPolicy, Error, MitigationConfig, Result, TechProfile,
};
use serde::Serialize;

use crate::{CalibrateTarget, Cli, Command, GlobalArgs};

/// Collects command-line flags as configuration overrides so that every run
/// resolves through [`RunConfig`].
struct Overrides(Vec<String>);

impl Overrides {
    fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            let text = serde_json::to_string(&v).expect("flag values serialize");
            self.0.push(format!("{key}={text}"));
        }
    }

    fn list<T: Serialize>(&mut self, key: &str, values: &[T]) {
        if !values.is_empty() {
            self.set(key, Some(values));
        }
    }
}

fn resolve(global: &GlobalArgs, extra: Overrides) -> Result<RunConfig> {
    let mut all = global.overrides.clone();
    all.extend(extra.0);
    if let Some(seed) = global.seed {
        all.push(format!("seed={seed}"));
    }
    RunConfig::load(global.config.as_deref(), &all)
}

fn emit<T: Serialize>(
    global: &GlobalArgs,
    command: &str,
    config: &RunConfig,
    profiles: &[&TechProfile],
    results: &T,
) -> Result<()> {
    let Some(path) = &global.out else {
        return Ok(());
    };
    let report = Report::new(
        command,
        serde_json::to_value(config).expect("configs serialize"),
        profiles
            .iter()
            .map(|p| CalibrationProvenance::from(*p))
            .collect(),
        serde_json::to_value(results).expect("results serialize"),
    );
    std::fs::write(path, report.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::config("threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Profiles { dump } => profiles(dump.as_deref()),
        Command::Search(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.set("array.rows", a.rows);
            o.set("array.cols", a.cols);
            o.set("array.mitigation", a.mitigation.as_ref());
            o.set("search.limit", a.limit);
            o.set("search.clock", a.clock.as_ref());
            o.set("search.queries", a.queries);
            o.set("search.items", a.items);
            o.set("search.data", a.data.as_ref());
            o.set("search.queries_file", a.queries_file.as_ref());
            o.set("variation.sigma", a.sigma);
            o.set("variation.trials", a.trials);
            search(g, &resolve(g, o)?, a.outcomes.clone())
        }
        Command::Mdd(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.set("array.rows", a.rows);
            o.set("array.cols", a.cols);
            o.set("array.mitigation", a.mitigation.as_ref());
            o.set("mdd.hmax", a.hmax);
            mdd(g, &resolve(g, o)?)
        }
        Command::Curve(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.set("array.cols", a.cols);
            o.set("curve.nmax", a.nmax);
            o.set("curve.hdist", a.hdist);
            o.list("sweep.rows", &a.rows);
            curve(g, &resolve(g, o)?, a.skew)
        }
        Command::Sweep(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.list("sweep.rows", &a.rows);
            o.list("sweep.mitigations", &a.mitigations);
            o.set("array.cols", a.cols);
            o.set("search.limit", a.limit);
            o.set("search.queries", a.queries);
            o.set("search.items", a.items);
            o.set("variation.sigma", a.sigma);
            o.set("variation.trials", a.trials);
            sweep(g, &resolve(g, o)?)
        }
        Command::Dataset(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.set("dataset.path", a.csv.as_ref());
            o.list("sweep.rows", &a.rows);
            o.list("sweep.mitigations", &a.mitigations);
            o.set("dataset.limit", a.limit);
            o.set("dataset.queries", a.queries);
            dataset(g, &resolve(g, o)?)
        }
        Command::Recsys(a) => {
            let mut o = Overrides(Vec::new());
            o.set("profile", a.profile.as_ref());
            o.list("sweep.rows", &a.rows);
            o.list("sweep.mitigations", &a.mitigations);
            o.set("recsys.limit", a.limit);
            o.set("recsys.k", a.k);
            o.set("recsys.embeddings", a.embeddings.as_ref());
            o.set("recsys.instances", a.instances.as_ref());
            o.set("recsys.count", a.count);
            recsys(g, &resolve(g, o)?)
        }
        Command::Calibrate { target } => match target {
            CalibrateTarget::Skew {
                profile,
                rows,
                cols,
                target,
                hdist,
                mechanism,
                write,
            } => {
                let mut o = Overrides(Vec::new());
                o.set("profile", profile.as_ref());
                o.set("array.rows", *rows);
                o.set("array.cols", *cols);
                o.set("calibrate.target_percent", *target);
                o.set("calibrate.hdist", *hdist);
                if let Some(m) = mechanism {
                    let m: SkewMechanism = m.parse()?;
                    o.set("calibrate.mechanism", Some(m));
                }
                calibrate_skew_cmd(g, &resolve(g, o)?, write.as_deref())
            }
            CalibrateTarget::Energy { points } => {
                let parsed = points
                    .iter()
                    .map(|p| parse_point(p))
                    .collect::<Result<Vec<_>>>()?;
                let mut o = Overrides(Vec::new());
                o.list("calibrate.energy_points", &parsed);
                calibrate_energy_cmd(g, &resolve(g, o)?)
            }
        },
    }
}

fn parse_point(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::config("calibrate.energy_points", format!("`{s}` is not rows:pJ"));
    let (r, e) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        e.trim().parse().map_err(|_| bad())?,
    ))
}

fn profiles(dump: Option<&str>) -> Result<()> {
    if let Some(name) = dump {
        let text = match builtin_profile_text(name) {
            Some(t) => t.to_string(),
            None => camsim::techmodel::load_profile(name)?.to_profile_text(),
        };
        print!("{text}");
        return Ok(());
    }
    let base = MitigationConfig::baseline();
    println!(
        "{:<10} {:<6} {:>10} {:>12} {:>16} {:>22}",
        "name", "tech", "t1@128 ns", "sigma_isat", "skew@256r/h40 %", "EPS 64/128/256 pJ"
    );
    for name in BUILTIN_PROFILES {
        let p = TechProfile::builtin(name)?;
        let eps: Vec<String> = [64, 128, 256]
            .iter()
            .map(|&r| {
                p.energy_per_search(r, 128, &base)
                    .map(|e| format!("{e:.2}"))
            })
            .collect::<Result<_>>()?;
        println!(
            "{:<10} {:<6} {:>10.3} {:>12.3} {:>16.1} {:>22}",
            p.label,
            p.name.as_str(),
            p.unit_discharge_time(128) * 1e9,
            p.sigma_isat_rel,
            p.skew_percent(256, 128, &base, 40)?,
            eps.join("/")
        );
    }
    Ok(())
}

fn search(g: &GlobalArgs, cfg: &RunConfig, outcomes: Option<PathBuf>) -> Result<()> {
    let profile = cfg.load_profile()?;
    let array = cfg.array_config(&profile)?;
    let cols = array.cols;
    let dataset = match (&cfg.search.data, &cfg.search.queries_file) {
        (Some(d), Some(q)) => DatasetSource::Vectors {
            items: Arc::new(read_bit_vectors(d, Some(cols))?),
            queries: read_bit_vectors(q, Some(cols))?,
        },
        _ => DatasetSource::Synthetic {
            items: cfg.search.items,
            seed: cfg.seed,
        },
    };
    let spec = ExperimentSpec {
        array: array.clone(),
        clock: cfg.clock_policy(),
        queries: cfg.search.queries,
        variation: cfg.variation(&profile)?,
        dataset,
        outcome_log: outcomes,
    };
    let report = if spec.variation.trials > 1 {
        variation_experiment(&spec)?
    } else {
        fixed_radius_experiment(&spec)?
    };
    let column = SweepColumn {
        rows: array.rows,
        mitigation: array.mitigation.kind,
        ideal: false,
    };
    let title = format!(
        "{} {}x{} {}, {:?} clock, HDist limit {}",
        profile.label,
        array.rows,
        cols,
        array.mitigation.kind.as_str(),
        spec.clock.kind,
        spec.clock.hdist_limit
    );
    print!(
        "{}",
        metrics_table(&title, &[(column, report.clone())]).render()
    );
    if report.reference.is_some() {
        println!();
        print!(
            "{}",
            variation_table("Monte Carlo", std::slice::from_ref(&report)).render()
        );
    }
    emit(g, "search", cfg, &[&profile], &report)
}

fn mdd(g: &GlobalArgs, cfg: &RunConfig) -> Result<()> {
    let profile = cfg.load_profile()?;
    let array = cfg.array_config(&profile)?;
    let table = MddTable::compute(&array, cfg.mdd.hmax)?;
    print!("{}", table.to_csv());
    emit(g, "mdd", cfg, &[&profile], &table)
}

#[derive(Serialize)]
struct CurveResult {
    points: Vec<(f64, f64)>,
    slope: Option<f64>,
    intercept: Option<f64>,
    r_squared: Option<f64>,
}

fn curve(g: &GlobalArgs, cfg: &RunConfig, skew: bool) -> Result<()> {
    let profile = cfg.load_profile()?;
    let cols = cfg.array.cols;
    if skew {
        let base = MitigationConfig::baseline();
        let points = cfg
            .sweep
            .rows
            .iter()
            .map(|&r| {
                Ok((
                    r as f64,
                    profile.skew_percent(r, cols, &base, cfg.curve.hdist)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        print!("{}", points_csv("rows,skew_percent", &points));
        let result = CurveResult {
            points,
            slope: None,
            intercept: None,
            r_squared: None,
        };
        return emit(g, "curve", cfg, &[&profile], &result);
    }
    let points = separation_curve(&profile, cols, cfg.curve.nmax)?;
    let fit = fit_separation_curve(&points);
    print!("{}", points_csv("inv_n_n_minus_1,delta_t_s", &points));
    if let Some(f) = &fit {
        println!(
            "# slope {:e} s (C*dV/I = {:e} s), intercept {:e} s, r^2 {:.15}",
            f.slope,
            profile.unit_discharge_time(cols),
            f.intercept,
            f.r_squared
        );
    }
    let result = CurveResult {
        points,
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        r_squared: fit.map(|f| f.r_squared),
    };
    emit(g, "curve", cfg, &[&profile], &result)
}

fn column_array(
    cfg: &RunConfig,
    profile: &TechProfile,
    col: &SweepColumn,
    cols: usize,
) -> Result<ArrayConfig> {
    let mut array = col.array_config(profile, cols)?;
    array.mitigation = cfg.mitigation(col.mitigation, &array.profile);
    array.validate()?;
    Ok(array)
}

fn column_clock(cfg: &RunConfig, col: &SweepColumn, limit: usize) -> ClockPolicy {
    ClockPolicy {
        kind: col.clock_kind(),
        hdist_limit: limit,
        guard: cfg.search.guard,
    }
}

#[derive(Serialize)]
struct ColumnResult<T> {
    column: SweepColumn,
    report: T,
}

fn sweep(g: &GlobalArgs, cfg: &RunConfig) -> Result<()> {
    let profile = cfg.load_profile()?;
    let columns = sweep_columns(&cfg.sweep.rows, &cfg.sweep.mitigations)?;
    let variation = cfg.variation(&profile)?;
    let mut results: Vec<(SweepColumn, MetricsReport)> = Vec::new();
    for col in columns {
        let spec = ExperimentSpec {
            array: column_array(cfg, &profile, &col, cfg.array.cols)?,
            clock: column_clock(cfg, &col, cfg.search.limit),
            queries: cfg.search.queries,
            variation,
            dataset: DatasetSource::Synthetic {
                items: cfg.search.items,
                seed: cfg.seed,
            },
            outcome_log: None,
        };
        let report = if variation.trials > 1 {
            variation_experiment(&spec)?
        } else {
            fixed_radius_experiment(&spec)?
        };
        results.push((col, report));
    }
    let title = format!(
        "{}: fixed-radius search, {} items x {} bits, HDist limit {}",
        profile.label, cfg.search.items, cfg.array.cols, cfg.search.limit
    );
    let mut out = metrics_table(&title, &results).render();
    if variation.trials > 1 {
        let reports: Vec<MetricsReport> = results.iter().map(|(_, r)| r.clone()).collect();
        let _ = write!(
            out,
            "\n{}",
            variation_table("Monte Carlo", &reports).render()
        );
    }
    print!("{out}");
    let rows: Vec<_> = results
        .into_iter()
        .map(|(column, report)| ColumnResult { column, report })
        .collect();
    emit(g, "sweep", cfg, &[&profile], &rows)
}

fn load_dataset(cfg: &RunConfig) -> Result<CategoricalDataset> {
    let d = &cfg.dataset;
    let text = match &d.path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => synthesize_housing_csv(d.synthetic_items, cfg.seed),
    };
    CategoricalDataset::from_csv(
        text.as_bytes(),
        d.max_distinct,
        d.features,
        d.bits_per_feature,
    )
}

fn dataset(g: &GlobalArgs, cfg: &RunConfig) -> Result<()> {
    let profile = cfg.load_profile()?;
    let ds = load_dataset(cfg)?;
    let cols = ds.schema.width();
    let variation = cfg.variation(&profile)?;
    let mut results = Vec::new();
    for col in sweep_columns(&cfg.sweep.rows, &cfg.sweep.mitigations)? {
        let array = column_array(cfg, &profile, &col, cols)?;
        let clock = column_clock(cfg, &col, cfg.dataset.limit);
        let r = dataset_search_experiment(
            &ds,
            &array,
            clock,
            variation,
            cfg.dataset.queries,
            cfg.seed,
        )?;
        results.push((col, r.metrics));
    }
    let source = cfg
        .dataset
        .path
        .as_deref()
        .map_or("synthetic housing table".to_string(), |p| {
            p.display().to_string()
        });
    let title = format!(
        "{}: {} ({} rows, {} features -> {} bits), HDist limit {}",
        profile.label,
        source,
        ds.records.len(),
        ds.schema.features.len(),
        cols,
        cfg.dataset.limit
    );
    print!("{}", metrics_table(&title, &results).render());
    #[derive(Serialize)]
    struct DatasetResult<'a> {
        features: Vec<String>,
        columns: Vec<ColumnResult<&'a MetricsReport>>,
    }
    let result = DatasetResult {
        features: ds.feature_names(),
        columns: results
            .iter()
            .map(|(c, r)| ColumnResult {
                column: c.clone(),
                report: r,
            })
            .collect(),
    };
    emit(g, "dataset", cfg, &[&profile], &result)
}

fn recsys(g: &GlobalArgs, cfg: &RunConfig) -> Result<()> {
    let profile = cfg.load_profile()?;
    let (emb, instances) = match (&cfg.recsys.embeddings, &cfg.recsys.instances) {
        (Some(e), Some(i)) => {
            // Binary files carry no shape; their width comes from `recsys.dim`.
            let dim = e
                .extension()
                .is_some_and(|x| x == "bin")
                .then_some(cfg.recsys.dim);
            (read_embeddings(e, dim)?, read_instances(i)?)
        }
        _ => synthesize_embeddings(&cfg.embedding_synth())?,
    };
    let mut results = Vec::new();
    for col in sweep_columns(&cfg.sweep.rows, &cfg.sweep.mitigations)? {
        let array = column_array(cfg, &profile, &col, cfg.array.cols)?;
        let spec = RecsysSpec {
            k: cfg.recsys.k,
            hdist_limit: cfg.recsys.limit,
            clock: col.clock_kind(),
            lsh_seed: cfg.recsys.lsh_seed,
        };
        results.push((col, recsys_experiment(&emb, &instances, &spec, &array)?));
    }
    let title = format!(
        "{}: candidate generation over {} instances, HDist limit {}",
        profile.label,
        instances.len(),
        cfg.recsys.limit
    );
    print!("{}", recsys_table(&title, &results).render());
    let rows: Vec<_> = results
        .into_iter()
        .map(|(column, report)| ColumnResult { column, report })
        .collect();
    emit(g, "recsys", cfg, &[&profile], &rows)
}

fn calibrate_skew_cmd(g: &GlobalArgs, cfg: &RunConfig, write: Option<&Path>) -> Result<()> {
    let profile = cfg.load_profile()?;
    let c = &cfg.calibrate;
    let mechanism = c
        .mechanism
        .unwrap_or(SkewMechanism::default_for(profile.name));
    let fit = calibrate_skew(
        &profile,
        cfg.array.rows,
        cfg.array.cols,
        c.target_percent,
        c.hdist,
        mechanism,
    )?;
    let what = match mechanism {
        SkewMechanism::SearchlineRc => format!(
            "r_sl_row*c_sl_row = {:e} s (r_sl_row = {:.6} ohm)",
            fit.parameter, fit.profile.r_sl_row
        ),
        SkewMechanism::IrDrop => format!("ir_gamma = {:.9}", fit.parameter),
    };
    println!(
        "{}: {what}; skew {:.4}% at {} rows, HDist {} (target {}%)",
        profile.label, fit.achieved_percent, cfg.array.rows, c.hdist, c.target_percent
    );
    if let Some(path) = write {
        let mut fitted = fit.profile.clone();
        fitted.skew_target_percent = Some(c.target_percent);
        fitted.skew_target_rows = Some(cfg.array.rows);
        fitted.skew_target_hdist = Some(c.hdist);
        std::fs::write(path, fitted.to_profile_text()).map_err(|e| Error::io(path, e))?;
    }
    emit(g, "calibrate-skew", cfg, &[&profile, &fit.profile], &fit)
}

fn calibrate_energy_cmd(g: &GlobalArgs, cfg: &RunConfig) -> Result<()> {
    let fit = calibrate_energy(&cfg.calibrate.energy_points)?;
    println!(
        "eps_intercept = {:.6} pJ, eps_slope = {:.9} pJ/row{}",
        fit.eps_intercept,
        fit.eps_slope,
        if fit.intercept_pinned {
            " (intercept held at 0)"
        } else {
            ""
        }
    );
    for ((rows, eps), r) in cfg
        .calibrate
        .energy_points
        .iter()
        .zip(&fit.relative_residuals)
    {
        println!("  {rows:>6} rows: {eps:.4} pJ, residual {:+.2}%", 100.0 * r);
    }
    println!(
        "max relative residual {:.2}%",
        100.0 * fit.max_relative_residual
    );
    emit(g, "calibrate-energy", cfg, &[], &fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_points_parse() {
        assert_eq!(parse_point("64:1.88").unwrap(), (64.0, 1.88));
        assert_eq!(parse_point(" 128 : 3.55 ").unwrap(), (128.0, 3.55));
        assert!(parse_point("64").is_err());
        assert!(parse_point("a:1").is_err());
    }

    #[test]
    fn overrides_quote_strings_and_lists() {
        let mut o = Overrides(Vec::new());
        o.set("profile", Some("my \"odd\" name"));
        o.set::<usize>("array.rows", None);
        o.list("sweep.rows", &[64usize, 128]);
        o.list::<usize>("sweep.rows", &[]);
        assert_eq!(
            o.0,
            vec![r#"profile="my \"odd\" name""#, "sweep.rows=[64,128]"]
        );
        let cfg = RunConfig::from_toml("", &o.0).unwrap();
        assert_eq!(cfg.profile, "my \"odd\" name");
        assert_eq!(cfg.sweep.rows, vec![64, 128]);
    }
}
