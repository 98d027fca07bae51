//! Command-line experiment runner.
//!
//! Each experiment produces a [`Report`] whose checks encode its acceptance thresholds.
//! Exit status: 0 when every non-advisory check passes, 2 when one fails, 1 on usage or
//! configuration errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analytic::{h_triangle, ContinuumTriangle};
use crate::connectivity::{crossing_exists, label_clusters, parse_pattern};
use crate::estimators::{
    cardy_estimates, centroid_face, cluster_count_slope, compare_with_triangle, endpoint_law, estimate_contour,
    estimate_h_fields, estimate_p_pairs, hull_field, lowest_crossing_lengths, scaling_exponent_fit,
    strip_cluster_count, arm_probability, Contour, Runner,
};
use crate::lattice::{build_parallelogram, build_triangle, Corner, Domain, FaceId};
use crate::oracle::{color_switch_cases, color_switch_from_table, derivative_identity_holds, exact_probability, SeparationTable};
use crate::report::{field_svg, field_table, num, timestamp, Check, Format, Report, Table};
use crate::sampler::{flip_colors, GENERATOR};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Cardy,
    Field,
    LemmaCr,
    Contour,
    Endpoint,
    Hull,
    Clusters,
    Dimension,
    Arms,
    OracleSuite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "percolab", version, about = "Critical site percolation on the triangular lattice")]
pub struct Cli {
    /// Experiment to run; may also come from the config file.
    #[arg(value_enum)]
    pub experiment: Option<Experiment>,
    /// Config file of `key=value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<u32>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats (repeatable or comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<FormatArg>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Split points |xb| for the cardy experiment.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    /// Arm color pattern, e.g. BYBYB.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Inner annulus radius for the arms experiment.
    #[arg(long)]
    pub r: Option<u32>,
    /// Outer annulus radii for the arms experiment.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<u32>>,
    /// Strip lengths for the clusters experiment.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Lattice rows across the unit-height strip.
    #[arg(long)]
    pub rows: Option<u32>,
    /// Dimension fit on the exact series N^{4/3} instead of sampled lengths.
    #[arg(long)]
    pub synthetic: bool,
}

/// Fully resolved configuration; echoed into every report header.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub size: u32,
    pub sizes: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub confidence: f64,
    pub out: PathBuf,
    pub formats: Vec<FormatArg>,
    pub x: Vec<f64>,
    pub pattern: String,
    pub r: u32,
    pub radii: Vec<u32>,
    pub lengths: Vec<f64>,
    pub rows: u32,
    pub synthetic: bool,
}

impl ExperimentConfig {
    /// Defaults reproducing the acceptance settings of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        use Experiment::*;
        let (size, sizes, trials) = match experiment {
            Cardy | Endpoint => (256, vec![], 100_000),
            Field | Hull => (128, vec![], 100_000),
            LemmaCr => (64, vec![], 100_000),
            Contour => (0, vec![32, 64, 128, 256], 100_000),
            Clusters => (0, vec![], 10_000),
            Dimension => (0, vec![64, 128, 256, 512, 1024], 2_000),
            Arms => (0, vec![], 20_000),
            OracleSuite => (4, vec![], 0),
        };
        let confidence = if matches!(experiment, LemmaCr | OracleSuite) { 0.999 } else { 0.99 };
        ExperimentConfig {
            experiment,
            size,
            sizes,
            trials,
            seed: 1,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            confidence,
            out: PathBuf::from("reports"),
            formats: vec![FormatArg::Json, FormatArg::Csv],
            x: vec![0.25, 0.5, 0.75],
            pattern: "BYBYB".into(),
            r: 4,
            radii: vec![8, 16, 32],
            lengths: vec![2.0, 4.0, 8.0],
            rows: 74,
            synthetic: false,
        }
    }

    /// Merges a config file (if any) and command-line flags over the defaults.
    pub fn resolve(cli: &Cli) -> Result<Self, Error> {
        let file = match &cli.config {
            Some(p) => parse_config_file(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        let experiment = match (cli.experiment, file.get("experiment")) {
            (Some(e), _) => e,
            (None, Some(v)) => Experiment::from_str(v, true).map_err(|_| Error::Argument(format!("unknown experiment {v}")))?,
            (None, None) => return Err(Error::Argument("no experiment given".into())),
        };
        let mut cfg = ExperimentConfig::defaults(experiment);
        for (k, v) in &file {
            cfg.apply(k, v)?;
        }
        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = &cli.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        flag!(size);
        flag!(sizes);
        flag!(trials);
        flag!(seed);
        flag!(workers);
        flag!(out);
        flag!(confidence);
        flag!(x);
        flag!(pattern);
        flag!(r);
        flag!(radii);
        flag!(lengths);
        flag!(rows);
        if !cli.format.is_empty() {
            cfg.formats = cli.format.clone();
        }
        cfg.synthetic |= cli.synthetic;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), Error> {
        match key {
            "experiment" => {}
            "size" => self.size = parse(key, v)?,
            "sizes" => self.sizes = parse_list(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "format" => {
                self.formats = v
                    .split(',')
                    .map(|s| FormatArg::from_str(s.trim(), true).map_err(|_| Error::Argument(format!("unknown format {s}"))))
                    .collect::<Result<_, _>>()?
            }
            "confidence" => self.confidence = parse(key, v)?,
            "x" => self.x = parse_list(key, v)?,
            "pattern" => self.pattern = v.to_string(),
            "r" => self.r = parse(key, v)?,
            "radii" => self.radii = parse_list(key, v)?,
            "lengths" => self.lengths = parse_list(key, v)?,
            "rows" => self.rows = parse(key, v)?,
            "synthetic" => self.synthetic = parse(key, v)?,
            _ => return Err(Error::Argument(format!("unknown config key {key}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), Error> {
        use Experiment::*;
        if self.workers == 0 {
            return Err(Error::Argument("workers must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Argument("confidence must lie in (0, 1)".into()));
        }
        if self.experiment != OracleSuite && !(self.experiment == Dimension && self.synthetic) && self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if matches!(self.experiment, Cardy | Field | LemmaCr | Endpoint | Hull | OracleSuite) && self.size == 0 {
            return Err(Error::Argument("size must be at least 1".into()));
        }
        if matches!(self.experiment, Contour | Dimension) && (self.sizes.is_empty() || self.sizes.contains(&0)) {
            return Err(Error::Argument("sizes must be a list of positive integers".into()));
        }
        Ok(())
    }

    /// The parameters that determine results; excludes workers and output settings.
    fn parameters(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let m = v.as_object_mut().expect("object");
        for k in ["workers", "out", "formats"] {
            m.remove(k);
        }
        v
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.trim().parse().map_err(|_| Error::Argument(format!("invalid value for {key}: {v}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, Error> {
    v.split(',').map(|s| parse(key, s)).collect()
}

/// `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Argument(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn triangle(n: u32) -> Result<Domain, Error> {
    build_triangle(n, 1.0 / n as f64)
}

fn triangle_prediction(d: &Domain, n: u32) -> impl Fn(usize, FaceId) -> f64 + '_ {
    move |alpha, f| {
        let (x, y) = d.face_center(f);
        let side = n as f64 * d.delta();
        h_triangle(alpha, (x / side, y / side)).unwrap_or(f64::NAN)
    }
}

/// Runs one experiment and returns its report without writing files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let runner = Runner::new(cfg.seed, cfg.workers, cfg.confidence)?;
    let mut report = match cfg.experiment {
        Experiment::Cardy => cardy(cfg, &runner)?,
        Experiment::Field => field(cfg, &runner)?,
        Experiment::LemmaCr => lemma_cr(cfg, &runner)?,
        Experiment::Contour => contour(cfg, &runner)?,
        Experiment::Endpoint => endpoint(cfg, &runner)?,
        Experiment::Hull => hull(cfg, &runner)?,
        Experiment::Clusters => clusters(cfg, &runner)?,
        Experiment::Dimension => dimension(cfg, &runner)?,
        Experiment::Arms => arms(cfg, &runner)?,
        Experiment::OracleSuite => oracle_suite(cfg)?,
    };
    if let Some(m) = report.body.as_object_mut() {
        m.insert("parameters".into(), cfg.parameters());
        m.insert("generator".into(), json!(GENERATOR));
    }
    Ok(report)
}

fn cardy(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("cardy");
    let d = triangle(cfg.size)?;
    let est = cardy_estimates(runner, cfg.size, &cfg.x, cfg.trials)?;
    let mut t = Table::new("estimates", &["t", "lattice_xb", "successes", "trials", "p", "lo", "hi", "prediction"]);
    let mut rows = Vec::new();
    for (&x, (xb, e)) in cfg.x.iter().zip(&est) {
        t.push(vec![num(x), num(*xb), e.successes.to_string(), e.trials.to_string(), num(e.p), num(e.lo), num(e.hi), num(x)]);
        r.checks.push(Check::new(format!("|p - {x}|"), (e.p - x).abs(), "<= 0.015", (e.p - x).abs() <= 0.015));
        rows.push(json!({ "t": x, "lattice_xb": xb, "estimate": e, "prediction": x }));
    }
    r.body = json!({ "domain": d.spec().to_string(), "estimates": rows });
    r.tables.push(t);
    Ok(r)
}

fn field(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("field");
    let d = triangle(cfg.size)?;
    let fields = estimate_h_fields(runner, &d, &[0, 1, 2], cfg.trials)?;
    let cmp = compare_with_triangle(&d, &fields, 0.1)?;
    for (k, e) in cmp.sup_error.iter().enumerate() {
        r.checks.push(Check::new(format!("sup |H_{k} - h_{k}|"), *e, "<= 0.02", *e <= 0.02));
    }
    r.checks.push(Check::new("sup |H_0 + H_1 + H_2 - 1|", cmp.sup_sum_error, "<= 0.03", cmp.sup_sum_error <= 0.03));
    let pred = triangle_prediction(&d, cfg.size);
    r.tables.push(field_table(&d, "faces", &fields, &pred, cfg.confidence));
    for f in &fields {
        r.svgs.push((format!("alpha{}", f.alpha), field_svg(&d, &f.values(), &format!("H_{} on {}", f.alpha, d.spec()))));
    }
    r.body = json!({ "domain": d.spec().to_string(), "trials": cfg.trials, "interior_faces": cmp.faces,
        "sup_error": cmp.sup_error, "sup_sum_error": cmp.sup_sum_error });
    Ok(r)
}

/// Every (β, z, η) with z the centroid face and z+η, z+τη inside the domain.
fn lemma_cr(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("lemma-cr");
    let d = triangle(cfg.size)?;
    let z = centroid_face(&d);
    let cases: Vec<_> = color_switch_cases(&d).into_iter().filter(|c| c.1 == z).collect();
    let est = estimate_p_pairs(runner, &d, &cases, cfg.trials)?;
    let mut t = Table::new("pairs", &["beta", "z", "eta", "left", "right", "diff", "diff_lo", "diff_hi", "covers_zero"]);
    for (&(k, z, eta), e) in cases.iter().zip(&est) {
        t.push(vec![
            k.to_string(),
            z.to_string(),
            eta.to_string(),
            num(e.left.p),
            num(e.right.p),
            num(e.diff),
            num(e.diff_lo),
            num(e.diff_hi),
            e.covers_zero().to_string(),
        ]);
        r.checks.push(Check::new(format!("beta={k} eta={eta} diff CI covers 0"), e.diff, "CI contains 0", e.covers_zero()));
    }
    r.body = json!({ "domain": d.spec().to_string(), "pairs": est });
    r.tables.push(t);
    Ok(r)
}

fn contour(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("contour");
    let mut t = Table::new("residuals", &["n", "x0", "y0", "len", "residual", "stderr", "noise_floor"]);
    let mut res = Vec::new();
    for &n in &cfg.sizes {
        let d = triangle(n)?;
        let e = estimate_contour(runner, &d, 0, Contour::standard(n), cfg.trials)?;
        let c = e.contour;
        t.push(vec![n.to_string(), c.x0.to_string(), c.y0.to_string(), c.len.to_string(), num(e.residual), num(e.stderr), num(e.noise_floor)]);
        res.push((n, e));
    }
    let values: Vec<f64> = res.iter().map(|(_, e)| e.residual).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    r.checks.push(Check::new("strictly decreasing", decreasing as u8 as f64, "true", decreasing));
    if values.len() >= 2 {
        let ratio = values[values.len() - 1] / values[0];
        r.checks.push(Check::new("last / first", ratio, "< 0.5", ratio < 0.5));
    }
    let rows: Vec<_> = res.iter().map(|(n, e)| json!({ "n": n, "estimate": e })).collect();
    r.body = json!({ "beta": 0, "residuals": rows });
    r.tables.push(t);
    Ok(r)
}

fn endpoint(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("endpoint");
    let d = triangle(cfg.size)?;
    let law = endpoint_law(runner, &d, cfg.trials)?;
    let mut t = Table::new("histogram", &["y", "position", "count"]);
    for (y, c) in law.counts.iter().enumerate() {
        t.push(vec![y.to_string(), num(y as f64 / cfg.size as f64), c.to_string()]);
    }
    r.checks.push(Check::new("KS distance to Uniform[0,1]", law.ks, "<= 0.02", law.ks <= 0.02));
    r.body = json!({ "domain": d.spec().to_string(), "law": law });
    r.tables.push(t);
    Ok(r)
}

fn hull(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("hull");
    let d = triangle(cfg.size)?;
    let field = hull_field(runner, &d, 0, cfg.trials)?;
    let z = centroid_face(&d);
    let (lo, hi) = field.interval(z, cfg.confidence);
    let p = field.p(z);
    let side = cfg.size as f64 * d.delta();
    let (cx, cy) = d.face_center(z);
    let prediction = ContinuumTriangle::default().h(field.alpha, (cx / side, cy / side))?;
    r.checks.push(Check::new("|p(centroid) - 1/3|", (p - 1.0 / 3.0).abs(), "<= 0.02", (p - 1.0 / 3.0).abs() <= 0.02));
    let pred = triangle_prediction(&d, cfg.size);
    r.tables.push(field_table(&d, "faces", std::slice::from_ref(&field), &pred, cfg.confidence));
    r.svgs.push(("field".into(), field_svg(&d, &field.values(), &format!("hull containment on {}", d.spec()))));
    r.body = json!({ "domain": d.spec().to_string(), "centroid_face": z, "hits": field.hits[z as usize],
        "trials": cfg.trials, "p": p, "lo": lo, "hi": hi, "prediction": prediction });
    Ok(r)
}

fn clusters(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("clusters");
    let mut t = Table::new("strips", &["length", "width", "rows", "trials", "mean", "stderr"]);
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for &l in &cfg.lengths {
        let s = strip_cluster_count(runner, l, cfg.rows, cfg.trials)?;
        t.push(vec![num(s.length), s.width.to_string(), s.rows.to_string(), s.trials.to_string(), num(s.mean()), num(s.stderr())]);
        pts.push((s.length, s.mean()));
        rows.push(json!({ "strip": s, "mean": s.mean(), "stderr": s.stderr() }));
    }
    let slope = cluster_count_slope(&pts)?;
    let c = 3f64.sqrt() / 4.0;
    r.checks.push(Check::new("|slope - sqrt(3)/4|", (slope - c).abs(), "<= 0.05", (slope - c).abs() <= 0.05));
    r.body = json!({ "strips": rows, "slope": slope, "prediction": c });
    r.tables.push(t);
    Ok(r)
}

fn dimension(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("dimension");
    let mut t = Table::new("lengths", &["n", "trials", "crossings", "mean", "stderr"]);
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        if cfg.synthetic {
            let s = (n as f64).powf(4.0 / 3.0);
            t.push(vec![n.to_string(), "0".into(), "0".into(), num(s), num(0.0)]);
            pts.push((n as f64, s));
            rows.push(json!({ "n": n, "mean": s }));
        } else {
            let e = lowest_crossing_lengths(runner, n, cfg.trials)?;
            t.push(vec![n.to_string(), e.trials.to_string(), e.crossings.to_string(), num(e.mean()), num(e.stderr())]);
            pts.push((n as f64, e.mean()));
            rows.push(json!({ "n": n, "estimate": e, "mean": e.mean(), "stderr": e.stderr() }));
        }
    }
    let fit = scaling_exponent_fit(&pts)?;
    let ok = (1.23..=1.43).contains(&fit.exponent);
    r.checks.push(Check::new("length exponent", fit.exponent, "in [1.23, 1.43]", ok));
    r.body = json!({ "synthetic": cfg.synthetic, "sizes": rows, "fit": fit });
    r.tables.push(t);
    Ok(r)
}

fn arms(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report, Error> {
    let mut r = Report::new("arms");
    let pattern = parse_pattern(&cfg.pattern)?;
    let mut t = Table::new("annuli", &["r", "big_r", "ratio", "successes", "trials", "p", "lo", "hi"]);
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for &big in &cfg.radii {
        let e = arm_probability(runner, cfg.r, big, &pattern, cfg.trials)?;
        let ratio = big as f64 / cfg.r as f64;
        t.push(vec![cfg.r.to_string(), big.to_string(), num(ratio), e.successes.to_string(), e.trials.to_string(), num(e.p), num(e.lo), num(e.hi)]);
        pts.push((ratio, e.p));
        rows.push(json!({ "ratio": ratio, "estimate": e }));
    }
    let monotone = pts.windows(2).all(|w| w[1].1 < w[0].1);
    r.checks.push(Check::new("monotone decrease", monotone as u8 as f64, "true", monotone));
    let fit = if pts.len() >= 3 && pts.iter().all(|p| p.1 > 0.0) { Some(scaling_exponent_fit(&pts)?) } else { None };
    if let Some(f) = &fit {
        let decay = -f.exponent;
        r.checks.push(Check::new("decay exponent", decay, "in [1.7, 2.3]", (decay - 2.0).abs() <= 0.3).advisory());
    }
    r.body = json!({ "pattern": cfg.pattern, "annuli": rows, "fit": fit });
    r.tables.push(t);
    Ok(r)
}

fn oracle_suite(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let mut r = Report::new("oracle-suite");
    let d = triangle(cfg.size)?;
    let table = SeparationTable::enumerate(&d)?;
    let cases = color_switch_cases(&d);
    let mut t = Table::new("color_switch", &["beta", "z", "eta", "left", "right", "equal"]);
    let mut unequal = 0;
    for &(k, z, eta) in &cases {
        let c = color_switch_from_table(&d, &table, k, z, eta)?;
        unequal += !c.equal as usize;
        t.push(vec![k.to_string(), z.to_string(), eta.to_string(), c.left.to_string(), c.right.to_string(), c.equal.to_string()]);
    }
    r.tables.push(t);
    r.checks.push(Check::new("color switching: unequal cases", unequal as f64, "== 0", unequal == 0));

    let mut der_cases = 0;
    let mut der_fail = 0;
    for k in 0..3 {
        for z in 0..d.face_count() as FaceId {
            for (g, _) in d.face_adjacency(z) {
                der_cases += 1;
                der_fail += !derivative_identity_holds(&table, k, z, g) as usize;
            }
        }
    }
    r.checks.push(Check::new("derivative identity: failures", der_fail as f64, "== 0", der_fail == 0));

    // faces with an edge on the far arc
    let mut boundary_nonzero = Vec::new();
    for k in 0..3 {
        let far = (k + 1) % 3;
        for f in 0..d.face_count() as FaceId {
            let corners = d.face(f).corners;
            let on_far = corners.iter().filter(|&&s| d.touches(s, far)).count() >= 2;
            let h = table.h(k, f);
            if on_far && h.numerator() != &0u32.into() {
                boundary_nonzero.push(json!({ "alpha": k, "face": f, "h": h }));
            }
        }
    }
    r.checks.push(
        Check::new("far-arc faces with nonzero H", boundary_nonzero.len() as f64, "== 0", boundary_nonzero.is_empty())
            .advisory(),
    );

    let rhombus = build_parallelogram(2, 2, 0.5, &[Corner::BottomLeft, Corner::BottomRight, Corner::TopRight, Corner::TopLeft])?;
    let cross = exact_probability(&rhombus, |c| crossing_exists(&label_clusters(&rhombus, c, true), 0, 2))?;
    let half = cross.numerator() * 2u32 == cross.denominator();
    r.checks.push(Check::new("2x2 rhombus crossing", cross.to_f64(), "== 1/2 exactly", half));

    let mut dual = true;
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let blue = exact_probability(&d, |c| crossing_exists(&label_clusters(&d, c, true), a, b))?;
        let yellow = exact_probability(&d, |c| crossing_exists(&label_clusters(&d, &flip_colors(c), false), a, b))?;
        dual &= blue == yellow;
    }
    r.checks.push(Check::new("color-flip duality of crossings", dual as u8 as f64, "true", dual));

    r.body = json!({
        "domain": d.spec().to_string(),
        "color_switch_cases": cases.len(),
        "color_switch_unequal": unequal,
        "derivative_cases": der_cases,
        "derivative_failures": der_fail,
        "far_arc_nonzero": boundary_nonzero,
        "rhombus_crossing": cross,
    });
    Ok(r)
}

/// Parses arguments, runs the experiment, writes the reports and maps the outcome to an
/// exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = ExperimentConfig::resolve(cli)?;
    let report = run_experiment(&cfg)?;
    let header = json!({ "config": cfg, "generator": GENERATOR, "timestamp": timestamp() });
    let formats: Vec<Format> = cfg.formats.iter().map(|&f| f.into()).collect();
    for p in report.write(&cfg.out, &formats, &header)? {
        println!("wrote {}", p.display());
    }
    for c in &report.checks {
        let tag = if c.pass { "pass" } else if c.advisory { "advisory-fail" } else { "FAIL" };
        println!("{tag:>13}  {}: {} ({})", c.name, c.value, c.threshold);
    }
    Ok(report.passed())
}
