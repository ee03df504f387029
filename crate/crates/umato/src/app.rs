//! Command implementations behind the CLI binary: dataset preparation,
//! embedding, evaluation, benchmarking, and plot emission. Every run writes
//! a JSON manifest carrying the effective parameters and seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use crate::data::{
    generate_spheres, load_csv, load_embedding, load_idx, save_embedding, subsample,
    LabeledDataset,
};
use crate::metrics::{evaluate, DensityOptions, MetricReport};
use crate::optimize::{umato_embed_detailed, EmbedDiagnostics, OptimizationConfig};
use crate::pca::pca_project;
use crate::plot::render_svg;
use crate::{Error, Result};

pub const DEFAULT_SIGMAS: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Umato,
    Pca,
}

/// Where the input points come from.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Built-in synthetic Spheres benchmark.
    Spheres { seed: u64 },
    Csv { path: PathBuf, has_labels: bool },
    Idx { images: PathBuf, labels: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSpec::Spheres { seed } => Ok(generate_spheres(*seed)),
            DatasetSpec::Csv { path, has_labels } => load_csv(path, *has_labels),
            DatasetSpec::Idx { images, labels } => load_idx(images, labels),
        }
    }
}

/// Reproducibility record written next to every file-producing run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<OptimizationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<crate::metrics::MetricParams>,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<EmbedDiagnostics>,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, json)?;
    Ok(())
}

fn prepared_dataset(spec: &DatasetSpec, sub: Option<usize>, seed: u64) -> Result<LabeledDataset> {
    let ds = spec.load()?;
    match sub {
        Some(m) => subsample(&ds, m, seed),
        None => Ok(ds),
    }
}

/// Runs the requested algorithm and returns the 2-D positions.
pub fn run_algorithm(
    algo: Algorithm,
    ds: &LabeledDataset,
    cfg: &OptimizationConfig,
) -> Result<(Array2<f64>, Option<EmbedDiagnostics>)> {
    match algo {
        Algorithm::Pca => Ok((pca_project(&ds.data, 2)?, None)),
        Algorithm::Umato => {
            let (emb, diag) = umato_embed_detailed(&ds.data, cfg)?;
            Ok((emb.positions, Some(diag)))
        }
    }
}

pub struct EmbedOptions {
    pub dataset: DatasetSpec,
    pub algo: Algorithm,
    pub cfg: OptimizationConfig,
    pub subsample: Option<usize>,
    pub out: PathBuf,
}

/// Embeds a dataset and writes the embedding CSV plus a run manifest.
pub fn cmd_embed(opts: &EmbedOptions) -> Result<EmbedDiagnostics> {
    let start = Instant::now();
    let ds = prepared_dataset(&opts.dataset, opts.subsample, opts.cfg.seed)?;
    let (positions, diag) = run_algorithm(opts.algo, &ds, &opts.cfg)?;
    save_embedding(&positions, Some(ds.labels()), &opts.out)?;
    let manifest = RunManifest {
        command: "embed".into(),
        dataset: Some(opts.dataset.clone()),
        algorithm: Some(opts.algo),
        subsample: opts.subsample,
        config: Some(opts.cfg.clone()),
        metrics: None,
        seed: opts.cfg.seed,
        outputs: vec![opts.out.clone()],
        wall_clock_secs: start.elapsed().as_secs_f64(),
        diagnostics: diag.clone(),
    };
    write_json(&manifest, &manifest_path(&opts.out))?;
    Ok(diag.unwrap_or(EmbedDiagnostics {
        n_hubs: 0,
        n_enn: 0,
        n_outliers: 0,
        global_loss_before: 0.0,
        global_loss_after: 0.0,
        hub_displacement: 0.0,
        enn_displacement: 0.0,
    }))
}

pub struct EvaluateOptions {
    pub dataset: DatasetSpec,
    pub embedding: PathBuf,
    pub subsample: Option<usize>,
    pub subsample_seed: u64,
    pub k: usize,
    pub sigmas: Vec<f64>,
    pub normalize_distances: bool,
    pub out: Option<PathBuf>,
}

/// Evaluates an embedding CSV against its source data; prints an aligned
/// text table and optionally writes the report as JSON.
pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<MetricReport> {
    let start = Instant::now();
    let ds = prepared_dataset(&opts.dataset, opts.subsample, opts.subsample_seed)?;
    let (positions, _) = load_embedding(&opts.embedding)?;
    if positions.nrows() != ds.n() {
        return Err(Error::InvalidData(format!(
            "embedding has {} rows but dataset has {}",
            positions.nrows(),
            ds.n()
        )));
    }
    let report = evaluate(
        ds.data.points.view(),
        positions.view(),
        opts.k,
        &opts.sigmas,
        DensityOptions { normalize_distances: opts.normalize_distances },
    )?;
    print!("{}", format_report_text(&report));
    if let Some(out) = &opts.out {
        write_json(&report, out)?;
        let manifest = RunManifest {
            command: "evaluate".into(),
            dataset: Some(opts.dataset.clone()),
            algorithm: None,
            subsample: opts.subsample,
            config: None,
            metrics: Some(report.params.clone()),
            seed: opts.subsample_seed,
            outputs: vec![out.clone()],
            wall_clock_secs: start.elapsed().as_secs_f64(),
            diagnostics: None,
        };
        write_json(&manifest, &manifest_path(out))?;
    }
    Ok(report)
}

pub fn format_report_text(report: &MetricReport) -> String {
    let mut text = String::new();
    text.push_str(&format!("{:<22}{:>12}\n", "metric", "value"));
    for m in &report.dtm {
        text.push_str(&format!("{:<22}{:>12.4}\n", format!("DTM_{}", m.sigma), m.value));
    }
    for m in &report.kl {
        text.push_str(&format!("{:<22}{:>12.4}\n", format!("KL_{}", m.sigma), m.value));
    }
    text.push_str(&format!("{:<22}{:>12.4}\n", "trustworthiness", report.trustworthiness));
    text.push_str(&format!("{:<22}{:>12.4}\n", "continuity", report.continuity));
    text.push_str(&format!("{:<22}{:>12.4}\n", "mrre_x", report.mrre_x));
    text.push_str(&format!("{:<22}{:>12.4}\n", "mrre_z", report.mrre_z));
    text
}

pub struct BenchmarkOptions {
    pub dataset: DatasetSpec,
    pub subsample: Option<usize>,
    pub cfg: OptimizationConfig,
    pub k_metrics: usize,
    pub sigmas: Vec<f64>,
    pub normalize_distances: bool,
    /// Search k in {15, 50} x hub_penalty in {0.1, 0.3} and keep the
    /// configuration minimizing KL at sigma = 0.1.
    pub grid: bool,
    pub out_markdown: PathBuf,
    pub out_json: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct BenchmarkRow {
    pub algorithm: Algorithm,
    pub report: MetricReport,
    pub config: OptimizationConfig,
}

#[derive(Debug, Serialize)]
pub struct BenchmarkReport {
    pub dataset: DatasetSpec,
    pub subsample: Option<usize>,
    pub rows: Vec<BenchmarkRow>,
    pub wall_clock_secs: f64,
}

/// Runs PCA and the two-phase pipeline on the same dataset and emits a
/// comparison table in Markdown and JSON; the best value per column is
/// flagged in bold.
pub fn cmd_benchmark(opts: &BenchmarkOptions) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let ds = prepared_dataset(&opts.dataset, opts.subsample, opts.cfg.seed)?;
    let density = DensityOptions { normalize_distances: opts.normalize_distances };

    let score = |positions: &Array2<f64>| -> Result<MetricReport> {
        evaluate(
            ds.data.points.view(),
            positions.view(),
            opts.k_metrics,
            &opts.sigmas,
            density,
        )
    };

    let mut rows = Vec::new();
    let pca_positions = pca_project(&ds.data, 2)?;
    rows.push(BenchmarkRow {
        algorithm: Algorithm::Pca,
        report: score(&pca_positions)?,
        config: opts.cfg.clone(),
    });

    let candidates: Vec<OptimizationConfig> = if opts.grid {
        let mut v = Vec::new();
        for k in [15, 50] {
            for hub_penalty in [0.1, 0.3] {
                v.push(OptimizationConfig { k, hub_penalty, ..opts.cfg.clone() });
            }
        }
        v
    } else {
        vec![opts.cfg.clone()]
    };
    let mut best: Option<(f64, MetricReport, OptimizationConfig)> = None;
    for cfg in candidates {
        let (emb, _) = umato_embed_detailed(&ds.data, &cfg)?;
        let report = score(&emb.positions)?;
        let kl01 = report.kl_at(0.1).unwrap_or(f64::INFINITY);
        if best.as_ref().map_or(true, |(b, _, _)| kl01 < *b) {
            best = Some((kl01, report, cfg));
        }
    }
    let (_, report, cfg) = best.expect("at least one candidate");
    rows.push(BenchmarkRow { algorithm: Algorithm::Umato, report, config: cfg });

    let bench = BenchmarkReport {
        dataset: opts.dataset.clone(),
        subsample: opts.subsample,
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    std::fs::write(&opts.out_markdown, benchmark_markdown(&bench))?;
    write_json(&bench, &opts.out_json)?;
    let manifest = RunManifest {
        command: "benchmark".into(),
        dataset: Some(opts.dataset.clone()),
        algorithm: None,
        subsample: opts.subsample,
        config: Some(opts.cfg.clone()),
        metrics: Some(crate::metrics::MetricParams {
            k: opts.k_metrics,
            sigmas: opts.sigmas.clone(),
            normalize_distances: opts.normalize_distances,
        }),
        seed: opts.cfg.seed,
        outputs: vec![opts.out_markdown.clone(), opts.out_json.clone()],
        wall_clock_secs: bench.wall_clock_secs,
        diagnostics: None,
    };
    write_json(&manifest, &manifest_path(&opts.out_json))?;
    Ok(bench)
}

pub fn benchmark_markdown(bench: &BenchmarkReport) -> String {
    let sigmas: Vec<f64> = bench.rows[0].report.dtm.iter().map(|m| m.sigma).collect();
    // Column extractors paired with their winning direction.
    let mut columns: Vec<(String, Vec<f64>, bool)> = Vec::new();
    for (si, &s) in sigmas.iter().enumerate() {
        let vals = bench.rows.iter().map(|r| r.report.dtm[si].value).collect();
        columns.push((format!("DTM_{s}"), vals, false));
    }
    for (si, &s) in sigmas.iter().enumerate() {
        let vals = bench.rows.iter().map(|r| r.report.kl[si].value).collect();
        columns.push((format!("KL_{s}"), vals, false));
    }
    for (name, f) in [
        ("Conti.", (|r: &MetricReport| r.continuity) as fn(&MetricReport) -> f64),
        ("Trust.", |r| r.trustworthiness),
        ("MRRE_X", |r| r.mrre_x),
        ("MRRE_Z", |r| r.mrre_z),
    ] {
        let vals = bench.rows.iter().map(|r| f(&r.report)).collect();
        columns.push((name.to_string(), vals, true));
    }

    let mut md = String::from("| Algorithm |");
    for (name, _, _) in &columns {
        md.push_str(&format!(" {name} |"));
    }
    md.push('\n');
    md.push_str("|---|");
    md.push_str(&"---|".repeat(columns.len()));
    md.push('\n');
    for (ri, row) in bench.rows.iter().enumerate() {
        md.push_str(&format!("| {:?} |", row.algorithm));
        for (_, vals, higher_better) in &columns {
            let best = vals
                .iter()
                .copied()
                .reduce(|a, b| if *higher_better { a.max(b) } else { a.min(b) })
                .unwrap();
            let v = vals[ri];
            if v == best {
                md.push_str(&format!(" **{v:.4}** |"));
            } else {
                md.push_str(&format!(" {v:.4} |"));
            }
        }
        md.push('\n');
    }
    md
}

pub struct PlotOptions {
    pub embedding: PathBuf,
    pub out: PathBuf,
}

/// Renders an embedding CSV as a standalone SVG scatter plot.
pub fn cmd_plot(opts: &PlotOptions) -> Result<()> {
    let start = Instant::now();
    let (positions, labels) = load_embedding(&opts.embedding)?;
    let svg = render_svg(positions.view(), &labels)?;
    std::fs::write(&opts.out, svg)?;
    let manifest = RunManifest {
        command: "plot".into(),
        dataset: None,
        algorithm: None,
        subsample: None,
        config: None,
        metrics: None,
        seed: 0,
        outputs: vec![opts.out.clone()],
        wall_clock_secs: start.elapsed().as_secs_f64(),
        diagnostics: None,
    };
    write_json(&manifest, &manifest_path(&opts.out))?;
    Ok(())
}

/// Generates the Spheres benchmark and writes it as a labeled CSV.
pub fn cmd_spheres(seed: u64, subsample_to: Option<usize>, out: &Path) -> Result<()> {
    let start = Instant::now();
    let ds = prepared_dataset(&DatasetSpec::Spheres { seed }, subsample_to, seed)?;
    let mut file = std::fs::File::create(out)?;
    use std::io::Write;
    for i in 0..ds.n() {
        let mut cells: Vec<String> =
            ds.data.points.row(i).iter().map(|v| format!("{v:.11e}")).collect();
        cells.push(ds.labels()[i].to_string());
        writeln!(file, "{}", cells.join(","))?;
    }
    let manifest = RunManifest {
        command: "spheres".into(),
        dataset: Some(DatasetSpec::Spheres { seed }),
        algorithm: None,
        subsample: subsample_to,
        config: None,
        metrics: None,
        seed,
        outputs: vec![out.to_path_buf()],
        wall_clock_secs: start.elapsed().as_secs_f64(),
        diagnostics: None,
    };
    write_json(&manifest, &manifest_path(out))?;
    Ok(())
}

/// Runs `f` inside a rayon pool of the requested size; `None` keeps the
/// default. Results are required to be identical across pool sizes.
pub fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SpheresParams;

    fn tiny_spheres_csv(dir: &Path) -> PathBuf {
        let ds = crate::data::generate_spheres_with(
            &SpheresParams {
                points_per_inner: 8,
                outer_points: 40,
                ..SpheresParams::default()
            },
            1,
        );
        let path = dir.join("tiny.csv");
        let mut rows = String::new();
        for i in 0..ds.n() {
            let mut cells: Vec<String> =
                ds.data.points.row(i).iter().map(|v| format!("{v}")).collect();
            cells.push(ds.labels()[i].to_string());
            rows.push_str(&cells.join(","));
            rows.push('\n');
        }
        std::fs::write(&path, rows).unwrap();
        path
    }

    #[test]
    fn embed_pca_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let input = tiny_spheres_csv(dir.path());
        let out = dir.path().join("e.csv");
        let opts = EmbedOptions {
            dataset: DatasetSpec::Csv { path: input, has_labels: true },
            algo: Algorithm::Pca,
            cfg: OptimizationConfig::default(),
            subsample: None,
            out: out.clone(),
        };
        cmd_embed(&opts).unwrap();
        assert!(out.exists());
        let manifest = dir.path().join("e.csv.manifest.json");
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
        assert_eq!(parsed["command"], "embed");
        assert_eq!(parsed["algorithm"], "pca");
    }

    #[test]
    fn embed_missing_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let opts = EmbedOptions {
            dataset: DatasetSpec::Csv {
                path: dir.path().join("missing.csv"),
                has_labels: false,
            },
            algo: Algorithm::Pca,
            cfg: OptimizationConfig::default(),
            subsample: None,
            out: dir.path().join("e.csv"),
        };
        let err = cmd_embed(&opts).unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }

    #[test]
    fn evaluate_identity_embedding() {
        let dir = tempfile::tempdir().unwrap();
        // 2-D dataset evaluated against itself.
        let pts: Vec<String> = (0..30)
            .map(|i| {
                let x = (i as f64 * 0.7).sin() * 3.0;
                let y = (i as f64 * 1.3).cos() * 2.0;
                format!("{x},{y},0")
            })
            .collect();
        let input = dir.path().join("self.csv");
        std::fs::write(&input, format!("x,y,label\n{}\n", pts.join("\n"))).unwrap();
        let report = cmd_evaluate(&EvaluateOptions {
            dataset: DatasetSpec::Csv { path: input.clone(), has_labels: true },
            embedding: input,
            subsample: None,
            subsample_seed: 0,
            k: 5,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            normalize_distances: false,
            out: Some(dir.path().join("r.json")),
        })
        .unwrap();
        assert_eq!(report.trustworthiness, 1.0);
        assert_eq!(report.continuity, 1.0);
        for m in report.dtm.iter().chain(report.kl.iter()) {
            assert!(m.value.abs() < 1e-12);
        }
        // JSON round trip matches the text table values.
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap())
                .unwrap();
        assert_eq!(json["trustworthiness"], 1.0);
        let text = format_report_text(&report);
        assert!(text.contains("trustworthiness"));
        assert!(text.contains("1.0000"));
    }

    #[test]
    fn evaluate_row_mismatch_errors() {
        let dir = tempfile::tempdir().unwrap();
        let input = tiny_spheres_csv(dir.path());
        let emb = dir.path().join("short.csv");
        std::fs::write(&emb, "x,y,label\n1.0,2.0,0\n").unwrap();
        let err = cmd_evaluate(&EvaluateOptions {
            dataset: DatasetSpec::Csv { path: input, has_labels: true },
            embedding: emb,
            subsample: None,
            subsample_seed: 0,
            k: 5,
            sigmas: vec![0.1],
            normalize_distances: false,
            out: None,
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn benchmark_emits_consistent_markdown_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let input = tiny_spheres_csv(dir.path());
        let md = dir.path().join("bench.md");
        let json = dir.path().join("bench.json");
        let bench = cmd_benchmark(&BenchmarkOptions {
            dataset: DatasetSpec::Csv { path: input, has_labels: true },
            subsample: None,
            cfg: OptimizationConfig {
                k: 8,
                global_epochs: 20,
                local_epochs: 20,
                ..OptimizationConfig::default()
            },
            k_metrics: 5,
            sigmas: vec![0.1],
            normalize_distances: true,
            grid: false,
            out_markdown: md.clone(),
            out_json: json.clone(),
        })
        .unwrap();
        assert_eq!(bench.rows.len(), 2);
        let md_text = std::fs::read_to_string(md).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        // Same numbers in both formats.
        let kl_pca = parsed["rows"][0]["report"]["kl"][0]["value"].as_f64().unwrap();
        assert!(md_text.contains(&format!("{kl_pca:.4}")));
        assert!(md_text.contains("**"));
    }

    #[test]
    fn plot_from_embedding_csv() {
        let dir = tempfile::tempdir().unwrap();
        let emb = dir.path().join("e.csv");
        std::fs::write(&emb, "x,y,label\n0.0,0.0,0\n1.0,1.0,1\n2.0,0.0,2\n").unwrap();
        let out = dir.path().join("e.svg");
        cmd_plot(&PlotOptions { embedding: emb, out: out.clone() }).unwrap();
        let svg = std::fs::read_to_string(out).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn threads_do_not_change_embedding() {
        let dir = tempfile::tempdir().unwrap();
        let input = tiny_spheres_csv(dir.path());
        let cfg = OptimizationConfig {
            k: 8,
            global_epochs: 10,
            local_epochs: 10,
            seed: 5,
            ..OptimizationConfig::default()
        };
        let mut outputs = Vec::new();
        for threads in [1usize, 4] {
            let out = dir.path().join(format!("t{threads}.csv"));
            let opts = EmbedOptions {
                dataset: DatasetSpec::Csv { path: input.clone(), has_labels: true },
                algo: Algorithm::Umato,
                cfg: cfg.clone(),
                subsample: None,
                out: out.clone(),
            };
            with_threads(Some(threads), || cmd_embed(&opts)).unwrap();
            outputs.push(std::fs::read(out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
    }
}
