//! Implementations of the five subcommands: simulate, fit, summarize,
//! evaluate, distances.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mixsum::error::{Error, Result};
use mixsum::evaluate::{
    clustering_table, density_table, measure_density_grid, mean_density_grid,
    mixing_measure_table, simulate_four_component, DensityGrid, GridSpec,
};
use mixsum::gibbs::{conditional_density_refresh, run_chain, ChainSettings, PosteriorDraw};
use mixsum::measures::{DataMatrix, LabelVector, MixingMeasure};
use mixsum::ot::mixture_wasserstein_sq;
use mixsum::para::derive_seed;
use mixsum::partition::{expected_partition_loss, greedy_partition_summary, PartitionLoss};
use mixsum::sliced::{sample_directions, distance_between_samples, SlicedKind};
use mixsum::summarize::{summarize_posterior, DirectionMode, SummaryConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Canonical method order in tables: partition-first baselines, then the
/// measure-first metrics.
pub const METHOD_ORDER: [&str; 6] = ["binder", "vi", "omari", "sw", "mix_sw", "smix_w"];

enum Method {
    Sliced(SlicedKind),
    Partition(PartitionLoss),
}

fn parse_method(name: &str) -> Result<Method> {
    if let Ok(kind) = name.parse::<SlicedKind>() {
        return Ok(Method::Sliced(kind));
    }
    if let Ok(loss) = name.parse::<PartitionLoss>() {
        return Ok(Method::Partition(loss));
    }
    Err(Error::InvalidArgument(format!(
        "unknown method {name:?} (expected one of sw|vectorized|mix_sw|smix_w|binder|vi|omari)"
    )))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    config_hash: String,
    seed: u64,
    measure: MixingMeasure,
}

/// Accepts both the wrapped `{config_hash, seed, measure}` document and a
/// bare measure JSON.
pub fn read_measure_file(path: &Path) -> Result<MixingMeasure> {
    let text = read_file(path)?;
    if let Ok(doc) = serde_json::from_str::<MeasureDoc>(&text) {
        return Ok(doc.measure);
    }
    serde_json::from_str::<MixingMeasure>(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct DrawsMeta {
    config_hash: String,
    seed: u64,
    n: usize,
    dim: usize,
    draws: usize,
}

pub fn read_draws(path: &Path) -> Result<Vec<PosteriorDraw>> {
    let text = read_file(path)?;
    let mut draws = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 && serde_json::from_str::<DrawsMeta>(line).is_ok() {
            continue;
        }
        let draw: PosteriorDraw = serde_json::from_str(line).map_err(|e| Error::Csv {
            path: path.display().to_string(),
            line: i + 1,
            msg: format!("bad draw record: {e}"),
        })?;
        draws.push(draw);
    }
    if draws.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: no posterior draws",
            path.display()
        )));
    }
    Ok(draws)
}

/// `simulate`: four-component mixture data, truth measure, truth labels.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (data, truth, labels) = simulate_four_component(cfg.n, cfg.seed)?;
    let provenance = cfg.provenance();
    let mut csv = format!("# {provenance}\n");
    csv.push_str(&data.to_csv(Some(&["x1", "x2"])));
    write_file(&out.join("data.csv"), &csv)?;
    let doc = MeasureDoc { config_hash: cfg.hash(), seed: cfg.seed, measure: truth };
    write_file(
        &out.join("truth_measure.json"),
        &serde_json::to_string_pretty(&doc)?,
    )?;
    write_file(
        &out.join("truth_labels.csv"),
        &format!("# {provenance}\n{}", labels.to_csv()),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config_hash: String,
    seed: u64,
    n: usize,
    dim: usize,
    draws: usize,
    wall_time_seconds: f64,
    config: &'a RunConfig,
}

/// `fit`: blocked Gibbs run producing a JSON-lines draws file plus run
/// metadata.
pub fn fit(cfg: &RunConfig, data_path: &Path, out: &Path) -> Result<()> {
    let data = DataMatrix::read_csv(data_path)?;
    let dpmm = cfg.hyper.to_dpmm()?;
    let settings = ChainSettings {
        iterations: cfg.chain.iterations,
        burn_in: cfg.chain.burn_in,
        thin: cfg.chain.thin,
        seed: cfg.seed,
    };
    let start = Instant::now();
    let draws = run_chain(&data, &dpmm, &settings)?;
    let wall = start.elapsed().as_secs_f64();

    let meta = DrawsMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        n: data.len(),
        dim: data.dim(),
        draws: draws.len(),
    };
    let mut lines = vec![serde_json::to_string(&meta)?];
    for draw in &draws {
        lines.push(serde_json::to_string(draw)?);
    }
    lines.push(String::new());
    write_file(&out.join("draws.jsonl"), &lines.join("\n"))?;

    let run_meta = RunMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        n: data.len(),
        dim: data.dim(),
        draws: draws.len(),
        wall_time_seconds: wall,
        config: cfg,
    };
    write_file(&out.join("run_meta.json"), &serde_json::to_string_pretty(&run_meta)?)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct SummaryDoc {
    pub config_hash: String,
    pub seed: u64,
    pub method: String,
    /// "measure" or "partition".
    pub class: String,
    pub chosen_index: usize,
    /// Minimized objective at the optimum: the p-th-power sliced loss for
    /// measure methods, the partition loss for baselines.
    pub expected_loss: f64,
    pub row_averages: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projections: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MixingMeasure>,
}

/// `summarize`: one summary per requested method over a shared draws file.
pub fn summarize(
    cfg: &RunConfig,
    draws_path: &Path,
    data_path: &Path,
    out: &Path,
    extra_thin: usize,
) -> Result<()> {
    let all_draws = read_draws(draws_path)?;
    let draws: Vec<&PosteriorDraw> = all_draws.iter().step_by(extra_thin.max(1)).collect();
    let data = DataMatrix::read_csv(data_path)?;
    let measures: Vec<MixingMeasure> = draws.iter().map(|d| d.measure.clone()).collect();
    let labels: Vec<LabelVector> = draws.iter().map(|d| d.labels.clone()).collect();
    let direction_mode: DirectionMode = cfg.metric.directions.parse()?;
    let provenance = cfg.provenance();

    for (idx, name) in cfg.metric.kinds.iter().enumerate() {
        let method_seed = derive_seed(cfg.seed, 100 + idx as u64);
        let doc = match parse_method(name)? {
            Method::Sliced(kind) => {
                let summary_cfg = SummaryConfig {
                    kind,
                    order: cfg.metric.order,
                    projections: cfg.metric.projections,
                    seed: method_seed,
                    prune_floor: cfg.metric.prune_floor,
                    direction_mode,
                };
                let summary = summarize_posterior(&measures, &data, &summary_cfg)?;
                write_file(
                    &out.join(format!("labels_{}.csv", kind.name())),
                    &format!("# {provenance}\n{}", summary.labels.to_csv()),
                )?;
                SummaryDoc {
                    config_hash: cfg.hash(),
                    seed: cfg.seed,
                    method: kind.name().to_string(),
                    class: "measure".to_string(),
                    chosen_index: summary.chosen_index,
                    expected_loss: summary.expected_loss,
                    row_averages: summary.row_averages,
                    order: Some(cfg.metric.order),
                    projections: Some(cfg.metric.projections),
                    measure: Some(summary.measure),
                }
            }
            Method::Partition(loss) => {
                let (chosen, best) = greedy_partition_summary(loss, &labels)?;
                let expected = expected_partition_loss(loss, &best, &labels)?;
                let row_averages: Vec<f64> = (0..labels.len())
                    .map(|i| expected_partition_loss(loss, &labels[i], &labels))
                    .collect::<Result<_>>()?;
                write_file(
                    &out.join(format!("labels_{}.csv", loss.name())),
                    &format!("# {provenance}\n{}", best.to_csv()),
                )?;
                SummaryDoc {
                    config_hash: cfg.hash(),
                    seed: cfg.seed,
                    method: loss.name().to_string(),
                    class: "partition".to_string(),
                    chosen_index: chosen,
                    expected_loss: expected,
                    row_averages,
                    order: None,
                    projections: None,
                    measure: None,
                }
            }
        };
        write_file(
            &out.join(format!("summary_{}.json", doc.method)),
            &serde_json::to_string_pretty(&doc)?,
        )?;
    }
    Ok(())
}

pub struct EvaluateInputs {
    pub draws: PathBuf,
    pub data: PathBuf,
    pub summaries: PathBuf,
    pub truth_measure: Option<PathBuf>,
    pub truth_labels: Option<PathBuf>,
    pub out: PathBuf,
}

/// `evaluate`: clustering, density, and mixing-measure tables (CSV), plus
/// plot-ready density grids.
pub fn evaluate(cfg: &RunConfig, inputs: &EvaluateInputs) -> Result<()> {
    let draws = read_draws(&inputs.draws)?;
    let data = DataMatrix::read_csv(&inputs.data)?;
    let truth_measure = match &inputs.truth_measure {
        Some(p) => Some(read_measure_file(p)?),
        None => None,
    };
    let truth_labels = match &inputs.truth_labels {
        Some(p) => Some(LabelVector::read_csv(p)?),
        None => None,
    };

    // collect the summaries present, in canonical order
    let mut methods: Vec<(String, SummaryDoc, LabelVector)> = Vec::new();
    for name in METHOD_ORDER {
        let path = inputs.summaries.join(format!("summary_{name}.json"));
        if !path.exists() {
            continue;
        }
        let doc: SummaryDoc = serde_json::from_str(&read_file(&path)?)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let labels = LabelVector::read_csv(&inputs.summaries.join(format!("labels_{name}.csv")))?;
        methods.push((name.to_string(), doc, labels));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no summary_<method>.json files under {}",
            inputs.summaries.display()
        )));
    }
    for (name, doc, _) in &methods {
        if doc.chosen_index >= draws.len() {
            return Err(Error::InvalidArgument(format!(
                "summary {name} selects draw {} but the draws file has {}",
                doc.chosen_index,
                draws.len()
            )));
        }
    }

    let provenance = cfg.provenance();
    let dpmm = cfg.hyper.to_dpmm()?;
    let order = cfg.metric.order;

    // clustering table
    let draw_labels: Vec<LabelVector> = draws.iter().map(|d| d.labels.clone()).collect();
    let label_rows: Vec<(String, LabelVector)> =
        methods.iter().map(|(n, _, l)| (n.clone(), l.clone())).collect();
    let clustering = clustering_table(&label_rows, &draw_labels, truth_labels.as_ref())?;
    write_file(&inputs.out.join("clustering.csv"), &clustering.to_csv(&provenance))?;

    // density grids
    let spec = GridSpec::from_data(&data, 1.0, cfg.evaluation.grid_resolution)?;
    let draw_grids: Vec<DensityGrid> =
        mixsum::para::par_map_slice(&draws, |d| measure_density_grid(&d.measure, &spec));
    let truth_grid = truth_measure.as_ref().map(|m| measure_density_grid(m, &spec));
    let mut method_grids: Vec<(String, DensityGrid)> = Vec::new();
    for (mi, (name, doc, _)) in methods.iter().enumerate() {
        let grid = if doc.class == "measure" {
            let measure = doc.measure.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("summary {name} is missing its measure"))
            })?;
            measure_density_grid(measure, &spec)
        } else {
            let refreshed = conditional_density_refresh(
                &draws[doc.chosen_index],
                &data,
                &dpmm,
                cfg.evaluation.refresh_iters,
                derive_seed(cfg.seed, 300 + mi as u64),
            )?;
            mean_density_grid(&refreshed, &spec)?
        };
        method_grids.push((name.clone(), grid));
    }
    let density = density_table(
        &method_grids,
        &draw_grids,
        truth_grid.as_ref(),
        cfg.evaluation.projections,
        order,
        derive_seed(cfg.seed, 200),
    )?;
    let density_note = format!("{provenance} tv=raw_grid_values sw=renormalized_grid_weights");
    write_file(&inputs.out.join("density.csv"), &density.to_csv(&density_note))?;

    // mixing-measure table over the measure-class methods
    let measure_methods: Vec<(String, MixingMeasure)> = methods
        .iter()
        .filter(|(_, doc, _)| doc.class == "measure")
        .map(|(n, doc, _)| (n.clone(), doc.measure.clone().expect("measure class")))
        .collect();
    if !measure_methods.is_empty() {
        let draw_measures: Vec<MixingMeasure> =
            draws.iter().map(|d| d.measure.clone()).collect();
        let table = mixing_measure_table(
            &measure_methods,
            &draw_measures,
            truth_measure.as_ref(),
            &[SlicedKind::Vectorized, SlicedKind::MixSw, SlicedKind::SMixW],
            cfg.evaluation.projections,
            order,
            derive_seed(cfg.seed, 201),
            cfg.evaluation.prune_floor,
        )?;
        write_file(&inputs.out.join("mixing_measure.csv"), &table.to_csv(&provenance))?;
    }

    if cfg.evaluation.emit_grids {
        for (name, grid) in &method_grids {
            write_file(&inputs.out.join(format!("grid_{name}.csv")), &grid.to_csv(&provenance))?;
        }
        if let Some(grid) = &truth_grid {
            write_file(&inputs.out.join("grid_truth.csv"), &grid.to_csv(&provenance))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DistancesDoc {
    config_hash: String,
    seed: u64,
    order: f64,
    projections: usize,
    left: String,
    right: String,
    /// Rooted (distance-scale) values per requested kind.
    distances: Vec<(String, f64)>,
}

/// `distances`: ad-hoc pairwise distances between two measure files.
/// Returns the JSON document printed to stdout.
pub fn distances(
    cfg: &RunConfig,
    left: &Path,
    right: &Path,
    kinds: &[String],
) -> Result<String> {
    let g1 = read_measure_file(left)?;
    let g2 = read_measure_file(right)?;
    let mut out = Vec::new();
    for (idx, name) in kinds.iter().enumerate() {
        let value = if name == "mw" {
            mixture_wasserstein_sq(&g1, &g2)?.sqrt()
        } else {
            let kind: SlicedKind = name.parse()?;
            let dirs = sample_directions(
                kind,
                g1.dim(),
                cfg.metric.projections,
                derive_seed(cfg.seed, idx as u64),
            );
            distance_between_samples(cfg.metric.order, &dirs, &g1, &g2)?
                .powf(1.0 / cfg.metric.order)
        };
        out.push((name.clone(), value));
    }
    let doc = DistancesDoc {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        order: cfg.metric.order,
        projections: cfg.metric.projections,
        left: left.display().to_string(),
        right: right.display().to_string(),
        distances: out,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

