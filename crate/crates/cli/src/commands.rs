use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mixcg::dataset::IngestOptions;
use mixcg::{
    auc, fit_all, gen_graph, gen_params, roc, roc_edges, sample, stability_select, CgParams,
    DotStyle, Execution, FitAllOptions, GraphEstimate, GraphSpec, GridSpec, Level, MarkovGraph,
    MixedDataset, MixedDims, Node, ParamGenSpec, Schema, StabilityOptions,
};
use serde::Serialize;

use crate::config::{
    EstimateConfig, EvalConfig, FitConfig, InputConfig, Kind, RhoChoice, SimulateConfig,
    StabilityConfig,
};
use crate::UsageError;

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    threads: Option<usize>,
    config: &'a C,
}

fn write_provenance<C: Serialize>(
    out: &Path,
    command: &str,
    threads: Option<usize>,
    config: &C,
) -> Result<()> {
    let p = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        threads,
        config,
    };
    write(
        out.join(format!("{command}.provenance.json")),
        serde_json::to_string_pretty(&p)? + "\n",
    )
}

fn write(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn usage(e: impl std::fmt::Display) -> UsageError {
    UsageError(e.to_string())
}

pub fn simulate(cfg: &SimulateConfig, threads: Option<usize>) -> Result<()> {
    let dims = MixedDims::binary(cfg.q, cfg.p);
    let mut spec = match cfg.kind {
        Kind::Chain => GraphSpec::chain(dims, cfg.edges, cfg.seed),
        Kind::ErdosRenyi => {
            let cap = cfg.max_degree.unwrap_or(dims.num_nodes());
            GraphSpec::erdos_renyi(dims, cfg.edges, cap, cfg.seed)
        }
        Kind::Hub => GraphSpec::hub(
            dims,
            cfg.edges,
            cfg.hub_degree.expect("validated"),
            cfg.seed,
        ),
        Kind::Clique => GraphSpec::clique(dims, cfg.clique_size.expect("validated"), cfg.seed),
    };
    if cfg.max_degree.is_some() {
        spec.max_degree = cfg.max_degree;
    }
    spec = spec.with_triangle_free(cfg.triangle_free);
    if let Some(a) = cfg.max_attempts {
        spec = spec.with_max_attempts(a);
    }
    let graph = gen_graph(&spec).map_err(usage)?;
    let params = gen_params(
        &graph,
        &ParamGenSpec {
            scale: cfg.scale,
            interactions: cfg.interactions,
            ..ParamGenSpec::seeded(cfg.seed)
        },
    )?;
    let data = sample(&params, cfg.n, cfg.seed)?;

    create_dir(&cfg.out)?;
    let data_path = cfg.out.join("data.csv");
    data.write_csv_path(&data_path)
        .with_context(|| format!("writing {}", data_path.display()))?;
    write(cfg.out.join("schema.json"), data.schema.to_json()? + "\n")?;
    write(
        cfg.out.join("truth_params.json"),
        serde_json::to_string_pretty(&params)? + "\n",
    )?;
    write(cfg.out.join("truth_graph.json"), graph.to_json()? + "\n")?;
    write(cfg.out.join("truth.dot"), graph.to_dot())?;
    write_provenance(&cfg.out, "simulate", threads, cfg)?;
    println!(
        "simulated {} rows, {} edges (max degree {}) into {}",
        cfg.n,
        graph.num_edges(),
        graph.max_degree(),
        cfg.out.display()
    );
    Ok(())
}

fn load(input: &InputConfig) -> Result<MixedDataset> {
    let text = fs::read_to_string(&input.schema).map_err(|e| {
        usage(format!(
            "cannot read schema {}: {e}",
            input.schema.display()
        ))
    })?;
    let schema =
        Schema::from_json(&text).map_err(|e| usage(format!("{}: {e}", input.schema.display())))?;
    let options = IngestOptions {
        rare_label_threshold: input.rare_labels,
        standardize: input.standardize_input,
    };
    let data = MixedDataset::read_csv_path(&input.data, &schema, &options)
        .map_err(|e| usage(format!("{}: {e}", input.data.display())))?;
    if data.q() + data.p() < 2 {
        return Err(usage("need at least two variables").into());
    }
    Ok(data)
}

/// Node style from a file keyed by column or node names, plus column names as
/// labels wherever they differ from the node names.
fn node_style(input: &InputConfig, data: &MixedDataset) -> Result<DotStyle> {
    let mut by_column: BTreeMap<String, String> = BTreeMap::new();
    for j in 0..data.q() {
        by_column.insert(
            data.discrete_name(j).to_owned(),
            Node::Discrete(j).to_string(),
        );
    }
    for g in 0..data.p() {
        by_column.insert(
            data.continuous_name(g).to_owned(),
            Node::Continuous(g).to_string(),
        );
    }
    let mut style = DotStyle::default();
    for (col, node) in &by_column {
        if col != node {
            style.labels.insert(node.clone(), col.clone());
        }
    }
    let Some(path) = &input.node_style else {
        return Ok(style);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let file: DotStyle = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    let resolve = |name: &str| -> Result<String> {
        if let Some(node) = by_column.get(name) {
            return Ok(node.clone());
        }
        match name.parse::<Node>() {
            Ok(node) if data.dims().contains(node) => Ok(node.to_string()),
            _ => Err(usage(format!("{}: unknown node {name:?}", path.display())).into()),
        }
    };
    for (name, color) in file.colors {
        style.colors.insert(resolve(&name)?, color);
    }
    for (name, label) in file.labels {
        style.labels.insert(resolve(&name)?, label);
    }
    Ok(style)
}

fn fit_options(est: &EstimateConfig, grid: GridSpec) -> FitAllOptions {
    FitAllOptions {
        standardize: est.standardize,
        penalty_scale: est.penalty_scale.into(),
        execution: if est.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..FitAllOptions::default()
            .with_variant(est.penalty.into())
            .with_grid(grid)
    }
}

pub fn fit(cfg: &FitConfig, threads: Option<usize>) -> Result<()> {
    let data = load(&cfg.input)?;
    let style = node_style(&cfg.input, &data)?;
    let res = fit_all(&data, &fit_options(&cfg.estimate, cfg.grid.clone()))?;
    for f in &res.failures {
        eprintln!("warning: {}: {}", f.node, f.message);
    }

    create_dir(&cfg.out)?;
    let dot_dir = cfg.out.join("dot");
    create_dir(&dot_dir)?;
    for (i, est) in res.estimates.iter().enumerate() {
        write(dot_dir.join(format!("rho_{i:03}.dot")), est.to_dot(&style))?;
    }
    let doc = serde_json::json!({
        "penalty": cfg.estimate.penalty,
        "grid": res.grid,
        "failures": res.failures,
        "estimates": res.estimates.iter().map(GraphEstimate::to_json_value).collect::<Vec<_>>(),
    });
    write(
        cfg.out.join("estimates.json"),
        serde_json::to_string_pretty(&doc)? + "\n",
    )?;
    write_provenance(&cfg.out, "fit", threads, cfg)?;
    let sizes: Vec<usize> = res.estimates.iter().map(|e| e.edge_scores.len()).collect();
    println!(
        "fit {} grid points, {} to {} edges, {} failed regressions, into {}",
        res.grid.len(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0),
        res.failures.len(),
        cfg.out.display()
    );
    Ok(())
}

enum Truth {
    Params(CgParams),
    Graph(MarkovGraph),
}

fn read_truth(path: &Path) -> Result<Truth> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(params) = serde_json::from_str::<CgParams>(&text) {
        return Ok(Truth::Params(params));
    }
    MarkovGraph::from_json(&text)
        .map(Truth::Graph)
        .map_err(|_| {
            usage(format!(
                "{}: neither parameters nor a graph",
                path.display()
            ))
            .into()
        })
}

fn read_estimates(path: &Path) -> Result<Vec<GraphEstimate>> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let list = doc
        .get("estimates")
        .and_then(|v| v.as_array())
        .ok_or_else(|| usage(format!("{}: no estimates array", path.display())))?;
    list.iter()
        .map(|v| {
            GraphEstimate::from_json_value(v)
                .map_err(|e| usage(format!("{}: {e}", path.display())).into())
        })
        .collect()
}

pub fn eval(cfg: &EvalConfig) -> Result<()> {
    let estimates = read_estimates(&cfg.estimates)?;
    let table = match read_truth(&cfg.truth)? {
        Truth::Params(p) => roc(&p, &estimates),
        Truth::Graph(g) => roc_edges(&g, &estimates),
    }
    .map_err(usage)?;

    create_dir(&cfg.out)?;
    let csv = cfg.out.join("roc.csv");
    table
        .write_csv(fs::File::create(&csv).with_context(|| format!("writing {}", csv.display()))?)?;
    let mut summary = serde_json::Map::new();
    summary.insert("fprCap".into(), cfg.fpr_cap.into());
    for level in [Level::Edge, Level::Parameter] {
        if table.level(level).next().is_none() {
            continue;
        }
        let a = auc(&table, level, cfg.fpr_cap)?;
        println!("{level} AUC (FPR <= {}): {a:.4}", cfg.fpr_cap);
        summary.insert(level.to_string(), a.into());
    }
    write(
        cfg.out.join("auc.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_provenance(&cfg.out, "eval", None, cfg)?;
    Ok(())
}

pub fn stability(cfg: &StabilityConfig, threads: Option<usize>) -> Result<()> {
    let data = load(&cfg.input)?;
    let style = node_style(&cfg.input, &data)?;
    let rho = match cfg.rho {
        RhoChoice::Absolute(r) => r,
        RhoChoice::Fraction(f) => {
            let head = fit_all(
                &data,
                &fit_options(&cfg.estimate, GridSpec::Auto { len: 1, ratio: 1.0 }),
            )?;
            f * head.grid[0]
        }
    };
    let options = StabilityOptions {
        rho,
        subsamples: cfg.subsamples,
        threshold: cfg.threshold,
        seed: cfg.seed,
        fit: fit_options(&cfg.estimate, GridSpec::Explicit(vec![rho])),
    };
    let res = stability_select(&data, &options)?;
    if !res.failures.is_empty() {
        eprintln!(
            "warning: {} subsample fits were incomplete",
            res.failures.len()
        );
    }

    create_dir(&cfg.out)?;
    write(cfg.out.join("stability.json"), res.to_json()? + "\n")?;
    write(cfg.out.join("stability.dot"), res.to_dot(&style))?;
    write_provenance(&cfg.out, "stability", threads, cfg)?;
    println!(
        "rho {rho:.6}: kept {} of {} selected edges at threshold {}",
        res.kept_edges.len(),
        res.edge_frequency.len(),
        cfg.threshold
    );
    Ok(())
}
