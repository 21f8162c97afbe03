use std::path::PathBuf;
use std::sync::Arc;

use log::warn;
use serde::Serialize;

use crashsynth::ctgan::{CtganConfig, CtganModel};
use crashsynth::evalkit::{dense_regions, divergence, joint_density, marginal_histogram, vif, DEFAULT_BINS};
use crashsynth::glm::{inference_report, DesignMatrix, ModelFit};
use crashsynth::montecarlo::{counts_for_ratio, run_sweep};
use crashsynth::pipeline::{self, PipelineConfig, RatioPlan};
use crashsynth::resampling::ResamplePlan;
use crashsynth::rng::derive_seed;
use crashsynth::tabular::{load_csv, write_csv_to, DataSchema, Dataset};

use crate::artifacts::{sha256_hex, RunDir};
use crate::config::{existing, required, FileConfig, ResampleSection};
use crate::{CliError, Common, DataArgs, PlanArgs};

fn file_config(common: &Common) -> Result<FileConfig, CliError> {
    match &common.config {
        Some(p) => FileConfig::load(&existing(p.clone(), "config")?),
        None => Ok(FileConfig::default()),
    }
}

fn load_schema(path: PathBuf) -> Result<Arc<DataSchema>, CliError> {
    Ok(Arc::new(DataSchema::load(existing(path, "schema")?)?))
}

fn load_data(flags: &DataArgs, file: &FileConfig, run: &mut RunDir) -> Result<Dataset, CliError> {
    let data = existing(required(flags.data.clone(), file.data.clone(), "data")?, "data")?;
    let schema_path = existing(required(flags.schema.clone(), file.schema.clone(), "schema")?, "schema")?;
    let schema = load_schema(schema_path.clone())?;
    run.input(&data);
    run.input(&schema_path);
    Ok(load_csv(&data, schema)?)
}

fn out_dir(common: &Common, file: &FileConfig, command: &str) -> Result<RunDir, CliError> {
    RunDir::create(required(common.out.clone(), file.out.clone(), "out")?, command)
}

fn seed(common: &Common, file: &FileConfig) -> Result<u64, CliError> {
    required(common.seed, file.seed, "seed")
}

fn merged_section(flags: &PlanArgs, file: Option<&ResampleSection>) -> ResampleSection {
    let f = file.cloned().unwrap_or_default();
    ResampleSection {
        method: flags.method.or(f.method),
        targets: flags.targets.clone().or(f.targets),
        ratio: flags.ratio.clone().or(f.ratio),
        ru_targets: flags.ru_targets.clone().or(f.ru_targets),
        ru_ratio: flags.ru_ratio.clone().or(f.ru_ratio),
        k_neighbors: flags.k_neighbors.or(f.k_neighbors),
    }
}

fn ctgan_config(flags: &PlanArgs, file: &FileConfig) -> CtganConfig {
    let mut c = if flags.desk {
        CtganConfig::desk()
    } else {
        file.ctgan.clone().unwrap_or_default()
    };
    if let Some(e) = flags.epochs {
        c.epochs = e;
    }
    c
}

fn ratio_plan(section: &ResampleSection, ctgan: CtganConfig) -> Result<Option<RatioPlan>, CliError> {
    match (section.method, &section.ratio) {
        (None, None) => Ok(None),
        (Some(method), Some(ratio)) => Ok(Some(RatioPlan {
            method,
            ratio: ratio.clone(),
            ru_ratio: section.ru_ratio.clone(),
            k_neighbors: section.k_neighbors.unwrap_or(5),
            ctgan,
        })),
        (None, Some(_)) => Err(CliError::Config("a ratio needs a method".into())),
        (Some(_), None) => Err(CliError::Config("give the final class ratio (ratio)".into())),
    }
}

fn toml_string(v: &impl Serialize) -> String {
    toml::to_string(v).expect("configuration serializes")
}

#[derive(Serialize)]
struct Provenance<'a> {
    method: crashsynth::resampling::Method,
    input_counts: Vec<usize>,
    targets: &'a [usize],
    ru_targets: Option<&'a [usize]>,
    output_counts: Vec<usize>,
    seed: u64,
    plan_digest: String,
}

pub fn resample(common: &Common, data_args: &DataArgs, plan_args: &PlanArgs) -> Result<(), CliError> {
    let file = file_config(common)?;
    let seed = seed(common, &file)?;
    let mut run = out_dir(common, &file, "resample")?;
    let data = load_data(data_args, &file, &mut run)?;
    let section = merged_section(plan_args, file.resample.as_ref());
    let ctgan = ctgan_config(plan_args, &file);
    let stage_seed = derive_seed(seed, "resample");
    let method = section
        .method
        .ok_or_else(|| CliError::Config("missing required setting 'method'".into()))?;
    let plan = match (&section.targets, &section.ratio) {
        (Some(t), None) => {
            let mut p = ResamplePlan::new(method, t.clone(), stage_seed);
            p.ru_targets = match (&section.ru_targets, &section.ru_ratio) {
                (Some(t), _) => Some(t.clone()),
                (None, Some(r)) => Some(counts_for_ratio(&data.class_counts(), r)?),
                (None, None) => None,
            };
            p.k_neighbors = section.k_neighbors.unwrap_or(5);
            p.ctgan = ctgan;
            p
        }
        (None, Some(_)) => ratio_plan(&section, ctgan)?
            .expect("method and ratio present")
            .resolve(&data.class_counts(), stage_seed)?,
        (Some(_), Some(_)) => return Err(CliError::Config("give targets or ratio, not both".into())),
        (None, None) => return Err(CliError::Config("missing required setting 'targets' or 'ratio'".into())),
    };
    let out = plan.apply(&data)?;
    let mut csv = Vec::new();
    write_csv_to(&mut csv, &out)?;
    run.write("resampled.csv", &csv)?;
    let plan_toml = plan.to_toml_string();
    let resolved_ru = match plan.method {
        crashsynth::resampling::Method::CtganRu => Some(plan.resolve_ru_targets(&data.class_counts())?),
        _ => None,
    };
    run.write_json(
        "resampled.provenance.json",
        &Provenance {
            method: plan.method,
            input_counts: data.class_counts(),
            targets: &plan.targets,
            ru_targets: resolved_ru.as_deref(),
            output_counts: out.class_counts(),
            seed,
            plan_digest: sha256_hex(plan_toml.as_bytes()),
        },
    )?;
    run.seed = Some(seed);
    run.sub_seeds.insert("resample".into(), stage_seed);
    run.sub_seeds.insert("train".into(), derive_seed(stage_seed, "train"));
    run.config = plan_toml;
    let counts: Vec<String> = out.class_counts().iter().map(usize::to_string).collect();
    println!("class counts {}", counts.join("/"));
    run.finish()?;
    Ok(())
}

fn predictions_csv(y: &[usize], pred: &[usize]) -> String {
    let mut s = String::from("y_true,y_pred\n");
    for (a, b) in y.iter().zip(pred) {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

pub fn fit(common: &Common, data_args: &DataArgs, test: Option<PathBuf>, threshold: Option<f64>) -> Result<(), CliError> {
    let file = file_config(common)?;
    let mut run = out_dir(common, &file, "fit")?;
    let data = load_data(data_args, &file, &mut run)?;
    let test = test.or(file.test.clone()).map(|t| existing(t, "test")).transpose()?;
    let threshold = threshold.or(file.threshold).unwrap_or(0.5);
    let model = pipeline::fit_model(&data)?;
    let report = inference_report(&model)?;
    print!("{report}");
    run.write("report.txt", report.to_string())?;
    run.write("coefficients.csv", report.to_csv())?;
    let intercept = matches!(model, ModelFit::Binary(_));
    match vif(&DesignMatrix::from_dataset(&data, intercept)?) {
        Ok(v) => {
            let mut s = String::from("name,vif\n");
            for e in v {
                s.push_str(&format!("{},{}\n", e.name, e.value));
            }
            run.write("vif.csv", s)?;
        }
        Err(e) => warn!("VIF skipped: {e}"),
    }
    if let Some(t) = test {
        run.input(&t);
        let test = load_csv(&t, data.schema_arc())?;
        let pred = pipeline::predict_classes(&model, &test, threshold)?;
        run.write("predictions.csv", predictions_csv(test.labels(), &pred))?;
        let eval = pipeline::evaluate(test.labels(), &pred, data.schema().n_classes())?;
        run.write_json("metrics.json", &eval)?;
        println!("held-out G-mean {:.4}", eval.g_mean());
    }
    run.config = toml_string(&FileConfig {
        threshold: Some(threshold),
        ..FileConfig::default()
    });
    run.finish()?;
    Ok(())
}

fn read_predictions(path: &PathBuf) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (ct, cp) = (col("y_true")?, col("y_pred")?);
    let (mut y, mut p) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |c: usize| {
            rec.get(c)
                .and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| bad(format!("row {}: expected a class index", i + 1)))
        };
        y.push(parse(ct)?);
        p.push(parse(cp)?);
    }
    Ok((y, p))
}

pub fn evaluate(common: &Common, predictions: Option<PathBuf>, classes: Option<usize>) -> Result<(), CliError> {
    let file = file_config(common)?;
    let path = existing(required(predictions, file.predictions.clone(), "predictions")?, "predictions")?;
    let mut run = out_dir(common, &file, "evaluate")?;
    run.input(&path);
    let (y, p) = read_predictions(&path)?;
    let classes = classes
        .or(file.classes)
        .unwrap_or_else(|| y.iter().chain(&p).max().map_or(2, |m| (m + 1).max(2)));
    let eval = pipeline::evaluate(&y, &p, classes)?;
    for (name, v) in eval.metrics() {
        println!("{name:<18}{v:.4}");
    }
    run.write_json("metrics.json", &eval)?;
    run.config = toml_string(&FileConfig {
        classes: Some(classes),
        ..FileConfig::default()
    });
    run.finish()?;
    Ok(())
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct MarginalSummary {
    column: String,
    tv_distance: f64,
    residuals: Vec<f64>,
}

#[derive(Serialize)]
struct JointSummary {
    columns: [String; 2],
    tv_distance: f64,
    dense_regions_real: usize,
    dense_regions_synthetic: usize,
}

#[derive(Serialize)]
struct Divergences {
    bins: usize,
    marginals: Vec<MarginalSummary>,
    joints: Vec<JointSummary>,
}

pub fn diagnose(
    common: &Common,
    real: Option<PathBuf>,
    synthetic: Option<PathBuf>,
    schema: Option<PathBuf>,
    bins: Option<usize>,
    pairs: Option<Vec<String>>,
) -> Result<(), CliError> {
    let file = file_config(common)?;
    let real_path = existing(required(real, file.real.clone(), "real")?, "real")?;
    let syn_path = existing(required(synthetic, file.synthetic.clone(), "synthetic")?, "synthetic")?;
    let schema_path = existing(required(schema, file.schema.clone(), "schema")?, "schema")?;
    let mut run = out_dir(common, &file, "diagnose")?;
    for p in [&real_path, &syn_path, &schema_path] {
        run.input(p);
    }
    let schema = load_schema(schema_path)?;
    let real = load_csv(&real_path, Arc::clone(&schema))?;
    let syn = load_csv(&syn_path, schema.clone())?;
    let bins = bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let names: Vec<String> = schema.columns().iter().map(|c| c.name.clone()).collect();
    let pairs: Vec<(String, String)> = match pairs.or(file.pairs.clone()) {
        Some(list) => list
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .ok_or_else(|| CliError::Config(format!("pair '{p}' is not of the form a:b")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..names.len())
            .flat_map(|i| (i + 1..names.len()).map(move |j| (i, j)))
            .map(|(i, j)| (names[i].clone(), names[j].clone()))
            .collect(),
    };
    let mut summary = Divergences {
        bins,
        marginals: Vec::new(),
        joints: Vec::new(),
    };
    for name in &names {
        let grid = marginal_histogram(&real, &syn, name, bins)?;
        let d = divergence(&grid)?;
        run.write(&format!("marginal_{}_real.csv", slug(name)), grid.to_csv(false))?;
        run.write(&format!("marginal_{}_synthetic.csv", slug(name)), grid.to_csv(true))?;
        println!("{name:<20} TV {:.4}", d.tv_distance);
        summary.marginals.push(MarginalSummary {
            column: name.clone(),
            tv_distance: d.tv_distance,
            residuals: d.residuals,
        });
    }
    for (a, b) in &pairs {
        let grid = joint_density(&real, &syn, a, b, bins)?;
        let d = divergence(&grid)?;
        let stem = format!("joint_{}__{}", slug(a), slug(b));
        run.write(&format!("{stem}_real.csv"), grid.to_csv(false))?;
        run.write(&format!("{stem}_synthetic.csv"), grid.to_csv(true))?;
        summary.joints.push(JointSummary {
            columns: [a.clone(), b.clone()],
            tv_distance: d.tv_distance,
            dense_regions_real: dense_regions(&grid, false, 0.5)?,
            dense_regions_synthetic: dense_regions(&grid, true, 0.5)?,
        });
    }
    run.write_json("divergences.json", &summary)?;
    run.config = toml_string(&FileConfig {
        bins: Some(bins),
        pairs: Some(pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect()),
        ..FileConfig::default()
    });
    run.finish()?;
    Ok(())
}

pub fn mc_run(common: &Common, replications: Option<usize>, full: bool) -> Result<(), CliError> {
    let file = file_config(common)?;
    if file.scenario.is_empty() {
        return Err(CliError::Config("mc-run needs at least one [[scenario]] in --config".into()));
    }
    let seed = seed(common, &file)?;
    let r = if full {
        1000
    } else {
        replications.or(file.replications).unwrap_or(100)
    };
    for s in &file.scenario {
        s.validate()?;
    }
    let mut run = out_dir(common, &file, "mc-run")?;
    if let Some(p) = &common.config {
        run.input(p);
    }
    let mut records = String::new();
    let mut boxes = String::new();
    let mut amse = String::from("scenario,arm,replications,failures,amse\n");
    let mut calibrations = serde_json::Map::new();
    let mut failures = String::from("scenario,arm,replication,seed,message\n");
    for (i, s) in file.scenario.iter().enumerate() {
        let base = derive_seed(seed, &format!("mc.{}", s.name));
        run.sub_seeds.insert(format!("mc.{}", s.name), base);
        let out = run_sweep(s, r, base)?;
        calibrations.insert(s.name.clone(), serde_json::to_value(&out.calibration).expect("serializable"));
        for arm in &out.arms {
            let csv = arm.records_csv();
            if i == 0 && records.is_empty() {
                records.push_str(&csv);
            } else {
                records.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
            }
            boxes.push_str(&arm.boxes_csv(boxes.is_empty()));
            amse.push_str(&format!(
                "{},{},{},{},{:e}\n",
                arm.scenario,
                arm.arm,
                arm.replications(),
                arm.failures.len(),
                arm.amse
            ));
            for f in &arm.failures {
                failures.push_str(&format!("{},{},{},{},\"{}\"\n", arm.scenario, arm.arm, f.replication, f.seed, f.message.replace('"', "'")));
            }
            println!("{:<24}{:<8} AMSE {:.5}", arm.scenario, arm.arm, arm.amse);
        }
    }
    run.write("replications.csv", records)?;
    run.write("boxplot.csv", boxes)?;
    run.write("amse.csv", amse)?;
    run.write("failures.csv", failures)?;
    run.seed = Some(seed);
    run.extra = serde_json::json!({ "replications": r, "calibration": calibrations });
    run.config = toml_string(&FileConfig {
        seed: Some(seed),
        replications: Some(r),
        scenario: file.scenario.clone(),
        ..FileConfig::default()
    });
    run.finish()?;
    Ok(())
}

pub fn seeds_sweep(
    common: &Common,
    data_args: &DataArgs,
    plan_args: &PlanArgs,
    seeds: Option<Vec<u64>>,
    threshold: Option<f64>,
) -> Result<(), CliError> {
    let file = file_config(common)?;
    let seeds = required(seeds, file.seeds.clone(), "seeds")?;
    let mut run = out_dir(common, &file, "seeds-sweep")?;
    let data = load_data(data_args, &file, &mut run)?;
    let mut cfg: PipelineConfig = file.pipeline.clone().unwrap_or_default();
    let section = merged_section(plan_args, file.resample.as_ref());
    if let Some(p) = ratio_plan(&section, ctgan_config(plan_args, &file))? {
        cfg.rebalance = Some(p);
    }
    if let Some(t) = threshold.or(file.threshold) {
        cfg.threshold = t;
    }
    let sweep = pipeline::seeds_sweep(&data, &cfg, &seeds)?;
    print!("{sweep}");
    run.write("sweep.csv", sweep.to_csv())?;
    for s in &seeds {
        run.sub_seeds.insert(format!("split.{s}"), derive_seed(*s, "split"));
        run.sub_seeds.insert(format!("resample.{s}"), derive_seed(*s, "resample"));
    }
    run.config = toml_string(&FileConfig {
        seeds: Some(seeds),
        pipeline: Some(cfg),
        ..FileConfig::default()
    });
    run.finish()?;
    Ok(())
}

pub fn generate(
    common: &Common,
    data_args: &DataArgs,
    plan_args: &PlanArgs,
    model_path: Option<PathBuf>,
    n: Option<usize>,
    condition: Option<String>,
) -> Result<(), CliError> {
    let file = file_config(common)?;
    let seed = seed(common, &file)?;
    let n = required(n, file.n, "n")?;
    let mut run = out_dir(common, &file, "generate")?;
    let cfg = ctgan_config(plan_args, &file).with_seed(derive_seed(seed, "train"));
    let model = match model_path.or(file.model.clone()) {
        Some(p) => {
            let p = existing(p, "model")?;
            run.input(&p);
            CtganModel::load(&p)?
        }
        None => {
            let data = load_data(data_args, &file, &mut run)?;
            let m = CtganModel::train(&data, &cfg)?;
            run.write("model.bundle", m.to_bytes())?;
            m
        }
    };
    let condition = condition.or(file.condition.clone());
    let fixed = match &condition {
        Some(c) => {
            let (col, cat) = c
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("condition '{c}' is not of the form column=category")))?;
            let idx = model.schema().require_index(col)?;
            let k = model
                .schema()
                .category_index(idx, cat)
                .ok_or_else(|| CliError::Config(format!("column {col} has no category '{cat}'")))?;
            Some((col.to_string(), k))
        }
        None => None,
    };
    let gen_seed = derive_seed(seed, "generate");
    let rows = model.generate(n, fixed.as_ref().map(|(c, k)| (c.as_str(), *k)), gen_seed)?;
    let mut csv = Vec::new();
    write_csv_to(&mut csv, &rows)?;
    run.write("synthetic.csv", csv)?;
    run.seed = Some(seed);
    run.sub_seeds.insert("train".into(), cfg.seed);
    run.sub_seeds.insert("generate".into(), gen_seed);
    run.config = toml_string(&FileConfig {
        seed: Some(seed),
        n: Some(n),
        condition,
        ctgan: Some(cfg),
        ..FileConfig::default()
    });
    println!("wrote {n} rows");
    run.finish()?;
    Ok(())
}
