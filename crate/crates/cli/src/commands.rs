use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use spikesim::ann::{self, AnnModel, TrainConfig};
use spikesim::convert::{collect_max_activations, normalize_and_convert, SnnNetwork};
use spikesim::mnist::{Dataset, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use spikesim::neuron::{
    potential_curve, read_transfer_curve, rescale, AccumulationModel, RescaleMode, DEFAULT_LAMBDA, PROBE_SPIKES,
    PROBE_WEIGHT, SWEEP_FACTORS,
};
use spikesim::sim::{demo_neutral_point, write_sidecar, EventOrder, InputMode, SimConfig, Simulator};

use crate::config::{ConfigFile, Resolver};
use crate::error::CliError;
use crate::{ConvertArgs, CurvesArgs, DataArgs, DemoArgs, SimArgs, SimulateArgs, SweepArgs, TrainArgs};

const DATA_ENV: &str = "SPIKESIM_DATA";

fn path(r: &mut Resolver, key: &str, flag: Option<PathBuf>, default: &str) -> Result<PathBuf, CliError> {
    let flag = flag.map(|p| p.display().to_string());
    Ok(PathBuf::from(r.get(key, flag, default.to_string())?))
}

fn data_dir(r: &mut Resolver, args: DataArgs) -> Result<PathBuf, CliError> {
    let default = std::env::var(DATA_ENV).unwrap_or_else(|_| "data/mnist".into());
    path(r, "data_dir", args.data_dir, &default)
}

fn load_split(dir: &Path, images: &str, labels: &str) -> Result<Dataset, CliError> {
    Ok(Dataset::load(&dir.join(images), &dir.join(labels), true)?)
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_meta(path: &Path, command: &str, r: &Resolver, extra: Value) -> Result<(), CliError> {
    let mut meta = json!({ "command": command, "config": r.resolved() });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    write_sidecar(path, &meta)?;
    Ok(())
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, value: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::String(value.to_string()))
        .map_err(|_| CliError::Config(format!("{key}: unsupported value {value:?}")))
}

pub fn train(file: &ConfigFile, a: TrainArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let dir = data_dir(&mut r, a.data)?;
    let arch: String = r.get("arch", a.arch, "lenet5".into())?;
    if arch != "lenet5" {
        return Err(CliError::Config(format!("unknown architecture {arch:?}")));
    }
    let cfg = TrainConfig {
        epochs: r.get("epochs", a.epochs, TrainConfig::default().epochs)?,
        batch_size: r.get("batch_size", a.batch_size, TrainConfig::default().batch_size)?,
        learning_rate: r.get("learning_rate", a.learning_rate, TrainConfig::default().learning_rate)?,
        seed: r.get("seed", a.seed, 0)?,
    };
    let subset: Option<usize> = r.optional("subset", a.subset)?;
    let out = path(&mut r, "out", a.out, "out/model.json")?;
    let log_default = out.with_extension("train.csv").display().to_string();
    let log = path(&mut r, "log", a.log, &log_default)?;

    let mut train_set = load_split(&dir, TRAIN_IMAGES, TRAIN_LABELS)?;
    let test_set = load_split(&dir, TEST_IMAGES, TEST_LABELS)?;
    if let Some(n) = subset {
        train_set = train_set.subset(n, cfg.seed)?;
    }
    let mut model = AnnModel::lenet5(cfg.seed);
    let logs = ann::train(&mut model, &train_set, &cfg)?;
    let test_error = ann::evaluate(&model, &test_set)?;

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    ann::save_model(&model, &out)?;
    let mut csv = String::from("epoch,loss,accuracy\n");
    for l in &logs {
        writeln!(csv, "{},{},{}", l.epoch, l.loss, l.accuracy).expect("writing to a String");
    }
    write_output(&log, &csv)?;
    write_meta(
        &log,
        "train",
        &r,
        json!({ "train_images": train_set.len(), "test_error": test_error }),
    )?;
    for l in &logs {
        println!("epoch {}: loss {:.4}, train accuracy {:.4}", l.epoch, l.loss, l.accuracy);
    }
    println!("test error {:.4} on {} images", test_error, test_set.len());
    println!("wrote {}", out.display());
    Ok(())
}

pub fn convert(file: &ConfigFile, a: ConvertArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let dir = data_dir(&mut r, a.data)?;
    let model_path = path(&mut r, "model", a.model, "out/model.json")?;
    let method: String = r.get("normalization", a.normalization, "data".into())?;
    if method != "data" {
        return Err(CliError::Config(format!("unknown normalization {method:?}")));
    }
    let norm_subset: Option<usize> = r.optional("norm_subset", a.norm_subset)?;
    let seed = r.get("seed", a.seed, 0u64)?;
    let out = path(&mut r, "out", a.out, "out/snn.json")?;

    let model = ann::load_model(&model_path)?;
    let mut sample = load_split(&dir, TRAIN_IMAGES, TRAIN_LABELS)?;
    if let Some(n) = norm_subset {
        sample = sample.subset(n, seed)?;
    }
    let stats = collect_max_activations(&model, &sample)?;
    let snn = normalize_and_convert(&model, &stats)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    snn.save(&out)?;
    println!("layer scales {:?}", stats.lambdas);
    println!("wrote {}", out.display());
    Ok(())
}

struct SimSetup {
    data_dir: PathBuf,
    snn_path: PathBuf,
    images: usize,
    config: SimConfig,
    lambda: f64,
    out: PathBuf,
}

fn sim_setup(r: &mut Resolver, a: SimArgs, default_out: &str) -> Result<SimSetup, CliError> {
    let data_dir = data_dir(r, a.data)?;
    let snn_path = path(r, "snn", a.snn, "out/snn.json")?;
    let images = r.get("images", a.images, 1000usize)?;
    if images == 0 {
        return Err(CliError::Config("images must be at least 1".into()));
    }
    let defaults = SimConfig::default();
    let input_mode: InputMode = parse_enum("input_mode", &r.get("input_mode", a.input_mode, "poisson".into())?)?;
    let event_order: EventOrder = parse_enum("event_order", &r.get("event_order", a.event_order, "per_event".into())?)?;
    let config = SimConfig {
        timesteps: r.get("timesteps", a.timesteps, defaults.timesteps)?,
        input_mode,
        max_rate: r.get("max_rate", a.max_rate, defaults.max_rate)?,
        seed: r.get("seed", a.seed, defaults.seed)?,
        event_order,
        model: AccumulationModel::Ideal,
        workers: r.get("workers", a.workers, defaults.workers)?,
    };
    config.validate()?;
    Ok(SimSetup {
        data_dir,
        snn_path,
        images,
        config,
        lambda: r.get("lambda", a.lambda, DEFAULT_LAMBDA)?,
        out: path(r, "out", a.out, default_out)?,
    })
}

impl SimSetup {
    fn load(&self) -> Result<(SnnNetwork, Dataset), CliError> {
        let snn = SnnNetwork::load(&self.snn_path)?;
        let test = load_split(&self.data_dir, TEST_IMAGES, TEST_LABELS)?;
        Ok((snn, test.take(self.images)))
    }
}

fn fit_mode() -> RescaleMode {
    RescaleMode::FitToMax {
        w_per_spike: PROBE_WEIGHT,
        n_spikes: PROBE_SPIKES,
    }
}

fn neuron_model(name: &str, lambda: f64, gain: f64, curve: Option<&Path>) -> Result<AccumulationModel, CliError> {
    Ok(match name {
        "ideal" => AccumulationModel::Ideal,
        "voltage" => AccumulationModel::voltage(lambda)?,
        "time" => AccumulationModel::time_domain(gain)?,
        "table" => {
            let path = curve.ok_or_else(|| CliError::Config("the table neuron needs --curve".into()))?;
            AccumulationModel::table(&read_transfer_curve(path)?)?
        }
        other => return Err(CliError::Config(format!("unknown neuron model {other:?}"))),
    })
}

pub fn simulate(file: &ConfigFile, a: SimulateArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let setup = sim_setup(&mut r, a.sim, "out/trace.csv")?;
    let neuron: String = r.get("neuron", a.neuron, "ideal".into())?;
    let gain = r.get("gain", a.gain, 1.0)?;
    let curve = r
        .optional("curve", a.curve.map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let stretch: String = r.get("rescale", a.rescale, "none".into())?;
    let mut model = neuron_model(&neuron, setup.lambda, gain, curve.as_deref())?;
    model = match stretch.as_str() {
        "none" => model,
        "fit" => rescale(model, fit_mode())?,
        factor => {
            let c = factor
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("rescale: expected a number, fit or none, got {factor:?}")))?;
            rescale(model, RescaleMode::Constant(c))?
        }
    };
    let config = setup.config.with_model(model);
    let (snn, images) = setup.load()?;
    let trace = Simulator::new(&snn, &config)?.run_dataset(&images)?;
    write_output(&setup.out, &trace.to_csv())?;
    write_meta(
        &setup.out,
        "simulate",
        &r,
        json!({
            "sim_config": config,
            "layer_scales": snn.lambdas(),
            "images": images.len(),
            "stabilized_error": trace.stabilized_error(),
        }),
    )?;
    println!("neuron {}", config.model.name());
    println!("stabilized error {:.4} over {} images", trace.stabilized_error(), images.len());
    println!("wrote {}", setup.out.display());
    Ok(())
}

pub fn sweep(file: &ConfigFile, a: SweepArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let setup = sim_setup(&mut r, a.sim, "out/sweep.csv")?;
    let factors: Vec<f64> = r.list("factors", a.factors, &SWEEP_FACTORS)?;
    let base = AccumulationModel::voltage(setup.lambda)?;
    let (snn, images) = setup.load()?;
    let mut rows = Vec::new();
    let mut modes: Vec<(String, RescaleMode)> = factors
        .iter()
        .map(|&c| (c.to_string(), RescaleMode::Constant(c)))
        .collect();
    modes.push(("fit".into(), fit_mode()));
    let mut csv = String::from("factor,stabilized_error\n");
    for (label, mode) in modes {
        let model = rescale(base.clone(), mode)?;
        let factor = match &model {
            AccumulationModel::Rescaled { factor, .. } => *factor,
            _ => 1.0,
        };
        let trace = Simulator::new(&snn, &setup.config.with_model(model))?.run_dataset(&images)?;
        let e = trace.stabilized_error();
        println!("factor {label} ({factor:.4}): stabilized error {e:.4}");
        writeln!(csv, "{label},{e}").expect("writing to a String");
        rows.push(json!({ "label": label, "factor": factor, "stabilized_error": e }));
    }
    write_output(&setup.out, &csv)?;
    write_meta(
        &setup.out,
        "sweep-rescale",
        &r,
        json!({ "sim_config": setup.config, "base_model": base, "rows": rows, "images": images.len() }),
    )?;
    println!("wrote {}", setup.out.display());
    Ok(())
}

pub fn demo(file: &ConfigFile, a: DemoArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let w = r.get("w", a.w, 0.1)?;
    let eps = r.get("eps", a.eps, 0.01)?;
    let theta = r.get("theta", a.theta, 0.2)?;
    let lambda = r.get("lambda", a.lambda, DEFAULT_LAMBDA)?;
    let steps = r.get("steps", a.steps, 1000usize)?;
    let out = path(&mut r, "out", a.out, "out/neutral_point.csv")?;
    let d = demo_neutral_point(w, eps, theta, lambda, steps)?;
    let mut csv = String::from("step,v_ideal,v_nonlinear\n");
    for (t, (vi, vn)) in d.ideal.trajectory.iter().zip(&d.nonlinear.trajectory).enumerate() {
        writeln!(csv, "{},{vi},{vn}", t + 1).expect("writing to a String");
    }
    write_output(&out, &csv)?;
    write_meta(
        &out,
        "demo-neutral-point",
        &r,
        json!({
            "ideal_spikes": d.ideal.spikes,
            "nonlinear_spikes": d.nonlinear.spikes,
            "neutral_point": d.neutral_point,
        }),
    )?;
    println!("ideal spikes {}", d.ideal.spikes);
    println!("nonlinear spikes {}", d.nonlinear.spikes);
    match d.neutral_point {
        Some(v) => println!("neutral point {v:.9}"),
        None => println!("neutral point none"),
    }
    if let Some(v) = d.nonlinear.trajectory.last() {
        println!("final nonlinear potential {v:.9}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn curves(file: &ConfigFile, a: CurvesArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let names: Vec<String> = r.list("models", a.models, &["ideal".to_string(), "voltage".into(), "time".into()])?;
    let w = r.get("w", a.w, PROBE_WEIGHT)?;
    let n = r.get("n", a.n, PROBE_SPIKES)?;
    let lambda = r.get("lambda", a.lambda, DEFAULT_LAMBDA)?;
    let gain = r.get("gain", a.gain, 1.0)?;
    let curve = r
        .optional("curve", a.curve.map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let out = path(&mut r, "out", a.out, "out/curves.csv")?;
    if names.is_empty() {
        return Err(CliError::Config("no models given".into()));
    }
    let mut columns = Vec::new();
    let mut models = Vec::new();
    for name in &names {
        let m = neuron_model(name, lambda, gain, curve.as_deref())?;
        columns.push(potential_curve(&m, w, n)?);
        models.push(m);
    }
    let mut csv = format!("n,{}\n", names.join(","));
    for k in 0..=n {
        write!(csv, "{k}").expect("writing to a String");
        for c in &columns {
            write!(csv, ",{}", c[k].1).expect("writing to a String");
        }
        csv.push('\n');
    }
    write_output(&out, &csv)?;
    write_meta(&out, "curves", &r, json!({ "models": models }))?;
    println!("wrote {}", out.display());
    Ok(())
}
