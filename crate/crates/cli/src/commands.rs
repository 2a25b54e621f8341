use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use blockcirc::quantize::dequantize_network;
use blockcirc::{
    compression_report, evaluate, grad_check, init_network, load_mnist_dir, load_model, maxpool_forward, quantize_network,
    save_model, synth_dataset, train, Dataset, Network, NetworkSpec, OpCounter, Precision, Stage, Tensor, TrainConfig,
};
use blockcirc_hw::{explore_grid, optimize_design, workload_of, Defaults, MetricMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::options::{
    ArchSource, BenchArgs, Cli, Command, CompressArgs, DataArgs, DataKind, EvalArgs, ExploreArgs, GradCheckArgs, NetSource,
    PrecisionArg, TrainArgs,
};
use crate::Failure;

pub const DEFAULT_ARCH: &str = include_str!("../archs/mnist-mlp.arch");

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::CompressReport(a) => cmd_compress(a),
        Command::GradCheck(a) => cmd_grad_check(a),
        Command::Explore(a) => cmd_explore(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("{}: {e}", path.display())),
        _ => Failure::Data(format!("{}: {e}", path.display())),
    })
}

fn parse_arch(text: &str) -> Result<NetworkSpec, Failure> {
    Ok(text.parse::<NetworkSpec>()?)
}

fn load_arch(source: &ArchSource, block_size: Option<usize>) -> Result<NetworkSpec, Failure> {
    let spec = match &source.arch {
        Some(path) => parse_arch(&read_text(path)?)?,
        None => parse_arch(DEFAULT_ARCH)?,
    };
    match block_size {
        Some(k) => Ok(spec.with_fc_block_size(k)?),
        None => Ok(spec),
    }
}

fn load_net(source: &NetSource) -> Result<Network<f64>, Failure> {
    match (&source.model, &source.arch) {
        (Some(model), _) => Ok(load_model(model)?.network),
        (None, Some(arch)) => Ok(Network::zeros(&parse_arch(&read_text(arch)?)?)?),
        (None, None) => Err(Failure::Usage("one of --model or --arch is required".into())),
    }
}

/// Training and test splits shaped for `spec`.
fn load_data(args: &DataArgs, spec: &NetworkSpec) -> Result<(Dataset<f64>, Dataset<f64>), Failure> {
    let (train, test) = match args.data {
        DataKind::Mnist => {
            if !args.mnist_dir.is_dir() {
                return Err(Failure::Usage(format!("MNIST directory {} not found", args.mnist_dir.display())));
            }
            load_mnist_dir::<f64>(&args.mnist_dir)?
        }
        DataKind::Synth => {
            let (classes, dim) = (spec.classes(), spec.input_len());
            let make = |seed| synth_dataset::<f64>(seed, args.synth_per_class, classes, dim, args.synth_separation);
            (make(args.synth_seed)?, make(args.synth_seed.wrapping_add(1))?)
        }
    };
    let (train, test) = match args.limit {
        Some(n) => (train.take(n), test.take(n)),
        None => (train, test),
    };
    if train.sample_len() != spec.input_len() {
        return Err(Failure::Data(format!(
            "samples have {} values, the network expects {}",
            train.sample_len(),
            spec.input_len()
        )));
    }
    Ok((train.reshaped(spec.input_shape.clone())?, test.reshaped(spec.input_shape.clone())?))
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => Ok(Box::new(File::create(p)?)),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let spec = load_arch(&a.arch, a.block_size)?;
    let (train_set, test_set) = load_data(&a.data, &spec)?;
    let precision = match a.precision {
        PrecisionArg::F64 => Precision::Double,
        PrecisionArg::F32 => Precision::Single,
    };
    let cfg = TrainConfig { learning_rate: a.lr, epochs: a.epochs, batch_size: a.batch_size, seed: a.seed, precision };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (net, report) = match precision {
        Precision::Double => {
            let mut net = init_network::<f64>(&spec, a.seed)?;
            let report = train(&mut net, &train_set, Some(&test_set), &cfg)?;
            (net, report)
        }
        Precision::Single => {
            let mut net = init_network::<f32>(&spec, a.seed)?;
            let report = train(&mut net, &train_set.cast(), Some(&test_set.cast()), &cfg)?;
            (net.cast::<f64>()?, report)
        }
    };
    let quantized = if a.quantize { Some(quantize_network(&net)?) } else { None };
    save_model(&a.out, &net, quantized.as_deref())?;
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("csv"));
    report.write_csv(File::create(&report_path)?)?;
    println!("accuracy {}", report.accuracy);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let file = load_model(&a.model)?;
    let (_, test) = load_data(&a.data, file.network.spec())?;
    let net = if a.quantized {
        let tensors = match file.quantized {
            Some(t) => t,
            None => quantize_network(&file.network)?,
        };
        dequantize_network(&file.network, &tensors)?
    } else {
        file.network
    };
    println!("accuracy {}", evaluate(&net, &test)?);
    Ok(())
}

fn cmd_compress(a: CompressArgs) -> Result<(), Failure> {
    let net = load_net(&a.source)?;
    let report = compression_report(&net, a.baseline_bits, a.bits.unwrap_or(a.baseline_bits))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    report.write_csv(output(a.out.as_ref())?)?;
    Ok(())
}

fn cmd_grad_check(a: GradCheckArgs) -> Result<(), Failure> {
    let spec = load_arch(&a.arch, a.block_size)?;
    let net = init_network::<f64>(&spec, a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let x: Vec<f64> = (0..spec.input_len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let label = rng.random_range(0..spec.classes());
    let report = grad_check(&net, &x, label, a.step, a.tolerance).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("parameters {}", report.entries.len());
    println!("max_rel_error {:e}", report.max_rel_error);
    println!("max_abs_error {:e}", report.max_abs_error);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("relative error {:e} exceeds {:e}", report.max_rel_error, a.tolerance)))
    }
}

fn parse_metric(text: &str) -> Result<MetricMode, Failure> {
    let bad = || Failure::Usage(format!("unknown metric {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match text.split_once(':') {
        None if text == "efficiency" => Ok(MetricMode::Efficiency),
        Some(("perf-capped", budget)) => Ok(MetricMode::PerfCapped { budget_w: num(budget)? }),
        Some(("weighted", ab)) => {
            let (alpha, beta) = ab.split_once(',').ok_or_else(bad)?;
            Ok(MetricMode::Weighted { alpha: num(alpha)?, beta: num(beta)? })
        }
        _ => Err(bad()),
    }
}

fn cmd_explore(a: ExploreArgs) -> Result<(), Failure> {
    let mode = parse_metric(&a.metric)?;
    let defaults = match &a.costs {
        Some(path) => Defaults::load(path)?,
        None => Defaults::fpga(),
    };
    let net = load_net(&a.source)?;
    let wl = workload_of(&net)?;
    let base = defaults.config(1, 1);
    let (p_range, d_range) = (a.p_min..=a.p_max, 1..=a.d_max);
    let design = optimize_design(&base, &defaults.costs, &wl, p_range.clone(), d_range.clone(), mode)?;
    let grid = explore_grid(&base, &defaults.costs, &wl, p_range, d_range, mode)?;
    blockcirc_hw::write_grid_csv(output(a.out.as_ref())?, &grid, design.fallback_used)?;
    let r = design.report;
    eprintln!(
        "chosen p={} d={} cycles={} gops={} power_w={} gops_per_w={} fallback_used={}",
        design.config.p, design.config.d, r.cycles, r.throughput_gops, r.power_w, r.efficiency_gops_per_w, design.fallback_used
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let net = load_net(&a.source)?;
    let shapes = net.spec().shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut x = Tensor::new(
        shapes[0].clone(),
        (0..net.input_len()).map(|_| rng.random_range(0.0..1.0)).collect(),
    )?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["layer", "dense_mults", "circulant_mults", "ratio"])?;
    let (mut dense_total, mut circ_total) = (0u64, 0u64);
    let (mut fc, mut conv) = (0, 0);
    for (stage, input) in net.stages().iter().zip(&shapes) {
        let mut ops = OpCounter::new();
        let (name, dense, y) = match stage {
            Stage::Fc(l) => {
                fc += 1;
                let (_, y) = l.forward(x.data(), &mut ops)?;
                (format!("fc{fc}"), (l.inputs() * l.outputs()) as u64, Tensor::new(vec![y.len()], y)?)
            }
            Stage::Conv(l) => {
                conv += 1;
                let (_, y) = l.forward(&x, &mut ops)?;
                let r = l.kernel_size();
                let px = ((input[0] - r + 1) * (input[1] - r + 1)) as u64;
                (format!("conv{conv}"), px * (r * r * l.in_channels() * l.out_channels()) as u64, y)
            }
            Stage::MaxPool { window } => {
                x = maxpool_forward(&x, *window)?.0;
                continue;
            }
        };
        w.write_record([name, dense.to_string(), ops.real_mults.to_string(), ratio(dense, ops.real_mults)])?;
        dense_total += dense;
        circ_total += ops.real_mults;
        x = y;
    }
    w.write_record(["total".to_string(), dense_total.to_string(), circ_total.to_string(), ratio(dense_total, circ_total)])?;
    w.flush()?;
    Ok(())
}

fn ratio(dense: u64, circ: u64) -> String {
    if circ == 0 {
        "inf".into()
    } else {
        format!("{:.4}", dense as f64 / circ as f64)
    }
}
