//! `ngf`: dataset generation, training, evaluation, oracle self-checks,
//! and the experiment protocols, from the command line.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ngf_core::geometry::Domain;
use ngf_core::harness::{
    emit_error_map, relative_l2, run_feature_dim_ablation, run_mass_reg_ablation,
    run_table1_protocol, write_protocol_outputs, ProtocolConfig,
};
use ngf_core::ngf::{
    train, DirectRegressor, NgfConfig, NgfModel, TrainConfig, TrainableModel,
};
use ngf_core::problems::{
    domain_for, generate_dataset, operator_for, read_dataset, validate_instance, write_dataset,
    Dataset, PdeFamily, Split,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ngf", version, about = "Factorized neural solution operators for linear PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Pde {
    Poisson,
    Biharmonic,
}

impl From<Pde> for PdeFamily {
    fn from(p: Pde) -> Self {
        match p {
            Pde::Poisson => PdeFamily::Poisson2d,
            Pde::Biharmonic => PdeFamily::Biharmonic2d,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum BaselineKind {
    None,
    Direct,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-solver self-checks (solve-path equivalence and
    /// eigendecomposition) on one grid and print a pass/fail report.
    Oracle(OracleArgs),
    /// Generate a dataset of oracle-solved problem instances.
    Gen(GenArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a trained model against a dataset; write a JSON report
    /// and optional error maps.
    Eval(EvalArgs),
    /// Run the paired factorized-vs-baseline generalization protocol.
    Table1(Table1Args),
    /// Run an ablation (mass regularization or feature dimension).
    Ablate(AblateArgs),
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[arg(long, value_enum, default_value = "poisson")]
    pde: Pde,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    pde: Pde,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long = "n-train", default_value_t = 100)]
    n_train: usize,
    #[arg(long = "n-test", default_value_t = 100)]
    n_test: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Feature dimension d.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    accum: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Train the conditioned direct-regression baseline instead of the
    /// factorized model.
    #[arg(long, value_enum, default_value = "none")]
    baseline: BaselineKind,
    /// Skip per-epoch split evaluation (faster; history then carries
    /// loss only).
    #[arg(long, default_value_t = false)]
    no_history: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Directory for per-instance error maps (CSV + PGM).
    #[arg(long)]
    maps: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, value_enum)]
    pde: Pde,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, value_parser = ["mass_reg", "feature_dim"])]
    kind: String,
    #[arg(long, value_enum, default_value = "poisson")]
    pde: Pde,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Oracle(args) => cmd_oracle(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Table1(args) => cmd_table1(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<()> {
    let family: PdeFamily = args.pde.into();
    let domain = domain_for(family, args.grid)?;
    let (operator, mass) = operator_for(family, &domain)?;
    let lines =
        ngf_core::oracle::run_oracle_checks(&operator, &mass, &domain, args.instances, args.seed)?;
    let mut all_ok = true;
    for line in &lines {
        let status = if line.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {} - {}", line.name, line.detail);
        all_ok &= line.passed;
    }
    if !all_ok {
        bail!("oracle self-checks failed");
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let family: PdeFamily = args.pde.into();
    let domain = domain_for(family, args.grid)?;
    let dataset = generate_dataset(&domain, family, args.n_train, args.n_test, args.seed)?;
    write_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} instances ({} train / {} test) to {}",
        dataset.instances.len(),
        args.n_train,
        args.n_test,
        args.out.display()
    );
    Ok(())
}

fn load_dataset_and_domain(path: &PathBuf) -> anyhow::Result<(Dataset, Domain)> {
    let dataset = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    let domain = domain_for(dataset.manifest.family, dataset.manifest.grid)?;
    let (operator, mass) = operator_for(dataset.manifest.family, &domain)?;
    for inst in &dataset.instances {
        validate_instance(inst, &operator, &mass, &domain)?;
    }
    Ok((dataset, domain))
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let (dataset, domain) = load_dataset_and_domain(&args.data)?;
    let train_set = dataset.split_instances(Split::Train);
    let test_set = dataset.split_instances(Split::Test);
    let model_cfg = NgfConfig {
        feature_dim: args.dim,
        blocks: args.blocks,
        seed: args.seed,
        ..NgfConfig::desk_scale()
    };
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        max_lr: args.lr,
        lambda: args.lambda,
        accum: args.accum,
        seed: args.seed,
        track_history: !args.no_history,
    };

    match args.baseline {
        BaselineKind::None => {
            let mut model = NgfModel::new(model_cfg, domain.dim());
            let history = train(&mut model, &domain, &train_set, &test_set, &train_cfg)?;
            print_history_tail(&history);
            model.save(&args.out)?;
        }
        BaselineKind::Direct => {
            let mut model = DirectRegressor::new(model_cfg, domain.dim());
            let history = train(&mut model, &domain, &train_set, &test_set, &train_cfg)?;
            print_history_tail(&history);
            model.save(&args.out)?;
        }
    }
    println!("saved model to {}", args.out.display());
    Ok(())
}

fn print_history_tail(history: &[ngf_core::ngf::EpochStats]) {
    if let Some(last) = history.last() {
        match (last.train_rel_l2, last.test_rel_l2) {
            (Some(tr), Some(te)) => println!(
                "epoch {}: loss {:.6e}, train rel L2 {:.4}, test rel L2 {:.4}",
                last.epoch, last.train_loss, tr, te
            ),
            _ => println!("epoch {}: loss {:.6e}", last.epoch, last.train_loss),
        }
    }
}

enum AnyModel {
    Ngf(NgfModel),
    Direct(DirectRegressor),
}

fn load_any_model(path: &PathBuf) -> anyhow::Result<AnyModel> {
    if let Ok(m) = NgfModel::load(path) {
        return Ok(AnyModel::Ngf(m));
    }
    Ok(AnyModel::Direct(DirectRegressor::load(path)?))
}

fn predictions_for(
    model: &AnyModel,
    domain: &Domain,
    insts: &[&ngf_core::problems::ProblemInstance],
) -> Vec<Vec<f64>> {
    match model {
        AnyModel::Ngf(m) => {
            let feats = m.coord_features(domain);
            m.predict_batch(domain, &feats, insts)
        }
        AnyModel::Direct(m) => {
            let feats = m.coord_features(domain);
            m.predict_batch(domain, &feats, insts)
        }
    }
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let started = std::time::Instant::now();
    let (dataset, domain) = load_dataset_and_domain(&args.data)?;
    let model = load_any_model(&args.model)?;
    let name = match &model {
        AnyModel::Ngf(_) => "ngf",
        AnyModel::Direct(_) => "direct",
    };

    let mut split_errs = Vec::new();
    let mut all_preds = Vec::new();
    for split in [Split::Train, Split::Test] {
        let insts = dataset.split_instances(split);
        let preds = predictions_for(&model, &domain, &insts);
        let errs: Vec<f64> = insts
            .iter()
            .zip(&preds)
            .map(|(inst, pred)| relative_l2(&inst.u, pred))
            .collect::<Result<_, _>>()?;
        split_errs.push(errs);
        all_preds.push(preds);
    }
    let test_errs = split_errs.pop().unwrap();
    let train_errs = split_errs.pop().unwrap();

    let report = ngf_core::harness::protocol::report_from_errors(
        name,
        dataset.manifest.seed,
        serde_json::json!({
            "data": args.data.display().to_string(),
            "family": dataset.manifest.family,
            "grid": dataset.manifest.grid,
        }),
        train_errs,
        test_errs,
        started.elapsed().as_secs_f64(),
    );
    report.write_json(&args.report)?;
    println!(
        "{name}: train rel L2 {:.4}, test rel L2 {:.4} ({} instances)",
        report.train.mean,
        report.test.mean,
        dataset.instances.len()
    );

    if let Some(maps_dir) = &args.maps {
        std::fs::create_dir_all(maps_dir)?;
        for (split_i, split) in [Split::Train, Split::Test].iter().enumerate() {
            let insts = dataset.split_instances(*split);
            for (i, (inst, pred)) in insts.iter().zip(&all_preds[split_i]).enumerate() {
                let tag = match split {
                    Split::Train => "train",
                    Split::Test => "test",
                };
                let base = maps_dir.join(format!("{tag}_{i:04}"));
                emit_error_map(&domain, &inst.u, pred, &base)?;
            }
        }
        println!("wrote error maps to {}", maps_dir.display());
    }
    Ok(())
}

fn cmd_table1(args: Table1Args) -> anyhow::Result<()> {
    let cfg = ProtocolConfig {
        grid: args.grid,
        seed: args.seed,
        epochs: args.epochs,
        feature_dim: args.dim,
        blocks: args.blocks,
        ..ProtocolConfig::desk_scale(args.pde.into())
    };
    let outcome = run_table1_protocol(&cfg)?;
    write_protocol_outputs(&outcome, &args.out)?;
    println!(
        "ngf:    train {:.4}  test {:.4}  (ratio {:.2})",
        outcome.ngf_report.train.mean,
        outcome.ngf_report.test.mean,
        outcome.ngf_report.generalization_ratio
    );
    println!(
        "direct: train {:.4}  test {:.4}  (ratio {:.2})",
        outcome.baseline_report.train.mean,
        outcome.baseline_report.test.mean,
        outcome.baseline_report.generalization_ratio
    );
    println!("reports in {}", args.out.display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> anyhow::Result<()> {
    let base = ProtocolConfig {
        grid: args.grid,
        seed: args.seed,
        epochs: args.epochs,
        ..ProtocolConfig::desk_scale(args.pde.into())
    };
    std::fs::create_dir_all(&args.out)?;
    let arms = match args.kind.as_str() {
        "mass_reg" => run_mass_reg_ablation(&base)?,
        "feature_dim" => run_feature_dim_ablation(&base, &[32, 64, 128])?,
        other => bail!("unknown ablation kind {other}"),
    };
    for (i, arm) in arms.iter().enumerate() {
        match &arm.report {
            Some(r) => {
                println!(
                    "{}: train {:.4}  test {:.4}",
                    arm.label, r.train.mean, r.test.mean
                );
                r.write_json(&args.out.join(format!("arm_{i}.json")))?;
            }
            None => println!("{}: diverged", arm.label),
        }
    }
    std::fs::write(
        args.out.join("arms.json"),
        serde_json::to_string_pretty(&arms)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pde_maps_to_family() {
        assert_eq!(PdeFamily::from(Pde::Poisson), PdeFamily::Poisson2d);
        assert_eq!(PdeFamily::from(Pde::Biharmonic), PdeFamily::Biharmonic2d);
    }
}
