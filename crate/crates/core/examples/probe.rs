//! Dev probe: initialization scale and learning dynamics on the
//! desk-scale protocol. Not part of the shipped surface.

use ngf_core::geometry::Domain;
use ngf_core::ngf::{train, NgfConfig, NgfModel, TrainConfig, TrainableModel};
use ngf_core::problems::{domain_for, generate_dataset, PdeFamily, Split};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("init");

    let family = PdeFamily::Poisson2d;
    let grid = 32;
    let domain = domain_for(family, grid).unwrap();
    let ds = generate_dataset(&domain, family, 100, 100, 42).unwrap();
    let train_set = ds.split_instances(Split::Train);
    let test_set = ds.split_instances(Split::Test);

    match mode {
        "init" => {
            for psi_scale in [0.1, 0.02, 0.005, 0.002, 0.001] {
                let cfg = NgfConfig {
                    feature_dim: 64,
                    blocks: 4,
                    psi_scale,
                    seed: 42,
                    ..NgfConfig::desk_scale()
                };
                let model = NgfModel::new(cfg, 2);
                let err = init_error(&model, &domain, &train_set);
                println!("psi_scale {psi_scale:>7}: initial train rel L2 = {err:.4}");
            }
        }
        "train" => {
            let psi_scale: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.002);
            let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
            let epochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
            let cfg = NgfConfig {
                feature_dim: 64,
                blocks: 4,
                psi_scale,
                seed: 42,
                ..NgfConfig::desk_scale()
            };
            let mut model = NgfModel::new(cfg, 2);
            let tc = TrainConfig {
                epochs,
                max_lr: lr,
                ..Default::default()
            };
            let t0 = std::time::Instant::now();
            let history = train(&mut model, &domain, &train_set, &test_set, &tc).unwrap();
            for h in history.iter().step_by(2.max(epochs / 20)) {
                println!(
                    "epoch {:>3}: loss {:.4e}  train {:.4}  test {:.4}",
                    h.epoch,
                    h.train_loss,
                    h.train_rel_l2.unwrap(),
                    h.test_rel_l2.unwrap()
                );
            }
            let last = history.last().unwrap();
            println!(
                "final: train {:.4} test {:.4}  ({:.1}s)",
                last.train_rel_l2.unwrap(),
                last.test_rel_l2.unwrap(),
                t0.elapsed().as_secs_f64()
            );
        }
        _ => eprintln!("modes: init | train <psi_scale> <lr> <epochs>"),
    }
}

fn init_error(
    model: &NgfModel,
    domain: &Domain,
    insts: &[&ngf_core::problems::ProblemInstance],
) -> f64 {
    let feats = model.coord_features(domain);
    let preds = model.predict_batch(domain, &feats, insts);
    let mut total = 0.0;
    for (inst, pred) in insts.iter().zip(&preds) {
        total += ngf_core::harness::relative_l2(&inst.u, pred).unwrap();
    }
    total / insts.len() as f64
}
