use dpk_core::dist::{DistFamily, DistParams};
use dpk_core::model::{DpkModel, Epochs, TrainConfig};
use dpk_core::net::SgdConfig;
use dpk_core::series::FrequencySpec;
use dpk_core::synth::{gaussian_truth, gen_gaussian};
use std::time::Instant;

fn gaussian_errors(model: &DpkModel) -> (f64, f64) {
    let (mut se, mut rel) = (0.0, 0.0);
    let n = 1488;
    for i in 0..n {
        let t = i as f64;
        let (mu_t, sigma_t) = match gaussian_truth(t) {
            DistParams::Normal { mu, sigma } => (mu, sigma),
            _ => unreachable!(),
        };
        let (mu_h, sigma_h) = match model.predict_params_denormalized(t) {
            DistParams::Normal { mu, sigma } => (mu, sigma),
            _ => unreachable!(),
        };
        se += (mu_h - mu_t) * (mu_h - mu_t);
        rel += ((sigma_h - sigma_t) / sigma_t).abs();
    }
    ((se / n as f64).sqrt(), rel / n as f64)
}

fn main() {
    let (series, _) = gen_gaussian(20_000, 7).unwrap();
    for (lr, batch) in [(3e-4, 64), (1e-3, 64), (3e-4, 32)] {
        let spec = FrequencySpec::from_periods(&[48.0, 31.0]).unwrap();
        let mut model =
            DpkModel::with_default_heads(DistFamily::Normal, spec, &[256, 64], 1).unwrap();
        let t0 = Instant::now();
        for chunk in [50usize, 50, 100] {
            let cfg = TrainConfig {
                sgd: SgdConfig { learning_rate: lr, weight_decay: 1e-7, batch_size: batch, seed: 2 },
                epochs: Epochs::Fixed(chunk),
                normalize: false,
                ..TrainConfig::default()
            };
            let report = model.train(&series, &cfg).unwrap();
            let (mu_rmse, sigma_rel) = gaussian_errors(&model);
            println!(
                "lr {lr} batch {batch} +{chunk}ep ({:.0}s): mu RMSE {mu_rmse:.4}, sigma rel {sigma_rel:.4}, loss {:.4}",
                t0.elapsed().as_secs_f64(),
                report.epoch_losses.last().unwrap()
            );
        }
        // sample a few mu values to see the shape
        for &t in &[0.0, 6.0, 12.0, 18.0, 24.0, 30.0, 36.0, 42.0] {
            let m = match model.predict_params_denormalized(t) {
                DistParams::Normal { mu, .. } => mu,
                _ => unreachable!(),
            };
            let mt = match gaussian_truth(t) {
                DistParams::Normal { mu, .. } => mu,
                _ => unreachable!(),
            };
            print!(" t={t}: {m:.2}/{mt:.2}");
        }
        println!();
    }
}
