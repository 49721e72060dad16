use edlseg::data::{generate_dataset, DatasetConfig, Split};
use edlseg::losses::LossWeights;
use edlseg::nn::{predict, train, Checkpoint, SegNetConfig, TrainConfig};

fn id_accuracy(ckpt: &Checkpoint, split: &Split) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for s in &split.samples {
        let pred = predict(ckpt, &s.image_tensor()).unwrap().predicted_labels();
        for ((p, l), ood) in pred.iter().zip(&s.labels).zip(&s.ood_mask) {
            if !ood {
                total += 1;
                hit += (p == l) as usize;
            }
        }
    }
    hit as f64 / total as f64
}

/// One 500-iteration MSE-only run at desk scale, checked three ways.
#[test]
fn desk_scale_mse_run() {
    let ds = generate_dataset(&DatasetConfig::default()).unwrap();
    let mut cfg = TrainConfig::desk_scale(LossWeights::mse_only());
    cfg.total_iterations = 500;
    cfg.checkpoint_every = 200;
    let mut at_200 = None;
    let out = train(&ds.train, SegNetConfig::default(), &cfg, |t, c| {
        if t == 200 {
            at_200 = Some(c.clone());
        }
        Ok(())
    })
    .unwrap();

    // loss averaged over consecutive 50-iteration blocks never goes up
    let blocks: Vec<f64> = out
        .log
        .chunks(50)
        .map(|c| c.iter().map(|r| r.breakdown.total).sum::<f64>() / c.len() as f64)
        .collect();
    assert_eq!(blocks.len(), 10);
    for (i, w) in blocks.windows(2).enumerate() {
        assert!(w[1] <= w[0], "block {} mean {} exceeds block {} mean {}: {blocks:?}", i + 1, w[1], i, w[0]);
    }

    let acc = id_accuracy(&at_200.unwrap(), &ds.eval);
    assert!(acc > 0.9, "in-distribution accuracy after 200 iterations: {acc}");

    let (mut u, mut n) = (0.0, 0usize);
    for s in ds.train.samples.iter().take(32) {
        let b = predict(&out.checkpoint, &s.image_tensor()).unwrap();
        for (px, &l) in s.labels.iter().enumerate() {
            if l != 0 {
                u += b.uncertainty[px];
                n += 1;
            }
        }
    }
    assert!(u / (n as f64) < 0.5, "mean foreground uncertainty {}", u / n as f64);
}

#[test]
fn identical_runs_give_identical_checkpoints() {
    let data = DatasetConfig {
        height: 24,
        width: 24,
        num_train: 6,
        num_eval: 0,
        min_radius: 2,
        max_radius: 5,
        ..DatasetConfig::default()
    };
    let split = generate_dataset(&data).unwrap().train;
    let mut cfg = TrainConfig::desk_scale(LossWeights::composite_default());
    cfg.total_iterations = 12;
    cfg.anneal.ramp_start = 4;
    cfg.anneal.ramp_end = 8;
    let net = SegNetConfig {
        hidden_channels: 6,
        ..SegNetConfig::default()
    };
    let a = train(&split, net, &cfg, |_, _| Ok(())).unwrap();
    let b = train(&split, net, &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(a.checkpoint.encode(), b.checkpoint.encode());
    assert_eq!(a.log, b.log);
    cfg.seed = 1;
    let c = train(&split, net, &cfg, |_, _| Ok(())).unwrap();
    assert_ne!(a.checkpoint.encode(), c.checkpoint.encode());
}
