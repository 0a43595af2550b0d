//! Temporary diagnostic harness (deleted before release).

use cpicf_core::cpicf::*;
use cpicf_core::eval::*;
use cpicf_core::gbt::*;
use cpicf_core::gower::GowerContext;
use cpicf_core::rng::*;
use cpicf_core::search::GaConfig;
use cpicf_core::tabular::*;

fn hp(n: usize, d: usize) -> Hyperparams {
    Hyperparams {
        n_estimators: n,
        max_depth: d,
        learning_rate: 0.1,
        min_child_weight: 1.0,
        subsample: 1.0,
        colsample_bytree: 1.0,
    }
}

#[test]
#[ignore]
fn diagnose_delta() {
    let ds = generate_hypercube(3000, 2, 2.0, 0.10, 7).unwrap();
    let splits = split(&ds, SplitFractions::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
    let entity = fit_classifier(&splits.train, &hp(60, 3), 2).unwrap();
    let knowledge = sample_knowledge(
        &splits.train, 100, &entity, FeatureBridge::identity(), 3, "diag",
    )
    .unwrap();
    let mcw: f64 = std::env::var("MCW").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let nest: usize = std::env::var("NEST").ok().and_then(|v| v.parse().ok()).unwrap_or(100);
    let dep: usize = std::env::var("DEP").ok().and_then(|v| v.parse().ok()).unwrap_or(6);
    let ihp = Hyperparams { min_child_weight: mcw, ..hp(nest, dep) };
    let build_seed = 4;
    let im = build_individual_model(
        &knowledge, &splits.calibration, &entity, FeatureBridge::identity(), 0.1, &ihp, build_seed,
    )
    .unwrap();
    println!("d_alpha = {:.4}", im.interval_model().d_alpha());

    // Width stats over test rows
    let rows = splits.test.to_numeric_rows().unwrap();
    let mut widths: Vec<f64> = rows.iter().map(|r| im.width_row(r)).collect();
    widths.sort_unstable_by(f64::total_cmp);
    println!(
        "width quantiles: 10%={:.4} 50%={:.4} 90%={:.4} max={:.4}",
        widths[rows.len() / 10],
        widths[rows.len() / 2],
        widths[9 * rows.len() / 10],
        widths[rows.len() - 1]
    );

    let ctx = GowerContext::new(splits.train.schema());
    let schema = splits.train.schema().clone();
    let mut qrng = rng_from_seed(11);
    let balanced = std::env::var("BALANCED").is_ok();
    let queries: Vec<Instance> = if balanced {
        let pos: Vec<usize> = (0..splits.train.len())
            .filter(|&i| splits.train.labels()[i] == 1)
            .collect();
        let neg: Vec<usize> = (0..splits.train.len())
            .filter(|&i| splits.train.labels()[i] == 0)
            .collect();
        (0..40)
            .map(|i| {
                let pool = if i % 2 == 0 { &pos } else { &neg };
                splits.train.instances()[pool[random_index(&mut qrng, pool.len())]].clone()
            })
            .collect()
    } else {
        (0..40)
            .map(|_| splits.train.instances()[random_index(&mut qrng, splits.train.len())].clone())
            .collect()
    };

    for lambda in [0.0f64, 1.0, 10.0, 100.0, 1e5] {
        let mut dist_sum = 0.0;
        let mut euclid_sum = 0.0;
        let mut delta_sum = 0.0;
        let mut neg = 0;
        let mut surface_change_sum = 0.0;
        let mut n = 0;
        for (q, query) in queries.iter().enumerate() {
            let mut ga = GaConfig::new(20, 50, derive_seed(100, "ga", &[lambda as u64, q as u64]));
            ga.seed = derive_seed(100, "ga", &[lambda.to_bits(), q as u64]);
            let cfg = CpicfConfig::new(lambda, 0.1, ga);
            let cf = generate(query, &entity, &im, &ctx, &schema, &cfg, FeatureBridge::identity())
                .unwrap();
            if !cf.valid {
                continue;
            }
            let qrow = query.as_numeric_row().unwrap();
            let rrow = cf.result.as_numeric_row().unwrap();
            let euclid =
                ((qrow[0] - rrow[0]).powi(2) + (qrow[1] - rrow[1]).powi(2)).sqrt();
            let grid = OmegaGrid::new(0.5, 21, (0, 1)).unwrap();
            let delta = delta_improvement(
                query, &cf, &knowledge, &entity, &im, &grid, &ihp, build_seed,
                DeltaSecondTerm::Pointwise, FeatureBridge::identity(),
            )
            .unwrap();

            // how much does the retrained surface move inside the grid?
            let mut rows2: Vec<Instance> = knowledge.rows().to_vec();
            rows2.push(cf.result.clone());
            let mut t2 = knowledge.targets().to_vec();
            t2.push(cf.label_prime as f64);
            let retrained = fit_regression(
                &schema, &rows2, &t2, Loss::Squared, &ihp,
                derive_seed(build_seed, "individual-mu", &[]),
            )
            .unwrap();
            let mut change = 0.0;
            let points = grid.points(query).unwrap();
            for p in &points {
                let row = p.as_numeric_row().unwrap();
                change += (retrained.predict_row(&row) - im.proba_row(&row)).abs();
            }
            surface_change_sum += change / points.len() as f64;

            dist_sum += cf.l_dist;
            euclid_sum += euclid;
            delta_sum += delta;
            if delta < 0.0 {
                neg += 1;
            }
            n += 1;
        }
        println!(
            "lambda={lambda:>8}: valid={n:2} mean_gower={:.3} mean_euclid={:.3} mean_delta={:+.5} frac_neg={:.2} mean_surface_change={:.5}",
            dist_sum / n as f64,
            euclid_sum / n as f64,
            delta_sum / n as f64,
            neg as f64 / n as f64,
            surface_change_sum / n as f64
        );
    }
}
