// temporary diagnostics; deleted before commit
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scisim::detect::{detection_rate, DetectorConfig};
use scisim::runner::fixtures::{canonical_fast_spec, canonical_moving_spec, canonical_static_spec, three_segment_spec};
use scisim::sensing::{generate_masks, sense_normalized};
use scisim::video::generate_scene;

#[test]
fn probe_detection_rates() {
    let states = [6usize, 8, 10, 12, 15, 20];
    let masks = generate_masks(64, 64, 20, 7, &states).unwrap();
    let det = DetectorConfig::default();

    for (label, spec) in [
        ("static", canonical_static_spec(1)),
        ("moving2", canonical_moving_spec(1, 480)),
        ("fast4", canonical_fast_spec(1)),
    ] {
        let (video, track) = generate_scene(&spec).unwrap();
        print!("{label:>8}: ");
        for &b in &states {
            // batch of 4 measurements from the start of the video
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut ms = vec![];
            let mut gts = vec![];
            for w in 0..4 {
                let start = w * b;
                let cube = video.window(start, b).unwrap();
                let (_, norm) = sense_normalized(&cube, &masks, b, 0.0, start, &mut rng).unwrap();
                ms.push(norm);
                gts.push(track.window_hulls(start, b));
            }
            let rate = detection_rate(&ms, &gts, &det).unwrap();
            print!("B={b}: {rate:.2}  ");
        }
        println!();
    }
}

#[test]
fn probe_three_segment_rates_by_phase() {
    let states = [6usize, 8, 10, 12, 15, 20];
    let masks = generate_masks(64, 64, 20, 7, &states).unwrap();
    let det = DetectorConfig::default();
    let (video, track) = generate_scene(&three_segment_spec(1)).unwrap();
    for (phase, start0) in [("slow(1px)", 40usize), ("frozen", 280), ("fast(4px)", 460)] {
        print!("{phase:>10}: ");
        for &b in &states {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut ms = vec![];
            let mut gts = vec![];
            for w in 0..4 {
                let start = start0 + w * b;
                let cube = video.window(start, b).unwrap();
                let (_, norm) = sense_normalized(&cube, &masks, b, 0.0, start, &mut rng).unwrap();
                ms.push(norm);
                gts.push(track.window_hulls(start, b));
            }
            let rate = detection_rate(&ms, &gts, &det).unwrap();
            print!("B={b}: {rate:.2}  ");
        }
        println!();
    }
}

#[test]
fn probe_psnr_by_phase() {
    use scisim::reconstruct::{gap_tv, psnr, ReconstructionConfig};
    let states = [6usize, 8, 10, 12, 15, 20];
    let masks = generate_masks(64, 64, 20, 7, &states).unwrap();
    let (video, _) = generate_scene(&three_segment_spec(1)).unwrap();
    let rcfg = ReconstructionConfig::default();
    for (phase, start0) in [("slow(1px)", 40usize), ("frozen", 280), ("fast(4px)", 460)] {
        print!("{phase:>10}: ");
        for &b in &states {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut psnrs = vec![];
            for w in 0..2 {
                let start = start0 + w * b;
                let cube = video.window(start, b).unwrap();
                let (m, _) = sense_normalized(&cube, &masks, b, 0.0, start, &mut rng).unwrap();
                let rec = gap_tv(&m, &masks, &rcfg).unwrap();
                psnrs.push(psnr(&[rec.cube], &[cube]).unwrap().psnr_db);
            }
            print!("B={b}: {:.1}  ", psnrs.iter().sum::<f64>() / 2.0);
        }
        println!();
    }
}
// appended probe with updated phase offsets
#[test]
fn probe_new_three_segment() {
    use scisim::reconstruct::{gap_tv, psnr, ReconstructionConfig};
    let states = [6usize, 8, 10, 12, 15, 20];
    let masks = generate_masks(64, 64, 20, 7, &states).unwrap();
    let det = DetectorConfig::default();
    let (video, track) = generate_scene(&three_segment_spec(1)).unwrap();
    let rcfg = ReconstructionConfig::default();
    for (phase, start0) in [("slow2", 20usize), ("frozen", 180), ("fast6", 380)] {
        print!("{phase:>7} rate: ");
        for &b in &states {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut ms = vec![];
            let mut gts = vec![];
            for w in 0..4 {
                let start = start0 + w * b;
                let cube = video.window(start, b).unwrap();
                let (_, norm) = sense_normalized(&cube, &masks, b, 0.0, start, &mut rng).unwrap();
                ms.push(norm);
                gts.push(track.window_hulls(start, b));
            }
            print!("B={b}: {:.2}  ", detection_rate(&ms, &gts, &det).unwrap());
        }
        println!();
        print!("{phase:>7} psnr: ");
        for &b in &states {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut ps = vec![];
            for w in 0..2 {
                let start = start0 + w * b;
                let cube = video.window(start, b).unwrap();
                let (m, _) = sense_normalized(&cube, &masks, b, 0.0, start, &mut rng).unwrap();
                let rec = gap_tv(&m, &masks, &rcfg).unwrap();
                ps.push(psnr(&[rec.cube], &[cube]).unwrap().psnr_db);
            }
            print!("B={b}: {:.1}  ", ps.iter().sum::<f64>() / 2.0);
        }
        println!();
    }
}

#[test]
fn probe_static_psnr_vs_b() {
    use scisim::reconstruct::{gap_tv, psnr, ReconstructionConfig};
    use ndarray::Array2;
    use scisim::video::VideoCube;
    let states = [6usize, 8, 10, 12, 15, 20];
    for mask_seed in [7u64, 41] {
        let masks = generate_masks(64, 64, 20, mask_seed, &states).unwrap();
        for tol in [1e-4, 1e-9] {
            let cfg = ReconstructionConfig { tol, ..Default::default() };
            print!("masks {mask_seed} tol {tol:>5e}: ");
            for &b in &states {
                let mut frame = Array2::from_elem((64, 64), 0.2);
                for i in 27..37 { for j in 22..32 { frame[(i, j)] = 1.0; } }
                let frames: Vec<_> = (0..b).map(|_| frame.clone()).collect();
                let cube = VideoCube::from_frames(&frames).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let (m, _) = sense_normalized(&cube, &masks, b, 0.0, 0, &mut rng).unwrap();
                let rec = gap_tv(&m, &masks, &cfg).unwrap();
                print!("B={b}: {:.1}({})  ", psnr(&[rec.cube], &[cube]).unwrap().psnr_db, rec.iterations);
            }
            println!();
        }
    }
}

#[test]
fn probe_closed_loop() {
    use scisim::rl::agent::{train, TrainConfig};
    use scisim::rl::env::{RewardConfig, StateSpace, TransitionModel};
    use scisim::runner::fixtures::TwoRegimeEnv;
    use scisim::runner::{compare, run_adaptive, run_fixed, RunConfig};

    let states = StateSpace::default();
    let mut env = TwoRegimeEnv::new(states.clone(), TransitionModel::default(), RewardConfig::default());
    let trained = train(&mut env, &TrainConfig { seed: 1, ..Default::default() }).unwrap();

    let masks = generate_masks(64, 64, 20, 7, states.values()).unwrap();
    for seed in [100u64, 101, 102, 103, 104] {
        let (video, track) = generate_scene(&three_segment_spec(seed)).unwrap();
        let cfg = RunConfig { with_reconstruction: true, batch_size: 2, seed, ..RunConfig::default() };
        let t0 = std::time::Instant::now();
        let adaptive = run_adaptive(&video, &track, &masks, &trained.q, &cfg).unwrap();
        let fixed: Vec<_> = states
            .values()
            .iter()
            .map(|&b| run_fixed(&video, &track, &masks, b, &cfg).unwrap())
            .collect();
        let report = compare(&adaptive, &fixed).unwrap();
        println!(
            "seed {seed}: adaptive mean_b {:.2} psnr {:.2} rate {:.2} nearest {} ({:.1?}s)",
            report.adaptive.mean_b,
            report.adaptive.mean_psnr_db.unwrap(),
            report.adaptive.mean_detection_rate,
            report.nearest_b,
            t0.elapsed().as_secs_f32(),
        );
        for f in &report.fixed {
            println!(
                "   fixed {:>2}: psnr {:.2} rate {:.2}  delta_psnr {:+.2} delta_rate {:+.2} {}",
                f.b,
                f.summary.mean_psnr_db.unwrap(),
                f.summary.mean_detection_rate,
                f.delta_psnr_db.unwrap(),
                f.delta_detection_rate,
                if f.nearest { "<- nearest" } else { "" }
            );
        }
        let btrace: Vec<usize> = adaptive.steps.iter().map(|s| s.b).collect();
        println!("   B trace: {btrace:?}");
    }
}

#[test]
fn probe_gap_tv_speed() {
    use scisim::reconstruct::{gap_tv, ReconstructionConfig};
    let states = [6usize, 8, 10, 12, 15, 20];
    let masks = generate_masks(64, 64, 20, 7, &states).unwrap();
    let (video, _) = generate_scene(&three_segment_spec(1)).unwrap();
    for &b in &[6usize, 12, 20] {
        let cube = video.window(0, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (m, _) = sense_normalized(&cube, &masks, b, 0.0, 0, &mut rng).unwrap();
        let t0 = std::time::Instant::now();
        let rec = gap_tv(&m, &masks, &ReconstructionConfig::default()).unwrap();
        println!("B={b}: {:.3}s iters {}", t0.elapsed().as_secs_f64(), rec.iterations);
    }
}
