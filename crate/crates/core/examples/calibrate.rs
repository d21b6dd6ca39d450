use speech_inversion::data::{featurize_corpus, load_split_segments, make_splits, Split};
use speech_inversion::dsp::FeatureKind;
use speech_inversion::eval::{evaluate, pool_predictions, score_pooled, shuffled_control};
use speech_inversion::nn::load_checkpoint;
use speech_inversion::synth::{generate_corpus, SynthConfig};
use speech_inversion::train::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let max_epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let dir = std::path::PathBuf::from("/tmp/sinv_calib");
    let t0 = Instant::now();
    if !dir.join("corpus.txt").exists() {
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = SynthConfig::default(); // 12 speakers x 40, seed 7, 1.2-2.0 s
        generate_corpus(&cfg, &dir).unwrap();
        println!("corpus generated in {:.1}s", t0.elapsed().as_secs_f64());
    }
    let corpus = speech_inversion::synth::read_corpus_manifest(&dir.join("corpus.txt")).unwrap();
    let t1 = Instant::now();
    if !dir.join("feats").join("spk00_utt000.audspec.bin").exists() {
        featurize_corpus(&corpus.utterances, &dir, &dir, FeatureKind::Audspec, 2).unwrap();
        println!("featurized in {:.1}s (2 threads)", t1.elapsed().as_secs_f64());
    }
    let manifest = make_splits(&corpus, &dir, (8.0/12.0, 2.0/12.0, 2.0/12.0), 7).unwrap();
    let train_n = manifest.utterances_in(Split::Train).len();
    println!("splits: train {} dev {} test {}",
        train_n,
        manifest.utterances_in(Split::Dev).len(),
        manifest.utterances_in(Split::Test).len());

    let config = TrainConfig { max_epochs, patience: 10, seed: 7, ..Default::default() };
    let ckpt = dir.join("model.ckpt");
    let t2 = Instant::now();
    let outcome = train(&config, &manifest, &dir, &ckpt).unwrap();
    println!("trained {} epochs in {:.1}s ({:.1}s/epoch)",
        outcome.epochs_run, t2.elapsed().as_secs_f64(),
        t2.elapsed().as_secs_f64() / outcome.epochs_run as f64);
    for line in &outcome.log { println!("  {line}"); }

    let (mut model, _, _) = load_checkpoint(&ckpt).unwrap();
    let report = evaluate(&mut model, "TCN-SF-Audspec", &manifest, &dir,
        FeatureKind::Audspec, Split::Test, false, false).unwrap();
    print!("{}", report.to_text());
    let pooled = pool_predictions(&mut model, &manifest, &dir, FeatureKind::Audspec, Split::Test, false).unwrap();
    let (_scores, _) = score_pooled(&pooled, false);
    println!("shuffled control avg TVs: {:.4}", shuffled_control(&pooled, 123));
}
