//! Trains the small conditional model on a synthetic corpus with and without the penalty.
//!
//! Usage: penalty_ablation [alpha] [epochs] [learning_rate] [seed]

use persuasion_core::acts::Side;
use persuasion_core::classifier::{train_classifier, ClassifierConfig};
use persuasion_core::corpus::{instances_of, split_corpus};
use persuasion_core::pusher::{
    build_vocab, da_accuracy, train_pusher, GenerationConfig, NeuralLm, NeuralLmConfig, TrainerConfig,
};
use persuasion_core::synthetic::{synthetic_corpus, SyntheticConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (alpha, epochs, lr, seed) = (arg(0, 3.0), arg(1, 2.0) as usize, arg(2, 0.05), arg(3, 1.0) as u64);

    let corpus = synthetic_corpus(&SyntheticConfig { seed, ..Default::default() });
    let split = split_corpus(&corpus, [0.8, 0.1, 0.1], seed).unwrap();
    let classifier =
        train_classifier(&split, &ClassifierConfig { side: Some(Side::Persuader), ..Default::default() }).unwrap();
    let instances = instances_of(&split.train);
    let vocab = build_vocab(&instances);
    let test = instances_of(&split.test);
    let decoding = GenerationConfig { max_new_tokens: 24, ..Default::default() };
    for a in [alpha, 0.0] {
        let t = std::time::Instant::now();
        let model = NeuralLm::new(vocab.clone(), NeuralLmConfig { seed, ..Default::default() });
        let cfg = TrainerConfig { alpha: a, epochs, learning_rate: lr, penalty_sample_interval: 1, seed, decoding, ..Default::default() };
        let out = train_pusher(model, &split, &classifier, &cfg).unwrap();
        let acc = da_accuracy(&out.model, &test, &classifier, 10, &decoding).unwrap();
        let hits: usize = out.reports.iter().map(|r| r.penalty_hits).sum();
        println!("alpha {a}: test acc {acc:.4} sel epoch {} hits {hits}/{} val {:?} ({:.1}s)",
            out.selected_epoch, out.reports.len(),
            out.epochs.iter().map(|e| e.validation_da_accuracy.unwrap_or(-1.0)).collect::<Vec<_>>(),
            t.elapsed().as_secs_f64());
    }
}
