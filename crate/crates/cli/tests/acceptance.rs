//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p storygen-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use storygen::annotate::{
    annotate_story, default_verb_lexicon, import_annotations, read_annotation_file, Gazetteer,
};
use storygen::corpus::{build_vocab, Scheme, SpecialTokens, Story, Vocabulary};
use storygen::decompose::{anonymize_coref, anonymize_ner, deanonymize, AnonymizedStory};
use storygen::evaluate::{
    coref_cluster_stats, entity_name_diversity, entity_ranking, lcs_len_ids, lcs_stats,
    ranking_cases, verb_diversity, MentionScorer,
};
use storygen::generate::{
    generate_sequence, sample_top_k, GenerationConfig, StepInfo, StepScorer,
};
use storygen::model::{
    build_verb_mask, coref_fill_training_examples, train_model, FillModel, MentionContext,
    Seq2Seq, Seq2SeqConfig, TrainConfig, TrainExample,
};
use storygen::nn::{attention, conv1d_glu, grad_check, AttentionMask, Graph, Tensor, Var};
use storygen::seeds::substream;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn pass(n: usize, what: &str) {
    println!("acceptance criterion {n:2} ({what}): PASS");
}

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    t
}

// ---------------------------------------------------------------------------
// 1. Anonymization round-trip over synthetic and imported fixtures.
// ---------------------------------------------------------------------------

const NAMES: &[&str] = &[
    "Mira", "Tomas", "Anton", "Bela", "Kira", "Petra", "Selim", "Yara", "Oslo", "Greta",
    "Nils", "Lena", "Bruno", "Omar", "Noor", "Hirsh", "Ila", "Pia", "Olen", "Rurik",
];
const SPOTS: &[&str] = &["mill", "tower", "river", "market", "garden", "harbor", "bridge"];
const THINGS: &[&str] = &["key", "map", "seed", "letter", "bell", "jar", "book", "lantern"];

fn synthetic_story(i: usize, rng: &mut ChaCha8Rng) -> Story {
    let a = NAMES[i % NAMES.len()];
    let b = NAMES[(i * 7 + 3) % NAMES.len()];
    let spot = SPOTS[rng.gen_range(0..SPOTS.len())];
    let thing = THINGS[rng.gen_range(0..THINGS.len())];
    let text = match i % 4 {
        0 => format!(
            "One day {a} walked to the {spot} . There {a} found a {thing} . \
             She smiled and told {b} . He laughed ."
        ),
        1 => format!(
            "At dawn {a} met {b} near the {spot} . Then {a} gave {b} a {thing} . \
             They walked home ."
        ),
        2 => format!(
            "For years {a} guarded the {spot} . One night {a} heard a sound . \
             Then {a} found a {thing} and kept it ."
        ),
        _ => format!(
            "Last week {a} visited {b} at the {spot} . Later {b} showed {a} a {thing} . \
             She thanked him ."
        ),
    };
    Story::new(&text)
}

fn assert_round_trips(story: &Story, annotated: &storygen::annotate::AnnotatedStory) {
    let ner = anonymize_ner(story, &annotated.mentions, 64);
    assert!(!ner.overflowed);
    let restored = deanonymize(&ner.tokens, &ner.table.gold_fills()).unwrap();
    assert_eq!(restored, story.tokens, "NER round-trip failed");
    let restored = deanonymize(&ner.tokens, &ner.table.gold_fills_per_id()).unwrap();
    assert_eq!(restored, story.tokens, "NER per-id round-trip failed");

    let coref = anonymize_coref(story, &annotated.clusters, &annotated.mentions, 64);
    assert!(!coref.overflowed);
    let restored = deanonymize(&coref.tokens, &coref.table.gold_fills()).unwrap();
    assert_eq!(restored, story.tokens, "coref round-trip failed");
}

#[test]
fn criterion_01_round_trip() {
    let start = Instant::now();
    let lexicon = default_verb_lexicon();
    let gazetteer = Gazetteer::new();

    // 1k synthetic stories annotated by the heuristics.
    let mut rng = substream(101, "roundtrip", 0);
    for i in 0..1000 {
        let story = synthetic_story(i, &mut rng);
        let annotated = annotate_story(&story, &lexicon, &gazetteer);
        assert_round_trips(&story, &annotated);
    }

    // Imported fixture corpus (annotation records from files).
    let stories: Vec<Story> = std::fs::read_to_string(fixture("annotated/stories.txt"))
        .unwrap()
        .lines()
        .map(Story::new)
        .collect();
    let records = read_annotation_file(&fixture("annotated/annotations.jsonl")).unwrap();
    assert!(stories.len() >= 100, "need at least 100 fixtures");
    assert_eq!(stories.len(), records.len());
    for (story, record) in stories.iter().zip(&records) {
        let annotated = import_annotations(story, record).unwrap();
        assert_round_trips(story, &annotated);
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "round-trip took {elapsed:?}");
    pass(1, "anonymization round-trip");
}

// ---------------------------------------------------------------------------
// 2. Verb-mask exactness through real attention weights.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_verb_mask_exactness() {
    let mut rng = substream(102, "verbmask", 0);
    let mut cases = 0;
    for len in 1..=32usize {
        for _ in 0..32 {
            let verbs: Vec<usize> = (0..len).filter(|_| rng.gen_bool(0.25)).collect();
            let mask = build_verb_mask(len, &verbs);
            let d = 4;
            let mut g = Graph::new();
            let q = g.input(randn(&[len, d], &mut rng));
            let k = g.input(randn(&[len, d], &mut rng));
            let v = g.input(randn(&[len, d], &mut rng));
            let (_, weights) = attention(&mut g, q, k, v, &mask);
            let w = g.value(weights);
            for t in 0..len {
                let mut total = w.get2(t, len); // null slot
                for p in 0..len {
                    let allowed = verbs.contains(&p) && p < t;
                    if allowed {
                        total += w.get2(t, p);
                    } else {
                        assert_eq!(
                            w.get2(t, p),
                            0.0,
                            "len {len} row {t}: weight off-mask at {p}"
                        );
                    }
                }
                assert!((total - 1.0).abs() <= 1e-6, "row {t} sums to {total}");
            }
            cases += 1;
        }
    }
    assert!(cases >= 1000, "ran {cases} cases");
    pass(2, "verb-mask exactness");
}

// ---------------------------------------------------------------------------
// 3. Gradient checks for every layer.
// ---------------------------------------------------------------------------

/// The decoder's gated multi-head self-attention block over raw vars:
/// per-head attention, concat, output projection, sigmoid gate, residual.
#[allow(clippy::too_many_arguments)]
fn gated_mhsa(
    g: &mut Graph,
    states: Var,
    wq: &[Var],
    wk: &[Var],
    wv: &[Var],
    wo: Var,
    gate_w: Var,
    gate_b: Var,
    masks: &[AttentionMask],
) -> Var {
    let mut outs = Vec::new();
    for h in 0..wq.len() {
        let q = g.matmul(states, wq[h]);
        let k = g.matmul(states, wk[h]);
        let v = g.matmul(states, wv[h]);
        let (out, _) = attention(g, q, k, v, &masks[h]);
        outs.push(out);
    }
    let concat = g.concat_cols(&outs);
    let proj = g.matmul(concat, wo);
    let gate_lin = g.linear(states, gate_w, Some(gate_b));
    let gate = g.sigmoid(gate_lin);
    let gated = g.mul(gate, proj);
    g.add(states, gated)
}

#[test]
fn criterion_03_gradient_checks() {
    let start = Instant::now();
    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let mut rng = substream(103, "gradcheck", 0);

    // Embedding lookup.
    let inputs = vec![randn(&[6, 4], &mut rng)];
    let err = grad_check(
        |g, v| {
            let rows = g.embedding(v[0], &[0, 5, 2, 2]);
            g.cross_entropy(rows, &[1, 0, 3, 2])
        },
        &inputs,
        EPS,
    );
    assert!(err < TOL, "embedding: {err}");

    // GLU convolutions, causal and same-padded.
    for causal in [true, false] {
        let inputs = vec![
            randn(&[6, 3], &mut rng),
            randn(&[3, 3, 6], &mut rng),
            randn(&[6], &mut rng),
        ];
        let err = grad_check(
            |g, v| {
                let h = conv1d_glu(g, v[0], v[1], v[2], causal);
                g.cross_entropy(h, &[0, 1, 2, 0, 1, 2])
            },
            &inputs,
            EPS,
        );
        assert!(err < TOL, "conv1d_glu causal={causal}: {err}");
    }

    // Attention with a mixed mask.
    let inputs = vec![
        randn(&[4, 3], &mut rng),
        randn(&[4, 3], &mut rng),
        randn(&[4, 3], &mut rng),
    ];
    let mask = AttentionMask::causal(4);
    let err = grad_check(
        |g, v| {
            let (out, _) = attention(g, v[0], v[1], v[2], &mask);
            g.cross_entropy(out, &[0, 1, 2, 1])
        },
        &inputs,
        EPS,
    );
    assert!(err < TOL, "attention: {err}");

    // Gated multi-head self-attention, verb mask on one head.
    let (t_len, d, heads) = (5, 8, 2);
    let dh = d / heads;
    let mut inputs = vec![randn(&[t_len, d], &mut rng)];
    for _ in 0..heads {
        inputs.push(randn(&[d, dh], &mut rng)); // wq
        inputs.push(randn(&[d, dh], &mut rng)); // wk
        inputs.push(randn(&[d, dh], &mut rng)); // wv
    }
    inputs.push(randn(&[d, d], &mut rng)); // wo
    inputs.push(randn(&[d, d], &mut rng)); // gate w
    inputs.push(randn(&[d], &mut rng)); // gate b
    let masks = vec![build_verb_mask(t_len, &[1, 3]), AttentionMask::causal(t_len)];
    let err = grad_check(
        |g, v| {
            let wq = [v[1], v[4]];
            let wk = [v[2], v[5]];
            let wv = [v[3], v[6]];
            let out = gated_mhsa(g, v[0], &wq, &wk, &wv, v[7], v[8], v[9], &masks);
            g.cross_entropy(out, &[0, 1, 2, 3, 4])
        },
        &inputs,
        EPS,
    );
    assert!(err < TOL, "gated mhsa: {err}");

    // Linear and softmax + cross-entropy.
    let inputs = vec![
        randn(&[3, 4], &mut rng),
        randn(&[4, 7], &mut rng),
        randn(&[7], &mut rng),
    ];
    let err = grad_check(
        |g, v| {
            let y = g.linear(v[0], v[1], Some(v[2]));
            g.cross_entropy(y, &[6, 0, 3])
        },
        &inputs,
        EPS,
    );
    assert!(err < TOL, "linear + softmax/CE: {err}");

    // Pointer-copy classifier: sigmoid(h . w) under BCE.
    let inputs = vec![randn(&[5, 6], &mut rng), randn(&[6, 1], &mut rng)];
    let err = grad_check(
        |g, v| {
            let z = g.matmul(v[0], v[1]);
            g.bce_with_logits(z, &[1.0, 0.0, 1.0, 1.0, 0.0])
        },
        &inputs,
        EPS,
    );
    assert!(err < TOL, "pointer classifier: {err}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "grad checks took {elapsed:?}");
    pass(3, "gradient checks");
}

// ---------------------------------------------------------------------------
// 4. Trainability: overfit a 50-example plan -> story dataset.
// ---------------------------------------------------------------------------

fn overfit_dataset() -> (Vocabulary, Vec<TrainExample>) {
    let verbs = ["ran", "walked", "slept", "laughed", "jumped"];
    let names = ["Tom", "Ana", "Rex", "Mia", "Ben", "Lia", "Kai", "Zoe", "Eli", "Sol"];
    let mut corpus: Vec<Vec<String>> = Vec::new();
    let mut pairs: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    for i in 0..50usize {
        let v1 = verbs[i % verbs.len()];
        let n1 = names[i % names.len()];
        let v2 = verbs[(i / 5 + 1) % verbs.len()];
        let n2 = names[(i / 7 + 3) % names.len()];
        let plan: Vec<String> = ["<frame>", v1, n1, "<sent>", "<frame>", v2, n2, "<sent>"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let story: Vec<String> = [n1, v1, ".", n2, v2, "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        corpus.push(plan.clone());
        corpus.push(story.clone());
        pairs.push((plan, story));
    }
    let vocab = build_vocab(
        &corpus,
        Scheme::Word,
        256,
        SpecialTokens {
            placeholder_count: 4,
        },
    )
    .unwrap();
    let examples = pairs
        .into_iter()
        .map(|(plan, story)| {
            let src = vocab.encode(&plan);
            let mut tgt = vocab.encode(&story);
            tgt.push(vocab.eos_id());
            TrainExample::plain(src, tgt)
        })
        .collect();
    (vocab, examples)
}

#[test]
fn criterion_04_trainability() {
    let start = Instant::now();
    let (vocab, examples) = overfit_dataset();
    let cfg = Seq2SeqConfig {
        src_vocab: vocab.len(),
        tgt_vocab: vocab.len(),
        model_dim: 64,
        heads: 4,
        enc_layers: 2,
        dec_layers: 2,
        kernel_width: 3,
        max_positions: 64,
        verb_head: None,
        pointer_head: None,
    };
    let mut rng = substream(104, "overfit", 0);
    let mut model = Seq2Seq::new(cfg, &mut rng).unwrap();
    let train_cfg = TrainConfig {
        steps: 2000,
        seed: 104,
        ..Default::default()
    };
    train_model(&mut model, &examples, &train_cfg).unwrap();
    let nll = storygen::model::nll(&model, &examples).unwrap();
    assert!(nll < 0.1, "overfit NLL {nll}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "training took {elapsed:?}");
    pass(4, "overfit trainability");
}

// ---------------------------------------------------------------------------
// 5. Verb-attention trend on a long-range verb grammar.
// ---------------------------------------------------------------------------

fn verb_grammar_dataset(rng: &mut ChaCha8Rng) -> (Vocabulary, Vec<TrainExample>) {
    let cycle = ["rise", "fall", "turn", "wake", "drift", "burn"];
    let fillers = [
        "stone", "cloud", "river", "ember", "leaf", "shadow", "bell", "mist", "root", "spark",
        "dust", "wave",
    ];
    let mut corpus: Vec<Vec<String>> = Vec::new();
    let mut plans: Vec<Vec<String>> = Vec::new();
    for _ in 0..36usize {
        // The predicate sequence follows a fixed successor chain from a
        // random start; argument spans are noise that also contains verb
        // words as distractors, so only the true predicate slots (the
        // tokens after each frame delimiter) reveal the chain.
        let start = rng.gen_range(0..cycle.len());
        let mut plan: Vec<String> = Vec::new();
        for f in 0..5 {
            plan.push("<frame>".into());
            plan.push(cycle[(start + f) % cycle.len()].into());
            let gap = rng.gen_range(9..=12);
            for _ in 0..gap {
                if rng.gen_bool(0.25) {
                    plan.push(cycle[rng.gen_range(0..cycle.len())].into());
                } else {
                    plan.push(fillers[rng.gen_range(0..fillers.len())].into());
                }
            }
            plan.push("<sent>".into());
        }
        corpus.push(plan.clone());
        plans.push(plan);
    }
    corpus.push(vec!["story".into()]);
    let vocab = build_vocab(
        &corpus,
        Scheme::Word,
        256,
        SpecialTokens {
            placeholder_count: 4,
        },
    )
    .unwrap();
    let examples = plans
        .into_iter()
        .map(|plan| {
            let src = vocab.encode(&[String::from("story")]);
            let mut tgt = vocab.encode(&plan);
            tgt.push(vocab.eos_id());
            let mut input = vec![vocab.bos_id()];
            input.extend_from_slice(&tgt[..tgt.len() - 1]);
            let verb_positions =
                storygen::model::verb_positions_in_input(&input, vocab.frame_id());
            TrainExample {
                src,
                tgt,
                verb_positions,
                pointer: None,
            }
        })
        .collect();
    (vocab, examples)
}

#[test]
fn criterion_05_verb_attention_trend() {
    let mut data_rng = substream(105, "verbgrammar", 0);
    let (vocab, examples) = verb_grammar_dataset(&mut data_rng);
    let base = Seq2SeqConfig {
        src_vocab: vocab.len(),
        tgt_vocab: vocab.len(),
        model_dim: 32,
        heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        kernel_width: 3,
        max_positions: 128,
        verb_head: None,
        pointer_head: None,
    };
    let ablated_examples: Vec<TrainExample> = examples
        .iter()
        .map(|e| TrainExample {
            verb_positions: Vec::new(),
            ..e.clone()
        })
        .collect();

    let mut wins = 0;
    for seed in 0..5u64 {
        let train = |cfg: Seq2SeqConfig, data: &[TrainExample]| {
            let mut rng = substream(1050 + seed, "init", 0);
            let mut model = Seq2Seq::new(cfg, &mut rng).unwrap();
            let tc = TrainConfig {
                steps: 600,
                seed: 1050 + seed,
                ..Default::default()
            };
            train_model(&mut model, data, &tc).unwrap();
            (storygen::model::nll(&model, data).unwrap(), model)
        };
        let with_cfg = Seq2SeqConfig {
            verb_head: Some(0),
            ..base.clone()
        };
        let (with_nll, _) = train(with_cfg, &examples);
        let (without_nll, _) = train(base.clone(), &ablated_examples);
        if with_nll < without_nll {
            wins += 1;
        }
        println!(
            "  seed {seed}: verb-attention NLL {with_nll:.4} vs ablated {without_nll:.4}"
        );
    }
    assert!(wins >= 4, "verb attention won only {wins}/5 seeds");
    pass(5, "verb-attention trend");
}

// ---------------------------------------------------------------------------
// 6. Sampler fidelity.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_sampler_fidelity() {
    let v = 20usize;
    let unk_id = 1u32;
    let cfg = GenerationConfig {
        temperature: 0.8,
        top_k: 10,
        min_words: 0,
        max_words: 100,
        slack_words: 10,
        copy_threshold: 0.5,
        seed: 106,
        banned: vec![unk_id],
    };
    let mut logit_rng = substream(106, "logits", 0);
    let logits: Vec<f64> = (0..v).map(|_| logit_rng.gen_range(-2.0..2.0)).collect();

    // Analytic truncated renormalized distribution.
    let mut order: Vec<usize> = (0..v).filter(|&i| i as u32 != unk_id).collect();
    order.sort_by(|&a, &b| {
        (logits[b] / cfg.temperature)
            .partial_cmp(&(logits[a] / cfg.temperature))
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(cfg.top_k);
    let max = logits[order[0]] / cfg.temperature;
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| (logits[i] / cfg.temperature - max).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let analytic: Vec<(usize, f64)> = order
        .iter()
        .zip(&weights)
        .map(|(&i, w)| (i, w / total))
        .collect();

    let mut rng = substream(106, "draws", 0);
    let mut counts = vec![0usize; v];
    let draws = 100_000;
    for _ in 0..draws {
        let t = sample_top_k(&logits, &cfg, &mut rng).unwrap();
        counts[t as usize] += 1;
    }
    let mut tv = 0.0;
    for i in 0..v {
        let p = analytic
            .iter()
            .find(|(id, _)| *id == i)
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        tv += (p - counts[i] as f64 / draws as f64).abs();
    }
    let tv = tv / 2.0;
    assert!(tv <= 0.02, "total variation {tv}");

    // k = 1 equals argmax exactly (lowest id on ties).
    let mut argmax_cfg = cfg.clone();
    argmax_cfg.top_k = 1;
    let mut rng2 = substream(106, "argmax", 0);
    for _ in 0..1000 {
        let ls: Vec<f64> = (0..v).map(|_| rng2.gen_range(-3.0..3.0)).collect();
        let expected = (0..v)
            .filter(|&i| i as u32 != unk_id)
            .max_by(|&a, &b| ls[a].partial_cmp(&ls[b]).unwrap().then(b.cmp(&a)))
            .unwrap() as u32;
        let got = sample_top_k(&ls, &argmax_cfg, &mut rng2).unwrap();
        assert_eq!(got, expected);
    }

    // unk never appears even when it dominates the logits.
    let mut spiky = logits.clone();
    spiky[unk_id as usize] = 1e6;
    let mut rng3 = substream(106, "unk", 0);
    for _ in 0..1_000_000 {
        let t = sample_top_k(&spiky, &cfg, &mut rng3).unwrap();
        assert_ne!(t, unk_id, "unk escaped suppression");
    }
    pass(6, "sampler fidelity");
}

// ---------------------------------------------------------------------------
// 7. LCS oracle and throughput.
// ---------------------------------------------------------------------------

fn lcs_brute(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() || b.is_empty() {
        0
    } else if a[0] == b[0] {
        1 + lcs_brute(&a[1..], &b[1..])
    } else {
        lcs_brute(&a[1..], b).max(lcs_brute(a, &b[1..]))
    }
}

#[test]
fn criterion_07_lcs_oracle_and_speed() {
    let mut rng = substream(107, "lcs", 0);
    for case in 0..1000 {
        let la = rng.gen_range(0..=12);
        let lb = rng.gen_range(0..=12);
        let a: Vec<u32> = (0..la).map(|_| rng.gen_range(0..5)).collect();
        let b: Vec<u32> = (0..lb).map(|_| rng.gen_range(0..5)).collect();
        assert_eq!(
            lcs_len_ids(&a, &b),
            lcs_brute(&a, &b),
            "case {case}: {a:?} vs {b:?}"
        );
    }

    // Throughput: one 250-token story against 10k 800-token stories.
    let vocab: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let story: Vec<String> = (0..250)
        .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
        .collect();
    let training: Vec<Vec<String>> = (0..10_000)
        .map(|_| {
            (0..800)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
                .collect()
        })
        .collect();
    let start = Instant::now();
    let stats = lcs_stats(&story, &training);
    let elapsed = start.elapsed();
    assert!(stats.max > 0, "random overlap should be nonzero");
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "LCS sweep took {elapsed:?} (max {}, mean {:.2})",
        stats.max,
        stats.mean
    );
    pass(7, "LCS oracle and throughput");
}

// ---------------------------------------------------------------------------
// 8. Ranking-harness calibration and an overfit character-level filler.
// ---------------------------------------------------------------------------

struct WindowOracle;
impl MentionScorer for WindowOracle {
    fn score(&mut self, ctx: &MentionContext, candidate: &str) -> f64 {
        if !ctx.window.is_empty() && candidate == ctx.window[0] {
            1.0
        } else {
            0.0
        }
    }
}

struct RandomScorer(ChaCha8Rng);
impl MentionScorer for RandomScorer {
    fn score(&mut self, _: &MentionContext, _: &str) -> f64 {
        self.0.gen::<f64>()
    }
}

fn fill_fixture() -> Vec<AnonymizedStory> {
    let names = [
        "Mira", "Tomas", "Anton", "Bela", "Kira", "Petra", "Selim", "Yara", "Greta", "Nils",
        "Lena", "Bruno",
    ];
    let nouns = [
        "stone", "cloud", "river", "ember", "leaf", "shadow", "bell", "mist", "root", "spark",
        "dust", "wave",
    ];
    (0..names.len())
        .map(|i| {
            let pronoun = if i % 2 == 0 { "he" } else { "she" };
            let tokens: Vec<String> = [
                "ent0", "found", "the", nouns[i], ".", "ent0", "smiled", ".",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            AnonymizedStory {
                tokens,
                table: storygen::decompose::PlaceholderTable {
                    entries: vec![vec![
                        storygen::decompose::MentionSlot {
                            position: 0,
                            surface: names[i].to_string(),
                        },
                        storygen::decompose::MentionSlot {
                            position: 5,
                            surface: pronoun.to_string(),
                        },
                    ]],
                },
                scheme: storygen::decompose::AnonScheme::Coref,
                overflowed: false,
            }
        })
        .collect()
}

#[test]
fn criterion_08_ranking_calibration() {
    // Oracle scorer: exactly 1.0.
    let cases: Vec<storygen::evaluate::RankingCase> = (0..40)
        .map(|i| {
            let gold = format!("Name{i}");
            storygen::evaluate::RankingCase {
                ctx: MentionContext {
                    placeholder_id: i,
                    window: vec![gold.clone()],
                    previous_refs: vec![],
                    story_tokens: vec![],
                },
                gold,
                is_first: i % 2 == 0,
            }
        })
        .collect();
    let mut rng = substream(108, "rank-oracle", 0);
    let acc = entity_ranking(&mut WindowOracle, &cases, 10, &mut rng).unwrap();
    assert_eq!(acc.overall(), 1.0, "oracle must be perfect");

    // Uniform random scorer over 10k trials: chance level 1/10 within 0.02.
    let trials: Vec<storygen::evaluate::RankingCase> = (0..10_000)
        .map(|i| storygen::evaluate::RankingCase {
            ctx: MentionContext {
                placeholder_id: i,
                window: vec![],
                previous_refs: vec![],
                story_tokens: vec![],
            },
            gold: format!("N{i}"),
            is_first: true,
        })
        .collect();
    let mut rng = substream(108, "rank-random", 0);
    let mut scorer = RandomScorer(substream(108, "rank-scores", 0));
    let acc = entity_ranking(&mut scorer, &trials, 10, &mut rng).unwrap();
    assert!(
        (acc.overall() - 0.100).abs() <= 0.02,
        "random scorer accuracy {}",
        acc.overall()
    );

    // Overfit character-level filler ranks gold first on >= 95% of its own
    // training mentions.
    let stories = fill_fixture();
    let mut src_corpus: Vec<Vec<String>> = stories.iter().map(|s| s.tokens.clone()).collect();
    src_corpus.push(vec!["he".into(), "she".into()]);
    let src_vocab = build_vocab(
        &src_corpus,
        Scheme::Word,
        256,
        SpecialTokens {
            placeholder_count: 8,
        },
    )
    .unwrap();
    let mut char_corpus: Vec<Vec<String>> = Vec::new();
    for s in &stories {
        for slots in &s.table.entries {
            for slot in slots {
                char_corpus.push(storygen::corpus::tokenize(&slot.surface, Scheme::Character));
            }
        }
    }
    let tgt_vocab = build_vocab(
        &char_corpus,
        Scheme::Character,
        128,
        SpecialTokens {
            placeholder_count: 8,
        },
    )
    .unwrap();

    let mut examples = Vec::new();
    for s in &stories {
        examples.extend(coref_fill_training_examples(
            s, &src_vocab, &tgt_vocab, None, 6,
        ));
    }
    let cfg = Seq2SeqConfig {
        src_vocab: src_vocab.len(),
        tgt_vocab: tgt_vocab.len(),
        model_dim: 48,
        heads: 2,
        enc_layers: 1,
        dec_layers: 1,
        kernel_width: 3,
        max_positions: 64,
        verb_head: None,
        pointer_head: None,
    };
    let mut rng = substream(108, "fill-init", 0);
    let mut model = Seq2Seq::new(cfg, &mut rng).unwrap();
    let tc = TrainConfig {
        steps: 1500,
        seed: 108,
        ..Default::default()
    };
    train_model(&mut model, &examples, &tc).unwrap();

    let mut fill = FillModel::new(model, src_vocab, tgt_vocab, None);
    fill.window = 6;
    let cases = ranking_cases(&stories, 6);
    assert_eq!(cases.len(), 24);
    let mut rng = substream(108, "rank-fill", 0);
    let acc = entity_ranking(&mut fill, &cases, 10, &mut rng).unwrap();
    assert!(
        acc.overall() >= 0.95,
        "overfit filler ranked gold first in only {:.1}% of mentions",
        acc.overall() * 100.0
    );
    pass(8, "ranking calibration");
}

// ---------------------------------------------------------------------------
// 9. Metric golden values on the hand-annotated fixture.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_metric_golden_values() {
    let stories: Vec<Story> = std::fs::read_to_string(fixture("handset/stories.txt"))
        .unwrap()
        .lines()
        .map(Story::new)
        .collect();
    let records = read_annotation_file(&fixture("handset/annotations.jsonl")).unwrap();
    assert_eq!(stories.len(), 10);
    let annotated: Vec<_> = stories
        .iter()
        .zip(&records)
        .map(|(s, r)| import_annotations(s, r).unwrap())
        .collect();

    let lexicon = default_verb_lexicon();
    let verbs = verb_diversity(&annotated, &lexicon).unwrap();
    // Hand counts: per-story unique verb lemmas 2,2,2,3,3,1,3,3,2,3 = 24;
    // 27 verb tokens; lemma counts fall=2, love=2, sleep=2, rest 1 each.
    // Top five by (count, lemma): fall, love, sleep, answer, ask = 8 tokens,
    // leaving 19 diverse.
    assert!((verbs.unique_verbs_per_story - 2.4).abs() < 1e-9);
    assert!((verbs.diverse_verb_pct - 100.0 * 19.0 / 27.0).abs() < 1e-9);
    assert_eq!(
        verbs.top_lemmas,
        vec!["fall", "love", "sleep", "answer", "ask"]
    );

    // Hand counts: distinct mention strings 2,1,1,0,3,1,2,1,1,1 = 13.
    let entities = entity_name_diversity(&annotated).unwrap();
    assert!((entities - 1.3).abs() < 1e-9);

    // Hand counts: chains 2,1,0,1,1,0,1,1,2,2 = 11; per-story mean unique
    // names per chain 2, 1, 0, 2, 3, 0, 1, 2, 1.5, 2 = 14.5.
    let coref = coref_cluster_stats(&annotated).unwrap();
    assert!((coref.chains_per_story - 1.1).abs() < 1e-9);
    assert!((coref.unique_names_per_chain - 1.45).abs() < 1e-9);
    pass(9, "metric golden values");
}

// ---------------------------------------------------------------------------
// 10. Pipeline determinism through the CLI.
// ---------------------------------------------------------------------------

fn pipeline_config(out: &Path, seed: u64) -> storygen_cli::config::RunConfig {
    let mut cfg = storygen_cli::config::RunConfig::default();
    cfg.seed = Some(seed);
    cfg.paths.source = fixture("prompts.txt");
    cfg.paths.target = fixture("stories.txt");
    cfg.paths.out = out.to_path_buf();
    cfg.preprocess.prompt_vocab_size = 600;
    cfg.preprocess.story_vocab_size = 800;
    cfg.preprocess.fill_vocab_size = 256;
    for m in [&mut cfg.model.plan, &mut cfg.model.story, &mut cfg.model.fill] {
        m.model_dim = 16;
        m.heads = 2;
        m.enc_layers = 1;
        m.dec_layers = 1;
        m.max_positions = 256;
    }
    cfg.model.plan.verb_head = Some(0);
    cfg.model.story.pointer_head = Some(0);
    cfg.train.steps = 36;
    cfg.generation.min_words = 5;
    cfg.generation.max_words = 40;
    cfg.generation.slack_words = 20;
    cfg.generation.plan_max_words = 25;
    cfg
}

#[test]
fn criterion_10_pipeline_determinism() {
    use storygen_cli::{dispatch, Command};
    let run = |out: &Path| {
        let cfg = pipeline_config(out, 1010);
        dispatch(Command::Preprocess, &cfg).unwrap();
        dispatch(
            Command::Annotate {
                import: None,
                force_fallback: true,
            },
            &cfg,
        )
        .unwrap();
        dispatch(Command::Pipeline, &cfg).unwrap();
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());

    // Plans, anonymized stories, fills, final stories, and reports must be
    // byte-identical across the two runs.
    for name in [
        "stage1.txt",
        "stage2.txt",
        "tables.jsonl",
        "stories.txt",
        "provenance.jsonl",
        "report.txt",
        "report.json",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    pass(10, "pipeline determinism");
}

// ---------------------------------------------------------------------------
// 11. Length contract over scripted stub models.
// ---------------------------------------------------------------------------

/// Stub language model: fixed logits over a tiny vocabulary, with the period
/// and eos probabilities varying per instance.
struct StubModel {
    vocab_len: usize,
    word_ids: Vec<u32>,
    period_id: u32,
    eos_id: u32,
    period_logit: f64,
    eos_logit: f64,
}

impl StepScorer for StubModel {
    fn step(&mut self, _prefix: &[u32]) -> StepInfo {
        let mut logits = vec![-1e9; self.vocab_len];
        for &w in &self.word_ids {
            logits[w as usize] = 0.0;
        }
        logits[self.period_id as usize] = self.period_logit;
        logits[self.eos_id as usize] = self.eos_logit;
        StepInfo {
            logits,
            copy: None,
        }
    }
}

#[test]
fn criterion_11_length_contract() {
    let corpus: Vec<Vec<String>> = vec!["alpha beta gamma delta epsilon . zeta"
        .split_whitespace()
        .map(str::to_string)
        .collect()];
    let vocab = build_vocab(
        &corpus,
        Scheme::Word,
        64,
        SpecialTokens {
            placeholder_count: 2,
        },
    )
    .unwrap();
    let word_ids: Vec<u32> = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        .iter()
        .map(|w| vocab.id(w).unwrap())
        .collect();
    let period_id = vocab.id(".").unwrap();

    let cfg = GenerationConfig {
        temperature: 0.8,
        top_k: 10,
        min_words: 150,
        max_words: 250,
        slack_words: 100,
        copy_threshold: 0.5,
        seed: 1011,
        banned: vec![vocab.unk_id(), vocab.pad_id(), vocab.bos_id()],
    };

    for trial in 0..500u64 {
        // Half the stubs like eos (stories end between the limits), half
        // never emit it (stories must be cut at a sentence boundary).
        let eos_logit = if trial % 2 == 0 { 0.4 } else { -1e9 };
        let mut stub = StubModel {
            vocab_len: vocab.len(),
            word_ids: word_ids.clone(),
            period_id,
            eos_id: vocab.eos_id(),
            period_logit: -0.4,
            eos_logit,
        };
        let mut rng = substream(1011, "length", trial);
        let out = generate_sequence(&mut stub, &vocab, &cfg, &mut rng).unwrap();

        assert!(!out.hard_cut, "trial {trial} hard-cut");
        assert!(
            out.word_count >= cfg.min_words,
            "trial {trial}: only {} words",
            out.word_count
        );
        assert!(
            out.word_count <= cfg.max_words + cfg.slack_words,
            "trial {trial}: {} words exceeds the budget",
            out.word_count
        );
        assert!(
            !out.tokens.iter().any(|t| t == "<unk>"),
            "trial {trial}: unk leaked"
        );
        if out.word_count > cfg.max_words {
            // Cut at the nearest sentence end: the output must close with a
            // sentence ender (closing quotes would follow it, but this stub
            // has none).
            assert_eq!(
                out.tokens.last().map(String::as_str),
                Some("."),
                "trial {trial}: over-long output not cut at a sentence end"
            );
        }
    }
    pass(11, "length contract");
}
