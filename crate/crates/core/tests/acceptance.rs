//! Acceptance checks, run in sequence so the timing limits measure one
//! workload at a time. Prints one PASS/FAIL line per criterion; pass numbers
//! as arguments to run a subset (`cargo test --test acceptance -- 3 7`).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slotfill::corpus::{
    concept_embeddings, split_dev, synth_generate, DomainDataset, DomainSchema, IobTag, SlotDef, SynthGrammar,
    SynthSuite,
};
use slotfill::evaluation::{
    evaluate, learning_curve, token_f1_per_slot, weighted_f1, zero_shot_eval, CurveOptions, Weighting,
};
use slotfill::models::{gradient_suite, ModelKind};
use slotfill::text::{preprocess, EmbeddingTable};
use slotfill::training::{make_schedule, train, BatchSampler, DomainSplit, ModelCheckpoint, TrainConfig};
use slotfill::{cli::render_curve, Error};

type Outcome = Result<String, String>;

fn within(limit: Duration, started: Instant) -> Result<String, String> {
    let took = started.elapsed();
    if took <= limit {
        Ok(format!("{:.1}s", took.as_secs_f64()))
    } else {
        Err(format!("took {:.1}s, limit {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn gradients() -> Outcome {
    let t0 = Instant::now();
    let rows = gradient_suite(10, 1e-4).map_err(|e| e.to_string())?;
    let time = within(Duration::from_secs(60), t0)?;
    let worst = rows
        .iter()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
        .ok_or("empty suite")?;
    if worst.max_relative_error < 1e-3 {
        Ok(format!("{} checks, worst {} {:.2e}, {time}", rows.len(), worst.name, worst.max_relative_error))
    } else {
        Err(format!("{} relative error {:.2e}", worst.name, worst.max_relative_error))
    }
}

/// Counts every (slot, utterance, token) triple directly from tag strings.
fn brute_force(gold: &[Vec<IobTag>], pred: &[Vec<IobTag>], slots: &[&str]) -> (BTreeMap<String, (f64, f64, f64, usize)>, Option<f64>) {
    let slot_of = |t: &IobTag| {
        let s = t.to_string();
        if s == "O" {
            None
        } else {
            Some(s[2..].to_string())
        }
    };
    let mut out = BTreeMap::new();
    for &slot in slots {
        let (mut tp, mut predicted, mut support) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(pred) {
            for k in 0..g.len() {
                let gs = slot_of(&g[k]).as_deref() == Some(slot);
                let ps = slot_of(&p[k]).as_deref() == Some(slot);
                support += gs as usize;
                predicted += ps as usize;
                tp += (gs && ps) as usize;
            }
        }
        if support + predicted == 0 {
            continue;
        }
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        out.insert(slot.to_string(), (p, r, f, support));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (_, _, f, support) in out.values() {
        if *support > 0 {
            num += *support as f64 * f;
            den += *support as f64;
        }
    }
    (out, (den > 0.0).then(|| num / den))
}

fn metric_oracle() -> Outcome {
    let t0 = Instant::now();
    let pool = ["from", "to", "date", "count", "name"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let slots = &pool[..rng.gen_range(1..=5)];
        let n_utt = rng.gen_range(1..=10);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..n_utt {
            let len = rng.gen_range(1..=8);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<IobTag> {
                (0..len)
                    .map(|_| {
                        let s = slots[rng.gen_range(0..slots.len())].to_string();
                        match rng.gen_range(0..3) {
                            0 => IobTag::O,
                            1 => IobTag::B(s),
                            _ => IobTag::I(s),
                        }
                    })
                    .collect()
            };
            gold.push(draw(&mut rng));
            pred.push(draw(&mut rng));
        }
        let (expected, expected_w) = brute_force(&gold, &pred, slots);
        let got = token_f1_per_slot(&gold, &pred).map_err(|e| e.to_string())?;
        let got_view: BTreeMap<String, (f64, f64, f64, usize)> = got
            .iter()
            .map(|(k, s)| (k.clone(), (s.precision, s.recall, s.f1, s.support)))
            .collect();
        if got_view != expected {
            return Err(format!("case {case}: per-slot scores differ"));
        }
        let got_w = weighted_f1(&got, Weighting::Support).ok();
        if got_w.map(f64::to_bits) != expected_w.map(f64::to_bits) {
            return Err(format!("case {case}: weighted {got_w:?} vs {expected_w:?}"));
        }
    }
    let time = within(Duration::from_secs(10), t0)?;
    Ok(format!("200 cases identical, {time}"))
}

fn three_slot_set() -> (DomainDataset, EmbeddingTable) {
    let schema = DomainSchema::new(
        "movie_tickets",
        vec![
            SlotDef::new("film", "movie title"),
            SlotDef::new("cinema", "theater location"),
            SlotDef::new("seats", "number of tickets"),
        ],
    )
    .expect("schema");
    let lex = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let grammar = SynthGrammar {
        templates: lex(&[
            "two words for {film} at {cinema}",
            "i want {seats} tickets for {film}",
            "book {seats} seats at {cinema} for {film}",
            "is {film} playing at {cinema}",
            "get me {seats} for {film} please",
        ]),
        lexicons: BTreeMap::from([
            ("film".to_string(), lex(&["the lost river", "arrival", "blue harbor", "night train to lima"])),
            ("cinema".to_string(), lex(&["the odeon", "grand plaza", "riverside cinema", "north park"])),
            ("seats".to_string(), lex(&["two", "3", "four", "12"])),
        ]),
    };
    let data = synth_generate(&grammar, &schema, 11, 20).expect("grammar");
    let mut vocab: Vec<String> = grammar.vocabulary().into_iter().collect();
    for s in &schema.slots {
        vocab.extend(s.description_tokens());
    }
    vocab.sort();
    vocab.dedup();
    let table = concept_embeddings(&vocab, &[], 50, 3).expect("table");
    (data, table)
}

fn overfit() -> Outcome {
    let t0 = Instant::now();
    let (data, table) = three_slot_set();
    if data.train.len() != 20 || data.schema.slots.len() != 3 {
        return Err("fixture is not 20 utterances x 3 slots".into());
    }
    let mut scores = Vec::new();
    for kind in ModelKind::ALL {
        let mut cfg = TrainConfig::desk(kind);
        cfg.steps = 2000;
        let split = DomainSplit::new(data.schema.clone(), data.train.clone(), Vec::new());
        let trained = train(&[split], &table, &cfg).map_err(|e| e.to_string())?;
        let report = evaluate(&trained.model, &data.schema, &data.train, &table, Weighting::Support)
            .map_err(|e| e.to_string())?;
        scores.push((kind, report.weighted().map_err(|e| e.to_string())?));
    }
    let time = within(Duration::from_secs(300), t0)?;
    let text = scores.iter().map(|(k, s)| format!("{k} {s:.4}")).collect::<Vec<_>>().join(", ");
    if scores.iter().all(|(_, s)| *s >= 0.99) {
        Ok(format!("{text}, {time}"))
    } else {
        Err(text)
    }
}

fn schedule() -> Outcome {
    let sizes = vec![("A".to_string(), 10), ("B".to_string(), 1000)];
    let sched = make_schedule(&sizes).map_err(|e| e.to_string())?;
    let mut sampler = BatchSampler::new(&sched, &[10, 1000], 1, 42).map_err(|e| e.to_string())?;
    let draws = 10_000;
    let a = (0..draws).filter(|_| sampler.next_domain() == 0).count() as f64 / draws as f64;
    let b = 1.0 - a;
    if (a - 0.25).abs() <= 0.02 && (b - 0.75).abs() <= 0.02 {
        Ok(format!("A {a:.4}, B {b:.4}"))
    } else {
        Err(format!("A {a:.4}, B {b:.4}"))
    }
}

fn zero_shot() -> Outcome {
    let t0 = Instant::now();
    let suite = SynthSuite::bundled();
    let table = suite.embeddings(50, 0).map_err(|e| e.to_string())?;
    let data = suite.generate(0, 1000, 200).map_err(|e| e.to_string())?;
    for kind in [ModelKind::St, ModelKind::Mt] {
        match zero_shot_eval(&suite.held_out, &data, &table, &TrainConfig::desk(kind), Weighting::Support) {
            Err(Error::Unsupported(_)) => {}
            other => return Err(format!("{kind} did not refuse: {:?}", other.map(|(r, _)| r.weighted_f1))),
        }
    }
    let (report, _) = zero_shot_eval(&suite.held_out, &data, &table, &TrainConfig::desk(ModelKind::Ct), Weighting::Support)
        .map_err(|e| e.to_string())?;
    let time = within(Duration::from_secs(600), t0)?;
    let f1 = report.weighted().map_err(|e| e.to_string())?;
    if f1 >= 0.5 {
        Ok(format!("ct on {} {f1:.4}, st/mt refuse, {time}", suite.held_out))
    } else {
        Err(format!("ct on {} {f1:.4}", suite.held_out))
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// `hi` at least 0.02 above `lo`, or the two within two standard errors.
fn ordered(hi: &[f64], lo: &[f64]) -> (bool, String) {
    let (mh, vh) = mean_var(hi);
    let (ml, vl) = mean_var(lo);
    let se = (vh / hi.len() as f64 + vl / lo.len() as f64).sqrt();
    let diff = mh - ml;
    if diff >= 0.02 {
        (true, format!("margin {diff:.3}"))
    } else if diff.abs() <= 2.0 * se {
        (true, format!("indistinguishable, diff {diff:.3}, se {se:.3}"))
    } else {
        (false, format!("diff {diff:.3}, se {se:.3}"))
    }
}

fn low_data() -> Outcome {
    let suite = SynthSuite::bundled();
    let table = suite.embeddings(50, 0).map_err(|e| e.to_string())?;
    let data = suite.generate(0, 1000, 200).map_err(|e| e.to_string())?;
    let mut opts = CurveOptions::new(TrainConfig::desk(ModelKind::Ct));
    opts.points = vec![5];
    opts.runs = 5;
    let curve = learning_curve(std::slice::from_ref(&suite.held_out), &data, &table, &opts).map_err(|e| e.to_string())?;
    let runs = |k| -> Result<Vec<f64>, String> {
        Ok(curve.get(&suite.held_out, 5, k).ok_or(format!("missing {k} cell"))?.runs.clone())
    };
    let (st, mt, ct) = (runs(ModelKind::St)?, runs(ModelKind::Mt)?, runs(ModelKind::Ct)?);
    let (ct_mt, why_a) = ordered(&ct, &mt);
    let (mt_st, why_b) = ordered(&mt, &st);
    let text = format!(
        "means st {:.4} mt {:.4} ct {:.4}; ct>=mt {why_a}; mt>=st {why_b}",
        mean_var(&st).0,
        mean_var(&mt).0,
        mean_var(&ct).0
    );
    if ct_mt && mt_st {
        Ok(text)
    } else {
        Err(text)
    }
}

fn persistence() -> Outcome {
    let suite = SynthSuite::bundled();
    let table = suite.embeddings(50, 0).map_err(|e| e.to_string())?;
    let data = suite.generate(1, 60, 30).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for kind in ModelKind::ALL {
        let used = if kind == ModelKind::St { &data[..1] } else { &data[..3] };
        let splits: Vec<DomainSplit> = used
            .iter()
            .map(|d| {
                let (tr, dev) = split_dev(&d.train, 0.2);
                DomainSplit::new(d.schema.clone(), tr, dev)
            })
            .collect();
        let mut cfg = TrainConfig::desk(kind);
        cfg.steps = 150;
        cfg.dev_period = 50;
        let a = train(&splits, &table, &cfg).map_err(|e| e.to_string())?;
        let b = train(&splits, &table, &cfg).map_err(|e| e.to_string())?;
        let bits = |l: &[f64]| l.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(&a.log.losses) != bits(&b.log.losses) {
            return Err(format!("{kind}: loss traces differ"));
        }
        let schemas: Vec<DomainSchema> = used.iter().map(|d| d.schema.clone()).collect();
        let path = dir.path().join(format!("{kind}.json"));
        ModelCheckpoint::from_model(&a.model, cfg.model, Some(cfg.clone()), &schemas, &table)
            .and_then(|c| c.save(&path))
            .map_err(|e| e.to_string())?;
        let restored = ModelCheckpoint::load(&path)
            .and_then(|c| c.to_model(&table, false))
            .map_err(|e| e.to_string())?;
        for (p, q) in a.model.params().iter().zip(restored.params().iter()) {
            if p.name != q.name || bits(p.value.data()) != bits(q.value.data()) {
                return Err(format!("{kind}: parameter {} changed on reload", p.name));
            }
        }
        for d in used {
            for u in &d.test {
                let x = a.model.tag(&u.tokens, &d.schema, &table).map_err(|e| e.to_string())?;
                let y = restored.tag(&u.tokens, &d.schema, &table).map_err(|e| e.to_string())?;
                if x != y {
                    return Err(format!("{kind}: prediction changed on reload"));
                }
            }
        }
    }
    Ok("loss traces bitwise equal, reloaded models identical for st/mt/ct".into())
}

fn preprocessing() -> Outcome {
    let cases: [(&str, &[&str]); 3] = [
        (
            "Search for flights to Philly one - way with promo code 54ZFHK33",
            &["search", "for", "flights", "to", "philly", "one", "-", "way", "with", "promo", "code", "##zfhk##"],
        ),
        (
            "I need a table at Sun Penang on December 24th",
            &["i", "need", "a", "table", "at", "sun", "penang", "on", "december", "##th"],
        ),
        ("", &[]),
    ];
    for (text, want) in cases {
        let got = preprocess(text);
        if got != want {
            return Err(format!("{text:?} -> {got:?}"));
        }
    }
    Ok("sample sentences tokenize exactly".into())
}

fn protocol() -> Outcome {
    let items: Vec<usize> = (0..100).collect();
    let (tr, dev) = split_dev(&items, 0.2);
    if (tr.len(), dev.len()) != (80, 20) {
        return Err(format!("split_dev(100) = ({}, {})", tr.len(), dev.len()));
    }
    let suite = SynthSuite::bundled();
    let table = suite.embeddings(16, 0).map_err(|e| e.to_string())?;
    let data = suite.generate(0, 30, 10).map_err(|e| e.to_string())?;
    let mut train_cfg = TrainConfig::desk(ModelKind::Ct);
    train_cfg.steps = 5;
    train_cfg.model.embedding_dim = 16;
    let mut opts = CurveOptions::new(train_cfg);
    opts.points = vec![0];
    opts.runs = 1;
    let curve = learning_curve(std::slice::from_ref(&suite.held_out), &data, &table, &opts).map_err(|e| e.to_string())?;
    let kinds: Vec<ModelKind> = curve.cells.iter().map(|c| c.kind).collect();
    if kinds != [ModelKind::Ct] {
        return Err(format!("point 0 cells: {kinds:?}"));
    }
    let text = render_curve(&curve);
    let row: Vec<&str> = text.lines().nth(1).unwrap_or("").split_whitespace().collect();
    if row.len() == 4 && row[1] == "-" && row[2] == "-" && row[3] != "-" {
        Ok(format!("(80, 20); point 0 row {row:?}"))
    } else {
        Err(format!("rendered row {row:?}"))
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "gradient correctness", gradients),
        (2, "metric oracle", metric_oracle),
        (3, "overfit sanity", overfit),
        (4, "schedule proportionality", schedule),
        (5, "zero-shot transfer", zero_shot),
        (6, "low-data ordering", low_data),
        (7, "determinism and persistence", persistence),
        (8, "preprocessing", preprocessing),
        (9, "experiment protocol", protocol),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        match check() {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
