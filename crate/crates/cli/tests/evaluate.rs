mod common;

use common::*;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

const ENTITIES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
const RELATIONS: [&str; 5] = ["r0", "r1", "r2", "r3", "r4"];

type Names = (String, String, String);

/// Small deterministic generator so the fixtures do not need a seed crate.
struct Lcg(u64);

impl Lcg {
    fn below(&mut self, n: usize) -> usize {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 33) % n as u64) as usize
    }

    fn triplet(&mut self) -> Value {
        triplet(
            ENTITIES[self.below(6)],
            RELATIONS[self.below(5)],
            ENTITIES[self.below(6)],
        )
    }
}

struct Fixture {
    ws: Workspace,
    cat: Vec<String>,
    gold: PathBuf,
    pred: PathBuf,
}

fn random_fixture(seed: u64, docs: usize) -> Fixture {
    let ws = Workspace::new();
    let (ent, rel) = ws.catalog("", &ENTITIES, &RELATIONS);
    let mut rng = Lcg(seed);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for i in 0..docs {
        let g: Vec<Value> = (0..rng.below(4)).map(|_| rng.triplet()).collect();
        let mut p: Vec<Value> = g.iter().filter(|_| rng.below(3) > 0).cloned().collect();
        p.extend((0..rng.below(3)).map(|_| rng.triplet()));
        gold.push(json!({"id": format!("d{i}"), "input": "", "triplets": g}));
        pred.push(json!({"id": format!("d{i}"), "triplets": p}));
    }
    Fixture {
        gold: ws.jsonl("gold.jsonl", &gold),
        pred: ws.jsonl("pred.jsonl", &pred),
        cat: catalog_flags(&ent, &rel),
        ws,
    }
}

fn args(sub: &str, f: &Fixture, extra: &[&str]) -> Vec<String> {
    let mut a = vec![
        sub.to_owned(),
        "--gold".into(),
        f.gold.display().to_string(),
        "--pred".into(),
        f.pred.display().to_string(),
    ];
    a.extend(f.cat.iter().cloned());
    a.extend(extra.iter().map(|s| s.to_string()));
    a
}

fn doc_sets(path: &Path) -> Vec<BTreeSet<Names>> {
    read_jsonl(path)
        .iter()
        .map(|r| triplet_names(&r["triplets"]).into_iter().collect())
        .collect()
}

fn close(a: &Value, b: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() < 1e-12
}

fn prf(gold: usize, predicted: usize, correct: usize) -> (f64, f64, f64) {
    let p = if predicted == 0 {
        0.0
    } else {
        correct as f64 / predicted as f64
    };
    let r = if gold == 0 {
        0.0
    } else {
        correct as f64 / gold as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

#[test]
fn gold_equal_to_pred_scores_one() {
    let f = random_fixture(7, 30);
    fs::copy(&f.gold, &f.pred).unwrap();
    let run = tripletgen(args("evaluate", &f, &[])).ok();
    let report: Value = serde_json::from_str(&run.stdout).unwrap();
    for key in ["precision", "recall", "f1"] {
        assert_eq!(report["micro"][key], 1.0, "{report}");
    }
    assert_eq!(report["macro"]["f1"], 1.0);
    assert_eq!(report["documents"], 30);
    assert_eq!(report["dropped_predictions"], 0);
}

#[test]
fn micro_and_per_relation_match_direct_counts() {
    let f = random_fixture(11, 60);
    let out = f.ws.path("report.json");
    tripletgen(args("evaluate", &f, &["--out", out.to_str().unwrap()])).ok();
    let report = read_json(&out);

    let (gold, pred) = (doc_sets(&f.gold), doc_sets(&f.pred));
    let mut per_rel: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for (g, p) in gold.iter().zip(&pred) {
        for t in g {
            per_rel.entry(t.1.clone()).or_default()[0] += 1;
        }
        for t in p {
            let c = per_rel.entry(t.1.clone()).or_default();
            c[1] += 1;
            c[2] += usize::from(g.contains(t));
        }
    }
    let total = per_rel
        .values()
        .fold([0; 3], |a, c| [a[0] + c[0], a[1] + c[1], a[2] + c[2]]);
    let (p, r, f1) = prf(total[0], total[1], total[2]);
    assert!(
        close(&report["micro"]["precision"], p)
            && close(&report["micro"]["recall"], r)
            && close(&report["micro"]["f1"], f1)
    );

    let rows = report["per_relation"].as_array().unwrap();
    assert_eq!(rows.len(), per_rel.len());
    for row in rows {
        let c = per_rel[row["relation"].as_str().unwrap()];
        assert_eq!(
            [
                row["gold"].as_u64(),
                row["predicted"].as_u64(),
                row["correct"].as_u64()
            ],
            c.map(|x| Some(x as u64))
        );
    }
    assert!(f.ws.path("report.json.manifest.json").exists());
}

#[test]
fn bucket_table_matches_partition_oracle() {
    let f = random_fixture(5, 80);
    // r4 is missing on purpose and lands in the unseen bucket; "zz" is not in the catalog.
    let counts: BTreeMap<&str, u64> = [("r0", 1), ("r1", 3), ("r2", 70), ("r3", 64)]
        .into_iter()
        .collect();
    let counts_text: String = counts
        .iter()
        .map(|(r, c)| format!("{r}\t{c}\n"))
        .collect::<String>()
        + "zz\t9\n";
    let counts_path = f.ws.write("counts.tsv", &counts_text);
    let run = tripletgen(args(
        "buckets",
        &f,
        &["--counts", counts_path.to_str().unwrap()],
    ))
    .ok();
    assert!(run.stderr.contains("1 relation(s)"), "{}", run.stderr);

    let bucket_of = |rel: &str| match counts.get(rel) {
        None => -1,
        Some(&c) => {
            let mut b = 0;
            while 1u64 << (b + 1) <= c {
                b += 1;
            }
            b
        }
    };
    let (gold, pred) = (doc_sets(&f.gold), doc_sets(&f.pred));
    let mut expected: BTreeMap<i32, (BTreeSet<&str>, [usize; 3])> = BTreeMap::new();
    for rel in RELATIONS {
        let b = bucket_of(rel);
        let in_play = counts.contains_key(rel)
            || gold
                .iter()
                .chain(&pred)
                .any(|s| s.iter().any(|t| t.1 == rel));
        if !in_play {
            continue;
        }
        // Partition: keep only this relation's triplets and recount.
        let entry = expected.entry(b).or_default();
        entry.0.insert(rel);
        for (g, p) in gold.iter().zip(&pred) {
            let g: BTreeSet<_> = g.iter().filter(|t| t.1 == rel).collect();
            let p: BTreeSet<_> = p.iter().filter(|t| t.1 == rel).collect();
            entry.1[0] += g.len();
            entry.1[1] += p.len();
            entry.1[2] += g.intersection(&p).count();
        }
    }
    expected.retain(|_, (_, c)| c[0] + c[1] > 0);

    let mut lines = run.stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bucket\tmin_count\tmax_count\trelations\tgold\tpredicted\tcorrect\tprecision\trecall\tf1"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), expected.len(), "{}", run.stdout);
    for (row, (b, (rels, c))) in rows.iter().zip(&expected) {
        assert_eq!(row[0].parse::<i32>().unwrap(), *b);
        if *b >= 0 {
            assert_eq!(row[1].parse::<u64>().unwrap(), 1 << b);
            assert_eq!(row[2].parse::<u64>().unwrap(), (1 << (b + 1)) - 1);
        }
        assert_eq!(row[3].parse::<usize>().unwrap(), rels.len());
        assert_eq!(
            [row[4], row[5], row[6]].map(|x| x.parse::<usize>().unwrap()),
            *c
        );
        let (p, r, f1) = prf(c[0], c[1], c[2]);
        for (cell, want) in [(row[7], p), (row[8], r), (row[9], f1)] {
            assert_eq!(cell, format!("{want:.6}"));
        }
    }

    // The same table comes out of `evaluate --buckets`, next to the report.
    let out = f.ws.path("report.json");
    tripletgen(args(
        "evaluate",
        &f,
        &[
            "--counts",
            counts_path.to_str().unwrap(),
            "--buckets",
            "--out",
            out.to_str().unwrap(),
        ],
    ))
    .ok();
    assert_eq!(
        fs::read_to_string(f.ws.path("report.json.buckets.tsv")).unwrap(),
        run.stdout
    );
    assert_eq!(
        read_json(&out)["buckets"]["buckets"]
            .as_array()
            .unwrap()
            .len(),
        expected.len()
    );
}

#[test]
fn buckets_flag_requires_counts() {
    let f = random_fixture(1, 3);
    tripletgen(args("evaluate", &f, &["--buckets"])).failed();
}

#[test]
fn bootstrap_is_seeded() {
    let f = random_fixture(3, 40);
    let run = |seed: &str| {
        let r = tripletgen(args(
            "evaluate",
            &f,
            &["--bootstrap", "200", "--seed", seed],
        ))
        .ok();
        serde_json::from_str::<Value>(&r.stdout).unwrap()
    };
    let (a, b, c) = (run("1"), run("1"), run("2"));
    assert_eq!(a, b);
    assert_ne!(a["bootstrap"], c["bootstrap"]);
    let ci = &a["bootstrap"]["micro_f1"];
    assert_eq!(a["bootstrap"]["resamples"], 200);
    assert!(
        ci["low"].as_f64().unwrap() <= ci["high"].as_f64().unwrap(),
        "{ci}"
    );
}

#[test]
fn unknown_names_gold_fails_pred_is_dropped() {
    let f = random_fixture(9, 5);
    let mut pred = read_jsonl(&f.pred);
    pred[0]["triplets"]
        .as_array_mut()
        .unwrap()
        .push(triplet("A", "nope", "B"));
    f.ws.jsonl("pred.jsonl", &pred);
    let run = tripletgen(args("evaluate", &f, &[])).ok();
    assert_eq!(
        serde_json::from_str::<Value>(&run.stdout).unwrap()["dropped_predictions"],
        1
    );

    let mut gold = read_jsonl(&f.gold);
    gold[0]["triplets"]
        .as_array_mut()
        .unwrap()
        .push(triplet("Nobody", "r0", "B"));
    f.ws.jsonl("gold.jsonl", &gold);
    tripletgen(args("evaluate", &f, &[])).failed();
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let f = random_fixture(2, 10);
    let counts = f.ws.write("counts.tsv", "r0\t4\n");
    let out = f.ws.path("report.json");
    let table = f.ws.path("missing_dir/buckets.tsv");
    let before = f.ws.listing();
    // The report is staged before the table, whose directory does not exist.
    tripletgen(args(
        "evaluate",
        &f,
        &[
            "--counts",
            counts.to_str().unwrap(),
            "--buckets",
            "--bucket-table",
            table.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    ))
    .failed();
    assert_eq!(f.ws.listing(), before);
}

/// Six documents with gold (A, r0, B), one prediction each, at weights 1..6.
fn attribution_fixture() -> Fixture {
    let ws = Workspace::new();
    let (ent, rel) = ws.catalog("", &ENTITIES, &RELATIONS);
    let preds = [
        ("A", "r0", "B"),
        ("A", "r0", "C"),
        ("A", "r1", "B"),
        ("A", "r1", "C"),
        ("C", "r0", "D"),
        ("C", "r1", "D"),
    ];
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (i, (s, r, o)) in preds.into_iter().enumerate() {
        gold.push(json!({"id": format!("w{}", i + 1), "input": "A r0 B",
            "triplets": [{"sub": "A", "rel": "r0", "obj": "B", "sub_span": [0, 1], "obj_span": [5, 6]}]}));
        pred.push(json!({"id": format!("w{}", i + 1), "triplets": [triplet(s, r, o)]}));
    }
    let mentions = [
        json!({"id": "w1", "mentions": [[0, 1], [5, 6]]}),
        json!({"id": "w2", "mentions": [[0, 2], [4, 6]]}),
        json!({"id": "w3", "mentions": [[0, 1]]}),
    ];
    ws.jsonl("mentions.jsonl", &mentions);
    Fixture {
        gold: ws.jsonl("gold.jsonl", &gold),
        pred: ws.jsonl("pred.jsonl", &pred),
        cat: catalog_flags(&ent, &rel),
        ws,
    }
}

#[test]
fn attribution_matches_hand_counts() {
    let f = attribution_fixture();
    let mentions = f.ws.path("mentions.jsonl");
    let out = f.ws.path("attr.json");
    tripletgen(args(
        "attribute",
        &f,
        &[
            "--mentions",
            mentions.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    ))
    .ok();
    let r = read_json(&out);
    assert_eq!(r["documents"], 6);
    assert_eq!(r["edges"], 6);
    // NEL weights 2, 4, 5, 6; RC weights 3, 4, 6.
    assert_eq!(r["nel_error"], 4.0 / 6.0);
    assert_eq!(r["rc_error"], 3.0 / 6.0);
    // Only w1 is recovered.
    assert_eq!(r["overall_recall_error"], 5.0 / 6.0);
    // Exact: only w1 has both spans. Partial: w2's spans overlap as well.
    assert_eq!(r["ner_exact"], 5.0 / 6.0);
    assert_eq!(r["ner_partial"], 4.0 / 6.0);
    assert_eq!(
        r["weights"],
        json!({"1": 1, "2": 1, "3": 1, "4": 1, "5": 1, "6": 1})
    );
    let manifest = read_json(&f.ws.path("attr.json.manifest.json"));
    assert!(manifest["inputs"]["mentions"].is_string());

    let run = tripletgen(args(
        "attribute",
        &f,
        &["--mentions", mentions.to_str().unwrap(), "--mode", "exact"],
    ))
    .ok();
    let r: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(r["ner_exact"], 5.0 / 6.0);
    assert!(r.get("ner_partial").is_none());

    let run = tripletgen(args("attribute", &f, &[])).ok();
    let r: Value = serde_json::from_str(&run.stdout).unwrap();
    assert!(r.get("ner_exact").is_none() && r.get("ner_partial").is_none());
    assert_eq!(r["nel_error"], 4.0 / 6.0);
}

#[test]
fn ner_needs_gold_spans() {
    let f = attribution_fixture();
    let mut gold = read_jsonl(&f.gold);
    gold[2]["triplets"][0]
        .as_object_mut()
        .unwrap()
        .remove("obj_span");
    f.ws.jsonl("gold.jsonl", &gold);
    let mentions = f.ws.path("mentions.jsonl");
    let run = tripletgen(args(
        "attribute",
        &f,
        &["--mentions", mentions.to_str().unwrap()],
    ))
    .failed();
    assert!(run.stderr.contains("no mention span"), "{}", run.stderr);
}

#[test]
fn reports_and_manifests_are_reproducible() {
    let f = random_fixture(13, 50);
    let counts = f.ws.write("counts.tsv", "r0\t1\nr1\t2\nr2\t9\n");
    let out = f.ws.path("report.json");
    let flags = [
        "--counts",
        counts.to_str().unwrap(),
        "--buckets",
        "--bootstrap",
        "50",
        "--out",
        out.to_str().unwrap(),
    ];
    let mut seen = Vec::new();
    for _ in 0..2 {
        tripletgen(args("evaluate", &f, &flags)).ok();
        seen.push(
            [
                "report.json",
                "report.json.buckets.tsv",
                "report.json.manifest.json",
            ]
            .map(|n| fs::read(f.ws.path(n)).unwrap()),
        );
    }
    assert_eq!(seen[0], seen[1]);
    let manifest = read_json(&f.ws.path("report.json.manifest.json"));
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config"]["bootstrap"], 50);
    assert!(manifest.get("timestamp").is_none());
}
