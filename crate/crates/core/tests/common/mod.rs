//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the decoder, trie, metric or matching code it is
//! used to check.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeSet, HashMap, HashSet};
use tripletgen::catalog::{ByteTokenizer, Catalog, TokenId, Tokenizer};
use tripletgen::decoder::Scorer;
use tripletgen::linearize::{linearize, Triplet, TripletSet};
use tripletgen::metrics::EvalPair;

/// Distinct random names over `alphabet`, with lengths in `1..=max_len` and
/// no leading or trailing whitespace.
pub fn random_names<R: Rng>(
    rng: &mut R,
    count: usize,
    alphabet: &[u8],
    max_len: usize,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 1000 {
        attempts += 1;
        let len = rng.gen_range(1..=max_len);
        let name: String = (0..len)
            .map(|_| *alphabet.choose(rng).unwrap() as char)
            .collect();
        if name.trim() != name {
            continue;
        }
        if seen.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

pub fn random_catalog<R: Rng>(
    rng: &mut R,
    entities: usize,
    relations: usize,
    alphabet: &[u8],
    max_len: usize,
) -> Catalog {
    let e = random_names(rng, entities, alphabet, max_len);
    let r = random_names(rng, relations, alphabet, max_len);
    Catalog::new(e, r).unwrap()
}

/// Every linearization with at most `max_triplets` triplets (repeats allowed),
/// optionally including the empty one.
pub fn enumerate_linearizations(
    cat: &Catalog,
    max_triplets: usize,
    allow_empty: bool,
) -> Vec<Vec<TokenId>> {
    let mut all = Vec::new();
    for s in 0..cat.entity_count() as u32 {
        for r in 0..cat.relation_count() as u32 {
            for o in 0..cat.entity_count() as u32 {
                all.push(Triplet::new(s, r, o));
            }
        }
    }
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Triplet>> = vec![vec![]];
    while let Some(seq) = stack.pop() {
        if !seq.is_empty() || allow_empty {
            out.push(linearize(&seq, cat, &ByteTokenizer).unwrap());
        }
        if seq.len() < max_triplets {
            for t in &all {
                let mut next = seq.clone();
                next.push(*t);
                stack.push(next);
            }
        }
    }
    out
}

/// Sum of the scorer's log-probabilities along `seq`, memoized per prefix.
pub struct SequenceScorer<'a> {
    scorer: &'a dyn Scorer,
    context: &'a str,
    cache: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl<'a> SequenceScorer<'a> {
    pub fn new(scorer: &'a dyn Scorer, context: &'a str) -> Self {
        SequenceScorer {
            scorer,
            context,
            cache: HashMap::new(),
        }
    }

    pub fn log_prob(&mut self, seq: &[TokenId]) -> f64 {
        let mut total = 0.0;
        for i in 0..seq.len() {
            let prefix = &seq[..i];
            if !self.cache.contains_key(prefix) {
                let lp = self.scorer.next_log_probs(self.context, prefix);
                self.cache.insert(prefix.to_vec(), lp);
            }
            total += self.cache[prefix][seq[i].index()];
        }
        total
    }
}

/// Best sequence by `score(log_prob, len)`, ties to the lexicographically
/// smaller sequence.
pub fn brute_force_best(
    seqs: &[Vec<TokenId>],
    scorer: &dyn Scorer,
    context: &str,
    score: impl Fn(f64, usize) -> f64,
) -> (Vec<TokenId>, f64, f64) {
    let mut sc = SequenceScorer::new(scorer, context);
    let mut best: Option<(Vec<TokenId>, f64, f64)> = None;
    for s in seqs {
        let lp = sc.log_prob(s);
        let v = score(lp, s.len());
        let better = match &best {
            None => true,
            Some((bs, _, bv)) => v > *bv || (v == *bv && s < bs),
        };
        if better {
            best = Some((s.clone(), lp, v));
        }
    }
    best.unwrap()
}

/// Triplet set of a linearization, read back by splitting on markers and
/// looking names up directly.
pub fn naive_parse(seq: &[TokenId], cat: &Catalog) -> TripletSet {
    let tok = ByteTokenizer;
    let mut out = TripletSet::new();
    let body = &seq[..seq.len() - 1];
    for block in body.split(|&t| t == TokenId::ET).filter(|b| !b.is_empty()) {
        let i_rel = block.iter().position(|&t| t == TokenId::REL).unwrap();
        let i_obj = block.iter().position(|&t| t == TokenId::OBJ).unwrap();
        let s = tok.decode(&block[1..i_rel]).unwrap();
        let r = tok.decode(&block[i_rel + 1..i_obj]).unwrap();
        let o = tok.decode(&block[i_obj + 1..]).unwrap();
        out.insert(Triplet {
            subject: cat.entity_id(&s).unwrap(),
            relation: cat.relation_id(&r).unwrap(),
            object: cat.entity_id(&o).unwrap(),
        });
    }
    out
}

/// Precision, recall and F1 from plain counts.
pub fn prf(correct: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
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

/// Counts of (correct, predicted, gold) for triplets with relation `rel`, or
/// all triplets when `rel` is `None`, by explicit set membership loops.
pub fn direct_counts(pairs: &[EvalPair], rel: Option<u32>) -> (usize, usize, usize) {
    let keep = |t: &Triplet| rel.is_none_or(|r| t.relation.0 == r);
    let mut c = (0, 0, 0);
    for p in pairs {
        let pred: Vec<Triplet> = p.predicted.iter().copied().filter(keep).collect();
        let gold: Vec<Triplet> = p.gold.iter().copied().filter(keep).collect();
        c.0 += pred.iter().filter(|t| gold.iter().any(|g| g == *t)).count();
        c.1 += pred.len();
        c.2 += gold.len();
    }
    c
}

/// Macro (p, r, f1) where undefined per-relation terms count as zero.
pub fn direct_macro(pairs: &[EvalPair]) -> (f64, f64, f64) {
    let rels: BTreeSet<u32> = pairs
        .iter()
        .flat_map(|p| {
            p.predicted
                .iter()
                .chain(p.gold.iter())
                .map(|t| t.relation.0)
        })
        .collect();
    if rels.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let (mut ps, mut rs) = (0.0, 0.0);
    for r in &rels {
        let (c, np, ng) = direct_counts(pairs, Some(*r));
        let (p, rr, _) = prf(c, np, ng);
        ps += p;
        rs += rr;
    }
    let p = ps / rels.len() as f64;
    let r = rs / rels.len() as f64;
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

pub fn random_triplet<R: Rng>(rng: &mut R, entities: u32, relations: u32) -> Triplet {
    Triplet::new(
        rng.gen_range(0..entities),
        rng.gen_range(0..relations),
        rng.gen_range(0..entities),
    )
}

pub fn random_pairs<R: Rng>(
    rng: &mut R,
    docs: usize,
    entities: u32,
    relations: u32,
) -> Vec<EvalPair> {
    (0..docs)
        .map(|d| {
            let gold: TripletSet = (0..rng.gen_range(0..5))
                .map(|_| random_triplet(rng, entities, relations))
                .collect();
            let mut predicted: TripletSet =
                gold.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            for _ in 0..rng.gen_range(0..4) {
                predicted.insert(random_triplet(rng, entities, relations));
            }
            EvalPair {
                doc_id: d.to_string(),
                predicted,
                gold,
            }
        })
        .collect()
}

/// Weight of a gold/pred pair, written straight from the six-case table.
pub fn table_weight(g: &Triplet, p: &Triplet) -> u8 {
    let s = g.subject == p.subject;
    let r = g.relation == p.relation;
    let o = g.object == p.object;
    if s && r && o {
        1
    } else if r && (s ^ o) {
        2
    } else if !r && s && o {
        3
    } else if !r && (s ^ o) {
        4
    } else if r && !s && !o {
        5
    } else {
        6
    }
}

/// Greedy matching by sorting the full edge list and filtering.
pub fn sort_and_filter_matching(
    gold: &TripletSet,
    pred: &TripletSet,
) -> Vec<(Triplet, Option<Triplet>, u8)> {
    let mut edges: Vec<(u8, Triplet, Triplet)> = Vec::new();
    for g in gold.iter() {
        for p in pred.iter() {
            edges.push((table_weight(g, p), *g, *p));
        }
    }
    edges.sort();
    let mut used_g = HashSet::new();
    let mut used_p = HashSet::new();
    let mut out: HashMap<Triplet, (Option<Triplet>, u8)> = HashMap::new();
    for (w, g, p) in edges {
        if !used_g.contains(&g) && !used_p.contains(&p) {
            used_g.insert(g);
            used_p.insert(p);
            out.insert(g, (Some(p), w));
        }
    }
    gold.iter()
        .map(|g| {
            let (p, w) = out.get(g).copied().unwrap_or((None, 6));
            (*g, p, w)
        })
        .collect()
}

/// Ten five-letter cities and ten nine-letter relations, first and last
/// letters all distinct within each class, one fact per city and each
/// relation used once. Every fact is written with five templates that all end
/// in the subject name. Equal name lengths keep raw log-prob ranking from
/// favouring short names, so a byte trigram can recover a fact from the
/// tail of its input sentence.
pub fn toy_world() -> (Catalog, Vec<(String, Triplet)>) {
    let cities = [
        "Cairo", "Delhi", "Paris", "Turin", "Basel", "Genoa", "Minsk", "Rabat", "Vaduz", "Nancy",
    ];
    let relations = [
        "twin city",
        "rail link",
        "ferry hub",
        "sister of",
        "across to",
        "east from",
        "near lake",
        "lies west",
        "over hill",
        "bus lines",
    ];
    let templates: [fn(&str, &str, &str) -> String; 5] = [
        |s, r, o| format!("{o} has {r} with {s}"),
        |s, r, o| format!("{o} is the {r} of {s}"),
        |s, r, o| format!("the {r} of {o} belongs to {s}"),
        |s, r, o| format!("{r} {o}, says {s}"),
        |s, r, o| format!("via {r} {o} reaches {s}"),
    ];
    let cat = Catalog::new(cities, relations).unwrap();
    let mut docs = Vec::new();
    for i in 0..10u32 {
        let t = Triplet::new(i, (i * 3) % 10, (i + 3) % 10);
        let (s, r, o) = (
            cities[i as usize],
            relations[t.relation.0 as usize],
            cities[t.object.0 as usize],
        );
        for template in templates {
            docs.push((template(s, r, o), t));
        }
    }
    (cat, docs)
}
