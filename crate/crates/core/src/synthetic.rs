//! Deterministic synthetic fixtures.
//!
//! A small listing-moderation corpus (six product categories, twenty
//! listings each, four rules per category plus the compliant option `Z`)
//! together with template libraries, evaluation records and provider scripts
//! for the scripted provider. Everything here is a pure function of the code,
//! so regenerated fixtures are byte-identical.

use std::path::Path;

use crate::domain::json::{self, JsonError};
use crate::domain::{Lineage, Query, Rule, RuleIdSet, RuleSet, Template, TemplateLibrary, TemplateStatus};
use crate::gateway::{ScriptEntry, ScriptFile};
use crate::hash::fnv1a64;
use crate::library::{sample_eval_subset, EvalRecord, PipelineConfig, ScoreRecord};
use crate::preference::PreferencePair;
use crate::rng::SplitMix64;

pub const TASK_CONTEXT: &str = "Decide which advertising rules of an e-commerce platform a product listing violates. \
Each category has its own rules, identified by ids such as H1; the id Z means the listing is compliant.";

pub const COMPLIANT: &str = "Z";

struct CategorySpec {
    name: &'static str,
    prefix: &'static str,
    products: [&'static str; 4],
    /// (title, body, claim phrase) per rule.
    rules: [(&'static str, &'static str, &'static str); 4],
    neutral: [&'static str; 2],
}

const CATEGORIES: [CategorySpec; 6] = [
    CategorySpec {
        name: "body",
        prefix: "B",
        products: ["Waist trainer belt", "Seamless shapewear bodysuit", "Posture corrector vest", "Thigh toning band"],
        rules: [
            ("Spot reduction", "Do not claim that a product removes fat from a specific body part.", "slims your waist in 7 days"),
            ("Effortless results", "Do not claim body changes without diet or exercise.", "no exercise needed"),
            ("Medical device wording", "Shapewear must not be presented as a medical device.", "corrects your spine like a brace"),
            ("Size exaggeration", "Do not promise a specific drop in clothing size.", "drop three dress sizes"),
        ],
        neutral: ["smooths lines under fitted clothes", "breathable fabric for all-day wear"],
    },
    CategorySpec {
        name: "women",
        prefix: "W",
        products: ["Herbal intimate wash", "Breast care cream", "Cycle comfort tea", "Fertility support capsules"],
        rules: [
            ("Treatment claims", "Do not claim to treat gynecological conditions.", "cures intimate infections"),
            ("Enlargement claims", "Do not claim natural breast enlargement.", "natural enlargement in weeks"),
            ("Hormone claims", "Do not claim to regulate hormones.", "balances your hormones"),
            ("Fertility guarantees", "Do not guarantee conception.", "guarantees pregnancy"),
        ],
        neutral: ["gentle fragrance-free formula", "a warm caffeine-free blend"],
    },
    CategorySpec {
        name: "height",
        prefix: "H",
        products: ["Growth formula milk", "Stretching kit", "Calcium chewables", "Height insoles"],
        rules: [
            ("Height increase", "Do not claim that a product increases height.", "grow 5cm in 2 weeks"),
            ("Growth plate claims", "Do not claim effects on bone growth plates.", "reopens growth plates"),
            ("Clinical endorsement", "Do not cite unverified medical endorsement.", "recommended by doctors"),
            ("Targeting minors", "Do not target children with growth claims.", "made for kids aged 8 to 12"),
        ],
        neutral: ["insoles add height only while worn", "a daily calcium source for adults"],
    },
    CategorySpec {
        name: "men",
        prefix: "M",
        products: ["Energy herbal tonic", "Hair growth serum", "Vitality capsules", "Daily multivitamin for men"],
        rules: [
            ("Performance claims", "Do not make sexual performance claims.", "boosts stamina all night"),
            ("Testosterone claims", "Do not claim to raise testosterone.", "raises testosterone fast"),
            ("Hair cure claims", "Do not promise permanent hair regrowth.", "regrows hair permanently"),
            ("Prescription equivalence", "Do not compare a product to prescription drugs.", "works like prescription pills"),
        ],
        neutral: ["contains zinc and vitamin B6", "a light non-greasy texture"],
    },
    CategorySpec {
        name: "weight",
        prefix: "L",
        products: ["Slimming coffee", "Keto meal shake", "Green tea capsules", "Fiber detox powder"],
        rules: [
            ("Rapid loss", "Do not promise rapid weight loss.", "lose 10kg in a month"),
            ("Eat anything", "Do not claim results regardless of diet.", "eat whatever you want"),
            ("Fat burning", "Do not claim that a product burns fat by itself.", "burns fat while you sleep"),
            ("Guaranteed results", "Do not guarantee weight-loss results.", "results guaranteed or money back"),
        ],
        neutral: ["a filling breakfast option", "supports a balanced diet"],
    },
    CategorySpec {
        name: "health",
        prefix: "D",
        products: ["Blood sugar herbal drops", "Immune gummies", "Joint comfort balm", "Sleep aid tea"],
        rules: [
            ("Disease cures", "Do not claim to cure a disease.", "cures diabetes"),
            ("Medication replacement", "Do not suggest stopping prescribed medication.", "replace your medication"),
            ("Absolute prevention", "Do not claim complete protection from illness.", "prevents all viruses"),
            ("False certification", "Do not claim certification that was not granted.", "hospital certified formula"),
        ],
        neutral: ["made with chamomile and mint", "a soothing evening ritual"],
    },
];

const FILLERS: [&str; 4] = [
    "Ships within 24 hours.",
    "Free returns for 30 days.",
    "Over 10,000 sold this month.",
    "Limited-time bundle price.",
];

pub const CATEGORY_NAMES: [&str; 6] = ["body", "women", "height", "men", "weight", "health"];

/// Rule set for all six categories plus the uncategorised compliant option.
pub fn rules() -> RuleSet {
    let mut rules = Vec::new();
    for cat in &CATEGORIES {
        for (i, (title, body, _)) in cat.rules.iter().enumerate() {
            rules.push(Rule {
                id: format!("{}{}", cat.prefix, i + 1),
                title: title.to_string(),
                body: body.to_string(),
                category: cat.name.to_string(),
            });
        }
    }
    rules.push(Rule {
        id: COMPLIANT.into(),
        title: "Compliant".into(),
        body: "No rule is violated, or an exemption applies.".into(),
        category: String::new(),
    });
    RuleSet {
        rules,
        compliant_option: Some(COMPLIANT.into()),
    }
}

/// What a synthetic listing contains, used to script provider replies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingFacts {
    pub product: String,
    /// Claim phrases in the order they appear, with their rule ids.
    pub claims: Vec<(String, String)>,
    pub neutral: Option<String>,
    /// A rule of the same category that the listing does not violate.
    pub decoy: String,
}

fn listing(cat_idx: usize, i: usize) -> (Query, ListingFacts) {
    let cat = &CATEGORIES[cat_idx];
    let mut rng = SplitMix64::new(fnv1a64(cat.name.as_bytes()) ^ i as u64);
    let product = cat.products[rng.below(4) as usize];
    let filler = FILLERS[rng.below(4) as usize];
    let rule_id = |k: usize| format!("{}{}", cat.prefix, k + 1);
    let first = (i + i / 5) % 4;
    let (claims, neutral) = match i % 5 {
        3 => {
            let second = (first + 1) % 4;
            (vec![(cat.rules[first].2, rule_id(first)), (cat.rules[second].2, rule_id(second))], None)
        }
        4 => (Vec::new(), Some(cat.neutral[i / 5 % 2])),
        _ => (vec![(cat.rules[first].2, rule_id(first))], None),
    };
    let mut parts = vec![format!("{product}.")];
    for (phrase, _) in &claims {
        parts.push(format!("{}.", capitalise(phrase)));
    }
    if let Some(n) = neutral {
        parts.push(format!("{}.", capitalise(n)));
    }
    parts.push(filler.to_string());
    let gold: RuleIdSet = if claims.is_empty() {
        RuleIdSet::from([COMPLIANT.to_string()])
    } else {
        claims.iter().map(|(_, id)| id.clone()).collect()
    };
    let decoy = (0..4).map(rule_id).find(|id| !gold.contains(id)).expect("four rules per category");
    let query = Query {
        id: format!("{}-{:02}", cat.name, i + 1),
        category: cat.name.to_string(),
        content: parts.join(" "),
        gold,
    };
    let facts = ListingFacts {
        product: product.to_string(),
        claims: claims.into_iter().map(|(p, id)| (p.to_string(), id)).collect(),
        neutral: neutral.map(str::to_string),
        decoy,
    };
    (query, facts)
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// The full corpus: 120 listings, category by category.
pub fn corpus_with_facts() -> Vec<(Query, ListingFacts)> {
    (0..CATEGORIES.len())
        .flat_map(|c| (0..20).map(move |i| listing(c, i)))
        .collect()
}

pub fn corpus() -> Vec<Query> {
    corpus_with_facts().into_iter().map(|(q, _)| q).collect()
}

/// A larger plain dataset of `n` listings cycling through the corpus with
/// fresh ids, for sampling tests.
pub fn numbered_dataset(n: usize) -> Vec<Query> {
    let base = corpus();
    (0..n)
        .map(|i| Query {
            id: format!("q{:03}", i + 1),
            ..base[i % base.len()].clone()
        })
        .collect()
}

const PLACEHOLDER_VOCAB: [&str; 5] = [
    "product type",
    "claimed effect",
    "target audience",
    "exemption",
    "supporting evidence",
];

/// Bodies of the six benchmark templates `T1`..`T6`.
pub const BENCHMARK_TEMPLATES: [&str; 6] = [
    "Review the listing against each rule in turn.\n\
1. Identify the [product type] being sold.\n\
2. Quote the [claimed effect] made for it.\n\
3. Check whether an [exemption] covers the claim.\n\
4. Decide which rule, if any, is violated.",
    "1. Determine the [target audience] of the listing.\n\
2. Extract the [claimed effect] verbatim.\n\
3. Compare the claim with the prohibited wording of each rule.\n\
4. Conclude with the violated rule ids.",
    "1. List every [claimed effect] in the listing.\n\
2. Note any [supporting evidence] offered, such as certificates.\n\
3. Match each claim against the rules independently.\n\
4. Weigh any [exemption] before the final decision.",
    "1. Name the [product type].\n\
2. Find the [claimed effect].\n\
3. Decide.",
    "Work from the rules to the listing.\n\
1. For each rule, ask whether the [claimed effect] falls under it.\n\
2. Check the [target audience] for protected groups.\n\
3. Check for an [exemption] that makes the listing compliant.\n\
4. Report the violated rules or the compliant option.",
    "1. Read the listing and summarise the [product type] and [claimed effect].\n\
2. Look for [supporting evidence] and judge whether it is credible.\n\
3. Decide on the rule ids.",
];

/// Global scores of the benchmark templates on their evaluation subset.
pub const BENCHMARK_ACCURACY: [f64; 6] = [0.75, 0.6, 0.8, 0.45, 0.7, 0.55];

pub const BENCHMARK_DATASET_ID: &str = "d1-synthetic";

fn retained(id: &str, name: &str, body: &str) -> Template {
    let mut t = Template::new(id, name, body, Lineage::seed());
    t.status = TemplateStatus::Retained;
    t
}

fn record(template_id: &str, dataset_id: &str, n: usize, correct_partial: usize) -> EvalRecord {
    EvalRecord {
        template_id: template_id.into(),
        dataset_id: dataset_id.into(),
        n,
        correct_partial,
        correct_full: correct_partial.saturating_sub(2),
        accuracy: correct_partial as f64 / n as f64,
    }
}

/// Inputs for a benchmark run with the scripted provider.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub task_context: String,
    pub rules: RuleSet,
    pub queries: Vec<Query>,
    pub library: TemplateLibrary,
    pub records: Vec<EvalRecord>,
    pub script: ScriptFile,
}

pub const RULES_FILE: &str = "rules.json";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const LIBRARY_FILE: &str = "library.json";
pub const RECORDS_FILE: &str = "records.json";
pub const SCRIPT_FILE: &str = "script.json";
pub const CONTEXT_FILE: &str = "context.txt";

impl Fixture {
    /// Writes the fixture as the files the CLI consumes.
    pub fn write(&self, dir: &Path) -> Result<(), JsonError> {
        json::write_text(&dir.join(CONTEXT_FILE), &format!("{}\n", self.task_context))?;
        json::write_file(&dir.join(RULES_FILE), &self.rules)?;
        json::write_jsonl(&dir.join(QUERIES_FILE), &self.queries)?;
        json::write_file(&dir.join(LIBRARY_FILE), &self.library)?;
        json::write_file(&dir.join(RECORDS_FILE), &self.records)?;
        json::write_file(&dir.join(SCRIPT_FILE), &self.script)?;
        Ok(())
    }
}

fn ids(set: &RuleIdSet) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(",")
}

/// The 20 benchmark listings: every sixth listing of the corpus.
pub fn benchmark_queries() -> Vec<(Query, ListingFacts)> {
    corpus_with_facts().into_iter().step_by(6).collect()
}

pub fn benchmark_library() -> TemplateLibrary {
    let templates = BENCHMARK_TEMPLATES
        .iter()
        .enumerate()
        .map(|(i, body)| retained(&format!("T{}", i + 1), &format!("Template {}", i + 1), body))
        .collect();
    TemplateLibrary::new(TASK_CONTEXT, templates)
}

fn benchmark_corpus_text(rules: &RuleSet) -> String {
    let mut text: Vec<&str> = rules.rules.iter().map(|r| r.body.as_str()).collect();
    text.push(BENCHMARK_TEMPLATES[1]);
    text.push(BENCHMARK_TEMPLATES[4]);
    text.push(BENCHMARK_TEMPLATES[4]);
    text.join("\n")
}

/// The 20-listing benchmark with scripted replies for every stage.
///
/// Replies are keyed per listing and shared by all templates. The script
/// mixes clean runs with wrong initial judgments that adjudication fixes,
/// a listing with no answer line at any stage, unparseable adjudications
/// that fall back to the initial judgment,
/// a dropped unknown rule id, a missing verdict, a non-verbatim span and a
/// listing with no adjudication reply at all.
pub fn benchmark() -> Fixture {
    let rules = rules();
    let listings = benchmark_queries();
    let mut entries = Vec::new();
    for (i, (q, facts)) in listings.iter().enumerate() {
        let gold = ids(&q.gold);
        let qid = &q.id;
        let initial = match i {
            5 => "The listing is hard to classify without more context.".to_string(),
            _ if i % 4 == 1 => format!("The wording looks like a {} issue.\nANSWER: {}", facts.decoy, facts.decoy),
            _ => format!("Holistic review of the listing.\nANSWER: {gold}"),
        };
        entries.push(ScriptEntry::tag(format!("qualitative/{qid}/*"), initial));

        let claim = facts.claims.first().map_or("NONE".to_string(), |(p, _)| p.clone());
        entries.push(ScriptEntry::tag(format!("extract/{qid}/*/claimed effect"), claim));
        entries.push(ScriptEntry::tag(format!("extract/{qid}/*/product type"), facts.product.clone()));
        if let Some(n) = &facts.neutral {
            entries.push(ScriptEntry::tag(format!("extract/{qid}/*/exemption"), n.clone()));
        }
        if i == 2 {
            entries.push(ScriptEntry::tag(
                format!("extract/{qid}/*/target audience"),
                "\"aimed at professional athletes\"",
            ));
        }

        let claim_ids = facts.claims.iter().map(|(_, id)| id.as_str()).collect::<Vec<_>>().join(",");
        let match_reply = match i {
            6 => format!("RULES: {claim_ids},Q9 | VERDICT: supports_violation"),
            10 => format!("RULES: {claim_ids}"),
            _ => format!("RULES: {claim_ids} | VERDICT: supports_violation"),
        };
        if !facts.claims.is_empty() {
            entries.push(ScriptEntry::tag(format!("match/{qid}/*/claimed effect"), match_reply));
        }

        let adjudication = match i {
            17 => None,
            5 => Some("The chain is inconclusive.".to_string()),
            _ if i % 7 == 3 => Some("After weighing the chain the answer is unclear.".to_string()),
            _ if i % 9 == 8 => Some(format!("The chain points to {}.\nANSWER: {}", facts.decoy, facts.decoy)),
            _ if q.gold.len() > 1 && i % 2 == 1 => {
                let first = q.gold.iter().next().expect("non-empty gold");
                Some(format!("Only one claim is clearly prohibited.\nANSWER: {first}"))
            }
            _ => Some(format!("The evidence chain confirms the judgment.\nANSWER: {gold}")),
        };
        if let Some(reply) = adjudication {
            entries.push(ScriptEntry::tag(format!("adjudicate/{qid}/*"), reply));
        }
    }
    entries.push(ScriptEntry::tag("extract/*", "NONE"));
    entries.push(ScriptEntry::tag("match/*/*/exemption", "RULES: Z | VERDICT: supports_compliance"));
    entries.push(ScriptEntry::tag("match/*", "RULES: NONE | VERDICT: inconclusive"));

    let library = benchmark_library();
    let records = library
        .templates
        .iter()
        .zip(BENCHMARK_ACCURACY)
        .map(|(t, acc)| record(&t.id, BENCHMARK_DATASET_ID, 20, (acc * 20.0).round() as usize))
        .collect();
    Fixture {
        task_context: TASK_CONTEXT.into(),
        script: ScriptFile {
            entries,
            bigram_corpus: benchmark_corpus_text(&rules),
        },
        rules,
        queries: listings.into_iter().map(|(q, _)| q).collect(),
        library,
        records,
    }
}

/// Per-query outcomes of the six benchmark templates on the 20 benchmark
/// listings, drawn so that each template's hit rate tracks its accuracy.
pub fn benchmark_score_records() -> Vec<ScoreRecord> {
    let mut out = Vec::new();
    for (t_idx, acc) in BENCHMARK_ACCURACY.iter().enumerate() {
        let tid = format!("T{}", t_idx + 1);
        for (q, facts) in benchmark_queries() {
            let h = fnv1a64(format!("{}|{tid}", q.id).as_bytes());
            let correct = (h % 100) as f64 / 100.0 < *acc;
            let prediction = if correct {
                q.gold.clone()
            } else {
                RuleIdSet::from([facts.decoy.clone()])
            };
            out.push(ScoreRecord {
                template_id: tid.clone(),
                query_id: q.id.clone(),
                correct,
                prediction,
                error: None,
            });
        }
    }
    out.sort_by(|a, b| (&a.template_id, &a.query_id).cmp(&(&b.template_id, &b.query_id)));
    out
}

/// Template ids of the engineered selection fixture: highest global score,
/// lowest local NLL, and the balanced template.
pub const ABLATION_GLOBAL: &str = "TG";
pub const ABLATION_LOCAL: &str = "TL";
pub const ABLATION_BALANCED: &str = "TB";

const ABLATION_BODIES: [(&str, &str); 3] = [
    (
        ABLATION_GLOBAL,
        "STEP 1: QUOTE THE [claimed effect] EXACTLY.\nSTEP 2: MAP IT TO RULE IDS (E.G. H1, L3, D2).\nSTEP 3: OUTPUT THE IDS.",
    ),
    (
        ABLATION_LOCAL,
        "1. read the listing and note the [claimed effect].\n2. see if the claim is allowed.\n3. answer.",
    ),
    (
        ABLATION_BALANCED,
        "1. Read the listing and quote the [claimed effect].\n2. Check the claim against each rule of the category.\n3. Look for an [exemption].\n4. Answer with the rule ids.",
    ),
];

/// Fixture on which global-only and local-only selection each pick a
/// template that fails on a different third of the listings, while the
/// fused score picks the template that is always right after adjudication.
///
/// The balanced template's initial judgments are wrong on every other
/// listing, so stage ablation separates the baseline from full adjudication.
pub fn ablation() -> Fixture {
    let rules = rules();
    let listings: Vec<(Query, ListingFacts)> = corpus_with_facts()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % 20 < 2)
        .map(|(_, x)| x)
        .collect();
    let mut entries = Vec::new();
    for (i, (q, facts)) in listings.iter().enumerate() {
        let gold = ids(&q.gold);
        for (tid, _) in ABLATION_BODIES {
            let fails = (tid == ABLATION_GLOBAL && i % 3 == 0) || (tid == ABLATION_LOCAL && i % 3 == 1);
            let final_answer = if fails { facts.decoy.clone() } else { gold.clone() };
            let initial_wrong = fails || (tid == ABLATION_BALANCED && i % 2 == 0);
            let initial_answer = if initial_wrong { facts.decoy.clone() } else { gold.clone() };
            entries.push(ScriptEntry::tag(
                format!("qualitative/{}/{tid}", q.id),
                format!("First impression.\nANSWER: {initial_answer}"),
            ));
            entries.push(ScriptEntry::tag(
                format!("adjudicate/{}/{tid}", q.id),
                format!("Re-checked against the rules.\nANSWER: {final_answer}"),
            ));
        }
    }
    entries.push(ScriptEntry::tag("extract/*", "NONE"));

    let local = ABLATION_BODIES[1].1;
    let balanced = ABLATION_BODIES[2].1;
    let corpus_text = [local, local, local, balanced, balanced].join("\n");
    let templates = ABLATION_BODIES
        .iter()
        .map(|(id, body)| retained(id, id, body))
        .collect();
    let records = vec![
        record(ABLATION_GLOBAL, "d1-ablation", 10, 10),
        record(ABLATION_LOCAL, "d1-ablation", 10, 5),
        record(ABLATION_BALANCED, "d1-ablation", 10, 9),
    ];
    Fixture {
        task_context: TASK_CONTEXT.into(),
        rules,
        queries: listings.into_iter().map(|(q, _)| q).collect(),
        library: TemplateLibrary::new(TASK_CONTEXT, templates),
        records,
        script: ScriptFile {
            entries,
            bigram_corpus: corpus_text,
        },
    }
}

const STEP_POOL: [&str; 12] = [
    "Identify the [product type] and its category.",
    "Quote every [claimed effect] word for word.",
    "Determine the [target audience], paying attention to minors.",
    "Check each claim against the rules of the category one at a time.",
    "Look for an [exemption] that could make the listing compliant.",
    "Note any [supporting evidence] such as certificates or studies.",
    "Separate factual product descriptions from promises of results.",
    "Flag wording that implies a medical effect or a [treatment promise].",
    "Compare the [claimed effect] with the prohibited wording of each rule.",
    "Resolve conflicts between overlapping rules before deciding.",
    "Decide which rule ids are violated, or choose the compliant option.",
    "Summarise the [decisive evidence] for the decision.",
];

/// A numbered body built from the step pool, deterministic in `seed`.
fn pooled_body(seed: u64, steps: usize, preamble: Option<&str>) -> String {
    let mut rng = SplitMix64::new(seed);
    let picks = rng.sample_indices(STEP_POOL.len() - 1, steps - 1);
    let mut lines: Vec<String> = preamble.map(str::to_string).into_iter().collect();
    for (n, p) in picks.iter().enumerate() {
        lines.push(format!("{}. {}", n + 1, STEP_POOL[*p]));
    }
    lines.push(format!("{}. {}", steps, STEP_POOL[STEP_POOL.len() - 1]));
    lines.join("\n")
}

/// Seed bodies returned for tags `seed/1` .. `seed/m`.
pub fn seed_bodies(m: usize) -> Vec<String> {
    (1..=m)
        .map(|i| {
            let preamble = (i % 3 == 0).then_some("Use this checklist for every listing.");
            pooled_body(1000 + i as u64, 3 + i % 3, preamble)
        })
        .collect()
}

/// Script answering `seed/i` with [`seed_bodies`].
pub fn seed_script(m: usize) -> ScriptFile {
    ScriptFile {
        entries: seed_bodies(m)
            .into_iter()
            .enumerate()
            .map(|(i, body)| ScriptEntry::tag(format!("seed/{}", i + 1), body))
            .collect(),
        bigram_corpus: String::new(),
    }
}

/// Style rewrite `j` of a numbered body; placeholders are kept verbatim.
pub fn restyle(body: &str, j: usize) -> String {
    let layout = crate::domain::parse_steps(body).expect("fixture bodies are numbered");
    let strip = |text: &str| -> String {
        let t = text.trim_start();
        let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
        t[digits..].trim_start_matches(['.', ')', ':']).trim_start().to_string()
    };
    let mut lines = Vec::new();
    match j % 2 {
        1 => {
            lines.push("Follow these steps carefully.".to_string());
            for s in &layout.steps {
                lines.push(format!("Step {}: {}", s.number, strip(&s.text)));
            }
        }
        _ => {
            lines.push(format!("Checklist (variant {j}):"));
            for s in &layout.steps {
                lines.push(format!("{}) {}", s.number, strip(&s.text)));
            }
        }
    }
    lines.join("\n")
}

/// Library construction fixture: scripted seeds, continuations and style
/// variants, plus per-listing adjudications that make exactly two
/// templates reach the retention threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFixture {
    pub task_context: String,
    pub rules: RuleSet,
    pub dataset: Vec<Query>,
    pub script: ScriptFile,
    pub config: PipelineConfig,
    pub high_scorers: [String; 2],
    pub mid_scorer: String,
}

pub fn pipeline() -> PipelineFixture {
    let config = PipelineConfig {
        m: 3,
        k: Some(2),
        v: 2,
        r: 0.2,
        theta: 0.7,
        rng_seed: 7,
        ..PipelineConfig::default()
    };
    let rules = rules();
    let dataset: Vec<Query> = corpus()
        .into_iter()
        .filter(|q| !q.gold.contains(COMPLIANT))
        .step_by(4)
        .take(20)
        .collect();
    let high_scorers = ["seed-01".to_string(), "seed-02.c.s1".to_string()];
    let mid_scorer = "seed-03".to_string();

    let mut entries = Vec::new();
    let seeds: Vec<String> = (1..=3u64)
        .map(|i| pooled_body(2000 + i, 4, None))
        .collect();
    for (i, body) in seeds.iter().enumerate() {
        let sid = format!("seed-{:02}", i + 1);
        entries.push(ScriptEntry::tag(format!("seed/{}", i + 1), body.clone()));
        let tail = pooled_body(3000 + i as u64, 4, None);
        let tail_layout = crate::domain::parse_steps(&tail).expect("numbered");
        let continuation = tail_layout.steps[2..]
            .iter()
            .map(|s| s.text.clone())
            .collect::<Vec<_>>()
            .join("\n");
        entries.push(ScriptEntry::tag(format!("continue/{sid}"), continuation.clone()));
        let prefix = crate::domain::parse_steps(body).expect("numbered").prefix(2);
        let full = format!("{prefix}\n{continuation}");
        for (tid, tbody) in [(sid.clone(), body.clone()), (format!("{sid}.c"), full)] {
            for j in 1..=2 {
                entries.push(ScriptEntry::tag(format!("style/{tid}/{j}"), restyle(&tbody, j)));
            }
        }
    }

    let d1 = sample_eval_subset(&dataset, config.r, config.rng_seed).expect("non-empty dataset");
    for (n, q) in d1.iter().enumerate() {
        let gold = ids(&q.gold);
        for tid in &high_scorers {
            entries.push(ScriptEntry::tag(format!("adjudicate/{}/{tid}", q.id), format!("ANSWER: {gold}")));
        }
        if n < 2 {
            entries.push(ScriptEntry::tag(format!("adjudicate/{}/{mid_scorer}", q.id), format!("ANSWER: {gold}")));
        }
    }
    entries.push(ScriptEntry::tag("qualitative/*", "Initial review.\nANSWER: Z"));
    entries.push(ScriptEntry::tag("extract/*", "NONE"));
    entries.push(ScriptEntry::tag("adjudicate/*", "Nothing prohibited was found.\nANSWER: Z"));

    PipelineFixture {
        task_context: TASK_CONTEXT.into(),
        rules,
        dataset,
        script: ScriptFile {
            entries,
            bigram_corpus: String::new(),
        },
        config,
        high_scorers,
        mid_scorer,
    }
}

pub const CONFIG_FILE: &str = "config.json";
pub const SCORE_RECORDS_FILE: &str = "score_records.jsonl";

impl PipelineFixture {
    /// Writes the construction inputs: context, rules, dataset, script and config.
    pub fn write(&self, dir: &Path) -> Result<(), JsonError> {
        json::write_text(&dir.join(CONTEXT_FILE), &format!("{}\n", self.task_context))?;
        json::write_file(&dir.join(RULES_FILE), &self.rules)?;
        json::write_jsonl(&dir.join(QUERIES_FILE), &self.dataset)?;
        json::write_file(&dir.join(SCRIPT_FILE), &self.script)?;
        json::write_file(&dir.join(CONFIG_FILE), &self.config)?;
        Ok(())
    }
}

/// Writes every fixture under `root`: `benchmark/`, `ablation/`,
/// `pipeline/`, `seeds/` (ten scripted seeds) and `sampling/` (100
/// numbered queries).
pub fn write_all(root: &Path) -> Result<(), JsonError> {
    let dir = |name: &str| -> Result<std::path::PathBuf, JsonError> {
        let d = root.join(name);
        std::fs::create_dir_all(&d).map_err(|source| JsonError::Io {
            path: d.display().to_string(),
            source,
        })?;
        Ok(d)
    };
    let bench = dir("benchmark")?;
    benchmark().write(&bench)?;
    json::write_jsonl(&bench.join(SCORE_RECORDS_FILE), &benchmark_score_records())?;
    ablation().write(&dir("ablation")?)?;
    pipeline().write(&dir("pipeline")?)?;
    let seeds = dir("seeds")?;
    json::write_file(&seeds.join(SCRIPT_FILE), &seed_script(10))?;
    json::write_jsonl(&dir("sampling")?.join(QUERIES_FILE), &numbered_dataset(100))?;
    Ok(())
}

/// Preference pairs labelled by a hidden linear scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFixture {
    pub feature_dim: usize,
    /// The hidden weights `w*`.
    pub weights: Vec<f64>,
    pub queries: Vec<Query>,
    pub templates: Vec<Template>,
    pub train: Vec<PreferencePair>,
    pub held_out: Vec<PreferencePair>,
}

const PLANTED_WORDS: [&str; 24] = [
    "slim", "grow", "cure", "fast", "herbal", "tea", "cream", "kids", "doctor", "sleep", "energy", "hair",
    "waist", "bone", "sugar", "virus", "size", "diet", "lab", "gentle", "daily", "natural", "serum", "tonic",
];

fn planted_text(rng: &mut SplitMix64, words: usize) -> String {
    rng.sample_indices(PLANTED_WORDS.len(), words)
        .into_iter()
        .map(|i| PLANTED_WORDS[i])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random word-bag queries and templates, with every template pair of a
/// query labelled by the sign of `w* . (phi(Q, T_a) - phi(Q, T_b))`. Pairs
/// whose planted margin is below `min_margin` are skipped. Held-out pairs
/// come from queries absent from training.
pub fn planted(seed: u64, n_train: usize, n_held_out: usize, min_margin: f64) -> PlantedFixture {
    use crate::preference::features::features;
    let feature_dim = 1024;
    let mut rng = SplitMix64::new(seed);
    let weights: Vec<f64> = (0..feature_dim).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
    let templates: Vec<Template> = (0..8)
        .map(|i| retained(&format!("P{}", i + 1), &format!("Planted {}", i + 1), &planted_text(&mut rng, 5)))
        .collect();
    let queries: Vec<Query> = (0..n_train + n_held_out)
        .map(|i| Query {
            id: format!("p{:03}", i + 1),
            category: if i < n_train { "train" } else { "held_out" }.into(),
            content: planted_text(&mut rng, 6),
            gold: RuleIdSet::new(),
        })
        .collect();
    let (mut train, mut held_out) = (Vec::new(), Vec::new());
    for (n, q) in queries.iter().enumerate() {
        let r: Vec<f64> = templates
            .iter()
            .map(|t| {
                features(&q.content, &t.body, feature_dim)
                    .entries
                    .iter()
                    .map(|&(i, c)| weights[i] * c)
                    .sum()
            })
            .collect();
        for a in 0..templates.len() {
            for b in a + 1..templates.len() {
                let margin = r[a] - r[b];
                if margin.abs() < min_margin {
                    continue;
                }
                let (w, l) = if margin > 0.0 { (a, b) } else { (b, a) };
                let pair = PreferencePair {
                    query_id: q.id.clone(),
                    winner_id: templates[w].id.clone(),
                    loser_id: templates[l].id.clone(),
                };
                if n < n_train { train.push(pair) } else { held_out.push(pair) }
            }
        }
    }
    PlantedFixture {
        feature_dim,
        weights,
        queries,
        templates,
        train,
        held_out,
    }
}

/// The placeholder names used by the benchmark templates.
pub fn placeholder_vocabulary() -> &'static [&'static str] {
    &PLACEHOLDER_VOCAB
}
